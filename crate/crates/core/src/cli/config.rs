//! Run configuration, loadable from JSON and overridable by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sis::ShiftStructure;
use crate::solver::{InitStrategy, SolveConfig};
use crate::sparsity::CertificateOptions;

use super::ingest::IngestMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Euclidean,
    Sis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub input: PathBuf,
    pub l: Option<usize>,
    pub n: Option<usize>,
    /// Sweep ranges.
    pub ls: Vec<usize>,
    pub ns: Vec<usize>,
    pub restarts: usize,
    pub seed: u64,
    pub init_strategy: InitStrategy,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub dedup_tol: f64,
    pub exact_tol: Option<f64>,
    /// `M`, sis mode only.
    pub signal_len: Option<usize>,
    /// `L`, sis mode only.
    pub shift: Option<usize>,
    /// JSON report.
    pub output: PathBuf,
    /// Sweep CSV with columns `l,n,epsilon`.
    pub csv_output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolveConfig::default();
        Self {
            mode: Mode::Euclidean,
            input: PathBuf::new(),
            l: None,
            n: None,
            ls: Vec::new(),
            ns: Vec::new(),
            restarts: s.restarts,
            seed: s.seed,
            init_strategy: s.init_strategy,
            rel_tol: s.rel_tol,
            max_iters: s.max_iters,
            dedup_tol: CertificateOptions::default().dedup_tol,
            exact_tol: None,
            signal_len: None,
            shift: None,
            output: PathBuf::new(),
            csv_output: None,
        }
    }
}

fn nonempty(p: &Path, what: &str) -> Result<()> {
    if p.as_os_str().is_empty() {
        return Err(Error::InvalidConfig(format!("{what} path is empty")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks paths and mode-specific fields shared by every run.
    fn validate_common(&self) -> Result<()> {
        nonempty(&self.input, "input")?;
        nonempty(&self.output, "output")?;
        if self.mode == Mode::Sis {
            self.structure()?;
        }
        Ok(())
    }

    pub fn validate_fit(&self) -> Result<()> {
        self.validate_common()?;
        let cfg = self.solve_config()?;
        cfg.validate()
    }

    pub fn validate_sweep(&self) -> Result<()> {
        self.validate_common()?;
        let (ls, ns) = self.sweep_ranges()?;
        match &self.csv_output {
            Some(p) => nonempty(p, "csv output")?,
            None => return Err(Error::InvalidConfig("sweep needs a csv output path".into())),
        }
        for &l in &ls {
            for &n in &ns {
                SolveConfig {
                    l,
                    n,
                    ..self.base_solve_config()
                }
                .validate()?;
            }
        }
        Ok(())
    }

    pub fn structure(&self) -> Result<ShiftStructure> {
        match (self.signal_len, self.shift) {
            (Some(m), Some(l)) => ShiftStructure::new(m, l),
            _ => Err(Error::InvalidConfig(
                "sis mode needs signal_len (M) and shift (L)".into(),
            )),
        }
    }

    pub fn ingest_mode(&self) -> Result<IngestMode> {
        Ok(match self.mode {
            Mode::Euclidean => IngestMode::Euclidean,
            Mode::Sis => IngestMode::Sis(self.structure()?),
        })
    }

    pub(crate) fn base_solve_config(&self) -> SolveConfig {
        SolveConfig {
            l: 0,
            n: 0,
            restarts: self.restarts,
            seed: self.seed,
            init_strategy: self.init_strategy,
            rel_tol: self.rel_tol,
            max_iters: self.max_iters,
        }
    }

    pub fn solve_config(&self) -> Result<SolveConfig> {
        match (self.l, self.n) {
            (Some(l), Some(n)) => Ok(SolveConfig {
                l,
                n,
                ..self.base_solve_config()
            }),
            _ => Err(Error::InvalidConfig("fit needs both l and n".into())),
        }
    }

    /// Sweep ranges, falling back to the single `l` / `n` values.
    pub fn sweep_ranges(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let pick = |range: &[usize], single: Option<usize>, name: &str| {
            if !range.is_empty() {
                Ok(range.to_vec())
            } else {
                single
                    .map(|v| vec![v])
                    .ok_or_else(|| Error::InvalidConfig(format!("sweep needs {name}s or {name}")))
            }
        };
        Ok((pick(&self.ls, self.l, "l")?, pick(&self.ns, self.n, "n")?))
    }

    pub fn certificate_options(&self) -> CertificateOptions {
        CertificateOptions {
            dedup_tol: self.dedup_tol,
            exact_tol: self.exact_tol,
        }
    }
}

/// Parses `3`, `1..5` (inclusive), `1..=5` or `1,2,4`.
pub fn parse_range(s: &str) -> std::result::Result<Vec<usize>, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(num).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_config() -> RunConfig {
        RunConfig {
            input: "in.csv".into(),
            output: "out.json".into(),
            l: Some(2),
            n: Some(1),
            ..RunConfig::default()
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_range("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_range("1, 3,5").unwrap(), vec![1, 3, 5]);
        assert_eq!(parse_range("7").unwrap(), vec![7]);
        assert!(parse_range("4..1").is_err());
        assert!(parse_range("a").is_err());
    }

    #[test]
    fn validation() {
        assert!(fit_config().validate_fit().is_ok());
        assert!(RunConfig {
            output: PathBuf::new(),
            ..fit_config()
        }
        .validate_fit()
        .is_err());
        assert!(RunConfig {
            n: None,
            ..fit_config()
        }
        .validate_fit()
        .is_err());
        let sis = RunConfig {
            mode: Mode::Sis,
            ..fit_config()
        };
        assert!(sis.validate_fit().is_err());
        let sis = RunConfig {
            signal_len: Some(8),
            shift: Some(2),
            ..sis
        };
        assert!(sis.validate_fit().is_ok());
        assert!(RunConfig {
            shift: Some(3),
            ..sis
        }
        .validate_fit()
        .is_err());
        assert!(fit_config().validate_sweep().is_err());
        let sweep = RunConfig {
            csv_output: Some("c.csv".into()),
            ls: vec![1, 2],
            ..fit_config()
        };
        assert!(sweep.validate_sweep().is_ok());
    }

    #[test]
    fn json_defaults_and_unknown_fields() {
        let c: RunConfig =
            serde_json::from_str(r#"{"input":"a.csv","output":"b.json","l":3,"n":2}"#).unwrap();
        assert_eq!(c.restarts, SolveConfig::default().restarts);
        assert_eq!(c.solve_config().unwrap().l, 3);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus":1}"#).is_err());
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
