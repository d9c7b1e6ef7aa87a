//! Command-line surface: `fit`, `sweep`, `generate` and `score`.

pub mod config;
pub mod generate;
pub mod ingest;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::solver::InitStrategy;

pub use config::{Mode, RunConfig};
pub use generate::{generate, GenerateSpec, Generated};
pub use ingest::{ingest, IngestMode};
pub use report::{RunReport, ScoreReport, SweepReport};

#[derive(Debug, Parser)]
#[command(
    name = "bundlefit",
    version,
    about = "Optimal union-of-subspaces models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a bundle of l subspaces of dimension ≤ n and write a JSON report.
    Fit(RunArgs),
    /// Warm-started sweep over l (and n); writes an l,n,epsilon CSV plus a JSON report.
    Sweep(RunArgs),
    /// Write synthetic union-of-subspaces data as CSV.
    Generate(GenerateArgs),
    /// Re-evaluate a stored model on data.
    Score(ScoreArgs),
}

fn parse_init(s: &str) -> std::result::Result<InitStrategy, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown init strategy '{s}' (random_partition | farthest_point)"))
}

/// A whole list parsed from one flag value.
type Values = Vec<usize>;

/// Flags override values from `--config`.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(short, long)]
    pub l: Option<usize>,
    #[arg(short, long)]
    pub n: Option<usize>,
    /// Sweep values of l: `1..5`, `1,2,4` or a single value.
    #[arg(long, value_parser = config::parse_range)]
    pub ls: Option<Values>,
    /// Sweep values of n.
    #[arg(long, value_parser = config::parse_range)]
    pub ns: Option<Values>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_init)]
    pub init: Option<InitStrategy>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub dedup_tol: Option<f64>,
    /// ε at or below which the data counts as exactly (l, n)-sparse.
    #[arg(long)]
    pub exact_tol: Option<f64>,
    /// Signal length M (sis mode).
    #[arg(long = "signal-len", short = 'M')]
    pub signal_len: Option<usize>,
    /// Shift L (sis mode).
    #[arg(long, short = 'L')]
    pub shift: Option<usize>,
    /// JSON report path.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Sweep CSV path.
    #[arg(long = "csv")]
    pub csv_output: Option<PathBuf>,
    /// Add a timings section to the report.
    #[arg(long)]
    pub timings: bool,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f.clone(); } )* };
        }
        set!(mode, input, ls, ns, restarts, seed, rel_tol, max_iters, dedup_tol, output);
        set_opt!(l, n, exact_tol, signal_len, shift, csv_output);
        if let Some(init) = self.init {
            c.init_strategy = init;
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(short, long)]
    pub l: usize,
    #[arg(short, long)]
    pub n: usize,
    /// Ambient dimension N.
    #[arg(long = "dim", short = 'N')]
    pub ambient_dim: usize,
    #[arg(long, default_value_t = 10)]
    pub points_per_subspace: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Report written by `fit`.
    #[arg(short, long)]
    pub model: PathBuf,
    /// Data to score; defaults to the input recorded in the report.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// JSON output path; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Executes one command and returns the line to print on success.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Fit(a) => {
            let cfg = a.resolve()?;
            let r = report::run_fit(&cfg, a.timings)?;
            Ok(format!(
                "objective {:e} written to {}",
                r.objective,
                cfg.output.display()
            ))
        }
        Command::Sweep(a) => {
            let cfg = a.resolve()?;
            let r = report::run_sweep(&cfg, a.timings)?;
            let csv = cfg.csv_output.as_deref().unwrap_or(cfg.output.as_path());
            Ok(format!(
                "{} rows written to {}",
                r.rows.len(),
                csv.display()
            ))
        }
        Command::Generate(a) => {
            if a.output.as_os_str().is_empty() {
                return Err(Error::InvalidConfig("output path is empty".into()));
            }
            let g = generate(&GenerateSpec {
                l: a.l,
                n: a.n,
                ambient_dim: a.ambient_dim,
                points_per_subspace: a.points_per_subspace,
                noise_sigma: a.noise_sigma,
                seed: a.seed,
            })?;
            ingest::write_csv(&a.output, &g.data)?;
            Ok(format!(
                "{} points written to {}",
                g.data.len(),
                a.output.display()
            ))
        }
        Command::Score(a) => {
            let r = report::run_score(&a.model, a.input.as_deref())?;
            match &a.output {
                Some(p) => {
                    report::write_json(p, &r)?;
                    Ok(format!(
                        "objective {:e} written to {}",
                        r.objective,
                        p.display()
                    ))
                }
                None => Ok(serde_json::to_string_pretty(&r)?),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"input":"a.csv","output":"r.json","l":2,"n":1,"seed":5}"#,
        )
        .unwrap();
        let cli = Cli::parse_from([
            "bundlefit",
            "fit",
            "--config",
            path.to_str().unwrap(),
            "-n",
            "3",
            "--init",
            "farthest-point",
        ]);
        let Command::Fit(args) = cli.command else {
            panic!()
        };
        let c = args.resolve().unwrap();
        assert_eq!((c.l, c.n, c.seed), (Some(2), Some(3), 5));
        assert_eq!(c.init_strategy, InitStrategy::FarthestPoint);
    }

    #[test]
    fn sweep_ranges_parse() {
        let cli = Cli::parse_from([
            "bundlefit",
            "sweep",
            "-i",
            "a.csv",
            "-o",
            "r.json",
            "--csv",
            "c.csv",
            "--ls",
            "1..3",
            "--ns",
            "1,2",
        ]);
        let Command::Sweep(args) = cli.command else {
            panic!()
        };
        let c = args.resolve().unwrap();
        assert_eq!(c.sweep_ranges().unwrap(), (vec![1, 2, 3], vec![1, 2]));
        assert!(c.validate_sweep().is_ok());
    }
}
