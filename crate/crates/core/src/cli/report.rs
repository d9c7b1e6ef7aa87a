//! JSON reports and the `fit`, `sweep` and `score` drivers.

use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bundle::{self, Bundle, Euclidean, ModelFamily};
use crate::error::{Error, Result};
use crate::sis::{self, ShiftStructure, SisFamily, SisModel, Spectrum};
use crate::solver::{self, CurveRow, SolveReport};
use crate::sparsity::{self, SparseVector};
use crate::subspace::{DataSet, Subspace};

use super::config::{Mode, RunConfig};
use super::ingest::{self, csv_io, IngestMode};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub points: usize,
    pub dim: usize,
    pub energy: f64,
}

impl DataSummary {
    fn of(data: &DataSet) -> Self {
        Self {
            points: data.len(),
            dim: data.dim(),
            energy: data.energy(),
        }
    }
}

/// Fitted bundle. SIS generators are stored as spectra of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredModel {
    Euclidean {
        subspaces: Vec<Subspace>,
    },
    Sis {
        structure: ShiftStructure,
        components: Vec<Vec<Vec<[f64; 2]>>>,
    },
}

impl StoredModel {
    fn from_sis(structure: ShiftStructure, bundle: &Bundle<SisModel>) -> Self {
        let components = bundle
            .components()
            .iter()
            .map(|m| {
                m.generators
                    .iter()
                    .map(|g| g.iter().map(|c| [c.re, c.im]).collect())
                    .collect()
            })
            .collect();
        StoredModel::Sis {
            structure,
            components,
        }
    }

    fn sis_bundle(
        structure: ShiftStructure,
        components: &[Vec<Vec<[f64; 2]>>],
    ) -> Result<Bundle<SisModel>> {
        let models = components
            .iter()
            .map(|gens| {
                let spectra: Vec<Spectrum> = gens
                    .iter()
                    .map(|g| g.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                    .collect();
                SisModel::from_generators(structure, spectra)
            })
            .collect::<Result<Vec<_>>>()?;
        Bundle::new(models)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryReport {
    /// Unit-norm atoms.
    pub atoms: Vec<Vec<f64>>,
    /// Atom indices spanning each component.
    pub atom_to_subspace: Vec<Vec<usize>>,
    /// Atom count before merging shared directions.
    pub raw_size: usize,
    /// One `n`-sparse code per point.
    pub codes: Vec<SparseVector>,
    pub code_residual: f64,
    pub is_exact: bool,
    pub exact_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartStats {
    pub winning_restart: usize,
    pub per_restart_objectives: Vec<f64>,
    pub iterations_per_restart: Vec<usize>,
    pub converged_per_restart: Vec<bool>,
    pub objective_trace: Vec<f64>,
    pub degenerate_flags: Vec<bool>,
}

impl RestartStats {
    fn of<M>(r: &SolveReport<M>) -> Self {
        Self {
            winning_restart: r.winning_restart,
            per_restart_objectives: r.per_restart_objectives.clone(),
            iterations_per_restart: r.iterations_per_restart.clone(),
            converged_per_restart: r.converged_per_restart.clone(),
            objective_trace: r.objective_trace.clone(),
            degenerate_flags: r.degenerate_flags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
}

/// Output of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub data: DataSummary,
    /// e(F, V) for the returned bundle.
    pub objective: f64,
    pub converged: bool,
    /// Nearest component of each point.
    pub assignment: Vec<usize>,
    /// Squared distance of each point to its nearest component.
    pub residuals: Vec<f64>,
    pub model: StoredModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<DictionaryReport>,
    pub restarts: RestartStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Output of `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub data: DataSummary,
    pub rows: Vec<CurveRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Output of `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub data: DataSummary,
    pub objective: f64,
    /// Objective recorded in the model's report.
    pub stored_objective: f64,
    pub assignment: Vec<usize>,
    pub residuals: Vec<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "report schema version {} is not supported (expected {SCHEMA_VERSION})",
            report.schema_version
        )));
    }
    Ok(report)
}

/// Nearest assignment and residuals. Their sum matches `objective_e` term by term.
fn nearest<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    bundle: &Bundle<F::Model>,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let partition = bundle::best_partition(family, points, bundle)?;
    let comps = bundle.components();
    let residuals = points
        .iter()
        .zip(partition.assignment())
        .map(|(p, &j)| family.dist_sq(&comps[j], p))
        .collect();
    Ok((partition.assignment().to_vec(), residuals))
}

fn timings(start: Instant, enabled: bool) -> Option<Timings> {
    enabled.then(|| Timings {
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs `fit` and writes the report to `config.output`.
pub fn run_fit(config: &RunConfig, with_timings: bool) -> Result<RunReport> {
    let start = Instant::now();
    config.validate_fit()?;
    let data = ingest::ingest(&config.input, config.ingest_mode()?)?;
    let cfg = config.solve_config()?;
    let (objective, converged, assignment, residuals, model, dictionary, restarts) = match config
        .mode
    {
        Mode::Euclidean => {
            let cert = sparsity::sparsity_certificate(&data, &cfg, &config.certificate_options())?;
            let family = Euclidean::new(data.dim());
            let (assignment, residuals) =
                nearest(&family, data.vectors(), &cert.report.best_bundle)?;
            let dictionary = DictionaryReport {
                atoms: cert
                    .dictionary
                    .atoms
                    .iter()
                    .map(|a| a.iter().copied().collect())
                    .collect(),
                atom_to_subspace: cert.dictionary.atom_to_subspace.clone(),
                raw_size: cert.dictionary.raw_size,
                codes: cert.code.columns.clone(),
                code_residual: cert.code_residual,
                is_exact: cert.is_exact,
                exact_tol: cert.exact_tol,
            };
            let r = &cert.report;
            (
                r.objective,
                r.converged,
                assignment,
                residuals,
                StoredModel::Euclidean {
                    subspaces: r.best_bundle.components().to_vec(),
                },
                Some(dictionary),
                RestartStats::of(r),
            )
        }
        Mode::Sis => {
            let s = config.structure()?;
            let spectra = sis::spectra_of(&data);
            let r = sis::solve_sis_bundle(&spectra, &s, &cfg)?;
            let (assignment, residuals) =
                nearest(&SisFamily { structure: s }, &spectra, &r.best_bundle)?;
            (
                r.objective,
                r.converged,
                assignment,
                residuals,
                StoredModel::from_sis(s, &r.best_bundle),
                None,
                RestartStats::of(&r),
            )
        }
    };
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.into(),
        config: config.clone(),
        data: DataSummary::of(&data),
        objective,
        converged,
        assignment,
        residuals,
        model,
        dictionary,
        restarts,
        timings: None,
    };
    report.timings = timings(start, with_timings);
    write_json(&config.output, &report)?;
    Ok(report)
}

/// Runs `sweep`: writes the `l,n,epsilon` CSV and the JSON report.
pub fn run_sweep(config: &RunConfig, with_timings: bool) -> Result<SweepReport> {
    let start = Instant::now();
    config.validate_sweep()?;
    let data = ingest::ingest(&config.input, config.ingest_mode()?)?;
    let (ls, ns) = config.sweep_ranges()?;
    let cfg = solver::SolveConfig {
        l: ls[0],
        n: ns[0],
        ..config.base_solve_config()
    };
    let rows = match config.mode {
        Mode::Euclidean => {
            solver::sparsity_curve(&Euclidean::new(data.dim()), data.vectors(), &ls, &ns, &cfg)?
        }
        Mode::Sis => {
            let s = config.structure()?;
            solver::sparsity_curve(
                &SisFamily { structure: s },
                &sis::spectra_of(&data),
                &ls,
                &ns,
                &cfg,
            )?
        }
    };
    let csv_path = config
        .csv_output
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("missing csv output".into()))?;
    let mut w = csv::Writer::from_path(csv_path).map_err(csv_io)?;
    w.write_record(["l", "n", "epsilon"]).map_err(csv_io)?;
    for row in &rows {
        w.write_record([
            row.l.to_string(),
            row.n.to_string(),
            row.epsilon.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.into(),
        config: config.clone(),
        data: DataSummary::of(&data),
        rows,
        timings: timings(start, with_timings),
    };
    write_json(&config.output, &report)?;
    Ok(report)
}

/// Re-evaluates a stored model on `input` (defaulting to the data it was fitted on).
pub fn run_score(model_path: &Path, input: Option<&Path>) -> Result<ScoreReport> {
    let stored = read_report(model_path)?;
    let input = input.unwrap_or(&stored.config.input);
    let (data, assignment, residuals) = match &stored.model {
        StoredModel::Euclidean { subspaces } => {
            let data = ingest::ingest(input, IngestMode::Euclidean)?;
            let bundle = Bundle::new(subspaces.clone())?;
            let dim = bundle.components()[0].ambient_dim();
            let (a, r) = nearest(&Euclidean::new(dim), data.vectors(), &bundle)?;
            (data, a, r)
        }
        StoredModel::Sis {
            structure,
            components,
        } => {
            let data = ingest::ingest(input, IngestMode::Sis(*structure))?;
            let bundle = StoredModel::sis_bundle(*structure, components)?;
            let (a, r) = nearest(
                &SisFamily {
                    structure: *structure,
                },
                &sis::spectra_of(&data),
                &bundle,
            )?;
            (data, a, r)
        }
    };
    Ok(ScoreReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.into(),
        data: DataSummary::of(&data),
        objective: residuals.iter().sum(),
        stored_objective: stored.objective,
        assignment,
        residuals,
    })
}
