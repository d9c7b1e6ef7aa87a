//! Sparsity certificates: a dictionary of at most `l·n` atoms built from an
//! optimal bundle, and `n`-sparse codes reproducing the bundle's error.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bundle::{self, Bundle, Euclidean, Partition};
use crate::error::{Error, Result};
use crate::solver::{self, SolveConfig, SolveReport};
use crate::spectral::orthonormalize_against;
use crate::subspace::{DataSet, Subspace};

const SPAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub ambient_dim: usize,
    /// Unit vectors.
    pub atoms: Vec<DVector<f64>>,
    /// For every bundle component, the indices of the atoms spanning it. Each
    /// such set is orthonormal.
    pub atom_to_subspace: Vec<Vec<usize>>,
    /// Atom count before shared directions were merged.
    pub raw_size: usize,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `D x` for a sparse coefficient vector.
    pub fn synthesize(&self, x: &SparseVector) -> DVector<f64> {
        let mut out = DVector::zeros(self.ambient_dim);
        for (&k, &c) in x.indices.iter().zip(&x.values) {
            out.axpy(c, &self.atoms[k], 1.0);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    /// ‖x‖₀.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCode {
    pub columns: Vec<SparseVector>,
    pub support_sizes: Vec<usize>,
}

/// Concatenates the orthonormal bases of the nonzero components.
///
/// With `dedup_tol > 0`, an existing atom is reused by a later component when
/// its projection onto that component has norm above `1 - dedup_tol`, it lies
/// in the component to `1e-10`, and it is orthogonal to the atoms already
/// chosen for the component. The component's remaining directions are
/// completed by Gram-Schmidt. `dedup_tol = 0` disables merging.
pub fn extract_dictionary(bundle: &Bundle<Subspace>, dedup_tol: f64) -> Result<Dictionary> {
    if !(0.0..1.0).contains(&dedup_tol) {
        return Err(Error::InvalidConfig(format!(
            "dedup_tol must lie in [0, 1), got {dedup_tol}"
        )));
    }
    let ambient_dim = bundle.components().first().map_or(0, Subspace::ambient_dim);
    let mut atoms: Vec<DVector<f64>> = Vec::new();
    let mut atom_to_subspace = Vec::with_capacity(bundle.len());
    let mut raw_size = 0;

    for component in bundle.components() {
        if component.ambient_dim() != ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: ambient_dim,
                found: component.ambient_dim(),
            });
        }
        let dim = component.dim();
        raw_size += dim;
        let mut chosen: Vec<usize> = Vec::with_capacity(dim);
        let mut chosen_vecs: Vec<DVector<f64>> = Vec::with_capacity(dim);

        if dedup_tol > 0.0 {
            for (k, atom) in atoms.iter().enumerate() {
                if chosen.len() == dim {
                    break;
                }
                let projected = component.project_unchecked(atom);
                let coherent = projected.norm() > 1.0 - dedup_tol;
                let inside = (atom - &projected).norm() <= SPAN_TOL;
                let orthogonal = chosen_vecs.iter().all(|c| c.dot(atom).abs() <= SPAN_TOL);
                if coherent && inside && orthogonal {
                    chosen.push(k);
                    chosen_vecs.push(atom.clone());
                }
            }
        }
        for b in component.basis_vectors() {
            if chosen.len() == dim {
                break;
            }
            if let Some(u) = orthonormalize_against(b, &chosen_vecs) {
                chosen.push(atoms.len());
                chosen_vecs.push(u.clone());
                atoms.push(u);
            }
        }
        atom_to_subspace.push(chosen);
    }
    Ok(Dictionary {
        ambient_dim,
        atoms,
        atom_to_subspace,
        raw_size,
    })
}

/// Codes every point in the atoms of its assigned component: `xᵢ` holds the
/// coordinates of `𝒫_{V_{P(i)}} fᵢ`.
pub fn encode(
    data: &DataSet,
    bundle: &Bundle<Subspace>,
    partition: &Partition,
    dictionary: &Dictionary,
) -> Result<SparseCode> {
    if partition.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: partition.len(),
        });
    }
    if partition.cells() > bundle.len() || dictionary.atom_to_subspace.len() != bundle.len() {
        return Err(Error::DimensionMismatch {
            expected: bundle.len(),
            found: dictionary.atom_to_subspace.len(),
        });
    }
    if !data.is_empty() && data.dim() != dictionary.ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: dictionary.ambient_dim,
            found: data.dim(),
        });
    }
    let columns: Vec<SparseVector> = data
        .vectors()
        .iter()
        .zip(partition.assignment())
        .map(|(f, &c)| {
            let indices = dictionary.atom_to_subspace[c].clone();
            let values = indices
                .iter()
                .map(|&k| dictionary.atoms[k].dot(f))
                .collect();
            SparseVector { indices, values }
        })
        .collect();
    let support_sizes = columns.iter().map(SparseVector::support_size).collect();
    Ok(SparseCode {
        columns,
        support_sizes,
    })
}

/// ‖fᵢ − D xᵢ‖² for every point.
pub fn code_residuals(data: &DataSet, dictionary: &Dictionary, code: &SparseCode) -> Vec<f64> {
    data.vectors()
        .iter()
        .zip(&code.columns)
        .map(|(f, x)| (f - dictionary.synthesize(x)).norm_squared())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    pub dedup_tol: f64,
    /// Threshold below which ε counts as zero. `None` means
    /// `1e-10·Σ‖fᵢ‖²`, or `1e-12` for all-zero data.
    pub exact_tol: Option<f64>,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            dedup_tol: 0.0,
            exact_tol: None,
        }
    }
}

pub fn default_exact_tol(data: &DataSet) -> f64 {
    let energy = data.energy();
    if energy > 0.0 {
        1e-10 * energy
    } else {
        1e-12
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityCertificate {
    /// Smallest ε found for which the data is (l, n, ε)-sparse.
    pub epsilon: f64,
    pub is_exact: bool,
    pub exact_tol: f64,
    pub dictionary: Dictionary,
    /// Codes in the nearest component, `Ω(V)`.
    pub assignment: Partition,
    pub code: SparseCode,
    /// Σ‖fᵢ − D xᵢ‖².
    pub code_residual: f64,
    pub report: SolveReport<Subspace>,
}

pub fn sparsity_certificate(
    data: &DataSet,
    cfg: &SolveConfig,
    opts: &CertificateOptions,
) -> Result<SparsityCertificate> {
    let family = Euclidean::new(data.dim());
    let report = solver::solve(&family, data.vectors(), cfg)?;
    certificate_from_report(data, report, opts)
}

/// Builds the certificate for an existing solver result.
pub fn certificate_from_report(
    data: &DataSet,
    report: SolveReport<Subspace>,
    opts: &CertificateOptions,
) -> Result<SparsityCertificate> {
    let dictionary = extract_dictionary(&report.best_bundle, opts.dedup_tol)?;
    let family = Euclidean::new(data.dim());
    let assignment = bundle::best_partition(&family, data.vectors(), &report.best_bundle)?;
    let code = encode(data, &report.best_bundle, &assignment, &dictionary)?;
    let code_residual = code_residuals(data, &dictionary, &code).iter().sum();
    let exact_tol = opts.exact_tol.unwrap_or_else(|| default_exact_tol(data));
    let epsilon = report.objective;
    Ok(SparsityCertificate {
        epsilon,
        is_exact: epsilon <= exact_tol,
        exact_tol,
        dictionary,
        assignment,
        code,
        code_residual,
        report,
    })
}
