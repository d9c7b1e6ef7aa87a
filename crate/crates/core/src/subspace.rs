//! Linear subspaces of ℝᴺ, orthogonal projections and the Eckart-Young best fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Ordered finite set of vectors sharing one ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    dim: usize,
    vectors: Vec<DVector<f64>>,
    labels: Option<Vec<String>>,
}

impl DataSet {
    pub fn new(dim: usize, vectors: Vec<DVector<f64>>) -> Result<Self> {
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self {
            dim,
            vectors,
            labels: None,
        })
    }

    /// Builds a data set from rows; the dimension is taken from the first row.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        Self::new(
            dim,
            rows.iter().map(|r| DVector::from_column_slice(r)).collect(),
        )
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.vectors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vectors.len(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Σ‖fᵢ‖².
    pub fn energy(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm_squared()).sum()
    }

    /// Data matrix with the vectors as columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        points_matrix(self.dim, &self.vectors.iter().collect::<Vec<_>>())
    }
}

pub(crate) fn points_matrix(dim: usize, points: &[&DVector<f64>]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(dim, points.len());
    for (j, p) in points.iter().enumerate() {
        a.set_column(j, p);
    }
    a
}

/// Subspace of ℝᴺ represented by an orthonormal basis (columns of an `N × s`
/// matrix). `s = 0` is the zero subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubspaceRepr", into = "SubspaceRepr")]
pub struct Subspace {
    basis: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    ambient_dim: usize,
    basis: Vec<Vec<f64>>,
}

impl From<Subspace> for SubspaceRepr {
    fn from(s: Subspace) -> Self {
        SubspaceRepr {
            ambient_dim: s.ambient_dim(),
            basis: s
                .basis
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        }
    }
}

impl TryFrom<SubspaceRepr> for Subspace {
    type Error = Error;

    fn try_from(r: SubspaceRepr) -> Result<Self> {
        let cols: Vec<DVector<f64>> = r
            .basis
            .iter()
            .map(|c| {
                if c.len() == r.ambient_dim {
                    Ok(DVector::from_column_slice(c))
                } else {
                    Err(Error::DimensionMismatch {
                        expected: r.ambient_dim,
                        found: c.len(),
                    })
                }
            })
            .collect::<Result<_>>()?;
        Subspace::from_orthonormal(r.ambient_dim, &cols)
    }
}

const ORTHONORMAL_TOL: f64 = 1e-10;

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    /// Wraps a basis that is already orthonormal (checked to 1e-10).
    pub fn from_orthonormal(ambient_dim: usize, basis: &[DVector<f64>]) -> Result<Self> {
        for b in basis {
            if b.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: b.len(),
                });
            }
        }
        let m = spectral::columns_to_matrix(ambient_dim, basis);
        let defect = (m.transpose() * &m - DMatrix::identity(basis.len(), basis.len())).amax();
        if defect > ORTHONORMAL_TOL || !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "basis is not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self { basis: m })
    }

    /// Span of arbitrary vectors, orthonormalized in order; dependent vectors are dropped.
    pub fn span(ambient_dim: usize, vectors: &[DVector<f64>]) -> Result<Self> {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for v in vectors {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite);
            }
            if basis.len() == ambient_dim {
                break;
            }
            if let Some(u) = spectral::orthonormalize_against(v.clone(), &basis) {
                basis.push(u);
            }
        }
        Ok(Self {
            basis: spectral::columns_to_matrix(ambient_dim, &basis),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<DVector<f64>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    fn check(&self, f: &DVector<f64>) -> Result<()> {
        if f.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: f.len(),
            });
        }
        Ok(())
    }

    /// Σ ⟨f, uᵢ⟩ uᵢ over the basis.
    pub fn project(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(f)?;
        Ok(self.project_unchecked(f))
    }

    pub(crate) fn project_unchecked(&self, f: &DVector<f64>) -> DVector<f64> {
        if self.is_zero() {
            return DVector::zeros(f.len());
        }
        &self.basis * self.basis.tr_mul(f)
    }

    /// ‖f − 𝒫_V f‖².
    pub fn dist_sq(&self, f: &DVector<f64>) -> Result<f64> {
        self.check(f)?;
        Ok(self.dist_sq_unchecked(f))
    }

    pub(crate) fn dist_sq_unchecked(&self, f: &DVector<f64>) -> f64 {
        if self.is_zero() {
            return f.norm_squared();
        }
        (f - self.project_unchecked(f)).norm_squared()
    }
}

/// E(F, V) = Σ d²(f, V); zero for the empty set.
pub fn total_error(data: &DataSet, v: &Subspace) -> Result<f64> {
    if !data.is_empty() && data.dim() != v.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: v.ambient_dim(),
            found: data.dim(),
        });
    }
    Ok(data.vectors().iter().map(|f| v.dist_sq_unchecked(f)).sum())
}

/// Result of fitting one subspace of dimension ≤ n.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceFit {
    pub subspace: Subspace,
    /// Σ_{j>n} λ_j of the Gram spectrum.
    pub error: f64,
    /// Eigenvalues of the smaller of `AᵀA`, `AAᵀ`, descending. They share the
    /// nonzero spectrum, so trailing sums agree with the `m × m` Gram matrix.
    pub spectrum: Vec<f64>,
    /// `λ_n` and `λ_{n+1}` are within `1e-10·λ₁`, so the optimum is not unique.
    pub degenerate: bool,
}

/// Eckart-Young: the span of the top `min(n, r)` left singular vectors of the
/// data matrix minimizes E(F, ·) over subspaces of dimension ≤ n.
pub fn best_fit_subspace(data: &DataSet, n: usize) -> Result<SubspaceFit> {
    let points: Vec<&DVector<f64>> = data.vectors().iter().collect();
    best_fit_points(data.dim(), &points, n)
}

pub(crate) fn best_fit_points(
    ambient_dim: usize,
    points: &[&DVector<f64>],
    n: usize,
) -> Result<SubspaceFit> {
    for p in points {
        if p.len() != ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: ambient_dim,
                found: p.len(),
            });
        }
    }
    if points.is_empty() || ambient_dim == 0 {
        return Ok(SubspaceFit {
            subspace: Subspace::zero(ambient_dim),
            error: 0.0,
            spectrum: Vec::new(),
            degenerate: false,
        });
    }
    let a = points_matrix(ambient_dim, points);
    let svd = spectral::svd(&a)?;
    let keep = n.min(svd.rank);
    let basis = svd.left_vectors.columns(0, keep).into_owned();
    let spectrum = svd.gram_eigenvalues;
    let error = spectrum.iter().skip(n).sum();
    let degenerate = n >= 1
        && n < spectrum.len()
        && n <= svd.rank
        && (spectrum[n - 1] - spectrum[n]).abs() <= 1e-10 * spectrum[0];
    Ok(SubspaceFit {
        subspace: Subspace { basis },
        error,
        spectrum,
        degenerate,
    })
}
