//! Dense spectral primitives: cyclic Jacobi eigendecomposition for real symmetric
//! and complex Hermitian matrices, and a thin SVD built on top of it.
//!
//! Everything here is deterministic: the sweep order is fixed, eigenpairs are
//! sorted by descending eigenvalue (ties keep their diagonal order) and every
//! eigenvector is rotated so that its largest-modulus component is real and
//! positive.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative rank tolerance on singular values.
pub const RANK_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_CLAMP_TOL: f64 = 1e-12;
const OFF_DIAGONAL_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

/// Field the Jacobi solver runs over. Implemented for `f64` and `Complex<f64>`.
pub trait Scalar: ComplexField<RealField = f64> + Copy {}

impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen<T: Scalar> {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        let n = self.dim();
        let mut out = DMatrix::<T>::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(k);
            out += (v * v.adjoint()) * T::from_real(lambda);
        }
        out
    }
}

fn is_finite<T: Scalar>(x: T) -> bool {
    x.real().is_finite() && x.imaginary().is_finite()
}

/// Full eigendecomposition of a symmetric (real) or Hermitian (complex)
/// positive-semidefinite matrix by cyclic Jacobi rotations.
///
/// Eigenvalues within `-1e-12 * max(1, ‖M‖_F)` of zero are clamped to zero.
pub fn sym_eigen<T: Scalar>(m: &DMatrix<T>) -> Result<SymmetricEigen<T>> {
    let (rows, cols) = m.shape();
    if rows != cols || rows == 0 {
        return Err(Error::NotSquare { rows, cols });
    }
    if !m.iter().all(|&x| is_finite(x)) {
        return Err(Error::NonFinite);
    }
    let n = rows;
    let scale = m.iter().fold(1.0f64, |acc, x| acc.max(x.modulus()));
    let mut asymmetry = 0.0f64;
    for i in 0..n {
        for j in i..n {
            asymmetry = asymmetry.max((m[(i, j)] - m[(j, i)].conjugate()).modulus());
        }
    }
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(Error::NonSymmetric { asymmetry });
    }

    let half = T::from_real(0.5);
    let mut a = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = T::from_real(m[(i, i)].real());
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conjugate()) * half;
            a[(i, j)] = v;
            a[(j, i)] = v.conjugate();
        }
    }
    let mut v = DMatrix::<T>::identity(n, n);
    let norm = a.iter().map(|x| x.modulus_squared()).sum::<f64>().sqrt();

    if norm > 0.0 {
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for j in 0..n {
                for i in 0..n {
                    if i != j {
                        off += a[(i, j)].modulus_squared();
                    }
                }
            }
            if off.sqrt() <= OFF_DIAGONAL_TOL * norm {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q, norm);
                }
            }
        }
        if !converged {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
        }
    }

    let clamp = PSD_CLAMP_TOL * norm.max(1.0);
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let lambda = a[(i, i)].real();
            if lambda < 0.0 && lambda >= -clamp {
                0.0
            } else {
                lambda
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]));

    let mut eigenvectors = DMatrix::<T>::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let mut col = v.column(src).into_owned();
        fix_phase(&mut col);
        eigenvectors.set_column(k, &col);
    }
    Ok(SymmetricEigen {
        eigenvalues: order.iter().map(|&i| raw[i]).collect(),
        eigenvectors,
    })
}

/// One Jacobi rotation annihilating `a[(p, q)]`.
///
/// The complex pivot `|a_pq| e^{iφ}` is first made real by the diagonal phase
/// `diag(1, e^{-iφ})`, after which the classical real rotation applies; `u` is
/// the product of the two.
fn rotate<T: Scalar>(a: &mut DMatrix<T>, v: &mut DMatrix<T>, p: usize, q: usize, norm: f64) {
    let n = a.nrows();
    let apq = a[(p, q)];
    let mag = apq.modulus();
    if mag == 0.0 {
        return;
    }
    if mag <= 1e-300 || mag <= f64::EPSILON * 1e-4 * norm {
        a[(p, q)] = T::zero();
        a[(q, p)] = T::zero();
        return;
    }
    let app = a[(p, p)].real();
    let aqq = a[(q, q)].real();
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let phase = apq.unscale(mag).conjugate();

    let u_pp = T::from_real(c);
    let u_pq = T::from_real(s);
    let u_qp = phase.scale(-s);
    let u_qq = phase.scale(c);

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = u_pp.conjugate() * apk + u_qp.conjugate() * aqk;
        a[(q, k)] = u_pq.conjugate() * apk + u_qq.conjugate() * aqk;
    }
    a[(p, q)] = T::zero();
    a[(q, p)] = T::zero();
    a[(p, p)] = T::from_real(app - t * mag);
    a[(q, q)] = T::from_real(aqq + t * mag);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}

/// Rotate `x` so that its first largest-modulus component is real positive.
pub(crate) fn fix_phase<T: Scalar>(x: &mut DVector<T>) {
    let mut best = 0;
    let mut best_mod = 0.0;
    for (i, c) in x.iter().enumerate() {
        let m = c.modulus();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    if best_mod > 0.0 {
        let phase = x[best].unscale(best_mod).conjugate();
        for c in x.iter_mut() {
            *c *= phase;
        }
    }
}

/// Thin singular value decomposition `A = Σ σ_k u_k y_kᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// `N × r`, orthonormal columns.
    pub left_vectors: DMatrix<f64>,
    /// Length `r`, descending.
    pub singular_values: Vec<f64>,
    /// `m × r`, orthonormal columns.
    pub right_vectors: DMatrix<f64>,
    pub rank: usize,
    /// Full spectrum of the smaller Gram matrix (`AᵀA` or `AAᵀ`), descending.
    pub gram_eigenvalues: Vec<f64>,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(&self.singular_values));
        &self.left_vectors * sigma * self.right_vectors.transpose()
    }
}

pub fn svd(a: &DMatrix<f64>) -> Result<SvdResult> {
    svd_with_tol(a, RANK_TOL)
}

/// SVD through the eigendecomposition of the smaller Gram matrix.
///
/// With `AᵀA y_i = λ_i y_i` the left vectors are `u_i = A y_i / ‖A y_i‖`.
/// The singular value is taken as `‖A y_i‖` rather than `√λ_i`, which keeps the
/// rank decision accurate below `√ε` relative magnitude. The `u_i` are passed
/// through a second Gram-Schmidt pass to restore orthogonality lost for small
/// singular values.
pub fn svd_with_tol(a: &DMatrix<f64>, rank_tol: f64) -> Result<SvdResult> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    if !a.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if cols > rows {
        let t = svd_gram_side(&a.transpose(), rank_tol)?;
        return Ok(SvdResult {
            left_vectors: t.right_vectors,
            singular_values: t.singular_values,
            right_vectors: t.left_vectors,
            rank: t.rank,
            gram_eigenvalues: t.gram_eigenvalues,
        });
    }
    svd_gram_side(a, rank_tol)
}

fn svd_gram_side(a: &DMatrix<f64>, rank_tol: f64) -> Result<SvdResult> {
    let (rows, cols) = a.shape();
    let gram = gram_matrix(a);
    let eig = sym_eigen(&gram)?;

    let mut lefts: Vec<DVector<f64>> = Vec::new();
    let mut rights: Vec<DVector<f64>> = Vec::new();
    let mut sigmas = Vec::new();
    let mut sigma_max = 0.0;
    for k in 0..cols {
        if eig.eigenvalues[k] <= 0.0 {
            break;
        }
        let y = eig.eigenvectors.column(k).into_owned();
        let w = a * &y;
        let sigma = w.norm();
        if k == 0 {
            sigma_max = sigma;
        }
        if sigma <= rank_tol * sigma_max || sigma == 0.0 {
            break;
        }
        match orthonormalize_against(w, &lefts) {
            Some(u) => lefts.push(u),
            None => break,
        }
        rights.push(y);
        sigmas.push(sigma);
    }
    let rank = sigmas.len();
    Ok(SvdResult {
        left_vectors: columns_to_matrix(rows, &lefts),
        singular_values: sigmas,
        right_vectors: columns_to_matrix(cols, &rights),
        rank,
        gram_eigenvalues: eig.eigenvalues,
    })
}

/// `AᵀA`, computed once per unordered pair so the result is exactly symmetric.
pub(crate) fn gram_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.ncols();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = a.column(i).dot(&a.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

pub(crate) fn columns_to_matrix<T: Scalar>(rows: usize, cols: &[DVector<T>]) -> DMatrix<T> {
    let mut out = DMatrix::<T>::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Two passes of modified Gram-Schmidt of `w` against an orthonormal set.
/// Returns `None` when nothing of `w` survives.
pub(crate) fn orthonormalize_against<T: Scalar>(
    mut w: DVector<T>,
    basis: &[DVector<T>],
) -> Option<DVector<T>> {
    let start = w.norm();
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let c = b.dotc(&w);
            w.axpy(-c, b, T::one());
        }
    }
    let norm = w.norm();
    if norm <= 1e-13 * start {
        return None;
    }
    w.unscale_mut(norm);
    Some(w)
}
