//! Finite shift-invariant spaces.
//!
//! Signals have length `M` and are shifted circularly by multiples of `L`
//! (`L | M`). Under the unitary DFT a shift by `L` multiplies bin `k` by
//! `e^{-2πik/K}` with `K = M/L`, a factor that only depends on `k mod K`. A
//! shift-invariant space is therefore a family of subspaces of `ℂᴸ`, one per
//! frequency class `ω ∈ {0,…,K−1}`, acting on the alias fibers
//! `(f̂(ω + K·t))_{t<L}`.
//!
//! The optimal space of length `≤ n` for a set of signals is read off the
//! per-frequency Gramians `G(ω)ᵢⱼ = Σ_t f̂ᵢ(ω+Kt)·conj(f̂ⱼ(ω+Kt))`: its error is
//! `Σ_ω Σ_{i>n} λᵢ(ω)` and generators `φ̂ᵢ(ω) = λᵢ(ω)^{-1/2} Σⱼ yᵢⱼ(ω) f̂ⱼ(ω)`
//! (zero where `λᵢ(ω)` vanishes) form a Parseval frame under the shifts.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bundle::{Fit, ModelFamily};
use crate::error::{Error, Result};
use crate::solver::{self, SolveConfig, SolveReport};
use crate::spectral::{orthonormalize_against, sym_eigen};
use crate::subspace::DataSet;

/// Unitary DFT coefficients of one signal, length `M`.
pub type Spectrum = Vec<Complex64>;

/// Relative threshold (against `max_ω λ₁(ω)`) below which an eigenvalue counts as zero.
pub const ZERO_EIGEN_TOL: f64 = 1e-12;

const PARSEVAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StructureRepr", into = "StructureRepr")]
pub struct ShiftStructure {
    signal_len: usize,
    shift: usize,
}

#[derive(Serialize, Deserialize)]
struct StructureRepr {
    signal_len: usize,
    shift: usize,
}

impl From<ShiftStructure> for StructureRepr {
    fn from(s: ShiftStructure) -> Self {
        StructureRepr {
            signal_len: s.signal_len,
            shift: s.shift,
        }
    }
}

impl TryFrom<StructureRepr> for ShiftStructure {
    type Error = Error;

    fn try_from(r: StructureRepr) -> Result<Self> {
        ShiftStructure::new(r.signal_len, r.shift)
    }
}

impl ShiftStructure {
    pub fn new(signal_len: usize, shift: usize) -> Result<Self> {
        if signal_len == 0 || shift == 0 {
            return Err(Error::StructureMismatch("M and L must be positive".into()));
        }
        if !signal_len.is_multiple_of(shift) {
            return Err(Error::StructureMismatch(format!(
                "shift step {shift} does not divide signal length {signal_len}"
            )));
        }
        Ok(Self { signal_len, shift })
    }

    /// `M`.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    /// `L`, which is also the number of aliases per frequency class.
    pub fn shift(&self) -> usize {
        self.shift
    }

    /// `K = M / L`.
    pub fn num_freqs(&self) -> usize {
        self.signal_len / self.shift
    }

    pub fn num_aliases(&self) -> usize {
        self.shift
    }

    fn bin(&self, freq: usize, alias: usize) -> usize {
        freq + self.num_freqs() * alias
    }

    pub fn fiber(&self, spectrum: &[Complex64], freq: usize) -> DVector<Complex64> {
        DVector::from_fn(self.shift, |t, _| spectrum[self.bin(freq, t)])
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.signal_len {
            return Err(Error::LengthMismatch {
                expected: self.signal_len,
                found: len,
            });
        }
        Ok(())
    }
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

/// Unitary DFT: `f̂(k) = M^{-1/2} Σ_x f(x) e^{-2πikx/M}`.
pub fn dft(signal: &[Complex64]) -> Spectrum {
    transform(signal, false)
}

pub fn idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    transform(spectrum, true)
}

fn transform(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    if input.is_empty() {
        return Vec::new();
    }
    let mut buf = input.to_vec();
    plan(buf.len(), inverse).process(&mut buf);
    let scale = 1.0 / (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

pub fn dft_real(signal: &[f64]) -> Spectrum {
    let c: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    dft(&c)
}

/// Spectra of the real time-domain signals in `data`.
pub fn spectra_of(data: &DataSet) -> Vec<Spectrum> {
    data.vectors()
        .iter()
        .map(|v| dft_real(v.as_slice()))
        .collect()
}

/// Circular shift by `by` samples: `g(x) = f(x − by)`.
pub fn circular_shift(signal: &[Complex64], by: usize) -> Vec<Complex64> {
    let m = signal.len();
    (0..m).map(|x| signal[(x + m - by % m) % m]).collect()
}

/// Per-frequency Gramians with their eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGramian {
    pub structure: ShiftStructure,
    /// One `m × m` Hermitian matrix per frequency class.
    pub matrices: Vec<DMatrix<Complex64>>,
    /// Descending, per frequency class.
    pub eigenvalues: Vec<Vec<f64>>,
}

impl FreqGramian {
    /// Σ_ω trace G(ω).
    pub fn total_trace(&self) -> f64 {
        self.matrices.iter().map(|g| g.trace().re).sum()
    }
}

fn check_spectra(spectra: &[Spectrum], s: &ShiftStructure) -> Result<()> {
    for sp in spectra {
        s.check_len(sp.len())?;
        if !sp.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(())
}

/// `L × m` matrix whose columns are the fibers of the signals at `freq`.
fn fiber_matrix(spectra: &[&Spectrum], s: &ShiftStructure, freq: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(s.shift, spectra.len(), |t, j| spectra[j][s.bin(freq, t)])
}

/// `G(ω)ᵢⱼ = Σ_t aᵢ(t)·conj(aⱼ(t))`, built once per unordered pair.
fn gram_of_fibers(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let m = a.ncols();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = a.column(j).dotc(&a.column(i));
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

pub fn gramian(spectra: &[Spectrum], s: &ShiftStructure) -> Result<FreqGramian> {
    check_spectra(spectra, s)?;
    let refs: Vec<&Spectrum> = spectra.iter().collect();
    let mut matrices = Vec::with_capacity(s.num_freqs());
    let mut eigenvalues = Vec::with_capacity(s.num_freqs());
    for freq in 0..s.num_freqs() {
        let g = gram_of_fibers(&fiber_matrix(&refs, s, freq));
        eigenvalues.push(if g.nrows() == 0 {
            Vec::new()
        } else {
            sym_eigen(&g)?.eigenvalues
        });
        matrices.push(g);
    }
    Ok(FreqGramian {
        structure: *s,
        matrices,
        eigenvalues,
    })
}

/// Shift-invariant space given by generator spectra whose fibers are, at every
/// frequency, orthonormal or zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SisModel {
    pub structure: ShiftStructure,
    pub generators: Vec<Spectrum>,
    pub per_freq_rank: Vec<usize>,
}

impl SisModel {
    pub fn zero(structure: ShiftStructure) -> Self {
        Self {
            structure,
            generators: Vec::new(),
            per_freq_rank: vec![0; structure.num_freqs()],
        }
    }

    /// Validates the Parseval property (to 1e-9) of externally supplied generators.
    pub fn from_generators(structure: ShiftStructure, generators: Vec<Spectrum>) -> Result<Self> {
        check_spectra(&generators, &structure)?;
        let model = Self {
            structure,
            per_freq_rank: Vec::new(),
            generators,
        };
        let defect = model.parseval_defect();
        if defect > PARSEVAL_TOL {
            return Err(Error::InvalidConfig(format!(
                "generators do not form a Parseval frame (defect {defect:e})"
            )));
        }
        let per_freq_rank = (0..structure.num_freqs())
            .map(|w| {
                model
                    .generators
                    .iter()
                    .filter(|g| structure.fiber(g, w).norm_squared() > 0.5)
                    .count()
            })
            .collect();
        Ok(Self {
            per_freq_rank,
            ..model
        })
    }

    /// Number of generators.
    pub fn length(&self) -> usize {
        self.generators.len()
    }

    /// `G_Φ(ω)` of the generators, per frequency class.
    pub fn generator_gramian(&self) -> Vec<DMatrix<Complex64>> {
        let refs: Vec<&Spectrum> = self.generators.iter().collect();
        (0..self.structure.num_freqs())
            .map(|w| gram_of_fibers(&fiber_matrix(&refs, &self.structure, w)))
            .collect()
    }

    /// Largest distance of an eigenvalue of `G_Φ(ω)` from `{0, 1}` over all ω.
    pub fn parseval_defect(&self) -> f64 {
        if self.generators.is_empty() {
            return 0.0;
        }
        self.generator_gramian()
            .iter()
            .map(|g| match sym_eigen(g) {
                Ok(e) => e
                    .eigenvalues
                    .iter()
                    .map(|&l| l.abs().min((l - 1.0).abs()))
                    .fold(0.0, f64::max),
                Err(_) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// Orthogonal projection of a spectrum onto the model.
    pub fn project_spectrum(&self, spectrum: &[Complex64]) -> Result<Spectrum> {
        self.structure.check_len(spectrum.len())?;
        Ok(self.project_spectrum_unchecked(spectrum))
    }

    fn project_spectrum_unchecked(&self, spectrum: &[Complex64]) -> Spectrum {
        let s = &self.structure;
        let mut out = vec![Complex64::new(0.0, 0.0); s.signal_len];
        for w in 0..s.num_freqs() {
            for g in &self.generators {
                let mut c = Complex64::new(0.0, 0.0);
                for t in 0..s.shift {
                    let k = s.bin(w, t);
                    c += spectrum[k] * g[k].conj();
                }
                for t in 0..s.shift {
                    let k = s.bin(w, t);
                    out[k] += c * g[k];
                }
            }
        }
        out
    }

    /// ‖f − 𝒫 f‖², computed on the spectrum.
    pub fn dist_sq_spectrum(&self, spectrum: &[Complex64]) -> Result<f64> {
        self.structure.check_len(spectrum.len())?;
        Ok(self.dist_sq_unchecked(spectrum))
    }

    fn dist_sq_unchecked(&self, spectrum: &[Complex64]) -> f64 {
        let p = self.project_spectrum_unchecked(spectrum);
        spectrum
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum()
    }
}

/// Projection of a time-domain signal onto the model.
pub fn project_sis(model: &SisModel, signal: &[Complex64]) -> Result<Vec<Complex64>> {
    model.structure.check_len(signal.len())?;
    Ok(idft(&model.project_spectrum_unchecked(&dft(signal))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SisFit {
    pub model: SisModel,
    /// Σ_ω Σ_{i>n} λᵢ(ω).
    pub error: f64,
    pub spectrum: FreqGramian,
}

/// Optimal shift-invariant space of length ≤ n through the Gramian eigenvectors.
pub fn best_sis(spectra: &[Spectrum], s: &ShiftStructure, n: usize) -> Result<SisFit> {
    let gram = gramian(spectra, s)?;
    let refs: Vec<&Spectrum> = spectra.iter().collect();
    let mut per_freq = Vec::with_capacity(s.num_freqs());
    for (w, g) in gram.matrices.iter().enumerate() {
        if g.nrows() == 0 {
            per_freq.push(FreqEigen {
                values: Vec::new(),
                directions: Vec::new(),
            });
            continue;
        }
        // Left eigenvectors of G(ω), i.e. eigenvectors of its transpose A^H A.
        let eig = sym_eigen(&g.transpose())?;
        let a = fiber_matrix(&refs, s, w);
        let directions = (0..eig.dim())
            .take(n)
            .map(|i| &a * eig.eigenvectors.column(i))
            .collect();
        per_freq.push(FreqEigen {
            values: eig.eigenvalues,
            directions,
        });
    }
    let (model, error) = assemble(*s, per_freq, n);
    Ok(SisFit {
        model,
        error,
        spectrum: gram,
    })
}

struct FreqEigen {
    values: Vec<f64>,
    /// Unnormalized fiber directions `A y_i` (or eigenvectors of `A A^H`) for i < n.
    directions: Vec<DVector<Complex64>>,
}

/// Scales the top directions into generator fibers and sums the trailing spectrum.
fn assemble(s: ShiftStructure, per_freq: Vec<FreqEigen>, n: usize) -> (SisModel, f64) {
    let top = per_freq
        .iter()
        .filter_map(|f| f.values.first())
        .fold(0.0f64, |a, &b| a.max(b));
    let threshold = ZERO_EIGEN_TOL * top;
    let error = per_freq
        .iter()
        .map(|f| f.values.iter().skip(n).sum::<f64>())
        .sum();

    let mut generators = vec![vec![Complex64::new(0.0, 0.0); s.signal_len]; n];
    let mut per_freq_rank = vec![0; s.num_freqs()];
    for (w, f) in per_freq.into_iter().enumerate() {
        let mut fibers: Vec<DVector<Complex64>> = Vec::new();
        for (i, dir) in f.directions.into_iter().enumerate() {
            if f.values[i] <= threshold {
                break;
            }
            // φ̂ = λ^{-1/2} A y; re-orthonormalized against the previous fibers,
            // which only matters when λ is close to the threshold.
            let scaled = dir.unscale(f.values[i].sqrt());
            let Some(fiber) = orthonormalize_against(scaled, &fibers) else {
                break;
            };
            for t in 0..s.shift {
                generators[i][s.bin(w, t)] = fiber[t];
            }
            fibers.push(fiber);
        }
        per_freq_rank[w] = fibers.len();
    }
    let length = per_freq_rank.iter().copied().max().unwrap_or(0);
    generators.truncate(length);
    (
        SisModel {
            structure: s,
            generators,
            per_freq_rank,
        },
        error,
    )
}

/// Same optimum as [`best_sis`] without forming the Gramian when the fibers
/// are shorter than the number of signals: eigenvectors of `A A^H` are the
/// generator fibers directly.
fn fit_sis(spectra: &[&Spectrum], s: &ShiftStructure, n: usize) -> Result<(SisModel, f64)> {
    if spectra.is_empty() || n == 0 {
        let error = spectra
            .iter()
            .map(|sp| sp.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum();
        return Ok((SisModel::zero(*s), error));
    }
    let m = spectra.len();
    let mut per_freq = Vec::with_capacity(s.num_freqs());
    for w in 0..s.num_freqs() {
        let a = fiber_matrix(spectra, s, w);
        if m <= s.shift {
            let eig = sym_eigen(&gram_of_fibers(&a).transpose())?;
            let directions = (0..eig.dim())
                .take(n)
                .map(|i| &a * eig.eigenvectors.column(i))
                .collect();
            per_freq.push(FreqEigen {
                values: eig.eigenvalues,
                directions,
            });
        } else {
            let eig = sym_eigen(&(&a * a.adjoint()))?;
            let directions = (0..eig.dim())
                .take(n)
                .map(|i| {
                    eig.eigenvectors
                        .column(i)
                        .scale(eig.eigenvalues[i].max(0.0).sqrt())
                })
                .collect();
            per_freq.push(FreqEigen {
                values: eig.eigenvalues,
                directions,
            });
        }
    }
    Ok(assemble(*s, per_freq, n))
}

/// Shift-invariant spaces of length ≤ n under a fixed shift structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SisFamily {
    pub structure: ShiftStructure,
}

impl ModelFamily for SisFamily {
    type Point = Spectrum;
    type Model = SisModel;

    fn zero_model(&self) -> SisModel {
        SisModel::zero(self.structure)
    }

    fn check_point(&self, point: &Spectrum) -> Result<()> {
        self.structure.check_len(point.len())
    }

    fn check_model(&self, model: &SisModel) -> Result<()> {
        if model.structure != self.structure {
            return Err(Error::StructureMismatch(format!(
                "model has M={}, L={}; expected M={}, L={}",
                model.structure.signal_len,
                model.structure.shift,
                self.structure.signal_len,
                self.structure.shift
            )));
        }
        Ok(())
    }

    fn fit(&self, points: &[&Spectrum], n: usize) -> Result<Fit<SisModel>> {
        let (model, error) = fit_sis(points, &self.structure, n)?;
        Ok(Fit {
            model,
            error,
            degenerate: false,
        })
    }

    fn dist_sq(&self, model: &SisModel, point: &Spectrum) -> f64 {
        model.dist_sq_unchecked(point)
    }
}

/// Alternating search over bundles of shift-invariant spaces.
pub fn solve_sis_bundle(
    spectra: &[Spectrum],
    s: &ShiftStructure,
    cfg: &SolveConfig,
) -> Result<SolveReport<SisModel>> {
    check_spectra(spectra, s)?;
    solver::solve(&SisFamily { structure: *s }, spectra, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn impulse(m: usize, at: usize) -> Vec<Complex64> {
        (0..m).map(|x| c(if x == at { 1.0 } else { 0.0 })).collect()
    }

    #[test]
    fn structure_validation() {
        assert!(ShiftStructure::new(6, 4).is_err());
        assert!(ShiftStructure::new(0, 1).is_err());
        let s = ShiftStructure::new(8, 2).unwrap();
        assert_eq!((s.num_freqs(), s.num_aliases()), (4, 2));
    }

    #[test]
    fn dft_is_unitary() {
        let f: Vec<Complex64> = (0..12)
            .map(|x| Complex64::new((x as f64).sin(), 0.3 * x as f64))
            .collect();
        let sp = dft(&f);
        let e1: f64 = f.iter().map(|z| z.norm_sqr()).sum();
        let e2: f64 = sp.iter().map(|z| z.norm_sqr()).sum();
        assert!((e1 - e2).abs() < 1e-12 * e1);
        let back = idft(&sp);
        assert!(back.iter().zip(&f).all(|(a, b)| (a - b).norm() < 1e-13));
    }

    #[test]
    fn impulse_gramian() {
        let s = ShiftStructure::new(4, 2).unwrap();
        let g = gramian(&[dft(&impulse(4, 0))], &s).unwrap();
        for m in &g.matrices {
            assert!((m[(0, 0)] - c(0.5)).norm() < 1e-15);
        }
    }

    #[test]
    fn disjoint_spectra_give_diagonal_gramian() {
        let s = ShiftStructure::new(8, 2).unwrap();
        let mut a = vec![c(0.0); 8];
        let mut b = vec![c(0.0); 8];
        a[1] = c(1.0);
        a[6] = c(2.0);
        b[5] = c(1.5);
        b[3] = Complex64::new(0.0, 1.0);
        let g = gramian(&[a, b], &s).unwrap();
        for m in &g.matrices {
            assert_eq!(m[(0, 1)], c(0.0));
            assert_eq!(m[(1, 0)], c(0.0));
        }
    }

    #[test]
    fn zero_signal_zero_gramian() {
        let s = ShiftStructure::new(6, 3).unwrap();
        let g = gramian(&[vec![c(0.0); 6]], &s).unwrap();
        assert!(g.matrices.iter().all(|m| m[(0, 0)] == c(0.0)));
    }

    #[test]
    fn length_mismatch() {
        let s = ShiftStructure::new(6, 3).unwrap();
        assert!(matches!(
            gramian(&[vec![c(0.0); 5]], &s),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn single_signal_fits_exactly() {
        let s = ShiftStructure::new(8, 2).unwrap();
        let f: Vec<f64> = (0..8).map(|x| ((x * x) as f64 * 0.37).cos()).collect();
        let sp = vec![dft_real(&f)];
        let fit = best_sis(&sp, &s, 1).unwrap();
        assert!(fit.error.abs() < 1e-14);
        assert!(fit.model.dist_sq_spectrum(&sp[0]).unwrap() < 1e-24);
        assert!(fit.model.parseval_defect() < 1e-12);
        assert_eq!(fit.model.length(), 1);
    }

    #[test]
    fn zero_length_model_keeps_nothing() {
        let s = ShiftStructure::new(8, 4).unwrap();
        let sp: Vec<Spectrum> = (0..3)
            .map(|k| dft_real(&[k as f64, 1.0, 0.0, -2.0, 0.5, 0.0, 1.0, 3.0]))
            .collect();
        let energy: f64 = sp.iter().flatten().map(|z| z.norm_sqr()).sum();
        let fit = best_sis(&sp, &s, 0).unwrap();
        assert!((fit.error - energy).abs() < 1e-12 * energy);
        assert_eq!(fit.model.length(), 0);
    }

    #[test]
    fn impulse_model_with_unit_shift_is_everything() {
        let s = ShiftStructure::new(6, 1).unwrap();
        let fit = best_sis(&[dft(&impulse(6, 0))], &s, 1).unwrap();
        let f: Vec<Complex64> = (0..6).map(|x| Complex64::new(x as f64, -1.0)).collect();
        let p = project_sis(&fit.model, &f).unwrap();
        assert!(p.iter().zip(&f).all(|(a, b)| (a - b).norm() < 1e-13));
    }

    #[test]
    fn projection_of_member_is_identity() {
        let s = ShiftStructure::new(12, 3).unwrap();
        let g: Vec<f64> = (0..12)
            .map(|x| (x as f64 * 0.9).sin() + 0.1 * x as f64)
            .collect();
        let fit = best_sis(&[dft_real(&g)], &s, 1).unwrap();
        // 2·g(x) − g(x − 3) + 0.5·g(x − 6) lies in the space.
        let gc: Vec<Complex64> = g.iter().map(|&x| c(x)).collect();
        let s3 = circular_shift(&gc, 3);
        let s6 = circular_shift(&gc, 6);
        let f: Vec<Complex64> = (0..12).map(|x| gc[x] * 2.0 - s3[x] + s6[x] * 0.5).collect();
        let p = project_sis(&fit.model, &f).unwrap();
        assert!(p.iter().zip(&f).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn generator_round_trip_validation() {
        let s = ShiftStructure::new(8, 2).unwrap();
        let sp: Vec<Spectrum> = (0..3)
            .map(|k| dft_real(&[1.0, k as f64, 0.0, -1.0, 2.0, 0.5, 0.0, 1.0]))
            .collect();
        let fit = best_sis(&sp, &s, 2).unwrap();
        let again = SisModel::from_generators(s, fit.model.generators.clone()).unwrap();
        assert_eq!(again, fit.model);
        let mut bad = fit.model.generators.clone();
        bad[0][0] *= 2.0;
        assert!(SisModel::from_generators(s, bad).is_err());
    }
}
