//! Synthetic union-of-subspaces data.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::{DataSet, Subspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub l: usize,
    pub n: usize,
    pub ambient_dim: usize,
    pub points_per_subspace: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    /// Labelled `s0`, `s1`, … by generating subspace.
    pub data: DataSet,
    pub truth: Vec<usize>,
    pub subspaces: Vec<Subspace>,
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Draws `l` random `n`-dimensional subspaces of ℝᴺ (orthonormalized Gaussian
/// bases) and `points_per_subspace` Gaussian combinations from each, plus
/// isotropic noise. Points are ordered subspace by subspace.
pub fn generate(spec: &GenerateSpec) -> Result<Generated> {
    if spec.l == 0 || spec.ambient_dim == 0 {
        return Err(Error::InvalidSpec(
            "l and the ambient dimension must be positive".into(),
        ));
    }
    if spec.n > spec.ambient_dim {
        return Err(Error::InvalidSpec(format!(
            "subspace dimension {} exceeds ambient dimension {}",
            spec.n, spec.ambient_dim
        )));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::InvalidSpec(
            "noise_sigma must be finite and non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.ambient_dim;
    let mut subspaces = Vec::with_capacity(spec.l);
    for _ in 0..spec.l {
        let mut s = Subspace::zero(dim);
        while s.dim() < spec.n {
            let raw: Vec<DVector<f64>> = (0..spec.n).map(|_| gaussian(&mut rng, dim)).collect();
            s = Subspace::span(dim, &raw)?;
        }
        subspaces.push(s);
    }
    let mut vectors = Vec::with_capacity(spec.l * spec.points_per_subspace);
    let mut truth = Vec::with_capacity(vectors.capacity());
    for (j, s) in subspaces.iter().enumerate() {
        for _ in 0..spec.points_per_subspace {
            let coeffs = gaussian(&mut rng, spec.n);
            let mut f = s.basis() * coeffs;
            if spec.noise_sigma > 0.0 {
                f += gaussian(&mut rng, dim) * spec.noise_sigma;
            }
            vectors.push(f);
            truth.push(j);
        }
    }
    let labels = truth.iter().map(|j| format!("s{j}")).collect();
    let data = DataSet::new(dim, vectors)?.with_labels(labels)?;
    Ok(Generated {
        data,
        truth,
        subspaces,
    })
}
