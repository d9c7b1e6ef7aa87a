use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use bundlefit::sis::{self, best_sis, circular_shift, solve_sis_bundle, ShiftStructure, SisFamily};
use bundlefit::{brute_force, sparsity_curve, SolveConfig};

fn signals(seed: u64, m: usize, len: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| (0..len).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

fn complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

#[test]
fn shifted_copies_are_captured_exactly() {
    let s = ShiftStructure::new(12, 3).unwrap();
    let base = complex(&signals(1, 1, 12)[0]);
    let spectra: Vec<_> = (0..4)
        .map(|k| sis::dft(&circular_shift(&base, 3 * k)))
        .collect();
    let energy: f64 = base.iter().map(|c| c.norm_sqr()).sum::<f64>() * 4.0;
    let fit = best_sis(&spectra, &s, 1).unwrap();
    assert!(fit.error <= 1e-14 * energy, "{}", fit.error);
}

#[test]
fn sis_bundle_separates_two_generators() {
    let s = ShiftStructure::new(8, 2).unwrap();
    let raw = signals(2, 2, 8);
    let mut spectra = Vec::new();
    for g in &raw {
        let g = complex(g);
        for k in 0..3 {
            spectra.push(sis::dft(&circular_shift(&g, 2 * k)));
        }
    }
    let cfg = SolveConfig {
        restarts: 16,
        seed: 5,
        ..SolveConfig::new(2, 1)
    };
    let report = solve_sis_bundle(&spectra, &s, &cfg).unwrap();
    assert!(report.objective <= 1e-12, "{}", report.objective);
    let a = report.best_partition.assignment();
    assert!(a[..3].iter().all(|&c| c == a[0]) && a[3..].iter().all(|&c| c == a[3]));
    assert_ne!(a[0], a[3]);
}

#[test]
fn sis_solver_matches_brute_force() {
    let s = ShiftStructure::new(8, 2).unwrap();
    let family = SisFamily { structure: s };
    for seed in 0..5 {
        let spectra: Vec<_> = signals(10 + seed, 6, 8)
            .iter()
            .map(|x| sis::dft_real(x))
            .collect();
        let oracle = brute_force(&family, &spectra, 2, 1).unwrap();
        let cfg = SolveConfig {
            restarts: 32,
            seed,
            ..SolveConfig::new(2, 1)
        };
        let report = solve_sis_bundle(&spectra, &s, &cfg).unwrap();
        assert!(report.objective >= oracle.objective - 1e-9);
    }
}

#[test]
fn sis_sweep_is_monotone() {
    let s = ShiftStructure::new(8, 4).unwrap();
    let spectra: Vec<_> = signals(3, 8, 8).iter().map(|x| sis::dft_real(x)).collect();
    let cfg = SolveConfig {
        restarts: 8,
        ..SolveConfig::new(1, 1)
    };
    let rows = sparsity_curve(
        &SisFamily { structure: s },
        &spectra,
        &[1, 2, 3, 4],
        &[1, 2],
        &cfg,
    )
    .unwrap();
    for w in rows.windows(2).filter(|w| w[0].n == w[1].n) {
        assert!(w[1].epsilon <= w[0].epsilon);
    }
}

#[test]
fn structure_mismatch_is_rejected() {
    let s = ShiftStructure::new(8, 2).unwrap();
    let spectra = vec![sis::dft_real(&[1.0; 6])];
    assert!(solve_sis_bundle(&spectra, &s, &SolveConfig::new(1, 1)).is_err());
}
