//! Alternating search for an optimal bundle.
//!
//! Starting from a partition `P₁`, the search alternates the two maps of the
//! bundle module: `V ← 𝒲(P)` (fit every cell) and `P ← Ω(V)` (reassign every
//! point to a nearest component), until `Γ(P, V) = e(F, V)`. `Γ` strictly
//! decreases along the way, so no partition is visited twice and each restart
//! stops after finitely many steps. The stopping pair is a fixed point of both
//! maps, not necessarily a global optimum; several seeded restarts are run and
//! the best one is kept. [`brute_force`] enumerates every partition and serves
//! as the exact oracle on small inputs.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{
    self, best_bundle_unchecked, distance_table, table_gamma, table_objective, table_partition,
    Bundle, ModelFamily, Partition,
};
use crate::error::{Error, Result};

/// Upper bound on `l^m` accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Uniform i.i.d. cell labels.
    #[default]
    RandomPartition,
    /// Greedy seeding: one random point, then repeatedly the point with the
    /// largest residual to the models fitted to the points chosen so far;
    /// finally nearest-model assignment.
    FarthestPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub l: usize,
    pub n: usize,
    pub restarts: usize,
    pub seed: u64,
    pub init_strategy: InitStrategy,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            l: 1,
            n: 1,
            restarts: 32,
            seed: 0,
            init_strategy: InitStrategy::default(),
            rel_tol: 1e-12,
            max_iters: 1000,
        }
    }
}

impl SolveConfig {
    pub fn new(l: usize, n: usize) -> Self {
        Self {
            l,
            n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidConfig("l must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol >= 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidConfig(
                "rel_tol must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Trajectory of a single restart.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome<M> {
    pub partition: Partition,
    pub bundle: Bundle<M>,
    pub degenerate: Vec<bool>,
    /// e(F, V) of the final bundle.
    pub objective: f64,
    /// Γ(P_j, V_{P_j}) for every visited partition.
    pub trace: Vec<f64>,
    /// Every partition visited, in order.
    pub visited: Vec<Partition>,
    pub converged: bool,
}

impl<M> RestartOutcome<M> {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport<M> {
    pub best_bundle: Bundle<M>,
    pub best_partition: Partition,
    /// Final e(F, V) of the winning restart.
    pub objective: f64,
    pub winning_restart: usize,
    pub per_restart_objectives: Vec<f64>,
    pub iterations_per_restart: Vec<usize>,
    pub converged_per_restart: Vec<bool>,
    /// Γ per iteration of the winning restart.
    pub objective_trace: Vec<f64>,
    pub degenerate_flags: Vec<bool>,
    /// The winning restart reached the fixed point and the pair passed the
    /// post-hoc certificate check.
    pub converged: bool,
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Initial partition for restart number `restart`.
pub fn initial_partition<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    cfg: &SolveConfig,
    restart: usize,
) -> Result<Partition> {
    let mut rng = restart_rng(cfg.seed, restart);
    let m = points.len();
    match cfg.init_strategy {
        InitStrategy::RandomPartition => {
            Partition::new((0..m).map(|_| rng.random_range(0..cfg.l)).collect(), cfg.l)
        }
        InitStrategy::FarthestPoint => {
            if m == 0 {
                return Partition::new(vec![], cfg.l);
            }
            let first = rng.random_range(0..m);
            let mut chosen = vec![first];
            let mut models = vec![family.fit(&[&points[first]], cfg.n)?.model];
            let mut residual: Vec<f64> = points
                .iter()
                .map(|p| family.dist_sq(&models[0], p))
                .collect();
            while models.len() < cfg.l {
                let next = match bundle::argmax_excluding(&residual, &chosen) {
                    Some(i) if residual[i] > 0.0 => i,
                    _ => rng.random_range(0..m),
                };
                chosen.push(next);
                let model = family.fit(&[&points[next]], cfg.n)?.model;
                for (r, p) in residual.iter_mut().zip(points) {
                    *r = r.min(family.dist_sq(&model, p));
                }
                models.push(model);
            }
            let seeds = Bundle::new(models)?;
            Ok(table_partition(
                &distance_table(family, points, &seeds),
                cfg.l,
            ))
        }
    }
}

/// Runs the alternating search from `initial` until Γ(P, V) ≤ e(F, V)·(1 + rel_tol) + rel_tol.
///
/// A step that fails to decrease Γ in floating point ends the restart with
/// `converged = false`; so does hitting `max_iters`.
pub fn run_restart<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    cfg: &SolveConfig,
    initial: Partition,
) -> Result<RestartOutcome<F::Model>> {
    let l = initial.cells();
    let mut partition = initial;
    let mut fit = best_bundle_unchecked(family, points, &partition, cfg.n)?;
    let mut table = distance_table(family, points, &fit.bundle);
    let mut g = table_gamma(&table, &partition);
    let mut e = table_objective(&table);
    let mut trace = vec![g];
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(partition.assignment().to_vec());
    let mut visited = vec![partition.clone()];

    let converged = loop {
        if g <= e * (1.0 + cfg.rel_tol) + cfg.rel_tol {
            break true;
        }
        if trace.len() >= cfg.max_iters {
            break false;
        }
        let next = table_partition(&table, l);
        let next_fit = best_bundle_unchecked(family, points, &next, cfg.n)?;
        let next_table = distance_table(family, points, &next_fit.bundle);
        let next_g = table_gamma(&next_table, &next);
        if next_g >= g {
            break false;
        }
        let fresh = seen.insert(next.assignment().to_vec());
        debug_assert!(fresh, "partition revisited within a restart");
        if !fresh {
            break false;
        }
        partition = next;
        fit = next_fit;
        table = next_table;
        g = next_g;
        e = table_objective(&table);
        trace.push(g);
        visited.push(partition.clone());
    };

    Ok(RestartOutcome {
        partition,
        bundle: fit.bundle,
        degenerate: fit.degenerate,
        objective: e,
        trace,
        visited,
        converged,
    })
}

pub fn solve<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    cfg: &SolveConfig,
) -> Result<SolveReport<F::Model>> {
    solve_with_warm_start(family, points, cfg, None)
}

/// Like [`solve`], with one extra restart (index `cfg.restarts`) started from
/// `Ω(warm)`, where `warm` is padded with zero models up to `cfg.l`.
pub fn solve_with_warm_start<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    cfg: &SolveConfig,
    warm: Option<&Bundle<F::Model>>,
) -> Result<SolveReport<F::Model>> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyDataSet);
    }
    points.iter().try_for_each(|p| family.check_point(p))?;
    let warm_start = match warm {
        Some(w) => {
            if w.len() > cfg.l {
                return Err(Error::InvalidConfig(format!(
                    "warm-start bundle has {} components, more than l = {}",
                    w.len(),
                    cfg.l
                )));
            }
            let padded = w.padded(cfg.l, family.zero_model());
            Some(bundle::best_partition(family, points, &padded)?)
        }
        None => None,
    };

    let total = cfg.restarts + usize::from(warm_start.is_some());
    let outcomes: Vec<RestartOutcome<F::Model>> = (0..total)
        .into_par_iter()
        .map(|r| {
            let init = match (&warm_start, r == cfg.restarts) {
                (Some(p), true) => p.clone(),
                _ => initial_partition(family, points, cfg, r)?,
            };
            run_restart(family, points, cfg, init)
        })
        .collect::<Result<_>>()?;

    let winner = outcomes.iter().enumerate().fold(0, |best, (i, o)| {
        if o.objective < outcomes[best].objective {
            i
        } else {
            best
        }
    });
    let w = &outcomes[winner];
    let certified =
        w.converged && verify_certificate(family, points, cfg, &w.partition, &w.bundle)?;

    Ok(SolveReport {
        best_bundle: w.bundle.clone(),
        best_partition: w.partition.clone(),
        objective: w.objective,
        winning_restart: winner,
        per_restart_objectives: outcomes.iter().map(|o| o.objective).collect(),
        iterations_per_restart: outcomes.iter().map(RestartOutcome::iterations).collect(),
        converged_per_restart: outcomes.iter().map(|o| o.converged).collect(),
        objective_trace: w.trace.clone(),
        degenerate_flags: w.degenerate.clone(),
        converged: certified,
    })
}

/// Checks `P ∈ Ω(V)` and `V ∈ 𝒲(P)` up to `rel_tol` by one more evaluation of each map.
pub fn verify_certificate<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    cfg: &SolveConfig,
    partition: &Partition,
    bundle: &Bundle<F::Model>,
) -> Result<bool> {
    let g = bundle::gamma(family, points, partition, bundle)?;
    let e = bundle::objective_e(family, points, bundle)?;
    let refit = bundle::best_bundle(family, points, partition, cfg.n)?;
    let g_refit = bundle::gamma(family, points, partition, &refit.bundle)?;
    let tol = cfg.rel_tol * (1.0 + e);
    Ok(g - e <= tol && g - g_refit <= tol)
}

/// Exhaustive minimum of Γ(P, 𝒲(P)) over all `l^m` partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce<M> {
    pub objective: f64,
    pub partition: Partition,
    pub bundle: Bundle<M>,
}

pub fn brute_force<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    l: usize,
    n: usize,
) -> Result<BruteForce<F::Model>> {
    if l == 0 {
        return Err(Error::InvalidConfig("l must be at least 1".into()));
    }
    let m = points.len();
    let too_large = Error::TooLarge {
        cells: l,
        points: m,
        limit: BRUTE_FORCE_LIMIT,
    };
    let count = u32::try_from(m)
        .ok()
        .and_then(|e| (l as u64).checked_pow(e))
        .filter(|&c| c <= BRUTE_FORCE_LIMIT)
        .ok_or(too_large)?;
    points.iter().try_for_each(|p| family.check_point(p))?;

    let mut assignment = vec![0usize; m];
    let mut best: Option<BruteForce<F::Model>> = None;
    for _ in 0..count {
        let partition = Partition::new(assignment.clone(), l)?;
        let fit = best_bundle_unchecked(family, points, &partition, n)?;
        let g: f64 = points
            .iter()
            .zip(partition.assignment())
            .map(|(p, &c)| family.dist_sq(&fit.bundle.components()[c], p))
            .sum();
        if best.as_ref().is_none_or(|b| g < b.objective) {
            best = Some(BruteForce {
                objective: g,
                partition,
                bundle: fit.bundle,
            });
        }
        for slot in assignment.iter_mut() {
            *slot += 1;
            if *slot < l {
                break;
            }
            *slot = 0;
        }
    }
    Ok(best.expect("at least one partition is enumerated"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub l: usize,
    pub n: usize,
    pub epsilon: f64,
    pub converged: bool,
}

/// Minimal ε estimates over a grid of `(l, n)`.
///
/// For each `n`, the `l` values are visited in increasing order and every run
/// is warm-started from the previous bundle padded with zero models, so the
/// ε column is non-increasing in `l`.
pub fn sparsity_curve<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    ls: &[usize],
    ns: &[usize],
    cfg: &SolveConfig,
) -> Result<Vec<CurveRow>> {
    if ls.is_empty() || ns.is_empty() {
        return Err(Error::InvalidConfig("sweep ranges must be nonempty".into()));
    }
    let mut ls = ls.to_vec();
    ls.sort_unstable();
    ls.dedup();
    let mut rows = Vec::new();
    for &n in ns {
        let mut previous: Option<(Bundle<F::Model>, f64)> = None;
        for &l in &ls {
            let run_cfg = SolveConfig {
                l,
                n,
                ..cfg.clone()
            };
            let report =
                solve_with_warm_start(family, points, &run_cfg, previous.as_ref().map(|p| &p.0))?;
            let (bundle, epsilon, converged) = match previous {
                Some((prev, prev_eps)) if report.objective > prev_eps => {
                    // Rounding beat the warm start; keep the padded previous bundle.
                    (prev.padded(l, family.zero_model()), prev_eps, false)
                }
                _ => (report.best_bundle, report.objective, report.converged),
            };
            rows.push(CurveRow {
                l,
                n,
                epsilon,
                converged,
            });
            previous = Some((bundle, epsilon));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::Euclidean;
    use crate::subspace::{best_fit_subspace, DataSet};
    use nalgebra::DVector;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn two_lines() -> Vec<DVector<f64>> {
        let a = v(&[1.0, 2.0, -1.0]);
        let b = v(&[0.5, -1.0, 3.0]);
        (0..10)
            .flat_map(|k| {
                let t = k as f64 - 4.5;
                [&a * t, &b * (0.3 * t + 1.0)]
            })
            .collect()
    }

    #[test]
    fn recovers_two_lines() {
        let f = two_lines();
        let cfg = SolveConfig {
            l: 2,
            n: 1,
            restarts: 8,
            seed: 7,
            ..Default::default()
        };
        let r = solve(&Euclidean::new(3), &f, &cfg).unwrap();
        assert!(r.objective <= 1e-12, "objective {}", r.objective);
        assert!(r.converged);
        let min = r
            .per_restart_objectives
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.objective, min);
    }

    #[test]
    fn single_cell_is_pca() {
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|i| {
                let x = i as f64;
                vec![
                    x.sin(),
                    (1.3 * x).cos(),
                    0.2 * x - 0.7,
                    (0.5 * x).sin() * 2.0,
                ]
            })
            .collect();
        let data = DataSet::from_rows(&rows).unwrap();
        let fit = best_fit_subspace(&data, 2).unwrap();
        let r = solve(&Euclidean::new(4), data.vectors(), &SolveConfig::new(1, 2)).unwrap();
        assert!((r.objective - fit.error).abs() <= 1e-12 * (1.0 + fit.error));
        assert_eq!(r.iterations_per_restart.iter().max(), Some(&1));
    }

    #[test]
    fn one_subspace_per_point() {
        let f = vec![v(&[1.0, 2.0]), v(&[-3.0, 1.0]), v(&[0.5, 0.5])];
        let cfg = SolveConfig {
            l: 3,
            n: 1,
            restarts: 4,
            init_strategy: InitStrategy::FarthestPoint,
            ..Default::default()
        };
        let r = solve(&Euclidean::new(2), &f, &cfg).unwrap();
        assert!(r.objective < 1e-28);
    }

    #[test]
    fn empty_data_is_error() {
        let r = solve(&Euclidean::new(2), &[], &SolveConfig::new(2, 1));
        assert!(matches!(r, Err(Error::EmptyDataSet)));
    }

    #[test]
    fn invalid_config() {
        let f = vec![v(&[1.0, 0.0])];
        let cfg = SolveConfig {
            restarts: 0,
            ..SolveConfig::new(1, 1)
        };
        assert!(matches!(
            solve(&Euclidean::new(2), &f, &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let cfg = SolveConfig::new(0, 1);
        assert!(matches!(
            solve(&Euclidean::new(2), &f, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let f = two_lines();
        for init in [InitStrategy::RandomPartition, InitStrategy::FarthestPoint] {
            let cfg = SolveConfig {
                l: 3,
                n: 1,
                restarts: 5,
                seed: 99,
                init_strategy: init,
                ..Default::default()
            };
            let a = solve(&Euclidean::new(3), &f, &cfg).unwrap();
            let b = solve(&Euclidean::new(3), &f, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn farthest_point_seeds_distinct_lines() {
        let f = two_lines();
        let cfg = SolveConfig {
            l: 2,
            n: 1,
            restarts: 4,
            init_strategy: InitStrategy::FarthestPoint,
            ..Default::default()
        };
        let r = solve(&Euclidean::new(3), &f, &cfg).unwrap();
        assert!(r.objective <= 1e-12);
    }

    #[test]
    fn brute_force_small_cases() {
        let fam = Euclidean::new(2);
        let collinear = vec![v(&[1.0, 1.0]), v(&[2.0, 2.0])];
        assert!(brute_force(&fam, &collinear, 2, 1).unwrap().objective < 1e-28);

        let f = vec![v(&[3.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, 2.0])];
        let bf = brute_force(&fam, &f, 2, 1).unwrap();
        assert!(bf.objective < 1e-28);
        let p = bf.partition.assignment();
        assert_eq!(p[1], p[2]);
        assert_ne!(p[0], p[1]);

        let data = DataSet::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let one = brute_force(&fam, data.vectors(), 1, 1).unwrap();
        assert_eq!(
            one.objective,
            crate::subspace::total_error(&data, &best_fit_subspace(&data, 1).unwrap().subspace)
                .unwrap()
        );
    }

    #[test]
    fn brute_force_guard() {
        let f: Vec<_> = (0..30).map(|i| v(&[i as f64, 1.0])).collect();
        assert!(matches!(
            brute_force(&Euclidean::new(2), &f, 2, 1),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn curve_is_monotone_and_hits_zero() {
        let f = two_lines();
        let cfg = SolveConfig {
            restarts: 4,
            seed: 3,
            ..Default::default()
        };
        let rows = sparsity_curve(&Euclidean::new(3), &f, &[1, 2, 3], &[1], &cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.windows(2).all(|w| w[1].epsilon <= w[0].epsilon));
        assert!(rows[1].epsilon <= 1e-12);
    }

    #[test]
    fn curve_l_at_least_m_is_exact() {
        let f = vec![
            v(&[1.0, 2.0, 3.0]),
            v(&[-1.0, 0.0, 2.0]),
            v(&[4.0, 1.0, 1.0]),
        ];
        let cfg = SolveConfig {
            restarts: 2,
            init_strategy: InitStrategy::FarthestPoint,
            ..Default::default()
        };
        let rows = sparsity_curve(&Euclidean::new(3), &f, &[3, 4], &[1], &cfg).unwrap();
        assert!(rows.iter().all(|r| r.epsilon < 1e-28));
    }
}
