//! Bundles of subspaces, partitions of the data and the functionals
//! `e(F, V)`, `Γ(P, V)` together with the best-partition and best-bundle maps.
//!
//! The operations are generic over a [`ModelFamily`]: a class of closed
//! subspaces with a computable minimizer of the single-subspace error. The
//! Euclidean family ([`Euclidean`]) uses Eckart-Young; the finite
//! shift-invariant family lives in [`crate::sis`].

use std::fmt::Debug;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::{self, Subspace};

const PARALLEL_MIN_POINTS: usize = 256;

/// Optimal model for a set of points, with its error.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit<M> {
    pub model: M,
    pub error: f64,
    pub degenerate: bool,
}

/// A family of subspaces with the minimal approximation property: for every
/// finite set of points there is a member of length ≤ n minimizing the sum of
/// squared distances, and `fit` computes it.
pub trait ModelFamily: Sync {
    type Point: Sync;
    type Model: Clone + Debug + PartialEq + Send + Sync;

    fn zero_model(&self) -> Self::Model;
    fn check_point(&self, point: &Self::Point) -> Result<()>;
    fn check_model(&self, model: &Self::Model) -> Result<()>;
    fn fit(&self, points: &[&Self::Point], n: usize) -> Result<Fit<Self::Model>>;
    /// Squared distance from `point` to `model`. Inputs are already validated.
    fn dist_sq(&self, model: &Self::Model, point: &Self::Point) -> f64;
}

/// Linear subspaces of ℝᴺ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Euclidean {
    pub ambient_dim: usize,
}

impl Euclidean {
    pub fn new(ambient_dim: usize) -> Self {
        Self { ambient_dim }
    }
}

impl ModelFamily for Euclidean {
    type Point = DVector<f64>;
    type Model = Subspace;

    fn zero_model(&self) -> Subspace {
        Subspace::zero(self.ambient_dim)
    }

    fn check_point(&self, point: &DVector<f64>) -> Result<()> {
        if point.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: point.len(),
            });
        }
        Ok(())
    }

    fn check_model(&self, model: &Subspace) -> Result<()> {
        if model.ambient_dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: model.ambient_dim(),
            });
        }
        Ok(())
    }

    fn fit(&self, points: &[&DVector<f64>], n: usize) -> Result<Fit<Subspace>> {
        let fit = subspace::best_fit_points(self.ambient_dim, points, n)?;
        Ok(Fit {
            model: fit.subspace,
            error: fit.error,
            degenerate: fit.degenerate,
        })
    }

    fn dist_sq(&self, model: &Subspace, point: &DVector<f64>) -> f64 {
        model.dist_sq_unchecked(point)
    }
}

/// Ordered sequence of `l ≥ 1` models; zero subspaces are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bundle<M> {
    components: Vec<M>,
}

impl<M: Clone> Bundle<M> {
    pub fn new(components: Vec<M>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig(
                "a bundle needs at least one component".into(),
            ));
        }
        Ok(Self { components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[M] {
        &self.components
    }

    /// Appends copies of `zero` until the bundle has `l` components.
    pub fn padded(&self, l: usize, zero: M) -> Self {
        let mut components = self.components.clone();
        while components.len() < l {
            components.push(zero.clone());
        }
        Self { components }
    }
}

/// Assignment of each data index to one of `cells` cells. Cells may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    cells: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidConfig(
                "a partition needs at least one cell".into(),
            ));
        }
        if let Some(&bad) = assignment.iter().find(|&&c| c >= cells) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                limit: cells,
            });
        }
        Ok(Self { assignment, cells })
    }

    /// Everything in cell 0.
    pub fn single(points: usize, cells: usize) -> Self {
        Self {
            assignment: vec![0; points],
            cells: cells.max(1),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cell(&self, i: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(k, &c)| (c == i).then_some(k))
            .collect()
    }

    pub fn cell_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.cells];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Best bundle for a partition, with the per-component errors.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleFit<M> {
    pub bundle: Bundle<M>,
    pub errors: Vec<f64>,
    pub degenerate: Vec<bool>,
}

pub(crate) fn check_inputs<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    bundle: &Bundle<F::Model>,
) -> Result<()> {
    points.iter().try_for_each(|p| family.check_point(p))?;
    bundle
        .components()
        .iter()
        .try_for_each(|m| family.check_model(m))
}

fn check_partition(points: usize, partition: &Partition, cells: usize) -> Result<()> {
    if partition.len() != points {
        return Err(Error::DimensionMismatch {
            expected: points,
            found: partition.len(),
        });
    }
    if partition.cells() > cells {
        return Err(Error::IndexOutOfRange {
            index: partition.cells() - 1,
            limit: cells,
        });
    }
    Ok(())
}

/// `table[i][j] = d²(fᵢ, V_j)`.
pub(crate) fn distance_table<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    bundle: &Bundle<F::Model>,
) -> Vec<Vec<f64>> {
    let row = |p: &F::Point| -> Vec<f64> {
        bundle
            .components()
            .iter()
            .map(|m| family.dist_sq(m, p))
            .collect()
    };
    if points.len() >= PARALLEL_MIN_POINTS {
        points.par_iter().map(row).collect()
    } else {
        points.iter().map(row).collect()
    }
}

/// Index of the smallest entry; exact ties go to the lowest index.
pub(crate) fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &d) in row.iter().enumerate().skip(1) {
        if d < row[best] {
            best = j;
        }
    }
    best
}

/// Largest entry outside `excluded`; ties go to the lowest index.
pub(crate) fn argmax_excluding(values: &[f64], excluded: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in values.iter().enumerate() {
        if excluded.contains(&i) {
            continue;
        }
        if best.is_none_or(|b| x > values[b]) {
            best = Some(i);
        }
    }
    best
}

pub(crate) fn table_objective(table: &[Vec<f64>]) -> f64 {
    table.iter().map(|row| row[argmin(row)]).sum()
}

pub(crate) fn table_gamma(table: &[Vec<f64>], partition: &Partition) -> f64 {
    table
        .iter()
        .zip(partition.assignment())
        .map(|(row, &c)| row[c])
        .sum()
}

pub(crate) fn table_partition(table: &[Vec<f64>], cells: usize) -> Partition {
    Partition {
        assignment: table.iter().map(|row| argmin(row)).collect(),
        cells,
    }
}

/// e(F, V) = Σ_f min_j d²(f, V_j).
pub fn objective_e<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    bundle: &Bundle<F::Model>,
) -> Result<f64> {
    check_inputs(family, points, bundle)?;
    Ok(table_objective(&distance_table(family, points, bundle)))
}

/// Γ(P, V) = Σᵢ E(Fᵢ, Vᵢ): every point is charged to its assigned component.
pub fn gamma<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    partition: &Partition,
    bundle: &Bundle<F::Model>,
) -> Result<f64> {
    check_inputs(family, points, bundle)?;
    check_partition(points.len(), partition, bundle.len())?;
    Ok(points
        .iter()
        .zip(partition.assignment())
        .map(|(p, &c)| family.dist_sq(&bundle.components()[c], p))
        .sum())
}

/// A member of Ω_l(V): each point goes to a nearest component, lowest index on ties.
pub fn best_partition<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    bundle: &Bundle<F::Model>,
) -> Result<Partition> {
    check_inputs(family, points, bundle)?;
    Ok(table_partition(
        &distance_table(family, points, bundle),
        bundle.len(),
    ))
}

/// A member of 𝒲(P): each cell fitted by an optimal model of length ≤ n,
/// empty cells by the zero model.
pub fn best_bundle<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    partition: &Partition,
    n: usize,
) -> Result<BundleFit<F::Model>> {
    points.iter().try_for_each(|p| family.check_point(p))?;
    check_partition(points.len(), partition, partition.cells())?;
    best_bundle_unchecked(family, points, partition, n)
}

pub(crate) fn best_bundle_unchecked<F: ModelFamily>(
    family: &F,
    points: &[F::Point],
    partition: &Partition,
    n: usize,
) -> Result<BundleFit<F::Model>> {
    let mut components = Vec::with_capacity(partition.cells());
    let mut errors = Vec::with_capacity(partition.cells());
    let mut degenerate = Vec::with_capacity(partition.cells());
    for i in 0..partition.cells() {
        let members: Vec<&F::Point> = partition.cell(i).into_iter().map(|k| &points[k]).collect();
        if members.is_empty() {
            components.push(family.zero_model());
            errors.push(0.0);
            degenerate.push(false);
        } else {
            let fit = family.fit(&members, n)?;
            components.push(fit.model);
            errors.push(fit.error);
            degenerate.push(fit.degenerate);
        }
    }
    Ok(BundleFit {
        bundle: Bundle { components },
        errors,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::{total_error, DataSet};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn axes() -> Bundle<Subspace> {
        Bundle::new(vec![
            Subspace::span(2, &[v(&[1.0, 0.0])]).unwrap(),
            Subspace::span(2, &[v(&[0.0, 1.0])]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn objective_over_two_axes() {
        let f = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 1.0])];
        let e = objective_e(&Euclidean::new(2), &f, &axes()).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn objective_empty_and_contained() {
        let fam = Euclidean::new(2);
        assert_eq!(objective_e(&fam, &[], &axes()).unwrap(), 0.0);
        let f = vec![v(&[2.0, 0.0]), v(&[0.0, -3.0])];
        assert_eq!(objective_e(&fam, &f, &axes()).unwrap(), 0.0);
    }

    #[test]
    fn single_component_reduces_to_total_error() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]];
        let data = DataSet::from_rows(&rows).unwrap();
        let line = Subspace::span(2, &[v(&[1.0, 1.0])]).unwrap();
        let b = Bundle::new(vec![line.clone()]).unwrap();
        let e = objective_e(&Euclidean::new(2), data.vectors(), &b).unwrap();
        assert_eq!(e, total_error(&data, &line).unwrap());
    }

    #[test]
    fn gamma_with_swapped_partition() {
        let fam = Euclidean::new(2);
        let f = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let swapped = Partition::new(vec![1, 0], 2).unwrap();
        assert_eq!(gamma(&fam, &f, &swapped, &axes()).unwrap(), 2.0);
        assert_eq!(objective_e(&fam, &f, &axes()).unwrap(), 0.0);
        let nearest = best_partition(&fam, &f, &axes()).unwrap();
        assert_eq!(gamma(&fam, &f, &nearest, &axes()).unwrap(), 0.0);
    }

    #[test]
    fn gamma_zero_component_charges_full_norm() {
        let fam = Euclidean::new(2);
        let f = vec![v(&[1.0, 2.0]), v(&[3.0, 0.0])];
        let b = Bundle::new(vec![Subspace::zero(2), Subspace::zero(2)]).unwrap();
        let p = Partition::single(2, 2);
        assert_eq!(gamma(&fam, &f, &p, &b).unwrap(), 14.0);
    }

    #[test]
    fn gamma_rejects_bad_partition() {
        let fam = Euclidean::new(2);
        let f = vec![v(&[1.0, 0.0])];
        assert!(matches!(
            Partition::new(vec![2], 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        let p = Partition::new(vec![0, 0], 2).unwrap();
        assert!(gamma(&fam, &f, &p, &axes()).is_err());
        let p3 = Partition::new(vec![2], 3).unwrap();
        assert!(matches!(
            gamma(&fam, &f, &p3, &axes()),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn best_partition_ties_go_low() {
        let fam = Euclidean::new(2);
        let f = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 1.0])];
        let p = best_partition(&fam, &f, &axes()).unwrap();
        assert_eq!(p.assignment(), &[0, 1, 0]);

        let x = Subspace::span(2, &[v(&[1.0, 0.0])]).unwrap();
        let same = Bundle::new(vec![x.clone(), x]).unwrap();
        let p = best_partition(&fam, &f, &same).unwrap();
        assert_eq!(p.assignment(), &[0, 0, 0]);
    }

    #[test]
    fn best_partition_two_lines() {
        let fam = Euclidean::new(3);
        let a = v(&[1.0, 2.0, 0.0]);
        let b = v(&[0.0, 1.0, -1.0]);
        let f: Vec<_> = [1.0, -2.0, 0.5]
            .iter()
            .flat_map(|&t| [&a * t, &b * (t + 1.0)])
            .collect();
        let lines = Bundle::new(vec![
            Subspace::span(3, std::slice::from_ref(&b)).unwrap(),
            Subspace::span(3, std::slice::from_ref(&a)).unwrap(),
        ])
        .unwrap();
        let p = best_partition(&fam, &f, &lines).unwrap();
        assert_eq!(p.assignment(), &[1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn best_bundle_empty_cell_is_zero() {
        let fam = Euclidean::new(2);
        let f = vec![v(&[3.0, 0.0]), v(&[0.0, 1.0])];
        let p = Partition::new(vec![0, 0], 2).unwrap();
        let fit = best_bundle(&fam, &f, &p, 1).unwrap();
        assert!(fit.bundle.components()[1].is_zero());
        assert_eq!(fit.errors, vec![1.0, 0.0]);
        assert_eq!(gamma(&fam, &f, &p, &fit.bundle).unwrap(), 1.0);
    }

    #[test]
    fn best_bundle_exact_cells() {
        let fam = Euclidean::new(3);
        let f = vec![
            v(&[1.0, 0.0, 0.0]),
            v(&[2.0, 0.0, 0.0]),
            v(&[0.0, 1.0, 1.0]),
        ];
        let p = Partition::new(vec![0, 0, 1], 2).unwrap();
        let fit = best_bundle(&fam, &f, &p, 1).unwrap();
        assert!(gamma(&fam, &f, &p, &fit.bundle).unwrap() < 1e-28);
    }
}
