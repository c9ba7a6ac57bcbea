//! Weighted empirical measures and the two group operations on them:
//! orbit symmetrization and pushforward onto the fundamental domain.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::groups::{dist, GroupAction};

/// Atoms closer than this (Euclidean) are merged.
pub const COALESCE_TOL: f64 = 1e-12;

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A finitely supported probability measure on R^d.
///
/// Atoms are stored flat and kept in canonical order: sorted
/// lexicographically, with atoms within [`COALESCE_TOL`] of each other merged
/// and zero weights dropped. Two measures with the same atoms therefore
/// compare equal atom-by-atom regardless of how they were built.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Uniform measure (1/m each) on the given samples; duplicates coalesce.
    pub fn from_samples(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::arg("cannot build a measure from an empty sample"))?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::arg("samples have inconsistent dimensions"));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    /// Uniform measure on points stored row-major in `coords`.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::arg("empty sample or ragged coordinate buffer"));
        }
        let m = coords.len() / dim;
        let weights = vec![1.0 / m as f64; m];
        Self::build(dim, coords, weights)
    }

    /// Weighted measure. Weights must be nonnegative and sum to one within
    /// 1e-9; they are rescaled to sum to one exactly (up to rounding).
    pub fn from_weighted(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() != weights.len() * dim || weights.is_empty() {
            return Err(Error::arg("coordinate and weight counts disagree"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::arg("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::arg(format!("weights sum to {total}, expected 1")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::build(dim, coords, weights)
    }

    fn build(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::arg("coordinates must be finite"));
        }
        let (coords, weights) = canonicalize(dim, &coords, &weights);
        if weights.is_empty() {
            return Err(Error::arg("measure has no atoms with positive weight"));
        }
        Ok(EmpiricalMeasure {
            dim,
            coords,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn check_in_domain(&self, action: &GroupAction) -> Result<()> {
        for (x, _) in self.atoms() {
            action.check_point(x)?;
        }
        Ok(())
    }

    /// S^Σ[P]: every atom (x, w) spread as (σx, w/|Σ|) over its orbit.
    pub fn symmetrize(&self, action: &GroupAction) -> Result<Self> {
        self.check_in_domain(action)?;
        let order = action.order();
        if order == 1 {
            return Ok(self.clone());
        }
        let d = self.dim;
        let mut coords = vec![0.0; self.coords.len() * order];
        let mut weights = Vec::with_capacity(self.len() * order);
        let mut slot = 0;
        for (x, w) in self.atoms() {
            for k in 0..order {
                action.apply_into(k, x, &mut coords[slot * d..(slot + 1) * d]);
                weights.push(w / order as f64);
                slot += 1;
            }
        }
        Self::build(d, coords, weights)
    }

    /// (T_0)_♯ P: every atom moved to its orbit representative in X0.
    pub fn project(&self, action: &GroupAction) -> Result<Self> {
        self.check_in_domain(action)?;
        let d = self.dim;
        let mut coords = vec![0.0; self.coords.len()];
        for (i, (x, _)) in self.atoms().enumerate() {
            action.project_into(x, &mut coords[i * d..(i + 1) * d]);
        }
        Self::build(d, coords, self.weights.clone())
    }

    /// (θ_σ)_♯ P for a single group element.
    pub fn pushforward(&self, action: &GroupAction, index: usize) -> Result<Self> {
        let mut coords = vec![0.0; self.coords.len()];
        for (i, (x, _)) in self.atoms().enumerate() {
            let y = action.apply(index, x)?;
            coords[i * self.dim..(i + 1) * self.dim].copy_from_slice(&y);
        }
        Self::build(self.dim, coords, self.weights.clone())
    }

    /// Atomwise comparison in canonical order.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim
            && self.len() == other.len()
            && self
                .atoms()
                .zip(other.atoms())
                .all(|((x, w), (y, v))| dist(x, y) <= tol && (w - v).abs() <= tol)
    }

    /// Largest pairwise distance between atoms.
    pub fn diameter(&self) -> f64 {
        support_diameter(&[self])
    }
}

/// Largest pairwise distance over the union of the supports.
pub(crate) fn support_diameter(measures: &[&EmpiricalMeasure]) -> f64 {
    let pts: Vec<&[f64]> = measures
        .iter()
        .flat_map(|m| m.coords.chunks_exact(m.dim))
        .collect();
    if pts.first().map(|p| p.len()) == Some(1) {
        let (lo, hi) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[0]), hi.max(p[0]))
            });
        return hi - lo;
    }
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.max(dist(pts[i], pts[j]));
        }
    }
    best
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Sort atoms lexicographically, merge near-duplicates, drop zero weights.
fn canonicalize(dim: usize, coords: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = weights.len();
    let point = |i: usize| &coords[i * dim..(i + 1) * dim];
    let mut order: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    order.sort_unstable_by(|&a, &b| lex_cmp(point(a), point(b)).then(a.cmp(&b)));

    let mut merged = vec![false; order.len()];
    let mut out_coords = Vec::with_capacity(order.len() * dim);
    let mut out_weights = Vec::with_capacity(order.len());
    for a in 0..order.len() {
        if merged[a] {
            continue;
        }
        let x = point(order[a]);
        let mut w = weights[order[a]];
        // near-duplicates share the leading coordinate to within the tolerance
        for b in a + 1..order.len() {
            let y = point(order[b]);
            if y[0] - x[0] > COALESCE_TOL {
                break;
            }
            if !merged[b] && dist(x, y) <= COALESCE_TOL {
                merged[b] = true;
                w += weights[order[b]];
            }
        }
        out_coords.extend_from_slice(x);
        out_weights.push(w);
    }
    (out_coords, out_weights)
}
