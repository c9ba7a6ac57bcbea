//! Finite cyclic group actions on subsets of R^d.
//!
//! Group elements are addressed by index `0..order`, with composition
//! `a ∘ b = (a + b) mod order`. Each action comes with a canonical
//! fundamental domain: the half-open sector `[0, 2π/n)` of angles for
//! rotations, and `[0, 1/n)` for translations mod 1.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// A finite cyclic group acting on a subset of R^d.
///
/// Rotations act on R² about the origin (the closed unit disk is an invariant
/// subset), translations act on `[0, 1)` by `x ↦ (x + k/n) mod 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupAction {
    Trivial,
    CyclicRotation2D(usize),
    CyclicTranslationMod1(usize),
}

impl GroupAction {
    pub fn rotation(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::arg("group order must be at least 1"));
        }
        Ok(GroupAction::CyclicRotation2D(order))
    }

    pub fn translation(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::arg("group order must be at least 1"));
        }
        Ok(GroupAction::CyclicTranslationMod1(order))
    }

    /// Cardinality of the group.
    pub fn order(&self) -> usize {
        match *self {
            GroupAction::Trivial => 1,
            GroupAction::CyclicRotation2D(n) | GroupAction::CyclicTranslationMod1(n) => n,
        }
    }

    /// Ambient dimension, `None` for the trivial group (acts on any R^d).
    pub fn dim(&self) -> Option<usize> {
        match self {
            GroupAction::Trivial => None,
            GroupAction::CyclicRotation2D(_) => Some(2),
            GroupAction::CyclicTranslationMod1(_) => Some(1),
        }
    }

    /// Whether every group element is an isometry of the Euclidean metric on X.
    ///
    /// Translation mod 1 is not: wraparound moves nearby points apart.
    pub fn is_isometric(&self) -> bool {
        !matches!(self, GroupAction::CyclicTranslationMod1(n) if *n > 1)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "point {x:?} has non-finite coordinates"
            )));
        }
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(Error::domain(format!(
                    "group {self} acts on R^{d}, got a point of dimension {}",
                    x.len()
                )));
            }
        }
        if let GroupAction::CyclicTranslationMod1(_) = self {
            if !(0.0..1.0).contains(&x[0]) {
                return Err(Error::domain(format!("{} is outside [0, 1)", x[0])));
            }
        }
        Ok(())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.order() {
            return Err(Error::arg(format!(
                "group element index {index} out of range for order {}",
                self.order()
            )));
        }
        Ok(())
    }

    /// θ_σ(x) for the element with the given index.
    pub fn apply(&self, index: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_index(index)?;
        self.check_point(x)?;
        let mut out = vec![0.0; x.len()];
        self.apply_into(index, x, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`apply`](Self::apply) writing into `out`.
    pub(crate) fn apply_into(&self, index: usize, x: &[f64], out: &mut [f64]) {
        match *self {
            GroupAction::Trivial => out.copy_from_slice(x),
            GroupAction::CyclicRotation2D(n) => {
                let (c, s) = rotation_cos_sin(index, n);
                out[0] = c * x[0] - s * x[1];
                out[1] = s * x[0] + c * x[1];
            }
            GroupAction::CyclicTranslationMod1(n) => {
                out[0] = translate_mod1(x[0], index, n);
            }
        }
    }

    /// The orbit {θ_σ(x)} in element-index order.
    pub fn orbit(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_point(x)?;
        Ok((0..self.order())
            .map(|k| {
                let mut out = vec![0.0; x.len()];
                self.apply_into(k, x, &mut out);
                out
            })
            .collect())
    }

    /// T_0: the unique orbit element in the canonical fundamental domain.
    pub fn project_fundamental(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = vec![0.0; x.len()];
        self.project_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn project_into(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            GroupAction::Trivial => out.copy_from_slice(x),
            GroupAction::CyclicRotation2D(n) => {
                if x[0] == 0.0 && x[1] == 0.0 {
                    out[0] = 0.0;
                    out[1] = 0.0;
                    return;
                }
                let k = sector_of(x, n);
                self.apply_into((n - k) % n, x, out);
            }
            GroupAction::CyclicTranslationMod1(n) => {
                let width = 1.0 / n as f64;
                let mut k = ((x[0] * n as f64).floor() as usize).min(n - 1);
                let mut r = x[0] - k as f64 * width;
                if r < 0.0 && k > 0 {
                    k -= 1;
                    r = x[0] - k as f64 * width;
                } else if r >= width && k + 1 < n {
                    k += 1;
                    r = x[0] - k as f64 * width;
                }
                out[0] = r.max(0.0);
            }
        }
    }

    /// Whether `x` lies in the canonical fundamental domain, with slack `tol`
    /// on the angular or interval boundaries.
    pub fn in_fundamental_domain(&self, x: &[f64], tol: f64) -> bool {
        match *self {
            GroupAction::Trivial => true,
            GroupAction::CyclicRotation2D(n) => {
                if x[0] == 0.0 && x[1] == 0.0 {
                    return true;
                }
                let mut phi = x[1].atan2(x[0]);
                if phi < -tol {
                    phi += TAU;
                }
                phi >= -tol && phi < TAU / n as f64 + tol
            }
            GroupAction::CyclicTranslationMod1(n) => x[0] >= -tol && x[0] < 1.0 / n as f64 + tol,
        }
    }

    /// Canonical grid on the fundamental domain used by the assumption
    /// checkers: a `resolution × resolution` polar grid on the disk sector for
    /// rotations (the trivial group uses the whole disk), `resolution` evenly
    /// spaced points on `[0, 1/n)` for translations. Radii run over
    /// `k / resolution`, `k = 1..=resolution`; the origin is appended only
    /// when `include_origin` is set.
    pub fn fundamental_grid(&self, resolution: usize, include_origin: bool) -> Vec<Vec<f64>> {
        let res = resolution.max(1);
        match *self {
            GroupAction::CyclicTranslationMod1(n) => {
                let width = 1.0 / n as f64;
                (0..res)
                    .map(|j| vec![j as f64 * width / res as f64])
                    .collect()
            }
            GroupAction::CyclicRotation2D(_) | GroupAction::Trivial => {
                let sector = TAU / self.order() as f64;
                let mut grid = Vec::with_capacity(res * res + 1);
                if include_origin {
                    grid.push(vec![0.0, 0.0]);
                }
                for i in 1..=res {
                    let rho = i as f64 / res as f64;
                    for j in 0..res {
                        let phi = sector * j as f64 / res as f64;
                        grid.push(vec![rho * phi.cos(), rho * phi.sin()]);
                    }
                }
                grid
            }
        }
    }
}

/// Sector index k with angle(x) ∈ [2πk/n, 2π(k+1)/n).
fn sector_of(x: &[f64], n: usize) -> usize {
    let mut phi = x[1].atan2(x[0]);
    if phi < 0.0 {
        phi += TAU;
    }
    let k = (phi / (TAU / n as f64)).floor() as usize;
    k.min(n - 1)
}

/// cos/sin of 2πk/n, exact at multiples of a quarter turn.
pub(crate) fn rotation_cos_sin(k: usize, n: usize) -> (f64, f64) {
    let k = k % n;
    if (4 * k).is_multiple_of(n) {
        return match 4 * k / n {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let angle = TAU * k as f64 / n as f64;
    (angle.cos(), angle.sin())
}

fn translate_mod1(x: f64, k: usize, n: usize) -> f64 {
    let v = x + k as f64 / n as f64;
    if v >= 1.0 {
        (v - 1.0).max(0.0)
    } else {
        v
    }
}

impl fmt::Display for GroupAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupAction::Trivial => write!(f, "trivial"),
            GroupAction::CyclicRotation2D(n) => write!(f, "rot:{n}"),
            GroupAction::CyclicTranslationMod1(n) => write!(f, "trans1d:{n}"),
        }
    }
}

impl FromStr for GroupAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "trivial" {
            return Ok(GroupAction::Trivial);
        }
        let (kind, order) = s
            .split_once(':')
            .ok_or_else(|| Error::arg(format!("unrecognised group '{s}'")))?;
        let order: usize = order
            .parse()
            .map_err(|_| Error::arg(format!("invalid group order in '{s}'")))?;
        match kind {
            "rot" => GroupAction::rotation(order),
            "trans1d" => GroupAction::translation(order),
            _ => Err(Error::arg(format!("unrecognised group kind '{kind}'"))),
        }
    }
}

impl Serialize for GroupAction {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Outcome of the sampled separation / non-contraction check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub separation_ok: bool,
    /// min ‖σx − σ′x′‖ over sample pairs and σ ≠ σ′ (`inf` for the trivial group).
    pub min_cross_orbit_gap: f64,
    pub noncontraction_ok: bool,
    /// min ‖σx − σx′‖ / ‖x − x′‖ over distinct sample pairs and all σ.
    pub worst_contraction_ratio: f64,
}

const NONCONTRACTION_SLACK: f64 = 1e-9;

/// Sampled check of orbit separation (gap > 2δ₀ between distinct orbit
/// elements) and non-contraction of every group element on X0.
///
/// This only inspects the given samples; a pass is evidence, not proof.
pub fn check_assumption_a1(
    action: &GroupAction,
    samples: &[Vec<f64>],
    delta0: f64,
) -> Result<CheckReport> {
    if samples.is_empty() {
        return Err(Error::arg("assumption check needs at least one sample"));
    }
    if delta0.is_nan() || delta0 <= 0.0 {
        return Err(Error::arg("delta0 must be positive"));
    }
    for x in samples {
        action.check_point(x)?;
    }
    let order = action.order();
    let dim = samples[0].len();
    let orbits: Vec<Vec<f64>> = samples
        .iter()
        .map(|x| {
            let mut flat = vec![0.0; order * dim];
            for k in 0..order {
                action.apply_into(k, x, &mut flat[k * dim..(k + 1) * dim]);
            }
            flat
        })
        .collect();

    let mut min_gap = f64::INFINITY;
    if order > 1 {
        for (a, oa) in orbits.iter().enumerate() {
            for ob in &orbits[a..] {
                if action.is_isometric() {
                    // ‖σx − σ′x′‖ = ‖x − σ⁻¹σ′x′‖; both orderings of the pair
                    // are covered because τ ranges over all non-identity elements.
                    let x = &oa[..dim];
                    for t in 1..order {
                        min_gap = min_gap.min(dist(x, &ob[t * dim..(t + 1) * dim]));
                    }
                } else {
                    for s in 0..order {
                        for t in 0..order {
                            if s != t {
                                let d =
                                    dist(&oa[s * dim..(s + 1) * dim], &ob[t * dim..(t + 1) * dim]);
                                min_gap = min_gap.min(d);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut worst_ratio = f64::INFINITY;
    for a in 0..orbits.len() {
        for b in a + 1..orbits.len() {
            let base = dist(&samples[a], &samples[b]);
            if base == 0.0 {
                continue;
            }
            for s in 0..order {
                let d = dist(
                    &orbits[a][s * dim..(s + 1) * dim],
                    &orbits[b][s * dim..(s + 1) * dim],
                );
                worst_ratio = worst_ratio.min(d / base);
            }
        }
    }
    if worst_ratio == f64::INFINITY {
        worst_ratio = 1.0;
    }

    Ok(CheckReport {
        separation_ok: min_gap > 2.0 * delta0,
        min_cross_orbit_gap: min_gap,
        noncontraction_ok: worst_ratio >= 1.0 - NONCONTRACTION_SLACK,
        worst_contraction_ratio: worst_ratio,
    })
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
