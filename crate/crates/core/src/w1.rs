//! Exact empirical Wasserstein-1 estimators, plain and group-invariant.
//!
//! Values are unnormalized: with Lipschitz constant `L` the result is
//! `L · W1`, the supremum of `E_P γ − E_Q γ` over L-Lipschitz γ.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::{dist, GroupAction};
use crate::measures::EmpiricalMeasure;
use crate::sum::Neumaier;
use crate::transport::{self, MAX_COST_ENTRIES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum W1Method {
    /// CDF formula in one dimension, LP otherwise (quotient LP when the
    /// orbit-expanded LP would exceed the size guard).
    Auto,
    Cdf1D,
    TransportLP,
    QuotientLP,
}

impl FromStr for W1Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(W1Method::Auto),
            "cdf1d" => Ok(W1Method::Cdf1D),
            "lp" => Ok(W1Method::TransportLP),
            "quotient" => Ok(W1Method::QuotientLP),
            _ => Err(Error::arg(format!(
                "unknown W1 method '{s}' (auto|cdf1d|lp|quotient)"
            ))),
        }
    }
}

impl fmt::Display for W1Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            W1Method::Auto => "auto",
            W1Method::Cdf1D => "cdf1d",
            W1Method::TransportLP => "lp",
            W1Method::QuotientLP => "quotient",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct W1Config {
    pub lipschitz_l: f64,
    pub method: W1Method,
    /// Extra slack on the simplex optimality test; 0 solves to machine precision.
    pub lp_tolerance: f64,
}

impl Default for W1Config {
    fn default() -> Self {
        W1Config {
            lipschitz_l: 1.0,
            method: W1Method::Auto,
            lp_tolerance: 0.0,
        }
    }
}

impl W1Config {
    pub fn with_l(lipschitz_l: f64) -> Self {
        W1Config {
            lipschitz_l,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        check_l(self.lipschitz_l)?;
        if !(self.lp_tolerance >= 0.0 && self.lp_tolerance.is_finite()) {
            return Err(Error::arg("lp_tolerance must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Value plus the diagnostics reported by the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct W1Report {
    pub value: f64,
    pub method: W1Method,
    /// Atom counts of the measures handed to the final solver.
    pub atoms_p: usize,
    pub atoms_q: usize,
    pub pivots: usize,
}

fn check_l(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::arg(format!(
            "Lipschitz constant must be positive, got {l}"
        )));
    }
    Ok(())
}

fn check_dims(p: &EmpiricalMeasure, q: &EmpiricalMeasure) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// `L ∫ |F_P − F_Q| dt` for measures on the real line, computed exactly by
/// sweeping the merged sorted atoms.
pub fn w1_1d(p: &EmpiricalMeasure, q: &EmpiricalMeasure, l: f64) -> Result<f64> {
    check_l(l)?;
    check_dims(p, q)?;
    if p.dim() != 1 {
        return Err(Error::arg("w1_1d needs one-dimensional measures"));
    }
    let (xs, ws) = (p.coords(), p.weights());
    let (ys, vs) = (q.coords(), q.weights());
    let (mut i, mut j) = (0, 0);
    let (mut fp, mut fq) = (0.0f64, 0.0f64);
    let mut acc = Neumaier::default();
    let mut t = xs[0].min(ys[0]);
    while i < xs.len() || j < ys.len() {
        let x = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        acc.add((fp - fq).abs() * (x - t));
        while i < xs.len() && xs[i] == x {
            fp += ws[i];
            i += 1;
        }
        while j < ys.len() && ys[j] == x {
            fq += vs[j];
            j += 1;
        }
        t = x;
    }
    Ok(l * acc.sum())
}

/// Exact optimal transport cost under `L‖x − y‖₂` by network simplex.
pub fn w1_exact(p: &EmpiricalMeasure, q: &EmpiricalMeasure, l: f64) -> Result<f64> {
    Ok(w1_exact_report(p, q, l, 0.0)?.value)
}

fn w1_exact_report(
    p: &EmpiricalMeasure,
    q: &EmpiricalMeasure,
    l: f64,
    tol: f64,
) -> Result<W1Report> {
    check_l(l)?;
    check_dims(p, q)?;
    guard(p.len(), q.len())?;
    let n = q.len();
    let mut cost = vec![0.0; p.len() * n];
    for (i, (x, _)) in p.atoms().enumerate() {
        for (j, (y, _)) in q.atoms().enumerate() {
            cost[i * n + j] = l * dist(x, y);
        }
    }
    let sol = transport::solve_with_tolerance(p.weights(), q.weights(), &cost, tol)?;
    Ok(W1Report {
        value: sol.cost,
        method: W1Method::TransportLP,
        atoms_p: p.len(),
        atoms_q: q.len(),
        pivots: sol.pivots,
    })
}

fn guard(m: usize, n: usize) -> Result<()> {
    if m.checked_mul(n).is_none_or(|mn| mn > MAX_COST_ENTRIES) {
        return Err(Error::Resource(format!(
            "{m}x{n} cost matrix exceeds the {MAX_COST_ENTRIES}-entry guard; use smaller samples"
        )));
    }
    Ok(())
}

/// OT cost under the quotient metric `L · min_σ ‖x − σy‖₂`, valid for
/// isometric actions, where it equals the W1 distance between the
/// symmetrized measures without expanding orbits.
pub fn w1_quotient(
    p: &EmpiricalMeasure,
    q: &EmpiricalMeasure,
    action: &GroupAction,
    l: f64,
) -> Result<f64> {
    Ok(w1_quotient_report(p, q, action, l, 0.0)?.value)
}

fn w1_quotient_report(
    p: &EmpiricalMeasure,
    q: &EmpiricalMeasure,
    action: &GroupAction,
    l: f64,
    tol: f64,
) -> Result<W1Report> {
    if !action.is_isometric() {
        return Err(Error::Unsupported(format!(
            "quotient-metric W1 needs an isometric action; {action} is not"
        )));
    }
    check_l(l)?;
    check_dims(p, q)?;
    guard(p.len(), q.len())?;
    for m in [p, q] {
        for (x, _) in m.atoms() {
            action.check_point(x)?;
        }
    }
    let d = q.dim();
    let order = action.order();
    // all orbit points of Q, element-major per atom
    let mut orbits = vec![0.0; q.len() * order * d];
    for (j, (y, _)) in q.atoms().enumerate() {
        for k in 0..order {
            let at = (j * order + k) * d;
            action.apply_into(k, y, &mut orbits[at..at + d]);
        }
    }
    let n = q.len();
    let mut cost = vec![0.0; p.len() * n];
    for (i, (x, _)) in p.atoms().enumerate() {
        for j in 0..n {
            let best = orbits[j * order * d..(j + 1) * order * d]
                .chunks_exact(d)
                .map(|z| dist(x, z))
                .fold(f64::INFINITY, f64::min);
            cost[i * n + j] = l * best;
        }
    }
    let sol = transport::solve_with_tolerance(p.weights(), q.weights(), &cost, tol)?;
    Ok(W1Report {
        value: sol.cost,
        method: W1Method::QuotientLP,
        atoms_p: p.len(),
        atoms_q: q.len(),
        pivots: sol.pivots,
    })
}

/// W1 restricted to Σ-invariant L-Lipschitz test functions, computed as the
/// W1 distance between the symmetrized measures.
pub fn w1_invariant(
    p: &EmpiricalMeasure,
    q: &EmpiricalMeasure,
    action: &GroupAction,
    cfg: &W1Config,
) -> Result<f64> {
    Ok(w1_invariant_report(p, q, action, cfg)?.value)
}

pub fn w1_invariant_report(
    p: &EmpiricalMeasure,
    q: &EmpiricalMeasure,
    action: &GroupAction,
    cfg: &W1Config,
) -> Result<W1Report> {
    cfg.validate()?;
    check_dims(p, q)?;
    let l = cfg.lipschitz_l;
    let order = action.order();
    let method = match cfg.method {
        W1Method::Auto if p.dim() == 1 => W1Method::Cdf1D,
        W1Method::Auto => {
            let expanded = (p.len() * order).saturating_mul(q.len() * order);
            if expanded > MAX_COST_ENTRIES && action.is_isometric() {
                W1Method::QuotientLP
            } else {
                W1Method::TransportLP
            }
        }
        m => m,
    };
    match method {
        W1Method::QuotientLP => w1_quotient_report(p, q, action, l, cfg.lp_tolerance),
        W1Method::Cdf1D => {
            let (sp, sq) = (p.symmetrize(action)?, q.symmetrize(action)?);
            Ok(W1Report {
                value: w1_1d(&sp, &sq, l)?,
                method,
                atoms_p: sp.len(),
                atoms_q: sq.len(),
                pivots: 0,
            })
        }
        _ => {
            guard(p.len() * order, q.len() * order)?;
            let (sp, sq) = (p.symmetrize(action)?, q.symmetrize(action)?);
            w1_exact_report(&sp, &sq, l, cfg.lp_tolerance)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn m(points: &[&[f64]]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_samples(&points.iter().map(|p| p.to_vec()).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn one_dimensional_examples() {
        assert_eq!(w1_1d(&m(&[&[0.0]]), &m(&[&[1.0]]), 1.0).unwrap(), 1.0);
        let p = m(&[&[0.1], &[0.7], &[0.4]]);
        assert_eq!(w1_1d(&p, &p, 1.0).unwrap(), 0.0);
        let two = m(&[&[0.0], &[1.0]]);
        let half = m(&[&[0.5]]);
        assert_abs_diff_eq!(w1_1d(&two, &half, 2.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w1_1d(&half, &two, 2.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_single_pair() {
        assert_eq!(
            w1_exact(&m(&[&[0.0, 0.0]]), &m(&[&[3.0, 4.0]]), 1.0).unwrap(),
            5.0
        );
    }

    #[test]
    fn exact_matches_cdf_in_1d() {
        let p = m(&[&[0.1], &[0.35], &[0.9], &[0.91]]);
        let q = m(&[&[0.0], &[0.5], &[0.52]]);
        assert_abs_diff_eq!(
            w1_exact(&p, &q, 1.5).unwrap(),
            w1_1d(&p, &q, 1.5).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dimension_mismatch_is_argument_error() {
        let p = m(&[&[0.0]]);
        let q = m(&[&[0.0, 1.0]]);
        assert!(matches!(w1_1d(&p, &q, 1.0), Err(Error::Argument(_))));
        assert!(matches!(w1_exact(&p, &q, 1.0), Err(Error::Argument(_))));
        assert!(matches!(w1_exact(&p, &p, 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn invariant_examples() {
        let rot4 = GroupAction::rotation(4).unwrap();
        let cfg = W1Config::default();
        let p = m(&[&[1.0, 0.0]]);
        let q = m(&[&[0.0, 1.0]]);
        assert_abs_diff_eq!(
            w1_invariant(&p, &q, &rot4, &cfg).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_eq!(w1_invariant(&p, &p, &rot4, &cfg).unwrap(), 0.0);

        let rot8 = GroupAction::rotation(8).unwrap();
        let q = m(&[&[(PI / 8.0).cos(), (PI / 8.0).sin()]]);
        let expected = 2.0 * (PI / 16.0).sin();
        let lp = w1_invariant(&p, &q, &rot8, &cfg).unwrap();
        assert_abs_diff_eq!(lp, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(
            w1_quotient(&p, &q, &rot8, 1.0).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn invariant_is_exact_on_symmetrized_inputs_by_construction() {
        let rot = GroupAction::rotation(3).unwrap();
        let p = m(&[&[0.3, 0.1], &[-0.2, 0.5]]);
        let q = m(&[&[0.1, -0.6], &[0.4, 0.4], &[0.0, 0.2]]);
        let cfg = W1Config {
            method: W1Method::TransportLP,
            ..Default::default()
        };
        let direct = w1_exact(
            &p.symmetrize(&rot).unwrap(),
            &q.symmetrize(&rot).unwrap(),
            1.0,
        )
        .unwrap();
        assert_eq!(w1_invariant(&p, &q, &rot, &cfg).unwrap(), direct);
    }

    #[test]
    fn trivial_action_matches_exact() {
        let p = m(&[&[0.3, 0.1], &[-0.2, 0.5]]);
        let q = m(&[&[0.1, -0.6], &[0.4, 0.4]]);
        let plain = w1_exact(&p, &q, 1.0).unwrap();
        let cfg = W1Config::default();
        assert_eq!(
            w1_invariant(&p, &q, &GroupAction::Trivial, &cfg).unwrap(),
            plain
        );
        assert_abs_diff_eq!(
            w1_quotient(&p, &q, &GroupAction::Trivial, 1.0).unwrap(),
            plain,
            epsilon = 1e-12
        );
    }

    #[test]
    fn quotient_rejects_non_isometric() {
        let t = GroupAction::translation(4).unwrap();
        let p = m(&[&[0.3]]);
        assert!(matches!(
            w1_quotient(&p, &p, &t, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn linear_in_l() {
        let p = m(&[&[0.3, 0.1], &[-0.2, 0.5], &[0.9, 0.0]]);
        let q = m(&[&[0.1, -0.6], &[0.4, 0.4]]);
        let base = w1_exact(&p, &q, 1.0).unwrap();
        assert_abs_diff_eq!(w1_exact(&p, &q, 2.5).unwrap(), 2.5 * base, epsilon = 1e-14);
    }

    #[test]
    fn method_parsing() {
        assert_eq!(
            "quotient".parse::<W1Method>().unwrap(),
            W1Method::QuotientLP
        );
        assert!("sinkhorn".parse::<W1Method>().is_err());
    }
}
