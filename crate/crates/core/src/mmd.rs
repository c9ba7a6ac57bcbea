//! Gaussian-kernel MMD (plug-in V-statistic), its group-invariant version,
//! and the kernel orbit-decay constants.
//!
//! Kernel terms below `e^{-46}` (about 1e-20) are skipped. Sums run in a
//! fixed order with compensation, so results do not depend on threading.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::GroupAction;
use crate::measures::EmpiricalMeasure;
use crate::sum::Neumaier;

/// Exponent beyond which a Gaussian kernel term is treated as zero.
const CUTOFF_EXPONENT: f64 = 46.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    /// `k(x, y) = exp(−‖x − y‖² / (2s²))`.
    Gaussian { s: f64 },
}

impl KernelSpec {
    pub fn gaussian(s: f64) -> Result<Self> {
        let k = KernelSpec::Gaussian { s };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let KernelSpec::Gaussian { s } = *self;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::arg(format!(
                "kernel bandwidth must be positive, got {s}"
            )));
        }
        Ok(())
    }

    pub fn bandwidth(&self) -> f64 {
        let KernelSpec::Gaussian { s } = *self;
        s
    }

    /// Maximum value `K = k(x, x)`.
    pub fn k_max(&self) -> f64 {
        1.0
    }

    #[inline]
    fn eval_sq(&self, sq_dist: f64) -> f64 {
        let s = self.bandwidth();
        (-sq_dist / (2.0 * s * s)).exp()
    }

    /// Distance beyond which kernel terms are dropped.
    fn reach(&self) -> f64 {
        self.bandwidth() * (2.0 * CUTOFF_EXPONENT).sqrt()
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let KernelSpec::Gaussian { s } = self;
        write!(f, "gaussian:s={s}")
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses `gaussian:s=0.0654`.
    fn from_str(text: &str) -> Result<Self> {
        let bad = || {
            Error::arg(format!(
                "invalid kernel '{text}', expected gaussian:s=<bandwidth>"
            ))
        };
        let (name, params) = text.trim().split_once(':').ok_or_else(bad)?;
        if name != "gaussian" {
            return Err(bad());
        }
        let (key, value) = params.split_once('=').ok_or_else(bad)?;
        if key.trim() != "s" {
            return Err(bad());
        }
        KernelSpec::gaussian(value.trim().parse().map_err(|_| bad())?)
    }
}

impl Serialize for KernelSpec {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn kernel_eval(kernel: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.validate()?;
    if x.len() != y.len() {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(kernel.eval_sq(sq_dist(x, y)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MmdPath {
    /// Plug-in MMD between the orbit-expanded measures.
    #[serde(rename = "orbit")]
    OrbitExpansion,
    /// Plug-in MMD between the original measures under the orbit-averaged
    /// kernel `k_Σ(x, y) = |Σ|⁻¹ Σ_σ k(σx, y)`.
    #[serde(rename = "symk")]
    SymmetrizedKernel,
}

impl MmdPath {
    /// Orbit expansion for small groups, symmetrized kernel from 16 up.
    pub fn default_for(order: usize) -> Self {
        if order >= 16 {
            MmdPath::SymmetrizedKernel
        } else {
            MmdPath::OrbitExpansion
        }
    }
}

impl FromStr for MmdPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orbit" => Ok(MmdPath::OrbitExpansion),
            "symk" => Ok(MmdPath::SymmetrizedKernel),
            _ => Err(Error::arg(format!("unknown MMD path '{s}' (orbit|symk)"))),
        }
    }
}

impl fmt::Display for MmdPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MmdPath::OrbitExpansion => "orbit",
            MmdPath::SymmetrizedKernel => "symk",
        })
    }
}

fn check_pair(p: &EmpiricalMeasure, q: &EmpiricalMeasure, kernel: &KernelSpec) -> Result<()> {
    kernel.validate()?;
    if p.dim() != q.dim() {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// Plug-in (V-statistic) MMD: `√max(0, Σwwk(x,x′) + Σvvk(y,y′) − 2Σwvk(x,y))`.
pub fn mmd_plugin(p: &EmpiricalMeasure, q: &EmpiricalMeasure, kernel: &KernelSpec) -> Result<f64> {
    check_pair(p, q, kernel)?;
    let pp = gram_self(p, kernel);
    let qq = gram_self(q, kernel);
    let pq = gram_cross(p, q, kernel);
    Ok(finish(pp, qq, pq))
}

fn finish(pp: f64, qq: f64, pq: f64) -> f64 {
    let mut acc = Neumaier::default();
    acc.add(pp);
    acc.add(qq);
    acc.add(-2.0 * pq);
    acc.sum().max(0.0).sqrt()
}

/// `Σ_i Σ_j w_i v_j k(x_i, y_j)`, skipping pairs whose first coordinates
/// differ by more than the kernel reach (atoms are sorted on it).
fn gram_cross(p: &EmpiricalMeasure, q: &EmpiricalMeasure, kernel: &KernelSpec) -> f64 {
    let (d, reach) = (p.dim(), kernel.reach());
    let (ys, vs) = (q.coords(), q.weights());
    let mut total = Neumaier::default();
    let mut lo = 0;
    for (x, w) in p.atoms() {
        while lo < q.len() && ys[lo * d] < x[0] - reach {
            lo += 1;
        }
        let mut row = Neumaier::default();
        for j in lo..q.len() {
            let y = &ys[j * d..(j + 1) * d];
            if y[0] > x[0] + reach {
                break;
            }
            row.add(vs[j] * kernel.eval_sq(sq_dist(x, y)));
        }
        total.add(w * row.sum());
    }
    total.sum()
}

fn gram_self(p: &EmpiricalMeasure, kernel: &KernelSpec) -> f64 {
    let (d, reach) = (p.dim(), kernel.reach());
    let (xs, ws) = (p.coords(), p.weights());
    let mut total = Neumaier::default();
    for i in 0..p.len() {
        let x = &xs[i * d..(i + 1) * d];
        let mut row = Neumaier::default();
        for j in i + 1..p.len() {
            let y = &xs[j * d..(j + 1) * d];
            if y[0] > x[0] + reach {
                break;
            }
            row.add(ws[j] * kernel.eval_sq(sq_dist(x, y)));
        }
        total.add(ws[i] * (ws[i] * kernel.k_max() + 2.0 * row.sum()));
    }
    total.sum()
}

/// MMD over the Σ-invariant part of the RKHS unit ball, i.e. the plug-in MMD
/// between the symmetrized measures. Both paths compute the same value.
pub fn mmd_invariant(
    p: &EmpiricalMeasure,
    q: &EmpiricalMeasure,
    action: &GroupAction,
    kernel: &KernelSpec,
    path: MmdPath,
) -> Result<f64> {
    check_pair(p, q, kernel)?;
    if !action.is_isometric() {
        return Err(Error::Unsupported(format!(
            "the Gaussian kernel is not invariant under {action}; MMD needs an isometric action"
        )));
    }
    match (path, action) {
        (MmdPath::OrbitExpansion, _) => {
            mmd_plugin(&p.symmetrize(action)?, &q.symmetrize(action)?, kernel)
        }
        (MmdPath::SymmetrizedKernel, GroupAction::CyclicRotation2D(n)) if *n > 1 => {
            for m in [p, q] {
                for (x, _) in m.atoms() {
                    action.check_point(x)?;
                }
            }
            let (pp, qq) = (Polar::new(p), Polar::new(q));
            let g = RotationKernel {
                n: *n,
                s: kernel.bandwidth(),
            };
            Ok(finish(
                g.self_sum(&pp),
                g.self_sum(&qq),
                g.cross_sum(&pp, &qq),
            ))
        }
        (MmdPath::SymmetrizedKernel, _) => {
            // a one-element group: the symmetrized kernel is the kernel itself
            for m in [p, q] {
                for (x, _) in m.atoms() {
                    action.check_point(x)?;
                }
            }
            mmd_plugin(p, q, kernel)
        }
    }
}

/// Atoms in polar coordinates, sorted by radius.
struct Polar {
    rho: Vec<f64>,
    theta: Vec<f64>,
    w: Vec<f64>,
}

impl Polar {
    fn new(m: &EmpiricalMeasure) -> Self {
        let mut atoms: Vec<(f64, f64, f64)> = m
            .atoms()
            .map(|(x, w)| (x[0].hypot(x[1]), x[1].atan2(x[0]), w))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Polar {
            rho: atoms.iter().map(|a| a.0).collect(),
            theta: atoms.iter().map(|a| a.1).collect(),
            w: atoms.iter().map(|a| a.2).collect(),
        }
    }
}

/// Orbit-averaged Gaussian kernel for the rotation group of order `n`.
///
/// `‖R_k x − y‖² = (ρx − ρy)² + 4ρxρy sin²(Δ_k / 2)` with
/// `Δ_k = θx − θy + 2πk/n`. Terms are summed outward from the nearest orbit
/// angle and each side stops once a term drops below the cutoff; the terms
/// decrease monotonically in that order.
struct RotationKernel {
    n: usize,
    s: f64,
}

impl RotationKernel {
    fn eval(&self, rx: f64, tx: f64, ry: f64, ty: f64) -> f64 {
        let inv = 1.0 / (2.0 * self.s * self.s);
        let dr = rx - ry;
        let radial = dr * dr * inv;
        if radial > CUTOFF_EXPONENT {
            return 0.0;
        }
        let a = 4.0 * rx * ry * inv;
        let step = TAU / self.n as f64;
        let delta = tx - ty;
        let base = delta - (delta / step).round() * step;
        let (h0_sin, h0_cos) = (0.5 * base).sin_cos();
        let first = radial + a * h0_sin * h0_sin;
        if first > CUTOFF_EXPONENT {
            return 0.0;
        }
        // positive terms, at most n of them: plain summation is accurate enough
        let mut acc = (-first).exp();
        // half-angles advance by ±step/2; rotate (cos, sin) instead of calling sin
        let (ds, dc) = (0.5 * step).sin_cos();
        for (sign, count) in [(1.0, self.n / 2), (-1.0, (self.n - 1) / 2)] {
            let (mut s, mut c) = (h0_sin, h0_cos);
            for _ in 0..count {
                (s, c) = (s * dc + sign * c * ds, c * dc - sign * s * ds);
                let e = radial + a * s * s;
                if e > CUTOFF_EXPONENT {
                    break;
                }
                acc += (-e).exp();
            }
        }
        acc / self.n as f64
    }

    fn reach(&self) -> f64 {
        self.s * (2.0 * CUTOFF_EXPONENT).sqrt()
    }

    fn cross_sum(&self, a: &Polar, b: &Polar) -> f64 {
        let reach = self.reach();
        let mut total = Neumaier::default();
        let mut lo = 0;
        for i in 0..a.rho.len() {
            while lo < b.rho.len() && b.rho[lo] < a.rho[i] - reach {
                lo += 1;
            }
            let mut row = Neumaier::default();
            for j in lo..b.rho.len() {
                if b.rho[j] > a.rho[i] + reach {
                    break;
                }
                row.add(b.w[j] * self.eval(a.rho[i], a.theta[i], b.rho[j], b.theta[j]));
            }
            total.add(a.w[i] * row.sum());
        }
        total.sum()
    }

    fn self_sum(&self, a: &Polar) -> f64 {
        let reach = self.reach();
        let mut total = Neumaier::default();
        for i in 0..a.rho.len() {
            let mut row = Neumaier::default();
            for j in i + 1..a.rho.len() {
                if a.rho[j] > a.rho[i] + reach {
                    break;
                }
                row.add(a.w[j] * self.eval(a.rho[i], a.theta[i], a.rho[j], a.theta[j]));
            }
            let diag = self.eval(a.rho[i], a.theta[i], a.rho[i], a.theta[i]);
            total.add(a.w[i] * (a.w[i] * diag + 2.0 * row.sum()));
        }
        total.sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CSigmaReport {
    /// `max k(σx, x) / K` over non-identity σ and grid points.
    pub c: f64,
    /// Grid point and group element attaining the maximum.
    pub argmax: Option<Vec<f64>>,
    pub element: Option<usize>,
    /// The group has no non-identity element; `c` is 0 by convention.
    pub trivial_group: bool,
    /// Some grid point is fixed by a non-identity element (`c = 1`), so the
    /// orbit-decay assumption fails there.
    pub fixed_point: bool,
}

/// Sampled lower bound on the kernel orbit-decay constant.
pub fn estimate_c_sigma_k(
    action: &GroupAction,
    kernel: &KernelSpec,
    grid: &[Vec<f64>],
) -> Result<CSigmaReport> {
    kernel.validate()?;
    if grid.is_empty() {
        return Err(Error::arg("c_{Σ,k} grid is empty"));
    }
    for x in grid {
        action.check_point(x)?;
        if !action.in_fundamental_domain(x, 1e-9) {
            return Err(Error::domain(format!(
                "grid point {x:?} is outside the fundamental domain"
            )));
        }
    }
    let mut report = CSigmaReport {
        c: 0.0,
        argmax: None,
        element: None,
        trivial_group: action.order() == 1,
        fixed_point: false,
    };
    let mut image = vec![0.0; grid[0].len()];
    for x in grid {
        image.resize(x.len(), 0.0);
        for k in 1..action.order() {
            action.apply_into(k, x, &mut image);
            let ratio = kernel.eval_sq(sq_dist(&image, x)) / kernel.k_max();
            if report.argmax.is_none() || ratio > report.c {
                report.c = ratio;
                report.argmax = Some(x.clone());
                report.element = Some(k);
            }
        }
    }
    report.fixed_point = report.c >= 1.0;
    Ok(report)
}

/// Sample-complexity factor `√((1 + c(|Σ| − 1)) / |Σ|)`.
pub fn c_big(order: usize, c: f64) -> Result<f64> {
    if order == 0 {
        return Err(Error::arg("group order must be at least 1"));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::arg(format!("c must lie in [0, 1], got {c}")));
    }
    Ok(((1.0 + c * (order - 1) as f64) / order as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::sample_disk;
    use approx::assert_abs_diff_eq;

    fn m(points: &[&[f64]]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_samples(&points.iter().map(|p| p.to_vec()).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn kernel_examples() {
        let k = KernelSpec::gaussian(0.5).unwrap();
        assert_eq!(kernel_eval(&k, &[0.3, 0.2], &[0.3, 0.2]).unwrap(), 1.0);
        let d = 0.5 * 2f64.sqrt();
        assert_abs_diff_eq!(
            kernel_eval(&k, &[0.0, 0.0], &[d, 0.0]).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert!(kernel_eval(&k, &[0.0], &[0.0, 1.0]).is_err());
        let rot = GroupAction::rotation(7).unwrap();
        let (x, y) = ([0.4, -0.1], [0.2, 0.5]);
        let (rx, ry) = (rot.apply(3, &x).unwrap(), rot.apply(3, &y).unwrap());
        assert_abs_diff_eq!(
            kernel_eval(&k, &x, &y).unwrap(),
            kernel_eval(&k, &rx, &ry).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn parse_kernel() {
        assert_eq!(
            "gaussian:s=0.0654".parse::<KernelSpec>().unwrap(),
            KernelSpec::Gaussian { s: 0.0654 }
        );
        assert!("gaussian:s=0".parse::<KernelSpec>().is_err());
        assert!("laplace:s=1".parse::<KernelSpec>().is_err());
        assert_eq!(
            KernelSpec::Gaussian { s: 0.25 }.to_string(),
            "gaussian:s=0.25"
        );
    }

    #[test]
    fn two_atom_closed_form() {
        let k = KernelSpec::gaussian(0.7).unwrap();
        let (x, y) = ([0.1, 0.2], [0.5, -0.3]);
        let expected = (2.0 - 2.0 * kernel_eval(&k, &x, &y).unwrap()).sqrt();
        assert_abs_diff_eq!(
            mmd_plugin(&m(&[&x]), &m(&[&y]), &k).unwrap(),
            expected,
            epsilon = 1e-14
        );
    }

    #[test]
    fn identical_measures_give_zero() {
        let k = KernelSpec::gaussian(0.3).unwrap();
        let p = EmpiricalMeasure::from_samples(&sample_disk(4, 200, 1).unwrap()).unwrap();
        assert!(mmd_plugin(&p, &p, &k).unwrap() <= 1e-8);
    }

    #[test]
    fn equal_orbits_give_zero() {
        let k = KernelSpec::gaussian(0.5).unwrap();
        let rot = GroupAction::rotation(4).unwrap();
        let (p, q) = (m(&[&[1.0, 0.0]]), m(&[&[0.0, 1.0]]));
        for path in [MmdPath::OrbitExpansion, MmdPath::SymmetrizedKernel] {
            assert!(mmd_invariant(&p, &q, &rot, &k, path).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn trivial_action_is_plugin() {
        let k = KernelSpec::gaussian(0.4).unwrap();
        let p = m(&[&[0.1, 0.2], &[0.3, -0.4]]);
        let q = m(&[&[0.0, 0.5]]);
        let plain = mmd_plugin(&p, &q, &k).unwrap();
        for path in [MmdPath::OrbitExpansion, MmdPath::SymmetrizedKernel] {
            assert_eq!(
                mmd_invariant(&p, &q, &GroupAction::Trivial, &k, path).unwrap(),
                plain
            );
        }
    }

    #[test]
    fn rotation_kernel_matches_direct_orbit_average() {
        for (n, s) in [(2, 0.5), (5, 0.3), (16, 0.07), (64, 0.02), (64, 1.5)] {
            let g = RotationKernel { n, s };
            let k = KernelSpec::gaussian(s).unwrap();
            let rot = GroupAction::rotation(n).unwrap();
            for (x, y) in [
                ([0.3, 0.4], [-0.2, 0.45]),
                ([0.9, 0.0], [0.0, 0.9]),
                ([0.0, 0.0], [0.1, 0.0]),
            ] {
                let direct = (0..n)
                    .map(|i| kernel_eval(&k, &rot.apply(i, &x).unwrap(), &y).unwrap())
                    .sum::<f64>()
                    / n as f64;
                let fast = g.eval(
                    x[0].hypot(x[1]),
                    x[1].atan2(x[0]),
                    y[0].hypot(y[1]),
                    y[1].atan2(y[0]),
                );
                assert_abs_diff_eq!(fast, direct, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn paths_agree_on_disk_samples() {
        for (l, n, s) in [(4, 60, 0.3), (16, 80, 0.0654), (32, 50, 0.02)] {
            let rot = GroupAction::rotation(l).unwrap();
            let k = KernelSpec::gaussian(s).unwrap();
            let p = EmpiricalMeasure::from_samples(&sample_disk(l, n, 1).unwrap()).unwrap();
            let q = EmpiricalMeasure::from_samples(&sample_disk(l, n + 7, 2).unwrap()).unwrap();
            let a = mmd_invariant(&p, &q, &rot, &k, MmdPath::OrbitExpansion).unwrap();
            let b = mmd_invariant(&p, &q, &rot, &k, MmdPath::SymmetrizedKernel).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn non_isometric_action_rejected() {
        let k = KernelSpec::gaussian(0.1).unwrap();
        let p = m(&[&[0.2]]);
        let t = GroupAction::translation(4).unwrap();
        assert!(matches!(
            mmd_invariant(&p, &p, &t, &k, MmdPath::OrbitExpansion),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn c_sigma_examples() {
        let k = KernelSpec::gaussian(0.3).unwrap();
        let r = estimate_c_sigma_k(&GroupAction::Trivial, &k, &[vec![0.5, 0.0]]).unwrap();
        assert!(r.trivial_group && r.c == 0.0);

        let rot4 = GroupAction::rotation(4).unwrap();
        let rho: f64 = 0.4;
        let r = estimate_c_sigma_k(&rot4, &k, &[vec![rho, 0.0]]).unwrap();
        assert_abs_diff_eq!(r.c, (-rho * rho / (0.3 * 0.3)).exp(), epsilon = 1e-15);
        assert_eq!(r.element, Some(1));

        let r = estimate_c_sigma_k(&rot4, &k, &[vec![0.0, 0.0], vec![0.5, 0.1]]).unwrap();
        assert_eq!(r.c, 1.0);
        assert!(r.fixed_point);
        assert_eq!(r.argmax, Some(vec![0.0, 0.0]));

        assert!(estimate_c_sigma_k(&rot4, &k, &[]).is_err());
        assert!(estimate_c_sigma_k(&rot4, &k, &[vec![-0.5, 0.1]]).is_err());
    }

    #[test]
    fn c_sigma_shrinks_with_bandwidth() {
        let rot = GroupAction::rotation(8).unwrap();
        let grid = rot.fundamental_grid(64, false);
        let cs: Vec<f64> = [TAU / 6.0, TAU / 24.0, TAU / 96.0]
            .iter()
            .map(|&s| {
                estimate_c_sigma_k(&rot, &KernelSpec::gaussian(s).unwrap(), &grid)
                    .unwrap()
                    .c
            })
            .collect();
        assert!(cs[0] >= cs[1] && cs[1] >= cs[2], "{cs:?}");
    }

    #[test]
    fn c_big_values() {
        assert_eq!(c_big(1, 0.37).unwrap(), 1.0);
        assert_eq!(c_big(4, 0.0).unwrap(), 0.5);
        let v = c_big(1_000_000, 0.25).unwrap();
        assert_abs_diff_eq!(
            v,
            ((1.0 + 0.25 * 999_999.0) / 1e6f64).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(v, 0.500_000_75, epsilon = 1e-9);
        assert!(c_big(0, 0.1).is_err());
        assert!(c_big(3, 1.5).is_err());
    }
}
