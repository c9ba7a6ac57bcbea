//! Lipschitz-regularized α-divergence (α > 1) between empirical measures.
//!
//! The estimator maximizes `Σ wᵢγᵢ − Σ vᵢ f*_α(γᵢ)` over values γ on the
//! union support of the symmetrized measures, subject to
//! `|γ_u − γ_v| ≤ L‖u − v‖` and the box `|γ| ≤ M0`. Any feasible value vector
//! extends to an L-Lipschitz function on the whole space, so this is the
//! exact finite-dimensional program.
//!
//! The solver is a primal-dual interior-point method. Its iterates are
//! strictly feasible, and termination is certified by a Lagrangian dual
//! bound: the reported value is within `tolerance` of the optimum.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::{dist, GroupAction};
use crate::measures::{support_diameter, EmpiricalMeasure, COALESCE_TOL};
use crate::sum::{compensated_sum, Neumaier};

/// Largest union support the solver accepts.
pub const MAX_SUPPORT: usize = 4096;

/// `f_α(x) = (x^α − 1) / (α(α − 1))` for `x ≥ 0`.
pub fn f_alpha(alpha: f64, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::domain(format!("f_alpha needs x >= 0, got {x}")));
    }
    Ok((x.powf(alpha) - 1.0) / (alpha * (alpha - 1.0)))
}

/// Convex conjugate of `f_α` on `[0, ∞)`:
/// `((α−1)y)^{α/(α−1)}/α + 1/(α(α−1))` for `y > 0`, the constant
/// `1/(α(α−1))` for `y ≤ 0`.
pub fn f_alpha_star(alpha: f64, y: f64) -> f64 {
    let base = 1.0 / (alpha * (alpha - 1.0));
    if y > 0.0 {
        ((alpha - 1.0) * y).powf(alpha / (alpha - 1.0)) / alpha + base
    } else {
        base
    }
}

/// `f*′_α(y) = ((α−1)y)^{1/(α−1)}` for `y > 0`, else 0.
pub fn f_alpha_star_derivative(alpha: f64, y: f64) -> f64 {
    if y > 0.0 {
        ((alpha - 1.0) * y).powf(1.0 / (alpha - 1.0))
    } else {
        0.0
    }
}

/// Curvature cap used where `f*″` blows up at 0+ (α > 2).
const MAX_CURVATURE: f64 = 1e12;

fn f_alpha_star_second(alpha: f64, y: f64) -> f64 {
    if y > 0.0 {
        ((alpha - 1.0) * y)
            .powf((2.0 - alpha) / (alpha - 1.0))
            .min(MAX_CURVATURE)
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundConstants {
    /// Bound on optimal test-function values, `1/(α−1) + L·diam`.
    pub m0: f64,
    /// Lipschitz constant of `f*_α` on `[−M0, M0]`.
    pub l_prime: f64,
    /// `f*_α(M0)`.
    pub m1: f64,
}

pub fn bound_constants(alpha: f64, l: f64, diameter: f64) -> Result<BoundConstants> {
    check_alpha(alpha)?;
    check_l(l)?;
    if !(diameter >= 0.0 && diameter.is_finite()) {
        return Err(Error::arg(format!(
            "diameter must be finite and nonnegative, got {diameter}"
        )));
    }
    let m0 = 1.0 / (alpha - 1.0) + l * diameter;
    let e = 1.0 / (alpha - 1.0);
    Ok(BoundConstants {
        m0,
        l_prime: l * (alpha - 1.0).powf(e) * m0.powf(e),
        m1: f_alpha_star(alpha, m0),
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::arg(format!(
            "alpha must be finite and > 1, got {alpha}"
        )));
    }
    Ok(())
}

fn check_l(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::arg(format!(
            "Lipschitz constant must be positive, got {l}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Interior-point iteration cap.
    pub max_iters: usize,
    /// Certified bound on the distance between the returned and optimal values.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 500,
            tolerance: 1e-7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaConfig {
    pub alpha: f64,
    pub lipschitz_l: f64,
    pub solver: SolverConfig,
}

impl AlphaConfig {
    pub fn new(alpha: f64, lipschitz_l: f64) -> Self {
        AlphaConfig {
            alpha,
            lipschitz_l,
            solver: SolverConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_l(self.lipschitz_l)?;
        if !(self.solver.tolerance > 0.0 && self.solver.tolerance.is_finite()) {
            return Err(Error::arg("solver tolerance must be positive"));
        }
        if self.solver.max_iters == 0 {
            return Err(Error::arg("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Optimal discrete test function on the union support.
#[derive(Clone, Debug, Serialize)]
pub struct PotentialSolution {
    pub dim: usize,
    /// Support points, flattened row-major.
    pub support: Vec<f64>,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Largest pairwise Lipschitz violation `max(|γ_u − γ_v| − L‖u − v‖, 0)`.
    pub feasibility_residual: f64,
    pub iterations: usize,
    /// Certified upper bound on `optimum − objective`.
    pub gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Edges {
    /// Consecutive pairs of sorted one-dimensional atoms; they imply all others.
    Chain,
    /// All pairs `i < j`.
    Complete,
}

/// The finite-dimensional concave program for one pair of measures.
#[derive(Clone, Debug)]
pub struct AlphaProblem {
    dim: usize,
    support: Vec<f64>,
    w: Vec<f64>,
    v: Vec<f64>,
    alpha: f64,
    l: f64,
    m0: f64,
    edges: Edges,
    /// Edge bounds `L‖u − v‖` in edge order.
    caps: Vec<f64>,
    /// Set on an orbit-representative problem: distances become
    /// `min_σ ‖u − σv‖`.
    quotient: Option<GroupAction>,
    /// The equivalent problem on orbit representatives, solved in place of
    /// this one when present.
    reduced: Option<Box<AlphaProblem>>,
}

impl AlphaProblem {
    /// Build the program on the union support of the symmetrized measures.
    pub fn new(
        p: &EmpiricalMeasure,
        q: &EmpiricalMeasure,
        action: &GroupAction,
        cfg: &AlphaConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if p.dim() != q.dim() {
            return Err(Error::arg(format!(
                "dimension mismatch: {} vs {}",
                p.dim(),
                q.dim()
            )));
        }
        let (sp, sq) = (p.symmetrize(action)?, q.symmetrize(action)?);
        let (support, w, v) = union_support(&sp, &sq);
        let n = w.len();
        if n > MAX_SUPPORT {
            return Err(support_error(n));
        }
        let dim = p.dim();
        let diameter = support_diameter(&[&sp, &sq]);
        let consts = bound_constants(cfg.alpha, cfg.lipschitz_l, diameter)?;
        let edges = if dim == 1 {
            Edges::Chain
        } else {
            Edges::Complete
        };
        // For an isometric group the concave program is invariant, so group
        // averaging shows an invariant optimizer exists. Invariant γ are
        // functions of the orbit, and they are feasible iff the constraints
        // hold under the quotient distance between representatives.
        let reduced = if edges == Edges::Complete && action.order() > 1 && action.is_isometric() {
            let (rs, rw, rv) = union_support(&p.project(action)?, &q.project(action)?);
            let sub = Self::assemble(dim, rs, rw, rv, cfg, consts.m0, edges, Some(*action), None);
            Some(Box::new(sub))
        } else {
            None
        };
        Ok(Self::assemble(
            dim, support, w, v, cfg, consts.m0, edges, None, reduced,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        dim: usize,
        support: Vec<f64>,
        w: Vec<f64>,
        v: Vec<f64>,
        cfg: &AlphaConfig,
        m0: f64,
        edges: Edges,
        quotient: Option<GroupAction>,
        reduced: Option<Box<AlphaProblem>>,
    ) -> Self {
        let mut problem = AlphaProblem {
            dim,
            support,
            w,
            v,
            alpha: cfg.alpha,
            l: cfg.lipschitz_l,
            m0,
            edges,
            caps: Vec::new(),
            quotient,
            reduced,
        };
        let mut caps = Vec::with_capacity(problem.edge_count());
        let mut scratch = vec![0.0; dim];
        problem.for_each_edge(|_, a, b| caps.push(problem.l * problem.metric(a, b, &mut scratch)));
        problem.caps = caps;
        problem
    }

    fn metric(&self, a: usize, b: usize, scratch: &mut [f64]) -> f64 {
        let (x, y) = (self.point(a), self.point(b));
        match &self.quotient {
            None => dist(x, y),
            Some(action) => (0..action.order())
                .map(|k| {
                    action.apply_into(k, y, scratch);
                    dist(x, scratch)
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.support[i * self.dim..(i + 1) * self.dim]
    }

    /// Mass of P and of Q at each support point.
    pub fn weights(&self) -> (&[f64], &[f64]) {
        (&self.w, &self.v)
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// `Σ wᵢγᵢ − Σ vᵢ f*_α(γᵢ)`.
    pub fn objective(&self, values: &[f64]) -> f64 {
        compensated_sum(
            values
                .iter()
                .zip(self.w.iter().zip(&self.v))
                .map(|(&g, (&w, &v))| w * g - v * f_alpha_star(self.alpha, g)),
        )
    }

    pub fn gradient(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.w.iter().zip(&self.v))
            .map(|(&g, (&w, &v))| w - v * f_alpha_star_derivative(self.alpha, g))
            .collect()
    }

    /// Largest violation of any pairwise Lipschitz constraint, over all pairs.
    pub fn feasibility_residual(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        let mut scratch = vec![0.0; self.dim];
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let cap = self.l * self.metric(i, j, &mut scratch);
                worst = worst.max((values[i] - values[j]).abs() - cap);
            }
        }
        worst
    }

    fn edge_count(&self) -> usize {
        let n = self.len();
        match self.edges {
            Edges::Chain => n.saturating_sub(1),
            Edges::Complete => n * n.saturating_sub(1) / 2,
        }
    }

    fn for_each_edge(&self, mut f: impl FnMut(usize, usize, usize)) {
        let n = self.len();
        match self.edges {
            Edges::Chain => (1..n).for_each(|j| f(j - 1, j - 1, j)),
            Edges::Complete => {
                let mut e = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        f(e, i, j);
                        e += 1;
                    }
                }
            }
        }
    }

    /// Upper bound on the optimum from net edge multipliers `λ` (positive
    /// when the `γ_u − γ_v ≤ cap` side is active), with the box kept as the
    /// domain so the Lagrangian separates by coordinate.
    fn dual_bound(&self, lambda: &[f64]) -> f64 {
        let mut c = self.w.clone();
        let mut acc = Neumaier::default();
        self.for_each_edge(|e, a, b| {
            c[a] -= lambda[e];
            c[b] += lambda[e];
            acc.add(lambda[e].abs() * self.caps[e]);
        });
        for (i, &ci) in c.iter().enumerate() {
            acc.add(self.coordinate_max(ci, self.v[i]));
        }
        acc.sum()
    }

    /// `max_{|γ| ≤ M0} cγ − v f*_α(γ)` in closed form.
    fn coordinate_max(&self, c: f64, v: f64) -> f64 {
        let m0 = self.m0;
        if v <= 0.0 {
            return c.abs() * m0;
        }
        let g = if c <= 0.0 {
            -m0
        } else {
            ((c / v).powf(self.alpha - 1.0) / (self.alpha - 1.0)).min(m0)
        };
        c * g - v * f_alpha_star(self.alpha, g)
    }

    /// Solve by a primal-dual interior-point method.
    pub fn solve(&self, cfg: &SolverConfig) -> Result<PotentialSolution> {
        if let Some(sub) = &self.reduced {
            return match sub.solve(cfg) {
                Ok(s) => Ok(self.expand(sub, &s)),
                Err(Error::NotConverged {
                    iterations,
                    gap,
                    best,
                }) => Err(Error::NotConverged {
                    iterations,
                    gap,
                    best: Box::new(self.expand(sub, &best)),
                }),
                Err(e) => Err(e),
            };
        }
        let n = self.len();
        let start = vec![1.0 / (self.alpha - 1.0); n];
        if n == 1 {
            // a single atom carrying all of both masses: γ = f′(1) is optimal
            return Ok(self.finish(start, 0, 0.0));
        }
        Ipm::new(self, start).run(cfg)
    }

    /// Lift a solution on orbit representatives to the full support; each
    /// point takes the value of the nearest representative of its projection.
    fn expand(&self, sub: &AlphaProblem, s: &PotentialSolution) -> PotentialSolution {
        let action = sub.quotient.expect("reduced problem carries its action");
        let mut rep = vec![0.0; self.dim];
        let values = (0..self.len())
            .map(|i| {
                action.project_into(self.point(i), &mut rep);
                let nearest = (0..sub.len())
                    .min_by(|&a, &b| dist(&rep, sub.point(a)).total_cmp(&dist(&rep, sub.point(b))))
                    .expect("non-empty support");
                s.values[nearest]
            })
            .collect();
        self.finish(values, s.iterations, s.gap)
    }

    fn finish(&self, values: Vec<f64>, iterations: usize, gap: f64) -> PotentialSolution {
        PotentialSolution {
            dim: self.dim,
            support: self.support.clone(),
            objective: self.objective(&values),
            feasibility_residual: self.feasibility_residual(&values),
            values,
            iterations,
            gap,
        }
    }
}

fn support_error(n: usize) -> Error {
    Error::Resource(format!(
        "union support of {n} atoms exceeds the {MAX_SUPPORT}-atom limit of the alpha-divergence solver"
    ))
}

/// Merge two canonical measures into one sorted support with per-point
/// masses `(w, v)`; points within the coalescing tolerance are identified.
fn union_support(p: &EmpiricalMeasure, q: &EmpiricalMeasure) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = p.dim();
    let mut atoms: Vec<(&[f64], f64, f64)> = p
        .atoms()
        .map(|(x, w)| (x, w, 0.0))
        .chain(q.atoms().map(|(x, v)| (x, 0.0, v)))
        .collect();
    atoms.sort_by(|a, b| {
        a.0.iter()
            .zip(b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let (mut coords, mut w, mut v) = (Vec::new(), Vec::<f64>::new(), Vec::<f64>::new());
    let mut last: Option<&[f64]> = None;
    for (x, a, b) in atoms {
        let same = last.is_some_and(|y| dist(x, y) <= COALESCE_TOL);
        if same {
            *w.last_mut().unwrap() += a;
            *v.last_mut().unwrap() += b;
        } else {
            coords.extend_from_slice(x);
            w.push(a);
            v.push(b);
            last = Some(x);
        }
    }
    debug_assert_eq!(coords.len(), d * w.len());
    (coords, w, v)
}

/// Primal-dual interior-point state for
/// `min −objective(γ)` s.t. `±(γ_u − γ_v) ≤ cap_e`, `±γ_i ≤ M0`.
struct Ipm<'a> {
    prob: &'a AlphaProblem,
    gamma: Vec<f64>,
    /// Multipliers of `γ_u − γ_v ≤ cap` and `γ_v − γ_u ≤ cap`.
    lp: Vec<f64>,
    lm: Vec<f64>,
    /// Multipliers of `γ ≤ M0` and `−γ ≤ M0`.
    bp: Vec<f64>,
    bm: Vec<f64>,
}

struct Slacks {
    ep: Vec<f64>,
    em: Vec<f64>,
    bp: Vec<f64>,
    bm: Vec<f64>,
}

impl<'a> Ipm<'a> {
    fn new(prob: &'a AlphaProblem, gamma: Vec<f64>) -> Self {
        let e = prob.edge_count();
        let n = prob.len();
        let mut ipm = Ipm {
            prob,
            gamma,
            lp: vec![0.0; e],
            lm: vec![0.0; e],
            bp: vec![0.0; n],
            bm: vec![0.0; n],
        };
        // start on the central path for t = number of constraints
        let s = ipm
            .slacks(&ipm.gamma)
            .expect("start point is strictly feasible");
        let k = ipm.constraint_count() as f64;
        for (l, s) in ipm
            .lp
            .iter_mut()
            .zip(&s.ep)
            .chain(ipm.lm.iter_mut().zip(&s.em))
        {
            *l = 1.0 / (k * s);
        }
        for (l, s) in ipm
            .bp
            .iter_mut()
            .zip(&s.bp)
            .chain(ipm.bm.iter_mut().zip(&s.bm))
        {
            *l = 1.0 / (k * s);
        }
        ipm
    }

    fn constraint_count(&self) -> usize {
        2 * (self.lp.len() + self.bp.len())
    }

    /// Constraint slacks at `gamma`, or `None` unless all are positive.
    fn slacks(&self, gamma: &[f64]) -> Option<Slacks> {
        let p = self.prob;
        let mut s = Slacks {
            ep: vec![0.0; self.lp.len()],
            em: vec![0.0; self.lp.len()],
            bp: gamma.iter().map(|g| p.m0 - g).collect(),
            bm: gamma.iter().map(|g| p.m0 + g).collect(),
        };
        let mut ok = s.bp.iter().chain(&s.bm).all(|&x| x > 0.0);
        p.for_each_edge(|e, a, b| {
            let d = gamma[a] - gamma[b];
            s.ep[e] = p.caps[e] - d;
            s.em[e] = p.caps[e] + d;
            ok &= s.ep[e] > 0.0 && s.em[e] > 0.0;
        });
        ok.then_some(s)
    }

    fn surrogate_gap(&self, s: &Slacks) -> f64 {
        let pairs = [
            (&self.lp, &s.ep),
            (&self.lm, &s.em),
            (&self.bp, &s.bp),
            (&self.bm, &s.bm),
        ];
        pairs
            .iter()
            .flat_map(|(l, s)| l.iter().zip(s.iter()).map(|(a, b)| a * b))
            .sum()
    }

    /// Gradient of `−objective` plus `Aᵀλ`.
    fn dual_residual(
        &self,
        gamma: &[f64],
        lp: &[f64],
        lm: &[f64],
        bp: &[f64],
        bm: &[f64],
    ) -> Vec<f64> {
        let p = self.prob;
        let mut r: Vec<f64> = p.gradient(gamma).iter().map(|g| -g).collect();
        for i in 0..r.len() {
            r[i] += bp[i] - bm[i];
        }
        p.for_each_edge(|e, a, b| {
            let net = lp[e] - lm[e];
            r[a] += net;
            r[b] -= net;
        });
        r
    }

    fn residual_norm(&self, gamma: &[f64], mult: [&[f64]; 4], s: &Slacks, t: f64) -> f64 {
        let [lp, lm, bp, bm] = mult;
        let rd = self.dual_residual(gamma, lp, lm, bp, bm);
        let mut sq: f64 = rd.iter().map(|x| x * x).sum();
        for (l, s) in [(lp, &s.ep), (lm, &s.em), (bp, &s.bp), (bm, &s.bm)] {
            sq += l
                .iter()
                .zip(s.iter())
                .map(|(a, b)| (a * b - 1.0 / t).powi(2))
                .sum::<f64>();
        }
        sq.sqrt()
    }

    /// Solve `H Δγ = rhs` for the reduced Newton matrix
    /// `H = ∇²(−objective) + Σ (λ/s) a aᵀ`.
    fn newton_direction(&self, s: &Slacks, rhs: &[f64]) -> Result<Vec<f64>> {
        let p = self.prob;
        let n = p.len();
        let mut diag: Vec<f64> = (0..n)
            .map(|i| {
                p.v[i] * f_alpha_star_second(p.alpha, self.gamma[i])
                    + self.bp[i] / s.bp[i]
                    + self.bm[i] / s.bm[i]
            })
            .collect();
        match p.edges {
            Edges::Chain => {
                let mut off = vec![0.0; n.saturating_sub(1)];
                p.for_each_edge(|e, a, b| {
                    let omega = self.lp[e] / s.ep[e] + self.lm[e] / s.em[e];
                    diag[a] += omega;
                    diag[b] += omega;
                    off[e] = -omega;
                });
                Ok(solve_tridiagonal(&diag, &off, rhs))
            }
            Edges::Complete => {
                let mut h = DMatrix::<f64>::zeros(n, n);
                for i in 0..n {
                    h[(i, i)] = diag[i];
                }
                p.for_each_edge(|e, a, b| {
                    let omega = self.lp[e] / s.ep[e] + self.lm[e] / s.em[e];
                    h[(a, a)] += omega;
                    h[(b, b)] += omega;
                    h[(a, b)] -= omega;
                    h[(b, a)] -= omega;
                });
                let scale = (0..n).map(|i| h[(i, i)]).fold(0.0f64, f64::max);
                let mut jitter = 0.0;
                for _ in 0..8 {
                    let mut m = h.clone();
                    for i in 0..n {
                        m[(i, i)] += jitter;
                    }
                    if let Some(chol) = m.cholesky() {
                        return Ok(chol
                            .solve(&DVector::from_column_slice(rhs))
                            .as_slice()
                            .to_vec());
                    }
                    jitter = if jitter == 0.0 {
                        1e-14 * scale
                    } else {
                        jitter * 100.0
                    };
                }
                Err(Error::Unsupported(
                    "Newton system is numerically singular".into(),
                ))
            }
        }
    }

    fn run(mut self, cfg: &SolverConfig) -> Result<PotentialSolution> {
        const MU: f64 = 10.0;
        let p = self.prob;
        let k = self.constraint_count() as f64;
        let mut best = (f64::NEG_INFINITY, self.gamma.clone());
        let mut gap = f64::INFINITY;
        for iter in 0..cfg.max_iters {
            let s = self
                .slacks(&self.gamma)
                .expect("iterates stay strictly feasible");
            let objective = p.objective(&self.gamma);
            if objective > best.0 {
                best = (objective, self.gamma.clone());
            }
            let net: Vec<f64> = self.lp.iter().zip(&self.lm).map(|(a, b)| a - b).collect();
            gap = gap.min(p.dual_bound(&net) - best.0);
            if gap <= cfg.tolerance {
                return Ok(p.finish(best.1, iter, gap.max(0.0)));
            }

            let t = MU * k / self.surrogate_gap(&s);
            // barrier gradient: ∇(−objective) + (1/t) Σ a / s
            let mut rhs = p.gradient(&self.gamma);
            for ((r, bm), bp) in rhs.iter_mut().zip(&s.bm).zip(&s.bp) {
                *r += (1.0 / bm - 1.0 / bp) / t;
            }
            p.for_each_edge(|e, a, b| {
                let push = (1.0 / s.ep[e] - 1.0 / s.em[e]) / t;
                rhs[a] -= push;
                rhs[b] += push;
            });
            let dg = self.newton_direction(&s, &rhs)?;

            // multiplier steps: Δλ = −λ + (1/t + λ aᵀΔγ)/s
            let step = |l: &[f64], sl: &[f64], ad: &dyn Fn(usize) -> f64| -> Vec<f64> {
                (0..l.len())
                    .map(|i| -l[i] + (1.0 / t + l[i] * ad(i)) / sl[i])
                    .collect()
            };
            let mut de = vec![0.0; self.lp.len()];
            p.for_each_edge(|e, a, b| de[e] = dg[a] - dg[b]);
            let dlp = step(&self.lp, &s.ep, &|e| de[e]);
            let dlm = step(&self.lm, &s.em, &|e| -de[e]);
            let dbp = step(&self.bp, &s.bp, &|i| dg[i]);
            let dbm = step(&self.bm, &s.bm, &|i| -dg[i]);

            let mut smax = 1.0f64;
            for (l, d) in [
                (&self.lp, &dlp),
                (&self.lm, &dlm),
                (&self.bp, &dbp),
                (&self.bm, &dbm),
            ] {
                for (a, b) in l.iter().zip(d) {
                    if *b < 0.0 {
                        smax = smax.min(-a / b);
                    }
                }
            }
            let mut alpha = 0.99 * smax;
            let r0 =
                self.residual_norm(&self.gamma, [&self.lp, &self.lm, &self.bp, &self.bm], &s, t);
            let mut accepted = false;
            for _ in 0..60 {
                let g: Vec<f64> = self
                    .gamma
                    .iter()
                    .zip(&dg)
                    .map(|(x, d)| x + alpha * d)
                    .collect();
                if let Some(sn) = self.slacks(&g) {
                    let upd = |l: &[f64], d: &[f64]| -> Vec<f64> {
                        l.iter()
                            .zip(d)
                            .map(|(a, b)| (a + alpha * b).max(0.0))
                            .collect()
                    };
                    let (lp, lm, bp, bm) = (
                        upd(&self.lp, &dlp),
                        upd(&self.lm, &dlm),
                        upd(&self.bp, &dbp),
                        upd(&self.bm, &dbm),
                    );
                    let r = self.residual_norm(&g, [&lp, &lm, &bp, &bm], &sn, t);
                    if r <= (1.0 - 0.01 * alpha) * r0 {
                        (self.gamma, self.lp, self.lm, self.bp, self.bm) = (g, lp, lm, bp, bm);
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let solution = p.finish(best.1, cfg.max_iters, gap);
        Err(Error::NotConverged {
            iterations: cfg.max_iters,
            gap,
            best: Box::new(solution),
        })
    }
}

/// Solve a symmetric tridiagonal system with diagonal `d` and off-diagonal
/// `e` (Thomas algorithm; the matrix is diagonally dominant here).
fn solve_tridiagonal(d: &[f64], e: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut c = vec![0.0; n];
    let mut x = rhs.to_vec();
    let mut denom = d[0];
    x[0] /= denom;
    for i in 1..n {
        c[i - 1] = e[i - 1] / denom;
        denom = d[i] - e[i - 1] * c[i - 1];
        x[i] = (x[i] - e[i - 1] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Lipschitz-regularized α-divergence restricted to Σ-invariant test
/// functions, with the optimal potential.
pub fn dalpha_invariant(
    p: &EmpiricalMeasure,
    q: &EmpiricalMeasure,
    action: &GroupAction,
    cfg: &AlphaConfig,
) -> Result<(f64, PotentialSolution)> {
    let problem = AlphaProblem::new(p, q, action, cfg)?;
    let solution = problem.solve(&cfg.solver)?;
    Ok((solution.objective, solution))
}
