//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symdiv::{EmpiricalMeasure, GroupAction};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Random weighted measure with `n` atoms in `[lo, hi)^d`.
pub fn random_measure(
    r: &mut ChaCha8Rng,
    d: usize,
    n: usize,
    lo: f64,
    hi: f64,
) -> EmpiricalMeasure {
    let coords: Vec<f64> = (0..n * d).map(|_| r.random_range(lo..hi)).collect();
    let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    EmpiricalMeasure::from_weighted(d, coords, raw.iter().map(|w| w / total).collect()).unwrap()
}

/// Uniform points in the unit disk.
pub fn disk_points(r: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let rad = r.random::<f64>().sqrt();
            let t = r.random_range(0.0..std::f64::consts::TAU);
            vec![rad * t.cos(), rad * t.sin()]
        })
        .collect()
}

/// Replace every point by the image under an independently drawn group element.
pub fn scramble(r: &mut ChaCha8Rng, action: &GroupAction, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|x| action.apply(r.random_range(0..action.order()), x).unwrap())
        .collect()
}

/// Minimum-cost transport value by a dense two-phase tableau simplex with
/// Bland's rule. The last column-sum constraint is dropped as redundant.
pub fn dense_lp_transport(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let vars = m * n;
    let rows = m + n - 1;
    let mut rhs = Vec::with_capacity(rows);
    let mut mat = vec![vec![0.0; vars]; rows];
    for i in 0..m {
        for j in 0..n {
            mat[i][i * n + j] = 1.0;
        }
        rhs.push(a[i]);
    }
    for j in 0..n - 1 {
        for i in 0..m {
            mat[m + j][i * n + j] = 1.0;
        }
        rhs.push(b[j]);
    }
    let mut t = Tableau::new(mat, rhs);
    t.phase_one();
    t.phase_two(cost)
}

struct Tableau {
    /// Rows of `[A | I_art | rhs]`.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    vars: usize,
    alive: Vec<bool>,
}

const EPS: f64 = 1e-12;

impl Tableau {
    fn new(mat: Vec<Vec<f64>>, rhs: Vec<f64>) -> Self {
        let (rows, vars) = (mat.len(), mat[0].len());
        let mut t = Vec::with_capacity(rows);
        for (r, (row, b)) in mat.into_iter().zip(rhs).enumerate() {
            let mut full = row;
            full.extend((0..rows).map(|k| if k == r { 1.0 } else { 0.0 }));
            full.push(b);
            t.push(full);
        }
        Tableau {
            rows: t,
            basis: (vars..vars + rows).collect(),
            vars,
            alive: vec![true; rows],
        }
    }

    fn width(&self) -> usize {
        self.rows[0].len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k != r && row[c].abs() > 0.0 {
                let f = row[c];
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimize `cost · x` over the columns `0..allowed`, Bland's rule.
    fn optimize(&mut self, cost: &[f64], allowed: usize) {
        let rhs = self.width() - 1;
        loop {
            let reduced = |c: usize, t: &Self| -> f64 {
                let mut z = cost[c];
                for (k, row) in t.rows.iter().enumerate() {
                    if t.alive[k] {
                        z -= cost[t.basis[k]] * row[c];
                    }
                }
                z
            };
            let Some(enter) =
                (0..allowed).find(|&c| !self.basis.contains(&c) && reduced(c, self) < -1e-12)
            else {
                return;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (k, row) in self.rows.iter().enumerate() {
                if !self.alive[k] || row[enter] <= EPS {
                    continue;
                }
                let ratio = row[rhs] / row[enter];
                let better = match leave {
                    None => true,
                    Some((l, best)) => {
                        ratio < best - 1e-15
                            || (ratio <= best + 1e-15 && self.basis[k] < self.basis[l])
                    }
                };
                if better {
                    leave = Some((k, ratio));
                }
            }
            let (r, _) = leave.expect("transport LP is bounded");
            self.pivot(r, enter);
        }
    }

    fn phase_one(&mut self) {
        let width = self.width() - 1;
        let mut cost = vec![0.0; width];
        for c in cost.iter_mut().skip(self.vars) {
            *c = 1.0;
        }
        self.optimize(&cost, width);
        // drive zero-level artificials out of the basis, dropping redundant rows
        for r in 0..self.rows.len() {
            if self.basis[r] >= self.vars {
                match (0..self.vars).find(|&c| self.rows[r][c].abs() > 1e-9) {
                    Some(c) => self.pivot(r, c),
                    None => self.alive[r] = false,
                }
            }
        }
    }

    fn phase_two(&mut self, cost: &[f64]) -> f64 {
        let mut full = cost.to_vec();
        full.resize(self.width() - 1, 0.0);
        self.optimize(&full, self.vars);
        let rhs = self.width() - 1;
        (0..self.rows.len())
            .filter(|&k| self.alive[k])
            .map(|k| full[self.basis[k]] * self.rows[k][rhs])
            .sum()
    }
}

/// W1 between two measures by the dense LP oracle, cost `L‖x − y‖`.
pub fn w1_oracle(p: &EmpiricalMeasure, q: &EmpiricalMeasure, l: f64) -> f64 {
    let mut cost = Vec::with_capacity(p.len() * q.len());
    for i in 0..p.len() {
        for j in 0..q.len() {
            cost.push(l * euclid(p.point(i), q.point(j)));
        }
    }
    dense_lp_transport(p.weights(), q.weights(), &cost)
}

/// Convex conjugate of `(x^α − 1)/(α(α − 1))` on `x ≥ 0`.
pub fn conjugate(alpha: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 1.0 / (alpha * (alpha - 1.0));
    }
    let x = ((alpha - 1.0) * y).powf(1.0 / (alpha - 1.0));
    x * y - (x.powf(alpha) - 1.0) / (alpha * (alpha - 1.0))
}

/// Brute-force maximum of `Σ wᵢγᵢ − Σ vᵢ f*(γᵢ)` over `|γᵢ − γⱼ| ≤ L‖xᵢ − xⱼ‖`
/// for up to three support points, by repeatedly refined grid search.
pub fn alpha_grid_oracle(points: &[Vec<f64>], w: &[f64], v: &[f64], alpha: f64, l: f64) -> f64 {
    let k = points.len();
    assert!((1..=3).contains(&k));
    let diam = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| euclid(&points[i], &points[j]))
        .fold(0.0, f64::max);
    let half = 1.0 / (alpha - 1.0) + l * diam + 1.0;
    let mut lo = vec![-half; k];
    let mut hi = vec![half; k];
    let steps = 40usize;
    let value = |g: &[f64]| -> Option<f64> {
        for i in 0..k {
            for j in i + 1..k {
                if (g[i] - g[j]).abs() > l * euclid(&points[i], &points[j]) {
                    return None;
                }
            }
        }
        Some(
            (0..k)
                .map(|i| w[i] * g[i] - v[i] * conjugate(alpha, g[i]))
                .sum(),
        )
    };
    let mut best = f64::NEG_INFINITY;
    let mut arg = vec![0.0; k];
    for _ in 0..40 {
        let h: Vec<f64> = (0..k).map(|i| (hi[i] - lo[i]) / steps as f64).collect();
        let total = (steps + 1).pow(k as u32);
        let mut g = vec![0.0; k];
        for idx in 0..total {
            let mut rest = idx;
            for i in 0..k {
                g[i] = lo[i] + h[i] * (rest % (steps + 1)) as f64;
                rest /= steps + 1;
            }
            if let Some(val) = value(&g) {
                if val > best {
                    best = val;
                    arg.copy_from_slice(&g);
                }
            }
        }
        if h.iter().all(|&s| s < 1e-9) {
            break;
        }
        for i in 0..k {
            lo[i] = arg[i] - 3.0 * h[i];
            hi[i] = arg[i] + 3.0 * h[i];
        }
    }
    best
}
