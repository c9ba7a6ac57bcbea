//! Exact discrete optimal transport by the primal network simplex method.
//!
//! The transportation problem between supplies `a` (M sources) and demands
//! `b` (N sinks) on a dense cost matrix is solved as an uncapacitated
//! min-cost flow. The spanning-tree basis is stored with parent / thread /
//! subtree-size arrays and kept strongly feasible, which rules out cycling
//! under degeneracy; entering arcs are chosen by block search.
//!
//! Because every arc is uncapacitated, non-tree arcs always carry zero flow.
//! Only the flow on each node's tree arc is stored, so memory is O(M + N)
//! besides the cost matrix.

use crate::error::{Error, Result};

/// Largest dense cost matrix accepted (entries).
pub const MAX_COST_ENTRIES: usize = 40_000_000;

const NONE: usize = usize::MAX;
const UP: f64 = 1.0;
const DOWN: f64 = -1.0;

#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub cost: f64,
    /// Nonzero entries (source, sink, mass) of the optimal plan.
    pub plan: Vec<(usize, usize, f64)>,
    /// Node potentials (sources first, then sinks). The reduced cost of arc
    /// (i, j) is `c_ij + potentials[i] - potentials[M + j]`.
    pub potentials: Vec<f64>,
    pub pivots: usize,
}

/// Solve `min Σ c_ij π_ij` over couplings of `a` and `b`; `cost` is row-major
/// M×N. Both marginals must be nonnegative with equal totals (to 1e-9).
pub fn solve(a: &[f64], b: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    solve_with_tolerance(a, b, cost, 0.0)
}

/// As [`solve`], stopping once no reduced cost is below `-tol` (plus a
/// machine-precision floor).
pub fn solve_with_tolerance(
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    tol: f64,
) -> Result<TransportSolution> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::arg("transport problem needs nonempty marginals"));
    }
    if m.checked_mul(n).is_none_or(|mn| mn > MAX_COST_ENTRIES) {
        return Err(Error::Resource(format!(
            "{m}x{n} transport problem exceeds {MAX_COST_ENTRIES} cost entries; use smaller samples"
        )));
    }
    if cost.len() != m * n {
        return Err(Error::arg("cost matrix shape does not match marginals"));
    }
    if a.iter().chain(b).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::arg(
            "marginal weights must be finite and nonnegative",
        ));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
        return Err(Error::arg(format!("marginal totals differ: {sa} vs {sb}")));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::arg("costs must be finite"));
    }
    let mut simplex = NetworkSimplex::new(a, b, cost);
    simplex.eps = simplex.eps.max(tol);
    simplex.run()?;
    Ok(simplex.into_solution())
}

struct NetworkSimplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    root: usize,
    real_arcs: usize,
    art_cost: f64,
    art_up: Vec<bool>,

    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<f64>,
    pred_flow: Vec<f64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,

    block_size: usize,
    next_arc: usize,
    eps: f64,
    pivots: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

impl<'a> NetworkSimplex<'a> {
    fn new(a: &[f64], b: &[f64], cost: &'a [f64]) -> Self {
        let (m, n) = (a.len(), b.len());
        let node_num = m + n;
        let root = node_num;
        let real_arcs = m * n;
        let max_cost = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let art_cost = (max_cost + 1.0) * node_num as f64;

        let mut s = NetworkSimplex {
            m,
            n,
            cost,
            root,
            real_arcs,
            art_cost,
            art_up: vec![true; node_num],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![UP; node_num + 1],
            pred_flow: vec![0.0; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![1; node_num + 1],
            last_succ: vec![0; node_num + 1],
            pi: vec![0.0; node_num + 1],
            dirty_revs: Vec::new(),
            block_size: ((real_arcs as f64).sqrt().ceil() as usize).max(10),
            next_arc: 0,
            eps: 1e-14 * art_cost,
            pivots: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };

        // Initial basis: a star of artificial arcs around the root.
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        for u in 0..node_num {
            let supply = if u < m { a[u] } else { -b[u - m] };
            s.parent[u] = root;
            s.pred[u] = real_arcs + u;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            if supply >= 0.0 {
                s.art_up[u] = true;
                s.pred_dir[u] = UP;
                s.pi[u] = 0.0;
                s.pred_flow[u] = supply;
            } else {
                s.art_up[u] = false;
                s.pred_dir[u] = DOWN;
                s.pi[u] = art_cost;
                s.pred_flow[u] = -supply;
            }
        }
        s
    }

    fn source(&self, e: usize) -> usize {
        if e < self.real_arcs {
            e / self.n
        } else {
            let u = e - self.real_arcs;
            if self.art_up[u] {
                u
            } else {
                self.root
            }
        }
    }

    fn target(&self, e: usize) -> usize {
        if e < self.real_arcs {
            self.m + e % self.n
        } else {
            let u = e - self.real_arcs;
            if self.art_up[u] {
                self.root
            } else {
                u
            }
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.real_arcs {
            self.cost[e]
        } else if self.art_up[e - self.real_arcs] {
            0.0
        } else {
            self.art_cost
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        let (i, j) = (e / self.n, e % self.n);
        self.cost[e] + self.pi[i] - self.pi[self.m + j]
    }

    /// Block search over real arcs for the most negative reduced cost.
    fn find_entering_arc(&mut self) -> bool {
        let total = self.real_arcs;
        let mut min = -self.eps;
        let mut best = NONE;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        for _ in 0..total {
            let c = self.reduced_cost(e);
            if c < min {
                min = c;
                best = e;
            }
            e += 1;
            if e == total {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if best != NONE {
                    break;
                }
                cnt = self.block_size;
            }
        }
        if best == NONE {
            return false;
        }
        self.in_arc = best;
        self.next_arc = e;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Choose the leaving arc on the cycle closed by `in_arc`, preferring the
    /// last blocking arc met from the target side (strongly feasible rule).
    fn find_leaving_arc(&mut self) -> bool {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == UP && self.pred_flow[u] < delta {
                delta = self.pred_flow[u];
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DOWN && self.pred_flow[u] <= delta {
                delta = self.pred_flow[u];
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0
    }

    fn change_flow(&mut self) -> f64 {
        let val = self.delta;
        if val > 0.0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                self.pred_flow[u] -= self.pred_dir[u] * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                self.pred_flow[u] += self.pred_dir[u] * val;
                u = self.parent[u];
            }
        }
        val
    }

    fn update_tree_structure(&mut self, in_flow: f64) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;
        let in_dir = if u_in == self.source(in_arc) {
            UP
        } else {
            DOWN
        };

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pred_flow[u_in] = in_flow;

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Re-hang the stem u_in → … → u_out below v_in, reversing it.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Shift tree arcs one step along the reversed stem.
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                self.pred_flow[u] = self.pred_flow[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pred_flow[u_in] = in_flow;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in {
            join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma =
            self.pi[self.v_in] - self.pi[u_in] - self.pred_dir[u_in] * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<()> {
        let max_pivots = 50 * self.real_arcs.max(1000) + 1_000_000;
        while self.find_entering_arc() {
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::Resource("transport problem is unbounded".into()));
            }
            let in_flow = self.change_flow();
            self.update_tree_structure(in_flow);
            self.update_potential();
            self.pivots += 1;
            if self.pivots > max_pivots {
                return Err(Error::Resource(format!(
                    "network simplex exceeded {max_pivots} pivots"
                )));
            }
        }
        Ok(())
    }

    fn into_solution(self) -> TransportSolution {
        let mut cost = 0.0;
        let mut plan = Vec::new();
        for u in 0..self.m + self.n {
            let e = self.pred[u];
            if e < self.real_arcs && self.pred_flow[u] > 0.0 {
                cost += self.pred_flow[u] * self.cost[e];
                plan.push((e / self.n, e % self.n, self.pred_flow[u]));
            }
        }
        plan.sort_by_key(|&(i, j, _)| (i, j));
        let mut potentials = self.pi;
        potentials.truncate(self.m + self.n);
        TransportSolution {
            cost,
            plan,
            potentials,
            pivots: self.pivots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn check_optimality(a: &[f64], b: &[f64], cost: &[f64], sol: &TransportSolution) {
        let (m, n) = (a.len(), b.len());
        let mut row = vec![0.0; m];
        let mut col = vec![0.0; n];
        for &(i, j, f) in &sol.plan {
            assert!(f >= 0.0);
            row[i] += f;
            col[j] += f;
            let rc = cost[i * n + j] + sol.potentials[i] - sol.potentials[m + j];
            assert!(rc.abs() < 1e-9, "basic arc with reduced cost {rc}");
        }
        for i in 0..m {
            assert_abs_diff_eq!(row[i], a[i], epsilon = 1e-12);
        }
        for j in 0..n {
            assert_abs_diff_eq!(col[j], b[j], epsilon = 1e-12);
        }
        for i in 0..m {
            for j in 0..n {
                let rc = cost[i * n + j] + sol.potentials[i] - sol.potentials[m + j];
                assert!(rc > -1e-9, "dual infeasible at ({i},{j}): {rc}");
            }
        }
    }

    fn random_problem(
        m: usize,
        n: usize,
        seed: u64,
        degenerate: bool,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut r = rng::stream(seed, 0);
        let mut a: Vec<f64> = (0..m)
            .map(|_| {
                if degenerate {
                    1.0
                } else {
                    0.1 + rng::uniform(&mut r)
                }
            })
            .collect();
        let mut b: Vec<f64> = (0..n)
            .map(|_| {
                if degenerate {
                    1.0
                } else {
                    0.1 + rng::uniform(&mut r)
                }
            })
            .collect();
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        a.iter_mut().for_each(|x| *x /= sa);
        b.iter_mut().for_each(|x| *x /= sb);
        let cost = (0..m * n)
            .map(|_| {
                if degenerate {
                    (rng::uniform(&mut r) * 4.0).floor()
                } else {
                    rng::uniform(&mut r)
                }
            })
            .collect();
        (a, b, cost)
    }

    #[test]
    fn single_pair() {
        let sol = solve(&[1.0], &[1.0], &[5.0]).unwrap();
        assert_eq!(sol.cost, 5.0);
        assert_eq!(sol.plan, vec![(0, 0, 1.0)]);
    }

    #[test]
    fn two_to_one() {
        let sol = solve(&[0.5, 0.5], &[1.0], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(sol.cost, 0.5);
    }

    #[test]
    fn assignment_picks_cheaper_matching() {
        // identity costs 2, swap costs 0.2
        let cost = [1.0, 0.1, 0.1, 1.0];
        let sol = solve(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert_abs_diff_eq!(sol.cost, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn random_problems_satisfy_kkt() {
        for seed in 0..200 {
            let m = 1 + (seed as usize * 7) % 23;
            let n = 1 + (seed as usize * 5) % 19;
            let (a, b, cost) = random_problem(m, n, seed, seed % 2 == 0);
            let sol = solve(&a, &b, &cost).unwrap();
            check_optimality(&a, &b, &cost, &sol);
        }
    }

    #[test]
    fn larger_degenerate_problem() {
        let (a, b, cost) = random_problem(300, 300, 99, true);
        let sol = solve(&a, &b, &cost).unwrap();
        check_optimality(&a, &b, &cost, &sol);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            solve(&[0.5], &[1.0], &[1.0]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(solve(&[], &[1.0], &[]), Err(Error::Argument(_))));
        assert!(matches!(
            solve(&[1.0], &[1.0], &[1.0, 2.0]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            solve(&[-1.0, 2.0], &[1.0], &[1.0, 2.0]),
            Err(Error::Argument(_))
        ));
    }
}
