//! Replicated sample-size sweeps over group orders.
//!
//! Every plan draws P and Q from the same Σ-invariant distribution, so the
//! true divergence is 0 and each recorded value is the estimation error.
//!
//! A cell is `(group_order, n, replica)`. Its seed is a hash of the master
//! seed, the experiment label and the cell key, never of execution order,
//! so cells are independent and the output does not depend on scheduling.
//! P uses stream 0 and Q stream 1 of the cell seed.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::falpha::{dalpha_invariant, AlphaConfig, SolverConfig};
use crate::groups::GroupAction;
use crate::io::format_float;
use crate::measures::EmpiricalMeasure;
use crate::mmd::{mmd_invariant, KernelSpec, MmdPath};
use crate::rng;
use crate::samplers::{SamplerKind, DEFAULT_MOG_STD};
use crate::w1::{w1_invariant, W1Config, W1Method};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentName {
    /// W1 on `[0, 1)` under translations, sampler `wss1d:r=|Σ|`.
    Wss1D,
    /// W1 on the 8-Gaussian mixture under rotations of order 1, 2, 4.
    Wss2D,
    /// MMD on `disk:l=|Σ|` with fixed bandwidth `s = 2π/(6l)`.
    MmdDiskFixedS(usize),
    /// MMD on `disk:l=|Σ|` with bandwidth `s = 2π/(6|Σ|)`.
    MmdDiskAdaptiveS,
    /// α-divergence on `wss1d:r=|Σ|` (no counterpart figure).
    AlphaWss1D,
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentName::Wss1D => f.write_str("wss1d"),
            ExperimentName::Wss2D => f.write_str("wss2d"),
            ExperimentName::MmdDiskFixedS(l) => write!(f, "mmd-disk-fixed:l={l}"),
            ExperimentName::MmdDiskAdaptiveS => f.write_str("mmd-disk-adaptive"),
            ExperimentName::AlphaWss1D => f.write_str("alpha-wss1d"),
        }
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wss1d" => Ok(ExperimentName::Wss1D),
            "wss2d" => Ok(ExperimentName::Wss2D),
            "mmd-disk-adaptive" => Ok(ExperimentName::MmdDiskAdaptiveS),
            "alpha-wss1d" => Ok(ExperimentName::AlphaWss1D),
            _ => {
                let l = s
                    .strip_prefix("mmd-disk-fixed:l=")
                    .and_then(|l| l.parse::<usize>().ok())
                    .filter(|&l| l >= 1)
                    .ok_or_else(|| {
                        Error::arg(format!(
                            "unknown experiment '{s}' \
                             (wss1d|wss2d|mmd-disk-fixed:l=<L>|mmd-disk-adaptive|alpha-wss1d)"
                        ))
                    })?;
                Ok(ExperimentName::MmdDiskFixedS(l))
            }
        }
    }
}

/// Estimator settings; fields irrelevant to a plan are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub lipschitz_l: f64,
    pub w1_method: W1Method,
    pub mog_std: f64,
    /// MMD path; `None` picks by group order.
    pub mmd_path: Option<MmdPath>,
    pub alpha: f64,
    pub solver: SolverConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            lipschitz_l: 1.0,
            w1_method: W1Method::Auto,
            mog_std: DEFAULT_MOG_STD,
            mmd_path: None,
            alpha: 2.0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub name: ExperimentName,
    pub group_orders: Vec<usize>,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub master_seed: u64,
    pub estimator: EstimatorConfig,
}

fn doubling(from: usize, to: usize) -> Vec<usize> {
    std::iter::successors(Some(from), |&n| (n < to).then_some(n * 2)).collect()
}

impl ExperimentPlan {
    /// Default grid for a named experiment with 10 replicas.
    pub fn default_for(name: ExperimentName, master_seed: u64) -> Self {
        let mut estimator = EstimatorConfig::default();
        let (group_orders, sizes) = match name {
            ExperimentName::Wss1D => (vec![1, 4, 16, 64, 256], doubling(64, 8192)),
            ExperimentName::Wss2D => {
                // the quotient metric keeps the LP at n×n for every order
                estimator.w1_method = W1Method::QuotientLP;
                (vec![1, 2, 4], doubling(64, 2048))
            }
            ExperimentName::MmdDiskFixedS(_) | ExperimentName::MmdDiskAdaptiveS => {
                (vec![1, 4, 16, 64, 256], doubling(64, 8192))
            }
            ExperimentName::AlphaWss1D => (vec![1, 2, 4], doubling(32, 512)),
        };
        ExperimentPlan {
            name,
            group_orders,
            sizes,
            replicas: 10,
            master_seed,
            estimator,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_orders.is_empty() || self.group_orders.contains(&0) {
            return Err(Error::arg(
                "group orders must be a nonempty list of positive integers",
            ));
        }
        let mut orders = self.group_orders.clone();
        orders.sort_unstable();
        orders.dedup();
        if orders.len() != self.group_orders.len() {
            return Err(Error::arg("group orders must be distinct"));
        }
        if self.sizes.is_empty()
            || self.sizes[0] == 0
            || self.sizes.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::arg("sizes must be positive and strictly increasing"));
        }
        if self.replicas == 0 {
            return Err(Error::arg("replicas must be at least 1"));
        }
        if matches!(self.name, ExperimentName::MmdDiskFixedS(0)) {
            return Err(Error::arg("fixed-bandwidth order l must be at least 1"));
        }
        let e = &self.estimator;
        if !(e.lipschitz_l > 0.0 && e.lipschitz_l.is_finite()) {
            return Err(Error::arg("Lipschitz constant must be positive"));
        }
        match self.name {
            ExperimentName::Wss2D => {
                SamplerKind::MixtureOfGaussians8 { std: e.mog_std }.validate()?
            }
            ExperimentName::AlphaWss1D if !(e.alpha > 1.0 && e.alpha.is_finite()) => {
                return Err(Error::arg(format!("alpha must be > 1, got {}", e.alpha)))
            }
            _ => {}
        }
        Ok(())
    }

    /// All cells in canonical (group_order, n, replica) order.
    pub fn cells(&self) -> Vec<(usize, usize, usize)> {
        let mut orders = self.group_orders.clone();
        orders.sort_unstable();
        let mut cells = Vec::with_capacity(orders.len() * self.sizes.len() * self.replicas);
        for &g in &orders {
            for &n in &self.sizes {
                for r in 0..self.replicas {
                    cells.push((g, n, r));
                }
            }
        }
        cells
    }

    pub fn cell_seed(&self, order: usize, n: usize, replica: usize) -> u64 {
        let label = rng::label_key(&self.name.to_string());
        rng::derive_seed(
            self.master_seed,
            &[label, order as u64, n as u64, replica as u64],
        )
    }

    fn sampler(&self, order: usize) -> SamplerKind {
        match self.name {
            ExperimentName::Wss1D | ExperimentName::AlphaWss1D => SamplerKind::Wss1D { r: order },
            ExperimentName::Wss2D => SamplerKind::MixtureOfGaussians8 {
                std: self.estimator.mog_std,
            },
            ExperimentName::MmdDiskFixedS(_) | ExperimentName::MmdDiskAdaptiveS => {
                SamplerKind::Disk { l: order }
            }
        }
    }

    fn action(&self, order: usize) -> Result<GroupAction> {
        match self.name {
            ExperimentName::Wss1D | ExperimentName::AlphaWss1D => GroupAction::translation(order),
            _ => GroupAction::rotation(order),
        }
    }

    /// Estimation error for one cell.
    pub fn run_cell(&self, order: usize, n: usize, replica: usize) -> Result<f64> {
        let seed = self.cell_seed(order, n, replica);
        let kind = self.sampler(order);
        let p = EmpiricalMeasure::from_samples(&kind.sample_with(n, &mut rng::stream(seed, 0))?)?;
        let q = EmpiricalMeasure::from_samples(&kind.sample_with(n, &mut rng::stream(seed, 1))?)?;
        let action = self.action(order)?;
        let e = &self.estimator;
        match self.name {
            ExperimentName::Wss1D | ExperimentName::Wss2D => {
                let cfg = W1Config {
                    lipschitz_l: e.lipschitz_l,
                    method: e.w1_method,
                    lp_tolerance: 0.0,
                };
                w1_invariant(&p, &q, &action, &cfg)
            }
            ExperimentName::MmdDiskFixedS(_) | ExperimentName::MmdDiskAdaptiveS => {
                let l = match self.name {
                    ExperimentName::MmdDiskFixedS(l) => l,
                    _ => order,
                };
                let kernel = KernelSpec::gaussian(TAU / (6.0 * l as f64))?;
                let path = e.mmd_path.unwrap_or(MmdPath::default_for(order));
                mmd_invariant(&p, &q, &action, &kernel, path)
            }
            ExperimentName::AlphaWss1D => {
                let cfg = AlphaConfig {
                    alpha: e.alpha,
                    lipschitz_l: e.lipschitz_l,
                    solver: e.solver,
                };
                Ok(dalpha_invariant(&p, &q, &action, &cfg)?.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub group_order: usize,
    pub n: usize,
    pub replica: usize,
    pub seed: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub experiment: String,
    pub group_order: usize,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over replicas divided by √replicas; 0 for
    /// a single replica.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub experiment: String,
    pub order_a: usize,
    pub order_b: usize,
    pub n: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ResultTable {
    /// Sorted by (group_order, n, replica).
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn from_rows(mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by_key(|r| (r.group_order, r.n, r.replica));
        ResultTable { rows }
    }

    pub fn group_orders(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.group_order).collect();
        v.dedup();
        v
    }

    /// Mean and standard error per (group_order, n).
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        self.rows
            .chunk_by(|a, b| (a.group_order, a.n) == (b.group_order, b.n))
            .map(|chunk| {
                let k = chunk.len() as f64;
                let mean = chunk.iter().map(|r| r.value).sum::<f64>() / k;
                let stderr = if chunk.len() > 1 {
                    let var =
                        chunk.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / (k - 1.0);
                    (var / k).sqrt()
                } else {
                    0.0
                };
                AggregateRow {
                    experiment: chunk[0].experiment.clone(),
                    group_order: chunk[0].group_order,
                    n: chunk[0].n,
                    mean,
                    stderr,
                }
            })
            .collect()
    }

    fn means(&self, order: usize) -> Vec<(usize, f64)> {
        self.aggregate()
            .into_iter()
            .filter(|a| a.group_order == order)
            .map(|a| (a.n, a.mean))
            .collect()
    }

    pub fn write_raw(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["experiment", "group_order", "n", "replica", "seed", "value"])?;
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.group_order.to_string(),
                r.n.to_string(),
                r.replica.to_string(),
                r.seed.to_string(),
                format_float(r.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregate(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["experiment", "group_order", "n", "mean", "stderr"])?;
        for a in self.aggregate() {
            w.write_record([
                a.experiment,
                a.group_order.to_string(),
                a.n.to_string(),
                format_float(a.mean),
                format_float(a.stderr),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Ratio curves between each pair of consecutive group orders.
    pub fn consecutive_ratios(&self) -> Result<Vec<RatioRow>> {
        let orders = self.group_orders();
        let experiment = self
            .rows
            .first()
            .map(|r| r.experiment.clone())
            .unwrap_or_default();
        let mut out = Vec::new();
        for pair in orders.windows(2) {
            for (n, ratio) in ratio_curves(self, pair[0], pair[1])? {
                out.push(RatioRow {
                    experiment: experiment.clone(),
                    order_a: pair[0],
                    order_b: pair[1],
                    n,
                    ratio,
                });
            }
        }
        Ok(out)
    }

    pub fn write_ratios(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["experiment", "order_a", "order_b", "n", "ratio"])?;
        for r in self.consecutive_ratios()? {
            w.write_record([
                r.experiment,
                r.order_a.to_string(),
                r.order_b.to_string(),
                r.n.to_string(),
                format_float(r.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run every cell of a plan in parallel on the current rayon pool.
pub fn run(plan: &ExperimentPlan) -> Result<ResultTable> {
    run_with_progress(plan, |_, _| {})
}

/// As [`run`], calling `progress(done, total)` after each finished cell.
pub fn run_with_progress(
    plan: &ExperimentPlan,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<ResultTable> {
    plan.validate()?;
    let cells = plan.cells();
    let total = cells.len();
    let done = AtomicUsize::new(0);
    let label = plan.name.to_string();
    let outcomes: Vec<((usize, usize, usize), Result<f64>)> = cells
        .par_iter()
        .map(|&(g, n, r)| {
            let value = plan.run_cell(g, n, r);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            ((g, n, r), value)
        })
        .collect();
    let mut rows = Vec::with_capacity(total);
    let mut completed = Vec::new();
    let mut first_error = None;
    for ((g, n, r), outcome) in outcomes {
        match outcome {
            Ok(value) => {
                completed.push((g, n, r));
                rows.push(ResultRow {
                    experiment: label.clone(),
                    group_order: g,
                    n,
                    replica: r,
                    seed: plan.cell_seed(g, n, r),
                    value,
                });
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        None => Ok(ResultTable::from_rows(rows)),
        Some(e) => Err(Error::Partial {
            completed,
            source: Box::new(e),
        }),
    }
}

/// Pointwise `mean_a / mean_b` at each n present for both orders.
pub fn ratio_curves(
    table: &ResultTable,
    order_a: usize,
    order_b: usize,
) -> Result<Vec<(usize, f64)>> {
    let (a, b) = (table.means(order_a), table.means(order_b));
    for (order, means) in [(order_a, &a), (order_b, &b)] {
        if means.is_empty() {
            return Err(Error::arg(format!(
                "group order {order} is not in the table"
            )));
        }
    }
    Ok(a.iter()
        .filter_map(|&(n, ma)| {
            b.iter()
                .find(|&&(m, _)| m == n)
                .map(|&(_, mb)| (n, ma / mb))
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(log n, log mean)` over sizes with a
/// positive mean.
pub fn fit_rate(table: &ResultTable, group_order: usize) -> Result<RateFit> {
    let means = table.means(group_order);
    if means.is_empty() {
        return Err(Error::arg(format!(
            "group order {group_order} is not in the table"
        )));
    }
    if means.len() < 3 {
        return Err(Error::arg("rate fit needs at least three sizes"));
    }
    let pts: Vec<(f64, f64)> = means
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|&(n, m)| ((n as f64).ln(), m.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!(
            "fewer than two positive means for group order {group_order}"
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
