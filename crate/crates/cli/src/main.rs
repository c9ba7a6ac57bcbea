//! `symdiv`: sampling, divergence estimation, assumption checks and
//! experiment sweeps for group-invariant distributions.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 size guard exceeded,
//! 4 solver did not converge, 1 anything else (I/O).

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use symdiv::experiments::{fit_rate, run_with_progress, ExperimentName, ExperimentPlan};
use symdiv::falpha::{dalpha_invariant, AlphaConfig, SolverConfig};
use symdiv::groups::check_assumption_a1;
use symdiv::mmd::{c_big, estimate_c_sigma_k, mmd_invariant, KernelSpec, MmdPath};
use symdiv::samplers::{SamplerKind, SamplerSpec};
use symdiv::w1::{w1_invariant_report, W1Config, W1Method};
use symdiv::{io, EmpiricalMeasure, Error, GroupAction};

use config::{load, CheckFile, EstimateFile, ExperimentFile, SampleFile};

#[derive(Parser)]
#[command(
    name = "symdiv",
    version,
    about = "Divergence estimation between group-invariant distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples from a benchmark invariant distribution.
    Sample(SampleArgs),
    /// Estimate a divergence between two point files.
    Estimate {
        #[command(subcommand)]
        which: EstimateCommand,
    },
    /// Run a replicated sample-size sweep and write CSV tables.
    Experiment(ExperimentArgs),
    /// Check the group and kernel assumptions on a grid over the fundamental domain.
    Check(CheckArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Distribution: wss1d:r=<R>, mog8[:std=<S>] or disk:l=<L>.
    #[arg(long)]
    dist: Option<String>,
    /// Number of points.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path, `-` for stdout.
    #[arg(long)]
    out: Option<String>,
    /// TOML file supplying any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CommonEstimate {
    /// CSV of the first sample (columns x1..xd, optional weight).
    #[arg(long)]
    p: Option<PathBuf>,
    /// CSV of the second sample.
    #[arg(long)]
    q: Option<PathBuf>,
    /// Group: trivial, rot:<n> or trans1d:<n>.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EstimateCommand {
    /// Group-invariant Wasserstein-1 distance.
    W1 {
        #[command(flatten)]
        common: CommonEstimate,
        /// Lipschitz constant.
        #[arg(long = "L")]
        l: Option<f64>,
        /// auto, cdf1d, lp or quotient.
        #[arg(long)]
        method: Option<String>,
        /// Simplex optimality slack.
        #[arg(long)]
        lp_tol: Option<f64>,
    },
    /// Group-invariant Gaussian-kernel MMD.
    Mmd {
        #[command(flatten)]
        common: CommonEstimate,
        /// Kernel: gaussian:s=<bandwidth>.
        #[arg(long)]
        kernel: Option<String>,
        /// orbit or symk; defaults to symk for groups of order 16 and up.
        #[arg(long)]
        path: Option<String>,
    },
    /// Group-invariant Lipschitz-regularized alpha-divergence.
    Falpha {
        #[command(flatten)]
        common: CommonEstimate,
        /// alpha > 1.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "L")]
        l: Option<f64>,
        /// Certified optimality tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// wss1d, wss2d, mmd-disk-fixed:l=<L>, mmd-disk-adaptive or alpha-wss1d.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the raw, aggregate and ratio CSVs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated group orders (overrides the plan default).
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    /// Comma-separated sample sizes (overrides the plan default).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long = "L")]
    l: Option<f64>,
    /// alpha for alpha-wss1d.
    #[arg(long)]
    alpha: Option<f64>,
    /// Component standard deviation for wss2d.
    #[arg(long)]
    mog_std: Option<f64>,
    /// W1 method for wss1d / wss2d.
    #[arg(long)]
    method: Option<String>,
    /// MMD path for the disk plans.
    #[arg(long)]
    path: Option<String>,
    /// Worker threads.
    #[arg(long, env = "SYMDIV_JOBS")]
    jobs: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Group: trivial, rot:<n> or trans1d:<n>.
    #[arg(long)]
    group: Option<String>,
    /// Kernel for the orbit-decay constant, gaussian:s=<bandwidth>.
    #[arg(long)]
    kernel: Option<String>,
    /// Grid resolution on the fundamental domain.
    #[arg(long)]
    grid: Option<usize>,
    /// Add the origin (a fixed point of every rotation) to the grid.
    #[arg(long)]
    include_origin: bool,
    /// Drop grid points closer than this to the origin.
    #[arg(long)]
    min_radius: Option<f64>,
    /// Separation threshold for the orbit-gap check.
    #[arg(long)]
    delta0: Option<f64>,
    /// Points for the separation / non-contraction check (CSV); defaults to
    /// a coarse grid on the fundamental domain.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Failure carrying the process exit code and, for non-convergence, the
/// JSON line to print anyway.
struct Failure {
    code: u8,
    message: String,
    report: Option<Value>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NotConverged { .. } => 4,
            e if e.is_argument() => 2,
            e if e.is_resource() => 3,
            Error::Partial { source, .. } if source.is_argument() => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
            report: None,
        }
    }
}

fn arg_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
        report: None,
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| arg_failure(format!("missing required --{flag} (flag or config file)")))
}

fn parse<T: std::str::FromStr<Err = Error>>(text: &str) -> Result<T, Failure> {
    text.parse::<T>().map_err(Failure::from)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Estimate { which } => cmd_estimate(which),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Check(a) => cmd_check(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(report) = f.report {
                println!("{report}");
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Write through a temporary file in the target directory, then rename.
fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> symdiv::Result<()>,
) -> Result<(), Failure> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::from(Error::Io(e)))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(|e| Failure::from(Error::Io(e)))?;
    }
    tmp.persist(path)
        .map_err(|e| Failure::from(Error::Io(e.error)))?;
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<(), Failure> {
    let file: SampleFile = load(a.config.as_deref())?;
    let kind: SamplerKind = parse(&required(a.dist.or(file.dist), "dist")?)?;
    let n = required(a.n.or(file.n), "n")?;
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let out = a.out.or(file.out).unwrap_or_else(|| "-".into());
    let points = SamplerSpec::new(kind, seed).sample(n)?;
    if out == "-" {
        let stdout = std::io::stdout();
        io::write_points(stdout.lock(), &points)?;
    } else {
        write_atomic(Path::new(&out), |w| io::write_points(w, &points))?;
    }
    Ok(())
}

struct Inputs {
    p: EmpiricalMeasure,
    q: EmpiricalMeasure,
    group: GroupAction,
}

fn read_inputs(common: &CommonEstimate, file: &EstimateFile) -> Result<Inputs, Failure> {
    let group: GroupAction = parse(
        common
            .group
            .as_deref()
            .or(file.group.as_deref())
            .unwrap_or("trivial"),
    )?;
    let p = required(common.p.clone().or(file.p.clone()), "p")?;
    let q = required(common.q.clone().or(file.q.clone()), "q")?;
    Ok(Inputs {
        p: io::read_measure_file(p)?,
        q: io::read_measure_file(q)?,
        group,
    })
}

fn cmd_estimate(which: EstimateCommand) -> Result<(), Failure> {
    let line = match which {
        EstimateCommand::W1 {
            common,
            l,
            method,
            lp_tol,
        } => {
            let file: EstimateFile = load(common.config.as_deref())?;
            let cfg = W1Config {
                lipschitz_l: l.or(file.l).unwrap_or(1.0),
                method: parse(
                    method
                        .as_deref()
                        .or(file.method.as_deref())
                        .unwrap_or("auto"),
                )?,
                lp_tolerance: lp_tol.or(file.lp_tol).unwrap_or(0.0),
            };
            let inp = read_inputs(&common, &file)?;
            let report = w1_invariant_report(&inp.p, &inp.q, &inp.group, &cfg)?;
            json!({
                "divergence": "w1",
                "value": report.value,
                "diagnostics": {
                    "group": inp.group,
                    "L": cfg.lipschitz_l,
                    "method": report.method,
                    "atoms_p": report.atoms_p,
                    "atoms_q": report.atoms_q,
                    "pivots": report.pivots,
                },
            })
        }
        EstimateCommand::Mmd {
            common,
            kernel,
            path,
        } => {
            let file: EstimateFile = load(common.config.as_deref())?;
            let kernel: KernelSpec = parse(&required(kernel.or(file.kernel.clone()), "kernel")?)?;
            let inp = read_inputs(&common, &file)?;
            let path = match path.or(file.path.clone()) {
                Some(p) => parse::<MmdPath>(&p)?,
                None => MmdPath::default_for(inp.group.order()),
            };
            let value = mmd_invariant(&inp.p, &inp.q, &inp.group, &kernel, path)?;
            json!({
                "divergence": "mmd",
                "value": value,
                "diagnostics": {
                    "group": inp.group,
                    "kernel": kernel,
                    "path": path,
                    "atoms_p": inp.p.len(),
                    "atoms_q": inp.q.len(),
                },
            })
        }
        EstimateCommand::Falpha {
            common,
            alpha,
            l,
            tol,
            max_iters,
        } => {
            let file: EstimateFile = load(common.config.as_deref())?;
            let defaults = SolverConfig::default();
            let cfg = AlphaConfig {
                alpha: required(alpha.or(file.alpha), "alpha")?,
                lipschitz_l: l.or(file.l).unwrap_or(1.0),
                solver: SolverConfig {
                    max_iters: max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
                    tolerance: tol.or(file.tol).unwrap_or(defaults.tolerance),
                },
            };
            let inp = read_inputs(&common, &file)?;
            let diagnostics = |s: &symdiv::falpha::PotentialSolution, converged: bool| {
                json!({
                    "group": inp.group,
                    "alpha": cfg.alpha,
                    "L": cfg.lipschitz_l,
                    "converged": converged,
                    "iterations": s.iterations,
                    "gap": s.gap,
                    "feasibility_residual": s.feasibility_residual,
                    "support_size": s.values.len(),
                })
            };
            match dalpha_invariant(&inp.p, &inp.q, &inp.group, &cfg) {
                Ok((value, s)) => {
                    json!({"divergence": "falpha", "value": value, "diagnostics": diagnostics(&s, true)})
                }
                Err(e @ Error::NotConverged { .. }) => {
                    let report = match &e {
                        Error::NotConverged { best, .. } => json!({
                            "divergence": "falpha",
                            "value": best.objective,
                            "diagnostics": diagnostics(best, false),
                        }),
                        _ => unreachable!(),
                    };
                    let mut f = Failure::from(e);
                    f.report = Some(report);
                    return Err(f);
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    println!("{line}");
    Ok(())
}

fn file_slug(name: &ExperimentName) -> String {
    name.to_string().replace([':', '='], "-")
}

fn cmd_experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let file: ExperimentFile = load(a.config.as_deref())?;
    let name: ExperimentName = parse(&required(a.name.or(file.name), "name")?)?;
    let out_dir = required(a.out_dir.or(file.out_dir), "out-dir")?;
    let mut plan = ExperimentPlan::default_for(name, a.seed.or(file.seed).unwrap_or(0));
    if let Some(r) = a.replicas.or(file.replicas) {
        plan.replicas = r;
    }
    if let Some(o) = a.orders.or(file.orders) {
        plan.group_orders = o;
    }
    if let Some(s) = a.sizes.or(file.sizes) {
        plan.sizes = s;
    }
    let e = &mut plan.estimator;
    if let Some(l) = a.l.or(file.l) {
        e.lipschitz_l = l;
    }
    if let Some(alpha) = a.alpha.or(file.alpha) {
        e.alpha = alpha;
    }
    if let Some(std) = a.mog_std.or(file.mog_std) {
        e.mog_std = std;
    }
    if let Some(m) = a.method.or(file.method) {
        e.w1_method = parse::<W1Method>(&m)?;
    }
    if let Some(p) = a.path.or(file.path) {
        e.mmd_path = Some(parse::<MmdPath>(&p)?);
    }
    plan.validate()?;
    let jobs = a.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(arg_failure("--jobs must be at least 1"));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure {
            code: 1,
            message: e.to_string(),
            report: None,
        })?;
    let step = (plan.cells().len() / 20).max(1);
    let table = pool.install(|| {
        run_with_progress(&plan, |done, total| {
            if done % step == 0 || done == total {
                eprintln!("[{name}] {done}/{total} cells");
            }
        })
    })?;

    std::fs::create_dir_all(&out_dir).map_err(|e| Failure::from(Error::Io(e)))?;
    let slug = file_slug(&name);
    write_atomic(&out_dir.join(format!("{slug}_raw.csv")), |w| {
        table.write_raw(w)
    })?;
    write_atomic(&out_dir.join(format!("{slug}_aggregate.csv")), |w| {
        table.write_aggregate(w)
    })?;
    write_atomic(&out_dir.join(format!("{slug}_ratios.csv")), |w| {
        table.write_ratios(w)
    })?;
    if plan.sizes.len() >= 3 {
        for g in table.group_orders() {
            let line = match fit_rate(&table, g) {
                Ok(fit) => {
                    json!({"experiment": name.to_string(), "group_order": g, "rate_fit": fit})
                }
                Err(e) => {
                    json!({"experiment": name.to_string(), "group_order": g, "rate_fit": null, "error": e.to_string()})
                }
            };
            println!("{line}");
        }
    }
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Result<(), Failure> {
    let file: CheckFile = load(a.config.as_deref())?;
    let group: GroupAction = parse(&required(a.group.or(file.group), "group")?)?;
    let resolution = a.grid.or(file.grid).unwrap_or(64);
    if resolution == 0 {
        return Err(arg_failure("--grid must be at least 1"));
    }
    let include_origin = a.include_origin || file.include_origin.unwrap_or(false);
    let min_radius = a.min_radius.or(file.min_radius).unwrap_or(0.0);
    let delta0 = a.delta0.or(file.delta0).unwrap_or(1e-3);

    let mut grid = group.fundamental_grid(resolution, include_origin);
    if min_radius > 0.0 && group.dim() != Some(1) {
        grid.retain(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt() >= min_radius);
    }
    if grid.is_empty() {
        return Err(arg_failure("no grid points left after --min-radius"));
    }

    let samples = match a.samples.or(file.samples) {
        Some(path) => {
            let m = io::read_measure_file(path)?;
            m.atoms().map(|(x, _)| x.to_vec()).collect()
        }
        None => {
            let mut coarse = group.fundamental_grid(resolution.min(16), include_origin);
            if min_radius > 0.0 && group.dim() != Some(1) {
                coarse.retain(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt() >= min_radius);
            }
            coarse
        }
    };
    let a1 = check_assumption_a1(&group, &samples, delta0)?;
    let mut report = json!({
        "group": group,
        "order": group.order(),
        "grid_points": grid.len(),
        "delta0": delta0,
        "separation_ok": a1.separation_ok,
        "min_cross_orbit_gap": a1.min_cross_orbit_gap,
        "noncontraction_ok": a1.noncontraction_ok,
        "worst_contraction_ratio": a1.worst_contraction_ratio,
    });
    if let Some(k) = a.kernel.or(file.kernel) {
        let kernel: KernelSpec = parse(&k)?;
        let c = estimate_c_sigma_k(&group, &kernel, &grid)?;
        let big = c_big(group.order(), c.c)?;
        let extra = json!({
            "kernel": kernel,
            "c_sigma_k": c.c,
            "c_argmax": c.argmax,
            "c_element": c.element,
            "C_sigma_k": big,
            "trivial_group": c.trivial_group,
            "kernel_assumption_violated": c.fixed_point,
        });
        if let (Value::Object(r), Value::Object(e)) = (&mut report, extra) {
            r.extend(e);
        }
    }
    println!("{report}");
    Ok(())
}
