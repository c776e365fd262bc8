use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use multisweep::generators::{
    chain_tree, random_nonconvex_problem, random_quadratic_problem, random_tree,
    scalar_average_problem, six_node_tree, star_tree, InstanceSpec,
};
use multisweep::oracle::CentralizedOptions;
use multisweep::power::{case33, default_estimation, load_grid};
use multisweep::rng::substream;
use multisweep::sim::{read_trace_csv, write_events_jsonl, write_report_json, write_trace_csv};
use multisweep::verify::{self, DEFAULT_SEED};
use multisweep::{
    centralized_solve, convergence_trace, fit_order, run, Algorithm, DelayLaw, HessianMode, Mode,
    NodeId, RootSchedule, RunStatus, SimConfig, Tree, TreeProblem,
};

const SCHEMAS: &str = "File formats:
  problem files  schema \"multisweep-problem/1\"
  grid files     schema \"multisweep-grid/1\"

Outputs of `run`: trace.csv (sweep,error,ticks,messages), report.json, events.jsonl.
Exit codes: 0 converged, 2 budget exhausted, 1 error.";

#[derive(Parser)]
#[command(name = "multisweep", version, about = "Decentralized multi-sweep optimization over tree graphs", after_help = SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run and write trace.csv, report.json and events.jsonl.
    #[command(after_help = SCHEMAS)]
    Run(Box<RunArgs>),
    /// Print per-sweep errors of a trace and the fitted convergence order.
    Analyze(AnalyzeArgs),
    /// Run acceptance criteria (all when none are given).
    Verify(VerifyArgs),
    /// Write a problem in the multisweep-problem/1 format.
    #[command(after_help = SCHEMAS)]
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    Alg1,
    Alg2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sync,
    Async,
}

#[derive(Clone, Copy, ValueEnum)]
enum HessianArg {
    Exact,
    GaussNewton,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    /// Random strictly convex quadratics.
    Quadratic,
    /// Quadratics plus cosine terms.
    Nonconvex,
    /// `(x_i − i)²` with scalar couplings.
    Average,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ReferenceArg {
    Central,
    None,
}

#[derive(clap::Args)]
struct ProblemArgs {
    /// Problem file, `grid:PATH`, or a builtin: six-node, chain:N, star:N, random-tree:N:SEED, case33.
    #[arg(long, default_value = "six-node")]
    problem: String,
    /// Node objectives for builtin topologies.
    #[arg(long, value_enum, default_value = "quadratic")]
    objective: ObjectiveArg,
    /// Condition number of generated node Hessians.
    #[arg(long, default_value_t = 10.0)]
    cond: f64,
    /// Largest generated node dimension.
    #[arg(long, default_value_t = 5)]
    max_dim: usize,
    /// Largest generated coupling dimension.
    #[arg(long, default_value_t = 2)]
    max_coupling: usize,
    /// Cosine amplitude of nonconvex objectives, relative to the smallest eigenvalue.
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    /// Seed of generated objectives and of grid measurement noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "alg2")]
    alg: AlgArg,
    /// Root node of alg1.
    #[arg(long, required_if_eq("alg", "alg1"))]
    root: Option<usize>,
    #[arg(long, value_enum, default_value = "sync")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "exact")]
    hessian: HessianArg,
    /// Cubic regularization weight of the value models.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Stop when a sweep changes no entry by more than this.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 5_000_000)]
    max_events: u64,
    /// Ticks between synchronous rounds.
    #[arg(long, default_value_t = 10)]
    delta: u64,
    /// Smallest asynchronous message delay in ticks.
    #[arg(long, default_value_t = 5)]
    delay_min: u64,
    /// Largest asynchronous message delay in ticks.
    #[arg(long, default_value_t = 15)]
    delay_max: u64,
    /// Give every directed edge a fixed extra latency.
    #[arg(long)]
    skewed: bool,
    /// Network seed; defaults to --seed.
    #[arg(long)]
    sim_seed: Option<u64>,
    /// Point the trace errors are measured against.
    #[arg(long, value_enum, default_value = "central")]
    reference: ReferenceArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// A trace.csv written by `run`.
    trace: PathBuf,
    /// Errors at or below this count as converged.
    #[arg(long, default_value_t = multisweep::analysis::DEFAULT_FLOOR)]
    floor: f64,
    /// Errors at or above this are outside the local regime.
    #[arg(long, default_value_t = multisweep::analysis::DEFAULT_CEILING)]
    ceiling: f64,
    /// Largest number of error pairs in the fit.
    #[arg(long, default_value_t = multisweep::analysis::DEFAULT_PAIRS)]
    pairs: usize,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Criterion numbers, 1 to 9.
    criteria: Vec<u8>,
    /// Instance seed of the randomized criteria.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(clap::Args)]
struct ExportArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn builtin_tree(spec: &str) -> Result<Option<Tree>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(anyhow!("bad node count {s:?} in {spec:?}")),
    };
    let tree = match parts.as_slice() {
        ["six-node"] => six_node_tree(),
        ["chain", n] => chain_tree(num(n)?),
        ["star", n] => star_tree(num(n)?),
        ["random-tree", n, seed] => {
            let seed: u64 = seed
                .parse()
                .with_context(|| format!("bad seed in {spec:?}"))?;
            random_tree(num(n)?, &mut substream(seed, "topology"))
        }
        _ => return Ok(None),
    };
    Ok(Some(tree))
}

fn load_problem(args: &ProblemArgs) -> Result<TreeProblem> {
    if args.problem == "case33" {
        return Ok(default_estimation(&case33(), args.seed)?.0.problem);
    }
    if let Some(path) = args.problem.strip_prefix("grid:") {
        let grid = load_grid(path).with_context(|| format!("loading grid {path}"))?;
        return Ok(default_estimation(&grid, args.seed)?.0.problem);
    }
    if let Some(tree) = builtin_tree(&args.problem)? {
        let spec = InstanceSpec {
            max_dim: args.max_dim,
            max_coupling: args.max_coupling,
            cond: args.cond,
        };
        if spec.max_dim == 0 || spec.max_coupling == 0 || !(spec.cond >= 1.0) {
            bail!("--max-dim and --max-coupling must be positive and --cond at least 1");
        }
        let mut rng = substream(args.seed, "instance");
        return Ok(match args.objective {
            ObjectiveArg::Quadratic => random_quadratic_problem(&tree, spec, &mut rng),
            ObjectiveArg::Nonconvex => {
                random_nonconvex_problem(&tree, spec, args.amplitude, &mut rng)
            }
            ObjectiveArg::Average => scalar_average_problem(&tree),
        });
    }
    let path = Path::new(&args.problem);
    if !path.exists() {
        bail!("unknown problem {:?}: not a file or builtin", args.problem);
    }
    TreeProblem::load(path).with_context(|| format!("loading problem {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let problem = load_problem(&args.problem)?;
    let algorithm = match args.alg {
        AlgArg::Alg2 => Algorithm::Alg2,
        AlgArg::Alg1 => {
            let root = NodeId(
                args.root
                    .ok_or_else(|| anyhow!("--alg alg1 requires --root"))?,
            );
            if !problem.tree().contains(root) {
                bail!("root {root} is not a node of the problem");
            }
            Algorithm::Alg1(RootSchedule::fixed(&problem, root))
        }
    };
    let mut cfg = SimConfig {
        mode: match args.mode {
            ModeArg::Sync => Mode::Sync,
            ModeArg::Async => Mode::Async,
        },
        seed: args.sim_seed.unwrap_or(args.problem.seed),
        delta: args.delta,
        delays: DelayLaw {
            min: args.delay_min,
            max: args.delay_max,
            skewed: args.skewed,
        },
        max_sweeps: args.max_sweeps,
        max_events: args.max_events,
        tol: args.tol,
        ..SimConfig::default()
    };
    cfg.model.sigma = args.sigma;
    cfg.model.hessian_mode = match args.hessian {
        HessianArg::Exact => HessianMode::Exact,
        HessianArg::GaussNewton => HessianMode::GaussNewton,
    };
    let reference = match args.reference {
        ReferenceArg::Central => {
            Some(centralized_solve(&problem, &CentralizedOptions::default())?.x)
        }
        ReferenceArg::None => None,
    };
    let report = run(&problem, &algorithm, &cfg)?;
    let trace = convergence_trace(&report, reference.as_ref());

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_trace_csv(create(&args.out.join("trace.csv"))?, &trace)?;
    write_report_json(create(&args.out.join("report.json"))?, &report)?;
    write_events_jsonl(create(&args.out.join("events.jsonl"))?, &report.events)?;

    let status = serde_json::to_value(report.status)?;
    let error = trace
        .last()
        .and_then(|p| p.error)
        .map(|e| format!(", final error {e:.3e}"))
        .unwrap_or_default();
    println!(
        "{} {}: {} after {} sweeps, {} ticks, {} messages{error}",
        report.algorithm,
        args.problem.problem,
        status.as_str().unwrap_or("unknown"),
        report.sweeps_completed,
        report.ticks_elapsed,
        report.messages_sent
    );
    Ok(match report.status {
        RunStatus::Converged => ExitCode::SUCCESS,
        RunStatus::BudgetExhausted => ExitCode::from(2),
        RunStatus::Stalled => {
            eprintln!("error: the run stalled before completing a sweep");
            ExitCode::FAILURE
        }
    })
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.trace)
        .with_context(|| format!("reading {}", args.trace.display()))?;
    let trace = read_trace_csv(&text).map_err(|e| anyhow!("{}: {e}", args.trace.display()))?;
    let errors: Vec<f64> = trace
        .iter()
        .map(|p| {
            p.error.ok_or_else(|| {
                anyhow!(
                    "sweep {} has no error; run with --reference central",
                    p.sweep
                )
            })
        })
        .collect::<Result<_>>()?;
    println!(
        "{:>6} {:>14} {:>10} {:>10}",
        "sweep", "error", "ticks", "messages"
    );
    for p in &trace {
        println!(
            "{:>6} {:>14.6e} {:>10} {:>10}",
            p.sweep,
            p.error.unwrap_or(f64::NAN),
            p.ticks,
            p.messages
        );
    }
    let fit = fit_order(&errors, args.floor, args.ceiling, args.pairs)?;
    let used: Vec<usize> = fit.sweeps.iter().map(|&k| trace[k].sweep).collect();
    println!(
        "order {:.4} (intercept {:.4}) over sweeps {used:?}",
        fit.order, fit.intercept
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let ids: Vec<u8> = if args.criteria.is_empty() {
        verify::CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        args.criteria.clone()
    };
    let mut failed = 0;
    for id in ids {
        let outcome = verify::check(id, args.seed)?;
        println!(
            "criterion {} {}: {}: {}",
            outcome.criterion,
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.title,
            outcome.summary
        );
        failed += usize::from(!outcome.passed);
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_export(args: &ExportArgs) -> Result<ExitCode> {
    let json = load_problem(&args.problem)?.to_json()?;
    match &args.out {
        Some(path) => {
            fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Export(args) => cmd_export(args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
