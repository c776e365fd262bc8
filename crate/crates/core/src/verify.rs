//! Experiments behind the acceptance criteria.
//!
//! Each experiment returns its raw measurements; [`check`] compares them with
//! the published tolerances. Instances are drawn from labeled substreams of
//! one experiment seed.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{fit_order_default, AnalysisError, RateFit};
use crate::generators::{
    random_nonconvex_problem, random_quadratic_problem, random_spd, random_tree,
    scalar_average_problem, six_node_tree, InstanceSpec,
};
use crate::linalg::{inf_norm, Mat, Vector};
use crate::local::{sensitivity, LocalError, LocalObjective, SolverOptions};
use crate::model::ValueModel;
use crate::oracle::{
    brute_force_value, centralized_solve, exact_dp_quadratic, exact_value_functions,
    CentralizedOptions, OracleError,
};
use crate::power::{case33, default_estimation, PowerError};
use crate::problem::{HessianMode, TreeProblem};
use crate::protocol::RootSchedule;
use crate::rng::{substream, StreamRng};
use crate::sim::{
    convergence_trace, run_async, run_sync, write_events_jsonl, write_report_json, write_trace_csv,
    Algorithm, DelayLaw, Mode, RunStatus, SimConfig, SimError,
};
use crate::tree::NodeId;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

pub const ONE_SWEEP_TOL: f64 = 1e-8;
pub const ONE_SWEEP_SECONDS: f64 = 10.0;
pub const EQUIVALENCE_TOL: f64 = 1e-12;
pub const EQUALITY_TOL: f64 = 1e-8;
pub const BOUND_SLACK: f64 = 1e-10;
/// Relative Hessian shift of the inflated and deflated models.
pub const BOUND_SHIFT: f64 = 1e-2;
pub const EXACT_ORDER: (f64, f64) = (1.7, 2.3);
pub const GAUSS_NEWTON_ORDER: (f64, f64) = (0.9, 1.2);
pub const AGREEMENT_TOL: f64 = 1e-6;
pub const AGREEMENT_SECONDS: f64 = 60.0;
pub const MIN_SWEEPS: usize = 5;
pub const GRAD_REL_TOL: f64 = 1e-5;
pub const HESS_REL_TOL: f64 = 1e-3;

/// Measurement and simulator seed of the 33-bus rate experiment.
pub const CASE33_RATE_SEED: u64 = 7;
/// Cubic coefficient of the 33-bus rate experiment.
pub const CASE33_RATE_SIGMA: f64 = 10.0;
pub const CASE33_RATE_SWEEPS: usize = 30;

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "quadratic one-sweep exactness"),
    (2, "first-sweep run time 2Dδ"),
    (3, "central-node parity"),
    (4, "synchronous equivalence of the two algorithms"),
    (5, "bound conservation"),
    (6, "local convergence order on the 33-bus case"),
    (7, "decentralized equals centralized on the 33-bus case"),
    (8, "asynchronous determinism and liveness"),
    (9, "sensitivity accuracy"),
];

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown criterion {0}; expected 1 to 9")]
    UnknownCriterion(u8),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("serialization failed: {0}")]
    Io(#[from] std::io::Error),
}

fn quiet(cfg: SimConfig) -> SimConfig {
    SimConfig {
        record_events: false,
        ..cfg
    }
}

fn budget(max_sweeps: usize) -> SimConfig {
    quiet(SimConfig {
        max_sweeps,
        tol: 0.0,
        ..SimConfig::default()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OneSweep {
    pub instances: usize,
    pub max_error: f64,
    /// Instances whose first sweep did not complete.
    pub incomplete: usize,
    pub seconds: f64,
}

/// Rooted method, one sweep, exact quadratic models, against the quadratic DP.
pub fn one_sweep_exactness(seed: u64) -> Result<OneSweep, VerifyError> {
    let mut rng = substream(seed, "verify/one-sweep");
    let start = Instant::now();
    let mut out = OneSweep {
        instances: 100,
        max_error: 0.0,
        incomplete: 0,
        seconds: 0.0,
    };
    for _ in 0..out.instances {
        let n = rng.random_range(1..=20);
        let tree = random_tree(n, &mut rng);
        let problem = random_quadratic_problem(&tree, InstanceSpec::default(), &mut rng);
        let root = NodeId(rng.random_range(1..=n));
        let report = run_sync(
            &problem,
            &Algorithm::Alg1(RootSchedule::fixed(&problem, root)),
            &budget(1),
        )?;
        let dp = exact_dp_quadratic(&problem, root)?;
        match report.snapshots.get(1) {
            Some(x) if report.sweeps_completed == 1 => {
                out.max_error = out.max_error.max(x.max_abs_diff(&dp.x))
            }
            _ => out.incomplete += 1,
        }
    }
    out.seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunTime {
    pub trees: usize,
    pub runs: usize,
    /// Runs whose first sweep did not finish at exactly `2·depth·δ`.
    pub mismatches: usize,
    pub delta: u64,
    pub six_node_root1: u64,
    pub six_node_root2: u64,
}

fn first_sweep_ticks(
    problem: &TreeProblem,
    root: NodeId,
    cfg: &SimConfig,
) -> Result<Option<u64>, VerifyError> {
    let report = run_sync(
        problem,
        &Algorithm::Alg1(RootSchedule::fixed(problem, root)),
        cfg,
    )?;
    Ok(report.sweeps.first().map(|s| s.ticks))
}

/// First synchronous sweep of the rooted method for every root of 50 trees.
pub fn run_time(seed: u64) -> Result<RunTime, VerifyError> {
    let mut rng = substream(seed, "verify/run-time");
    let cfg = budget(1);
    let mut out = RunTime {
        trees: 50,
        runs: 0,
        mismatches: 0,
        delta: cfg.delta,
        six_node_root1: 0,
        six_node_root2: 0,
    };
    for _ in 0..out.trees {
        let n = rng.random_range(2..=30);
        let tree = random_tree(n, &mut rng);
        let problem = scalar_average_problem(&tree);
        for root in tree.nodes() {
            out.runs += 1;
            let expected = 2 * tree.depth_from(root) as u64 * cfg.delta;
            if first_sweep_ticks(&problem, root, &cfg)? != Some(expected) {
                out.mismatches += 1;
            }
        }
    }
    let six_node = scalar_average_problem(&six_node_tree());
    out.six_node_root1 = first_sweep_ticks(&six_node, NodeId(1), &cfg)?.unwrap_or(0);
    out.six_node_root2 = first_sweep_ticks(&six_node, NodeId(2), &cfg)?.unwrap_or(0);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Parity {
    pub trees: usize,
    pub single: usize,
    pub adjacent_pairs: usize,
    pub violations: usize,
    pub six_node_central: Vec<NodeId>,
}

/// Number and adjacency of central nodes on 500 random trees.
pub fn parity(seed: u64) -> Parity {
    let mut rng = substream(seed, "verify/parity");
    let mut out = Parity {
        trees: 500,
        single: 0,
        adjacent_pairs: 0,
        violations: 0,
        six_node_central: Vec::new(),
    };
    for _ in 0..out.trees {
        let n = rng.random_range(1..=60);
        let tree = random_tree(n, &mut rng);
        let gamma: Vec<NodeId> = tree.central_nodes().into_iter().collect();
        match gamma.as_slice() {
            [_] => out.single += 1,
            [a, b] if tree.has_edge(*a, *b) => out.adjacent_pairs += 1,
            _ => out.violations += 1,
        }
    }
    out.six_node_central = six_node_tree().central_nodes().into_iter().collect();
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Equivalence {
    pub quadratic: usize,
    pub nonconvex: usize,
    pub sweeps_per_run: usize,
    pub max_diff: f64,
    /// Runs where the two methods completed different numbers of sweeps.
    pub sweep_mismatches: usize,
    /// Sweeps rooted outside the central set.
    pub off_center_roots: usize,
}

/// Synchronous simultaneous method against the rooted method replaying its roots.
pub fn sync_equivalence(seed: u64) -> Result<Equivalence, VerifyError> {
    let mut rng = substream(seed, "verify/equivalence");
    let cfg = budget(6);
    let mut out = Equivalence {
        quadratic: 20,
        nonconvex: 5,
        sweeps_per_run: cfg.max_sweeps,
        max_diff: 0.0,
        sweep_mismatches: 0,
        off_center_roots: 0,
    };
    for k in 0..out.quadratic + out.nonconvex {
        let n = rng.random_range(2..=15);
        let tree = random_tree(n, &mut rng);
        let problem = if k < out.quadratic {
            random_quadratic_problem(&tree, InstanceSpec::default(), &mut rng)
        } else {
            random_nonconvex_problem(&tree, InstanceSpec::default(), 1.5, &mut rng)
        };
        let alg2 = run_sync(&problem, &Algorithm::Alg2, &cfg)?;
        let central = tree.central_nodes();
        out.off_center_roots += alg2
            .root_history
            .iter()
            .filter(|r| !central.contains(r))
            .count();
        if alg2.root_history.is_empty() {
            out.sweep_mismatches += 1;
            continue;
        }
        let schedule = RootSchedule::per_sweep(&problem, &alg2.root_history);
        let alg1 = run_sync(&problem, &Algorithm::Alg1(schedule), &cfg)?;
        if alg1.sweeps_completed != alg2.sweeps_completed {
            out.sweep_mismatches += 1;
        }
        for (a, b) in alg1.snapshots.iter().zip(&alg2.snapshots) {
            out.max_diff = out.max_diff.max(a.max_abs_diff(b));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Bounds {
    pub problems: usize,
    pub samples: usize,
    /// `max |W − V| / (1 + |V|)` over first-sweep messages with exact models.
    pub equality_max_err: f64,
    /// `min (W − V)` over inflated models; nonnegative when the bound holds.
    pub upper_min_slack: f64,
    /// `max (W − V)` over deflated models; nonpositive when the bound holds.
    pub lower_max_slack: f64,
}

fn gaussian(n: usize, rng: &mut StreamRng) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Signed gaps `W(p) − V(p)` of every exchanged model at random probes.
fn model_gaps(
    problem: &TreeProblem,
    root: NodeId,
    shift: f64,
    sweeps: usize,
    probes: usize,
    rng: &mut StreamRng,
) -> Result<Vec<(f64, f64)>, VerifyError> {
    let exact = exact_value_functions(problem)?;
    let mut cfg = SimConfig {
        record_messages: true,
        ..budget(sweeps)
    };
    cfg.model.hessian_shift = shift;
    let report = run_sync(
        problem,
        &Algorithm::Alg1(RootSchedule::fixed(problem, root)),
        &cfg,
    )?;
    let mut gaps = Vec::new();
    for msg in &report.messages {
        let v = exact.get(msg.from, msg.to);
        for _ in 0..probes {
            let p = &msg.model.anchor + gaussian(msg.model.dim(), rng);
            let vp = v.eval(&p);
            gaps.push((msg.model.value_unchecked(&p) - vp, vp));
        }
    }
    Ok(gaps)
}

/// Exact, inflated and deflated models against the exact value functions.
pub fn bound_conservation(seed: u64) -> Result<Bounds, VerifyError> {
    let mut rng = substream(seed, "verify/bounds");
    let probes = 20;
    let mut out = Bounds {
        problems: 10,
        samples: 0,
        equality_max_err: 0.0,
        upper_min_slack: f64::INFINITY,
        lower_max_slack: f64::NEG_INFINITY,
    };
    for _ in 0..out.problems {
        let n = rng.random_range(2..=15);
        let tree = random_tree(n, &mut rng);
        let problem = random_quadratic_problem(&tree, InstanceSpec::default(), &mut rng);
        let root = NodeId(rng.random_range(1..=n));
        for (gap, v) in model_gaps(&problem, root, 0.0, 1, probes, &mut rng)? {
            out.equality_max_err = out.equality_max_err.max(gap.abs() / (1.0 + v.abs()));
        }
        for (gap, _) in model_gaps(&problem, root, BOUND_SHIFT, 3, probes, &mut rng)? {
            out.upper_min_slack = out.upper_min_slack.min(gap);
            out.samples += 1;
        }
        for (gap, _) in model_gaps(&problem, root, -BOUND_SHIFT, 3, probes, &mut rng)? {
            out.lower_max_slack = out.lower_max_slack.max(gap);
            out.samples += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Rate {
    pub seed: u64,
    pub sigma: f64,
    pub exact: RateFit,
    pub gauss_newton: RateFit,
    pub exact_errors: Vec<f64>,
    pub gauss_newton_errors: Vec<f64>,
}

/// Distance to the centralized optimum per sweep of the synchronous
/// simultaneous method on the shipped 33-bus case.
pub fn case33_errors(
    seed: u64,
    mode: HessianMode,
    sigma: f64,
    sweeps: usize,
) -> Result<Vec<f64>, VerifyError> {
    let (est, _) = default_estimation(&case33(), seed)?;
    let reference = centralized_solve(&est.problem, &CentralizedOptions::default())?;
    let mut cfg = SimConfig {
        seed,
        ..budget(sweeps)
    };
    cfg.model.hessian_mode = mode;
    cfg.model.sigma = sigma;
    let report = run_sync(&est.problem, &Algorithm::Alg2, &cfg)?;
    Ok(convergence_trace(&report, Some(&reference.x))
        .iter()
        .filter_map(|p| p.error)
        .collect())
}

/// Fitted order with exact and Gauss-Newton Hessians.
pub fn local_rate() -> Result<Rate, VerifyError> {
    let (seed, sigma) = (CASE33_RATE_SEED, CASE33_RATE_SIGMA);
    let exact_errors = case33_errors(seed, HessianMode::Exact, sigma, CASE33_RATE_SWEEPS)?;
    let gauss_newton_errors =
        case33_errors(seed, HessianMode::GaussNewton, sigma, CASE33_RATE_SWEEPS)?;
    Ok(Rate {
        seed,
        sigma,
        exact: fit_order_default(&exact_errors)?,
        gauss_newton: fit_order_default(&gauss_newton_errors)?,
        exact_errors,
        gauss_newton_errors,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementRun {
    pub seed: u64,
    pub status: RunStatus,
    pub sweeps: usize,
    pub error: f64,
    pub seconds: f64,
}

/// Asynchronous simultaneous method on the 33-bus case for seeds 0 to 9;
/// the seed drives both the measurement noise and the network.
pub fn case33_agreement() -> Result<Vec<AgreementRun>, VerifyError> {
    let grid = case33();
    let mut runs = Vec::new();
    for seed in 0..10 {
        let (est, _) = default_estimation(&grid, seed)?;
        let reference = centralized_solve(&est.problem, &CentralizedOptions::default())?;
        let start = Instant::now();
        let cfg = quiet(SimConfig {
            mode: Mode::Async,
            seed,
            ..SimConfig::default()
        });
        let report = run_async(&est.problem, &Algorithm::Alg2, &cfg)?;
        runs.push(AgreementRun {
            seed,
            status: report.status,
            sweeps: report.sweeps_completed,
            error: report.final_snapshot().max_abs_diff(&reference.x),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(runs)
}

#[derive(Debug, Clone, Serialize)]
pub struct Liveness {
    pub replays: usize,
    pub identical_replays: usize,
    pub runs: usize,
    pub min_sweeps: usize,
    pub stalled: usize,
    pub protocol_violations: u64,
}

fn artifacts(problem: &TreeProblem, cfg: &SimConfig) -> Result<Vec<u8>, VerifyError> {
    let report = run_async(problem, &Algorithm::Alg2, cfg)?;
    let mut bytes = Vec::new();
    write_report_json(&mut bytes, &report)?;
    write_events_jsonl(&mut bytes, &report.events)?;
    write_trace_csv(&mut bytes, &convergence_trace(&report, None))?;
    Ok(bytes)
}

fn async_instance(rng: &mut StreamRng, k: usize) -> (TreeProblem, SimConfig) {
    let n = rng.random_range(2..=30);
    let tree = random_tree(n, rng);
    let problem = random_quadratic_problem(&tree, InstanceSpec::default(), rng);
    let seed = rng.random();
    let delays = DelayLaw {
        skewed: k % 2 == 1,
        ..DelayLaw::default()
    };
    (
        problem,
        SimConfig {
            mode: Mode::Async,
            seed,
            delays,
            max_sweeps: MIN_SWEEPS,
            tol: 0.0,
            ..SimConfig::default()
        },
    )
}

/// Byte-level replays and 200 bounded asynchronous runs.
pub fn async_determinism_liveness(seed: u64) -> Result<Liveness, VerifyError> {
    let mut rng = substream(seed, "verify/async");
    let mut out = Liveness {
        replays: 10,
        identical_replays: 0,
        runs: 200,
        min_sweeps: usize::MAX,
        stalled: 0,
        protocol_violations: 0,
    };
    for k in 0..out.replays {
        let (problem, cfg) = async_instance(&mut rng, k);
        if artifacts(&problem, &cfg)? == artifacts(&problem, &cfg)? {
            out.identical_replays += 1;
        }
    }
    for k in 0..out.runs {
        let (problem, cfg) = async_instance(&mut rng, k);
        let report = run_async(&problem, &Algorithm::Alg2, &quiet(cfg))?;
        out.min_sweeps = out.min_sweeps.min(report.sweeps_completed);
        if report.status == RunStatus::Stalled {
            out.stalled += 1;
        }
        out.protocol_violations += report.double_fire_violations + report.fifo_violations;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Sensitivity {
    pub instances: usize,
    pub max_value_rel: f64,
    pub max_grad_rel: f64,
    pub max_hess_rel: f64,
}

fn random_model(dim: usize, rng: &mut StreamRng) -> ValueModel {
    let sigma = if rng.random::<bool>() {
        0.0
    } else {
        0.5 * rng.random::<f64>()
    };
    ValueModel {
        h: random_spd(dim, 5.0, rng),
        g: gaussian(dim, rng),
        sigma,
        anchor: gaussian(dim, rng) * 2.0,
        offset: 0.0,
    }
}

fn rel(diff: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        diff
    } else {
        diff / reference
    }
}

/// Sensitivity of one node's parametric problem against central differences
/// of a brute-force parametric minimization.
pub fn sensitivity_accuracy(seed: u64) -> Result<Sensitivity, VerifyError> {
    let mut rng = substream(seed, "verify/sensitivity");
    let spec = InstanceSpec {
        max_dim: 5,
        max_coupling: 2,
        cond: 10.0,
    };
    let opts = SolverOptions::default();
    let (hg, hh) = (1e-4, 1e-3);
    let mut out = Sensitivity {
        instances: 50,
        max_value_rel: 0.0,
        max_grad_rel: 0.0,
        max_hess_rel: 0.0,
    };
    let mut done = 0;
    while done < out.instances {
        let n = rng.random_range(2..=6);
        let tree = random_tree(n, &mut rng);
        let problem = random_nonconvex_problem(&tree, spec, 0.8, &mut rng);
        let i = NodeId(rng.random_range(1..=n));
        let nbrs = tree.neighbors(i);
        let k = nbrs[rng.random_range(0..nbrs.len())];
        let s = problem.coupling(i, k);
        if s.nrows() >= problem.dim(i) {
            // the constraint pins y; nothing to minimize
            continue;
        }
        done += 1;
        let models: BTreeMap<NodeId, ValueModel> = nbrs
            .iter()
            .filter(|&&j| j != k)
            .map(|&j| (j, random_model(problem.coupling_dim(i, j), &mut rng)))
            .collect();
        let y0 = gaussian(problem.dim(i), &mut rng);
        let p_bar = s * &y0;
        let sens = sensitivity(
            &problem,
            i,
            &models,
            k,
            &p_bar,
            &y0,
            HessianMode::Exact,
            &opts,
        )?;
        let f = LocalObjective {
            objective: problem.objective(i),
            terms: models
                .iter()
                .map(|(&j, w)| (problem.coupling(i, j), w))
                .collect(),
            mode: HessianMode::Exact,
        };
        let m = p_bar.len();
        let unit = |a: usize| Vector::from_fn(m, |r, _| if r == a { 1.0 } else { 0.0 });
        let omega = |ps: &[Vector]| brute_force_value(&f, s, ps, &sens.y);
        let v0 = omega(std::slice::from_ref(&p_bar))[0];
        out.max_value_rel = out
            .max_value_rel
            .max(rel((sens.value - v0).abs(), v0.abs()));
        let mut grad = Vector::zeros(m);
        let mut hess = Mat::zeros(m, m);
        for a in 0..m {
            let ea = unit(a);
            let g = omega(&[&p_bar + &ea * hg, &p_bar - &ea * hg]);
            grad[a] = (g[0] - g[1]) / (2.0 * hg);
            for b in 0..m {
                let eb = unit(b);
                let v = omega(&[
                    &p_bar + (&ea + &eb) * hh,
                    &p_bar + (&ea - &eb) * hh,
                    &p_bar - (&ea - &eb) * hh,
                    &p_bar - (&ea + &eb) * hh,
                ]);
                hess[(a, b)] = (v[0] - v[1] - v[2] + v[3]) / (4.0 * hh * hh);
            }
        }
        out.max_grad_rel = out
            .max_grad_rel
            .max(rel(inf_norm(&(&sens.grad - &grad)), inf_norm(&grad)));
        out.max_hess_rel = out
            .max_hess_rel
            .max(rel((&sens.hess - &hess).amax(), hess.amax()));
    }
    Ok(out)
}

/// Verdict for one criterion.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub criterion: u8,
    pub title: &'static str,
    pub passed: bool,
    pub summary: String,
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&x)
}

/// Runs criterion `id` with instance seed `seed`.
pub fn check(id: u8, seed: u64) -> Result<Outcome, VerifyError> {
    let title = CRITERIA
        .iter()
        .find(|(c, _)| *c == id)
        .ok_or(VerifyError::UnknownCriterion(id))?
        .1;
    let (passed, summary) = match id {
        1 => {
            let r = one_sweep_exactness(seed)?;
            (
                r.incomplete == 0 && r.max_error < ONE_SWEEP_TOL && r.seconds < ONE_SWEEP_SECONDS,
                format!(
                    "{} instances, max error {:.2e}, {} incomplete, {:.2} s",
                    r.instances, r.max_error, r.incomplete, r.seconds
                ),
            )
        }
        2 => {
            let r = run_time(seed)?;
            (
                r.mismatches == 0 && r.six_node_root1 == 6 * r.delta && r.six_node_root2 == 4 * r.delta,
                format!(
                    "{} runs on {} trees, {} mismatches; six-node tree: {} ticks from root 1, {} from root 2 (δ = {})",
                    r.runs, r.trees, r.mismatches, r.six_node_root1, r.six_node_root2, r.delta
                ),
            )
        }
        3 => {
            let r = parity(seed);
            (
                r.violations == 0 && r.six_node_central == [NodeId(2), NodeId(4)],
                format!(
                    "{} trees: {} single, {} adjacent pairs, {} violations; six-node tree center {:?}",
                    r.trees,
                    r.single,
                    r.adjacent_pairs,
                    r.violations,
                    r.six_node_central.iter().map(|n| n.0).collect::<Vec<_>>()
                ),
            )
        }
        4 => {
            let r = sync_equivalence(seed)?;
            (
                r.max_diff <= EQUIVALENCE_TOL && r.sweep_mismatches == 0 && r.off_center_roots == 0,
                format!(
                    "{}+{} problems, max difference {:.2e}, {} sweep-count mismatches, {} off-center roots",
                    r.quadratic, r.nonconvex, r.max_diff, r.sweep_mismatches, r.off_center_roots
                ),
            )
        }
        5 => {
            let r = bound_conservation(seed)?;
            (
                r.equality_max_err <= EQUALITY_TOL && r.upper_min_slack >= -BOUND_SLACK && r.lower_max_slack <= BOUND_SLACK,
                format!(
                    "exact models max error {:.2e}; upper min slack {:.2e}; lower max slack {:.2e}; {} samples",
                    r.equality_max_err, r.upper_min_slack, r.lower_max_slack, r.samples
                ),
            )
        }
        6 => {
            let r = local_rate()?;
            (
                within(r.exact.order, EXACT_ORDER)
                    && within(r.gauss_newton.order, GAUSS_NEWTON_ORDER),
                format!(
                    "exact order {:.3} over sweeps {:?}; Gauss-Newton order {:.3} over sweeps {:?}",
                    r.exact.order, r.exact.sweeps, r.gauss_newton.order, r.gauss_newton.sweeps
                ),
            )
        }
        7 => {
            let runs = case33_agreement()?;
            let worst = runs.iter().map(|r| r.error).fold(0.0, f64::max);
            let slowest = runs.iter().map(|r| r.seconds).fold(0.0, f64::max);
            let converged = runs
                .iter()
                .filter(|r| r.status == RunStatus::Converged)
                .count();
            (
                worst <= AGREEMENT_TOL && slowest < AGREEMENT_SECONDS && converged == runs.len(),
                format!(
                    "{converged}/{} converged, max error {worst:.2e}, slowest {slowest:.2} s",
                    runs.len()
                ),
            )
        }
        8 => {
            let r = async_determinism_liveness(seed)?;
            (
                r.identical_replays == r.replays && r.min_sweeps >= MIN_SWEEPS && r.stalled == 0 && r.protocol_violations == 0,
                format!(
                    "{}/{} identical replays; {} runs, min sweeps {}, {} stalled, {} protocol violations",
                    r.identical_replays, r.replays, r.runs, r.min_sweeps, r.stalled, r.protocol_violations
                ),
            )
        }
        9 => {
            let r = sensitivity_accuracy(seed)?;
            (
                r.max_grad_rel < GRAD_REL_TOL && r.max_hess_rel < HESS_REL_TOL,
                format!(
                    "{} instances, value rel {:.1e}, gradient rel {:.1e}, Hessian rel {:.1e}",
                    r.instances, r.max_value_rel, r.max_grad_rel, r.max_hess_rel
                ),
            )
        }
        _ => unreachable!("id validated above"),
    };
    Ok(Outcome {
        criterion: id,
        title,
        passed,
        summary,
    })
}
