//! Benchmark fixtures.

use std::collections::BTreeMap;

use multisweep::generators::{
    random_nonconvex_problem, random_quadratic_problem, random_tree, InstanceSpec,
};
use multisweep::power::{case33, default_estimation};
use multisweep::rng::substream;
use multisweep::{
    zero_model, HessianMode, Mode, NodeId, SimConfig, TreeProblem, ValueModel, Vector,
};

/// Random strictly convex quadratic instance on `n` nodes.
pub fn quadratic_instance(n: usize, seed: u64) -> TreeProblem {
    let mut rng = substream(seed, "bench-quadratic");
    let tree = random_tree(n, &mut rng);
    random_quadratic_problem(&tree, InstanceSpec::default(), &mut rng)
}

/// Random nonconvex instance on `n` nodes.
pub fn nonconvex_instance(n: usize, seed: u64) -> TreeProblem {
    let mut rng = substream(seed, "bench-nonconvex");
    let tree = random_tree(n, &mut rng);
    random_nonconvex_problem(&tree, InstanceSpec::default(), 0.5, &mut rng)
}

/// State estimation on the bundled 33-bus feeder.
pub fn feeder_instance(seed: u64) -> TreeProblem {
    default_estimation(&case33(), seed)
        .expect("bundled feeder builds")
        .0
        .problem
}

/// Fixed-length run without early stopping or event recording.
pub fn fixed_sweeps(mode: Mode, sweeps: usize, hessian: HessianMode) -> SimConfig {
    let mut cfg = SimConfig {
        mode,
        max_sweeps: sweeps,
        tol: 0.0,
        record_events: false,
        ..SimConfig::default()
    };
    cfg.model.hessian_mode = hessian;
    cfg
}

/// Node with the most neighbors and zero models from each of them.
pub fn busiest_node(problem: &TreeProblem) -> (NodeId, BTreeMap<NodeId, ValueModel>) {
    let tree = problem.tree();
    let i = tree
        .nodes()
        .max_by_key(|&i| (tree.neighbors(i).len(), std::cmp::Reverse(i.0)))
        .expect("nonempty tree");
    let models = tree
        .neighbors(i)
        .iter()
        .map(|&j| (j, zero_model(problem.coupling(j, i).nrows())))
        .collect();
    (i, models)
}

/// Initial point of node `i`.
pub fn start_point(problem: &TreeProblem, i: NodeId) -> Vector {
    problem.initial().node(i).clone()
}
