use std::collections::BTreeSet;

use multisweep::generators::{
    random_nonconvex_problem, random_quadratic_problem, random_tree, scalar_average_problem,
    six_node_tree, InstanceSpec,
};
use multisweep::protocol::Action;
use multisweep::rng::substream;
use multisweep::sim::write_events_jsonl;
use multisweep::{
    run_async, run_sync, Algorithm, DelayLaw, Mode, NodeId, RootSchedule, RunStatus, SimConfig,
    SimError, SimReport, TraceEvent, TreeProblem,
};
use rand::Rng;

fn ids(nodes: impl IntoIterator<Item = NodeId>) -> BTreeSet<usize> {
    nodes.into_iter().map(|n| n.0).collect()
}

fn sync_cfg(seed: u64) -> SimConfig {
    SimConfig {
        mode: Mode::Sync,
        seed,
        ..SimConfig::default()
    }
}

fn first_root(events: &[TraceEvent]) -> &TraceEvent {
    events
        .iter()
        .find(|e| e.action == Action::Root)
        .expect("a root event")
}

/// Peers that `root` sends to between its root event and the next one.
fn root_sends(events: &[TraceEvent], root: &TraceEvent) -> BTreeSet<usize> {
    events
        .iter()
        .skip_while(|e| !std::ptr::eq(*e, root))
        .skip(1)
        .take_while(|e| e.action != Action::Root)
        .filter(|e| e.node == root.node && e.action == Action::Send)
        .filter_map(|e| e.peer.map(|p| p.0))
        .collect()
}

#[test]
fn leaves_open_the_first_round() {
    let problem = scalar_average_problem(&six_node_tree());
    for seed in 0..10 {
        let r = run_sync(&problem, &Algorithm::Alg2, &sync_cfg(seed)).unwrap();
        let first: BTreeSet<usize> = r
            .events
            .iter()
            .filter(|e| e.time == 0 && e.action == Action::Send)
            .map(|e| e.node.0)
            .collect();
        assert_eq!(first, BTreeSet::from([1, 3, 5, 6]));
    }
}

#[test]
fn first_root_is_central_and_broadcasts() {
    let tree = six_node_tree();
    let problem = scalar_average_problem(&tree);
    let mut seen_root_two = false;
    for seed in 0..40 {
        let cfg = sync_cfg(seed);
        let r = run_sync(&problem, &Algorithm::Alg2, &cfg).unwrap();
        let root = first_root(&r.events);
        assert_eq!(root.time, 2 * cfg.delta);
        assert!([2, 4].contains(&root.node.0));
        let sends = root_sends(&r.events, root);
        assert_eq!(sends, ids(tree.neighbors(root.node).iter().copied()));
        if root.node == NodeId(2) {
            assert_eq!(sends, BTreeSet::from([1, 3, 4]));
            seen_root_two = true;
        }
    }
    assert!(seen_root_two);
}

fn random_instance(rng: &mut impl Rng, max_n: usize) -> TreeProblem {
    let n = rng.random_range(2..=max_n);
    let tree = random_tree(n, rng);
    random_quadratic_problem(
        &tree,
        InstanceSpec {
            max_dim: 3,
            max_coupling: 2,
            cond: 10.0,
        },
        rng,
    )
}

fn check_protocol(r: &SimReport, problem: &TreeProblem, roots_central: bool) {
    assert_eq!(r.double_fire_violations, 0);
    assert_eq!(r.fifo_violations, 0);
    assert_ne!(r.status, RunStatus::Stalled);
    assert_eq!(r.root_history.len(), r.sweeps_completed);
    let center = ids(problem.tree().central_nodes());
    for root in &r.root_history {
        assert!(
            !roots_central || center.contains(&root.0),
            "root {root} outside the center"
        );
    }
    let roots = r.events.iter().filter(|e| e.action == Action::Root).count();
    assert!(
        roots == r.sweeps_completed || roots == r.sweeps_completed + 1,
        "{roots} roots for {} sweeps",
        r.sweeps_completed
    );
}

#[test]
fn synchronous_runs_never_deadlock() {
    let mut rng = substream(51, "sync-live");
    for k in 0..200 {
        let problem = random_instance(&mut rng, 30);
        let cfg = SimConfig {
            seed: k,
            max_sweeps: 4,
            tol: 0.0,
            ..sync_cfg(k)
        };
        let r = run_sync(&problem, &Algorithm::Alg2, &cfg).unwrap();
        assert_eq!(r.sweeps_completed, 4);
        check_protocol(&r, &problem, true);
    }
}

#[test]
fn asynchronous_skewed_runs_keep_fifo_and_single_roots() {
    let mut rng = substream(52, "async-live");
    for k in 0..60 {
        let problem = random_instance(&mut rng, 20);
        let cfg = SimConfig {
            mode: Mode::Async,
            seed: k,
            max_sweeps: 4,
            tol: 0.0,
            delays: DelayLaw {
                min: 1,
                max: 12,
                skewed: true,
            },
            ..SimConfig::default()
        };
        let r = run_async(&problem, &Algorithm::Alg2, &cfg).unwrap();
        assert_eq!(r.sweeps_completed, 4);
        check_protocol(&r, &problem, false);
    }
}

#[test]
fn skewed_delays_can_move_the_root_off_center() {
    let problem = scalar_average_problem(&six_node_tree());
    let center = ids(problem.tree().central_nodes());
    let off_center = (0..50)
        .filter(|&seed| {
            let cfg = SimConfig {
                mode: Mode::Async,
                seed,
                max_sweeps: 3,
                delays: DelayLaw {
                    min: 1,
                    max: 20,
                    skewed: true,
                },
                ..SimConfig::default()
            };
            let r = run_async(&problem, &Algorithm::Alg2, &cfg).unwrap();
            r.root_history.iter().any(|root| !center.contains(&root.0))
        })
        .count();
    assert!(off_center >= 1);
}

#[test]
fn asynchronous_runs_reach_the_centralized_optimum() {
    use multisweep::centralized_solve;
    use multisweep::oracle::CentralizedOptions;
    let mut rng = substream(55, "async-opt");
    for k in 0..20 {
        let problem = random_instance(&mut rng, 15);
        let reference = centralized_solve(&problem, &CentralizedOptions::default()).unwrap();
        let cfg = SimConfig {
            mode: Mode::Async,
            seed: k,
            tol: 1e-12,
            max_sweeps: 30,
            ..SimConfig::default()
        };
        let r = run_async(&problem, &Algorithm::Alg2, &cfg).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        assert!(r.final_snapshot().max_abs_diff(&reference.x) < 1e-8);
        assert!(problem.consensus_residual(r.final_snapshot()).unwrap() < 1e-8);
    }
}

fn serialize(r: &SimReport) -> Vec<u8> {
    let mut out = serde_json::to_vec(r).unwrap();
    write_events_jsonl(&mut out, &r.events).unwrap();
    out
}

#[test]
fn identical_seeds_replay_identically() {
    let mut rng = substream(53, "replay");
    for k in 0..10 {
        let problem = random_instance(&mut rng, 15);
        for mode in [Mode::Sync, Mode::Async] {
            let cfg = SimConfig {
                mode,
                seed: 1000 + k,
                max_sweeps: 3,
                ..SimConfig::default()
            };
            let a = multisweep::run(&problem, &Algorithm::Alg2, &cfg).unwrap();
            let b = multisweep::run(&problem, &Algorithm::Alg2, &cfg).unwrap();
            assert_eq!(serialize(&a), serialize(&b));
        }
    }
}

#[test]
fn simultaneous_and_rooted_methods_need_the_same_sweeps() {
    let mut rng = substream(54, "sweeps");
    for k in 0..20 {
        let n = rng.random_range(2..=12);
        let tree = random_tree(n, &mut rng);
        let problem = if k % 2 == 0 {
            random_quadratic_problem(&tree, InstanceSpec::default(), &mut rng)
        } else {
            random_nonconvex_problem(&tree, InstanceSpec::default(), 0.5, &mut rng)
        };
        let cfg = SimConfig {
            seed: k,
            tol: 1e-9,
            max_sweeps: 30,
            ..sync_cfg(k)
        };
        let two = run_sync(&problem, &Algorithm::Alg2, &cfg).unwrap();
        let one = run_sync(
            &problem,
            &Algorithm::Alg1(RootSchedule::per_sweep(&problem, &two.root_history)),
            &cfg,
        )
        .unwrap();
        assert_eq!(two.status, RunStatus::Converged);
        assert_eq!(one.status, two.status);
        assert_eq!(one.sweeps_completed, two.sweeps_completed);
        assert_eq!(one.final_snapshot().max_abs_diff(two.final_snapshot()), 0.0);
    }
}

#[test]
fn rooted_first_sweep_takes_twice_the_depth() {
    let problem = scalar_average_problem(&six_node_tree());
    let cfg = SimConfig {
        max_sweeps: 1,
        ..sync_cfg(0)
    };
    for (root, depth) in [(1, 3), (2, 2)] {
        let r = run_sync(
            &problem,
            &Algorithm::Alg1(RootSchedule::fixed(&problem, NodeId(root))),
            &cfg,
        )
        .unwrap();
        assert_eq!(r.sweeps[0].ticks, 2 * depth * cfg.delta);
        assert_eq!(r.root_history, vec![NodeId(root)]);
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let problem = scalar_average_problem(&six_node_tree());
    let other = scalar_average_problem(&random_tree(4, &mut substream(0, "other")));
    let bad = [
        SimConfig {
            delta: 0,
            ..SimConfig::default()
        },
        SimConfig {
            delays: DelayLaw {
                min: 0,
                max: 3,
                skewed: false,
            },
            ..SimConfig::default()
        },
        SimConfig {
            delays: DelayLaw {
                min: 5,
                max: 3,
                skewed: false,
            },
            ..SimConfig::default()
        },
        SimConfig {
            max_sweeps: 0,
            ..SimConfig::default()
        },
    ];
    for cfg in bad {
        assert!(matches!(
            run_sync(&problem, &Algorithm::Alg2, &cfg),
            Err(SimError::InvalidConfig(_))
        ));
        assert!(matches!(
            run_async(&problem, &Algorithm::Alg2, &cfg),
            Err(SimError::InvalidConfig(_))
        ));
    }
    let mut cfg = SimConfig::default();
    cfg.model.sigma = -1.0;
    assert!(matches!(
        run_sync(&problem, &Algorithm::Alg2, &cfg),
        Err(SimError::InvalidConfig(_))
    ));
    let foreign = Algorithm::Alg1(RootSchedule::fixed(&other, NodeId(1)));
    assert!(matches!(
        run_sync(&problem, &foreign, &SimConfig::default()),
        Err(SimError::InvalidConfig(_))
    ));
}
