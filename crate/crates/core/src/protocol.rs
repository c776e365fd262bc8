//! Per-node protocol state machines.
//!
//! Both algorithms are written as step functions: a node consumes the
//! messages delivered to it, runs its protocol until it has to wait, and
//! leaves messages (and, for the simultaneous variant, a pending send
//! attempt) in a [`StepOutput`]. The simulator owns time, channels and the
//! line-blocking flags.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Mat, Vector};
use crate::local::{sensitivity, solve_node, LocalError, LocalSolveResult, SolverOptions};
use crate::model::{build_model, zero_model, ModelMessage, ValueModel};
use crate::problem::{Assignment, HessianMode, TreeProblem};
use crate::rng::StreamRng;
use crate::tree::{NodeId, RootedTree};

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("node {node} received an unexpected message from {from}: {reason}")]
    ProtocolViolation {
        node: NodeId,
        from: NodeId,
        reason: String,
    },
    #[error("node {0} has not solved its subproblem yet")]
    NodeNeverSolved(NodeId),
    #[error("node {node}: {source}")]
    Local { node: NodeId, source: LocalError },
}

/// How outgoing models are built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    /// Cubic coefficient attached to every outgoing model.
    pub sigma: f64,
    pub hessian_mode: HessianMode,
    /// Added to the model Hessian as `shift · I`; positive values give
    /// over-estimating models, negative values under-estimating ones.
    pub hessian_shift: f64,
    pub solver: SolverOptions,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            sigma: 0.0,
            hessian_mode: HessianMode::Exact,
            hessian_shift: 0.0,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Recv,
    Solve,
    Send,
    Block,
    Unblock,
    Root,
}

/// One line of the protocol trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: u64,
    pub node: NodeId,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_tag: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

impl TraceEvent {
    pub fn new(time: u64, node: NodeId, action: Action) -> Self {
        TraceEvent {
            time,
            node,
            action,
            peer: None,
            sweep_tag: None,
            iterations: None,
        }
    }

    pub fn peer(mut self, peer: NodeId) -> Self {
        self.peer = Some(peer);
        self
    }

    pub fn tag(mut self, tag: u64) -> Self {
        self.sweep_tag = Some(tag);
        self
    }
}

/// Shared read-only inputs of every step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub problem: &'a TreeProblem,
    pub opts: &'a ModelOptions,
    pub now: u64,
}

/// A candidate send waiting for its random delay to elapse.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub node: NodeId,
    pub target: NodeId,
    pub delay: u64,
    pub model: ValueModel,
    pub y: Vector,
}

#[derive(Debug, Default)]
pub struct StepOutput {
    pub sends: Vec<ModelMessage>,
    pub attempt: Option<Attempt>,
    /// Tag of the sweep this node started by acting as root.
    pub root_tag: Option<u64>,
    pub events: Vec<TraceEvent>,
}

/// Tag carried by forward messages of the `count`-th sweep rooted at `node`.
pub fn root_tag(node: NodeId, count: u64) -> u64 {
    ((node.0 as u64) << 32) + count + 1
}

/// State common to both protocols: stored neighbor models and the last
/// committed local solution.
#[derive(Debug, Clone)]
pub struct NodeCore {
    pub id: NodeId,
    pub models: BTreeMap<NodeId, ValueModel>,
    pub y: Vector,
    pub solved: bool,
    /// Stored models replaced before any solve used them.
    pub overwrites: usize,
    pub max_regularization: f64,
    pub solver_failures: usize,
    root_count: u64,
    unread: BTreeSet<NodeId>,
}

impl NodeCore {
    pub fn new(problem: &TreeProblem, id: NodeId, y0: Vector) -> Self {
        let models = problem
            .tree()
            .neighbors(id)
            .iter()
            .map(|&j| (j, zero_model(problem.coupling_dim(id, j))))
            .collect();
        NodeCore {
            id,
            models,
            y: y0,
            solved: false,
            overwrites: 0,
            max_regularization: 0.0,
            solver_failures: 0,
            root_count: 0,
            unread: BTreeSet::new(),
        }
    }

    fn receive(
        &mut self,
        msg: &ModelMessage,
        now: u64,
        out: &mut StepOutput,
    ) -> Result<(), ProtocolError> {
        if !self.models.contains_key(&msg.from) || msg.to != self.id {
            return Err(ProtocolError::ProtocolViolation {
                node: self.id,
                from: msg.from,
                reason: "sender is not a neighbor".into(),
            });
        }
        if !self.unread.insert(msg.from) {
            self.overwrites += 1;
        }
        self.models.insert(msg.from, msg.model.clone());
        out.events.push(
            TraceEvent::new(now, self.id, Action::Recv)
                .peer(msg.from)
                .tag(msg.sweep_tag),
        );
        Ok(())
    }

    fn solve(
        &mut self,
        ctx: &StepContext,
        out: &mut StepOutput,
    ) -> Result<LocalSolveResult, ProtocolError> {
        let r = solve_node(
            ctx.problem,
            self.id,
            &self.models,
            &self.y,
            ctx.opts.hessian_mode,
            &ctx.opts.solver,
        )
        .map_err(|source| ProtocolError::Local {
            node: self.id,
            source,
        })?;
        self.unread.clear();
        self.max_regularization = self.max_regularization.max(r.regularization);
        if !r.converged {
            self.solver_failures += 1;
        }
        let mut ev = TraceEvent::new(ctx.now, self.id, Action::Solve);
        ev.iterations = Some(r.iterations);
        out.events.push(ev);
        Ok(r)
    }

    fn commit(&mut self, y: Vector) {
        self.y = y;
        self.solved = true;
    }

    /// `W_{i,target}` built at the local solution `y`.
    pub fn outgoing_model(
        &mut self,
        ctx: &StepContext,
        y: &Vector,
        target: NodeId,
    ) -> Result<ValueModel, ProtocolError> {
        let s = ctx.problem.coupling(self.id, target);
        let p_bar = s * y;
        let sens = sensitivity(
            ctx.problem,
            self.id,
            &self.models,
            target,
            &p_bar,
            y,
            ctx.opts.hessian_mode,
            &ctx.opts.solver,
        )
        .map_err(|source| ProtocolError::Local {
            node: self.id,
            source,
        })?;
        self.max_regularization = self.max_regularization.max(sens.regularization);
        let m = p_bar.len();
        let hess = sens.hess + Mat::identity(m, m) * ctx.opts.hessian_shift;
        Ok(build_model(
            sens.value,
            &sens.grad,
            &hess,
            &p_bar,
            ctx.opts.sigma,
        ))
    }

    fn send(
        &mut self,
        ctx: &StepContext,
        y: &Vector,
        targets: &[NodeId],
        tag: u64,
        out: &mut StepOutput,
    ) -> Result<(), ProtocolError> {
        for &t in targets {
            let model = self.outgoing_model(ctx, y, t)?;
            out.sends.push(ModelMessage {
                from: self.id,
                to: t,
                model,
                sweep_tag: tag,
            });
            out.events.push(
                TraceEvent::new(ctx.now, self.id, Action::Send)
                    .peer(t)
                    .tag(tag),
            );
        }
        Ok(())
    }

    fn next_root_tag(&mut self, now: u64, out: &mut StepOutput) -> u64 {
        let tag = root_tag(self.id, self.root_count);
        self.root_count += 1;
        out.root_tag = Some(tag);
        out.events
            .push(TraceEvent::new(now, self.id, Action::Root).tag(tag));
        tag
    }
}

/// Roots used by the rooted multi-sweep method, one per sweep; the last
/// entry repeats.
#[derive(Debug, Clone)]
pub struct RootSchedule {
    trees: Vec<RootedTree>,
}

impl RootSchedule {
    pub fn fixed(problem: &TreeProblem, root: NodeId) -> Self {
        RootSchedule {
            trees: vec![problem.tree().root_at(root)],
        }
    }

    /// Panics if `roots` is empty.
    pub fn per_sweep(problem: &TreeProblem, roots: &[NodeId]) -> Self {
        assert!(!roots.is_empty(), "root schedule needs at least one root");
        RootSchedule {
            trees: roots.iter().map(|&r| problem.tree().root_at(r)).collect(),
        }
    }

    pub fn rooted(&self, sweep: usize) -> &RootedTree {
        &self.trees[sweep.min(self.trees.len() - 1)]
    }

    pub fn root(&self, sweep: usize) -> NodeId {
        self.rooted(sweep).root()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Alg1Mode {
    Backward,
    Forward,
}

#[derive(Debug, Clone)]
pub struct Alg1NodeState {
    pub core: NodeCore,
    pub mode: Alg1Mode,
    /// Index of the sweep this node is currently taking part in.
    pub sweep: usize,
    pub pending_children: BTreeSet<NodeId>,
    parent_tag: Option<u64>,
}

impl Alg1NodeState {
    pub fn new(problem: &TreeProblem, id: NodeId, y0: Vector, schedule: &RootSchedule) -> Self {
        Alg1NodeState {
            core: NodeCore::new(problem, id, y0),
            mode: Alg1Mode::Backward,
            sweep: 0,
            pending_children: schedule.rooted(0).children(id).iter().copied().collect(),
            parent_tag: None,
        }
    }

    /// True when the node would act again without any new message.
    pub fn is_ready(&self) -> bool {
        self.mode == Alg1Mode::Backward && self.pending_children.is_empty()
    }
}

/// One activation of the rooted multi-sweep method at node `state.core.id`.
pub fn alg1_step(
    state: &mut Alg1NodeState,
    inbox: &[ModelMessage],
    schedule: &RootSchedule,
    ctx: &StepContext,
    out: &mut StepOutput,
) -> Result<(), ProtocolError> {
    let me = state.core.id;
    for msg in inbox {
        state.core.receive(msg, ctx.now, out)?;
        let rooted = schedule.rooted(state.sweep);
        match state.mode {
            Alg1Mode::Backward if state.pending_children.remove(&msg.from) => {}
            Alg1Mode::Forward if rooted.parent(me) == Some(msg.from) => {
                state.parent_tag = Some(msg.sweep_tag)
            }
            mode => {
                return Err(ProtocolError::ProtocolViolation {
                    node: me,
                    from: msg.from,
                    reason: format!("not expected in {mode:?} mode of sweep {}", state.sweep),
                })
            }
        }
    }
    loop {
        let rooted = schedule.rooted(state.sweep);
        let is_root = rooted.root() == me;
        match state.mode {
            Alg1Mode::Backward => {
                if !state.pending_children.is_empty() {
                    return Ok(());
                }
                if !is_root {
                    let parent = rooted.parent(me).expect("non-root has a parent");
                    let r = state.core.solve(ctx, out)?;
                    state.core.commit(r.y_star.clone());
                    state.core.send(ctx, &r.y_star, &[parent], 0, out)?;
                }
                state.mode = Alg1Mode::Forward;
                state.parent_tag = None;
            }
            Alg1Mode::Forward => {
                let tag = if is_root {
                    state.core.next_root_tag(ctx.now, out)
                } else {
                    match state.parent_tag {
                        Some(t) => t,
                        None => return Ok(()),
                    }
                };
                let r = state.core.solve(ctx, out)?;
                state.core.commit(r.y_star.clone());
                let children = rooted.children(me).to_vec();
                state.core.send(ctx, &r.y_star, &children, tag, out)?;
                state.mode = Alg1Mode::Backward;
                state.sweep += 1;
                state.parent_tag = None;
                state.pending_children = schedule
                    .rooted(state.sweep)
                    .children(me)
                    .iter()
                    .copied()
                    .collect();
                if is_root {
                    return Ok(());
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Alg2NodeState {
    pub core: NodeCore,
    /// Neighbors whose updates have been collected since the last reset.
    pub r: BTreeSet<NodeId>,
    /// Neighbors that sent since the last reset.
    pub j: BTreeSet<NodeId>,
    /// Neighbor last sent to, or the node itself once it roots; `None` while idle.
    pub ell: Option<NodeId>,
    ell_tag: Option<u64>,
    /// Set by a skipped send, cleared by the next arrival.
    skip_latch: bool,
    degree: usize,
    rng: StreamRng,
}

/// Upper bound (inclusive) of the micro-delay before a candidate send.
pub const MAX_ATTEMPT_DELAY: u64 = 9;

impl Alg2NodeState {
    pub fn new(problem: &TreeProblem, id: NodeId, y0: Vector, rng: StreamRng) -> Self {
        Alg2NodeState {
            core: NodeCore::new(problem, id, y0),
            r: BTreeSet::new(),
            j: BTreeSet::new(),
            ell: None,
            ell_tag: None,
            skip_latch: false,
            degree: problem.tree().degree(id),
            rng,
        }
    }

    /// True when the node would act again without any new message.
    pub fn is_ready(&self) -> bool {
        self.ell.is_none()
            && !self.skip_latch
            && (self.degree == 0 || self.r.len() + 1 == self.degree)
    }
}

/// One activation of the simultaneous multi-sweep method.
pub fn alg2_step(
    state: &mut Alg2NodeState,
    inbox: &[ModelMessage],
    ctx: &StepContext,
    out: &mut StepOutput,
) -> Result<(), ProtocolError> {
    let me = state.core.id;
    for msg in inbox {
        state.core.receive(msg, ctx.now, out)?;
        state.j.insert(msg.from);
        state.skip_latch = false;
        if state.ell == Some(msg.from) {
            state.ell_tag = Some(msg.sweep_tag);
        }
    }
    let neighbors = ctx.problem.tree().neighbors(me).to_vec();

    // collect updates; a full collection makes this node the root
    if state.ell.is_none() {
        state.r.extend(state.j.iter().copied());
        if state.r.len() == state.degree {
            state.ell = Some(me);
        }
    }

    if let Some(ell) = state.ell {
        // wait for the parent's update
        if ell != me && state.ell_tag.is_none() {
            return Ok(());
        }
        let r = state.core.solve(ctx, out)?;
        state.core.commit(r.y_star.clone());
        let (targets, tag): (Vec<NodeId>, u64) = if ell == me {
            (neighbors.clone(), state.core.next_root_tag(ctx.now, out))
        } else {
            (
                neighbors.iter().copied().filter(|&n| n != ell).collect(),
                state.ell_tag.unwrap_or(0),
            )
        };
        state.core.send(ctx, &r.y_star, &targets, tag, out)?;
        state.ell = None;
        state.ell_tag = None;
        state.r.clear();
        state.j.clear();
        if ell == me {
            return Ok(());
        }
    }

    // forward to the single missing neighbor after a random delay
    if state.ell.is_none()
        && !state.skip_latch
        && state.degree >= 1
        && state.r.len() + 1 == state.degree
    {
        let k = *neighbors
            .iter()
            .find(|n| !state.r.contains(n))
            .expect("one neighbor is missing");
        let r = state.core.solve(ctx, out)?;
        let model = state.core.outgoing_model(ctx, &r.y_star, k)?;
        let delay = state.rng.random_range(0..=MAX_ATTEMPT_DELAY);
        out.attempt = Some(Attempt {
            node: me,
            target: k,
            delay,
            model,
            y: r.y_star,
        });
    }
    Ok(())
}

/// Completes a delayed candidate send. `blocked` is the state of the line
/// `(i, k)` at resolution time; a blocked send is dropped together with its
/// candidate solution.
pub fn resolve_attempt(
    state: &mut Alg2NodeState,
    attempt: Attempt,
    blocked: bool,
    now: u64,
    out: &mut StepOutput,
) -> bool {
    if blocked {
        state.skip_latch = true;
        return false;
    }
    let me = state.core.id;
    state.core.commit(attempt.y);
    state.ell = Some(attempt.target);
    state.ell_tag = None;
    out.sends.push(ModelMessage {
        from: me,
        to: attempt.target,
        model: attempt.model,
        sweep_tag: 0,
    });
    out.events.push(
        TraceEvent::new(now, me, Action::Send)
            .peer(attempt.target)
            .tag(0),
    );
    true
}

/// Collects every node's committed solution.
pub fn decode_solution<'a, I>(cores: I) -> Result<Assignment, ProtocolError>
where
    I: IntoIterator<Item = &'a NodeCore>,
{
    let mut x = Vec::new();
    for c in cores {
        if !c.solved {
            return Err(ProtocolError::NodeNeverSolved(c.id));
        }
        x.push(c.y.clone());
    }
    Ok(Assignment::new(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::problem::{CouplingPair, NodeObjective};
    use crate::rng::substream;
    use crate::tree::Tree;

    fn scalar_quad(a: f64) -> NodeObjective {
        NodeObjective::quadratic(
            Mat::from_element(1, 1, 2.0),
            Vector::from_element(1, -2.0 * a),
            a * a,
        )
    }

    fn chain(values: &[f64]) -> TreeProblem {
        let n = values.len();
        let edges: Vec<(usize, usize)> = (1..n).map(|k| (k, k + 1)).collect();
        let tree = Tree::new(n, &edges).unwrap();
        let couplings = edges
            .iter()
            .map(|&(a, b)| CouplingPair {
                i: NodeId(a),
                j: NodeId(b),
                s_ij: Mat::identity(1, 1),
                s_ji: Mat::identity(1, 1),
            })
            .collect();
        TreeProblem::new(
            tree,
            values.iter().map(|&a| scalar_quad(a)).collect(),
            couplings,
        )
        .unwrap()
    }

    fn ctx<'a>(p: &'a TreeProblem, opts: &'a ModelOptions, now: u64) -> StepContext<'a> {
        StepContext {
            problem: p,
            opts,
            now,
        }
    }

    #[test]
    fn alg1_leaf_sends_immediately() {
        let p = chain(&[1.0, 3.0]);
        let opts = ModelOptions::default();
        let sched = RootSchedule::fixed(&p, NodeId(1));
        let mut leaf = Alg1NodeState::new(&p, NodeId(2), Vector::zeros(1), &sched);
        let mut out = StepOutput::default();
        alg1_step(&mut leaf, &[], &sched, &ctx(&p, &opts, 0), &mut out).unwrap();
        assert_eq!(out.sends.len(), 1);
        assert_eq!(out.sends[0].to, NodeId(1));
        assert_eq!(leaf.mode, Alg1Mode::Forward);
    }

    #[test]
    fn alg1_two_nodes_one_sweep_is_exact() {
        let p = chain(&[1.0, 3.0]);
        let opts = ModelOptions::default();
        let sched = RootSchedule::fixed(&p, NodeId(1));
        let mut root = Alg1NodeState::new(&p, NodeId(1), Vector::zeros(1), &sched);
        let mut leaf = Alg1NodeState::new(&p, NodeId(2), Vector::zeros(1), &sched);
        let mut o1 = StepOutput::default();
        alg1_step(&mut leaf, &[], &sched, &ctx(&p, &opts, 0), &mut o1).unwrap();
        let mut o2 = StepOutput::default();
        alg1_step(&mut root, &o1.sends, &sched, &ctx(&p, &opts, 1), &mut o2).unwrap();
        assert_eq!(o2.sends.len(), 1);
        assert!(o2.root_tag.is_some());
        assert_eq!(root.mode, Alg1Mode::Backward);
        let mut o3 = StepOutput::default();
        alg1_step(&mut leaf, &o2.sends, &sched, &ctx(&p, &opts, 2), &mut o3).unwrap();
        let x = decode_solution([&root.core, &leaf.core]).unwrap();
        assert!((x.node(NodeId(1))[0] - 2.0).abs() < 1e-12);
        assert!((x.node(NodeId(2))[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn alg1_rejects_unexpected_sender() {
        let p = chain(&[1.0, 3.0, 5.0]);
        let opts = ModelOptions::default();
        let sched = RootSchedule::fixed(&p, NodeId(1));
        let mut mid = Alg1NodeState::new(&p, NodeId(2), Vector::zeros(1), &sched);
        let msg = ModelMessage {
            from: NodeId(1),
            to: NodeId(2),
            model: zero_model(1),
            sweep_tag: 0,
        };
        let err = alg1_step(
            &mut mid,
            &[msg],
            &sched,
            &ctx(&p, &opts, 0),
            &mut StepOutput::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ProtocolError::ProtocolViolation { .. }));
    }

    #[test]
    fn alg2_single_node_roots_itself() {
        let tree = Tree::new(1, &[]).unwrap();
        let p = TreeProblem::new(tree, vec![scalar_quad(4.0)], vec![]).unwrap();
        let opts = ModelOptions::default();
        let mut s = Alg2NodeState::new(&p, NodeId(1), Vector::zeros(1), substream(0, "n"));
        let mut out = StepOutput::default();
        alg2_step(&mut s, &[], &ctx(&p, &opts, 0), &mut out).unwrap();
        assert!(out.root_tag.is_some());
        assert!(out.sends.is_empty() && out.attempt.is_none());
        assert!((s.core.y[0] - 4.0).abs() < 1e-12);
        assert!(s.is_ready());
    }

    #[test]
    fn alg2_leaf_attempts_and_waits() {
        let p = chain(&[1.0, 3.0, 5.0]);
        let opts = ModelOptions::default();
        let mut leaf = Alg2NodeState::new(&p, NodeId(1), Vector::zeros(1), substream(0, "n"));
        let mut out = StepOutput::default();
        alg2_step(&mut leaf, &[], &ctx(&p, &opts, 0), &mut out).unwrap();
        let attempt = out.attempt.take().unwrap();
        assert_eq!(attempt.target, NodeId(2));
        assert!(attempt.delay <= MAX_ATTEMPT_DELAY);
        assert!(!leaf.core.solved);
        assert!(resolve_attempt(&mut leaf, attempt, false, 0, &mut out));
        assert_eq!(leaf.ell, Some(NodeId(2)));
        assert!(leaf.core.solved);
        // nothing happens until the parent answers
        let mut idle = StepOutput::default();
        alg2_step(&mut leaf, &[], &ctx(&p, &opts, 1), &mut idle).unwrap();
        assert!(idle.sends.is_empty() && idle.attempt.is_none());
    }

    #[test]
    fn alg2_blocked_attempt_is_dropped() {
        let p = chain(&[1.0, 3.0]);
        let opts = ModelOptions::default();
        let mut s = Alg2NodeState::new(
            &p,
            NodeId(1),
            Vector::from_element(1, 7.0),
            substream(0, "n"),
        );
        let mut out = StepOutput::default();
        alg2_step(&mut s, &[], &ctx(&p, &opts, 0), &mut out).unwrap();
        let a = out.attempt.take().unwrap();
        assert!(!resolve_attempt(&mut s, a, true, 0, &mut out));
        assert_eq!(s.core.y[0], 7.0);
        assert_eq!(s.ell, None);
        assert!(!s.is_ready());
    }

    #[test]
    fn alg2_full_collection_makes_root() {
        let p = chain(&[1.0, 3.0, 5.0]);
        let opts = ModelOptions::default();
        let mut mid = Alg2NodeState::new(&p, NodeId(2), Vector::zeros(1), substream(0, "n"));
        let inbox = [
            ModelMessage {
                from: NodeId(1),
                to: NodeId(2),
                model: zero_model(1),
                sweep_tag: 0,
            },
            ModelMessage {
                from: NodeId(3),
                to: NodeId(2),
                model: zero_model(1),
                sweep_tag: 0,
            },
        ];
        let mut out = StepOutput::default();
        alg2_step(&mut mid, &inbox, &ctx(&p, &opts, 0), &mut out).unwrap();
        assert!(out.root_tag.is_some());
        let to: Vec<NodeId> = out.sends.iter().map(|m| m.to).collect();
        assert_eq!(to, vec![NodeId(1), NodeId(3)]);
        assert!(out.sends.iter().all(|m| Some(m.sweep_tag) == out.root_tag));
        assert!(out.attempt.is_none());
    }

    #[test]
    fn decode_requires_every_node_solved() {
        let p = chain(&[1.0, 3.0]);
        let c = NodeCore::new(&p, NodeId(1), Vector::zeros(1));
        assert_eq!(
            decode_solution([&c]),
            Err(ProtocolError::NodeNeverSolved(NodeId(1)))
        );
    }

    #[test]
    fn root_tags_are_distinct_per_node() {
        assert_ne!(root_tag(NodeId(1), 0), root_tag(NodeId(2), 0));
        assert_ne!(root_tag(NodeId(1), 0), root_tag(NodeId(1), 1));
        assert_ne!(root_tag(NodeId(1), 0), 0);
    }
}
