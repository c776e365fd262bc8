//! Deterministic discrete-event simulation of the node protocols.
//!
//! Time is an integer tick counter. In synchronous mode every node is
//! activated once per `delta` ticks and a message sent at tick `t` is
//! delivered at `t + delta`. In asynchronous mode nodes wake on message
//! arrival; every directed edge draws its delays from its own seeded stream
//! and delivers in FIFO order.
//!
//! Forward messages carry the tag of the sweep that produced them. A sweep
//! is complete once no message with its tag is in flight or unconsumed; the
//! simulator then snapshots every node's solution.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelMessage;
use crate::problem::{Assignment, TreeProblem};
use crate::protocol::{
    alg1_step, alg2_step, resolve_attempt, Action, Alg1NodeState, Alg2NodeState, Attempt,
    ModelOptions, NodeCore, ProtocolError, RootSchedule, StepContext, StepOutput, TraceEvent,
};
use crate::rng::{substream, StreamRng};
use crate::tree::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sync,
    Async,
}

#[derive(Debug, Clone)]
pub enum Algorithm {
    /// Rooted multi-sweep method with the given root per sweep.
    Alg1(RootSchedule),
    /// Simultaneous multi-sweep method.
    Alg2,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Alg1(_) => "alg1",
            Algorithm::Alg2 => "alg2",
        }
    }
}

/// Per-edge message delay in ticks, uniform on `[min, max]`. With `skewed`
/// every directed edge also gets a fixed extra latency drawn once from
/// `[0, 4·max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayLaw {
    pub min: u64,
    pub max: u64,
    pub skewed: bool,
}

impl Default for DelayLaw {
    fn default() -> Self {
        DelayLaw {
            min: 5,
            max: 15,
            skewed: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Ticks between synchronous activations.
    pub delta: u64,
    pub delays: DelayLaw,
    pub max_sweeps: usize,
    pub max_events: u64,
    /// Stop once consecutive sweep snapshots differ by less than this (∞-norm).
    pub tol: f64,
    pub model: ModelOptions,
    pub record_events: bool,
    /// Keep a copy of every model put on the wire.
    pub record_messages: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: Mode::Sync,
            seed: 0,
            delta: 10,
            delays: DelayLaw::default(),
            max_sweeps: 50,
            max_events: 5_000_000,
            tol: 1e-10,
            model: ModelOptions::default(),
            record_events: true,
            record_messages: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// 1-based sweep index.
    pub sweep: usize,
    pub root: NodeId,
    /// Tick at which the sweep completed.
    pub ticks: u64,
    /// Messages sent up to completion.
    pub messages: u64,
    /// `max_i ‖y_i − y_i^prev‖∞` against the previous snapshot.
    pub max_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub algorithm: String,
    pub mode: Mode,
    pub seed: u64,
    pub status: RunStatus,
    pub ticks_elapsed: u64,
    pub messages_sent: u64,
    pub events_processed: u64,
    pub sweeps_completed: usize,
    pub root_history: Vec<NodeId>,
    pub sweeps: Vec<SweepRecord>,
    /// Solution snapshots; entry 0 is the starting point, entry `k` the
    /// state at completion of sweep `k`.
    pub snapshots: Vec<Assignment>,
    pub skipped_sends: u64,
    pub double_fire_violations: u64,
    pub fifo_violations: u64,
    pub buffer_overwrites: usize,
    pub solver_failures: usize,
    pub max_regularization: f64,
    #[serde(skip)]
    pub events: Vec<TraceEvent>,
    /// Models in send order, when requested.
    #[serde(skip)]
    pub messages: Vec<ModelMessage>,
}

impl SimReport {
    pub fn final_snapshot(&self) -> &Assignment {
        self.snapshots.last().expect("snapshot 0 always exists")
    }
}

#[derive(Debug, Clone)]
struct InFlight {
    msg: ModelMessage,
    edge_seq: u64,
    /// Sent by a delayed candidate send; consuming it releases the block.
    blocking: bool,
}

#[derive(Debug, Clone)]
enum Slot {
    A1(Alg1NodeState),
    A2(Alg2NodeState),
}

impl Slot {
    fn core(&self) -> &NodeCore {
        match self {
            Slot::A1(s) => &s.core,
            Slot::A2(s) => &s.core,
        }
    }

    fn is_ready(&self) -> bool {
        match self {
            Slot::A1(s) => s.is_ready(),
            Slot::A2(s) => s.is_ready(),
        }
    }
}

struct Engine<'a> {
    problem: &'a TreeProblem,
    cfg: &'a SimConfig,
    algorithm: &'a Algorithm,
    nodes: Vec<Slot>,
    outstanding: BTreeMap<u64, usize>,
    open_sweeps: Vec<(u64, NodeId)>,
    blocked: BTreeSet<(NodeId, NodeId)>,
    live_step_d: BTreeMap<(NodeId, NodeId), usize>,
    send_seq: BTreeMap<(NodeId, NodeId), u64>,
    recv_seq: BTreeMap<(NodeId, NodeId), u64>,
    report: SimReport,
    done: Option<RunStatus>,
}

impl<'a> Engine<'a> {
    fn new(
        problem: &'a TreeProblem,
        algorithm: &'a Algorithm,
        cfg: &'a SimConfig,
    ) -> Result<Self, SimError> {
        validate(problem, algorithm, cfg)?;
        let y0 = problem.initial();
        let nodes = problem
            .tree()
            .nodes()
            .map(|i| match algorithm {
                Algorithm::Alg1(schedule) => {
                    Slot::A1(Alg1NodeState::new(problem, i, y0.node(i).clone(), schedule))
                }
                Algorithm::Alg2 => Slot::A2(Alg2NodeState::new(
                    problem,
                    i,
                    y0.node(i).clone(),
                    substream(cfg.seed, &format!("node/{i}")),
                )),
            })
            .collect();
        let report = SimReport {
            algorithm: algorithm.name().to_string(),
            mode: cfg.mode,
            seed: cfg.seed,
            status: RunStatus::Stalled,
            ticks_elapsed: 0,
            messages_sent: 0,
            events_processed: 0,
            sweeps_completed: 0,
            root_history: Vec::new(),
            sweeps: Vec::new(),
            snapshots: vec![y0],
            skipped_sends: 0,
            double_fire_violations: 0,
            fifo_violations: 0,
            buffer_overwrites: 0,
            solver_failures: 0,
            max_regularization: 0.0,
            events: Vec::new(),
            messages: Vec::new(),
        };
        Ok(Engine {
            problem,
            cfg,
            algorithm,
            nodes,
            outstanding: BTreeMap::new(),
            open_sweeps: Vec::new(),
            blocked: BTreeSet::new(),
            live_step_d: BTreeMap::new(),
            send_seq: BTreeMap::new(),
            recv_seq: BTreeMap::new(),
            report,
            done: None,
        })
    }

    fn record(&mut self, events: Vec<TraceEvent>) {
        if self.cfg.record_events {
            self.report.events.extend(events);
        }
    }

    fn consume(&mut self, item: &InFlight, now: u64) {
        let (from, to) = (item.msg.from, item.msg.to);
        let last = self.recv_seq.entry((from, to)).or_insert(0);
        if item.edge_seq <= *last && *last != 0 {
            self.report.fifo_violations += 1;
        }
        *last = item.edge_seq;
        if item.msg.sweep_tag != 0 {
            if let Some(c) = self.outstanding.get_mut(&item.msg.sweep_tag) {
                *c -= 1;
            }
        }
        if item.blocking {
            if let Some(c) = self.live_step_d.get_mut(&(from, to)) {
                *c -= 1;
            }
            if self.blocked.remove(&(to, from)) {
                self.record(vec![TraceEvent::new(now, to, Action::Unblock).peer(from)]);
            }
        }
    }

    /// Runs one activation; returns the new delayed send, if any, and the
    /// messages to put on the wire.
    fn activate(
        &mut self,
        node: NodeId,
        inbox: Vec<InFlight>,
        now: u64,
    ) -> Result<(Option<Attempt>, Vec<InFlight>), SimError> {
        self.report.events_processed += 1;
        for item in &inbox {
            self.consume(item, now);
        }
        let msgs: Vec<ModelMessage> = inbox.into_iter().map(|f| f.msg).collect();
        let ctx = StepContext {
            problem: self.problem,
            opts: &self.cfg.model,
            now,
        };
        let mut out = StepOutput::default();
        match (&mut self.nodes[node.index()], self.algorithm) {
            (Slot::A1(s), Algorithm::Alg1(schedule)) => {
                alg1_step(s, &msgs, schedule, &ctx, &mut out)?
            }
            (Slot::A2(s), _) => alg2_step(s, &msgs, &ctx, &mut out)?,
            _ => unreachable!("slot kind follows the algorithm"),
        }
        if let Some(tag) = out.root_tag {
            self.outstanding.entry(tag).or_insert(0);
            self.open_sweeps.push((tag, node));
        }
        let wire = out.sends.drain(..).map(|m| self.stamp(m, false)).collect();
        let attempt = out.attempt.take();
        self.record(out.events);
        Ok((attempt, wire))
    }

    fn stamp(&mut self, msg: ModelMessage, blocking: bool) -> InFlight {
        self.report.messages_sent += 1;
        if self.cfg.record_messages {
            self.report.messages.push(msg.clone());
        }
        if msg.sweep_tag != 0 {
            *self.outstanding.entry(msg.sweep_tag).or_insert(0) += 1;
        }
        let seq = self.send_seq.entry((msg.from, msg.to)).or_insert(0);
        *seq += 1;
        InFlight {
            msg,
            edge_seq: *seq,
            blocking,
        }
    }

    /// Settles a delayed send against the line flags.
    fn resolve(&mut self, attempt: Attempt, now: u64) -> Option<InFlight> {
        let (i, k) = (attempt.node, attempt.target);
        let blocked = self.blocked.contains(&(i, k));
        let mut out = StepOutput::default();
        let Slot::A2(state) = &mut self.nodes[i.index()] else {
            unreachable!("attempts come from alg2 nodes")
        };
        let sent = resolve_attempt(state, attempt, blocked, now, &mut out);
        if !sent {
            self.report.skipped_sends += 1;
            return None;
        }
        if self.live_step_d.get(&(k, i)).copied().unwrap_or(0) > 0 {
            self.report.double_fire_violations += 1;
        }
        *self.live_step_d.entry((i, k)).or_insert(0) += 1;
        self.blocked.insert((k, i));
        let mut events = vec![TraceEvent::new(now, i, Action::Block).peer(k)];
        events.extend(out.events);
        self.record(events);
        let msg = out.sends.pop().expect("successful send emits one message");
        Some(self.stamp(msg, true))
    }

    fn snapshot(&self) -> Assignment {
        Assignment::new(self.nodes.iter().map(|s| s.core().y.clone()).collect())
    }

    /// Closes every sweep without outstanding messages; returns how many.
    fn check_sweeps(&mut self, now: u64) -> usize {
        let mut closed = 0;
        let mut k = 0;
        while k < self.open_sweeps.len() {
            let (tag, root) = self.open_sweeps[k];
            if self.outstanding.get(&tag).copied().unwrap_or(0) != 0 {
                k += 1;
                continue;
            }
            self.open_sweeps.remove(k);
            self.outstanding.remove(&tag);
            closed += 1;
            let snap = self.snapshot();
            let max_change = snap.max_abs_diff(self.report.final_snapshot());
            self.report.snapshots.push(snap);
            self.report.root_history.push(root);
            self.report.sweeps_completed += 1;
            self.report.sweeps.push(SweepRecord {
                sweep: self.report.sweeps_completed,
                root,
                ticks: now,
                messages: self.report.messages_sent,
                max_change,
            });
            if self.done.is_none() {
                if max_change < self.cfg.tol {
                    self.done = Some(RunStatus::Converged);
                } else if self.report.sweeps_completed >= self.cfg.max_sweeps {
                    self.done = Some(RunStatus::BudgetExhausted);
                }
            }
        }
        closed
    }

    fn finish(mut self, now: u64, status: RunStatus) -> SimReport {
        self.report.status = self.done.unwrap_or(status);
        self.report.ticks_elapsed = now;
        for s in &self.nodes {
            let c = s.core();
            self.report.buffer_overwrites += c.overwrites;
            self.report.solver_failures += c.solver_failures;
            self.report.max_regularization =
                self.report.max_regularization.max(c.max_regularization);
        }
        self.report
    }
}

fn validate(problem: &TreeProblem, algorithm: &Algorithm, cfg: &SimConfig) -> Result<(), SimError> {
    if cfg.delta == 0 {
        return Err(SimError::InvalidConfig(
            "delta must be at least one tick".into(),
        ));
    }
    if cfg.delays.min == 0 || cfg.delays.min > cfg.delays.max {
        return Err(SimError::InvalidConfig(format!(
            "delay range [{}, {}] must satisfy 1 <= min <= max",
            cfg.delays.min, cfg.delays.max
        )));
    }
    if cfg.max_sweeps == 0 {
        return Err(SimError::InvalidConfig(
            "max_sweeps must be positive".into(),
        ));
    }
    if !(cfg.model.sigma >= 0.0) {
        return Err(SimError::InvalidConfig("sigma must be nonnegative".into()));
    }
    if let Algorithm::Alg1(schedule) = algorithm {
        if !problem.tree().contains(schedule.root(0))
            || schedule.rooted(0).tree().len() != problem.len()
        {
            return Err(SimError::InvalidConfig(
                "root schedule does not match the problem".into(),
            ));
        }
    }
    Ok(())
}

/// Barrier-synchronized execution: every node activates once per `delta`.
pub fn run_sync(
    problem: &TreeProblem,
    algorithm: &Algorithm,
    cfg: &SimConfig,
) -> Result<SimReport, SimError> {
    let mut eng = Engine::new(problem, algorithm, cfg)?;
    let n = problem.len();
    let mut queue: BTreeMap<(u64, u64), InFlight> = BTreeMap::new();
    let mut seq = 0u64;
    let mut now = 0u64;
    loop {
        let later = queue.split_off(&(now + 1, 0));
        let due = std::mem::replace(&mut queue, later);
        let mut inboxes: Vec<Vec<InFlight>> = vec![Vec::new(); n];
        for (_, item) in due {
            eng.report.events_processed += 1;
            inboxes[item.msg.to.index()].push(item);
        }
        let sent_before = eng.report.messages_sent;
        let mut attempts = Vec::new();
        for (idx, inbox) in inboxes.into_iter().enumerate() {
            let (attempt, wire) = eng.activate(NodeId::from_index(idx), inbox, now)?;
            for item in wire {
                seq += 1;
                queue.insert((now + cfg.delta, seq), item);
            }
            attempts.extend(attempt);
        }
        attempts.sort_by_key(|a| (a.delay, a.node));
        let had_attempts = !attempts.is_empty();
        for a in attempts {
            if let Some(item) = eng.resolve(a, now) {
                seq += 1;
                queue.insert((now + cfg.delta, seq), item);
            }
        }
        let closed = eng.check_sweeps(now);
        if eng.done.is_some() {
            return Ok(eng.finish(now, RunStatus::Converged));
        }
        if eng.report.events_processed >= cfg.max_events {
            return Ok(eng.finish(now, RunStatus::BudgetExhausted));
        }
        let idle = queue.is_empty()
            && !had_attempts
            && closed == 0
            && eng.report.messages_sent == sent_before;
        if idle {
            return Ok(eng.finish(now, RunStatus::Stalled));
        }
        now += cfg.delta;
    }
}

#[derive(Debug)]
enum Ev {
    Activate(NodeId),
    Deliver(InFlight),
    Resolve(NodeId),
}

struct Channels {
    seed: u64,
    law: DelayLaw,
    rngs: BTreeMap<(NodeId, NodeId), (StreamRng, u64)>,
    last: BTreeMap<(NodeId, NodeId), u64>,
}

impl Channels {
    /// Delivery time of a message put on `(from, to)` at `now`.
    fn delivery_time(&mut self, from: NodeId, to: NodeId, now: u64) -> u64 {
        let (seed, law) = (self.seed, self.law);
        let (rng, base) = self.rngs.entry((from, to)).or_insert_with(|| {
            let base = if law.skewed {
                substream(seed, &format!("skew/{from}-{to}")).random_range(0..=4 * law.max)
            } else {
                0
            };
            (substream(seed, &format!("edge/{from}-{to}")), base)
        });
        let t = now + *base + rng.random_range(law.min..=law.max);
        let last = self.last.entry((from, to)).or_insert(0);
        let t = t.max(*last);
        *last = t;
        t
    }
}

/// Event-driven execution of unsynchronized nodes.
pub fn run_async(
    problem: &TreeProblem,
    algorithm: &Algorithm,
    cfg: &SimConfig,
) -> Result<SimReport, SimError> {
    let mut eng = Engine::new(problem, algorithm, cfg)?;
    let n = problem.len();
    let mut heap: BTreeMap<(u64, u64), Ev> = BTreeMap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BTreeMap<(u64, u64), Ev>, t: u64, ev: Ev| {
        seq += 1;
        heap.insert((t, seq), ev);
    };
    let mut channels = Channels {
        seed: cfg.seed,
        law: cfg.delays,
        rngs: BTreeMap::new(),
        last: BTreeMap::new(),
    };
    let mut wake = substream(cfg.seed, "activation");
    let mut retry_rngs: Vec<StreamRng> = (0..n)
        .map(|k| substream(cfg.seed, &format!("retry/{}", NodeId::from_index(k))))
        .collect();
    for k in 0..n {
        let t = wake.random_range(0..=cfg.delays.max);
        push(&mut heap, t, Ev::Activate(NodeId::from_index(k)));
    }
    let mut busy: Vec<Option<Attempt>> = vec![None; n];
    let mut pending: Vec<Vec<InFlight>> = vec![Vec::new(); n];
    let mut retry_scheduled = vec![false; n];
    let mut now = 0;
    while let Some(((t, _), ev)) = heap.pop_first() {
        now = t;
        let (node, inbox) = match ev {
            Ev::Deliver(item) => {
                let to = item.msg.to;
                if busy[to.index()].is_some() {
                    pending[to.index()].push(item);
                    continue;
                }
                (to, vec![item])
            }
            Ev::Activate(node) => {
                retry_scheduled[node.index()] = false;
                if busy[node.index()].is_some() {
                    continue;
                }
                (node, Vec::new())
            }
            Ev::Resolve(node) => {
                let attempt = busy[node.index()]
                    .take()
                    .expect("resolve follows an attempt");
                eng.report.events_processed += 1;
                if let Some(item) = eng.resolve(attempt, now) {
                    let at = channels.delivery_time(item.msg.from, item.msg.to, now);
                    push(&mut heap, at, Ev::Deliver(item));
                }
                let queued = std::mem::take(&mut pending[node.index()]);
                if queued.is_empty() {
                    eng.check_sweeps(now);
                    schedule_retry(
                        &eng,
                        node,
                        now,
                        &mut retry_scheduled,
                        &mut retry_rngs,
                        cfg,
                        &mut heap,
                        &mut push,
                    );
                    if let Some(status) = stop(&eng, cfg) {
                        return Ok(eng.finish(now, status));
                    }
                    continue;
                }
                (node, queued)
            }
        };
        let (attempt, wire) = eng.activate(node, inbox, now)?;
        for item in wire {
            let at = channels.delivery_time(item.msg.from, item.msg.to, now);
            push(&mut heap, at, Ev::Deliver(item));
        }
        if let Some(a) = attempt {
            push(&mut heap, now + a.delay, Ev::Resolve(node));
            busy[node.index()] = Some(a);
        }
        eng.check_sweeps(now);
        if busy[node.index()].is_none() {
            schedule_retry(
                &eng,
                node,
                now,
                &mut retry_scheduled,
                &mut retry_rngs,
                cfg,
                &mut heap,
                &mut push,
            );
        }
        if let Some(status) = stop(&eng, cfg) {
            return Ok(eng.finish(now, status));
        }
    }
    Ok(eng.finish(now, RunStatus::Stalled))
}

fn stop(eng: &Engine, cfg: &SimConfig) -> Option<RunStatus> {
    if let Some(s) = eng.done {
        return Some(s);
    }
    (eng.report.events_processed >= cfg.max_events).then_some(RunStatus::BudgetExhausted)
}

/// A node that would act again without input wakes itself after a random pause.
#[allow(clippy::too_many_arguments)]
fn schedule_retry(
    eng: &Engine,
    node: NodeId,
    now: u64,
    scheduled: &mut [bool],
    rngs: &mut [StreamRng],
    cfg: &SimConfig,
    heap: &mut BTreeMap<(u64, u64), Ev>,
    push: &mut impl FnMut(&mut BTreeMap<(u64, u64), Ev>, u64, Ev),
) {
    let k = node.index();
    if !scheduled[k] && eng.nodes[k].is_ready() {
        scheduled[k] = true;
        let pause = rngs[k].random_range(cfg.delays.min..=cfg.delays.max);
        push(heap, now + pause, Ev::Activate(node));
    }
}

/// Runs in the configured mode.
pub fn run(
    problem: &TreeProblem,
    algorithm: &Algorithm,
    cfg: &SimConfig,
) -> Result<SimReport, SimError> {
    match cfg.mode {
        Mode::Sync => run_sync(problem, algorithm, cfg),
        Mode::Async => run_async(problem, algorithm, cfg),
    }
}

/// One row of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub sweep: usize,
    pub error: Option<f64>,
    pub ticks: u64,
    pub messages: u64,
}

/// Per-sweep `‖x_k − x*‖∞`, starting with the initial point as sweep 0.
pub fn convergence_trace(report: &SimReport, x_star: Option<&Assignment>) -> Vec<TracePoint> {
    report
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, snap)| {
            let (ticks, messages) = if k == 0 {
                (0, 0)
            } else {
                (report.sweeps[k - 1].ticks, report.sweeps[k - 1].messages)
            };
            TracePoint {
                sweep: k,
                error: x_star.map(|x| snap.max_abs_diff(x)),
                ticks,
                messages,
            }
        })
        .collect()
}

pub fn write_trace_csv<W: Write>(mut out: W, trace: &[TracePoint]) -> std::io::Result<()> {
    writeln!(out, "sweep,error,ticks,messages")?;
    for p in trace {
        let err = p.error.map(|e| format!("{e:e}")).unwrap_or_default();
        writeln!(out, "{},{},{},{}", p.sweep, err, p.ticks, p.messages)?;
    }
    Ok(())
}

/// Parses the output of [`write_trace_csv`].
pub fn read_trace_csv(text: &str) -> Result<Vec<TracePoint>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "sweep,error,ticks,messages" => {}
        _ => return Err("missing trace header".into()),
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(format!("line {}: expected 4 fields", k + 2));
        }
        let bad = |what: &str| format!("line {}: bad {what}", k + 2);
        out.push(TracePoint {
            sweep: f[0].parse().map_err(|_| bad("sweep"))?,
            error: if f[1].is_empty() {
                None
            } else {
                Some(f[1].parse().map_err(|_| bad("error"))?)
            },
            ticks: f[2].parse().map_err(|_| bad("ticks"))?,
            messages: f[3].parse().map_err(|_| bad("messages"))?,
        });
    }
    Ok(out)
}

pub fn write_report_json<W: Write>(mut out: W, report: &SimReport) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)
}

pub fn write_events_jsonl<W: Write>(mut out: W, events: &[TraceEvent]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        writeln!(out)?;
    }
    Ok(())
}
