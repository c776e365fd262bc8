//! Radial AC state estimation.
//!
//! ```text
//!   p_i = v_i Σ_j v_j (G_ij cos θ_ij + B_ij sin θ_ij)
//!   q_i = v_i Σ_j v_j (G_ij sin θ_ij + B_ij cos θ_ij)
//!   P_ij = v_i² G_ij − v_i v_j (G_ij cos θ_ij + B_ij sin θ_ij)
//!   Q_ij = v_i v_j (G_ij sin θ_ij + B_ij cos θ_ij) − v_i² B_ij
//!   I_ij = sqrt(P_ij² + Q_ij²) / v_i                 θ_ij = θ_i − θ_j
//! ```
//!
//! Bus `i` estimates `x_i = (v_i, θ_i, v_j, θ_j, …)` over its sorted
//! neighbors `j` from weighted residuals
//! `(v_i − v̂_i, θ_i − θ̂_i, p_i − p̂_i, q_i − q̂_i, I_ij − Î_ij, …)`.
//! Voltages are per unit, angles in radians.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Mat, Vector};
use crate::problem::{
    lift_shared_variables, Assignment, LeastSquares, LiftedLayout, NodeObjective, ProblemError,
    Residual, TreeProblem,
};
use crate::rng::substream;
use crate::tree::{NodeId, Tree};

pub const GRID_SCHEMA: &str = "multisweep-grid/1";

const CASE33: &str = include_str!("../data/case33.json");

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("malformed grid file: {0}")]
    Parse(String),
    #[error("grid is not radial: {0}")]
    NotRadial(String),
    #[error("voltage magnitude at bus {0} is zero")]
    ZeroVoltage(NodeId),
    #[error("({0}, {1}) is not a line of the grid")]
    UnknownLine(NodeId, NodeId),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Branch between buses `i` and `j` with series admittance `g + jb`.
/// `r` and `x` record the source impedance in ohm when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridLine {
    pub i: usize,
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    pub g: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusState {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl BusState {
    pub fn flat(n: usize) -> Self {
        BusState {
            v: vec![1.0; n],
            theta: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// `(v_1, θ_1, v_2, θ_2, …)`.
    pub fn to_physical(&self) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.theta)
            .flat_map(|(&v, &t)| [v, t])
            .collect()
    }

    pub fn from_physical(values: &[f64]) -> Self {
        BusState {
            v: values.iter().step_by(2).copied().collect(),
            theta: values.iter().skip(1).step_by(2).copied().collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &BusState) -> f64 {
        self.to_physical()
            .iter()
            .zip(other.to_physical())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Measurement noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevels {
    pub v: f64,
    pub theta: f64,
    pub p: f64,
    pub q: f64,
    pub current: f64,
}

impl NoiseLevels {
    pub fn uniform(sd: f64) -> Self {
        NoiseLevels {
            v: sd,
            theta: sd,
            p: sd,
            q: sd,
            current: sd,
        }
    }
}

/// Diagonal of `Σ_i` followed by the scalar weight of every line current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementWeights {
    pub v: f64,
    pub theta: f64,
    pub p: f64,
    pub q: f64,
    pub current: f64,
}

impl Default for MeasurementWeights {
    fn default() -> Self {
        MeasurementWeights {
            v: 1.0,
            theta: 1.0,
            p: 1.0,
            q: 1.0,
            current: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    schema: Option<String>,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    base_kv: Option<f64>,
    #[serde(default)]
    base_mva: Option<f64>,
    n_bus: usize,
    edges: Vec<GridLine>,
    #[serde(default)]
    truth: Option<BusState>,
    #[serde(default)]
    noise: Option<NoiseLevels>,
    #[serde(default)]
    weights: Option<MeasurementWeights>,
}

/// Radial network with per-line admittances.
#[derive(Debug, Clone)]
pub struct GridData {
    pub name: String,
    pub n_bus: usize,
    pub lines: Vec<GridLine>,
    pub truth: Option<BusState>,
    pub noise: Option<NoiseLevels>,
    pub weights: Option<MeasurementWeights>,
    tree: Tree,
    admittance: BTreeMap<(NodeId, NodeId), (f64, f64)>,
}

impl GridData {
    pub fn new(n_bus: usize, lines: Vec<GridLine>) -> Result<Self, PowerError> {
        let pairs: Vec<(usize, usize)> = lines.iter().map(|l| (l.i, l.j)).collect();
        let tree = Tree::new(n_bus, &pairs).map_err(|e| PowerError::NotRadial(e.to_string()))?;
        let mut admittance = BTreeMap::new();
        for l in &lines {
            if !(l.g.is_finite() && l.b.is_finite()) {
                return Err(PowerError::Parse(format!(
                    "line ({}, {}) has a non-finite admittance",
                    l.i, l.j
                )));
            }
            admittance.insert((NodeId(l.i), NodeId(l.j)), (l.g, l.b));
            admittance.insert((NodeId(l.j), NodeId(l.i)), (l.g, l.b));
        }
        Ok(GridData {
            name: String::new(),
            n_bus,
            lines,
            truth: None,
            noise: None,
            weights: None,
            tree,
            admittance,
        })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    /// `(G_ij, B_ij)`.
    pub fn admittance(&self, i: NodeId, j: NodeId) -> Option<(f64, f64)> {
        self.admittance.get(&(i, j)).copied()
    }

    fn check_state(&self, state: &BusState) -> Result<(), PowerError> {
        if state.v.len() != self.n_bus || state.theta.len() != self.n_bus {
            return Err(PowerError::DimensionMismatch(format!(
                "state has {} / {} entries for {} buses",
                state.v.len(),
                state.theta.len(),
                self.n_bus
            )));
        }
        Ok(())
    }
}

pub fn parse_grid(text: &str) -> Result<GridData, PowerError> {
    if text.trim().is_empty() {
        return Err(PowerError::Parse("empty grid file".into()));
    }
    let file: GridFile =
        serde_json::from_str(text).map_err(|e| PowerError::Parse(e.to_string()))?;
    if let Some(schema) = &file.schema {
        if schema != GRID_SCHEMA {
            return Err(PowerError::Parse(format!("unsupported schema {schema:?}")));
        }
    }
    let mut grid = GridData::new(file.n_bus, file.edges)?;
    grid.name = file.name.unwrap_or_default();
    if let Some(t) = &file.truth {
        grid.check_state(t)?;
    }
    grid.truth = file.truth;
    grid.noise = file.noise;
    grid.weights = file.weights;
    Ok(grid)
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<GridData, PowerError> {
    parse_grid(&std::fs::read_to_string(path)?)
}

/// The bundled 33-bus feeder.
pub fn case33() -> GridData {
    parse_grid(CASE33).expect("bundled case parses")
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    /// `G cos Δ + B sin Δ`
    Active,
    /// `G sin Δ + B cos Δ`
    Reactive,
}

/// `φ(Δ)` and `φ'(Δ)`; `φ'' = −φ` for both kinds.
fn phi(kind: Kind, g: f64, b: f64, delta: f64) -> (f64, f64) {
    let (s, c) = delta.sin_cos();
    match kind {
        Kind::Active => (g * c + b * s, -g * s + b * c),
        Kind::Reactive => (g * s + b * c, g * c - b * s),
    }
}

/// `T = v_i v_j φ(θ_i − θ_j)` with gradient and Hessian in `(v_i, θ_i, v_j, θ_j)`.
fn pair_term(kind: Kind, g: f64, b: f64, z: &Vector4<f64>) -> (f64, Vector4<f64>, Matrix4<f64>) {
    let (vi, ti, vj, tj) = (z[0], z[1], z[2], z[3]);
    let (f, df) = phi(kind, g, b, ti - tj);
    let value = vi * vj * f;
    let grad = Vector4::new(vj * f, vi * vj * df, vi * f, -vi * vj * df);
    #[rustfmt::skip]
    let hess = Matrix4::new(
        0.0,      vj * df,       f,        -vj * df,
        vj * df,  -vi * vj * f,  vi * df,  vi * vj * f,
        f,        vi * df,       0.0,      -vi * df,
        -vj * df, vi * vj * f,   -vi * df, -vi * vj * f,
    );
    (value, grad, hess)
}

struct Flow {
    p: f64,
    q: f64,
    dp: Vector4<f64>,
    dq: Vector4<f64>,
    hp: Matrix4<f64>,
    hq: Matrix4<f64>,
}

fn line_terms(g: f64, b: f64, z: &Vector4<f64>) -> Flow {
    let vi = z[0];
    let (ta, dta, hta) = pair_term(Kind::Active, g, b, z);
    let (tf, dtf, htf) = pair_term(Kind::Reactive, g, b, z);
    let e0 = Vector4::new(1.0, 0.0, 0.0, 0.0);
    let e00 = e0 * e0.transpose();
    Flow {
        p: g * vi * vi - ta,
        q: tf - b * vi * vi,
        dp: e0 * (2.0 * g * vi) - dta,
        dq: dtf - e0 * (2.0 * b * vi),
        hp: e00 * (2.0 * g) - hta,
        hq: htf - e00 * (2.0 * b),
    }
}

/// Line current magnitude with gradient and Hessian in `(v_i, θ_i, v_j, θ_j)`.
fn current_terms(g: f64, b: f64, z: &Vector4<f64>) -> (f64, Vector4<f64>, Matrix4<f64>) {
    let fl = line_terms(g, b, z);
    let u = 1.0 / z[0];
    let s = fl.p.hypot(fl.q);
    let e0 = Vector4::new(1.0, 0.0, 0.0, 0.0);
    let du = e0 * (-u * u);
    let hu = e0 * e0.transpose() * (2.0 * u * u * u);
    let (ds, hs) = if s > 0.0 {
        let ds = (fl.dp * fl.p + fl.dq * fl.q) / s;
        let hs =
            (fl.dp * fl.dp.transpose() + fl.hp * fl.p + fl.dq * fl.dq.transpose() + fl.hq * fl.q)
                / s
                - ds * ds.transpose() / s;
        (ds, hs)
    } else {
        (Vector4::zeros(), Matrix4::zeros())
    };
    let value = s * u;
    let grad = ds * u + du * s;
    let hess = hs * u + ds * du.transpose() + du * ds.transpose() + hu * s;
    (value, grad, hess)
}

fn local_point(state: &BusState, i: NodeId, j: NodeId) -> Vector4<f64> {
    Vector4::new(
        state.v[i.index()],
        state.theta[i.index()],
        state.v[j.index()],
        state.theta[j.index()],
    )
}

/// `(p_i, q_i)` at `state`.
pub fn bus_power(grid: &GridData, state: &BusState, i: NodeId) -> (f64, f64) {
    grid.tree
        .neighbors(i)
        .iter()
        .fold((0.0, 0.0), |(p, q), &j| {
            let (g, b) = grid.admittance(i, j).expect("neighbors are lines");
            let z = local_point(state, i, j);
            (
                p + pair_term(Kind::Active, g, b, &z).0,
                q + pair_term(Kind::Reactive, g, b, &z).0,
            )
        })
}

/// `(P_ij, Q_ij, I_ij)` at `state`.
pub fn line_flow(
    grid: &GridData,
    state: &BusState,
    i: NodeId,
    j: NodeId,
) -> Result<(f64, f64, f64), PowerError> {
    let (g, b) = grid.admittance(i, j).ok_or(PowerError::UnknownLine(i, j))?;
    let vi = state.v[i.index()];
    if vi == 0.0 {
        return Err(PowerError::ZeroVoltage(i));
    }
    let fl = line_terms(g, b, &local_point(state, i, j));
    Ok((fl.p, fl.q, fl.p.hypot(fl.q) / vi.abs()))
}

/// Current magnitude measured at `from` on the line to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentMeasurement {
    pub from: NodeId,
    pub to: NodeId,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// One entry per line end, ordered by `(from, to)`.
    pub current: Vec<CurrentMeasurement>,
    pub weights: MeasurementWeights,
}

impl Measurements {
    pub fn current(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.current
            .iter()
            .find(|c| c.from == from && c.to == to)
            .map(|c| c.value)
    }
}

/// Model values at `truth` plus Gaussian noise from the `measurements`
/// substream of `seed`.
pub fn synthesize_measurements(
    grid: &GridData,
    truth: &BusState,
    noise: &NoiseLevels,
    weights: &MeasurementWeights,
    seed: u64,
) -> Result<Measurements, PowerError> {
    grid.check_state(truth)?;
    let mut rng = substream(seed, "measurements");
    let mut draw = |sd: f64| {
        if sd > 0.0 {
            sd * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    };
    let mut m = Measurements {
        v: Vec::with_capacity(grid.n_bus),
        theta: Vec::with_capacity(grid.n_bus),
        p: Vec::with_capacity(grid.n_bus),
        q: Vec::with_capacity(grid.n_bus),
        current: Vec::new(),
        weights: *weights,
    };
    for i in grid.tree.nodes() {
        let (p, q) = bus_power(grid, truth, i);
        m.v.push(truth.v[i.index()] + draw(noise.v));
        m.theta.push(truth.theta[i.index()] + draw(noise.theta));
        m.p.push(p + draw(noise.p));
        m.q.push(q + draw(noise.q));
    }
    for i in grid.tree.nodes() {
        for &j in grid.tree.neighbors(i) {
            let (_, _, current) = line_flow(grid, truth, i, j)?;
            m.current.push(CurrentMeasurement {
                from: i,
                to: j,
                value: current + draw(noise.current),
            });
        }
    }
    Ok(m)
}

/// Residual of one bus written in its lifted local variables.
#[derive(Debug, Clone)]
pub struct BusResidual {
    dim: usize,
    /// Measured `(v̂, θ̂, p̂, q̂)`.
    bus: [f64; 4],
    /// Per neighbor: `(G, B, local index of v_j, local index of θ_j, Î_ij)`.
    lines: Vec<(f64, f64, usize, usize, f64)>,
}

impl BusResidual {
    fn local(&self, x: &Vector, k: usize) -> Vector4<f64> {
        let (_, _, pv, pt, _) = self.lines[k];
        Vector4::new(x[0], x[1], x[pv], x[pt])
    }

    fn index(&self, k: usize) -> [usize; 4] {
        let (_, _, pv, pt, _) = self.lines[k];
        [0, 1, pv, pt]
    }

    fn scatter_row(&self, m: &mut Mat, row: usize, k: usize, grad: &Vector4<f64>) {
        for (a, &ia) in self.index(k).iter().enumerate() {
            m[(row, ia)] += grad[a];
        }
    }

    fn scatter(&self, m: &mut Mat, k: usize, h: &Matrix4<f64>, w: f64) {
        let idx = self.index(k);
        for (a, &ia) in idx.iter().enumerate() {
            for (c, &ic) in idx.iter().enumerate() {
                m[(ia, ic)] += w * h[(a, c)];
            }
        }
    }
}

impl Residual for BusResidual {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        4 + self.lines.len()
    }

    fn eval(&self, x: &Vector) -> Vector {
        let mut r = Vector::zeros(self.output_dim());
        r[0] = x[0] - self.bus[0];
        r[1] = x[1] - self.bus[1];
        r[2] = -self.bus[2];
        r[3] = -self.bus[3];
        for (k, &(g, b, _, _, meas)) in self.lines.iter().enumerate() {
            let z = self.local(x, k);
            r[2] += pair_term(Kind::Active, g, b, &z).0;
            r[3] += pair_term(Kind::Reactive, g, b, &z).0;
            r[4 + k] = current_terms(g, b, &z).0 - meas;
        }
        r
    }

    fn jacobian(&self, x: &Vector) -> Mat {
        let mut j = Mat::zeros(self.output_dim(), self.dim);
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 1.0;
        for (k, &(g, b, _, _, _)) in self.lines.iter().enumerate() {
            let z = self.local(x, k);
            let (_, da, _) = pair_term(Kind::Active, g, b, &z);
            let (_, dr, _) = pair_term(Kind::Reactive, g, b, &z);
            let (_, di, _) = current_terms(g, b, &z);
            self.scatter_row(&mut j, 2, k, &da);
            self.scatter_row(&mut j, 3, k, &dr);
            self.scatter_row(&mut j, 4 + k, k, &di);
        }
        j
    }

    fn weighted_curvature(&self, x: &Vector, w: &Vector) -> Mat {
        let mut m = Mat::zeros(self.dim, self.dim);
        for (k, &(g, b, _, _, _)) in self.lines.iter().enumerate() {
            let z = self.local(x, k);
            self.scatter(&mut m, k, &pair_term(Kind::Active, g, b, &z).2, w[2]);
            self.scatter(&mut m, k, &pair_term(Kind::Reactive, g, b, &z).2, w[3]);
            self.scatter(&mut m, k, &current_terms(g, b, &z).2, w[4 + k]);
        }
        m
    }
}

/// Lifted estimation problem and the map back to bus states.
#[derive(Debug, Clone)]
pub struct EstimationProblem {
    pub problem: TreeProblem,
    pub layout: LiftedLayout,
}

impl EstimationProblem {
    pub fn lift(&self, state: &BusState) -> Assignment {
        self.layout.lift_point(&state.to_physical())
    }

    /// Owner copies of every bus variable.
    pub fn state(&self, x: &Assignment) -> BusState {
        BusState::from_physical(&self.layout.project(x))
    }
}

/// Bus `b` owns variables `2(b−1)` (voltage) and `2(b−1)+1` (angle).
pub fn build_estimation_problem(
    grid: &GridData,
    meas: &Measurements,
) -> Result<EstimationProblem, PowerError> {
    let n = grid.n_bus;
    if meas.v.len() != n || meas.theta.len() != n || meas.p.len() != n || meas.q.len() != n {
        return Err(PowerError::DimensionMismatch(format!(
            "measurements do not cover {n} buses"
        )));
    }
    let w = meas.weights;
    for (name, val) in [
        ("v", w.v),
        ("theta", w.theta),
        ("p", w.p),
        ("q", w.q),
        ("current", w.current),
    ] {
        if !(val > 0.0 && val.is_finite()) {
            return Err(PowerError::Parse(format!("weight {name} must be positive")));
        }
    }
    let tree = &grid.tree;
    let owner: Vec<NodeId> = (0..2 * n).map(|v| NodeId::from_index(v / 2)).collect();
    let reads: Vec<Vec<usize>> = tree
        .nodes()
        .map(|i| {
            let mut vars = vec![2 * i.index(), 2 * i.index() + 1];
            for &j in tree.neighbors(i) {
                vars.extend([2 * j.index(), 2 * j.index() + 1]);
            }
            vars
        })
        .collect();
    let layout = lift_shared_variables(tree, &owner, &reads)?;
    let mut objectives = Vec::with_capacity(n);
    for i in tree.nodes() {
        let locals = &layout.locals[i.index()];
        let pos = |var: usize| {
            locals
                .iter()
                .position(|&v| v == var)
                .expect("read variables are local")
        };
        if pos(2 * i.index()) != 0 || pos(2 * i.index() + 1) != 1 {
            return Err(PowerError::DimensionMismatch(
                "owned variables must lead the local vector".into(),
            ));
        }
        let mut lines = Vec::new();
        for &j in tree.neighbors(i) {
            let (g, b) = grid.admittance(i, j).expect("neighbors are lines");
            let meas_i = meas.current(i, j).ok_or(PowerError::UnknownLine(i, j))?;
            lines.push((g, b, pos(2 * j.index()), pos(2 * j.index() + 1), meas_i));
        }
        let k = i.index();
        let residual = BusResidual {
            dim: locals.len(),
            bus: [meas.v[k], meas.theta[k], meas.p[k], meas.q[k]],
            lines,
        };
        let mut diag = vec![w.v, w.theta, w.p, w.q];
        diag.extend(std::iter::repeat_n(w.current, residual.lines.len()));
        let weight = Mat::from_diagonal(&Vector::from_vec(diag));
        objectives.push(NodeObjective::LeastSquares(LeastSquares::new(
            Arc::new(residual),
            weight,
        )));
    }
    let start = BusState {
        v: meas.v.clone(),
        theta: meas.theta.clone(),
    };
    let initial = layout.lift_point(&start.to_physical());
    let problem = layout
        .clone()
        .into_problem(objectives)?
        .with_initial(initial)?;
    Ok(EstimationProblem { problem, layout })
}

/// Estimation problem for `grid` using its stored truth, noise and weights.
pub fn default_estimation(
    grid: &GridData,
    seed: u64,
) -> Result<(EstimationProblem, Measurements), PowerError> {
    let truth = grid
        .truth
        .clone()
        .unwrap_or_else(|| BusState::flat(grid.n_bus));
    let meas = synthesize_measurements(
        grid,
        &truth,
        &grid.noise.unwrap_or_default(),
        &grid.weights.unwrap_or_default(),
        seed,
    )?;
    Ok((build_estimation_problem(grid, &meas)?, meas))
}
