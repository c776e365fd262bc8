//! Tree-structured optimization problems
//!
//! ```text
//!   min  Σ_i F_i(x_i)   s.t.  S_ij x_i = S_ji x_j   for every tree edge (i, j), i < j
//! ```
//!
//! together with the JSON problem-file format, assignment export and the
//! lifting of objectives over shared physical variables into that form.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{inf_norm, mat_from_rows, mat_to_rows, Mat, Vector};
use crate::tree::{NodeId, Tree, TreeError};

pub const PROBLEM_SCHEMA: &str = "multisweep-problem/1";

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("edge ({0}, {1}) is not a tree edge")]
    UnknownEdge(NodeId, NodeId),
    #[error("edge ({0}, {1}) has no coupling")]
    MissingCoupling(NodeId, NodeId),
    #[error("variable {var} read by node {node} is owned by non-neighbor {owner}")]
    SharingViolatesTree {
        var: usize,
        node: NodeId,
        owner: NodeId,
    },
    #[error("nodes {0} and {1} share no variable")]
    EmptyCoupling(NodeId, NodeId),
    #[error("objective of node {0} cannot be written to a problem file")]
    NotSerializable(NodeId),
    #[error("malformed problem file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which second-order information the solvers use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianMode {
    #[default]
    Exact,
    GaussNewton,
}

/// Twice-differentiable objective supplied through callbacks.
pub trait SmoothObjective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> Mat;
}

/// Residual map `r: R^n -> R^m` of a least-squares objective.
pub trait Residual: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> Vector;
    fn jacobian(&self, x: &Vector) -> Mat;
    /// `Σ_k w_k ∇²r_k(x)`.
    fn weighted_curvature(&self, x: &Vector, w: &Vector) -> Mat;
}

/// `r(x) = A x - b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearResidual {
    pub a: Mat,
    pub b: Vector,
}

impl Residual for LinearResidual {
    fn input_dim(&self) -> usize {
        self.a.ncols()
    }
    fn output_dim(&self) -> usize {
        self.a.nrows()
    }
    fn eval(&self, x: &Vector) -> Vector {
        &self.a * x - &self.b
    }
    fn jacobian(&self, _x: &Vector) -> Mat {
        self.a.clone()
    }
    fn weighted_curvature(&self, x: &Vector, _w: &Vector) -> Mat {
        Mat::zeros(x.len(), x.len())
    }
}

/// `F(x) = ½ r(x)ᵀ W r(x)` with `W` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub residual: Arc<dyn Residual>,
    pub weight: Mat,
    linear: Option<LinearResidual>,
}

impl LeastSquares {
    pub fn new(residual: Arc<dyn Residual>, weight: Mat) -> Self {
        LeastSquares {
            residual,
            weight,
            linear: None,
        }
    }

    pub fn linear(a: Mat, b: Vector, weight: Mat) -> Self {
        let lin = LinearResidual { a, b };
        LeastSquares {
            residual: Arc::new(lin.clone()),
            weight,
            linear: Some(lin),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let r = self.residual.eval(x);
        0.5 * r.dot(&(&self.weight * &r))
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let r = self.residual.eval(x);
        self.residual.jacobian(x).transpose() * (&self.weight * r)
    }

    /// `Jᵀ W J`: the Hessian with residual curvature dropped.
    pub fn gauss_newton_hessian(&self, x: &Vector) -> Mat {
        let j = self.residual.jacobian(x);
        j.transpose() * &self.weight * j
    }

    pub fn exact_hessian(&self, x: &Vector) -> Mat {
        let wr = &self.weight * self.residual.eval(x);
        self.gauss_newton_hessian(x) + self.residual.weighted_curvature(x, &wr)
    }
}

/// Per-node objective `F_i`.
#[derive(Debug, Clone)]
pub enum NodeObjective {
    /// `½ xᵀ Q x + cᵀ x + constant`.
    Quadratic {
        q: Mat,
        c: Vector,
        constant: f64,
    },
    LeastSquares(LeastSquares),
    General(Arc<dyn SmoothObjective>),
}

impl NodeObjective {
    pub fn quadratic(q: Mat, c: Vector, constant: f64) -> Self {
        NodeObjective::Quadratic {
            q: crate::linalg::symmetrize(&q),
            c,
            constant,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NodeObjective::Quadratic { c, .. } => c.len(),
            NodeObjective::LeastSquares(ls) => ls.residual.input_dim(),
            NodeObjective::General(g) => g.dim(),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            NodeObjective::Quadratic { q, c, constant } => {
                0.5 * x.dot(&(q * x)) + c.dot(x) + constant
            }
            NodeObjective::LeastSquares(ls) => ls.value(x),
            NodeObjective::General(g) => g.value(x),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            NodeObjective::Quadratic { q, c, .. } => q * x + c,
            NodeObjective::LeastSquares(ls) => ls.gradient(x),
            NodeObjective::General(g) => g.gradient(x),
        }
    }

    /// Gauss-Newton mode only changes least-squares objectives; the others
    /// have no cheaper curvature model and return their exact Hessian.
    pub fn hessian(&self, x: &Vector, mode: HessianMode) -> Mat {
        match (self, mode) {
            (NodeObjective::Quadratic { q, .. }, _) => q.clone(),
            (NodeObjective::LeastSquares(ls), HessianMode::Exact) => ls.exact_hessian(x),
            (NodeObjective::LeastSquares(ls), HessianMode::GaussNewton) => {
                ls.gauss_newton_hessian(x)
            }
            (NodeObjective::General(g), _) => g.hessian(x),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        self.quadratic_form().is_some()
    }

    /// `(Q, c, constant)` for objectives that are exactly quadratic.
    pub fn quadratic_form(&self) -> Option<(Mat, Vector, f64)> {
        match self {
            NodeObjective::Quadratic { q, c, constant } => Some((q.clone(), c.clone(), *constant)),
            NodeObjective::LeastSquares(LeastSquares {
                weight,
                linear: Some(lin),
                ..
            }) => {
                let wa = weight * &lin.a;
                let q = crate::linalg::symmetrize(&(lin.a.transpose() * &wa));
                let c = -(wa.transpose() * &lin.b);
                Some((q, c, 0.5 * lin.b.dot(&(weight * &lin.b))))
            }
            _ => None,
        }
    }
}

/// Coupling `S_ij x_i = S_ji x_j` on the edge `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPair {
    pub i: NodeId,
    pub j: NodeId,
    pub s_ij: Mat,
    pub s_ji: Mat,
}

impl CouplingPair {
    pub fn dim(&self) -> usize {
        self.s_ij.nrows()
    }
}

/// Per-node decision vectors `x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "AssignmentRepr", from = "AssignmentRepr")]
pub struct Assignment {
    pub x: Vec<Vector>,
}

#[derive(Serialize, Deserialize)]
struct AssignmentRepr {
    x: Vec<Vec<f64>>,
}

impl From<Assignment> for AssignmentRepr {
    fn from(a: Assignment) -> Self {
        AssignmentRepr {
            x: a.x.iter().map(|v| v.iter().copied().collect()).collect(),
        }
    }
}

impl From<AssignmentRepr> for Assignment {
    fn from(r: AssignmentRepr) -> Self {
        Assignment {
            x: r.x.into_iter().map(Vector::from_vec).collect(),
        }
    }
}

impl Assignment {
    pub fn new(x: Vec<Vector>) -> Self {
        Assignment { x }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Assignment {
            x: dims.iter().map(|&d| Vector::zeros(d)).collect(),
        }
    }

    pub fn node(&self, i: NodeId) -> &Vector {
        &self.x[i.index()]
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `max_i ‖x_i − y_i‖∞`.
    pub fn max_abs_diff(&self, other: &Assignment) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| {
                if a.len() == b.len() {
                    inf_norm(&(a - b))
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("assignment serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        serde_json::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))
    }

    /// One `node,index,value` row per entry, 1-based node ids.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node,index,value")?;
        for (i, v) in self.x.iter().enumerate() {
            for (k, val) in v.iter().enumerate() {
                writeln!(out, "{},{},{:e}", i + 1, k, val)?;
            }
        }
        Ok(())
    }
}

/// `F_i`, couplings and tree of the consensus problem.
#[derive(Debug, Clone)]
pub struct TreeProblem {
    tree: Tree,
    objectives: Vec<NodeObjective>,
    couplings: Vec<CouplingPair>,
    edge_index: BTreeMap<(NodeId, NodeId), usize>,
    initial: Option<Assignment>,
}

impl TreeProblem {
    pub fn new(
        tree: Tree,
        objectives: Vec<NodeObjective>,
        couplings: Vec<CouplingPair>,
    ) -> Result<Self, ProblemError> {
        if objectives.len() != tree.len() {
            return Err(ProblemError::DimensionMismatch(format!(
                "{} objectives for {} nodes",
                objectives.len(),
                tree.len()
            )));
        }
        let mut by_edge = BTreeMap::new();
        for mut c in couplings {
            if c.i > c.j {
                std::mem::swap(&mut c.i, &mut c.j);
                std::mem::swap(&mut c.s_ij, &mut c.s_ji);
            }
            if !tree.has_edge(c.i, c.j) {
                return Err(ProblemError::UnknownEdge(c.i, c.j));
            }
            let (di, dj) = (objectives[c.i.index()].dim(), objectives[c.j.index()].dim());
            if c.s_ij.nrows() != c.s_ji.nrows()
                || c.s_ij.nrows() == 0
                || c.s_ij.ncols() != di
                || c.s_ji.ncols() != dj
            {
                return Err(ProblemError::DimensionMismatch(format!(
                    "coupling ({}, {}): S_ij {}x{}, S_ji {}x{}, node dims {di}, {dj}",
                    c.i,
                    c.j,
                    c.s_ij.nrows(),
                    c.s_ij.ncols(),
                    c.s_ji.nrows(),
                    c.s_ji.ncols()
                )));
            }
            by_edge.insert((c.i, c.j), c);
        }
        let mut ordered = Vec::with_capacity(tree.edges().len());
        let mut edge_index = BTreeMap::new();
        for (k, &(a, b)) in tree.edges().iter().enumerate() {
            let c = by_edge
                .remove(&(a, b))
                .ok_or(ProblemError::MissingCoupling(a, b))?;
            ordered.push(c);
            edge_index.insert((a, b), k);
        }
        Ok(TreeProblem {
            tree,
            objectives,
            couplings: ordered,
            edge_index,
            initial: None,
        })
    }

    pub fn with_initial(mut self, initial: Assignment) -> Result<Self, ProblemError> {
        self.check_dims(&initial)?;
        self.initial = Some(initial);
        Ok(self)
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn objective(&self, i: NodeId) -> &NodeObjective {
        &self.objectives[i.index()]
    }

    pub fn objectives(&self) -> &[NodeObjective] {
        &self.objectives
    }

    pub fn dim(&self, i: NodeId) -> usize {
        self.objectives[i.index()].dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.objectives.iter().map(NodeObjective::dim).collect()
    }

    pub fn couplings(&self) -> &[CouplingPair] {
        &self.couplings
    }

    /// `S_{i,j}`: the matrix applied to `x_i` on edge `(i, j)`.
    pub fn coupling(&self, i: NodeId, j: NodeId) -> &Mat {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let c = &self.couplings[self.edge_index[&(lo, hi)]];
        if i < j {
            &c.s_ij
        } else {
            &c.s_ji
        }
    }

    pub fn coupling_dim(&self, i: NodeId, j: NodeId) -> usize {
        self.coupling(i, j).nrows()
    }

    /// Starting point for all solvers (zeros unless one was attached).
    pub fn initial(&self) -> Assignment {
        self.initial
            .clone()
            .unwrap_or_else(|| Assignment::zeros(&self.dims()))
    }

    pub fn check_dims(&self, x: &Assignment) -> Result<(), ProblemError> {
        if x.len() != self.len() {
            return Err(ProblemError::DimensionMismatch(format!(
                "{} blocks for {} nodes",
                x.len(),
                self.len()
            )));
        }
        for i in self.tree.nodes() {
            if x.node(i).len() != self.dim(i) {
                return Err(ProblemError::DimensionMismatch(format!(
                    "node {i}: got {} entries, expected {}",
                    x.node(i).len(),
                    self.dim(i)
                )));
            }
        }
        Ok(())
    }

    /// `Σ_i F_i(x_i)`.
    pub fn total_objective(&self, x: &Assignment) -> Result<f64, ProblemError> {
        self.check_dims(x)?;
        Ok(self
            .tree
            .nodes()
            .map(|i| self.objective(i).value(x.node(i)))
            .sum())
    }

    /// `max_(i,j) ‖S_ij x_i − S_ji x_j‖∞`; zero iff `x` is consensus feasible.
    pub fn consensus_residual(&self, x: &Assignment) -> Result<f64, ProblemError> {
        self.check_dims(x)?;
        Ok(self
            .couplings
            .iter()
            .map(|c| inf_norm(&(&c.s_ij * x.node(c.i) - &c.s_ji * x.node(c.j))))
            .fold(0.0, f64::max))
    }

    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))?;
        file.into_problem()
    }

    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Serializes quadratic and linear least-squares problems.
    pub fn to_json(&self) -> Result<String, ProblemError> {
        let mut nodes = Vec::with_capacity(self.len());
        for i in self.tree.nodes() {
            let objective = match self.objective(i) {
                NodeObjective::Quadratic { q, c, constant } => ObjectiveSpec::Quadratic {
                    q: mat_to_rows(q),
                    c: c.iter().copied().collect(),
                    constant: *constant,
                },
                NodeObjective::LeastSquares(LeastSquares {
                    weight,
                    linear: Some(lin),
                    ..
                }) => ObjectiveSpec::LinearLeastSquares {
                    a: mat_to_rows(&lin.a),
                    b: lin.b.iter().copied().collect(),
                    weight: Some(mat_to_rows(weight)),
                },
                _ => return Err(ProblemError::NotSerializable(i)),
            };
            nodes.push(NodeSpec {
                id: i.0,
                dim: self.dim(i),
                objective,
            });
        }
        let edges = self
            .couplings
            .iter()
            .map(|c| EdgeSpec {
                i: c.i.0,
                j: c.j.0,
                s_ij: mat_to_rows(&c.s_ij),
                s_ji: mat_to_rows(&c.s_ji),
            })
            .collect();
        let initial = self
            .initial
            .as_ref()
            .map(|a| a.x.iter().map(|v| v.iter().copied().collect()).collect());
        let file = ProblemFile {
            schema: Some(PROBLEM_SCHEMA.to_string()),
            nodes,
            edges,
            initial,
            meta: None,
        };
        serde_json::to_string_pretty(&file).map_err(|e| ProblemError::Parse(e.to_string()))
    }
}

/// On-disk problem description (format described in the README).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: usize,
    pub dim: usize,
    pub objective: ObjectiveSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic {
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    LinearLeastSquares {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub i: usize,
    pub j: usize,
    pub s_ij: Vec<Vec<f64>>,
    pub s_ji: Vec<Vec<f64>>,
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<TreeProblem, ProblemError> {
        if let Some(schema) = &self.schema {
            if schema != PROBLEM_SCHEMA {
                return Err(ProblemError::Parse(format!(
                    "unsupported schema {schema:?}"
                )));
            }
        }
        let n = self.nodes.len();
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.i, e.j)).collect();
        let tree = Tree::new(n, &edges)?;
        let mut objectives: Vec<Option<NodeObjective>> = vec![None; n];
        for node in self.nodes {
            if node.id == 0 || node.id > n || objectives[node.id - 1].is_some() {
                return Err(ProblemError::Parse(format!(
                    "bad or repeated node id {}",
                    node.id
                )));
            }
            let bad = |what: &str| ProblemError::Parse(format!("node {}: {what}", node.id));
            let obj = match node.objective {
                ObjectiveSpec::Quadratic { q, c, constant } => {
                    let q = mat_from_rows(&q, node.dim).ok_or_else(|| bad("ragged q"))?;
                    if q.nrows() != node.dim || q.ncols() != node.dim || c.len() != node.dim {
                        return Err(bad("q/c do not match dim"));
                    }
                    NodeObjective::quadratic(q, Vector::from_vec(c), constant)
                }
                ObjectiveSpec::LinearLeastSquares { a, b, weight } => {
                    let a = mat_from_rows(&a, node.dim).ok_or_else(|| bad("ragged a"))?;
                    if a.ncols() != node.dim || a.nrows() != b.len() {
                        return Err(bad("a/b do not match dim"));
                    }
                    let m = a.nrows();
                    let w = match weight {
                        Some(w) => mat_from_rows(&w, m).ok_or_else(|| bad("ragged weight"))?,
                        None => Mat::identity(m, m),
                    };
                    if w.nrows() != m || w.ncols() != m {
                        return Err(bad("weight shape"));
                    }
                    NodeObjective::LeastSquares(LeastSquares::linear(a, Vector::from_vec(b), w))
                }
            };
            objectives[node.id - 1] = Some(obj);
        }
        let objectives: Vec<NodeObjective> = objectives.into_iter().map(Option::unwrap).collect();
        let mut couplings = Vec::with_capacity(self.edges.len());
        for e in self.edges {
            let (ni, nj) = (objectives[e.i - 1].dim(), objectives[e.j - 1].dim());
            let s_ij = mat_from_rows(&e.s_ij, ni)
                .ok_or_else(|| ProblemError::Parse("ragged s_ij".into()))?;
            let s_ji = mat_from_rows(&e.s_ji, nj)
                .ok_or_else(|| ProblemError::Parse("ragged s_ji".into()))?;
            couplings.push(CouplingPair {
                i: NodeId(e.i),
                j: NodeId(e.j),
                s_ij,
                s_ji,
            });
        }
        let problem = TreeProblem::new(tree, objectives, couplings)?;
        match self.initial {
            Some(init) => problem.with_initial(Assignment::new(
                init.into_iter().map(Vector::from_vec).collect(),
            )),
            None => Ok(problem),
        }
    }
}

/// Local layout produced by [`lift_shared_variables`]: which physical
/// variables each node stores, in order, and the copy-selecting couplings.
#[derive(Debug, Clone)]
pub struct LiftedLayout {
    pub tree: Tree,
    /// `locals[i]` lists physical variable ids of `x_i`: owned ones first,
    /// then copies, each group ascending.
    pub locals: Vec<Vec<usize>>,
    pub owner: Vec<NodeId>,
    pub couplings: Vec<CouplingPair>,
}

/// Gives every node a local copy of each neighbor-owned variable its
/// objective reads and couples copies to their originals.
///
/// `owner[v]` is the node owning physical variable `v`; `reads[i]` lists the
/// variables node `i+1`'s objective depends on.
pub fn lift_shared_variables(
    tree: &Tree,
    owner: &[NodeId],
    reads: &[Vec<usize>],
) -> Result<LiftedLayout, ProblemError> {
    let n = tree.len();
    if reads.len() != n {
        return Err(ProblemError::DimensionMismatch(format!(
            "{} read lists for {n} nodes",
            reads.len()
        )));
    }
    let mut locals = vec![Vec::new(); n];
    for (v, &o) in owner.iter().enumerate() {
        if !tree.contains(o) {
            return Err(ProblemError::DimensionMismatch(format!(
                "variable {v} owned by unknown node {o}"
            )));
        }
        locals[o.index()].push(v);
    }
    for (idx, vars) in reads.iter().enumerate() {
        let node = NodeId::from_index(idx);
        let mut copies: Vec<usize> = Vec::new();
        for &v in vars {
            let o = *owner.get(v).ok_or_else(|| {
                ProblemError::DimensionMismatch(format!("node {node} reads unknown variable {v}"))
            })?;
            if o == node {
                continue;
            }
            if !tree.has_edge(node, o) {
                return Err(ProblemError::SharingViolatesTree {
                    var: v,
                    node,
                    owner: o,
                });
            }
            copies.push(v);
        }
        copies.sort_unstable();
        copies.dedup();
        locals[idx].extend(copies);
    }
    let position = |node: NodeId, v: usize| locals[node.index()].iter().position(|&w| w == v);
    let mut couplings = Vec::new();
    for &(a, b) in tree.edges() {
        let mut shared: Vec<usize> = locals[a.index()]
            .iter()
            .copied()
            .filter(|&v| position(b, v).is_some())
            .collect();
        shared.sort_unstable();
        if shared.is_empty() {
            return Err(ProblemError::EmptyCoupling(a, b));
        }
        let select = |node: NodeId| {
            let mut s = Mat::zeros(shared.len(), locals[node.index()].len());
            for (row, &v) in shared.iter().enumerate() {
                s[(row, position(node, v).unwrap())] = 1.0;
            }
            s
        };
        couplings.push(CouplingPair {
            i: a,
            j: b,
            s_ij: select(a),
            s_ji: select(b),
        });
    }
    Ok(LiftedLayout {
        tree: tree.clone(),
        locals,
        owner: owner.to_vec(),
        couplings,
    })
}

impl LiftedLayout {
    pub fn dim(&self, i: NodeId) -> usize {
        self.locals[i.index()].len()
    }

    pub fn into_problem(self, objectives: Vec<NodeObjective>) -> Result<TreeProblem, ProblemError> {
        for (idx, obj) in objectives.iter().enumerate() {
            if obj.dim() != self.locals[idx].len() {
                return Err(ProblemError::DimensionMismatch(format!(
                    "objective of node {} has dim {}, layout has {}",
                    idx + 1,
                    obj.dim(),
                    self.locals[idx].len()
                )));
            }
        }
        TreeProblem::new(self.tree, objectives, self.couplings)
    }

    /// Copies a physical point into every local slot.
    pub fn lift_point(&self, physical: &[f64]) -> Assignment {
        Assignment::new(
            self.locals
                .iter()
                .map(|vars| Vector::from_iterator(vars.len(), vars.iter().map(|&v| physical[v])))
                .collect(),
        )
    }

    /// Reads each physical variable from its owner's block.
    pub fn project(&self, x: &Assignment) -> Vec<f64> {
        self.owner
            .iter()
            .enumerate()
            .map(|(v, &o)| {
                let pos = self.locals[o.index()].iter().position(|&w| w == v).unwrap();
                x.node(o)[pos]
            })
            .collect()
    }
}
