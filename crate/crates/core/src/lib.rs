//! Decentralized multi-sweep approximate dynamic programming over tree graphs.
//!
//! Nodes of a tree each own a smooth objective `F_i` and agree with their
//! neighbors through linear coupling constraints. They exchange
//! quadratic (optionally cubic-regularized) models of their parametric value
//! functions in backward-forward sweeps; the [`sim`] module runs the node
//! protocols over a deterministic simulated network.

pub mod analysis;
pub mod generators;
pub mod linalg;
pub mod local;
pub mod model;
pub mod oracle;
pub mod power;
pub mod problem;
pub mod protocol;
pub mod rng;
pub mod sim;
pub mod tree;
pub mod verify;

pub use analysis::{fit_order, fit_order_default, AnalysisError, RateFit};
pub use linalg::{Mat, Vector};
pub use local::{
    sensitivity, solve_node, LocalError, LocalSolveResult, SensitivityResult, SolverOptions,
};
pub use model::{build_model, zero_model, ModelError, ModelMessage, ValueModel};
pub use oracle::{
    centralized_solve, exact_dp_quadratic, exact_value_functions, OracleError, QuadraticFunction,
};
pub use problem::{
    lift_shared_variables, Assignment, CouplingPair, HessianMode, LeastSquares, NodeObjective,
    ProblemError, Residual, SmoothObjective, TreeProblem,
};
pub use protocol::{ModelOptions, ProtocolError, RootSchedule, TraceEvent};
pub use sim::{
    convergence_trace, run, run_async, run_sync, Algorithm, DelayLaw, Mode, RunStatus, SimConfig,
    SimError, SimReport, SweepRecord, TracePoint,
};
pub use tree::{NodeId, RootedTree, Tree, TreeError};
