//! Node subproblems and parametric sensitivities
//!
//! A node minimizes `F_i(y) + Σ_j W_{j,i}(S_ij y)` and reports the value,
//! gradient and Hessian of the parametric function
//!
//! ```text
//!   Ω_{i,k}(p) = min F_i(y) + Σ_{j≠k} W_{j,i}(S_ij y)   s.t.  S_ik y = p
//! ```
//!
//! with the constraint written `S_ik y − p = 0`, so that `∇Ω = −λ`.

use std::collections::BTreeMap;

use nalgebra::LU;
use thiserror::Error;

use crate::linalg::{has_full_row_rank, inf_norm, regularized_cholesky, symmetrize, Mat, Vector};
use crate::model::ValueModel;
use crate::problem::{HessianMode, LeastSquares, NodeObjective, TreeProblem};
use crate::tree::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum LocalError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("node {node} has no model from neighbor {neighbor}")]
    MissingModel { node: NodeId, neighbor: NodeId },
    #[error("coupling matrix is not full row rank")]
    RankDeficientCoupling,
    #[error("reduced sensitivity system is singular")]
    SingularReducedSystem,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub reg_start: f64,
    pub max_reg_steps: usize,
    pub polish_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 100,
            armijo_c: 1e-4,
            backtrack: 0.5,
            reg_start: 1e-8,
            max_reg_steps: 120,
            polish_steps: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolveResult {
    pub y_star: Vector,
    pub obj: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest Hessian shift used by the Newton iteration.
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub value: f64,
    pub grad: Vector,
    pub hess: Mat,
    pub multiplier: Vector,
    /// Shift applied to the curvature matrix; zero unless the KKT matrix was singular.
    pub regularization: f64,
    /// Point at which the sensitivity was evaluated.
    pub y: Vector,
}

/// Twice-differentiable function the Newton routine works on.
pub trait Smooth {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> Mat;
}

/// `F_i(y) + Σ W(S y)` over a fixed list of coupling terms.
#[derive(Debug)]
pub struct LocalObjective<'a> {
    pub objective: &'a NodeObjective,
    pub terms: Vec<(&'a Mat, &'a ValueModel)>,
    pub mode: HessianMode,
}

impl Smooth for LocalObjective<'_> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn value(&self, y: &Vector) -> f64 {
        let mut v = self.objective.value(y);
        for (s, w) in &self.terms {
            v += w.value_unchecked(&(*s * y));
        }
        v
    }

    fn gradient(&self, y: &Vector) -> Vector {
        let mut g = self.objective.gradient(y);
        for (s, w) in &self.terms {
            g += s.transpose() * w.gradient_unchecked(&(*s * y));
        }
        g
    }

    fn hessian(&self, y: &Vector) -> Mat {
        let mut h = self.objective.hessian(y, self.mode);
        for (s, w) in &self.terms {
            h += s.transpose() * w.hessian_unchecked(&(*s * y)) * *s;
        }
        symmetrize(&h)
    }
}

/// Damped Newton with Armijo backtracking and a shifted-Cholesky fallback
/// for indefinite Hessians.
pub fn newton_minimize<F: Smooth + ?Sized>(
    f: &F,
    start: &Vector,
    opts: &SolverOptions,
) -> LocalSolveResult {
    let mut y = start.clone();
    let mut fy = f.value(&y);
    let mut g = f.gradient(&y);
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= opts.tol;
    let mut max_tau: f64 = 0.0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let h = f.hessian(&y);
        let Some((chol, tau)) = regularized_cholesky(&h, opts.reg_start, opts.max_reg_steps) else {
            break;
        };
        max_tau = max_tau.max(tau);
        let d = -chol.solve(&g);
        let slope = g.dot(&d);
        if inf_norm(&d) <= 1e-15 * (1.0 + inf_norm(&y)) {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-20 {
            let trial = &y + &d * alpha;
            let ft = f.value(&trial);
            if ft.is_finite() && ft <= fy + opts.armijo_c * alpha * slope {
                y = trial;
                fy = ft;
                accepted = true;
                break;
            }
            // decrease below roundoff: fall back to a gradient-norm test
            if alpha == 1.0 && ft.is_finite() && ft <= fy + 64.0 * f64::EPSILON * (1.0 + fy.abs()) {
                let gt = f.gradient(&trial);
                if inf_norm(&gt) <= 0.5 * inf_norm(&g) {
                    y = trial;
                    fy = ft;
                    accepted = true;
                    break;
                }
            }
            alpha *= opts.backtrack;
        }
        if !accepted {
            // no decrease representable: accept as stationary if the step is at roundoff level
            converged = inf_norm(&d) <= 1e-10 * (1.0 + inf_norm(&y));
            break;
        }
        g = f.gradient(&y);
        converged = inf_norm(&g) <= opts.tol;
    }
    if converged {
        polish(f, &mut y, &mut fy, &mut g, opts);
    }
    LocalSolveResult {
        y_star: y,
        obj: fy,
        iterations,
        converged,
        regularization: max_tau,
    }
}

/// Extra full Newton steps taken only while they shrink the gradient.
fn polish<F: Smooth + ?Sized>(
    f: &F,
    y: &mut Vector,
    fy: &mut f64,
    g: &mut Vector,
    opts: &SolverOptions,
) {
    for _ in 0..opts.polish_steps {
        let gn = inf_norm(g);
        if gn == 0.0 {
            return;
        }
        let Some(chol) = f.hessian(y).cholesky() else {
            return;
        };
        let trial = &*y - chol.solve(g);
        let gt = f.gradient(&trial);
        let ft = f.value(&trial);
        if inf_norm(&gt) < gn && ft <= *fy + 1e-12 * (1.0 + fy.abs()) {
            *y = trial;
            *g = gt;
            *fy = ft;
        } else {
            return;
        }
    }
}

fn local_objective<'a>(
    problem: &'a TreeProblem,
    i: NodeId,
    models: &'a BTreeMap<NodeId, ValueModel>,
    exclude: Option<NodeId>,
    mode: HessianMode,
) -> Result<LocalObjective<'a>, LocalError> {
    let mut terms = Vec::new();
    for &j in problem.tree().neighbors(i) {
        if Some(j) == exclude {
            continue;
        }
        let w = models.get(&j).ok_or(LocalError::MissingModel {
            node: i,
            neighbor: j,
        })?;
        let s = problem.coupling(i, j);
        if w.dim() != s.nrows() {
            return Err(LocalError::DimensionMismatch(format!(
                "model {j}->{i} has dim {}, coupling has {} rows",
                w.dim(),
                s.nrows()
            )));
        }
        terms.push((s, w));
    }
    Ok(LocalObjective {
        objective: problem.objective(i),
        terms,
        mode,
    })
}

/// Minimizes `F_i(y) + Σ_{j∈N_i} W_{j,i}(S_ij y)` from `warm_start`.
pub fn solve_node(
    problem: &TreeProblem,
    i: NodeId,
    models: &BTreeMap<NodeId, ValueModel>,
    warm_start: &Vector,
    mode: HessianMode,
    opts: &SolverOptions,
) -> Result<LocalSolveResult, LocalError> {
    if warm_start.len() != problem.dim(i) {
        return Err(LocalError::DimensionMismatch(format!(
            "warm start has {} entries, node {i} has dim {}",
            warm_start.len(),
            problem.dim(i)
        )));
    }
    let f = local_objective(problem, i, models, None, mode)?;
    Ok(newton_minimize(&f, warm_start, opts))
}

/// Value, gradient and Hessian of `Ω_{i,k}` at `p_bar`.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity(
    problem: &TreeProblem,
    i: NodeId,
    models: &BTreeMap<NodeId, ValueModel>,
    k: NodeId,
    p_bar: &Vector,
    y_start: &Vector,
    mode: HessianMode,
    opts: &SolverOptions,
) -> Result<SensitivityResult, LocalError> {
    let f = local_objective(problem, i, models, Some(k), mode)?;
    constrained_sensitivity(&f, problem.coupling(i, k), p_bar, y_start, opts)
}

/// Sensitivity of `min f(y) s.t. S y = p` at `p_bar`, starting from a
/// feasible (or nearly feasible) `y_start`.
pub fn constrained_sensitivity<F: Smooth + ?Sized>(
    f: &F,
    s: &Mat,
    p_bar: &Vector,
    y_start: &Vector,
    opts: &SolverOptions,
) -> Result<SensitivityResult, LocalError> {
    let n = f.dim();
    let m = s.nrows();
    if s.ncols() != n || p_bar.len() != m || y_start.len() != n {
        return Err(LocalError::DimensionMismatch(format!(
            "S is {}x{}, p has {}, y has {}, node dim {n}",
            s.nrows(),
            s.ncols(),
            p_bar.len(),
            y_start.len()
        )));
    }
    if !has_full_row_rank(s) {
        return Err(LocalError::RankDeficientCoupling);
    }
    let sst = s * s.transpose();
    let sst_chol = sst
        .clone()
        .cholesky()
        .ok_or(LocalError::RankDeficientCoupling)?;
    let multiplier_at = |y: &Vector| -> Vector { -sst_chol.solve(&(s * f.gradient(y))) };
    let kkt_residual = |y: &Vector, lambda: &Vector| -> f64 {
        let stat = f.gradient(y) + s.transpose() * lambda;
        inf_norm(&stat).max(inf_norm(&(s * y - p_bar)))
    };

    // constrained Newton polish of y
    let mut y = y_start.clone();
    let mut lambda = multiplier_at(&y);
    let mut res = kkt_residual(&y, &lambda);
    let mut tau_used: f64 = 0.0;
    for _ in 0..20 {
        if res <= opts.tol {
            break;
        }
        let (kkt, tau) = match kkt_lu(&f.hessian(&y), s, opts) {
            Some(v) => v,
            None => return Err(LocalError::SingularReducedSystem),
        };
        tau_used = tau_used.max(tau);
        let mut rhs = Vector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-f.gradient(&y)));
        rhs.rows_mut(n, m).copy_from(&(p_bar - s * &y));
        let Some(sol) = kkt.solve(&rhs) else { break };
        let trial = &y + sol.rows(0, n);
        let trial_lambda = multiplier_at(&trial);
        let trial_res = kkt_residual(&trial, &trial_lambda);
        if !(trial_res < res) {
            break;
        }
        y = trial;
        lambda = trial_lambda;
        res = trial_res;
    }

    let value = f.value(&y);
    let grad = -lambda.clone();
    let mcurv = f.hessian(&y);
    let (hess, tau) = reduced_hessian(&mcurv, s, opts)?;
    Ok(SensitivityResult {
        value,
        grad,
        hess: symmetrize(&hess),
        multiplier: lambda,
        regularization: tau_used.max(tau),
        y,
    })
}

fn kkt_matrix(mcurv: &Mat, s: &Mat, tau: f64) -> Mat {
    let n = mcurv.nrows();
    let m = s.nrows();
    let mut k = Mat::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n))
        .copy_from(&(mcurv + Mat::identity(n, n) * tau));
    k.view_mut((0, n), (n, m)).copy_from(&s.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(s);
    k
}

fn kkt_is_regular(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>, scale: f64) -> bool {
    let u = lu.u();
    let min = u
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, x| a.min(x.abs()));
    min.is_finite() && min > 1e-13 * scale.max(1.0)
}

fn kkt_lu(
    mcurv: &Mat,
    s: &Mat,
    opts: &SolverOptions,
) -> Option<(LU<f64, nalgebra::Dyn, nalgebra::Dyn>, f64)> {
    let scale = mcurv.amax().max(s.amax());
    let mut tau = 0.0;
    for step in 0..=opts.max_reg_steps {
        let lu = kkt_matrix(mcurv, s, tau).lu();
        if kkt_is_regular(&lu, scale) {
            return Some((lu, tau));
        }
        tau = if step == 0 { opts.reg_start } else { tau * 2.0 };
    }
    None
}

/// `(S M⁻¹ Sᵀ)⁻¹` when `M` is positive definite, otherwise `−[K⁻¹]₂₂` of
/// the KKT matrix `K = [M Sᵀ; S 0]`.
fn reduced_hessian(mcurv: &Mat, s: &Mat, opts: &SolverOptions) -> Result<(Mat, f64), LocalError> {
    let n = mcurv.nrows();
    let m = s.nrows();
    if let Some(chol) = mcurv.clone().cholesky() {
        let schur = s * chol.solve(&s.transpose());
        if let Some(sc) = symmetrize(&schur).cholesky() {
            return Ok((sc.inverse(), 0.0));
        }
    }
    let (lu, tau) = kkt_lu(mcurv, s, opts).ok_or(LocalError::SingularReducedSystem)?;
    let mut rhs = Mat::zeros(n + m, m);
    rhs.view_mut((n, 0), (m, m)).copy_from(&Mat::identity(m, m));
    let sol = lu.solve(&rhs).ok_or(LocalError::SingularReducedSystem)?;
    Ok((-sol.view((n, 0), (m, m)).into_owned(), tau))
}

/// `Jᵀ W J` at `y`.
pub fn gauss_newton_hessian(objective: &LeastSquares, y: &Vector) -> Mat {
    symmetrize(&objective.gauss_newton_hessian(y))
}
