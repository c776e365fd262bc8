//! Independent reference computations: exact quadratic dynamic programming,
//! a centralized KKT Newton solve and brute-force parametric minimization.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::{inf_norm, regularized_cholesky, symmetrize, Mat, Vector};
use crate::local::Smooth;
use crate::problem::{Assignment, HessianMode, ProblemError, TreeProblem};
use crate::tree::NodeId;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("objective of node {0} is not quadratic")]
    NotQuadratic(NodeId),
    #[error("partial minimization at node {0} is not strictly convex")]
    SingularRecursion(NodeId),
    #[error(
        "centralized solve stopped with KKT residual {residual:e} after {iterations} iterations"
    )]
    NoConvergence { residual: f64, iterations: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// `V(p) = ½ pᵀHp + gᵀp + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFunction {
    pub h: Mat,
    pub g: Vector,
    pub constant: f64,
}

impl QuadraticFunction {
    pub fn eval(&self, p: &Vector) -> f64 {
        0.5 * p.dot(&(&self.h * p)) + self.g.dot(p) + self.constant
    }
}

/// `½ xᵀQx + cᵀx + κ` assembled for one node from its objective and the
/// value functions of all neighbors except `exclude`.
struct Assembled {
    q: Mat,
    c: Vector,
    kappa: f64,
}

fn assemble(
    problem: &TreeProblem,
    i: NodeId,
    exclude: Option<NodeId>,
    incoming: &dyn Fn(NodeId) -> Result<QuadraticFunction, OracleError>,
) -> Result<Assembled, OracleError> {
    let (mut q, mut c, mut kappa) = problem
        .objective(i)
        .quadratic_form()
        .ok_or(OracleError::NotQuadratic(i))?;
    for &j in problem.tree().neighbors(i) {
        if Some(j) == exclude {
            continue;
        }
        let v = incoming(j)?;
        let s = problem.coupling(i, j);
        q += s.transpose() * &v.h * s;
        c += s.transpose() * &v.g;
        kappa += v.constant;
    }
    Ok(Assembled {
        q: symmetrize(&q),
        c,
        kappa,
    })
}

/// `min_x ½xᵀQx + cᵀx + κ  s.t. S x = p` as a function of `p`, and the
/// affine minimizer map `x(p) = x0 + X p`.
struct PartialMin {
    value: QuadraticFunction,
    x0: Vector,
    map: Mat,
}

/// Eliminates the constraint on the orthonormal split `x = Y w + Z z` from a
/// Householder QR of `[Sᵀ | I]`, so `S = Rᵀ Yᵀ` and `w = R⁻ᵀ p`.
fn partial_minimize(a: &Assembled, s: &Mat, node: NodeId) -> Result<PartialMin, OracleError> {
    let singular = || OracleError::SingularRecursion(node);
    a.q.clone().cholesky().ok_or_else(singular)?;
    let (m, n) = (s.nrows(), s.ncols());
    let mut stacked = Mat::zeros(n, m + n);
    stacked.view_mut((0, 0), (n, m)).copy_from(&s.transpose());
    stacked.view_mut((0, m), (n, n)).fill_with_identity();
    let qr = stacked.qr();
    let basis = qr.q();
    let r = qr.r().view((0, 0), (m, m)).into_owned();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(singular());
    }
    let y = basis.columns(0, m).into_owned();
    let z = basis.columns(m, n - m).into_owned();
    // R⁻ᵀ
    let r_inv_t = r
        .transpose()
        .solve_lower_triangular(&Mat::identity(m, m))
        .ok_or_else(singular)?;
    let q_ww = y.transpose() * &a.q * &y;
    let c_w = y.transpose() * &a.c;
    let (m_ww, d_w, kappa, x0, w_to_x) = if n > m {
        let q_zz = symmetrize(&(z.transpose() * &a.q * &z));
        let chol = q_zz.cholesky().ok_or_else(singular)?;
        let q_zw = z.transpose() * &a.q * &y;
        let c_z = z.transpose() * &a.c;
        let k = chol.solve(&q_zw);
        let kc = chol.solve(&c_z);
        let m_ww = &q_ww - q_zw.transpose() * &k;
        let d_w = &c_w - q_zw.transpose() * &kc;
        let kappa = a.kappa - 0.5 * c_z.dot(&kc);
        (m_ww, d_w, kappa, -(&z * &kc), &y - &z * k)
    } else {
        (q_ww, c_w, a.kappa, Vector::zeros(n), y.clone())
    };
    let h = symmetrize(&(r_inv_t.transpose() * m_ww * &r_inv_t));
    let g = r_inv_t.transpose() * d_w;
    Ok(PartialMin {
        value: QuadraticFunction {
            h,
            g,
            constant: kappa,
        },
        x0,
        map: w_to_x * r_inv_t,
    })
}

impl PartialMin {
    fn argmin(&self, p: &Vector) -> Vector {
        &self.x0 + &self.map * p
    }
}

/// Exact value functions `V_{i,k}` of every directed tree edge.
#[derive(Debug, Clone)]
pub struct ExactValueFunctions {
    pub functions: BTreeMap<(NodeId, NodeId), QuadraticFunction>,
}

impl ExactValueFunctions {
    pub fn get(&self, i: NodeId, k: NodeId) -> &QuadraticFunction {
        &self.functions[&(i, k)]
    }
}

/// All `V_{i,k}(p) = min F_i + Σ_{j≠k} V_{j,i}(S_ij x) s.t. S_ik x = p`.
pub fn exact_value_functions(problem: &TreeProblem) -> Result<ExactValueFunctions, OracleError> {
    let mut memo: BTreeMap<(NodeId, NodeId), QuadraticFunction> = BTreeMap::new();
    // Directed edges in an order where every V_{j,i} needed by V_{i,k} is ready:
    // process by size of the subtree behind (i, k).
    let tree = problem.tree();
    let mut directed: Vec<(usize, NodeId, NodeId)> = Vec::new();
    for &(a, b) in tree.edges() {
        for (i, k) in [(a, b), (b, a)] {
            let da = tree.distances_from(i);
            let db = tree.distances_from(k);
            let size = tree
                .nodes()
                .filter(|n| da[n.index()] < db[n.index()])
                .count();
            directed.push((size, i, k));
        }
    }
    directed.sort();
    for (_, i, k) in directed {
        let a = assemble(problem, i, Some(k), &|j| Ok(memo[&(j, i)].clone()))?;
        let pm = partial_minimize(&a, problem.coupling(i, k), i)?;
        memo.insert((i, k), pm.value);
    }
    Ok(ExactValueFunctions { functions: memo })
}

#[derive(Debug, Clone)]
pub struct QuadraticDpSolution {
    pub optimal_value: f64,
    pub x: Assignment,
    /// `V_{i,π_i}` for every non-root node.
    pub upward: BTreeMap<NodeId, QuadraticFunction>,
}

/// Backward then forward exact dynamic programming for an all-quadratic problem.
pub fn exact_dp_quadratic(
    problem: &TreeProblem,
    root: NodeId,
) -> Result<QuadraticDpSolution, OracleError> {
    let rooted = problem.tree().root_at(root);
    let mut upward: BTreeMap<NodeId, QuadraticFunction> = BTreeMap::new();
    let mut argmins: BTreeMap<NodeId, PartialMin> = BTreeMap::new();
    for &i in rooted.bfs_order().iter().rev() {
        let Some(parent) = rooted.parent(i) else {
            continue;
        };
        let a = assemble(problem, i, Some(parent), &|j| Ok(upward[&j].clone()))?;
        let pm = partial_minimize(&a, problem.coupling(i, parent), i)?;
        upward.insert(i, pm.value.clone());
        argmins.insert(i, pm);
    }
    let a = assemble(problem, root, None, &|j| Ok(upward[&j].clone()))?;
    let chol =
        a.q.clone()
            .cholesky()
            .ok_or(OracleError::SingularRecursion(root))?;
    let qinv_c = chol.solve(&a.c);
    let optimal_value = a.kappa - 0.5 * a.c.dot(&qinv_c);
    let mut x = vec![Vector::zeros(0); problem.len()];
    x[root.index()] = -qinv_c;
    for &i in rooted.bfs_order().iter().skip(1) {
        let parent = rooted.parent(i).expect("non-root has a parent");
        let p = problem.coupling(parent, i) * &x[parent.index()];
        x[i.index()] = argmins[&i].argmin(&p);
    }
    Ok(QuadraticDpSolution {
        optimal_value,
        x: Assignment::new(x),
        upward,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct CentralizedOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub mode: HessianMode,
}

impl Default for CentralizedOptions {
    fn default() -> Self {
        CentralizedOptions {
            tol: 1e-10,
            max_iter: 200,
            mode: HessianMode::Exact,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CentralizedSolution {
    pub x: Assignment,
    pub objective: f64,
    pub multipliers: Vector,
    pub kkt_residual: f64,
    pub iterations: usize,
}

struct Stacked<'a> {
    problem: &'a TreeProblem,
    offsets: Vec<usize>,
    n: usize,
    a: Mat,
    mode: HessianMode,
}

impl<'a> Stacked<'a> {
    fn new(problem: &'a TreeProblem, mode: HessianMode) -> Self {
        let dims = problem.dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut n = 0;
        for d in &dims {
            offsets.push(n);
            n += d;
        }
        let m: usize = problem.couplings().iter().map(|c| c.dim()).sum();
        let mut a = Mat::zeros(m, n);
        let mut row = 0;
        for c in problem.couplings() {
            let r = c.dim();
            a.view_mut((row, offsets[c.i.index()]), (r, c.s_ij.ncols()))
                .copy_from(&c.s_ij);
            a.view_mut((row, offsets[c.j.index()]), (r, c.s_ji.ncols()))
                .copy_from(&(-&c.s_ji));
            row += r;
        }
        Stacked {
            problem,
            offsets,
            n,
            a,
            mode,
        }
    }

    fn block<'v>(&self, x: &'v Vector, i: NodeId) -> nalgebra::DVectorView<'v, f64> {
        x.rows(self.offsets[i.index()], self.problem.dim(i))
    }

    fn stack(&self, x: &Assignment) -> Vector {
        let mut out = Vector::zeros(self.n);
        for i in self.problem.tree().nodes() {
            out.rows_mut(self.offsets[i.index()], self.problem.dim(i))
                .copy_from(x.node(i));
        }
        out
    }

    fn unstack(&self, x: &Vector) -> Assignment {
        Assignment::new(
            self.problem
                .tree()
                .nodes()
                .map(|i| self.block(x, i).into_owned())
                .collect(),
        )
    }
}

impl Smooth for Stacked<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &Vector) -> f64 {
        self.problem
            .tree()
            .nodes()
            .map(|i| {
                self.problem
                    .objective(i)
                    .value(&self.block(x, i).into_owned())
            })
            .sum()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.n);
        for i in self.problem.tree().nodes() {
            let gi = self
                .problem
                .objective(i)
                .gradient(&self.block(x, i).into_owned());
            g.rows_mut(self.offsets[i.index()], gi.len()).copy_from(&gi);
        }
        g
    }

    fn hessian(&self, x: &Vector) -> Mat {
        let mut h = Mat::zeros(self.n, self.n);
        for i in self.problem.tree().nodes() {
            let hi = self
                .problem
                .objective(i)
                .hessian(&self.block(x, i).into_owned(), self.mode);
            let o = self.offsets[i.index()];
            h.view_mut((o, o), (hi.nrows(), hi.ncols())).copy_from(&hi);
        }
        symmetrize(&h)
    }
}

/// Full-space Newton on the stacked KKT system of the consensus problem,
/// started from the least-norm projection of the problem's initial point.
pub fn centralized_solve(
    problem: &TreeProblem,
    opts: &CentralizedOptions,
) -> Result<CentralizedSolution, OracleError> {
    let initial = problem.initial();
    problem.check_dims(&initial)?;
    let st = Stacked::new(problem, opts.mode);
    let m = st.a.nrows();
    let aat = &st.a * st.a.transpose();
    let aat_chol = if m > 0 {
        Some(
            aat.cholesky()
                .ok_or(OracleError::Problem(ProblemError::DimensionMismatch(
                    "stacked couplings are rank deficient".into(),
                )))?,
        )
    } else {
        None
    };
    let multipliers = |g: &Vector| -> Vector {
        match &aat_chol {
            Some(ch) => -ch.solve(&(&st.a * g)),
            None => Vector::zeros(0),
        }
    };
    let mut x = st.stack(&initial);
    if let Some(ch) = &aat_chol {
        let viol = &st.a * &x;
        x -= st.a.transpose() * ch.solve(&viol);
    }
    let mut fx = st.value(&x);
    let mut g = st.gradient(&x);
    let mut lambda = multipliers(&g);
    let residual = |g: &Vector, lambda: &Vector| inf_norm(&(g + st.a.transpose() * lambda));
    let mut res = residual(&g, &lambda);
    let mut iterations = 0;
    while res > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let h = st.hessian(&x);
        let Some(d) = kkt_direction(&h, &st.a, &g) else {
            break;
        };
        let slope = g.dot(&d);
        let mut alpha = 1.0;
        let mut accepted = false;
        let full = &x + &d;
        let f_full = st.value(&full);
        if f_full.is_finite()
            && f_full > fx + 1e-4 * slope
            && f_full <= fx + 64.0 * f64::EPSILON * (1.0 + fx.abs())
        {
            // decrease below roundoff in f: judge the step by the KKT residual
            let gt = st.gradient(&full);
            if residual(&gt, &multipliers(&gt)) <= 0.5 * res {
                x = full;
                fx = f_full;
                accepted = true;
            }
        }
        while !accepted && alpha > 1e-16 {
            let trial = &x + &d * alpha;
            let ft = st.value(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope {
                x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // full step if it at least reduces the KKT residual
            let trial = &x + &d;
            let gt = st.gradient(&trial);
            let lt = multipliers(&gt);
            if residual(&gt, &lt) < res {
                x = trial;
                fx = st.value(&x);
            } else {
                break;
            }
        }
        g = st.gradient(&x);
        lambda = multipliers(&g);
        res = residual(&g, &lambda);
    }
    if res > opts.tol {
        return Err(OracleError::NoConvergence {
            residual: res,
            iterations,
        });
    }
    Ok(CentralizedSolution {
        x: st.unstack(&x),
        objective: fx,
        multipliers: lambda,
        kkt_residual: res,
        iterations,
    })
}

/// Newton direction of `min gᵀd + ½dᵀHd s.t. A d = 0`, regularizing `H`
/// until the reduced curvature along the step is positive.
fn kkt_direction(h: &Mat, a: &Mat, g: &Vector) -> Option<Vector> {
    let n = h.nrows();
    let m = a.nrows();
    let mut tau = 0.0;
    let scale = h.amax().max(1.0);
    for step in 0..120 {
        let mut k = Mat::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n))
            .copy_from(&(h + Mat::identity(n, n) * tau));
        k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
        k.view_mut((n, 0), (m, n)).copy_from(a);
        let mut rhs = Vector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-g));
        if let Some(sol) = k.lu().solve(&rhs) {
            let d = sol.rows(0, n).into_owned();
            let curv = d.dot(&((h + Mat::identity(n, n) * tau) * &d));
            let descent = g.dot(&d);
            if sol.iter().all(|v| v.is_finite())
                && (curv > 0.0 && descent < 0.0 || inf_norm(&d) == 0.0)
            {
                return Some(d);
            }
        }
        tau = if step == 0 { 1e-8 * scale } else { tau * 2.0 };
    }
    None
}

/// `Ω(p) = min f(y) s.t. S y = p` for each `p`, by damped Newton on the
/// null-space coordinates of `S`.
pub fn brute_force_value<F: Smooth + ?Sized>(
    f: &F,
    s: &Mat,
    ps: &[Vector],
    start: &Vector,
) -> Vec<f64> {
    let n = s.ncols();
    let m = s.nrows();
    let svd = nalgebra::linalg::SVD::new(s.clone(), false, true);
    let vt = svd.v_t.expect("requested V");
    // full orthonormal basis of R^n: complete the row space with Gram-Schmidt
    let mut basis: Vec<Vector> = (0..vt.nrows()).map(|r| vt.row(r).transpose()).collect();
    for e in 0..n {
        let mut v = Vector::zeros(n);
        v[e] = 1.0;
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
        if basis.len() == n {
            break;
        }
    }
    let z_basis = if n > m {
        Mat::from_columns(&basis[m..])
    } else {
        Mat::zeros(n, 0)
    };
    let pinv = s.transpose() * (s * s.transpose()).try_inverse().expect("full row rank");
    let mut out = Vec::with_capacity(ps.len());
    for p in ps {
        let y0 = &pinv * p;
        let zdim = z_basis.ncols();
        let mut z = z_basis.transpose() * (start - &y0);
        let at = |z: &Vector| &y0 + &z_basis * z;
        let mut fz = f.value(&at(&z));
        for _ in 0..200 {
            let y = at(&z);
            let gz = z_basis.transpose() * f.gradient(&y);
            if inf_norm(&gz) < 1e-13 || zdim == 0 {
                break;
            }
            let hz = symmetrize(&(z_basis.transpose() * f.hessian(&y) * &z_basis));
            let Some((ch, _)) = regularized_cholesky(&hz, 1e-10, 200) else {
                break;
            };
            let d = -ch.solve(&gz);
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-12 {
                let trial = &z + &d * alpha;
                let ft = f.value(&at(&trial));
                if ft <= fz + 1e-4 * alpha * gz.dot(&d) {
                    z = trial;
                    fz = ft;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        out.push(fz);
    }
    out
}
