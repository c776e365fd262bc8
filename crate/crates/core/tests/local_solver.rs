use std::collections::BTreeMap;

use multisweep::generators::{
    random_nonconvex_problem, random_quadratic_problem, random_tree, InstanceSpec,
};
use multisweep::local::gauss_newton_hessian;
use multisweep::power::{case33, default_estimation};
use multisweep::rng::substream;
use multisweep::{
    build_model, exact_value_functions, sensitivity, solve_node, zero_model, HessianMode,
    LeastSquares, Mat, NodeId, NodeObjective, SolverOptions, TreeProblem, ValueModel, Vector,
};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, rng: &mut impl Rng) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_models(
    problem: &TreeProblem,
    i: NodeId,
    rng: &mut impl Rng,
) -> BTreeMap<NodeId, ValueModel> {
    problem
        .tree()
        .neighbors(i)
        .iter()
        .map(|&j| {
            let m = problem.coupling_dim(i, j);
            let a = Mat::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let w = ValueModel {
                h: &a * a.transpose(),
                g: gaussian(m, rng),
                sigma: rng.random_range(0.1..1.0),
                anchor: gaussian(m, rng),
                offset: 0.0,
            };
            (j, w)
        })
        .collect()
}

/// Value of `F_i(y) + Σ W_j(S_ij y)` written out from the parts.
fn local_value(
    problem: &TreeProblem,
    i: NodeId,
    models: &BTreeMap<NodeId, ValueModel>,
    y: &Vector,
) -> f64 {
    let mut v = problem.objective(i).value(y);
    for (&j, w) in models {
        v += w.eval(&(problem.coupling(i, j) * y)).unwrap();
    }
    v
}

fn fd_gradient(f: impl Fn(&Vector) -> f64, y: &Vector, eps: f64) -> Vector {
    Vector::from_fn(y.len(), |k, _| {
        let mut e = Vector::zeros(y.len());
        e[k] = eps;
        (f(&(y + &e)) - f(&(y - &e))) / (2.0 * eps)
    })
}

#[test]
fn solver_returns_stationary_point() {
    let mut rng = substream(31, "stationary");
    let mut checked = 0;
    for _ in 0..40 {
        let n = rng.random_range(2..=8);
        let tree = random_tree(n, &mut rng);
        let problem = random_nonconvex_problem(&tree, InstanceSpec::default(), 0.8, &mut rng);
        let i = NodeId(rng.random_range(1..=n));
        let models = random_models(&problem, i, &mut rng);
        let start = gaussian(problem.dim(i), &mut rng);
        let r = solve_node(
            &problem,
            i,
            &models,
            &start,
            HessianMode::Exact,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        let g = fd_gradient(|y| local_value(&problem, i, &models, y), &r.y_star, 1e-6);
        assert!(
            g.amax() < 1e-5 * (1.0 + r.obj.abs()),
            "gradient {:.2e} at solution",
            g.amax()
        );
        assert!(
            (r.obj - local_value(&problem, i, &models, &r.y_star)).abs()
                < 1e-10 * (1.0 + r.obj.abs())
        );
        assert!(local_value(&problem, i, &models, &start) >= r.obj - 1e-12);
        checked += 1;
    }
    assert_eq!(checked, 40);
}

#[test]
fn missing_model_and_bad_start_are_errors() {
    let mut rng = substream(32, "errors");
    let tree = random_tree(4, &mut rng);
    let problem = random_quadratic_problem(&tree, InstanceSpec::default(), &mut rng);
    let i = tree.neighbors(NodeId(1))[0];
    let mut models = random_models(&problem, i, &mut rng);
    let opts = SolverOptions::default();
    assert!(solve_node(
        &problem,
        i,
        &models,
        &Vector::zeros(problem.dim(i) + 1),
        HessianMode::Exact,
        &opts
    )
    .is_err());
    models.remove(&NodeId(1));
    assert!(solve_node(
        &problem,
        i,
        &models,
        &Vector::zeros(problem.dim(i)),
        HessianMode::Exact,
        &opts
    )
    .is_err());
}

#[test]
fn quadratic_sensitivity_reproduces_the_value_function() {
    let mut rng = substream(33, "quadratic");
    for _ in 0..20 {
        let n = rng.random_range(2..=7);
        let tree = random_tree(n, &mut rng);
        let problem = random_quadratic_problem(&tree, InstanceSpec::default(), &mut rng);
        let exact = exact_value_functions(&problem).unwrap();
        let i = NodeId(rng.random_range(1..=n));
        let nbrs = tree.neighbors(i).to_vec();
        let k = nbrs[rng.random_range(0..nbrs.len())];
        let models: BTreeMap<NodeId, ValueModel> = nbrs
            .iter()
            .filter(|&&j| j != k)
            .map(|&j| {
                let v = exact.get(j, i);
                let m = v.g.len();
                (
                    j,
                    ValueModel {
                        h: v.h.clone(),
                        g: v.g.clone(),
                        sigma: 0.0,
                        anchor: Vector::zeros(m),
                        offset: v.constant,
                    },
                )
            })
            .collect();
        let s = problem.coupling(i, k);
        let p_bar = gaussian(s.nrows(), &mut rng);
        let y_start = s.clone().pseudo_inverse(1e-12).unwrap() * &p_bar;
        let sens = sensitivity(
            &problem,
            i,
            &models,
            k,
            &p_bar,
            &y_start,
            HessianMode::Exact,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((s * &sens.y - &p_bar).amax() < 1e-10);
        let w = build_model(sens.value, &sens.grad, &sens.hess, &p_bar, 0.0);
        let target = exact.get(i, k);
        for _ in 0..20 {
            let p = &p_bar + gaussian(p_bar.len(), &mut rng) * 2.0;
            let want = target.eval(&p);
            let got = w.eval(&p).unwrap();
            assert!(
                (got - want).abs() < 1e-8 * (1.0 + want.abs()),
                "{got} vs {want}"
            );
        }
    }
}

/// Gauss-Newton with a Levenberg shift on finite-difference Jacobians.
fn reference_least_squares(ls: &LeastSquares, start: &Vector) -> Vector {
    let r = |x: &Vector| ls.residual.eval(x);
    let cost = |x: &Vector| {
        let v = r(x);
        0.5 * v.dot(&(&ls.weight * &v))
    };
    let n = start.len();
    let mut x = start.clone();
    let mut mu = 1e-6;
    for _ in 0..500 {
        let r0 = r(&x);
        let mut jac = Mat::zeros(r0.len(), n);
        for k in 0..n {
            let mut e = Vector::zeros(n);
            e[k] = 1e-7;
            jac.set_column(k, &((r(&(&x + &e)) - r(&(&x - &e))) / 2e-7));
        }
        let g = jac.transpose() * (&ls.weight * &r0);
        if g.amax() < 1e-13 {
            break;
        }
        let h = jac.transpose() * &ls.weight * &jac;
        loop {
            let step = (&h + Mat::identity(n, n) * mu).lu().solve(&(-&g)).unwrap();
            let trial = &x + &step;
            if cost(&trial) <= cost(&x) {
                x = trial;
                mu = (mu * 0.3).max(1e-15);
                break;
            }
            mu *= 10.0;
            if mu > 1e12 {
                return x;
            }
        }
    }
    x
}

#[test]
fn isolated_feeder_leaf_matches_standalone_fit() {
    let grid = case33();
    let (est, _) = default_estimation(&grid, 7).unwrap();
    let problem = &est.problem;
    let start = problem.initial();
    for leaf in grid.tree().leaves() {
        let parent = grid.tree().neighbors(leaf)[0];
        let mut models = BTreeMap::new();
        models.insert(parent, zero_model(problem.coupling_dim(leaf, parent)));
        let y0 = start.node(leaf).clone();
        let r = solve_node(
            problem,
            leaf,
            &models,
            &y0,
            HessianMode::Exact,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        let NodeObjective::LeastSquares(ls) = problem.objective(leaf) else {
            panic!("bus objective is least squares")
        };
        let reference = reference_least_squares(ls, &y0);
        assert!(
            (&r.y_star - &reference).amax() < 1e-6,
            "leaf {leaf}: {:.2e}",
            (&r.y_star - &reference).amax()
        );
        assert!(r.obj <= ls.value(&reference) + 1e-12);
    }
}

#[test]
fn gauss_newton_curvature_is_positive_semidefinite_on_the_feeder() {
    let grid = case33();
    let (est, _) = default_estimation(&grid, 3).unwrap();
    let mut rng = substream(34, "gn-psd");
    for _ in 0..5 {
        for i in grid.tree().nodes() {
            let NodeObjective::LeastSquares(ls) = est.problem.objective(i) else {
                panic!("least squares")
            };
            let y = Vector::from_fn(ls.residual.input_dim(), |k, _| {
                if k % 2 == 0 {
                    rng.random_range(0.9..1.1)
                } else {
                    rng.random_range(-0.2..0.2)
                }
            });
            let h = gauss_newton_hessian(ls, &y);
            let min = h.symmetric_eigenvalues().min();
            assert!(min >= -1e-10, "bus {i}: λ_min = {min:.2e}");
        }
    }
}

#[test]
fn gauss_newton_equals_exact_for_linear_residuals() {
    let mut rng = substream(35, "linear");
    for _ in 0..20 {
        let (m, n) = (rng.random_range(3..8), rng.random_range(1..4));
        let a = Mat::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let ls = LeastSquares::linear(a.clone(), gaussian(m, &mut rng), Mat::identity(m, m));
        let y = gaussian(n, &mut rng);
        let h = gauss_newton_hessian(&ls, &y);
        assert!((&h - a.transpose() * &a).amax() < 1e-12);
        assert!((&h - ls.exact_hessian(&y)).amax() < 1e-12);
    }
}
