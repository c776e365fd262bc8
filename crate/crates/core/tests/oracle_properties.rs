use multisweep::generators::{random_quadratic_problem, random_tree, InstanceSpec};
use multisweep::oracle::{brute_force_value, CentralizedOptions};
use multisweep::rng::substream;
use multisweep::{
    centralized_solve, exact_dp_quadratic, exact_value_functions, Mat, NodeId, TreeProblem, Vector,
};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, rng: &mut impl Rng) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `min ½xᵀQx + cᵀx s.t. A x = b` via the dense KKT system with iterative refinement.
fn kkt_minimize(q: &Mat, c: &Vector, a: &Mat, b: &Vector) -> Vector {
    let (n, m) = (q.nrows(), a.nrows());
    let mut k = Mat::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(q);
    k.view_mut((n, 0), (m, n)).copy_from(a);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-c));
    rhs.rows_mut(n, m).copy_from(b);
    let lu = k.clone().lu();
    let mut z = lu.solve(&rhs).expect("nonsingular KKT");
    for _ in 0..3 {
        let r = &rhs - &k * &z;
        z += lu.solve(&r).expect("nonsingular KKT");
    }
    z.rows(0, n).into_owned()
}

fn random_problem(rng: &mut impl Rng) -> TreeProblem {
    let n = rng.random_range(2..=9);
    let tree = random_tree(n, rng);
    random_quadratic_problem(
        &tree,
        InstanceSpec {
            max_dim: 4,
            max_coupling: 2,
            cond: 20.0,
        },
        rng,
    )
}

#[test]
fn value_functions_satisfy_the_recursion() {
    let mut rng = substream(41, "recursion");
    for _ in 0..30 {
        let problem = random_problem(&mut rng);
        let v = exact_value_functions(&problem).unwrap();
        for i in problem.tree().nodes() {
            for &k in problem.tree().neighbors(i) {
                let (mut q, mut c, mut kappa) = problem.objective(i).quadratic_form().unwrap();
                for &j in problem.tree().neighbors(i) {
                    if j == k {
                        continue;
                    }
                    let vj = v.get(j, i);
                    let s = problem.coupling(i, j);
                    q += s.transpose() * &vj.h * s;
                    c += s.transpose() * &vj.g;
                    kappa += vj.constant;
                }
                let s = problem.coupling(i, k);
                for _ in 0..5 {
                    let p = gaussian(s.nrows(), &mut rng);
                    let x = kkt_minimize(&q, &c, s, &p);
                    let want = 0.5 * x.dot(&(&q * &x)) + c.dot(&x) + kappa;
                    let got = v.get(i, k).eval(&p);
                    assert!(
                        (got - want).abs() < 1e-10 * (1.0 + want.abs()),
                        "V_{{{i},{k}}}: {got} vs {want}"
                    );
                }
            }
        }
    }
}

/// Whole problem stacked into one equality-constrained quadratic.
fn stacked_optimum(problem: &TreeProblem) -> (f64, Vec<Vector>) {
    let dims = problem.dims();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &d| Some(std::mem::replace(acc, *acc + d)))
        .collect();
    let n: usize = dims.iter().sum();
    let mut q = Mat::zeros(n, n);
    let mut c = Vector::zeros(n);
    let mut kappa = 0.0;
    for i in problem.tree().nodes() {
        let (qi, ci, ki) = problem.objective(i).quadratic_form().unwrap();
        let o = offsets[i.index()];
        q.view_mut((o, o), (qi.nrows(), qi.ncols())).copy_from(&qi);
        c.rows_mut(o, ci.len()).copy_from(&ci);
        kappa += ki;
    }
    let rows: usize = problem.couplings().iter().map(|cp| cp.s_ij.nrows()).sum();
    let mut a = Mat::zeros(rows, n);
    let mut r = 0;
    for cp in problem.couplings() {
        let m = cp.s_ij.nrows();
        a.view_mut((r, offsets[cp.i.index()]), (m, cp.s_ij.ncols()))
            .copy_from(&cp.s_ij);
        a.view_mut((r, offsets[cp.j.index()]), (m, cp.s_ji.ncols()))
            .copy_from(&(-&cp.s_ji));
        r += m;
    }
    let x = kkt_minimize(&q, &c, &a, &Vector::zeros(rows));
    let value = 0.5 * x.dot(&(&q * &x)) + c.dot(&x) + kappa;
    let parts = problem
        .tree()
        .nodes()
        .map(|i| x.rows(offsets[i.index()], dims[i.index()]).into_owned())
        .collect();
    (value, parts)
}

#[test]
fn dynamic_programming_matches_the_stacked_optimum() {
    let mut rng = substream(42, "stacked");
    for _ in 0..30 {
        let problem = random_problem(&mut rng);
        let (value, parts) = stacked_optimum(&problem);
        for root in problem.tree().nodes() {
            let dp = exact_dp_quadratic(&problem, root).unwrap();
            assert!((dp.optimal_value - value).abs() < 1e-9 * (1.0 + value.abs()));
            let total = problem.total_objective(&dp.x).unwrap();
            assert!((total - dp.optimal_value).abs() < 1e-9 * (1.0 + value.abs()));
            assert!(problem.consensus_residual(&dp.x).unwrap() < 1e-9);
            for i in problem.tree().nodes() {
                assert!((dp.x.node(i) - &parts[i.index()]).amax() < 1e-8);
            }
        }
    }
}

#[test]
fn centralized_solver_agrees_on_quadratics() {
    let mut rng = substream(43, "central");
    for _ in 0..20 {
        let problem = random_problem(&mut rng);
        let (value, parts) = stacked_optimum(&problem);
        let sol = centralized_solve(&problem, &CentralizedOptions::default()).unwrap();
        assert!(sol.kkt_residual < 1e-9);
        assert!((sol.objective - value).abs() < 1e-9 * (1.0 + value.abs()));
        for i in problem.tree().nodes() {
            assert!((sol.x.node(i) - &parts[i.index()]).amax() < 1e-8);
        }
    }
}

#[test]
fn brute_force_value_matches_closed_form() {
    use multisweep::local::LocalObjective;
    use multisweep::{HessianMode, ValueModel};
    let mut rng = substream(44, "brute");
    for _ in 0..20 {
        let problem = random_problem(&mut rng);
        let v = exact_value_functions(&problem).unwrap();
        let i = NodeId(rng.random_range(1..=problem.len()));
        let k = problem.tree().neighbors(i)[0];
        let models: Vec<(NodeId, ValueModel)> = problem
            .tree()
            .neighbors(i)
            .iter()
            .filter(|&&j| j != k)
            .map(|&j| {
                let f = v.get(j, i);
                (
                    j,
                    ValueModel {
                        h: f.h.clone(),
                        g: f.g.clone(),
                        sigma: 0.0,
                        anchor: Vector::zeros(f.g.len()),
                        offset: f.constant,
                    },
                )
            })
            .collect();
        let f = LocalObjective {
            objective: problem.objective(i),
            terms: models
                .iter()
                .map(|(j, w)| (problem.coupling(i, *j), w))
                .collect(),
            mode: HessianMode::Exact,
        };
        let s = problem.coupling(i, k);
        let ps: Vec<Vector> = (0..5).map(|_| gaussian(s.nrows(), &mut rng)).collect();
        let got = brute_force_value(&f, s, &ps, &Vector::zeros(s.ncols()));
        for (p, g) in ps.iter().zip(got) {
            let want = v.get(i, k).eval(p);
            assert!(
                (g - want).abs() < 1e-8 * (1.0 + want.abs()),
                "{g} vs {want}"
            );
        }
    }
}
