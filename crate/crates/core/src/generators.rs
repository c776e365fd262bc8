//! Builtin topologies and random problem instances.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{has_full_row_rank, Mat, Vector};
use crate::problem::{CouplingPair, NodeObjective, SmoothObjective, TreeProblem};
use crate::tree::{NodeId, Tree};

/// The six-node example tree with central nodes 2 and 4.
pub fn six_node_tree() -> Tree {
    Tree::new(6, &[(1, 2), (2, 3), (2, 4), (4, 5), (4, 6)]).expect("valid tree")
}

pub fn chain_tree(n: usize) -> Tree {
    let edges: Vec<_> = (1..n).map(|k| (k, k + 1)).collect();
    Tree::new(n, &edges).expect("valid chain")
}

/// Node 1 is the hub.
pub fn star_tree(n: usize) -> Tree {
    let edges: Vec<_> = (2..=n).map(|k| (1, k)).collect();
    Tree::new(n, &edges).expect("valid star")
}

/// Uniform labeled tree on `n ≥ 1` nodes decoded from a random Prüfer sequence.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Tree {
    assert!(n >= 1, "a tree needs at least one node");
    if n <= 2 {
        let edges: Vec<_> = (1..n).map(|k| (k, k + 1)).collect();
        return Tree::new(n, &edges).expect("valid tree");
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(1..=n)).collect();
    let mut degree = vec![1usize; n + 1];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in &seq {
        let leaf = (1..=n).find(|&k| degree[k] == 1).expect("a leaf exists");
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (1..=n).filter(|&k| degree[k] == 1).collect();
    edges.push((rest[0], rest[1]));
    Tree::new(n, &edges).expect("Prüfer decoding yields a tree")
}

/// Shape of random instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    pub max_dim: usize,
    pub max_coupling: usize,
    /// Condition number of every node Hessian.
    pub cond: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            max_dim: 5,
            max_coupling: 2,
            cond: 10.0,
        }
    }
}

fn gaussian_mat<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gaussian_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `U diag(λ) Uᵀ` with a random orthogonal `U` and `λ` log-spaced in `[1, cond]`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, cond: f64, rng: &mut R) -> Mat {
    let u = gaussian_mat(n, n, rng).qr().q();
    let lambda = Vector::from_fn(n, |k, _| {
        if n == 1 {
            1.0
        } else {
            cond.powf(k as f64 / (n - 1) as f64)
        }
    });
    let m = &u * Mat::from_diagonal(&lambda) * u.transpose();
    (&m + m.transpose()) * 0.5
}

/// Random dimensions and full-row-rank Gaussian couplings on `tree`.
fn random_layout<R: Rng + ?Sized>(
    tree: &Tree,
    spec: InstanceSpec,
    rng: &mut R,
) -> (Vec<usize>, Vec<CouplingPair>) {
    let dims: Vec<usize> = tree
        .nodes()
        .map(|_| rng.random_range(1..=spec.max_dim.max(1)))
        .collect();
    let couplings = tree
        .edges()
        .iter()
        .map(|&(i, j)| {
            let (ni, nj) = (dims[i.index()], dims[j.index()]);
            let m = rng.random_range(1..=spec.max_coupling.max(1).min(ni).min(nj));
            loop {
                let s_ij = gaussian_mat(m, ni, rng);
                let s_ji = gaussian_mat(m, nj, rng);
                if has_full_row_rank(&s_ij) && has_full_row_rank(&s_ji) {
                    break CouplingPair { i, j, s_ij, s_ji };
                }
            }
        })
        .collect();
    (dims, couplings)
}

/// Strictly convex quadratic objectives with random couplings.
pub fn random_quadratic_problem<R: Rng + ?Sized>(
    tree: &Tree,
    spec: InstanceSpec,
    rng: &mut R,
) -> TreeProblem {
    let (dims, couplings) = random_layout(tree, spec, rng);
    let objectives = dims
        .iter()
        .map(|&n| {
            NodeObjective::quadratic(random_spd(n, spec.cond, rng), gaussian_vec(n, rng), 0.0)
        })
        .collect();
    TreeProblem::new(tree.clone(), objectives, couplings).expect("generated problem is consistent")
}

/// `½ xᵀQx + cᵀx + Σ_k a_k cos x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineQuadratic {
    pub q: Mat,
    pub c: Vector,
    pub a: Vector,
}

impl SmoothObjective for CosineQuadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q * x))
            + self.c.dot(x)
            + x.iter()
                .zip(self.a.iter())
                .map(|(x, a)| a * x.cos())
                .sum::<f64>()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.q * x + &self.c - self.a.component_mul(&x.map(f64::sin))
    }

    fn hessian(&self, x: &Vector) -> Mat {
        &self.q - Mat::from_diagonal(&self.a.component_mul(&x.map(f64::cos)))
    }
}

/// Quadratics perturbed by cosine terms with amplitudes up to
/// `amplitude · λ_min(Q)`, so that some node Hessians are indefinite.
pub fn random_nonconvex_problem<R: Rng + ?Sized>(
    tree: &Tree,
    spec: InstanceSpec,
    amplitude: f64,
    rng: &mut R,
) -> TreeProblem {
    let (dims, couplings) = random_layout(tree, spec, rng);
    let objectives = dims
        .iter()
        .map(|&n| {
            let q = random_spd(n, spec.cond, rng);
            let c = gaussian_vec(n, rng);
            let a = Vector::from_fn(n, |_, _| amplitude * rng.random::<f64>());
            NodeObjective::General(Arc::new(CosineQuadratic { q, c, a }))
        })
        .collect();
    TreeProblem::new(tree.clone(), objectives, couplings).expect("generated problem is consistent")
}

/// `F_i = (x_i − i)²` with scalar identity couplings; the optimum is the
/// average label at every node.
pub fn scalar_average_problem(tree: &Tree) -> TreeProblem {
    let objectives = tree
        .nodes()
        .map(|i| {
            let t = i.0 as f64;
            NodeObjective::quadratic(
                Mat::from_element(1, 1, 2.0),
                Vector::from_element(1, -2.0 * t),
                t * t,
            )
        })
        .collect();
    let couplings = tree
        .edges()
        .iter()
        .map(|&(i, j)| CouplingPair {
            i,
            j,
            s_ij: Mat::identity(1, 1),
            s_ji: Mat::identity(1, 1),
        })
        .collect();
    TreeProblem::new(tree.clone(), objectives, couplings).expect("consistent")
}

/// Index of the node with the most neighbors, ties to the smaller id.
pub fn hub(tree: &Tree) -> NodeId {
    tree.nodes()
        .max_by_key(|&i| (tree.degree(i), std::cmp::Reverse(i)))
        .expect("nonempty tree")
}
