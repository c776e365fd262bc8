use std::collections::BTreeSet;

use multisweep::generators::{random_tree, six_node_tree};
use multisweep::rng::substream;
use multisweep::{NodeId, Tree};
use proptest::prelude::*;

/// All-pairs hop counts by Floyd-Warshall on the edge list.
fn floyd_warshall(n: usize, edges: &[(NodeId, NodeId)]) -> Vec<Vec<usize>> {
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (k, row) in d.iter_mut().enumerate() {
        row[k] = 0;
    }
    for &(a, b) in edges {
        d[a.index()][b.index()] = 1;
        d[b.index()][a.index()] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn brute_center(d: &[Vec<usize>]) -> BTreeSet<usize> {
    let ecc: Vec<usize> = d.iter().map(|row| *row.iter().max().unwrap()).collect();
    let best = *ecc.iter().min().unwrap();
    (0..d.len())
        .filter(|&k| ecc[k] == best)
        .map(|k| k + 1)
        .collect()
}

fn tree_from_seed(n: usize, seed: u64) -> Tree {
    random_tree(n, &mut substream(seed, "tree-props"))
}

#[test]
fn six_node_tree_matches_reference_values() {
    let t = six_node_tree();
    let leaves: Vec<usize> = t.leaves().iter().map(|n| n.0).collect();
    assert_eq!(leaves, vec![1, 3, 5, 6]);
    assert_eq!(t.distance(NodeId(1), NodeId(5)), 3);
    assert_eq!(t.depth_from(NodeId(1)), 3);
    assert_eq!(t.depth_from(NodeId(2)), 2);
    let center: Vec<usize> = t.central_nodes().iter().map(|n| n.0).collect();
    assert_eq!(center, vec![2, 4]);
}

#[test]
fn invalid_edge_sets_are_rejected() {
    assert!(Tree::new(3, &[(1, 2)]).is_err());
    assert!(Tree::new(3, &[(1, 2), (2, 3), (3, 1)]).is_err());
    assert!(Tree::new(2, &[(1, 1)]).is_err());
    assert!(Tree::new(2, &[(1, 3)]).is_err());
    assert!(Tree::new(4, &[(1, 2), (3, 4), (1, 2)]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_agree_with_floyd_warshall(n in 1usize..=50, seed in any::<u64>()) {
        let t = tree_from_seed(n, seed);
        let d = floyd_warshall(n, t.edges());
        for i in t.nodes() {
            for j in t.nodes() {
                prop_assert_eq!(t.distance(i, j), d[i.index()][j.index()]);
            }
        }
    }

    #[test]
    fn metric_axioms(n in 1usize..=50, seed in any::<u64>()) {
        let t = tree_from_seed(n, seed);
        let d = t.all_pairs();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(d[i][j] == 0, i == j);
                prop_assert_eq!(d[i][j], d[j][i]);
                for k in 0..n {
                    prop_assert!(d[i][k] <= d[i][j] + d[j][k]);
                }
            }
        }
    }

    #[test]
    fn center_agrees_with_brute_force_and_has_parity(n in 1usize..=60, seed in any::<u64>()) {
        let t = tree_from_seed(n, seed);
        let gamma: BTreeSet<usize> = t.central_nodes().iter().map(|x| x.0).collect();
        prop_assert_eq!(&gamma, &brute_center(&floyd_warshall(n, t.edges())));
        prop_assert!(gamma.len() == 1 || gamma.len() == 2);
        if gamma.len() == 2 {
            let v: Vec<usize> = gamma.into_iter().collect();
            prop_assert!(t.has_edge(NodeId(v[0]), NodeId(v[1])));
        }
    }

    #[test]
    fn relabeling_preserves_distance_leaves_and_center(n in 2usize..=40, seed in any::<u64>(), perm_seed in any::<u64>()) {
        let t = tree_from_seed(n, seed);
        let mut labels: Vec<usize> = (1..=n).collect();
        let mut rng = substream(perm_seed, "perm");
        use rand::seq::SliceRandom;
        labels.shuffle(&mut rng);
        let pi = |x: NodeId| labels[x.index()];
        let edges: Vec<(usize, usize)> = t.edges().iter().map(|&(a, b)| (pi(a), pi(b))).collect();
        let u = Tree::new(n, &edges).unwrap();
        for i in t.nodes() {
            for j in t.nodes() {
                prop_assert_eq!(t.distance(i, j), u.distance(NodeId(pi(i)), NodeId(pi(j))));
            }
        }
        let leaves: BTreeSet<usize> = t.leaves().into_iter().map(pi).collect();
        prop_assert_eq!(leaves, u.leaves().into_iter().map(|x| x.0).collect::<BTreeSet<_>>());
        let center: BTreeSet<usize> = t.central_nodes().into_iter().map(pi).collect();
        prop_assert_eq!(center, u.central_nodes().into_iter().map(|x| x.0).collect::<BTreeSet<_>>());
    }

    #[test]
    fn rooting_is_consistent(n in 1usize..=40, seed in any::<u64>(), r in any::<prop::sample::Index>()) {
        let t = tree_from_seed(n, seed);
        let root = NodeId(r.index(n) + 1);
        let rt = t.root_at(root);
        prop_assert_eq!(rt.parent(root), None);
        prop_assert_eq!(rt.depth(), t.depth_from(root));
        for i in t.nodes() {
            let children: BTreeSet<NodeId> = rt.children(i).iter().copied().collect();
            let neighbors: BTreeSet<NodeId> = t.neighbors(i).iter().copied().collect();
            match rt.parent(i) {
                None => prop_assert_eq!(children, neighbors),
                Some(p) => {
                    prop_assert!(!children.contains(&p));
                    let mut all = children.clone();
                    all.insert(p);
                    prop_assert_eq!(all, neighbors);
                    prop_assert_eq!(rt.node_depth(i), rt.node_depth(p) + 1);
                    prop_assert_eq!(rt.node_depth(i), t.distance(root, i));
                }
            }
            prop_assert_eq!(rt.children(i).is_empty(), rt.leaves().contains(&i));
        }
    }
}
