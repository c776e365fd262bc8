//! Undirected tree graphs and the structural quantities the sweep protocols
//! depend on: rooting, leaves, the path metric, depth and central nodes.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based node label. Labels are stable: rooting never renumbers nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    /// Zero-based position used for vector indexing.
    #[inline]
    pub fn index(self) -> usize {
        self.0 - 1
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        NodeId(index + 1)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("tree must have at least one node")]
    Empty,
    #[error("node {0} out of range 1..={1}")]
    NodeOutOfRange(usize, usize),
    #[error("not a tree: self-loop at node {0}")]
    SelfLoop(usize),
    #[error("not a tree: duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("not a tree: cycle through edge ({0}, {1})")]
    Cycle(usize, usize),
    #[error("not a tree: graph is disconnected")]
    Disconnected,
}

/// Connected acyclic undirected graph on nodes `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    adjacency: Vec<Vec<NodeId>>,
    edges: Vec<(NodeId, NodeId)>,
}

impl Tree {
    /// Validates `edges` (unordered pairs, any order) as a spanning tree on `n` nodes.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, TreeError> {
        if n == 0 {
            return Err(TreeError::Empty);
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        // union-find catches cycles before the connectivity check
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in edges {
            for v in [a, b] {
                if v == 0 || v > n {
                    return Err(TreeError::NodeOutOfRange(v, n));
                }
            }
            if a == b {
                return Err(TreeError::SelfLoop(a));
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((lo, hi)) {
                return Err(TreeError::DuplicateEdge(lo, hi));
            }
            let (ra, rb) = (find(&mut parent, lo - 1), find(&mut parent, hi - 1));
            if ra == rb {
                return Err(TreeError::Cycle(lo, hi));
            }
            parent[ra] = rb;
            adjacency[lo - 1].push(NodeId(hi));
            adjacency[hi - 1].push(NodeId(lo));
        }
        if edges.len() != n - 1 {
            return Err(TreeError::Disconnected);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let edges = seen
            .into_iter()
            .map(|(a, b)| (NodeId(a), NodeId(b)))
            .collect();
        Ok(Tree { adjacency, edges })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..=self.len()).map(NodeId)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 >= 1 && node.0 <= self.len()
    }

    /// Sorted neighbor list `N_i`.
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node.index()]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node.index()].len()
    }

    /// Undirected edges as `(lo, hi)` pairs, sorted.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.contains(a) && self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Nodes with at most one neighbor. Independent of any root.
    pub fn leaves(&self) -> BTreeSet<NodeId> {
        self.nodes().filter(|&i| self.degree(i) <= 1).collect()
    }

    /// Leaves with the root removed.
    pub fn leaves_excluding(&self, root: NodeId) -> BTreeSet<NodeId> {
        let mut set = self.leaves();
        set.remove(&root);
        set
    }

    /// Hop distances from `source` to every node (BFS).
    pub fn distances_from(&self, source: NodeId) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        let mut queue = VecDeque::new();
        dist[source.index()] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()];
            for &w in self.neighbors(u) {
                if dist[w.index()] == usize::MAX {
                    dist[w.index()] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Length of the unique simple path between `a` and `b`.
    pub fn distance(&self, a: NodeId, b: NodeId) -> usize {
        self.distances_from(a)[b.index()]
    }

    /// All-pairs distance table, `table[i][j] = d(i+1, j+1)`.
    pub fn all_pairs(&self) -> Vec<Vec<usize>> {
        self.nodes().map(|i| self.distances_from(i)).collect()
    }

    pub fn eccentricity(&self, node: NodeId) -> usize {
        self.distances_from(node).into_iter().max().unwrap_or(0)
    }

    /// Exact argmin of eccentricity. Always one node or two adjacent nodes.
    pub fn central_nodes(&self) -> BTreeSet<NodeId> {
        let ecc: Vec<usize> = self.nodes().map(|i| self.eccentricity(i)).collect();
        let best = ecc.iter().copied().min().unwrap_or(0);
        self.nodes().filter(|i| ecc[i.index()] == best).collect()
    }

    /// Depth of the tree when rooted at `root`.
    pub fn depth_from(&self, root: NodeId) -> usize {
        self.eccentricity(root)
    }

    pub fn root_at(&self, root: NodeId) -> RootedTree {
        RootedTree::new(self.clone(), root)
    }
}

/// A tree together with a chosen root and the induced parent/children maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    tree: Tree,
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    depth: Vec<usize>,
    order: Vec<NodeId>,
}

impl RootedTree {
    /// # Panics
    /// If `root` is not a node of `tree`.
    pub fn new(tree: Tree, root: NodeId) -> Self {
        assert!(tree.contains(root), "root {root} not in tree");
        let n = tree.len();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut depth = vec![0; n];
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        visited[root.index()] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &w in tree.neighbors(u) {
                if !visited[w.index()] {
                    visited[w.index()] = true;
                    parent[w.index()] = Some(u);
                    depth[w.index()] = depth[u.index()] + 1;
                    children[u.index()].push(w);
                    queue.push_back(w);
                }
            }
        }
        RootedTree {
            tree,
            root,
            parent,
            children,
            depth,
            order,
        }
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent[node.index()]
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node.index()]
    }

    pub fn node_depth(&self, node: NodeId) -> usize {
        self.depth[node.index()]
    }

    /// `D = max_j d(root, j)`.
    pub fn depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Breadth-first order starting at the root; reversed it visits children
    /// before parents.
    pub fn bfs_order(&self) -> &[NodeId] {
        &self.order
    }

    /// Nodes without children (the root is excluded unless it is alone).
    pub fn leaves(&self) -> BTreeSet<NodeId> {
        self.tree
            .nodes()
            .filter(|&i| self.children(i).is_empty() && (i != self.root || self.tree.len() == 1))
            .collect()
    }

    /// Parent-to-child pairs.
    pub fn oriented_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.order
            .iter()
            .flat_map(|&p| self.children(p).iter().map(move |&c| (p, c)))
            .collect()
    }
}
