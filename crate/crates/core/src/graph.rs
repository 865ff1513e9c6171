//! Simple undirected graphs on dense node ids `0..n`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

pub type NodeId = usize;

/// An unordered pair stored with `lo < hi`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    lo: NodeId,
    hi: NodeId,
}

impl Edge {
    /// Normalizes endpoint order. Returns `None` for a self-loop.
    pub fn new(a: NodeId, b: NodeId) -> Option<Edge> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Edge { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Some(Edge { lo: b, hi: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn lo(&self) -> NodeId {
        self.lo
    }

    pub fn hi(&self) -> NodeId {
        self.hi
    }

    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.lo, self.hi)
    }

    /// Dense index in `0..n(n-1)/2`, row-major over `lo`.
    pub fn index(&self, n: usize) -> usize {
        let lo = self.lo;
        lo * (2 * n - lo - 1) / 2 + (self.hi - lo - 1)
    }

    pub fn from_index(idx: usize, n: usize) -> Edge {
        let mut lo = 0;
        let mut base = 0;
        loop {
            let row = n - lo - 1;
            if idx < base + row {
                return Edge { lo, hi: lo + 1 + (idx - base) };
            }
            base += row;
            lo += 1;
        }
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("edge ({0},{1}) out of range for n = {2}")]
    OutOfRange(NodeId, NodeId, usize),
    #[error("duplicate edge ({0},{1})")]
    Duplicate(NodeId, NodeId),
    #[error("graphs have different node counts ({0} vs {1})")]
    SizeMismatch(usize, usize),
}

/// Number of potential edges `C(n, 2)`.
pub fn potential_edges(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// A simple undirected graph. Adjacency lists are kept sorted by node id.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<Edge>,
    adj: Vec<Vec<NodeId>>,
}

impl Graph {
    pub fn empty(n: usize) -> Graph {
        Graph { n, edges: BTreeSet::new(), adj: vec![Vec::new(); n] }
    }

    /// Builds a graph, rejecting self-loops, duplicates and out-of-range ids.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Graph, GraphError> {
        let mut edges = BTreeSet::new();
        for (a, b) in pairs {
            if a >= n || b >= n {
                return Err(GraphError::OutOfRange(a, b, n));
            }
            let e = Edge::new(a, b).ok_or(GraphError::SelfLoop(a))?;
            if !edges.insert(e) {
                return Err(GraphError::Duplicate(e.lo, e.hi));
            }
        }
        Ok(Graph::from_edge_set(n, edges))
    }

    pub fn from_edge_set(n: usize, edges: BTreeSet<Edge>) -> Graph {
        let mut adj = vec![Vec::new(); n];
        for e in &edges {
            adj[e.lo].push(e.hi);
            adj[e.hi].push(e.lo);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Graph { n, edges, adj }
    }

    /// Path visiting `order[0] - order[1] - ... - order[n-1]`.
    pub fn line(order: &[NodeId]) -> Graph {
        let n = order.len();
        let edges = order.windows(2).filter_map(|w| Edge::new(w[0], w[1])).collect();
        Graph::from_edge_set(n, edges)
    }

    pub fn path(n: usize) -> Graph {
        Graph::line(&(0..n).collect::<Vec<_>>())
    }

    /// Star centered at node 0.
    pub fn star(n: usize) -> Graph {
        let edges = (1..n).filter_map(|v| Edge::new(0, v)).collect();
        Graph::from_edge_set(n, edges)
    }

    pub fn cycle(n: usize) -> Graph {
        let mut edges: BTreeSet<Edge> = (0..n.saturating_sub(1)).filter_map(|v| Edge::new(v, v + 1)).collect();
        if n >= 3 {
            edges.extend(Edge::new(n - 1, 0));
        }
        Graph::from_edge_set(n, edges)
    }

    pub fn complete(n: usize) -> Graph {
        let edges = (0..potential_edges(n)).map(|i| Edge::from_index(i, n)).collect();
        Graph::from_edge_set(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_set(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        Edge::new(a, b).is_some_and(|e| self.edges.contains(&e))
    }

    /// Graph with the given potential edges toggled.
    pub fn flipped(&self, flips: impl IntoIterator<Item = Edge>) -> Graph {
        let mut edges = self.edges.clone();
        for e in flips {
            if !edges.remove(&e) {
                edges.insert(e);
            }
        }
        Graph::from_edge_set(self.n, edges)
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[src] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// All-pairs hop distances (`usize::MAX` when unreachable).
    pub fn all_pairs_distances(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|s| self.bfs_distances(s).into_iter().map(|d| d.unwrap_or(usize::MAX)).collect())
            .collect()
    }

    /// Node order along a simple path, starting from the lower-id endpoint.
    /// `None` if the graph is not a Hamiltonian path.
    pub fn as_line(&self) -> Option<Vec<NodeId>> {
        if self.n == 0 {
            return Some(Vec::new());
        }
        if self.n == 1 {
            return Some(vec![0]);
        }
        if self.edges.len() != self.n - 1 || self.adj.iter().any(|a| a.is_empty() || a.len() > 2) {
            return None;
        }
        let start = (0..self.n).find(|&v| self.adj[v].len() == 1)?;
        let mut order = Vec::with_capacity(self.n);
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            order.push(cur);
            let next = self.adj[cur].iter().copied().find(|&v| v != prev);
            match next {
                Some(v) if order.len() < self.n => {
                    prev = cur;
                    cur = v;
                }
                _ => break,
            }
        }
        (order.len() == self.n).then_some(order)
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, {:?})", self.n, self.edges)
    }
}

/// Number of unordered pairs present in exactly one of the two graphs.
pub fn hamming_distance(a: &Graph, b: &Graph) -> Result<usize, GraphError> {
    if a.n != b.n {
        return Err(GraphError::SizeMismatch(a.n, b.n));
    }
    Ok(a.edges.symmetric_difference(&b.edges).count())
}
