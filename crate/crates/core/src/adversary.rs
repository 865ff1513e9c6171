//! Adaptive adversaries choosing the round graph `G_adv`.
//!
//! Every policy sees the past adversarial and smoothed graphs, the current
//! loads and the connections realized in the previous round, and must emit
//! a connected simple graph on `n` nodes.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::algorithms::Connection;
use crate::dyadic::ExactDecimal;
use crate::graph::{Edge, Graph, NodeId};
use crate::load::LoadState;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("connected pair ({0},{1}) is not adjacent in the line (positions {2} and {3})")]
    NotAdjacent(NodeId, NodeId, usize, usize),
    #[error("static graph has {got} nodes, scenario has {expected}")]
    WrongSize { got: usize, expected: usize },
    #[error("static graph is not connected")]
    Disconnected,
}

/// How much graph history a policy wants the engine to retain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryDepth {
    None,
    Last(usize),
    Full,
}

/// Everything an adaptive adversary may look at before choosing round
/// `round`'s graph. Histories cover rounds `1..round` (truncated to the
/// policy's [`HistoryDepth`]).
pub struct AdversaryContext<'a> {
    pub round: u64,
    pub past_adv_graphs: &'a [Arc<Graph>],
    pub past_smoothed_graphs: &'a [Arc<Graph>],
    pub current_loads: &'a LoadState,
    pub last_matching: &'a [Connection],
}

/// A named strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversaryPolicy {
    Static(Graph),
    /// Line ordered from heaviest to lightest, ties by ascending id.
    ResortDescending,
    /// Line that re-sorts every connected pair into ascending order.
    SortingLine,
    /// Uniform spanning tree plus each other potential edge with the given probability.
    RandomConnected { edge_probability: ExactDecimal },
}

impl AdversaryPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryPolicy::Static(_) => "static",
            AdversaryPolicy::ResortDescending => "resortDescending",
            AdversaryPolicy::SortingLine => "sortingLine",
            AdversaryPolicy::RandomConnected { .. } => "randomConnected",
        }
    }

    pub fn history_depth(&self) -> HistoryDepth {
        HistoryDepth::None
    }
}

/// A policy together with its private state (current line, seed stream).
pub struct Adversary {
    policy: AdversaryPolicy,
    n: usize,
    line: Option<Vec<NodeId>>,
    rng: SimRng,
}

impl Adversary {
    pub fn new(policy: AdversaryPolicy, n: usize, rng: SimRng) -> Result<Adversary, AdversaryError> {
        if let AdversaryPolicy::Static(g) = &policy {
            if g.node_count() != n {
                return Err(AdversaryError::WrongSize { got: g.node_count(), expected: n });
            }
            if !g.is_connected() {
                return Err(AdversaryError::Disconnected);
            }
        }
        Ok(Adversary { policy, n, line: None, rng })
    }

    pub fn policy(&self) -> &AdversaryPolicy {
        &self.policy
    }

    /// Replaces the adversary's random source, e.g. with a per-round stream.
    pub fn reseed(&mut self, rng: SimRng) {
        self.rng = rng;
    }

    /// Positional node order of the last emitted line, for line policies.
    pub fn line_order(&self) -> Option<&[NodeId]> {
        self.line.as_deref()
    }

    pub fn next_graph(&mut self, ctx: &AdversaryContext<'_>) -> Result<Graph, AdversaryError> {
        match &self.policy {
            AdversaryPolicy::Static(g) => Ok(g.clone()),
            AdversaryPolicy::ResortDescending => {
                let order = descending_order(ctx.current_loads);
                let g = Graph::line(&order);
                self.line = Some(order);
                Ok(g)
            }
            AdversaryPolicy::SortingLine => {
                let order = match self.line.take() {
                    None => ascending_order(ctx.current_loads),
                    Some(prev) => {
                        let pos = positions(&prev);
                        // Pairs joined through a noise edge are not adjacent in the
                        // line; the adversary orders them too, by swapping positions.
                        let (adjacent, remote): (Vec<Connection>, Vec<Connection>) = ctx
                            .last_matching
                            .iter()
                            .cloned()
                            .partition(|c| pos[c.proposer].abs_diff(pos[c.acceptor]) == 1);
                        let order = sorting_line_postprocess(&prev, ctx.current_loads, &adjacent)?;
                        order_pairs(order, ctx.current_loads, &remote)
                    }
                };
                let g = Graph::line(&order);
                self.line = Some(order);
                Ok(g)
            }
            AdversaryPolicy::RandomConnected { edge_probability } => {
                let p = edge_probability.clone();
                Ok(random_connected(self.n, &p, &mut self.rng))
            }
        }
    }
}

fn positions(order: &[NodeId]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    pos
}

/// Nodes sorted by ascending load, ties by id.
pub fn ascending_order(loads: &LoadState) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = (0..loads.len()).collect();
    order.sort_by(|&a, &b| loads.load(a).cmp(loads.load(b)).then(a.cmp(&b)));
    order
}

/// Nodes sorted by descending load, ties by ascending id.
pub fn descending_order(loads: &LoadState) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = (0..loads.len()).collect();
    order.sort_by(|&a, &b| loads.load(b).cmp(loads.load(a)).then(a.cmp(&b)));
    order
}

/// Reorders each connected pair of the line so that the lighter node (by
/// `loads`, the post-round loads) sits at the lower position. Pairs must be
/// adjacent in `line`; all other positions are left alone.
pub fn sorting_line_postprocess(
    line: &[NodeId],
    loads: &LoadState,
    last_matching: &[Connection],
) -> Result<Vec<NodeId>, AdversaryError> {
    let pos = positions(line);
    for c in last_matching {
        let (pu, pv) = (pos[c.proposer], pos[c.acceptor]);
        if pu.abs_diff(pv) != 1 {
            return Err(AdversaryError::NotAdjacent(c.proposer, c.acceptor, pu, pv));
        }
    }
    Ok(order_pairs(line.to_vec(), loads, last_matching))
}

fn order_pairs(mut order: Vec<NodeId>, loads: &LoadState, pairs: &[Connection]) -> Vec<NodeId> {
    let mut pos = positions(&order);
    for c in pairs {
        let (i, j) = {
            let (a, b) = (pos[c.proposer], pos[c.acceptor]);
            (a.min(b), a.max(b))
        };
        if loads.load(order[i]) > loads.load(order[j]) {
            order.swap(i, j);
            pos[order[i]] = i;
            pos[order[j]] = j;
        }
    }
    order
}

/// Uniform spanning tree of `K_n` (Aldous-Broder random walk).
pub fn uniform_spanning_tree(n: usize, rng: &mut SimRng) -> Graph {
    if n <= 1 {
        return Graph::empty(n);
    }
    let mut visited = vec![false; n];
    let mut cur = rng.random_range(0..n);
    visited[cur] = true;
    let mut remaining = n - 1;
    let mut edges = std::collections::BTreeSet::new();
    while remaining > 0 {
        // Step to a uniform other vertex.
        let mut next = rng.random_range(0..n - 1);
        if next >= cur {
            next += 1;
        }
        if !visited[next] {
            visited[next] = true;
            remaining -= 1;
            edges.extend(Edge::new(cur, next));
        }
        cur = next;
    }
    Graph::from_edge_set(n, edges)
}

fn bernoulli(p: &ExactDecimal, rng: &mut SimRng) -> bool {
    let (num, den) = p.fraction();
    if p.floor() >= num_bigint::BigInt::from(1) {
        return true;
    }
    match (num_traits::ToPrimitive::to_u128(&num), num_traits::ToPrimitive::to_u128(&den)) {
        (Some(a), Some(b)) => rng.random_range(0..b) < a,
        _ => rng.random_bool(p.to_f64().clamp(0.0, 1.0)),
    }
}

/// Spanning tree plus independent extra edges; connected by construction.
pub fn random_connected(n: usize, edge_probability: &ExactDecimal, rng: &mut SimRng) -> Graph {
    let tree = uniform_spanning_tree(n, rng);
    if edge_probability.is_zero() {
        return tree;
    }
    let mut edges = tree.edge_set().clone();
    for i in 0..crate::graph::potential_edges(n) {
        let e = Edge::from_index(i, n);
        if !edges.contains(&e) && bernoulli(edge_probability, rng) {
            edges.insert(e);
        }
    }
    Graph::from_edge_set(n, edges)
}
