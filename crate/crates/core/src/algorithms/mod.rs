//! Balancing protocols.
//!
//! Single-round operations are plain functions of `(state, graph)`; the
//! [`Protocol`] implementations wrap them into round-by-round drivers with
//! their own phase bookkeeping and budgets.

pub mod budget;
pub mod continuous;
pub mod deterministic;
pub mod gap_reduce;
pub mod gapless;
pub mod randomized;

use num_bigint::BigInt;
use thiserror::Error;

use crate::dyadic::{integral_half_sum, Dyadic};
use crate::graph::{Graph, NodeId};
use crate::load::{Halves, LoadState};
use crate::rng::SimRng;

pub use continuous::ContinuousViaIntegral;
pub use deterministic::{det_interactive_round, det_internal_round, DetState, Deterministic};
pub use gap_reduce::{flood_min_max_round, gap_reduce_round, Extremes, GapReduce, SmoothedBalance};
pub use gapless::{gapless_round, psi_schedule, GaplessBalance, GaplessGapReduce};
pub use randomized::{rand_max_neighbor_round, RandMaxNeighbor};

/// A connection realized in a round: `proposer` proposed and `acceptor`
/// accepted. `gap` is `|w(proposer) - w(acceptor)|` on the pre-round loads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    pub proposer: NodeId,
    pub acceptor: NodeId,
    pub gap: Dyadic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Balancing,
    Flooding,
    /// Idle round of a driver whose schedule is exhausted.
    Idle,
}

/// Light/heavy thresholds fixed for one GapReduce call, as integers scaled
/// by 4: light iff `4w < light_bound4`, heavy iff `4w > heavy_bound4`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassBounds {
    pub min: BigInt,
    pub max: BigInt,
    pub light_bound4: BigInt,
    pub heavy_bound4: BigInt,
}

impl ClassBounds {
    pub fn from_extremes(min: &BigInt, max: &BigInt) -> ClassBounds {
        let psi = max - min;
        ClassBounds {
            min: min.clone(),
            max: max.clone(),
            light_bound4: min * 4 + &psi,
            heavy_bound4: max * 4 - &psi,
        }
    }

    pub fn psi(&self) -> BigInt {
        &self.max - &self.min
    }

    pub fn is_light(&self, w: &BigInt) -> bool {
        w * 4 < self.light_bound4
    }

    pub fn is_heavy(&self, w: &BigInt) -> bool {
        w * 4 > self.heavy_bound4
    }

    pub fn is_balanced(&self, w: &BigInt) -> bool {
        !self.is_light(w) && !self.is_heavy(w)
    }
}

/// What one round of a protocol did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    pub phase: Phase,
    /// `(proposer, target)` for every proposal sent.
    pub proposals: Vec<(NodeId, NodeId)>,
    pub connections: Vec<Connection>,
    /// Load moved from the heavier to the lighter side, per connection.
    pub transfers: Vec<Dyadic>,
    /// Set on GapReduce main-loop rounds.
    pub class_bounds: Option<ClassBounds>,
    /// Set on the round that completes a flooding phase: whether every
    /// node's knowledge equals the true extremes.
    pub flood_verified: Option<bool>,
}

impl RoundOutcome {
    pub fn idle(phase: Phase) -> RoundOutcome {
        RoundOutcome {
            phase,
            proposals: Vec::new(),
            connections: Vec::new(),
            transfers: Vec::new(),
            class_bounds: None,
            flood_verified: None,
        }
    }
}

/// Which per-node connection budget a protocol promises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionBudget {
    /// At most one connection per node in total.
    Matching,
    /// At most one connection as proposer and one as acceptor.
    SenderAnswerer,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("{0} requires integral loads")]
    NeedsIntegral(&'static str),
    #[error("{0} requires continuous loads")]
    NeedsContinuous(&'static str),
    #[error("load state has {got} nodes, graph has {expected}")]
    SizeMismatch { got: usize, expected: usize },
}

/// The load state after a round together with what happened in it.
#[derive(Debug, Clone)]
pub struct Step {
    pub loads: LoadState,
    pub outcome: RoundOutcome,
}

/// Counters a driver reports at the end of a trial.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProtocolSummary {
    /// GapReduce (or gapless) calls started.
    pub calls: u64,
    /// Calls that reached their main loop.
    pub main_loops: u64,
    pub flooding_rounds: u64,
    /// Gap values `ψ` seen at the start of each call's main loop.
    pub psi_values: Vec<BigInt>,
}

/// A round-by-round balancing driver.
pub trait Protocol: Send {
    fn name(&self) -> &'static str;

    fn connection_budget(&self) -> ConnectionBudget {
        ConnectionBudget::Matching
    }

    /// One synchronous round on `graph`, reading only the pre-round loads.
    fn step(&mut self, loads: &LoadState, graph: &Graph, rng: &mut SimRng) -> Result<Step, ProtocolError>;

    /// Whether the driver's own schedule is exhausted.
    fn is_finished(&self) -> bool {
        false
    }

    /// Number of upcoming rounds that provably move no load, whatever the
    /// graphs. The engine may skip them in one go.
    fn idle_rounds(&self, _loads: &LoadState) -> u64 {
        0
    }

    /// Advance internal counters past `rounds` idle rounds.
    fn skip(&mut self, _rounds: u64) {}

    /// Sender/answerer halves to publish alongside the loads, if any.
    fn halves(&self) -> Option<Vec<Halves>> {
        None
    }

    fn summary(&self) -> ProtocolSummary {
        ProtocolSummary::default()
    }
}

/// Neighbor of `u` maximizing `|w(v) - w(u)|`, ties to the smallest id.
/// `None` if every neighbor has gap zero.
pub(crate) fn max_gap_neighbor(u: NodeId, graph: &Graph, loads: &[Dyadic]) -> Option<(NodeId, Dyadic)> {
    let mut best: Option<(NodeId, Dyadic)> = None;
    for &v in graph.neighbors(u) {
        let gap = Dyadic::abs_diff(&loads[v], &loads[u]);
        if gap.is_zero() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, g)| gap > *g) {
            best = Some((v, gap));
        }
    }
    best
}

/// Proposer with maximum gap to `acceptor`, ties to the smallest id.
pub(crate) fn best_proposer(acceptor: NodeId, proposers: &[NodeId], loads: &[Dyadic]) -> Option<(NodeId, Dyadic)> {
    let mut best: Option<(NodeId, Dyadic)> = None;
    for &u in proposers {
        let gap = Dyadic::abs_diff(&loads[u], &loads[acceptor]);
        let better = match &best {
            None => true,
            Some((b, g)) => gap > *g || (gap == *g && u < *b),
        };
        if better {
            best = Some((u, gap));
        }
    }
    best
}

/// Integral pairwise split: the lighter node gets the floor of the average.
pub(crate) fn integral_split(a: &BigInt, b: &BigInt) -> (BigInt, BigInt) {
    let (low, high) = integral_half_sum(a, b);
    if a <= b {
        (low, high)
    } else {
        (high, low)
    }
}

pub(crate) fn check_sizes(loads: &LoadState, graph: &Graph) -> Result<(), ProtocolError> {
    if loads.len() != graph.node_count() {
        return Err(ProtocolError::SizeMismatch { got: loads.len(), expected: graph.node_count() });
    }
    Ok(())
}

/// Incoming proposals grouped by target.
pub(crate) fn group_proposals(n: usize, proposals: &[(NodeId, NodeId)]) -> Vec<Vec<NodeId>> {
    let mut incoming = vec![Vec::new(); n];
    for &(u, v) in proposals {
        incoming[v].push(u);
    }
    incoming
}
