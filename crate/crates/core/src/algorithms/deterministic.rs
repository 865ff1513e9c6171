//! Deterministic max-neighbor balancing with split nodes.
//!
//! Every node `v` acts as a sender half `v_s` and an answerer half `v_a`,
//! each holding `w(v)/2` at the start of a round. Interactive phase: every
//! `u_s` proposes to the neighbor with the largest load difference, every
//! `v_a` accepts the largest-difference proposal, and each accepted pair
//! `(u_s, v_a)` averages its two halves. Internal phase: each node evens
//! out its own halves again.

use super::{
    best_proposer, check_sizes, group_proposals, max_gap_neighbor, Connection, ConnectionBudget, Phase, Protocol,
    ProtocolError, RoundOutcome, Step,
};
use crate::dyadic::Dyadic;
use crate::graph::Graph;
use crate::load::{Halves, LoadMode, LoadState};
use crate::rng::SimRng;

pub type DetState = Vec<Halves>;

pub fn det_state_from_loads(loads: &LoadState) -> DetState {
    loads.loads().iter().map(Halves::even).collect()
}

/// Interactive balancing over the sender/answerer bipartite split of `graph`.
pub fn det_interactive_round(state: &[Halves], graph: &Graph) -> (DetState, RoundOutcome) {
    let n = state.len();
    let real: Vec<Dyadic> = state.iter().map(Halves::total).collect();

    let proposals: Vec<(usize, usize)> = (0..n)
        .filter_map(|u| max_gap_neighbor(u, graph, &real).map(|(v, _)| (u, v)))
        .collect();
    let incoming = group_proposals(n, &proposals);

    let mut next: DetState = state.to_vec();
    let mut connections = Vec::new();
    let mut transfers = Vec::new();
    for (v, from) in incoming.iter().enumerate() {
        let Some((u, gap)) = best_proposer(v, from, &real) else {
            continue;
        };
        // u_s and v_a each take part in at most this one pair.
        let sender = &state[u].sender;
        let answerer = &state[v].answerer;
        let avg = Dyadic::half_sum(sender, answerer);
        transfers.push(Dyadic::abs_diff(sender, answerer).half());
        next[u].sender = avg.clone();
        next[v].answerer = avg;
        connections.push(Connection { proposer: u, acceptor: v, gap });
    }

    let outcome = RoundOutcome {
        phase: Phase::Balancing,
        proposals,
        connections,
        transfers,
        class_bounds: None,
        flood_verified: None,
    };
    (next, outcome)
}

/// Balances every node's halves over the perfect matching `(v_s, v_a)`.
pub fn det_internal_round(state: &[Halves]) -> DetState {
    state.iter().map(|h| Halves::even(&h.total())).collect()
}

/// Round driver for the deterministic algorithm.
#[derive(Debug, Clone, Default)]
pub struct Deterministic {
    halves: Option<DetState>,
}

impl Deterministic {
    pub fn new() -> Deterministic {
        Deterministic::default()
    }
}

impl Protocol for Deterministic {
    fn name(&self) -> &'static str {
        "deterministic"
    }

    fn connection_budget(&self) -> ConnectionBudget {
        ConnectionBudget::SenderAnswerer
    }

    fn step(&mut self, loads: &LoadState, graph: &Graph, _rng: &mut SimRng) -> Result<Step, ProtocolError> {
        check_sizes(loads, graph)?;
        if loads.mode() != LoadMode::Continuous {
            return Err(ProtocolError::NeedsContinuous("deterministic"));
        }
        let start = match self.halves.take() {
            Some(h) if h.iter().zip(loads.loads()).all(|(h, w)| &h.total() == w) => h,
            _ => det_state_from_loads(loads),
        };
        let (mid, outcome) = det_interactive_round(&start, graph);
        let end = det_internal_round(&mid);
        let totals = end.iter().map(Halves::total).collect();
        let next = LoadState::new_unchecked(LoadMode::Continuous, totals)
            .with_split(end.clone())
            .expect("halves sum to loads");
        self.halves = Some(end);
        Ok(Step { loads: next, outcome })
    }

    fn idle_rounds(&self, loads: &LoadState) -> u64 {
        let all_equal = loads.loads().windows(2).all(|w| w[0] == w[1]);
        if all_equal {
            u64::MAX
        } else {
            0
        }
    }

    fn halves(&self) -> Option<Vec<Halves>> {
        self.halves.clone()
    }
}
