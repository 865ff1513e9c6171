//! Randomized max-neighbor balancing: every node flips a fair coin to be a
//! sender or a receiver for the round.

use rand::Rng;

use super::{
    best_proposer, check_sizes, group_proposals, integral_split, max_gap_neighbor, Connection, Phase, Protocol,
    ProtocolError, RoundOutcome, Step,
};
use crate::dyadic::Dyadic;
use crate::graph::{Graph, NodeId};
use crate::load::{LoadMode, LoadState};
use crate::rng::SimRng;

/// One round with explicit roles: `senders[v]` is true if `v` sends.
pub fn rand_round_with_roles(loads: &LoadState, graph: &Graph, senders: &[bool]) -> (LoadState, RoundOutcome) {
    let n = loads.len();
    let w = loads.loads();

    // Targets range over all neighbors; a proposal to a sender goes unanswered.
    let proposals: Vec<(NodeId, NodeId)> = (0..n)
        .filter(|&u| senders[u])
        .filter_map(|u| max_gap_neighbor(u, graph, w).map(|(v, _)| (u, v)))
        .collect();
    let incoming = group_proposals(n, &proposals);

    let mut next: Vec<Dyadic> = w.to_vec();
    let mut connections = Vec::new();
    let mut transfers = Vec::new();
    for (v, from) in incoming.iter().enumerate() {
        if senders[v] {
            continue;
        }
        let Some((u, gap)) = best_proposer(v, from, w) else {
            continue;
        };
        let (nu, nv) = match loads.mode() {
            LoadMode::Continuous => {
                let avg = Dyadic::half_sum(&w[u], &w[v]);
                (avg.clone(), avg)
            }
            LoadMode::Integral => {
                let a = w[u].to_integer().expect("integral load");
                let b = w[v].to_integer().expect("integral load");
                let (x, y) = integral_split(&a, &b);
                (Dyadic::from(x), Dyadic::from(y))
            }
        };
        transfers.push(Dyadic::abs_diff(&w[u], &nu));
        next[u] = nu;
        next[v] = nv;
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
    (LoadState::new_unchecked(loads.mode(), next), outcome)
}

/// One round; coins are drawn in node-id order from `rng`.
pub fn rand_max_neighbor_round(
    loads: &LoadState,
    graph: &Graph,
    rng: &mut SimRng,
) -> Result<(LoadState, RoundOutcome), ProtocolError> {
    check_sizes(loads, graph)?;
    let senders: Vec<bool> = (0..loads.len()).map(|_| rng.random_bool(0.5)).collect();
    Ok(rand_round_with_roles(loads, graph, &senders))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandMaxNeighbor;

impl Protocol for RandMaxNeighbor {
    fn name(&self) -> &'static str {
        "randomized"
    }

    fn step(&mut self, loads: &LoadState, graph: &Graph, rng: &mut SimRng) -> Result<Step, ProtocolError> {
        let (loads, outcome) = rand_max_neighbor_round(loads, graph, rng)?;
        Ok(Step { loads, outcome })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn d(v: i64) -> Dyadic {
        Dyadic::from(v)
    }

    #[test]
    fn both_send_no_connection() {
        let s = LoadState::integral([3, 8]);
        let (next, out) = rand_round_with_roles(&s, &Graph::path(2), &[true, true]);
        assert!(out.connections.is_empty());
        assert_eq!(next, s);
    }

    #[test]
    fn continuous_half_sum() {
        let s = LoadState::continuous(vec![d(3), d(8)]).unwrap();
        let (next, out) = rand_round_with_roles(&s, &Graph::path(2), &[true, false]);
        assert_eq!(next.loads(), &[Dyadic::new(11, 1), Dyadic::new(11, 1)]);
        assert_eq!(out.connections, vec![Connection { proposer: 0, acceptor: 1, gap: d(5) }]);
    }

    #[test]
    fn integral_gap_one_is_stuck() {
        let s = LoadState::integral([2, 3]);
        let (next, out) = rand_round_with_roles(&s, &Graph::path(2), &[true, false]);
        assert_eq!(out.connections.len(), 1);
        assert_eq!(next.loads(), &[d(2), d(3)]);
    }

    #[test]
    fn integral_lighter_gets_floor() {
        let s = LoadState::integral([9, 2]);
        let (next, _) = rand_round_with_roles(&s, &Graph::path(2), &[false, true]);
        assert_eq!(next.loads(), &[d(6), d(5)]);
    }

    #[test]
    fn each_node_in_at_most_one_connection() {
        let s = LoadState::integral([0, 10, 0, 10, 0, 10]);
        let mut rng = stream(3, Stream::Algorithm);
        for _ in 0..50 {
            let (_, out) = rand_max_neighbor_round(&s, &Graph::complete(6), &mut rng).unwrap();
            let mut seen = [0; 6];
            for c in &out.connections {
                seen[c.proposer] += 1;
                seen[c.acceptor] += 1;
            }
            assert!(seen.iter().all(|&x| x <= 1));
        }
    }
}
