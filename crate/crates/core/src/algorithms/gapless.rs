//! Flooding-free GapReduce: a call is parameterized by a guess `ψ` and every
//! node balances with its heaviest neighbor when that neighbor is at least
//! `ψ/2` heavier. [`GaplessBalance`] walks `ψ` down geometrically from `T`.

use num_bigint::BigInt;
use num_integer::Integer;

use super::gap_reduce::{argmax_load, argmin_load};
use super::{
    check_sizes, group_proposals, integral_split, Connection, Phase, Protocol, ProtocolError, ProtocolSummary,
    RoundOutcome, Step,
};
use crate::dyadic::Dyadic;
use crate::graph::{Graph, NodeId};
use crate::load::{LoadMode, LoadState};
use crate::rng::SimRng;

/// Whether `u` at load `lo` may propose to a neighbor at load `hi`:
/// `hi ≥ lo + ψ/2`, and the pair can actually move a unit.
pub fn gapless_wants(lo: &BigInt, hi: &BigInt, psi: &BigInt) -> bool {
    let gap = hi - lo;
    gap >= BigInt::from(2) && &gap * 2 >= *psi
}

/// One round of the gapless call with parameter `psi`.
///
/// A node that sent a proposal does not accept any, which keeps the
/// connections a matching.
pub fn gapless_round(loads: &[BigInt], graph: &Graph, psi: &BigInt) -> (Vec<BigInt>, RoundOutcome) {
    let n = loads.len();
    let mut proposals: Vec<(NodeId, NodeId)> = Vec::new();
    let mut sent = vec![false; n];
    for u in 0..n {
        if let Some(v) = argmax_load(graph.neighbors(u), loads) {
            if gapless_wants(&loads[u], &loads[v], psi) {
                proposals.push((u, v));
                sent[u] = true;
            }
        }
    }
    let incoming = group_proposals(n, &proposals);

    let mut next = loads.to_vec();
    let mut connections = Vec::new();
    let mut transfers = Vec::new();
    for (v, from) in incoming.iter().enumerate() {
        if sent[v] {
            continue;
        }
        let Some(u) = argmin_load(from, loads) else {
            continue;
        };
        let (nu, nv) = integral_split(&loads[u], &loads[v]);
        transfers.push(Dyadic::from(&nu - &loads[u]));
        connections.push(Connection { proposer: u, acceptor: v, gap: Dyadic::from(&loads[v] - &loads[u]) });
        next[u] = nu;
        next[v] = nv;
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

/// `T, ψ₁, ψ₂, …` with `ψ_{i+1} = min(⌈3ψ_i/4⌉, ψ_i − 1)`, ending with the
/// first value `≤ ⌈4τ/3⌉`. Empty when `T ≤ τ`.
pub fn psi_schedule(total: &BigInt, tau: &BigInt) -> Vec<BigInt> {
    let mut out = Vec::new();
    if total <= tau {
        return out;
    }
    let stop = Integer::div_ceil(&(tau * 4u32), &BigInt::from(3));
    let mut psi = total.clone();
    loop {
        out.push(psi.clone());
        if psi <= stop || psi <= BigInt::from(1) {
            break;
        }
        let shrunk = Integer::div_ceil(&(&psi * 3u32), &BigInt::from(4));
        psi = shrunk.min(&psi - 1);
    }
    out
}

/// A single gapless call: `rounds` rounds at a fixed `psi`.
#[derive(Debug, Clone)]
pub struct GaplessGapReduce {
    psi: BigInt,
    remaining: u64,
}

impl GaplessGapReduce {
    pub fn new(psi: BigInt, rounds: u64) -> GaplessGapReduce {
        GaplessGapReduce { psi, remaining: rounds }
    }

    pub fn psi(&self) -> &BigInt {
        &self.psi
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }
}

impl Protocol for GaplessGapReduce {
    fn name(&self) -> &'static str {
        "gaplessGapReduce"
    }

    fn step(&mut self, loads: &LoadState, graph: &Graph, _rng: &mut SimRng) -> Result<Step, ProtocolError> {
        check_sizes(loads, graph)?;
        if loads.mode() != LoadMode::Integral {
            return Err(ProtocolError::NeedsIntegral("gaplessGapReduce"));
        }
        if self.remaining == 0 {
            return Ok(Step { loads: loads.clone(), outcome: RoundOutcome::idle(Phase::Idle) });
        }
        let (next, outcome) = gapless_round(&loads.integers(), graph, &self.psi);
        self.remaining -= 1;
        let loads = LoadState::new_unchecked(LoadMode::Integral, next.into_iter().map(Dyadic::from).collect());
        Ok(Step { loads, outcome })
    }

    fn is_finished(&self) -> bool {
        self.remaining == 0
    }

    fn idle_rounds(&self, loads: &LoadState) -> u64 {
        if self.remaining == 0 {
            return u64::MAX;
        }
        let (lo, hi) = extremes(&loads.integers());
        if gapless_wants(&lo, &hi, &self.psi) {
            0
        } else {
            self.remaining
        }
    }

    fn skip(&mut self, rounds: u64) {
        self.remaining -= rounds.min(self.remaining);
    }
}

fn extremes(w: &[BigInt]) -> (BigInt, BigInt) {
    let lo = w.iter().min().cloned().unwrap_or_default();
    let hi = w.iter().max().cloned().unwrap_or_default();
    (lo, hi)
}

/// Gapless calls along [`psi_schedule`], each `rounds_per_call` rounds long.
#[derive(Debug, Clone)]
pub struct GaplessBalance {
    schedule: Vec<BigInt>,
    rounds_per_call: u64,
    index: usize,
    remaining: u64,
    summary: ProtocolSummary,
}

impl GaplessBalance {
    pub fn new(total: &BigInt, tau: &BigInt, rounds_per_call: u64) -> GaplessBalance {
        let schedule = if rounds_per_call == 0 { Vec::new() } else { psi_schedule(total, tau) };
        let mut p = GaplessBalance { schedule, rounds_per_call, index: 0, remaining: 0, summary: ProtocolSummary::default() };
        p.enter_call();
        p
    }

    pub fn schedule(&self) -> &[BigInt] {
        &self.schedule
    }

    fn enter_call(&mut self) {
        if let Some(psi) = self.schedule.get(self.index) {
            self.remaining = self.rounds_per_call;
            self.summary.calls += 1;
            self.summary.main_loops += 1;
            self.summary.psi_values.push(psi.clone());
        }
    }

    fn advance(&mut self, rounds: u64) {
        let mut rounds = rounds;
        while rounds > 0 && self.index < self.schedule.len() {
            let used = rounds.min(self.remaining);
            self.remaining -= used;
            rounds -= used;
            if self.remaining == 0 {
                self.index += 1;
                self.enter_call();
            }
        }
    }
}

impl Protocol for GaplessBalance {
    fn name(&self) -> &'static str {
        "gaplessBalance"
    }

    fn step(&mut self, loads: &LoadState, graph: &Graph, _rng: &mut SimRng) -> Result<Step, ProtocolError> {
        check_sizes(loads, graph)?;
        if loads.mode() != LoadMode::Integral {
            return Err(ProtocolError::NeedsIntegral("gaplessBalance"));
        }
        let Some(psi) = self.schedule.get(self.index).cloned() else {
            return Ok(Step { loads: loads.clone(), outcome: RoundOutcome::idle(Phase::Idle) });
        };
        let (next, outcome) = gapless_round(&loads.integers(), graph, &psi);
        self.advance(1);
        let loads = LoadState::new_unchecked(LoadMode::Integral, next.into_iter().map(Dyadic::from).collect());
        Ok(Step { loads, outcome })
    }

    fn is_finished(&self) -> bool {
        self.index >= self.schedule.len()
    }

    /// Idle rounds span the rest of the current call and every later call
    /// whose threshold the current extremes cannot meet.
    fn idle_rounds(&self, loads: &LoadState) -> u64 {
        if self.is_finished() {
            return u64::MAX;
        }
        let (lo, hi) = extremes(&loads.integers());
        let mut idle = 0u64;
        let mut remaining = self.remaining;
        for psi in &self.schedule[self.index..] {
            if gapless_wants(&lo, &hi, psi) {
                return idle;
            }
            idle = idle.saturating_add(remaining);
            remaining = self.rounds_per_call;
        }
        u64::MAX
    }

    fn skip(&mut self, rounds: u64) {
        self.advance(rounds);
    }

    fn summary(&self) -> ProtocolSummary {
        self.summary.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn inclusive_threshold() {
        let (next, out) = gapless_round(&ints(&[0, 4]), &Graph::path(2), &BigInt::from(8));
        assert_eq!(out.proposals, vec![(0, 1)]);
        assert_eq!(next, ints(&[2, 2]));
    }

    #[test]
    fn small_gaps_send_nothing() {
        let (next, out) = gapless_round(&ints(&[0, 3, 5]), &Graph::complete(3), &BigInt::from(12));
        assert!(out.proposals.is_empty());
        assert_eq!(next, ints(&[0, 3, 5]));
    }

    #[test]
    fn balanced_heavy_pair_connects() {
        // Extremes 0 and 16; nodes 2 (balanced at 8) and 3 (heavy at 16).
        let (next, out) = gapless_round(&ints(&[0, 0, 8, 16]), &Graph::path(4), &BigInt::from(16));
        assert!(out.connections.iter().any(|c| c.proposer == 2 && c.acceptor == 3));
        assert_eq!(next[2..], ints(&[12, 12])[..]);
    }

    #[test]
    fn proposers_do_not_accept() {
        // 0 proposes to 1, 1 proposes to 2; node 1 ignores 0.
        let (next, out) = gapless_round(&ints(&[0, 5, 10]), &Graph::path(3), &BigInt::from(8));
        assert_eq!(out.connections.len(), 1);
        assert_eq!(out.connections[0].proposer, 1);
        assert_eq!(next, ints(&[0, 7, 8]));
    }

    #[test]
    fn schedule_example() {
        let s = psi_schedule(&16.into(), &1.into());
        assert_eq!(s, ints(&[16, 12, 9, 7, 6, 5, 4, 3, 2]));
        assert!(psi_schedule(&1.into(), &1.into()).is_empty());
        let s = psi_schedule(&100.into(), &10.into());
        assert_eq!(s.last(), Some(&BigInt::from(12)));
        assert_eq!(s[s.len() - 2], BigInt::from(15));
    }

    #[test]
    fn converged_input_moves_nothing() {
        let mut p = GaplessBalance::new(&BigInt::from(12), &BigInt::from(1), 5);
        let loads = LoadState::integral([4, 3, 1]);
        let mut rng = stream(0, Stream::Algorithm);
        let step = p.step(&LoadState::integral([4, 4, 4]), &Graph::path(3), &mut rng).unwrap();
        assert!(step.outcome.connections.is_empty());
        // Schedule 12, 9, 7, 6, ...: a gap of 3 first qualifies at ψ = 6.
        assert_eq!(p.idle_rounds(&loads), 4 + 5 + 5);
    }
}
