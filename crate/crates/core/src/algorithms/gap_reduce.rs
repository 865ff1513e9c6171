//! GapReduce: flood the global extremes, then let light nodes balance with
//! heavy neighbors for a fixed number of rounds. [`SmoothedBalance`] chains
//! calls until the network is `τ`-converged.

use num_bigint::BigInt;

use super::{
    check_sizes, group_proposals, integral_split, ClassBounds, Connection, Phase, Protocol, ProtocolError,
    ProtocolSummary, RoundOutcome, Step,
};
use crate::dyadic::Dyadic;
use crate::graph::{Graph, NodeId};
use crate::load::{LoadMode, LoadState};
use crate::rng::SimRng;

/// Smallest and largest load a node has heard of.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extremes {
    pub min: BigInt,
    pub max: BigInt,
}

impl Extremes {
    pub fn own(w: &BigInt) -> Extremes {
        Extremes { min: w.clone(), max: w.clone() }
    }
}

/// Every node takes the extremes over itself and its current neighbors.
pub fn flood_min_max_round(tables: &[Extremes], graph: &Graph) -> Vec<Extremes> {
    (0..tables.len())
        .map(|u| {
            let mut e = tables[u].clone();
            for &v in graph.neighbors(u) {
                if tables[v].min < e.min {
                    e.min = tables[v].min.clone();
                }
                if tables[v].max > e.max {
                    e.max = tables[v].max.clone();
                }
            }
            e
        })
        .collect()
}

/// One main-loop round with fixed thresholds `bounds`.
///
/// Returns the new integer loads and the realized connections.
pub fn gap_reduce_round(loads: &[BigInt], graph: &Graph, bounds: &ClassBounds) -> (Vec<BigInt>, RoundOutcome) {
    let n = loads.len();
    let mut proposals = Vec::new();
    for u in 0..n {
        if !bounds.is_light(&loads[u]) {
            continue;
        }
        if let Some(v) = argmax_load(graph.neighbors(u), loads) {
            if bounds.is_heavy(&loads[v]) {
                proposals.push((u, v));
            }
        }
    }
    let incoming = group_proposals(n, &proposals);

    let mut next = loads.to_vec();
    let mut connections = Vec::new();
    let mut transfers = Vec::new();
    for (v, from) in incoming.iter().enumerate() {
        // Only heavy nodes are ever proposed to.
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
        class_bounds: Some(bounds.clone()),
        flood_verified: None,
    };
    (next, outcome)
}

/// Neighbor with the largest load, ties to the smallest id.
pub(crate) fn argmax_load(candidates: &[NodeId], loads: &[BigInt]) -> Option<NodeId> {
    let mut best: Option<NodeId> = None;
    for &v in candidates {
        match best {
            Some(b) if loads[v] < loads[b] || (loads[v] == loads[b] && v > b) => {}
            _ => best = Some(v),
        }
    }
    best
}

/// Candidate with the smallest load, ties to the smallest id.
pub(crate) fn argmin_load(candidates: &[NodeId], loads: &[BigInt]) -> Option<NodeId> {
    let mut best: Option<NodeId> = None;
    for &v in candidates {
        match best {
            Some(b) if loads[v] > loads[b] || (loads[v] == loads[b] && v > b) => {}
            _ => best = Some(v),
        }
    }
    best
}

#[derive(Debug, Clone)]
enum CallPhase {
    Flooding { done: u64, tables: Option<Vec<Extremes>> },
    Main { bounds: ClassBounds, remaining: u64 },
    Done,
}

/// A single GapReduce call: `n` flooding rounds, then `main_rounds` rounds
/// of light-to-heavy balancing. Calls with `ψ < 2` end after flooding.
#[derive(Debug, Clone)]
pub struct GapReduce {
    n: usize,
    main_rounds: u64,
    phase: CallPhase,
    flooded: Option<ClassBounds>,
    flooding_rounds: u64,
}

impl GapReduce {
    pub fn new(n: usize, main_rounds: u64) -> GapReduce {
        GapReduce {
            n,
            main_rounds,
            phase: CallPhase::Flooding { done: 0, tables: None },
            flooded: None,
            flooding_rounds: 0,
        }
    }

    /// Extremes learned by flooding, once flooding is over.
    pub fn flooded_bounds(&self) -> Option<&ClassBounds> {
        self.flooded.as_ref()
    }

    pub fn reached_main_loop(&self) -> bool {
        self.flooded.as_ref().is_some_and(|b| b.psi() >= BigInt::from(2))
    }

    pub fn is_done(&self) -> bool {
        matches!(self.phase, CallPhase::Done)
    }

    /// Ends the call right away; used by drivers once flooding shows the
    /// target gap is met.
    pub fn abort(&mut self) {
        self.phase = CallPhase::Done;
    }

    fn step_integers(&mut self, w: &[BigInt], graph: &Graph) -> (Vec<BigInt>, RoundOutcome) {
        match &mut self.phase {
            CallPhase::Flooding { done, tables } => {
                let current = tables.take().unwrap_or_else(|| w.iter().map(Extremes::own).collect());
                let next = flood_min_max_round(&current, graph);
                *done += 1;
                self.flooding_rounds += 1;
                let mut outcome = RoundOutcome::idle(Phase::Flooding);
                if *done >= self.n as u64 {
                    let truth = Extremes {
                        min: w.iter().min().cloned().unwrap_or_default(),
                        max: w.iter().max().cloned().unwrap_or_default(),
                    };
                    outcome.flood_verified = Some(next.iter().all(|e| *e == truth));
                    // The tables agree on connected graphs; node 0 speaks for all.
                    let bounds = ClassBounds::from_extremes(&next[0].min, &next[0].max);
                    self.phase = if bounds.psi() >= BigInt::from(2) && self.main_rounds > 0 {
                        CallPhase::Main { bounds: bounds.clone(), remaining: self.main_rounds }
                    } else {
                        CallPhase::Done
                    };
                    self.flooded = Some(bounds);
                } else {
                    *tables = Some(next);
                }
                (w.to_vec(), outcome)
            }
            CallPhase::Main { bounds, remaining } => {
                let (next, outcome) = gap_reduce_round(w, graph, bounds);
                *remaining -= 1;
                if *remaining == 0 {
                    self.phase = CallPhase::Done;
                }
                (next, outcome)
            }
            CallPhase::Done => (w.to_vec(), RoundOutcome::idle(Phase::Idle)),
        }
    }

    /// Main-loop rounds left in which nothing can move: all of them once
    /// the light set or the heavy set is empty.
    fn idle_rounds_for(&self, w: &[BigInt]) -> u64 {
        match &self.phase {
            CallPhase::Main { bounds, remaining } => {
                let any_light = w.iter().any(|x| bounds.is_light(x));
                let any_heavy = w.iter().any(|x| bounds.is_heavy(x));
                if any_light && any_heavy {
                    0
                } else {
                    *remaining
                }
            }
            _ => 0,
        }
    }

    fn skip_main(&mut self, rounds: u64) {
        if let CallPhase::Main { remaining, .. } = &mut self.phase {
            *remaining -= rounds.min(*remaining);
            if *remaining == 0 {
                self.phase = CallPhase::Done;
            }
        }
    }
}

fn integral_loads(loads: &LoadState, who: &'static str) -> Result<Vec<BigInt>, ProtocolError> {
    if loads.mode() != LoadMode::Integral {
        return Err(ProtocolError::NeedsIntegral(who));
    }
    Ok(loads.integers())
}

fn to_state(w: Vec<BigInt>) -> LoadState {
    LoadState::new_unchecked(LoadMode::Integral, w.into_iter().map(Dyadic::from).collect())
}

/// Repeated GapReduce calls. Stops after `max_calls` calls or as soon as a
/// call's flooding phase finds the gap at most `tau`.
#[derive(Debug, Clone)]
pub struct SmoothedBalance {
    n: usize,
    tau: BigInt,
    main_rounds: u64,
    max_calls: u64,
    current: Option<GapReduce>,
    finished: bool,
    summary: ProtocolSummary,
    flooding_done: u64,
}

impl SmoothedBalance {
    pub fn new(n: usize, tau: BigInt, main_rounds: u64, max_calls: u64) -> SmoothedBalance {
        SmoothedBalance {
            n,
            tau,
            main_rounds,
            max_calls,
            current: None,
            finished: max_calls == 0,
            summary: ProtocolSummary::default(),
            flooding_done: 0,
        }
    }

    /// A lone call with no early exit: the single-call experiment.
    pub fn single_call(n: usize, main_rounds: u64) -> SmoothedBalance {
        SmoothedBalance::new(n, BigInt::from(-1), main_rounds, 1)
    }

    pub fn max_calls(&self) -> u64 {
        self.max_calls
    }

    /// Bookkeeping after the current call advanced.
    fn settle(&mut self) {
        let Some(call) = self.current.as_mut() else {
            return;
        };
        if call.flooding_rounds > self.flooding_done {
            self.summary.flooding_rounds += call.flooding_rounds - self.flooding_done;
            self.flooding_done = call.flooding_rounds;
        }
        if let Some(b) = call.flooded_bounds() {
            let psi = b.psi();
            if self.summary.psi_values.len() < self.summary.calls as usize {
                if psi <= self.tau {
                    call.abort();
                    self.finished = true;
                } else if call.reached_main_loop() {
                    self.summary.main_loops += 1;
                }
                self.summary.psi_values.push(psi);
            }
        }
        if call.is_done() {
            self.current = None;
            self.flooding_done = 0;
            if self.summary.calls >= self.max_calls {
                self.finished = true;
            }
        }
    }
}

impl Protocol for SmoothedBalance {
    fn name(&self) -> &'static str {
        "smoothedBalance"
    }

    fn step(&mut self, loads: &LoadState, graph: &Graph, _rng: &mut SimRng) -> Result<Step, ProtocolError> {
        check_sizes(loads, graph)?;
        let w = integral_loads(loads, "smoothedBalance")?;
        if self.finished {
            return Ok(Step { loads: loads.clone(), outcome: RoundOutcome::idle(Phase::Idle) });
        }
        if self.current.is_none() {
            self.current = Some(GapReduce::new(self.n, self.main_rounds));
            self.summary.calls += 1;
        }
        let call = self.current.as_mut().expect("call in progress");
        let (next, outcome) = call.step_integers(&w, graph);
        self.settle();
        Ok(Step { loads: to_state(next), outcome })
    }

    fn is_finished(&self) -> bool {
        self.finished
    }

    fn idle_rounds(&self, loads: &LoadState) -> u64 {
        if self.finished {
            return u64::MAX;
        }
        match &self.current {
            Some(call) if loads.mode() == LoadMode::Integral => call.idle_rounds_for(&loads.integers()),
            _ => 0,
        }
    }

    fn skip(&mut self, rounds: u64) {
        if self.finished {
            return;
        }
        if let Some(call) = self.current.as_mut() {
            call.skip_main(rounds);
        }
        self.settle();
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
    fn flooding_on_line() {
        let g = Graph::path(3);
        let t0: Vec<Extremes> = ints(&[7, 2, 9]).iter().map(Extremes::own).collect();
        let t1 = flood_min_max_round(&t0, &g);
        assert_eq!(t1[1], Extremes { min: 2.into(), max: 9.into() });
        assert_eq!(t1[0], Extremes { min: 2.into(), max: 7.into() });
        let t2 = flood_min_max_round(&t1, &g);
        assert!(t2.iter().all(|e| *e == Extremes { min: 2.into(), max: 9.into() }));
    }

    #[test]
    fn flooding_complete_graph_one_round() {
        let t0: Vec<Extremes> = ints(&[5, 1, 8, 3]).iter().map(Extremes::own).collect();
        let t1 = flood_min_max_round(&t0, &Graph::complete(4));
        assert!(t1.iter().all(|e| *e == Extremes { min: 1.into(), max: 8.into() }));
    }

    #[test]
    fn light_heavy_pair_becomes_balanced() {
        let b = ClassBounds::from_extremes(&0.into(), &8.into());
        let (next, out) = gap_reduce_round(&ints(&[0, 8]), &Graph::path(2), &b);
        assert_eq!(next, ints(&[4, 4]));
        assert_eq!(out.connections.len(), 1);
        assert!(next.iter().all(|w| b.is_balanced(w)));
    }

    #[test]
    fn small_psi_cases() {
        let b = ClassBounds::from_extremes(&10.into(), &13.into());
        let (next, _) = gap_reduce_round(&ints(&[10, 13]), &Graph::path(2), &b);
        assert_eq!(next, ints(&[11, 12]));
        let b = ClassBounds::from_extremes(&10.into(), &12.into());
        let (next, _) = gap_reduce_round(&ints(&[10, 12]), &Graph::path(2), &b);
        assert_eq!(next, ints(&[11, 11]));
    }

    #[test]
    fn light_node_skips_non_heavy_heaviest_neighbor() {
        // Node 0 is light; its heaviest neighbor 1 is balanced, so no proposal
        // even though heavy node 2 is two hops away.
        let b = ClassBounds::from_extremes(&0.into(), &8.into());
        let (next, out) = gap_reduce_round(&ints(&[0, 4, 8]), &Graph::path(3), &b);
        assert!(out.proposals.is_empty());
        assert_eq!(next, ints(&[0, 4, 8]));
    }

    #[test]
    fn heavy_accepts_lightest_proposer() {
        let b = ClassBounds::from_extremes(&0.into(), &16.into());
        // Star centered at 0 (heavy); leaves 1 and 2 light with loads 3 and 0.
        let (next, out) = gap_reduce_round(&ints(&[16, 3, 0]), &Graph::star(3), &b);
        assert_eq!(out.connections.len(), 1);
        assert_eq!(out.connections[0].proposer, 2);
        assert_eq!(next, ints(&[8, 3, 8]));
    }

    #[test]
    fn converged_input_runs_no_main_loop() {
        let mut p = SmoothedBalance::new(3, BigInt::from(1), 50, 5);
        let loads = LoadState::integral([4, 5, 4]);
        let mut rng = stream(0, Stream::Algorithm);
        for _ in 0..3 {
            p.step(&loads, &Graph::path(3), &mut rng).unwrap();
        }
        assert!(p.is_finished());
        assert_eq!(p.summary().main_loops, 0);
        assert_eq!(p.summary().flooding_rounds, 3);
    }

    #[test]
    fn single_call_reaches_quarter_contraction_on_complete_graph() {
        let mut p = SmoothedBalance::single_call(4, 10);
        let mut loads = LoadState::integral([0, 0, 16, 16]);
        let mut rng = stream(0, Stream::Algorithm);
        while !p.is_finished() {
            loads = p.step(&loads, &Graph::complete(4), &mut rng).unwrap().loads;
        }
        assert_eq!(loads, LoadState::integral([8, 8, 8, 8]));
        assert_eq!(p.summary().calls, 1);
        assert_eq!(p.summary().main_loops, 1);
    }

    #[test]
    fn idle_tail_is_skippable() {
        let mut p = SmoothedBalance::single_call(2, 100);
        let mut loads = LoadState::integral([0, 8]);
        let mut rng = stream(0, Stream::Algorithm);
        for _ in 0..3 {
            loads = p.step(&loads, &Graph::path(2), &mut rng).unwrap().loads;
        }
        assert_eq!(loads, LoadState::integral([4, 4]));
        assert_eq!(p.idle_rounds(&loads), 99);
        p.skip(99);
        assert!(p.is_finished());
    }
}
