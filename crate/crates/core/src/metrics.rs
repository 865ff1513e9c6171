//! Potentials, gap statistics and per-round invariant checks, all exact.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::algorithms::{ConnectionBudget, Connection, Phase, RoundOutcome};
use crate::dyadic::Dyadic;
use crate::graph::{Edge, Graph, NodeId};
use crate::load::{total_load, Halves, LoadMode, LoadState};

/// `φ = Σ_{u<v} |w(u) − w(v)|`, via the sorted-order identity
/// `φ = Σ_i (2i − n + 1)·x_(i)`.
pub fn potential(loads: &[Dyadic]) -> Dyadic {
    let mut sorted: Vec<&Dyadic> = loads.iter().collect();
    sorted.sort();
    let n = sorted.len() as i64;
    let mut acc = Dyadic::zero();
    for (i, x) in sorted.into_iter().enumerate() {
        let coeff = 2 * i as i64 - n + 1;
        if coeff != 0 {
            acc += &x.mul_int(&BigInt::from(coeff));
        }
    }
    acc
}

pub fn potential_of(state: &LoadState) -> Dyadic {
    potential(state.loads())
}

/// `t = max w − min w`; zero for an empty vector.
pub fn max_gap(loads: &[Dyadic]) -> Dyadic {
    match (loads.iter().min(), loads.iter().max()) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => Dyadic::zero(),
    }
}

/// `D_r = ½ Σ` pre-round gaps over the connected pairs.
pub fn shifted_dr(connections: &[Connection]) -> Dyadic {
    Dyadic::sum(connections.iter().map(|c| &c.gap)).half()
}

/// `p^k = Σ_{j ≤ k} a[j]` for `k = 1..n`, with `a` the loads in line order.
pub fn prefix_sums(line: &[NodeId], loads: &LoadState) -> Vec<BigInt> {
    let mut acc = BigInt::from(0);
    line.iter()
        .map(|&v| {
            acc += loads.load(v).to_integer().expect("integral load");
            acc.clone()
        })
        .collect()
}

/// Potential of the split node set: all `2n` halves as separate nodes.
pub fn split_potential(halves: &[Halves]) -> Dyadic {
    let flat: Vec<Dyadic> = halves.iter().flat_map(|h| [h.sender.clone(), h.answerer.clone()]).collect();
    potential(&flat)
}

/// Hop distance between edges: the minimum over endpoint pairs.
pub fn edge_distance(dist: &[Vec<usize>], a: Edge, b: Edge) -> usize {
    let (a0, a1) = a.endpoints();
    let (b0, b1) = b.endpoints();
    [dist[a0][b0], dist[a0][b1], dist[a1][b0], dist[a1][b1]].into_iter().min().unwrap_or(usize::MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CheckKind {
    Conservation,
    PotentialDrop,
    CoveringEdge,
    ShiftLowerBound,
    SplitPotential,
    MatchingBudget,
    Integrality,
    PrefixMonotone,
    StepSafety,
    Flooding,
}

impl CheckKind {
    pub const ALL: [CheckKind; 10] = [
        CheckKind::Conservation,
        CheckKind::PotentialDrop,
        CheckKind::CoveringEdge,
        CheckKind::ShiftLowerBound,
        CheckKind::SplitPotential,
        CheckKind::MatchingBudget,
        CheckKind::Integrality,
        CheckKind::PrefixMonotone,
        CheckKind::StepSafety,
        CheckKind::Flooding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Conservation => "conservation",
            CheckKind::PotentialDrop => "potentialDrop",
            CheckKind::CoveringEdge => "coveringEdge",
            CheckKind::ShiftLowerBound => "shiftLowerBound",
            CheckKind::SplitPotential => "splitPotential",
            CheckKind::MatchingBudget => "matchingBudget",
            CheckKind::Integrality => "integrality",
            CheckKind::PrefixMonotone => "prefixMonotone",
            CheckKind::StepSafety => "stepSafety",
            CheckKind::Flooding => "flooding",
        }
    }

    /// CSV column name.
    pub fn column(self) -> &'static str {
        match self {
            CheckKind::Conservation => "conservation",
            CheckKind::PotentialDrop => "potential_drop",
            CheckKind::CoveringEdge => "covering_edge",
            CheckKind::ShiftLowerBound => "shift_lower_bound",
            CheckKind::SplitPotential => "split_potential",
            CheckKind::MatchingBudget => "matching_budget",
            CheckKind::Integrality => "integrality",
            CheckKind::PrefixMonotone => "prefix_monotone",
            CheckKind::StepSafety => "step_safety",
            CheckKind::Flooding => "flooding",
        }
    }

    pub fn from_name(s: &str) -> Option<CheckKind> {
        CheckKind::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Counterexample attached to a failed check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    Total { before: Dyadic, after: Dyadic },
    Potential { before: Dyadic, after: Dyadic, d_r: Dyadic },
    Uncovered { edge: Edge, gap: Dyadic },
    Shift { d_r: Dyadic, prev_gap: Dyadic },
    Split { split: Dyadic, expected: Dyadic },
    Budget { node: NodeId, as_proposer: usize, as_acceptor: usize },
    NotAnEdge { proposer: NodeId, acceptor: NodeId },
    NonIntegral { node: NodeId, value: Dyadic },
    Prefix { k: usize, now: BigInt, initial: BigInt },
    Unsafe { node: NodeId, before: Dyadic, after: Dyadic },
    Flood,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Total { before, after } => write!(f, "total load {before} became {after}"),
            Witness::Potential { before, after, d_r } => {
                write!(f, "phi {before} -> {after} with D_r {d_r}")
            }
            Witness::Uncovered { edge, gap } => write!(f, "edge {edge:?} with gap {gap} has no covering connection"),
            Witness::Shift { d_r, prev_gap } => write!(f, "D_r {d_r} below max gap {prev_gap} / 30"),
            Witness::Split { split, expected } => write!(f, "split potential {split}, expected {expected}"),
            Witness::Budget { node, as_proposer, as_acceptor } => {
                write!(f, "node {node} proposer in {as_proposer}, acceptor in {as_acceptor} connections")
            }
            Witness::NotAnEdge { proposer, acceptor } => {
                write!(f, "connection ({proposer}, {acceptor}) is not an edge of the round graph")
            }
            Witness::NonIntegral { node, value } => write!(f, "node {node} holds {value}"),
            Witness::Prefix { k, now, initial } => write!(f, "prefix {k} is {now}, initially {initial}"),
            Witness::Unsafe { node, before, after } => {
                write!(f, "node {node} went from {before} to {after}, leaving the balanced range")
            }
            Witness::Flood => write!(f, "flooding ended with a node not knowing the true extremes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub kind: CheckKind,
    pub violations: u64,
    /// First violation found; present iff `violations > 0`.
    pub witness: Option<Witness>,
}

impl CheckResult {
    fn from_witnesses(kind: CheckKind, witnesses: Vec<Witness>) -> CheckResult {
        CheckResult { kind, violations: witnesses.len() as u64, witness: witnesses.into_iter().next() }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantReport {
    pub round: u64,
    pub results: Vec<CheckResult>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(CheckResult::passed)
    }

    pub fn get(&self, kind: CheckKind) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.kind == kind)
    }
}

/// Everything a round check may look at.
#[derive(Debug, Clone, Copy)]
pub struct RoundView<'a> {
    pub round: u64,
    pub before: &'a LoadState,
    pub after: &'a LoadState,
    pub graph: &'a Graph,
    pub outcome: &'a RoundOutcome,
    pub budget: ConnectionBudget,
    /// Split halves at the start of the round, if the protocol uses them.
    pub halves: Option<&'a [Halves]>,
    /// The round's line order and the first round's prefix sums.
    pub line: Option<(&'a [NodeId], &'a [BigInt])>,
}

/// Evaluates `checks` on one round. Checks lacking their inputs (no line
/// order, no split halves, not a main-loop round) are left out of the report.
pub fn check_round(view: &RoundView<'_>, checks: &[CheckKind]) -> InvariantReport {
    let mut results = Vec::new();
    let d_r = shifted_dr(&view.outcome.connections);
    for &kind in checks {
        let witnesses = match kind {
            CheckKind::Conservation => Some(check_conservation(view)),
            CheckKind::PotentialDrop => Some(check_potential_drop(view, &d_r)),
            CheckKind::CoveringEdge => Some(check_covering(view)),
            CheckKind::ShiftLowerBound => Some(check_shift(view, &d_r)),
            CheckKind::SplitPotential => Some(check_split(view)),
            CheckKind::MatchingBudget => Some(check_budget(view)),
            CheckKind::Integrality => Some(check_integrality(view)),
            CheckKind::PrefixMonotone => view.line.map(|(line, base)| check_prefix(view, line, base)),
            CheckKind::StepSafety => check_step_safety(view),
            CheckKind::Flooding => view.outcome.flood_verified.map(|ok| if ok { vec![] } else { vec![Witness::Flood] }),
        };
        if let Some(w) = witnesses {
            results.push(CheckResult::from_witnesses(kind, w));
        }
    }
    InvariantReport { round: view.round, results }
}

fn check_conservation(view: &RoundView<'_>) -> Vec<Witness> {
    let before = total_load(view.before);
    let after = total_load(view.after);
    if before == after {
        vec![]
    } else {
        vec![Witness::Total { before, after }]
    }
}

fn check_potential_drop(view: &RoundView<'_>, d_r: &Dyadic) -> Vec<Witness> {
    let before = potential_of(view.before);
    let after = potential_of(view.after);
    if after <= &before - &d_r.half() {
        vec![]
    } else {
        vec![Witness::Potential { before, after, d_r: d_r.clone() }]
    }
}

fn check_covering(view: &RoundView<'_>) -> Vec<Witness> {
    let w = view.before.loads();
    let dist = view.graph.all_pairs_distances();
    let connected: Vec<(Edge, &Dyadic)> = view
        .outcome
        .connections
        .iter()
        .filter_map(|c| Edge::new(c.proposer, c.acceptor).map(|e| (e, &c.gap)))
        .collect();
    let mut out = Vec::new();
    for e in view.graph.edges() {
        let (a, b) = e.endpoints();
        let gap = Dyadic::abs_diff(&w[a], &w[b]);
        if gap.is_zero() {
            continue;
        }
        let covered = connected.iter().any(|(c, g)| **g >= gap && edge_distance(&dist, e, *c) <= 3);
        if !covered {
            out.push(Witness::Uncovered { edge: e, gap });
        }
    }
    out
}

fn check_shift(view: &RoundView<'_>, d_r: &Dyadic) -> Vec<Witness> {
    let prev_gap = max_gap(view.before.loads());
    if d_r.mul_int(&BigInt::from(30)) >= prev_gap {
        vec![]
    } else {
        vec![Witness::Shift { d_r: d_r.clone(), prev_gap }]
    }
}

fn check_split(view: &RoundView<'_>) -> Vec<Witness> {
    let even: Vec<Halves>;
    let halves = match view.halves {
        Some(h) => h,
        None => {
            even = view.before.loads().iter().map(Halves::even).collect();
            &even
        }
    };
    let split = split_potential(halves);
    let expected = potential_of(view.before).mul_int(&BigInt::from(2));
    if split == expected {
        vec![]
    } else {
        vec![Witness::Split { split, expected }]
    }
}

fn check_budget(view: &RoundView<'_>) -> Vec<Witness> {
    let n = view.before.len();
    let mut as_proposer = vec![0usize; n];
    let mut as_acceptor = vec![0usize; n];
    let mut out = Vec::new();
    for c in &view.outcome.connections {
        if !view.graph.has_edge(c.proposer, c.acceptor) {
            out.push(Witness::NotAnEdge { proposer: c.proposer, acceptor: c.acceptor });
        }
        as_proposer[c.proposer] += 1;
        as_acceptor[c.acceptor] += 1;
    }
    for node in 0..n {
        let (p, a) = (as_proposer[node], as_acceptor[node]);
        let over = match view.budget {
            ConnectionBudget::Matching => p + a > 1,
            ConnectionBudget::SenderAnswerer => p > 1 || a > 1,
        };
        if over {
            out.push(Witness::Budget { node, as_proposer: p, as_acceptor: a });
        }
    }
    out
}

fn check_integrality(view: &RoundView<'_>) -> Vec<Witness> {
    view.after
        .loads()
        .iter()
        .enumerate()
        .filter(|(_, w)| w.is_negative() || (view.after.mode() == LoadMode::Integral && !w.is_integer()))
        .map(|(node, w)| Witness::NonIntegral { node, value: w.clone() })
        .collect()
}

fn check_prefix(view: &RoundView<'_>, line: &[NodeId], baseline: &[BigInt]) -> Vec<Witness> {
    let now = prefix_sums(line, view.before);
    now.into_iter()
        .zip(baseline)
        .enumerate()
        .filter(|(_, (p, b))| p > *b)
        .map(|(i, (p, b))| Witness::Prefix { k: i + 1, now: p, initial: b.clone() })
        .collect()
}

/// Connected nodes end balanced, and no node joins the light or heavy set.
fn check_step_safety(view: &RoundView<'_>) -> Option<Vec<Witness>> {
    if view.outcome.phase != Phase::Balancing {
        return None;
    }
    let bounds = view.outcome.class_bounds.as_ref()?;
    let before = view.before.integers();
    let after = view.after.integers();
    let mut out = Vec::new();
    let mut endpoints: Vec<NodeId> = view.outcome.connections.iter().flat_map(|c| [c.proposer, c.acceptor]).collect();
    endpoints.sort_unstable();
    for (node, (b, a)) in before.iter().zip(&after).enumerate() {
        let joined = (!bounds.is_light(b) && bounds.is_light(a)) || (!bounds.is_heavy(b) && bounds.is_heavy(a));
        let unbalanced_endpoint = endpoints.binary_search(&node).is_ok() && !bounds.is_balanced(a);
        if joined || unbalanced_endpoint {
            out.push(Witness::Unsafe { node, before: Dyadic::from(b.clone()), after: Dyadic::from(a.clone()) });
        }
    }
    Some(out)
}
