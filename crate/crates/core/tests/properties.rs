//! Property tests against brute-force oracles: rational arithmetic from
//! `num-rational`, pairwise potentials, and per-round lemmas recomputed
//! from scratch on random connected graphs.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use dynbal::algorithms::{det_interactive_round, det_internal_round, rand_max_neighbor_round, Connection};
use dynbal::config::{AdversarySpec, AlgorithmKind, InitialLoads, ScenarioConfig};
use dynbal::dyadic::Dyadic;
use dynbal::engine::run_trial;
use dynbal::graph::Graph;
use dynbal::load::{Halves, LoadMode, LoadState};
use dynbal::metrics::{potential, split_potential, CheckKind};
use dynbal::rng::{stream, Stream};

fn rat(d: &Dyadic) -> BigRational {
    BigRational::new(d.numerator().clone(), BigInt::one() << d.exponent())
}

fn dyadic() -> impl Strategy<Value = Dyadic> {
    (-1_000_000i64..1_000_000, 0u32..24).prop_map(|(m, e)| Dyadic::new(m, e))
}

fn load() -> impl Strategy<Value = Dyadic> {
    (0i64..4096, 0u32..6).prop_map(|(m, e)| Dyadic::new(m, e))
}

/// Random spanning tree plus extra edges chosen by `mask`.
fn connected_graph(n: usize, parents: &[usize], mask: u64) -> Graph {
    let mut edges = BTreeSet::new();
    for v in 1..n {
        edges.insert((parents[v - 1] % v, v));
    }
    let mut bit = 0;
    for a in 0..n {
        for b in a + 1..n {
            if mask >> (bit % 64) & 1 == 1 {
                edges.insert((a, b));
            }
            bit += 1;
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

fn graph_and_loads(n_max: usize) -> impl Strategy<Value = (Graph, Vec<Dyadic>)> {
    (2..=n_max).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<usize>(), n - 1),
            any::<u64>(),
            prop::collection::vec(load(), n),
        )
            .prop_map(move |(parents, mask, loads)| (connected_graph(n, &parents, mask), loads))
    })
}

fn brute_potential(w: &[BigRational]) -> BigRational {
    let mut acc = BigRational::zero();
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            acc += (&w[i] - &w[j]).abs();
        }
    }
    acc
}

fn floyd(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0;
    }
    for e in g.edges() {
        let (a, b) = e.endpoints();
        d[a][b] = 1;
        d[b][a] = 1;
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

fn rats(v: &[Dyadic]) -> Vec<BigRational> {
    v.iter().map(rat).collect()
}

fn assert_connections_valid(g: &Graph, w: &[BigRational], conns: &[Connection]) {
    for c in conns {
        assert!(g.has_edge(c.proposer, c.acceptor), "{c:?} is not an edge");
        assert_eq!(rat(&c.gap), (&w[c.proposer] - &w[c.acceptor]).abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dyadic_matches_rationals(a in dyadic(), b in dyadic(), k in -1000i64..1000) {
        prop_assert_eq!(rat(&(&a + &b)), rat(&a) + rat(&b));
        prop_assert_eq!(rat(&(&a - &b)), rat(&a) - rat(&b));
        prop_assert_eq!(rat(&a.half()), rat(&a) / BigInt::from(2));
        prop_assert_eq!(rat(&Dyadic::half_sum(&a, &b)), (rat(&a) + rat(&b)) / BigInt::from(2));
        prop_assert_eq!(rat(&a.mul_int(&BigInt::from(k))), rat(&a) * BigInt::from(k));
        prop_assert_eq!(a.cmp(&b), rat(&a).cmp(&rat(&b)));
        prop_assert_eq!(BigRational::from(a.floor()), rat(&a).floor());
        prop_assert_eq!(a.is_integer(), rat(&a).is_integer());
        let parsed: Dyadic = a.to_decimal_string().parse().unwrap();
        prop_assert_eq!(&parsed, &a);
    }

    #[test]
    fn euclidean_division_by_unit(a in load(), e in 0u32..8, m in 1i64..64) {
        let unit = Dyadic::new(m, e);
        let (q, r) = a.div_rem_euclid(&unit);
        prop_assert!(!r.is_negative() && r < unit);
        prop_assert_eq!(rat(&a), BigRational::from(q) * rat(&unit) + rat(&r));
    }

    #[test]
    fn potential_matches_pairwise_sum(w in prop::collection::vec(load(), 1..12)) {
        let phi = potential(&w);
        let r = rats(&w);
        prop_assert_eq!(rat(&phi), brute_potential(&r));
        let n = w.len() as i64;
        let total: BigRational = r.iter().sum();
        let t = r.iter().max().unwrap() - r.iter().min().unwrap();
        prop_assert!(rat(&phi) <= total * BigInt::from((n - 1).max(0)));
        prop_assert!(rat(&phi) >= t * BigInt::from(n - 1));
    }

    #[test]
    fn deterministic_round_lemmas((g, w) in graph_and_loads(9)) {
        let before = rats(&w);
        let halves: Vec<Halves> = w.iter().map(Halves::even).collect();
        let (after_halves, outcome) = det_interactive_round(&halves, &g);
        let after: Vec<BigRational> = after_halves.iter().map(|h| rat(&h.total())).collect();

        // Load is conserved exactly, on the real nodes.
        prop_assert_eq!(before.iter().sum::<BigRational>(), after.iter().sum::<BigRational>());
        assert_connections_valid(&g, &before, &outcome.connections);

        // At most one connection per node per side.
        let mut senders = BTreeSet::new();
        let mut answerers = BTreeSet::new();
        for c in &outcome.connections {
            prop_assert!(senders.insert(c.proposer));
            prop_assert!(answerers.insert(c.acceptor));
        }

        // Potential drops by at least a quarter of the connected gaps.
        let d_r: BigRational = outcome.connections.iter().map(|c| rat(&c.gap)).sum::<BigRational>() / BigInt::from(2);
        prop_assert!(brute_potential(&after) <= brute_potential(&before) - &d_r / BigInt::from(2));

        // Every nonzero edge gap is dominated by a realized gap within 3 hops.
        let dist = floyd(&g);
        for e in g.edges() {
            let (a, b) = e.endpoints();
            let gap = (&before[a] - &before[b]).abs();
            if gap.is_zero() {
                continue;
            }
            let covered = outcome.connections.iter().any(|c| {
                let hop = [(a, c.proposer), (a, c.acceptor), (b, c.proposer), (b, c.acceptor)]
                    .iter()
                    .map(|&(x, y)| dist[x][y])
                    .min()
                    .unwrap();
                rat(&c.gap) >= gap && hop <= 3
            });
            prop_assert!(covered, "edge {:?} with gap {} uncovered", e, gap);
        }

        // The shift is a constant fraction of the gap.
        let t = before.iter().max().unwrap() - before.iter().min().unwrap();
        prop_assert!(&d_r * BigInt::from(30) >= t);

        // The internal step leaves each node's total unchanged.
        let internal = det_internal_round(&after_halves);
        for (x, y) in internal.iter().zip(&after_halves) {
            prop_assert_eq!(rat(&x.total()), rat(&y.total()));
            prop_assert_eq!(&x.sender, &x.answerer);
        }
    }

    #[test]
    fn split_potential_doubles_on_even_halves(w in prop::collection::vec(load(), 1..10)) {
        let flat: Vec<BigRational> = w.iter().flat_map(|x| {
            let h = rat(x) / BigInt::from(2);
            [h.clone(), h]
        }).collect();
        let halves: Vec<Halves> = w.iter().map(Halves::even).collect();
        prop_assert_eq!(rat(&split_potential(&halves)), brute_potential(&flat));
        prop_assert_eq!(brute_potential(&flat), brute_potential(&rats(&w)) * BigInt::from(2));
    }

    #[test]
    fn randomized_round_is_a_safe_matching((g, w) in graph_and_loads(10), seed in any::<u64>(), integral in any::<bool>()) {
        let w: Vec<Dyadic> = if integral { w.iter().map(|x| Dyadic::from(x.floor())).collect() } else { w };
        let mode = if integral { LoadMode::Integral } else { LoadMode::Continuous };
        let state = LoadState::new(mode, w.clone()).unwrap();
        let mut rng = stream(seed, Stream::Algorithm);
        let (next, outcome) = rand_max_neighbor_round(&state, &g, &mut rng).unwrap();
        let before = rats(&w);
        let after = rats(next.loads());
        prop_assert_eq!(before.iter().sum::<BigRational>(), after.iter().sum::<BigRational>());
        assert_connections_valid(&g, &before, &outcome.connections);
        let mut touched = BTreeSet::new();
        for c in &outcome.connections {
            prop_assert!(touched.insert(c.proposer) && touched.insert(c.acceptor));
            // The pair's new loads stay within its old interval.
            let (lo, hi) = if before[c.proposer] <= before[c.acceptor] {
                (&before[c.proposer], &before[c.acceptor])
            } else {
                (&before[c.acceptor], &before[c.proposer])
            };
            for v in [c.proposer, c.acceptor] {
                prop_assert!(&after[v] >= lo && &after[v] <= hi);
            }
        }
        for v in 0..w.len() {
            if !touched.contains(&v) {
                prop_assert_eq!(&after[v], &before[v]);
            }
            if integral {
                prop_assert!(after[v].is_integer());
            }
        }
        prop_assert!(brute_potential(&after) <= brute_potential(&before));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sorting_line_prefix_sums_never_grow(steps in prop::collection::vec(0u64..=1, 3..9), seed in any::<u64>()) {
        // Descending-then-shuffled integral loads whose sorted steps are at most 1.
        let mut level = 0u64;
        let mut w: Vec<u64> = steps.iter().map(|s| { level += s; level }).collect();
        w.reverse();
        let n = w.len();
        let mut cfg = ScenarioConfig::new(
            n,
            InitialLoads::Explicit(w.into_iter().map(Dyadic::from).collect()),
            LoadMode::Integral,
            "0",
            "0",
            AdversarySpec::SortingLine,
            AlgorithmKind::RandMaxNeighbor,
        );
        cfg.round_budget = Some(300);
        cfg.stop_on_converge = false;
        cfg.checks = vec![CheckKind::PrefixMonotone, CheckKind::Conservation, CheckKind::MatchingBudget];
        cfg.validate().unwrap();
        let t = run_trial(&cfg, seed).unwrap();
        prop_assert_eq!(t.total_violations(), 0, "{:?}", t.first_violation);
        prop_assert!(t.conserved());
    }

    #[test]
    fn deterministic_trials_satisfy_every_lemma(n in 2usize..8, total in 1u64..200, seed in any::<u64>(), adv in 0usize..4) {
        let adversary = match adv {
            0 => AdversarySpec::Static(dynbal::config::GraphSpec::Named(dynbal::config::NamedGraph::Path)),
            1 => AdversarySpec::ResortDescending,
            2 => AdversarySpec::SortingLine,
            _ => AdversarySpec::RandomConnected { edge_probability: "0.3".parse().unwrap() },
        };
        let mut loads = vec![Dyadic::zero(); n];
        loads[0] = Dyadic::from(total);
        let mut cfg = ScenarioConfig::new(
            n,
            InitialLoads::Explicit(loads),
            LoadMode::Continuous,
            "0.5",
            "0",
            adversary,
            AlgorithmKind::Deterministic,
        );
        cfg.checks = vec![
            CheckKind::Conservation,
            CheckKind::PotentialDrop,
            CheckKind::CoveringEdge,
            CheckKind::ShiftLowerBound,
            CheckKind::SplitPotential,
            CheckKind::MatchingBudget,
        ];
        cfg.validate().unwrap();
        let t = run_trial(&cfg, seed).unwrap();
        prop_assert_eq!(t.total_violations(), 0, "{:?}", t.first_violation);
        prop_assert!(t.converged());
    }
}
