//! k-smoothing of adversarial graphs.
//!
//! A `t`-smoothing replaces `G_adv` by a uniform draw from the connected
//! simple graphs within Hamming distance `t` of it; for a real noise level
//! `k` the radius is `roundp(k)`. Sampling is exact rejection sampling:
//! the flip count `j` is drawn with weight `C(N, j)` (the size of the
//! distance-`j` shell, `N = C(n, 2)`), a uniform `j`-subset of potential
//! edges is flipped, and disconnected results are rejected.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::seq::index;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dyadic::ExactDecimal;
use crate::graph::{potential_edges, Edge, Graph};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{chunk_stream, SimRng};

pub const DEFAULT_MAX_REJECTIONS: u32 = 10_000;

/// Candidate ceiling for [`enumerate_ball`].
pub const BALL_ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmoothingError {
    #[error("rejection budget exhausted after {attempts} draws (n = {n}, radius = {radius})")]
    RejectionsExhausted { attempts: u32, n: usize, radius: u64 },
    #[error("Hamming ball of radius {radius} on {n} nodes has {candidates} candidates, above the limit {limit}")]
    Intractable { n: usize, radius: u64, candidates: u128, limit: u128 },
    #[error("noise level must be non-negative, got {0}")]
    NegativeNoise(ExactDecimal),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoothingParams {
    pub k: ExactDecimal,
    pub max_rejections: u32,
}

impl SmoothingParams {
    pub fn new(k: ExactDecimal) -> SmoothingParams {
        SmoothingParams { k, max_rejections: DEFAULT_MAX_REJECTIONS }
    }

    /// `k <= n/16`, the regime where the hitting bound is stated.
    pub fn within_hitting_regime(&self, n: usize) -> bool {
        // k <= n/16  <=>  16 * mantissa <= n * 10^scale
        let lhs = self.k.mantissa() * BigInt::from(16);
        let rhs = BigInt::from(n) * BigInt::from(10u32).pow(self.k.scale());
        lhs <= rhs
    }
}

/// `⌈x⌉` with probability `x - ⌊x⌋`, else `⌊x⌋`.
pub fn roundp(x: &ExactDecimal, rng: &mut SimRng) -> u64 {
    let floor = x.floor().to_u64().unwrap_or(u64::MAX);
    if x.is_integer() {
        return floor;
    }
    let (num, den) = x.fraction();
    // den = 10^scale; draw uniformly from 0..den and compare exactly.
    let draw = match den.to_u128() {
        Some(d) => BigInt::from(rng.random_range(0..d)),
        None => {
            // Absurdly long decimal: fall back to digit-by-digit draws.
            let mut acc = BigInt::zero();
            for _ in 0..x.scale() {
                acc = acc * 10 + rng.random_range(0..10u32);
            }
            acc
        }
    };
    if draw < num {
        floor + 1
    } else {
        floor
    }
}

/// `C(n, j)` for `j = 0..=t`, or `None` on overflow.
fn shell_sizes(n: u128, t: u64) -> Option<Vec<u128>> {
    let mut sizes = Vec::with_capacity(t as usize + 1);
    let mut c: u128 = 1;
    sizes.push(c);
    for j in 1..=t as u128 {
        c = c.checked_mul(n - j + 1)? / j;
        sizes.push(c);
    }
    Some(sizes)
}

/// Uniform draw from the connected graphs within Hamming distance `radius`
/// of `g_adv`.
pub fn smooth_with_radius(
    g_adv: &Graph,
    radius: u64,
    max_rejections: u32,
    rng: &mut SimRng,
) -> Result<Graph, SmoothingError> {
    if radius == 0 {
        return Ok(g_adv.clone());
    }
    let n = g_adv.node_count();
    let slots = potential_edges(n);
    let radius = radius.min(slots as u64);
    let intractable = || SmoothingError::Intractable { n, radius, candidates: u128::MAX, limit: u128::MAX };
    let shells = shell_sizes(slots as u128, radius).ok_or_else(intractable)?;
    let total: u128 = shells.iter().try_fold(0u128, |acc, &s| acc.checked_add(s)).ok_or_else(intractable)?;
    for _ in 0..max_rejections {
        let mut pick = rng.random_range(0..total);
        let mut flips = 0usize;
        for (j, &size) in shells.iter().enumerate() {
            if pick < size {
                flips = j;
                break;
            }
            pick -= size;
        }
        let chosen = index::sample(rng, slots, flips);
        let candidate = g_adv.flipped(chosen.iter().map(|i| Edge::from_index(i, n)));
        if candidate.is_connected() {
            return Ok(candidate);
        }
    }
    Err(SmoothingError::RejectionsExhausted { attempts: max_rejections, n, radius })
}

/// Outcome of one k-smoothing draw.
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub radius: u64,
    pub graph: Graph,
}

/// One k-smoothing: radius `t' = roundp(k)`, then a uniform connected
/// graph within distance `t'` of `g_adv`.
pub fn k_smooth(g_adv: &Graph, params: &SmoothingParams, rng: &mut SimRng) -> Result<Smoothed, SmoothingError> {
    if params.k.is_negative() {
        return Err(SmoothingError::NegativeNoise(params.k.clone()));
    }
    let radius = roundp(&params.k, rng);
    let graph = smooth_with_radius(g_adv, radius, params.max_rejections, rng)?;
    Ok(Smoothed { radius, graph })
}

/// Every connected graph within Hamming distance `t` of `g_adv`, each once.
pub fn enumerate_ball(g_adv: &Graph, t: u64) -> Result<Vec<Graph>, SmoothingError> {
    let n = g_adv.node_count();
    let slots = potential_edges(n);
    let radius = t.min(slots as u64);
    let candidates = shell_sizes(slots as u128, radius)
        .and_then(|s| s.iter().try_fold(0u128, |acc, &x| acc.checked_add(x)))
        .unwrap_or(u128::MAX);
    if candidates > BALL_ENUMERATION_LIMIT {
        return Err(SmoothingError::Intractable { n, radius: t, candidates, limit: BALL_ENUMERATION_LIMIT });
    }
    let mut out = Vec::new();
    let mut subset = Vec::new();
    collect_subsets(g_adv, slots, radius as usize, 0, &mut subset, &mut out);
    Ok(out)
}

fn collect_subsets(g: &Graph, slots: usize, remaining: usize, start: usize, subset: &mut Vec<usize>, out: &mut Vec<Graph>) {
    let n = g.node_count();
    let candidate = g.flipped(subset.iter().map(|&i| Edge::from_index(i, n)));
    if candidate.is_connected() {
        out.push(candidate);
    }
    if remaining == 0 {
        return;
    }
    for next in start..slots {
        subset.push(next);
        collect_subsets(g, slots, remaining - 1, next + 1, subset, out);
        subset.pop();
    }
}

/// Empirical distribution of a sampler against the exact uniform law on
/// the connected Hamming ball.
#[derive(Debug, Clone, Serialize)]
pub struct UniformityReport {
    pub n: usize,
    pub radius: u64,
    pub samples: usize,
    pub ball_size: usize,
    /// Samples that fell outside the enumerated ball (must be zero).
    pub outside_ball: usize,
    pub total_variation: f64,
}

type EdgeKey = Vec<Edge>;

fn key(g: &Graph) -> EdgeKey {
    g.edges().collect()
}

/// Draws `samples` smoothings of `g_adv` at noise level `k` (an integer
/// radius here, so `roundp` is exact) and measures total-variation distance
/// to uniform over [`enumerate_ball`].
pub fn uniformity_test(
    g_adv: &Graph,
    radius: u64,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<UniformityReport, SmoothingError> {
    let ball = enumerate_ball(g_adv, radius)?;
    let mut counts: BTreeMap<EdgeKey, usize> = ball.iter().map(|g| (key(g), 0)).collect();
    let params = SmoothingParams::new(ExactDecimal::from_int(radius));
    let chunk = 4096;
    let chunks = samples.div_ceil(chunk);
    let partial = map_indexed(chunks, exec, |c| -> Result<BTreeMap<EdgeKey, usize>, SmoothingError> {
        let mut rng = chunk_stream(seed, c as u64);
        let mut local = BTreeMap::new();
        let this = chunk.min(samples - c * chunk);
        for _ in 0..this {
            let s = k_smooth(g_adv, &params, &mut rng)?;
            *local.entry(key(&s.graph)).or_insert(0) += 1;
        }
        Ok(local)
    });
    let mut outside = 0;
    for part in partial {
        for (k, v) in part? {
            match counts.get_mut(&k) {
                Some(c) => *c += v,
                None => outside += v,
            }
        }
    }
    let uniform = 1.0 / ball.len() as f64;
    let inside: f64 = counts
        .values()
        .map(|&c| (c as f64 / samples as f64 - uniform).abs())
        .sum();
    let total_variation = 0.5 * (inside + outside as f64 / samples as f64);
    Ok(UniformityReport {
        n: g_adv.node_count(),
        radius,
        samples,
        ball_size: ball.len(),
        outside_ball: outside,
        total_variation,
    })
}

/// One measured case of the hitting property.
#[derive(Debug, Clone, Serialize)]
pub struct HittingCase {
    pub base: String,
    pub set_size: usize,
    pub hits: usize,
    pub samples: usize,
    /// `frequency * n^2 / (k * |S|)`.
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HittingCalibration {
    pub n: usize,
    pub k: String,
    pub cases: Vec<HittingCase>,
    /// Smallest measured constant over all cases.
    pub c1: f64,
}

/// Measures how often a k-smoothing hits a fixed set `S` of potential
/// edges, for several base graphs and set sizes. `S` is drawn from the
/// non-edges of the base graph, which is the adversary's best choice.
pub fn calibrate_hitting(
    n: usize,
    k: &ExactDecimal,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<HittingCalibration, SmoothingError> {
    let kf = k.to_f64();
    let params = SmoothingParams::new(k.clone());
    let mut tree_rng = chunk_stream(seed, u64::MAX >> 1);
    let bases: Vec<(String, Graph)> = vec![
        ("path".into(), Graph::path(n)),
        ("star".into(), Graph::star(n)),
        ("cycle".into(), Graph::cycle(n)),
        ("randomTree".into(), crate::adversary::uniform_spanning_tree(n, &mut tree_rng)),
    ];
    let max_s = ((n * n) as f64 / (2.0 * kf.max(f64::MIN_POSITIVE))).floor() as usize;
    let mut jobs = Vec::new();
    for (bi, (_, g)) in bases.iter().enumerate() {
        let non_edges = potential_edges(n) - g.edge_count();
        let cap = max_s.min(non_edges);
        let mut sizes: BTreeSet<usize> = [1, n / 2, n, 2 * n, 4 * n, cap].into_iter().collect();
        sizes.retain(|&s| s >= 1 && s <= cap);
        for s in sizes {
            jobs.push((bi, s));
        }
    }
    let results = map_indexed(jobs.len(), exec, |j| -> Result<HittingCase, SmoothingError> {
        let (bi, s) = jobs[j];
        let (name, g) = &bases[bi];
        let mut rng = chunk_stream(seed, j as u64);
        let non_edges: Vec<usize> = (0..potential_edges(n))
            .filter(|&i| {
                let (a, b) = Edge::from_index(i, n).endpoints();
                !g.has_edge(a, b)
            })
            .collect();
        let set: Vec<Edge> = index::sample(&mut rng, non_edges.len(), s)
            .iter()
            .map(|i| Edge::from_index(non_edges[i], n))
            .collect();
        let mut hits = 0;
        for _ in 0..samples {
            let out = k_smooth(g, &params, &mut rng)?;
            if set.iter().any(|e| out.graph.has_edge(e.lo(), e.hi())) {
                hits += 1;
            }
        }
        let freq = hits as f64 / samples as f64;
        Ok(HittingCase {
            base: name.clone(),
            set_size: s,
            hits,
            samples,
            constant: freq * (n * n) as f64 / (kf * s as f64),
        })
    });
    let cases = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let c1 = cases.iter().map(|c| c.constant).fold(f64::INFINITY, f64::min);
    Ok(HittingCalibration { n, k: k.to_string(), cases, c1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::hamming_distance;
    use crate::rng::{stream, Stream};

    fn dec(s: &str) -> ExactDecimal {
        s.parse().unwrap()
    }

    #[test]
    fn roundp_integer_is_exact() {
        let mut rng = stream(1, Stream::Smoothing);
        for _ in 0..100 {
            assert_eq!(roundp(&dec("2.0"), &mut rng), 2);
        }
    }

    #[test]
    fn roundp_half_takes_both_values() {
        let mut rng = stream(2, Stream::Smoothing);
        let draws: Vec<u64> = (0..2000).map(|_| roundp(&dec("0.5"), &mut rng)).collect();
        assert!(draws.iter().all(|&d| d <= 1));
        let ones = draws.iter().filter(|&&d| d == 1).count();
        // Binomial(2000, 1/2): sd ~ 22.
        assert!((900..1100).contains(&ones), "ones = {ones}");
    }

    #[test]
    fn roundp_empirical_mean() {
        let mut rng = stream(3, Stream::Smoothing);
        let draws = 100_000;
        let sum: u64 = (0..draws).map(|_| roundp(&dec("1.25"), &mut rng)).sum();
        let mean = sum as f64 / draws as f64;
        assert!((mean - 1.25).abs() <= 0.01, "mean = {mean}");
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = stream(4, Stream::Smoothing);
        let g = Graph::star(6);
        let out = k_smooth(&g, &SmoothingParams::new(dec("0")), &mut rng).unwrap();
        assert_eq!(out.radius, 0);
        assert_eq!(out.graph, g);
    }

    #[test]
    fn ball_enumeration_examples() {
        let path = Graph::path(3);
        assert_eq!(enumerate_ball(&path, 0).unwrap(), vec![path.clone()]);
        let ball: BTreeSet<EdgeKey> = enumerate_ball(&path, 1).unwrap().iter().map(key).collect();
        let expected: BTreeSet<EdgeKey> = [key(&path), key(&Graph::complete(3))].into_iter().collect();
        assert_eq!(ball, expected);

        let tri = enumerate_ball(&Graph::complete(3), 1).unwrap();
        assert_eq!(tri.len(), 4);
        assert_eq!(tri.iter().filter(|g| g.edge_count() == 2).count(), 3);
    }

    #[test]
    fn ball_enumeration_guard() {
        let err = enumerate_ball(&Graph::path(30), 4).unwrap_err();
        assert!(matches!(err, SmoothingError::Intractable { .. }));
    }

    #[test]
    fn three_path_radius_one_is_fair_coin() {
        let path = Graph::path(3);
        let mut rng = stream(5, Stream::Smoothing);
        let mut triangles = 0;
        let draws = 20_000;
        for _ in 0..draws {
            let g = smooth_with_radius(&path, 1, DEFAULT_MAX_REJECTIONS, &mut rng).unwrap();
            assert!(g.is_connected());
            if g.edge_count() == 3 {
                triangles += 1;
            } else {
                assert_eq!(g, path);
            }
        }
        let p = triangles as f64 / draws as f64;
        assert!((p - 0.5).abs() < 0.015, "p = {p}");
    }

    #[test]
    fn star_radius_one_matches_enumeration() {
        let report = uniformity_test(&Graph::star(4), 1, 100_000, 11, Execution::Parallel).unwrap();
        assert_eq!(report.outside_ball, 0);
        assert!(report.total_variation <= 0.02, "{report:?}");
    }

    #[test]
    fn outputs_stay_in_ball() {
        let mut rng = stream(6, Stream::Smoothing);
        let g = Graph::path(7);
        let params = SmoothingParams::new(dec("1.5"));
        for _ in 0..500 {
            let out = k_smooth(&g, &params, &mut rng).unwrap();
            assert!(out.graph.is_connected());
            assert!(hamming_distance(&g, &out.graph).unwrap() as u64 <= out.radius);
            assert!(out.radius == 1 || out.radius == 2);
        }
    }

    #[test]
    fn rejection_exhaustion_is_reported() {
        // Removing the single edge of a 2-path always disconnects, but the
        // empty flip keeps it; a zero budget can never accept.
        let mut rng = stream(7, Stream::Smoothing);
        let err = smooth_with_radius(&Graph::path(2), 1, 0, &mut rng).unwrap_err();
        assert!(matches!(err, SmoothingError::RejectionsExhausted { attempts: 0, .. }));
    }

    #[test]
    fn hitting_regime() {
        assert!(SmoothingParams::new(dec("1")).within_hitting_regime(16));
        assert!(!SmoothingParams::new(dec("1.01")).within_hitting_regime(16));
        assert!(SmoothingParams::new(dec("0.5")).within_hitting_regime(8));
    }
}
