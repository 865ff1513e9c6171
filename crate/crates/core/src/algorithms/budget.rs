//! Round budgets. Every real-valued formula is rounded up; `ln` is natural.

use std::f64::consts::E;

use crate::dyadic::Dyadic;

/// Hitting constant: `calibrate_hitting(16, 1, 200_000, 0, ..)` measures 2.09, rounded down.
pub const DEFAULT_C1: f64 = 2.0;

fn ceil_u64(x: f64) -> u64 {
    if x.is_nan() || x <= 0.0 {
        0
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil() as u64
    }
}

/// `ln(max(e, n ln T))`, which is at least 1.
fn log_n_log_t(n: usize, total: &Dyadic) -> f64 {
    let t = total.to_f64();
    let inner = if t > 1.0 { n as f64 * t.ln() } else { 0.0 };
    inner.max(E).ln()
}

/// `⌈60 · min{n² ln(nT/τ), nT/τ}⌉`, zero when `nT/τ ≤ 1`. `τ` must be positive.
pub fn deterministic_budget(n: usize, total: &Dyadic, tau: &Dyadic) -> u64 {
    debug_assert!(tau > &Dyadic::zero());
    let ratio = n as f64 * total.to_f64() / tau.to_f64();
    if ratio <= 1.0 {
        return 0;
    }
    let nf = n as f64;
    ceil_u64(60.0 * (nf * nf * ratio.ln()).min(ratio))
}

/// Default budget for the randomized baseline: the deterministic budget
/// stretched by `max(1, ln n)`.
pub fn randomized_budget(n: usize, total: &Dyadic, tau: &Dyadic) -> u64 {
    let base = deterministic_budget(n, total, tau);
    ceil_u64(base as f64 * (n as f64).ln().max(1.0))
}

/// Main-loop length of one GapReduce call: `⌈5n² ln(n ln T)/(c₁k)⌉`.
pub fn gap_reduce_rounds(n: usize, total: &Dyadic, c1: f64, k: f64) -> u64 {
    let nf = n as f64;
    ceil_u64(5.0 * nf * nf * log_n_log_t(n, total) / (c1 * k))
}

/// Rounds of one GapReduce call including its `n` flooding rounds.
pub fn gap_reduce_call_rounds(n: usize, total: &Dyadic, c1: f64, k: f64) -> u64 {
    (n as u64).saturating_add(gap_reduce_rounds(n, total, c1, k))
}

/// Number of GapReduce calls: `⌈4 ln(T/τ)⌉`, zero when `T ≤ τ`.
pub fn smoothed_calls(total: &Dyadic, tau: &Dyadic) -> u64 {
    let ratio = total.to_f64() / tau.to_f64();
    if ratio <= 1.0 {
        return 0;
    }
    ceil_u64(4.0 * ratio.ln())
}

pub fn smoothed_budget(n: usize, total: &Dyadic, tau: &Dyadic, c1: f64, k: f64) -> u64 {
    smoothed_calls(total, tau).saturating_mul(gap_reduce_call_rounds(n, total, c1, k))
}

/// `H_n = Σ_{j=1}^{n} 1/j`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|j| 1.0 / j as f64).sum()
}

/// Rounds of one gapless call: `⌈2n² ln(n ln T)/(c₁k) · H_n⌉`.
pub fn gapless_call_rounds(n: usize, total: &Dyadic, c1: f64, k: f64) -> u64 {
    let nf = n as f64;
    ceil_u64(2.0 * nf * nf * log_n_log_t(n, total) / (c1 * k) * harmonic(n))
}
