//! Continuous balancing through the integral smoothed driver: loads are
//! counted in units of `τ/2` and only whole units move.

use num_bigint::BigInt;

use super::budget::{gap_reduce_rounds, smoothed_budget, smoothed_calls};
use super::gap_reduce::SmoothedBalance;
use super::{check_sizes, Protocol, ProtocolError, ProtocolSummary, Step};
use crate::dyadic::Dyadic;
use crate::graph::Graph;
use crate::load::{LoadMode, LoadState};
use crate::rng::SimRng;

/// `w(v) = q(v)·unit + r(v)` with `0 ≤ r(v) < unit`.
pub fn decompose(loads: &[Dyadic], unit: &Dyadic) -> (Vec<BigInt>, Vec<Dyadic>) {
    loads.iter().map(|w| w.div_rem_euclid(unit)).unzip()
}

pub fn recombine(units: &[BigInt], remainders: &[Dyadic], unit: &Dyadic) -> Vec<Dyadic> {
    units.iter().zip(remainders).map(|(q, r)| &unit.mul_int(q) + r).collect()
}

#[derive(Debug, Clone)]
pub struct ContinuousViaIntegral {
    unit: Dyadic,
    inner: SmoothedBalance,
    budget: u64,
}

impl ContinuousViaIntegral {
    /// Sets up the integral driver for `loads` at target gap `tau > 0`.
    pub fn new(loads: &LoadState, tau: &Dyadic, c1: f64, k: f64) -> Result<ContinuousViaIntegral, ProtocolError> {
        if loads.mode() != LoadMode::Continuous {
            return Err(ProtocolError::NeedsContinuous("continuousViaIntegral"));
        }
        let unit = tau.half();
        let n = loads.len();
        let (units, _) = decompose(loads.loads(), &unit);
        let total = Dyadic::from(units.iter().sum::<BigInt>());
        let one = Dyadic::from(1i64);
        let main = gap_reduce_rounds(n, &total, c1, k);
        let calls = smoothed_calls(&total, &one);
        let inner = SmoothedBalance::new(n, BigInt::from(1), main, calls);
        let budget = smoothed_budget(n, &total, &one, c1, k);
        Ok(ContinuousViaIntegral { unit, inner, budget })
    }

    pub fn unit(&self) -> &Dyadic {
        &self.unit
    }

    /// Rounds the inner driver may use at most.
    pub fn budget(&self) -> u64 {
        self.budget
    }

    fn split(&self, loads: &LoadState) -> (LoadState, Vec<Dyadic>) {
        let (units, rem) = decompose(loads.loads(), &self.unit);
        let q = LoadState::new_unchecked(LoadMode::Integral, units.into_iter().map(Dyadic::from).collect());
        (q, rem)
    }
}

impl Protocol for ContinuousViaIntegral {
    fn name(&self) -> &'static str {
        "continuousViaIntegral"
    }

    fn step(&mut self, loads: &LoadState, graph: &Graph, rng: &mut SimRng) -> Result<Step, ProtocolError> {
        check_sizes(loads, graph)?;
        if loads.mode() != LoadMode::Continuous {
            return Err(ProtocolError::NeedsContinuous("continuousViaIntegral"));
        }
        let (q, rem) = self.split(loads);
        let inner = self.inner.step(&q, graph, rng)?;
        let next = recombine(&inner.loads.integers(), &rem, &self.unit);
        let w = loads.loads();
        let mut outcome = inner.outcome;
        for c in &mut outcome.connections {
            c.gap = Dyadic::abs_diff(&w[c.proposer], &w[c.acceptor]);
        }
        for t in &mut outcome.transfers {
            *t = self.unit.mul_int(&t.floor());
        }
        // Thresholds live in units and do not apply to the real loads.
        outcome.class_bounds = None;
        Ok(Step { loads: LoadState::new_unchecked(LoadMode::Continuous, next), outcome })
    }

    fn is_finished(&self) -> bool {
        self.inner.is_finished()
    }

    fn idle_rounds(&self, loads: &LoadState) -> u64 {
        if loads.mode() != LoadMode::Continuous {
            return 0;
        }
        self.inner.idle_rounds(&self.split(loads).0)
    }

    fn skip(&mut self, rounds: u64) {
        self.inner.skip(rounds);
    }

    fn summary(&self) -> ProtocolSummary {
        self.inner.summary()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::load::total_load;
    use crate::rng::{stream, Stream};

    fn q(num: i64, exp: u32) -> Dyadic {
        Dyadic::new(num, exp)
    }

    #[test]
    fn decomposition_examples() {
        let unit = q(1, 3);
        let (units, rem) = decompose(&[Dyadic::zero(), q(1, 2)], &unit);
        assert_eq!(units, vec![BigInt::from(0), BigInt::from(2)]);
        assert!(rem.iter().all(Dyadic::is_zero));
        let (units, rem) = decompose(&[q(1, 4), q(3, 4)], &unit);
        assert_eq!(units, vec![BigInt::from(0), BigInt::from(1)]);
        assert_eq!(rem, vec![q(1, 4), q(1, 4)]);
        assert_eq!(recombine(&units, &rem, &unit), vec![q(1, 4), q(3, 4)]);
    }

    #[test]
    fn two_units_meet_in_the_middle() {
        // w = (0, τ) with τ = 1/4: two units of 1/8 on one side.
        let tau = q(1, 2);
        let loads = LoadState::continuous(vec![Dyadic::zero(), tau.clone()]).unwrap();
        let mut p = ContinuousViaIntegral::new(&loads, &tau, 1.0, 1.0).unwrap();
        let mut rng = stream(0, Stream::Algorithm);
        let mut cur = loads.clone();
        while !p.is_finished() {
            cur = p.step(&cur, &Graph::path(2), &mut rng).unwrap().loads;
        }
        assert_eq!(cur.loads(), &[q(1, 2).half(), q(1, 2).half()]);
        assert_eq!(total_load(&cur), total_load(&loads));
    }

    #[test]
    fn remainders_only_is_already_done() {
        let tau = Dyadic::from(1i64);
        let loads = LoadState::continuous(vec![q(1, 3), q(3, 3), Dyadic::zero()]).unwrap();
        let p = ContinuousViaIntegral::new(&loads, &tau, 1.0, 1.0).unwrap();
        assert!(p.is_finished());
        assert_eq!(p.budget(), 0);
    }
}
