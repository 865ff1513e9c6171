//! Trial orchestration.
//!
//! Each round runs: adversary, smoothing (when `k > 0`), one protocol step
//! on the pre-round loads, invariant checks, commit. Adversary, smoothing
//! and algorithm draw from independent per-round streams of the trial seed,
//! so a `(config, seed)` pair fixes the whole trace and skipping idle
//! rounds changes nothing else.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use thiserror::Error;

use crate::adversary::{Adversary, AdversaryContext, AdversaryError, HistoryDepth};
use crate::algorithms::budget::{gap_reduce_rounds, gapless_call_rounds, smoothed_calls};
use crate::algorithms::{
    Connection, ContinuousViaIntegral, Deterministic, GaplessBalance, GaplessGapReduce, Protocol, ProtocolError,
    ProtocolSummary, RandMaxNeighbor, SmoothedBalance,
};
use crate::config::{AlgorithmKind, ConfigError, ScenarioConfig, TraceLevel};
use crate::dyadic::Dyadic;
use crate::graph::Graph;
use crate::load::{total_load, LoadError, LoadState};
use crate::metrics::{check_round, max_gap, potential_of, prefix_sums, shifted_dr, CheckKind, InvariantReport, RoundView, Witness};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{round_stream, stream, Stream};
use crate::smoothing::{k_smooth, SmoothingError, SmoothingParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("adversary: {0}")]
    Adversary(#[from] AdversaryError),
    #[error("adversary emitted a disallowed graph in round {round}")]
    DisallowedGraph { round: u64 },
    #[error("smoothing in round {round}: {source}")]
    Smoothing { round: u64, source: SmoothingError },
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("loads: {0}")]
    Load(#[from] LoadError),
}

/// Per-round record as written to the CSV trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRow {
    pub round: u64,
    pub phi: Dyadic,
    pub max_gap: Dyadic,
    pub d_r: Dyadic,
    pub connections: usize,
    pub converged: bool,
    /// Violation counts aligned with the configured checks; `None` if not evaluated.
    pub checks: Vec<Option<u64>>,
}

/// Full record of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTrace {
    pub round: u64,
    pub graph: Graph,
    pub matching: Vec<Connection>,
    pub phi: Dyadic,
    pub max_gap: Dyadic,
    pub d_r: Dyadic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub round: u64,
    pub check: CheckKind,
    pub witness: Witness,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub seed: u64,
    /// First round from which `τ`-convergence held through the end of the trial.
    pub converged_at_round: Option<u64>,
    pub final_gap: Dyadic,
    pub final_loads: LoadState,
    pub initial_total: Dyadic,
    /// Rounds executed, fast-forwarded ones included.
    pub rounds: u64,
    pub budget: u64,
    /// Rounds skipped because the protocol proved them idle.
    pub skipped_rounds: u64,
    pub checks: Vec<CheckKind>,
    pub rows: Vec<RoundRow>,
    pub traces: Vec<RoundTrace>,
    /// Every report in a full trace, else only the failing ones.
    pub reports: Vec<InvariantReport>,
    pub violation_counts: BTreeMap<CheckKind, u64>,
    pub first_violation: Option<Violation>,
    pub summary: ProtocolSummary,
}

impl TrialResult {
    pub fn converged(&self) -> bool {
        self.converged_at_round.is_some()
    }

    pub fn total_violations(&self) -> u64 {
        self.violation_counts.values().sum()
    }

    /// Whether the final total equals the initial total.
    pub fn conserved(&self) -> bool {
        total_load(&self.final_loads) == self.initial_total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    /// Skip rounds the protocol proves idle.
    pub fast_forward: bool,
}

impl Default for EngineOptions {
    fn default() -> EngineOptions {
        EngineOptions { fast_forward: true }
    }
}

pub fn build_protocol(cfg: &ScenarioConfig, loads: &LoadState) -> Result<Box<dyn Protocol>, EngineError> {
    let n = cfg.n;
    let total = total_load(loads);
    let c1 = cfg.algorithm.c1();
    let k = cfg.k.to_f64();
    let tau = cfg.tau_dyadic();
    Ok(match cfg.algorithm.name {
        AlgorithmKind::Deterministic => Box::new(Deterministic::new()),
        AlgorithmKind::RandMaxNeighbor => Box::new(RandMaxNeighbor),
        AlgorithmKind::GapReduce => Box::new(SmoothedBalance::single_call(n, gap_reduce_rounds(n, &total, c1, k))),
        AlgorithmKind::SmoothedBalance => Box::new(SmoothedBalance::new(
            n,
            tau.floor(),
            gap_reduce_rounds(n, &total, c1, k),
            smoothed_calls(&total, &tau),
        )),
        AlgorithmKind::GaplessGapReduce => {
            let psi = match cfg.algorithm.psi {
                Some(p) => BigInt::from(p),
                None => max_gap(loads.loads()).floor(),
            };
            Box::new(GaplessGapReduce::new(psi, gapless_call_rounds(n, &total, c1, k)))
        }
        AlgorithmKind::GaplessBalance => {
            Box::new(GaplessBalance::new(&total.floor(), &tau.floor(), gapless_call_rounds(n, &total, c1, k)))
        }
        AlgorithmKind::ContinuousViaIntegral => Box::new(ContinuousViaIntegral::new(loads, &tau, c1, k)?),
    })
}

fn keep_row(level: TraceLevel, round: u64) -> bool {
    match level {
        TraceLevel::Full => true,
        TraceLevel::Sampled(stride) => round % stride == 0,
        TraceLevel::Summary => round == 0,
    }
}

fn push_history(history: &mut Vec<Arc<Graph>>, depth: HistoryDepth, g: &Arc<Graph>) {
    match depth {
        HistoryDepth::None => {}
        HistoryDepth::Last(m) => {
            history.push(Arc::clone(g));
            if history.len() > m {
                let excess = history.len() - m;
                history.drain(..excess);
            }
        }
        HistoryDepth::Full => history.push(Arc::clone(g)),
    }
}

pub fn run_trial(cfg: &ScenarioConfig, seed: u64) -> Result<TrialResult, EngineError> {
    run_trial_with(cfg, seed, EngineOptions::default())
}

pub fn run_trial_with(cfg: &ScenarioConfig, seed: u64, opts: EngineOptions) -> Result<TrialResult, EngineError> {
    cfg.validate()?;
    let n = cfg.n;
    let mut loads = cfg.initial_loads(seed)?;
    cfg.validate_generated(&loads)?;
    let initial_total = total_load(&loads);
    let tau = cfg.tau_dyadic();
    let budget = cfg.budget_for(&loads);
    let checks = cfg.checks.clone();
    let stride = cfg.check_stride.unwrap_or(1);
    let level = cfg.trace_level;

    let mut adversary = Adversary::new(cfg.adversary.policy(n)?, n, stream(seed, Stream::Adversary))?;
    let depth = adversary.policy().history_depth();
    let smoothing = SmoothingParams { k: cfg.k.clone(), max_rejections: cfg.max_rejections() };
    let mut protocol = build_protocol(cfg, &loads)?;

    let mut past_adv: Vec<Arc<Graph>> = Vec::new();
    let mut past_smoothed: Vec<Arc<Graph>> = Vec::new();
    let mut last_matching: Vec<Connection> = Vec::new();
    let mut prefix_baseline: Option<Vec<BigInt>> = None;

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut reports = Vec::new();
    let mut violation_counts: BTreeMap<CheckKind, u64> = BTreeMap::new();
    let mut first_violation = None;

    let converged_now = |s: &LoadState| max_gap(s.loads()) <= tau;
    let mut converged_since = if converged_now(&loads) { Some(0) } else { None };
    rows.push(RoundRow {
        round: 0,
        phi: potential_of(&loads),
        max_gap: max_gap(loads.loads()),
        d_r: Dyadic::zero(),
        connections: 0,
        converged: converged_since.is_some(),
        checks: vec![None; checks.len()],
    });

    let mut round = 0u64;
    let mut skipped = 0u64;
    let mut last_row_round = 0u64;
    let mut last_row: Option<RoundRow> = None;
    while round < budget && !(cfg.stop_on_converge && converged_since.is_some()) {
        if opts.fast_forward {
            let idle = protocol.idle_rounds(&loads).min(budget - round);
            if idle > 0 {
                protocol.skip(idle);
                round += idle;
                skipped += idle;
                continue;
            }
        }
        round += 1;
        adversary.reseed(round_stream(seed, Stream::Adversary, round));
        let mut smoothing_rng = round_stream(seed, Stream::Smoothing, round);
        let mut algorithm_rng = round_stream(seed, Stream::Algorithm, round);
        let g_adv = {
            let ctx = AdversaryContext {
                round,
                past_adv_graphs: &past_adv,
                past_smoothed_graphs: &past_smoothed,
                current_loads: &loads,
                last_matching: &last_matching,
            };
            adversary.next_graph(&ctx)?
        };
        if g_adv.node_count() != n || !g_adv.is_connected() {
            return Err(EngineError::DisallowedGraph { round });
        }
        let g_adv = Arc::new(g_adv);
        let graph = if cfg.k.is_zero() {
            Arc::clone(&g_adv)
        } else {
            let s = k_smooth(&g_adv, &smoothing, &mut smoothing_rng)
                .map_err(|source| EngineError::Smoothing { round, source })?;
            Arc::new(s.graph)
        };

        let halves_before = loads.split().map(<[_]>::to_vec);
        let step = protocol.step(&loads, &graph, &mut algorithm_rng)?;
        let mut after = step.loads;
        if let Some(h) = protocol.halves() {
            after = after.with_split(h)?;
        }
        let outcome = step.outcome;
        let d_r = shifted_dr(&outcome.connections);

        let mut check_cells = vec![None; checks.len()];
        if !checks.is_empty() {
            let line = adversary.line_order().map(<[_]>::to_vec);
            if prefix_baseline.is_none() && checks.contains(&CheckKind::PrefixMonotone) {
                prefix_baseline = line.as_ref().map(|l| prefix_sums(l, &loads));
            }
            if round % stride == 0 || round == 1 {
                let view = RoundView {
                    round,
                    before: &loads,
                    after: &after,
                    graph: &graph,
                    outcome: &outcome,
                    budget: protocol.connection_budget(),
                    halves: halves_before.as_deref(),
                    line: match (&line, &prefix_baseline) {
                        (Some(l), Some(b)) => Some((l.as_slice(), b.as_slice())),
                        _ => None,
                    },
                };
                let report = check_round(&view, &checks);
                for res in &report.results {
                    let idx = checks.iter().position(|c| *c == res.kind).expect("requested check");
                    check_cells[idx] = Some(res.violations);
                    if res.violations > 0 {
                        *violation_counts.entry(res.kind).or_insert(0) += res.violations;
                        if first_violation.is_none() {
                            first_violation = Some(Violation {
                                round,
                                check: res.kind,
                                witness: res.witness.clone().expect("failed check has a witness"),
                            });
                        }
                    }
                }
                if level == TraceLevel::Full || !report.passed() {
                    reports.push(report);
                }
            }
        }

        let violated = check_cells.iter().any(|c| c.is_some_and(|v| v > 0));
        loads = after;
        if converged_now(&loads) {
            converged_since.get_or_insert(round);
        } else {
            converged_since = None;
        }
        let row = RoundRow {
            round,
            phi: potential_of(&loads),
            max_gap: max_gap(loads.loads()),
            d_r: d_r.clone(),
            connections: outcome.connections.len(),
            converged: converged_since.is_some(),
            checks: check_cells,
        };
        if level == TraceLevel::Full {
            traces.push(RoundTrace {
                round,
                graph: (*graph).clone(),
                matching: outcome.connections.clone(),
                phi: row.phi.clone(),
                max_gap: row.max_gap.clone(),
                d_r,
            });
        }
        if keep_row(level, round) || violated {
            last_row_round = round;
            rows.push(row);
        } else {
            last_row = Some(row);
        }

        push_history(&mut past_adv, depth, &g_adv);
        push_history(&mut past_smoothed, depth, &graph);
        last_matching = outcome.connections;
    }

    if let Some(row) = last_row.filter(|r| r.round > last_row_round) {
        rows.push(row);
    }
    let final_gap = max_gap(loads.loads());
    // A skipped tail leaves the state as it was after the last executed round.
    if let Some(last) = rows.last() {
        if last.round < round {
            let mut tail = last.clone();
            tail.round = round;
            tail.d_r = Dyadic::zero();
            tail.connections = 0;
            tail.checks = vec![None; checks.len()];
            tail.converged = converged_since.is_some();
            rows.push(tail);
        }
    }
    Ok(TrialResult {
        seed,
        converged_at_round: converged_since,
        final_gap,
        final_loads: loads,
        initial_total,
        rounds: round,
        budget,
        skipped_rounds: skipped,
        checks,
        rows,
        traces,
        reports,
        violation_counts,
        first_violation,
        summary: protocol.summary(),
    })
}

/// Aggregate statistics over the trials of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub trials: u64,
    pub converged: u64,
    pub success_fraction: f64,
    /// 95% Wilson score interval for the success fraction.
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub min_rounds: Option<u64>,
    pub median_rounds: Option<u64>,
    pub mean_rounds: Option<f64>,
    pub max_rounds: Option<u64>,
    pub invariant_failures: u64,
    pub max_final_gap: Dyadic,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
    pub aggregate: Aggregate,
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn aggregate(trials: &[TrialResult]) -> Aggregate {
    let count = trials.len() as u64;
    let mut conv: Vec<u64> = trials.iter().filter_map(|t| t.converged_at_round).collect();
    conv.sort_unstable();
    let converged = conv.len() as u64;
    let (wilson_low, wilson_high) = wilson_interval(converged, count, 1.96);
    Aggregate {
        trials: count,
        converged,
        success_fraction: if count == 0 { 0.0 } else { converged as f64 / count as f64 },
        wilson_low,
        wilson_high,
        min_rounds: conv.first().copied(),
        median_rounds: conv.get(conv.len().saturating_sub(1) / 2).copied(),
        mean_rounds: if conv.is_empty() { None } else { Some(conv.iter().sum::<u64>() as f64 / conv.len() as f64) },
        max_rounds: conv.last().copied(),
        invariant_failures: trials.iter().map(TrialResult::total_violations).sum(),
        max_final_gap: trials.iter().map(|t| t.final_gap.clone()).max().unwrap_or_default(),
    }
}

/// Runs `cfg.trials` trials with seeds `cfg.seed, cfg.seed + 1, …`. Results
/// are in seed order whatever the execution; the first failing seed's
/// error is returned.
pub fn run_experiment(cfg: &ScenarioConfig, exec: Execution) -> Result<ExperimentResult, EngineError> {
    run_experiment_with(cfg, exec, EngineOptions::default())
}

pub fn run_experiment_with(
    cfg: &ScenarioConfig,
    exec: Execution,
    opts: EngineOptions,
) -> Result<ExperimentResult, EngineError> {
    cfg.validate()?;
    let results = map_indexed(cfg.trials as usize, exec, |i| run_trial_with(cfg, cfg.seed.wrapping_add(i as u64), opts));
    let trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let aggregate = aggregate(&trials);
    Ok(ExperimentResult { trials, aggregate })
}
