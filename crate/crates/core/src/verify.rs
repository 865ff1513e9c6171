//! Built-in verification suite: the acceptance experiments at a fast
//! (small `n`) or full scale, plus a runner for directories of configs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{
    parse_config, AdversarySpec, AlgorithmKind, ConfigError, GeneratorSpec, GraphSpec, InitialLoads, LoadGenerator,
    NamedGraph, ScenarioConfig, TraceLevel,
};
use crate::dyadic::Dyadic;
use crate::engine::{run_experiment, wilson_interval, EngineError, ExperimentResult};
use crate::graph::Graph;
use crate::load::LoadMode;
use crate::metrics::CheckKind;
use crate::parallel::Execution;
use crate::smoothing::uniformity_test;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} [{}] {}: {}", self.id, self.title, self.detail)
    }
}

fn report(id: &str, title: &str, passed: bool, detail: String) -> CriterionReport {
    CriterionReport { id: id.to_string(), title: title.to_string(), passed, detail }
}

fn errored(id: &str, title: &str, e: impl fmt::Display) -> CriterionReport {
    report(id, title, false, format!("error: {e}"))
}

fn single_source(total: u64) -> InitialLoads {
    InitialLoads::Generator(GeneratorSpec {
        name: LoadGenerator::SingleSource,
        total: Some(total.to_string().parse().expect("integer")),
        max_value: None,
        fraction_bits: None,
    })
}

fn explicit(v: impl IntoIterator<Item = u64>) -> InitialLoads {
    InitialLoads::Explicit(v.into_iter().map(Dyadic::from).collect())
}

fn deterministic_adversaries() -> Vec<AdversarySpec> {
    vec![
        AdversarySpec::Static(GraphSpec::Named(NamedGraph::Path)),
        AdversarySpec::Static(GraphSpec::Named(NamedGraph::Star)),
        AdversarySpec::ResortDescending,
        AdversarySpec::RandomConnected { edge_probability: "0.1".parse().expect("decimal") },
    ]
}

fn adversary_label(a: &AdversarySpec) -> String {
    match a {
        AdversarySpec::Static(GraphSpec::Named(g)) => format!("static {g:?}").to_lowercase(),
        other => other.name().to_string(),
    }
}

const LEMMA_CHECKS: [CheckKind; 5] = [
    CheckKind::Conservation,
    CheckKind::PotentialDrop,
    CheckKind::ShiftLowerBound,
    CheckKind::CoveringEdge,
    CheckKind::SplitPotential,
];

/// Deterministic convergence within budget, and the exact per-round lemmas
/// on the same runs.
pub fn deterministic_criteria(level: Level, exec: Execution) -> [CriterionReport; 2] {
    let (ns, seeds): (&[usize], u64) = match level {
        Level::Fast => (&[4, 8], 2),
        Level::Full => (&[4, 8, 16], 5),
    };
    let t1 = "deterministic convergence budget";
    let t2 = "exact per-round lemma suite";
    let mut runs = 0u64;
    let mut rounds_checked = 0u64;
    let mut unconverged = Vec::new();
    let mut violations = Vec::new();
    for &n in ns {
        for total in [64u64, 256] {
            for adv in deterministic_adversaries() {
                let tau = (total / n as u64).to_string();
                let mut cfg = ScenarioConfig::new(
                    n,
                    single_source(total),
                    LoadMode::Continuous,
                    &tau,
                    "0",
                    adv.clone(),
                    AlgorithmKind::Deterministic,
                );
                cfg.trials = seeds;
                cfg.seed = 1000 + n as u64;
                cfg.checks = LEMMA_CHECKS.to_vec();
                let e = match run_experiment(&cfg, exec) {
                    Ok(e) => e,
                    Err(err) => return [errored("det-budget", t1, &err), errored("det-lemmas", t2, &err)],
                };
                for t in &e.trials {
                    runs += 1;
                    rounds_checked += t.rounds;
                    if !t.converged() {
                        unconverged.push(format!("n={n} T={total} {} seed {}", adversary_label(&adv), t.seed));
                    }
                    if let Some(v) = &t.first_violation {
                        violations.push(format!(
                            "n={n} T={total} {} seed {} round {}: {} ({})",
                            adversary_label(&adv),
                            t.seed,
                            v.round,
                            v.check,
                            v.witness
                        ));
                    }
                }
            }
        }
    }
    let budget = report(
        "det-budget",
        t1,
        unconverged.is_empty(),
        if unconverged.is_empty() {
            format!("{runs} runs, all tau-converged within budget")
        } else {
            format!("{} of {runs} runs missed the budget: {}", unconverged.len(), unconverged.join("; "))
        },
    );
    let lemmas = report(
        "det-lemmas",
        t2,
        violations.is_empty(),
        if violations.is_empty() {
            format!("{rounds_checked} rounds over {runs} runs, zero violations")
        } else {
            format!("{} runs with violations, first: {}", violations.len(), violations[0])
        },
    );
    [budget, lemmas]
}

/// Matching-based integral balancing stays stuck against the sorting line.
pub fn impossibility_criterion(level: Level, exec: Execution) -> CriterionReport {
    let title = "impossibility against the sorting line";
    let (rounds, seeds) = match level {
        Level::Fast => (10_000u64, 4u64),
        Level::Full => (100_000, 10),
    };
    let n = 8;
    let mut cfg = ScenarioConfig::new(
        n,
        InitialLoads::Generator(GeneratorSpec { name: LoadGenerator::LineRamp, total: None, max_value: None, fraction_bits: None }),
        LoadMode::Integral,
        "1",
        "0",
        AdversarySpec::SortingLine,
        AlgorithmKind::RandMaxNeighbor,
    );
    cfg.round_budget = Some(rounds);
    cfg.trials = seeds;
    cfg.seed = 7;
    cfg.checks = vec![CheckKind::PrefixMonotone, CheckKind::Conservation, CheckKind::MatchingBudget, CheckKind::Integrality];
    cfg.trace_level = TraceLevel::Sampled(1);
    let e = match run_experiment(&cfg, exec) {
        Ok(e) => e,
        Err(err) => return errored("sorting-line", title, err),
    };
    let floor = Dyadic::from((n - 1) as u64);
    let mut problems = Vec::new();
    for t in &e.trials {
        if t.rows.len() as u64 != rounds + 1 {
            problems.push(format!("seed {} recorded {} rows", t.seed, t.rows.len()));
        }
        if let Some(row) = t.rows.iter().find(|r| r.max_gap < floor) {
            problems.push(format!("seed {} round {} gap {}", t.seed, row.round, row.max_gap));
        }
        if let Some(v) = &t.first_violation {
            problems.push(format!("seed {} round {}: {} ({})", t.seed, v.round, v.check, v.witness));
        }
    }
    let min_gap = e.trials.iter().flat_map(|t| t.rows.iter().map(|r| r.max_gap.clone())).min().unwrap_or_default();
    report(
        "sorting-line",
        title,
        problems.is_empty(),
        if problems.is_empty() {
            format!("{seeds} seeds x {rounds} rounds: min gap {min_gap} >= {floor}, prefix invariant exact")
        } else {
            problems.join("; ")
        },
    )
}

fn ramp(n: usize, psi: u64) -> InitialLoads {
    explicit((0..n as u64).map(|i| psi * i / (n as u64 - 1)))
}

/// One GapReduce call contracts the gap to `3ψ/4` in most trials.
pub fn contraction_criterion(level: Level, exec: Execution) -> CriterionReport {
    let title = "single GapReduce call contracts the gap";
    let (n, psi, k, trials) = match level {
        Level::Fast => (8usize, 32u64, "0.5", 20u64),
        Level::Full => (16, 64, "1", 100),
    };
    let mut cfg = ScenarioConfig::new(n, ramp(n, psi), LoadMode::Integral, "1", k, AdversarySpec::SortingLine, AlgorithmKind::GapReduce);
    cfg.trials = trials;
    cfg.seed = 40;
    cfg.stop_on_converge = false;
    cfg.checks = vec![CheckKind::Conservation, CheckKind::StepSafety, CheckKind::Flooding, CheckKind::MatchingBudget];
    let e = match run_experiment(&cfg, exec) {
        Ok(e) => e,
        Err(err) => return errored("contraction", title, err),
    };
    let target = Dyadic::from(3 * psi / 4);
    let good = e.trials.iter().filter(|t| t.final_gap <= target).count() as u64;
    fraction_report("contraction", title, good, &e, &format!("final gap <= {target}"))
}

fn fraction_report(id: &str, title: &str, good: u64, e: &ExperimentResult, what: &str) -> CriterionReport {
    let trials = e.trials.len() as u64;
    let failures = e.aggregate.invariant_failures;
    let passed = good * 10 >= trials * 9 && failures == 0;
    let (lo, hi) = wilson_interval(good, trials, 1.96);
    let mut detail =
        format!("{good}/{trials} trials with {what} (need 90%), Wilson [{lo:.3}, {hi:.3}], invariant failures {failures}");
    if let Some(v) = e.trials.iter().find_map(|t| t.first_violation.as_ref()) {
        detail.push_str(&format!("; first: round {} {} ({})", v.round, v.check, v.witness));
    }
    report(id, title, passed, detail)
}

/// Smoothed balancing, and its flooding-free variant, reach 1-convergence.
pub fn smoothed_criterion(level: Level, exec: Execution) -> CriterionReport {
    let title = "full smoothed balancing";
    let (n, total, k, trials) = match level {
        Level::Fast => (8usize, 64u64, "0.5", 10u64),
        Level::Full => (16, 1024, "1", 50),
    };
    let mut details = Vec::new();
    let mut passed = true;
    for kind in [AlgorithmKind::SmoothedBalance, AlgorithmKind::GaplessBalance] {
        let mut cfg = ScenarioConfig::new(n, single_source(total), LoadMode::Integral, "1", k, AdversarySpec::SortingLine, kind);
        cfg.trials = trials;
        cfg.seed = 500;
        cfg.checks = vec![CheckKind::Conservation, CheckKind::MatchingBudget, CheckKind::Integrality];
        if kind == AlgorithmKind::SmoothedBalance {
            cfg.checks.extend([CheckKind::StepSafety, CheckKind::Flooding]);
        }
        let e = match run_experiment(&cfg, exec) {
            Ok(e) => e,
            Err(err) => return errored("smoothed", title, err),
        };
        let good = e.trials.iter().filter(|t| t.converged()).count() as u64;
        let r = fraction_report("smoothed", title, good, &e, "1-convergence within budget");
        passed &= r.passed;
        details.push(format!("{}: {}", kind.name(), r.detail));
    }
    report("smoothed", title, passed, details.join(" | "))
}

/// The k-smoothing sampler is uniform over the connected Hamming ball.
pub fn uniformity_criterion(_level: Level, exec: Execution) -> CriterionReport {
    let title = "sampler uniformity";
    let samples = 100_000usize;
    let bases = [("path", Graph::path(4)), ("star", Graph::star(4)), ("cycle", Graph::cycle(4))];
    let mut worst = 0.0f64;
    let mut outside = 0usize;
    let mut details = Vec::new();
    for (name, g) in &bases {
        for radius in [1u64, 2] {
            match uniformity_test(g, radius, samples, 60 + radius, exec) {
                Ok(r) => {
                    worst = worst.max(r.total_variation);
                    outside += r.outside_ball;
                    details.push(format!("{name} t={radius}: TV {:.4} over {} graphs", r.total_variation, r.ball_size));
                }
                Err(e) => return errored("uniformity", title, e),
            }
        }
    }
    report(
        "uniformity",
        title,
        worst <= 0.02 && outside == 0,
        format!("{samples} samples each, {outside} outside the ball; {}", details.join(", ")),
    )
}

/// The continuous reduction reaches `τ` and conserves load exactly.
pub fn continuous_criterion(level: Level, exec: Execution) -> CriterionReport {
    let title = "continuous reduction through tau/2 units";
    let trials = match level {
        Level::Fast => 10u64,
        Level::Full => 50,
    };
    let loads = InitialLoads::Generator(GeneratorSpec {
        name: LoadGenerator::UniformRandom,
        total: None,
        max_value: Some("16".parse().expect("decimal")),
        fraction_bits: Some(8),
    });
    let mut cfg = ScenarioConfig::new(
        8,
        loads,
        LoadMode::Continuous,
        "0.25",
        "1",
        AdversarySpec::SortingLine,
        AlgorithmKind::ContinuousViaIntegral,
    );
    cfg.trials = trials;
    cfg.seed = 700;
    cfg.checks = vec![CheckKind::Conservation, CheckKind::MatchingBudget, CheckKind::Flooding];
    let e = match run_experiment(&cfg, exec) {
        Ok(e) => e,
        Err(err) => return errored("continuous", title, err),
    };
    let tau = cfg.tau_dyadic();
    let good = e.trials.iter().filter(|t| t.final_gap <= tau && t.conserved()).count() as u64;
    let all_conserved = e.trials.iter().all(|t| t.conserved());
    let mut r = fraction_report("continuous", title, good, &e, "gap <= 1/4 and exact conservation");
    r.passed &= all_conserved;
    r
}

/// Every acceptance criterion at `level`, in order.
pub fn run_suite(level: Level, exec: Execution) -> Vec<CriterionReport> {
    let mut out = Vec::new();
    out.extend(deterministic_criteria(level, exec));
    out.push(impossibility_criterion(level, exec));
    out.push(contraction_criterion(level, exec));
    out.push(smoothed_criterion(level, exec));
    out.push(uniformity_criterion(level, exec));
    out.push(continuous_criterion(level, exec));
    out
}

#[derive(Debug)]
pub enum DirError {
    Io(PathBuf, std::io::Error),
    NoScenarios(PathBuf),
    Config(PathBuf, ConfigError),
}

impl fmt::Display for DirError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            DirError::NoScenarios(p) => write!(f, "no scenarios found in {}", p.display()),
            DirError::Config(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for DirError {}

/// Outcome of one config file: experiment result or engine failure.
pub struct ScenarioOutcome {
    pub path: PathBuf,
    pub result: Result<ExperimentResult, EngineError>,
}

impl ScenarioOutcome {
    pub fn report(&self) -> CriterionReport {
        let id = self.path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match &self.result {
            Ok(e) => {
                let a = &e.aggregate;
                report(
                    &id,
                    "scenario",
                    a.invariant_failures == 0,
                    format!("{}/{} converged, invariant failures {}", a.converged, a.trials, a.invariant_failures),
                )
            }
            Err(err) => errored(&id, "scenario", err),
        }
    }
}

/// Parses every `*.json` file in `dir` (sorted by name) and runs it.
pub fn run_directory(dir: &Path, exec: Execution) -> Result<Vec<ScenarioOutcome>, DirError> {
    let entries = fs::read_dir(dir).map_err(|e| DirError::Io(dir.to_path_buf(), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DirError::NoScenarios(dir.to_path_buf()));
    }
    let mut configs = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| DirError::Io(p.clone(), e))?;
        let cfg = parse_config(&text).map_err(|e| DirError::Config(p.clone(), e))?;
        configs.push((p, cfg));
    }
    Ok(configs
        .into_iter()
        .map(|(path, cfg)| ScenarioOutcome { result: run_experiment(&cfg, exec), path })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directory_has_no_scenarios() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_directory(dir.path(), Execution::Sequential).err().unwrap();
        assert!(err.to_string().starts_with("no scenarios found"));
    }

    #[test]
    fn ramp_endpoints() {
        let InitialLoads::Explicit(v) = ramp(16, 64) else { panic!() };
        assert_eq!(v.first(), Some(&Dyadic::zero()));
        assert_eq!(v.last(), Some(&Dyadic::from(64u64)));
    }
}
