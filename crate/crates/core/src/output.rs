//! CSV emission. Dyadic values are written as exact decimals.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::engine::{Aggregate, ExperimentResult, TrialResult};

fn csv_err(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

pub fn trial_header(result: &TrialResult) -> Vec<String> {
    let mut h: Vec<String> =
        ["round", "phi", "max_gap", "d_r", "connections", "converged"].iter().map(|s| s.to_string()).collect();
    h.extend(result.checks.iter().map(|c| c.column().to_string()));
    h
}

/// One row per retained round, round 0 holding the initial state. Check
/// cells hold the violation count, empty when the check was not evaluated.
pub fn write_trial_csv<W: Write>(result: &TrialResult, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trial_header(result)).map_err(csv_err)?;
    for row in &result.rows {
        let mut rec = vec![
            row.round.to_string(),
            row.phi.to_decimal_string(),
            row.max_gap.to_decimal_string(),
            row.d_r.to_decimal_string(),
            row.connections.to_string(),
            row.converged.to_string(),
        ];
        rec.extend(row.checks.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
}

pub fn trial_csv_string(result: &TrialResult) -> String {
    let mut buf = Vec::new();
    write_trial_csv(result, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-trial summary table.
pub fn write_trials_csv<W: Write>(trials: &[TrialResult], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "converged",
        "converged_at_round",
        "rounds",
        "budget",
        "skipped_rounds",
        "final_gap",
        "conserved",
        "invariant_failures",
    ])
    .map_err(csv_err)?;
    for t in trials {
        w.write_record([
            t.seed.to_string(),
            t.converged().to_string(),
            opt(t.converged_at_round),
            t.rounds.to_string(),
            t.budget.to_string(),
            t.skipped_rounds.to_string(),
            t.final_gap.to_decimal_string(),
            t.conserved().to_string(),
            t.total_violations().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

/// Experiment statistics as `statistic,value` pairs.
pub fn write_aggregate_csv<W: Write>(agg: &Aggregate, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "value"]).map_err(csv_err)?;
    let rows = [
        ("trials", agg.trials.to_string()),
        ("converged", agg.converged.to_string()),
        ("success_fraction", agg.success_fraction.to_string()),
        ("wilson_low", agg.wilson_low.to_string()),
        ("wilson_high", agg.wilson_high.to_string()),
        ("min_rounds", opt(agg.min_rounds)),
        ("median_rounds", opt(agg.median_rounds)),
        ("mean_rounds", opt(agg.mean_rounds)),
        ("max_rounds", opt(agg.max_rounds)),
        ("invariant_failures", agg.invariant_failures.to_string()),
        ("max_final_gap", agg.max_final_gap.to_decimal_string()),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).map_err(csv_err)?;
    }
    w.flush()
}

/// Writes `trial_<seed>.csv` per trial, `trials.csv` and `aggregate.csv` into `dir`.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for t in &result.trials {
        write_trial_csv(t, fs::File::create(dir.join(format!("trial_{}.csv", t.seed)))?)?;
    }
    write_trials_csv(&result.trials, fs::File::create(dir.join("trials.csv"))?)?;
    write_aggregate_csv(&result.aggregate, fs::File::create(dir.join("aggregate.csv"))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::engine::run_trial;

    #[test]
    fn header_and_initial_row() {
        let text = r#"{"n":3,"initialLoads":["0","1","3"],"mode":"continuous","tau":"0.5","k":"0",
            "adversary":{"name":"static","graph":"path"},"algorithm":"deterministic","seed":0,
            "checks":["conservation","potentialDrop"],"traceLevel":"full"}"#;
        let cfg = parse_config(text).unwrap();
        let r = run_trial(&cfg, 0).unwrap();
        let csv = trial_csv_string(&r);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("round,phi,max_gap,d_r,connections,converged,conservation,potential_drop"));
        assert_eq!(lines.next(), Some("0,6,3,0,0,false,,"));
        let last = csv.lines().last().unwrap();
        assert!(last.contains(",true,0,0"), "{last}");
    }
}
