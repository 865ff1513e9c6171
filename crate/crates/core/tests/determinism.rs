use dynbal::config::parse_config;
use dynbal::engine::{run_experiment, run_trial_with, EngineOptions};
use dynbal::output::trial_csv_string;
use dynbal::parallel::Execution;

const SCENARIOS: [&str; 3] = [
    r#"{"n":8,"initialLoads":{"name":"uniformRandom","maxValue":"16"},"mode":"continuous","tau":"0.25","k":"1",
       "adversary":"sortingLine","algorithm":"continuousViaIntegral","seed":11,"trials":6,"traceLevel":"full",
       "checks":["conservation","matchingBudget","flooding"]}"#,
    r#"{"n":6,"initialLoads":["9","0","4","1","0","2"],"mode":"integral","tau":"1","k":"0",
       "adversary":{"name":"randomConnected","edgeProbability":"0.4"},"algorithm":"randMaxNeighbor","seed":2,
       "trials":5,"roundBudget":200,"traceLevel":{"name":"sampled","stride":10},"checks":["conservation","integrality"]}"#,
    r#"{"n":8,"initialLoads":{"name":"singleSource","total":"128"},"mode":"integral","tau":"1","k":"0.5",
       "adversary":"resortDescending","algorithm":"gaplessBalance","seed":4,"trials":6}"#,
];

#[test]
fn execution_mode_does_not_change_results() {
    for text in SCENARIOS {
        let cfg = parse_config(text).unwrap();
        let seq = run_experiment(&cfg, Execution::Sequential).unwrap();
        let par = run_experiment(&cfg, Execution::Parallel).unwrap();
        let capped = run_experiment(&cfg, Execution::ParallelCapped(2)).unwrap();
        assert_eq!(seq.aggregate, par.aggregate);
        assert_eq!(seq.aggregate, capped.aggregate);
        for (a, b) in seq.trials.iter().zip(&par.trials) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.final_loads, b.final_loads);
            assert_eq!(trial_csv_string(a), trial_csv_string(b));
        }
    }
}

#[test]
fn trials_use_consecutive_seeds() {
    let cfg = parse_config(SCENARIOS[2]).unwrap();
    let e = run_experiment(&cfg, Execution::Sequential).unwrap();
    let seeds: Vec<u64> = e.trials.iter().map(|t| t.seed).collect();
    assert_eq!(seeds, (4..10).collect::<Vec<_>>());
    assert!(e.trials.iter().all(|t| t.conserved()));
}

#[test]
fn fast_forward_does_not_change_outcomes() {
    let texts = [
        SCENARIOS[2],
        r#"{"n":8,"initialLoads":{"name":"singleSource","total":"128"},"mode":"integral","tau":"1","k":"0.5",
           "adversary":"sortingLine","algorithm":"smoothedBalance","seed":0,"checks":["conservation","stepSafety"]}"#,
        SCENARIOS[0],
    ];
    for text in texts {
        let cfg = parse_config(text).unwrap();
        for seed in 0..4 {
            let fast = run_trial_with(&cfg, seed, EngineOptions { fast_forward: true }).unwrap();
            let slow = run_trial_with(&cfg, seed, EngineOptions { fast_forward: false }).unwrap();
            assert_eq!(slow.skipped_rounds, 0);
            assert_eq!(fast.converged_at_round, slow.converged_at_round, "seed {seed}");
            assert_eq!(fast.final_loads, slow.final_loads, "seed {seed}");
            assert_eq!(fast.total_violations(), slow.total_violations());
        }
    }
}
