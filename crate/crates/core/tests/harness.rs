use interrl::harness::{
    emit_csv, read_csv, run_experiment, summarize, CombinationResult, OracleCache, SweepSpec, Threshold,
};
use interrl::{EnvKind, Method, MethodId, RunConfig};

fn small(env: EnvKind) -> SweepSpec {
    let mut spec = SweepSpec::single(RunConfig {
        episodes: 40,
        runs: 3,
        seed: 21,
        oracle_episodes: 200,
        ..RunConfig::defaults(env)
    });
    spec.methods = vec![
        Method::Fixed(MethodId::Q),
        Method::Fixed(MethodId::RS),
        Method::Adaptive,
    ];
    spec.likelihoods = vec![0.2, 1.0];
    spec
}

fn csv_bytes(r: &CombinationResult) -> Vec<u8> {
    let mut out = Vec::new();
    emit_csv(&r.table, &mut out).unwrap();
    out
}

#[test]
fn defaults_match_the_benchmark_budgets() {
    let p = RunConfig::defaults(EnvKind::Pacman);
    assert_eq!((p.episodes, p.runs), (30_000, 20));
    let c = RunConfig::defaults(EnvKind::Cartpole);
    assert_eq!((c.episodes, c.runs), (2_000, 20));
}

#[test]
fn smoke_spec_gives_ten_rows() {
    let spec = SweepSpec::parse("env = cartpole\nmethod = q\nruns = 1\nepisodes = 10\n").unwrap();
    let results = run_experiment(&spec, &mut OracleCache::new()).unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0].table.rows.len(), 10);
}

#[test]
fn same_spec_gives_identical_csv() {
    for env in [EnvKind::Cartpole, EnvKind::Pacman] {
        let spec = small(env);
        let a = run_experiment(&spec, &mut OracleCache::new()).unwrap();
        let b = run_experiment(&spec, &mut OracleCache::new()).unwrap();
        assert_eq!(a.len(), 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(csv_bytes(x), csv_bytes(y));
        }
    }
}

#[test]
fn combination_order_does_not_matter() {
    let spec = small(EnvKind::Cartpole);
    let mut reversed = spec.clone();
    reversed.methods.reverse();
    reversed.likelihoods.reverse();
    let mut cache = OracleCache::new();
    let a = run_experiment(&spec, &mut cache).unwrap();
    let b = run_experiment(&reversed, &mut cache).unwrap();
    for x in &a {
        let y = b.iter().find(|y| y.config == x.config).unwrap();
        assert_eq!(csv_bytes(x), csv_bytes(y));
    }
}

#[test]
fn csv_round_trips_and_probabilities_sum_to_one() {
    let spec = small(EnvKind::Cartpole);
    let results = run_experiment(&spec, &mut OracleCache::new()).unwrap();
    for r in &results {
        let back = read_csv(csv_bytes(r).as_slice()).unwrap();
        assert_eq!(back, r.table);
        let expected_cols = match r.config.method {
            Method::Adaptive => 4 + 2 * r.config.portfolio.len(),
            Method::Fixed(_) => 4,
        };
        assert_eq!(r.table.column_names().len(), expected_cols);
        if r.config.method == Method::Adaptive {
            for row in &r.table.rows {
                let total: f64 = row.probabilities.iter().sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
            let s = summarize(&r.table, &Threshold::for_env(EnvKind::Cartpole)).unwrap();
            let freq: f64 = s.selection.iter().map(|(_, p)| p).sum();
            assert!((freq - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn failing_combination_is_named() {
    let mut spec = small(EnvKind::Cartpole);
    spec.consistencies = vec![0.8, 1.5];
    let err = run_experiment(&spec, &mut OracleCache::new()).unwrap_err();
    assert!(err.to_string().contains('C'), "{err}");
}
