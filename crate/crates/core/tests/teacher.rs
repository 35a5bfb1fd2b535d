use std::sync::Arc;

use interrl::harness::oracle_for;
use interrl::teacher::query;
use interrl::{EnvKind, OracleParams, RunConfig, RunSeed, StateId, Strategy, Stream, TeacherQ};

const QUERIES: usize = 100_000;

fn oracle() -> Arc<TeacherQ> {
    let cfg = RunConfig {
        oracle_episodes: 3_000,
        ..RunConfig::defaults(EnvKind::Pacman)
    };
    Arc::new(oracle_for(&cfg).unwrap())
}

/// Emission rate and correctness over `QUERIES` queries spread over states.
fn calibrate(oracle: &TeacherQ, likelihood: f64, consistency: f64) -> (usize, usize) {
    let params = OracleParams {
        likelihood,
        consistency,
        strategy: Strategy::Sporadic,
        r_h: 10.0,
        q_access: false,
        disable_at: None,
    };
    let states = oracle.table().state_count() as u32;
    let mut rng = RunSeed(99).stream(Stream::Teacher);
    let (mut emitted, mut correct) = (0, 0);
    for i in 0..QUERIES {
        let s = StateId(i as u32 % states);
        if let Some(sig) = query(oracle, &params, s, 0, 1, &mut rng) {
            emitted += 1;
            if sig.suggested == oracle.best(s) {
                correct += 1;
            }
        }
    }
    (emitted, correct)
}

fn within_3_sigma(hits: usize, n: usize, p: f64) -> bool {
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    (hits as f64 / n as f64 - p).abs() <= 3.0 * sd
}

#[test]
fn rates_match_likelihood_and_consistency() {
    let oracle = oracle();
    for (l, c) in [(0.01, 0.8), (0.1, 0.8), (1.0, 0.5), (0.5, 0.95)] {
        let (emitted, correct) = calibrate(&oracle, l, c);
        assert!(within_3_sigma(emitted, QUERIES, l), "L={l}: {emitted} of {QUERIES}");
        assert!(within_3_sigma(correct, emitted, c), "C={c}: {correct} of {emitted}");
    }
}

#[test]
fn full_and_zero_settings_are_exact() {
    let oracle = oracle();
    assert_eq!(calibrate(&oracle, 1.0, 1.0), (QUERIES, QUERIES));
    assert_eq!(calibrate(&oracle, 0.0, 1.0).0, 0);
    assert_eq!(calibrate(&oracle, 1.0, 0.0).1, 0);
}
