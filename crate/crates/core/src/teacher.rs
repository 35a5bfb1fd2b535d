//! Simulated teacher: a converged Q-learning agent whose greedy action is
//! treated as perfect advice, degraded by a feedback likelihood `L` and a
//! consistency `C`.
//!
//! Each query consumes exactly three teacher-stream draws (emit, correct,
//! pick) whether or not advice is given, so changing `L` or `C` never shifts
//! the draws of later queries.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::agent::{argmax, argmin, q_update, ActionDraw, LearnerParams, QTable};
use crate::domain::{Action, FeedbackOrigin, FeedbackSignal, StateId, Strategy};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::rng::{index_from_unit, unit, RunSeed, SimRng, Stream};
use crate::trainer::{FeedbackSource, StepContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    pub likelihood: f64,
    pub consistency: f64,
    pub strategy: Strategy,
    pub r_h: f64,
    pub q_access: bool,
    /// From this episode on the teacher always recommends its worst action.
    pub disable_at: Option<usize>,
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.likelihood) {
            return Err(Error::invalid(format!("L {} out of [0,1]", self.likelihood)));
        }
        if !(0.0..=1.0).contains(&self.consistency) {
            return Err(Error::invalid(format!("C {} out of [0,1]", self.consistency)));
        }
        if !(self.r_h > 0.0 && self.r_h.is_finite()) {
            return Err(Error::invalid(format!("r_h must be positive, got {}", self.r_h)));
        }
        Ok(())
    }
}

/// A frozen action-value table with cached best and worst actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherQ {
    table: QTable,
    best: Vec<usize>,
    worst: Vec<usize>,
}

impl TeacherQ {
    pub fn new(table: QTable) -> Self {
        let states = table.state_count();
        let (best, worst) = (0..states)
            .map(|s| {
                let row = table.row(StateId(s as u32));
                (argmax(row), argmin(row))
            })
            .unzip();
        Self { table, best, worst }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        self.table.row(s)
    }

    pub fn best(&self, s: StateId) -> Action {
        Action(self.best[s.index()])
    }

    pub fn worst(&self, s: StateId) -> Action {
        Action(self.worst[s.index()])
    }

    pub fn write_snapshot<W: Write>(&self, out: W) -> Result<()> {
        self.table.write_snapshot(out)
    }

    pub fn read_snapshot<R: BufRead>(input: R, states: usize, actions: usize) -> Result<Self> {
        QTable::read_snapshot(input, states, actions).map(Self::new)
    }
}

/// Trains a teacher with plain ε-greedy Q-learning for `episodes` episodes.
pub fn train_oracle(
    env: &mut dyn Environment,
    episodes: usize,
    params: &LearnerParams,
    seed: RunSeed,
) -> Result<TeacherQ> {
    params.validate()?;
    let mut env_rng = seed.stream(Stream::Environment);
    let mut agent_rng = seed.stream(Stream::Oracle);
    let mut q = QTable::new(env.state_count(), env.action_count());
    for _ in 0..episodes {
        let mut s = env.reset(&mut env_rng);
        loop {
            let a = ActionDraw::sample(&mut agent_rng).eps_greedy(q.row(s), params.epsilon);
            let t = env.step(a, &mut env_rng)?;
            q_update(&mut q, s, a, t.reward, t.state, t.terminal, params)?;
            if t.terminal {
                break;
            }
            s = t.state;
        }
    }
    Ok(TeacherQ::new(q))
}

/// Returns of `episodes` greedy episodes, each cut off after `max_steps`.
pub fn evaluate_greedy(
    oracle: &TeacherQ,
    env: &mut dyn Environment,
    episodes: usize,
    max_steps: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut s = env.reset(rng);
        let mut ret = 0.0;
        for _ in 0..max_steps {
            let t = env.step(oracle.best(s), rng)?;
            ret += t.reward;
            if t.terminal {
                break;
            }
            s = t.state;
        }
        returns.push(ret);
    }
    Ok(returns)
}

/// Per-step probability of advice in `episode` of a run of `total` episodes.
pub fn advice_probability(strategy: Strategy, likelihood: f64, episode: usize, total: usize) -> f64 {
    let window = (likelihood * total as f64).ceil() as usize;
    match strategy {
        Strategy::Sporadic => likelihood,
        Strategy::Early if episode < window => 1.0,
        Strategy::Late if episode + window >= total => 1.0,
        _ => 0.0,
    }
}

/// One teacher decision at state `s`. Consumes three draws from `rng`.
pub fn query(
    oracle: &TeacherQ,
    params: &OracleParams,
    s: StateId,
    episode: usize,
    total_episodes: usize,
    rng: &mut SimRng,
) -> Option<FeedbackSignal> {
    let emit = unit(rng);
    let correct = unit(rng);
    let pick = unit(rng);

    let p = advice_probability(params.strategy, params.likelihood, episode, total_episodes);
    if emit >= p {
        return None;
    }
    let row = oracle.row(s);
    let n = row.len();
    let best = oracle.best(s).0;
    let disabled = params.disable_at.is_some_and(|d| episode >= d);
    let suggested = if disabled {
        oracle.worst(s).0
    } else if correct < params.consistency || n == 1 {
        best
    } else {
        // Uniform over the actions that are not the teacher's choice.
        let k = index_from_unit(pick, n - 1);
        if k >= best {
            k + 1
        } else {
            k
        }
    };
    let value_row = params.q_access.then(|| {
        let mut v = row.to_vec();
        // Misleading rows keep the true values but move the best one onto
        // the suggested action.
        v.swap(best, suggested);
        v
    });
    Some(FeedbackSignal {
        suggested: Action(suggested),
        value_row,
        origin: FeedbackOrigin::Simulated,
    })
}

/// A teacher bound to one run: shared frozen table, own random stream.
#[derive(Debug, Clone)]
pub struct SimulatedTeacher {
    oracle: Arc<TeacherQ>,
    params: OracleParams,
    total_episodes: usize,
    rng: SimRng,
}

impl SimulatedTeacher {
    pub fn new(oracle: Arc<TeacherQ>, params: OracleParams, total_episodes: usize, seed: RunSeed) -> Self {
        Self {
            oracle,
            params,
            total_episodes,
            rng: seed.stream(Stream::Teacher),
        }
    }

    pub fn oracle(&self) -> &TeacherQ {
        &self.oracle
    }

    pub fn params(&self) -> &OracleParams {
        &self.params
    }
}

impl FeedbackSource for SimulatedTeacher {
    fn feedback(&mut self, ctx: &StepContext) -> Result<Option<FeedbackSignal>> {
        Ok(query(
            &self.oracle,
            &self.params,
            ctx.state,
            ctx.episode,
            self.total_episodes,
            &mut self.rng,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::cartpole::CartpoleEnv;

    fn toy_oracle() -> TeacherQ {
        let mut q = QTable::new(3, 4);
        q.row_mut(StateId(0)).copy_from_slice(&[1.0, 5.0, -2.0, 0.0]);
        q.row_mut(StateId(1)).copy_from_slice(&[3.0, 3.0, -7.0, -7.0]);
        TeacherQ::new(q)
    }

    fn params(l: f64, c: f64) -> OracleParams {
        OracleParams {
            likelihood: l,
            consistency: c,
            strategy: Strategy::Sporadic,
            r_h: 10.0,
            q_access: false,
            disable_at: None,
        }
    }

    #[test]
    fn caches_follow_tie_break() {
        let t = toy_oracle();
        assert_eq!(t.best(StateId(0)), Action(1));
        assert_eq!(t.worst(StateId(0)), Action(2));
        assert_eq!(t.best(StateId(1)), Action(0));
        assert_eq!(t.worst(StateId(1)), Action(2));
        assert_eq!(t.best(StateId(2)), Action(0));
    }

    #[test]
    fn advice_windows() {
        assert_eq!(advice_probability(Strategy::Early, 0.01, 100, 30_000), 1.0);
        assert_eq!(advice_probability(Strategy::Early, 0.01, 299, 30_000), 1.0);
        assert_eq!(advice_probability(Strategy::Early, 0.01, 300, 30_000), 0.0);
        assert_eq!(advice_probability(Strategy::Early, 0.01, 500, 30_000), 0.0);
        assert_eq!(advice_probability(Strategy::Sporadic, 0.1, 17, 30_000), 0.1);
        assert_eq!(advice_probability(Strategy::Late, 0.01, 1995, 2000), 1.0);
        assert_eq!(advice_probability(Strategy::Late, 0.01, 1980, 2000), 1.0);
        assert_eq!(advice_probability(Strategy::Late, 0.01, 1979, 2000), 0.0);
        assert_eq!(advice_probability(Strategy::Late, 0.0, 1999, 2000), 0.0);
    }

    #[test]
    fn zero_likelihood_is_silent() {
        let t = toy_oracle();
        let mut rng = RunSeed(1).stream(Stream::Teacher);
        for i in 0..10_000 {
            assert!(query(&t, &params(0.0, 1.0), StateId(i % 3), 0, 10, &mut rng).is_none());
        }
    }

    #[test]
    fn full_consistency_always_best() {
        let t = toy_oracle();
        let mut rng = RunSeed(2).stream(Stream::Teacher);
        for _ in 0..10_000 {
            let f = query(&t, &params(1.0, 1.0), StateId(0), 0, 10, &mut rng).unwrap();
            assert_eq!(f.suggested, Action(1));
            assert!(f.value_row.is_none());
            assert_eq!(f.origin, FeedbackOrigin::Simulated);
        }
    }

    #[test]
    fn wrong_advice_avoids_best_and_covers_the_rest() {
        let t = toy_oracle();
        let mut rng = RunSeed(3).stream(Stream::Teacher);
        let mut counts = [0usize; 4];
        for _ in 0..30_000 {
            let f = query(&t, &params(1.0, 0.0), StateId(0), 0, 10, &mut rng).unwrap();
            counts[f.suggested.0] += 1;
        }
        assert_eq!(counts[1], 0);
        for &c in &[counts[0], counts[2], counts[3]] {
            assert!((c as f64 - 10_000.0).abs() < 3.0 * (30_000.0f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt());
        }
    }

    #[test]
    fn half_consistency_two_actions() {
        let mut q = QTable::new(1, 2);
        q.row_mut(StateId(0)).copy_from_slice(&[0.0, 1.0]);
        let t = TeacherQ::new(q);
        let mut rng = RunSeed(4).stream(Stream::Teacher);
        let n = 100_000;
        let optimal = (0..n)
            .filter(|_| query(&t, &params(1.0, 0.5), StateId(0), 0, 10, &mut rng).unwrap().suggested == Action(1))
            .count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((optimal as f64 - n as f64 * 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn disabled_teacher_recommends_worst() {
        let t = toy_oracle();
        let mut p = params(1.0, 1.0);
        p.disable_at = Some(5);
        p.q_access = true;
        let mut rng = RunSeed(5).stream(Stream::Teacher);
        let before = query(&t, &p, StateId(0), 4, 10, &mut rng).unwrap();
        assert_eq!(before.suggested, Action(1));
        assert_eq!(before.value_row.as_deref(), Some(&[1.0, 5.0, -2.0, 0.0][..]));
        for e in 5..10 {
            let f = query(&t, &p, StateId(0), e, 10, &mut rng).unwrap();
            assert_eq!(f.suggested, Action(2));
            let row = f.value_row.unwrap();
            assert_eq!(row, vec![1.0, -2.0, 5.0, 0.0]);
            assert_eq!(argmax(&row), 2);
        }
    }

    #[test]
    fn misleading_value_rows_point_at_the_suggestion() {
        let t = toy_oracle();
        let mut p = params(1.0, 0.0);
        p.q_access = true;
        let mut rng = RunSeed(6).stream(Stream::Teacher);
        for _ in 0..1000 {
            let f = query(&t, &p, StateId(0), 0, 10, &mut rng).unwrap();
            let row = f.value_row.unwrap();
            assert_eq!(argmax(&row), f.suggested.0);
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            assert_eq!(sorted, vec![-2.0, 0.0, 1.0, 5.0]);
        }
    }

    #[test]
    fn early_and_late_stay_in_window() {
        let t = toy_oracle();
        let mut rng = RunSeed(7).stream(Stream::Teacher);
        let mut p = params(0.1, 1.0);
        for strategy in [Strategy::Early, Strategy::Late] {
            p.strategy = strategy;
            for e in 0..100 {
                let inside = match strategy {
                    Strategy::Early => e < 10,
                    _ => e >= 90,
                };
                let f = query(&t, &p, StateId(0), e, 100, &mut rng);
                assert_eq!(f.is_some(), inside, "{strategy} episode {e}");
            }
        }
    }

    #[test]
    fn query_consumes_three_draws() {
        let t = toy_oracle();
        let mut a = RunSeed(8).stream(Stream::Teacher);
        let mut b = RunSeed(8).stream(Stream::Teacher);
        query(&t, &params(0.0, 1.0), StateId(0), 0, 10, &mut a);
        query(&t, &params(1.0, 0.3), StateId(0), 0, 10, &mut b);
        for _ in 0..3 {
            unit(&mut b);
        }
        for _ in 0..3 {
            unit(&mut a);
        }
        assert_eq!(unit(&mut a), unit(&mut b));
    }

    #[test]
    fn training_is_deterministic() {
        let p = LearnerParams {
            alpha: 0.3,
            gamma: 0.99,
            epsilon: 0.3,
        };
        let snapshot = || {
            let t = train_oracle(&mut CartpoleEnv::new(), 50, &p, RunSeed(9)).unwrap();
            let mut buf = Vec::new();
            t.write_snapshot(&mut buf).unwrap();
            buf
        };
        let a = snapshot();
        assert!(!a.is_empty());
        assert_eq!(a, snapshot());
        let back = TeacherQ::read_snapshot(&a[..], 100, 2).unwrap();
        let mut again = Vec::new();
        back.write_snapshot(&mut again).unwrap();
        assert_eq!(a, again);
    }
}
