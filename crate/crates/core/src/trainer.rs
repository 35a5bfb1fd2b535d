//! The training loop shared by batch runs and live sessions.
//!
//! A [`Trainer`] owns one environment, one Q-table and the random streams of
//! one run. It can be driven a step at a time (live sessions feed it whatever
//! the human pressed) or an episode at a time from a [`FeedbackSource`].
//!
//! Every step follows the same order: build the advice, score each
//! portfolio method's distribution at the decision state, draw the action,
//! apply the QA write if QA is acting, step the environment and update the
//! table. That order is what keeps shaped runs with no feedback bit-identical
//! to plain Q-learning.

use crate::agent::{q_update, ActionDraw, LearnerParams, QTable};
use crate::config::{Method, RunConfig};
use crate::domain::{Action, Advice, FeedbackSignal, MethodId, StateId};
use crate::env::{self, Environment, Render};
use crate::error::{Error, Result};
use crate::rng::{RunSeed, SimRng, Stream};
use crate::selector::{EpisodeLog, PortfolioState, SimilarityAccumulator};
use crate::shaping::{method_action_distribution, qa_write, rs_shape_reward, select_with_draw, ShapingParams};

/// Where the next decision will be taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepContext {
    pub state: StateId,
    pub episode: usize,
    /// Steps already taken in this episode.
    pub step: usize,
}

/// Supplies feedback before each decision.
pub trait FeedbackSource {
    fn feedback(&mut self, ctx: &StepContext) -> Result<Option<FeedbackSignal>>;
}

/// A source that never says anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoFeedback;

impl FeedbackSource for NoFeedback {
    fn feedback(&mut self, _ctx: &StepContext) -> Result<Option<FeedbackSignal>> {
        Ok(None)
    }
}

impl<F> FeedbackSource for F
where
    F: FnMut(&StepContext) -> Option<FeedbackSignal>,
{
    fn feedback(&mut self, ctx: &StepContext) -> Result<Option<FeedbackSignal>> {
        Ok(self(ctx))
    }
}

/// What happened at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub episode: usize,
    /// Index of this step within the episode, from 0.
    pub step: usize,
    pub state: StateId,
    pub action: Action,
    pub reward: f64,
    pub next_state: StateId,
    pub terminal: bool,
    pub method: MethodId,
    /// The feedback vector in force at this decision (all zeros if none).
    pub h: Vec<f64>,
    /// Set on the step that ended the episode.
    pub episode_end: Option<EpisodeLog>,
}

#[derive(Debug, Clone)]
enum Policy {
    Fixed(MethodId),
    Adaptive(PortfolioState),
}

#[derive(Debug, Clone)]
struct Episode {
    state: StateId,
    method_index: usize,
    method: MethodId,
    probabilities: Vec<f64>,
    similarity: SimilarityAccumulator,
    ret: f64,
    steps: usize,
    advised: usize,
}

pub struct Trainer {
    env: Box<dyn Environment + Send>,
    q: QTable,
    learner: LearnerParams,
    shaping: ShapingParams,
    q_access: bool,
    policy: Policy,
    env_rng: SimRng,
    agent_rng: SimRng,
    selector_rng: SimRng,
    episode: usize,
    current: Option<Episode>,
}

impl Trainer {
    /// A trainer on the configured environment.
    pub fn new(cfg: &RunConfig, seed: RunSeed) -> Result<Self> {
        Self::with_env(env::make(cfg.env), cfg, seed)
    }

    /// A trainer on a caller-supplied environment; `cfg.env` is ignored.
    pub fn with_env(env: Box<dyn Environment + Send>, cfg: &RunConfig, seed: RunSeed) -> Result<Self> {
        let cfg = cfg.clone().validate().map_err(Error::Config)?;
        let policy = match cfg.method {
            Method::Fixed(m) => Policy::Fixed(m),
            Method::Adaptive => Policy::Adaptive(PortfolioState::new(cfg.portfolio.clone(), cfg.beta, cfg.tau)?),
        };
        Ok(Self {
            q: QTable::new(env.state_count(), env.action_count()),
            env,
            learner: cfg.learner(),
            shaping: cfg.shaping(),
            q_access: cfg.q_access,
            policy,
            env_rng: seed.stream(Stream::Environment),
            agent_rng: seed.stream(Stream::Agent),
            selector_rng: seed.stream(Stream::Selector),
            episode: 0,
            current: None,
        })
    }

    pub fn q_table(&self) -> &QTable {
        &self.q
    }

    /// Episodes completed so far.
    pub fn episode(&self) -> usize {
        self.episode
    }

    /// Current shaping weight `B`.
    pub fn shaping_weight(&self) -> f64 {
        self.shaping.b
    }

    pub fn action_count(&self) -> usize {
        self.env.action_count()
    }

    pub fn portfolio(&self) -> Option<&PortfolioState> {
        match &self.policy {
            Policy::Adaptive(p) => Some(p),
            Policy::Fixed(_) => None,
        }
    }

    pub fn render(&self) -> Option<Render> {
        self.env.render()
    }

    pub fn in_episode(&self) -> bool {
        self.current.is_some()
    }

    /// The method acting in the current episode, if one is running.
    pub fn current_method(&self) -> Option<MethodId> {
        self.current.as_ref().map(|e| e.method)
    }

    /// Resets the environment and picks this episode's method. Calling it
    /// inside a running episode is a contract error.
    pub fn begin_episode(&mut self) -> Result<StepContext> {
        if self.current.is_some() {
            return Err(Error::contract("episode already running"));
        }
        let state = self.env.reset(&mut self.env_rng);
        let (method_index, method, probabilities, methods) = match &self.policy {
            Policy::Fixed(m) => (0, *m, vec![1.0], 1),
            Policy::Adaptive(p) => {
                let probabilities = p.method_probabilities();
                let i = p.sample(&mut self.selector_rng);
                (i, p.methods()[i], probabilities, p.methods().len())
            }
        };
        self.current = Some(Episode {
            state,
            method_index,
            method,
            probabilities,
            similarity: SimilarityAccumulator::new(methods),
            ret: 0.0,
            steps: 0,
            advised: 0,
        });
        Ok(self.context().expect("episode just started"))
    }

    /// The upcoming decision point, if an episode is running.
    pub fn context(&self) -> Option<StepContext> {
        self.current.as_ref().map(|e| StepContext {
            state: e.state,
            episode: self.episode,
            step: e.steps,
        })
    }

    /// Takes one step with the given feedback. Starts an episode if none is
    /// running; the episode is closed on the terminal step.
    pub fn step(&mut self, feedback: Option<&FeedbackSignal>) -> Result<StepRecord> {
        if self.current.is_none() {
            self.begin_episode()?;
        }
        let n = self.env.action_count();
        let advice = match feedback {
            Some(signal) => Advice::from_signal(signal, self.shaping.r_h, n, self.q_access)?,
            None => Advice::absent(n),
        };
        let b = self.shaping.b;
        let eps = self.learner.epsilon;
        let cur = self.current.as_mut().expect("episode running");
        let s = cur.state;
        let row = self.q.row(s).to_vec();

        let draw = ActionDraw::sample(&mut self.agent_rng);
        let action = select_with_draw(cur.method, &row, &advice, b, eps, &draw)?;
        if let Policy::Adaptive(p) = &self.policy {
            let probs = p
                .methods()
                .iter()
                .map(|&m| method_action_distribution(m, &row, &advice, b, eps).map(|d| d[action.0]))
                .collect::<Result<Vec<f64>>>()?;
            cur.similarity.accumulate(&probs)?;
        }
        if cur.method == MethodId::QA {
            qa_write(&mut self.q, s, &advice, b)?;
        }

        let t = self.env.step(action, &mut self.env_rng)?;
        let learn_reward = if cur.method == MethodId::RS {
            rs_shape_reward(t.reward, advice.h.get(action), b)
        } else {
            t.reward
        };
        q_update(&mut self.q, s, action, learn_reward, t.state, t.terminal, &self.learner)?;

        cur.ret += t.reward;
        cur.steps += 1;
        if !advice.is_absent() {
            cur.advised += 1;
        }
        cur.state = t.state;
        let mut record = StepRecord {
            episode: self.episode,
            step: cur.steps - 1,
            state: s,
            action,
            reward: t.reward,
            next_state: t.state,
            terminal: t.terminal,
            method: cur.method,
            h: advice.h.entries().to_vec(),
            episode_end: None,
        };
        if t.terminal {
            record.episode_end = Some(self.finish(t.won)?);
        }
        Ok(record)
    }

    fn finish(&mut self, won: Option<bool>) -> Result<EpisodeLog> {
        let cur = self.current.take().expect("episode running");
        let (shares, weights) = match &mut self.policy {
            Policy::Fixed(_) => (vec![1.0], Vec::new()),
            Policy::Adaptive(p) => {
                let shares = cur.similarity.shares();
                p.update_weights(&shares, cur.ret)?;
                (shares, p.weights().to_vec())
            }
        };
        let log = EpisodeLog {
            episode: self.episode,
            method: cur.method,
            ret: cur.ret,
            steps: cur.steps,
            advised_steps: cur.advised,
            shares,
            weights,
            probabilities: cur.probabilities,
            won,
        };
        self.shaping = self.shaping.decay();
        self.episode += 1;
        Ok(log)
    }

    /// Runs one full episode, asking `source` before every decision.
    pub fn run_episode(&mut self, source: &mut dyn FeedbackSource) -> Result<EpisodeLog> {
        let mut ctx = self.begin_episode()?;
        loop {
            let signal = source.feedback(&ctx)?;
            let record = self.step(signal.as_ref())?;
            if let Some(log) = record.episode_end {
                return Ok(log);
            }
            ctx = self.context().expect("episode running");
        }
    }

    /// Index of the method acting in the current episode within the
    /// portfolio (0 for fixed-method runs).
    pub fn current_method_index(&self) -> Option<usize> {
        self.current.as_ref().map(|e| e.method_index)
    }
}

impl std::fmt::Debug for Trainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trainer")
            .field("episode", &self.episode)
            .field("b", &self.shaping.b)
            .field("policy", &self.policy)
            .finish_non_exhaustive()
    }
}
