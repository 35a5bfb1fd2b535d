//! Run configuration and its flat `key = value` file format.

use std::fmt;
use std::str::FromStr;

use crate::agent::LearnerParams;
use crate::domain::{EnvKind, MethodId, Strategy};
use crate::error::{ConfigIssue, Error, Result};
use crate::shaping::ShapingParams;
use crate::teacher::OracleParams;

/// Which policy drives a run: one fixed method or the adaptive selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Fixed(MethodId),
    Adaptive,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Fixed(m) => write!(f, "{m}"),
            Method::Adaptive => f.write_str("AL"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("al") {
            Ok(Method::Adaptive)
        } else {
            s.parse().map(Method::Fixed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub method: Method,
    pub episodes: usize,
    pub runs: usize,
    pub seed: u64,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub b0: f64,
    pub b_decrement: f64,
    pub r_h: f64,
    pub beta: f64,
    pub tau: f64,
    pub likelihood: f64,
    pub consistency: f64,
    pub strategy: Strategy,
    pub disable_at: Option<usize>,
    /// Serve the teacher's value rows to Q augmentation.
    pub q_access: bool,
    /// Methods available to the adaptive selector.
    pub portfolio: Vec<MethodId>,
    pub oracle_episodes: usize,
    pub oracle_seed: u64,
}

impl RunConfig {
    pub fn defaults(env: EnvKind) -> Self {
        let (gamma, epsilon, b_decrement, episodes, oracle_episodes) = match env {
            EnvKind::Pacman => (0.7, 0.1, 1.0 / 30000.0, 30_000, 30_000),
            EnvKind::Cartpole => (0.99, 0.3, 1.0 / 2000.0, 2_000, 2_000),
        };
        Self {
            env,
            method: Method::Adaptive,
            episodes,
            runs: 20,
            seed: 0,
            alpha: 0.3,
            gamma,
            epsilon,
            b0: 1.0,
            b_decrement,
            r_h: 10.0,
            beta: 5.0,
            tau: 0.1,
            likelihood: 0.01,
            consistency: 0.8,
            strategy: Strategy::Early,
            disable_at: None,
            q_access: false,
            portfolio: MethodId::SHAPING.to_vec(),
            oracle_episodes,
            oracle_seed: 12_345,
        }
    }

    pub fn learner(&self) -> LearnerParams {
        LearnerParams {
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon: self.epsilon,
        }
    }

    pub fn shaping(&self) -> ShapingParams {
        ShapingParams {
            b: self.b0,
            b_decrement: self.b_decrement,
            r_h: self.r_h,
        }
    }

    pub fn oracle(&self) -> OracleParams {
        OracleParams {
            likelihood: self.likelihood,
            consistency: self.consistency,
            strategy: self.strategy,
            r_h: self.r_h,
            q_access: self.q_access,
            disable_at: self.disable_at,
        }
    }

    /// Does this run consult a teacher at all?
    pub fn needs_teacher(&self) -> bool {
        let shaped = match self.method {
            Method::Fixed(m) => m != MethodId::Q,
            Method::Adaptive => true,
        };
        shaped && self.likelihood > 0.0
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(self) -> std::result::Result<Self, Vec<ConfigIssue>> {
        let mut issues = Vec::new();
        let mut check = |ok: bool, field: &str, msg: &str| {
            if !ok {
                issues.push(ConfigIssue::new(field, msg));
            }
        };
        check(self.episodes > 0, "episodes", "episodes must be > 0");
        check(self.runs > 0, "runs", "runs must be > 0");
        check(
            self.alpha > 0.0 && self.alpha <= 1.0,
            "alpha",
            "alpha out of (0,1]",
        );
        check(
            self.gamma > 0.0 && self.gamma < 1.0,
            "gamma",
            "gamma out of (0,1)",
        );
        check(
            (0.0..=1.0).contains(&self.epsilon),
            "epsilon",
            "epsilon out of [0,1]",
        );
        check(
            self.b0 >= 0.0 && self.b0.is_finite(),
            "b0",
            "B0 must be >= 0",
        );
        check(
            self.b_decrement >= 0.0 && self.b_decrement.is_finite(),
            "b_decrement",
            "B decrement must be >= 0",
        );
        check(self.r_h > 0.0 && self.r_h.is_finite(), "r_h", "r_h must be > 0");
        check(self.beta >= 0.0 && self.beta.is_finite(), "beta", "beta must be >= 0");
        check(
            (0.0..=1.0).contains(&self.tau),
            "tau",
            "tau out of [0,1]",
        );
        check(
            (0.0..=1.0).contains(&self.likelihood),
            "L",
            "L out of [0,1]",
        );
        check(
            (0.0..=1.0).contains(&self.consistency),
            "C",
            "C out of [0,1]",
        );
        check(!self.portfolio.is_empty(), "portfolio", "portfolio must not be empty");
        let mut seen = self.portfolio.clone();
        seen.sort();
        seen.dedup();
        check(
            seen.len() == self.portfolio.len(),
            "portfolio",
            "portfolio lists a method twice",
        );
        check(
            self.oracle_episodes > 0,
            "oracle_episodes",
            "oracle_episodes must be > 0",
        );
        if issues.is_empty() {
            Ok(self)
        } else {
            Err(issues)
        }
    }

    /// Parses the flat `key = value` format. Keys missing from the text take
    /// the defaults of the configured environment.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let env = match pairs.iter().find(|(_, k, _)| k == "env") {
            Some((line, _, v)) => v.parse().map_err(|e: Error| parse_err(*line, e))?,
            None => EnvKind::Pacman,
        };
        let mut cfg = RunConfig::defaults(env);
        for (line, key, value) in &pairs {
            cfg.set(key, value).map_err(|e| parse_err(*line, e))?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "env" => self.env = value.parse()?,
            "method" => self.method = value.parse()?,
            "episodes" => self.episodes = num(key, value)?,
            "runs" => self.runs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "b0" => self.b0 = num(key, value)?,
            "b_decrement" => self.b_decrement = num(key, value)?,
            "r_h" => self.r_h = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "L" => self.likelihood = num(key, value)?,
            "C" => self.consistency = num(key, value)?,
            "strategy" => self.strategy = value.parse()?,
            "disable_at" => {
                self.disable_at = if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "q_access" => self.q_access = num(key, value)?,
            "portfolio" => {
                self.portfolio = value
                    .split(',')
                    .map(|m| m.parse())
                    .collect::<Result<Vec<MethodId>>>()?
            }
            "oracle_episodes" => self.oracle_episodes = num(key, value)?,
            "oracle_seed" => self.oracle_seed = num(key, value)?,
            other => return Err(Error::invalid(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

impl fmt::Display for RunConfig {
    /// Writes every field in the same format `parse` reads.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let portfolio = self
            .portfolio
            .iter()
            .map(|m| m.as_str())
            .collect::<Vec<_>>()
            .join(",");
        let disable_at = self
            .disable_at
            .map_or_else(|| "none".to_string(), |e| e.to_string());
        writeln!(f, "env = {}", self.env)?;
        writeln!(f, "method = {}", self.method)?;
        writeln!(f, "episodes = {}", self.episodes)?;
        writeln!(f, "runs = {}", self.runs)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "gamma = {}", self.gamma)?;
        writeln!(f, "epsilon = {}", self.epsilon)?;
        writeln!(f, "b0 = {}", self.b0)?;
        writeln!(f, "b_decrement = {}", self.b_decrement)?;
        writeln!(f, "r_h = {}", self.r_h)?;
        writeln!(f, "beta = {}", self.beta)?;
        writeln!(f, "tau = {}", self.tau)?;
        writeln!(f, "L = {}", self.likelihood)?;
        writeln!(f, "C = {}", self.consistency)?;
        writeln!(f, "strategy = {}", self.strategy)?;
        writeln!(f, "disable_at = {disable_at}")?;
        writeln!(f, "q_access = {}", self.q_access)?;
        writeln!(f, "portfolio = {portfolio}")?;
        writeln!(f, "oracle_episodes = {}", self.oracle_episodes)?;
        writeln!(f, "oracle_seed = {}", self.oracle_seed)
    }
}

/// Splits text into `(line, key, value)` triples; `#` starts a comment.
pub(crate) fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        out.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_err(line: usize, e: Error) -> Error {
    match e {
        Error::InvalidArgument(message) => Error::Parse { line, message },
        other => Error::Parse {
            line,
            message: other.to_string(),
        },
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value '{value}' for '{key}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert_eq, prop_oneof, proptest, Just};
    use proptest::strategy::Strategy as _;

    #[test]
    fn pacman_defaults() {
        let c = RunConfig::defaults(EnvKind::Pacman);
        assert_eq!((c.gamma, c.alpha, c.epsilon, c.beta, c.b0), (0.7, 0.3, 0.1, 5.0, 1.0));
        assert_eq!(c.b_decrement, 1.0 / 30000.0);
        assert_eq!(c.episodes, 30_000);
        assert_eq!(c.runs, 20);
    }

    #[test]
    fn cartpole_defaults() {
        let c = RunConfig::defaults(EnvKind::Cartpole);
        assert_eq!((c.gamma, c.epsilon, c.beta, c.b0), (0.99, 0.3, 5.0, 1.0));
        assert_eq!(c.b_decrement, 1.0 / 2000.0);
        assert_eq!(c.episodes, 2_000);
    }

    #[test]
    fn validate_reports_every_issue() {
        let mut c = RunConfig::defaults(EnvKind::Pacman);
        c.likelihood = 1.5;
        c.consistency = -0.1;
        c.episodes = 0;
        let issues = c.validate().unwrap_err();
        let fields: Vec<_> = issues.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, vec!["episodes", "L", "C"]);
        assert_eq!(issues[1].message, "L out of [0,1]");
    }

    #[test]
    fn parse_applies_env_defaults_then_overrides() {
        let c = RunConfig::parse("# cart\nenv = cartpole\nmethod = rs\nL = 1\nC=0.5\n").unwrap();
        assert_eq!(c.env, EnvKind::Cartpole);
        assert_eq!(c.gamma, 0.99);
        assert_eq!(c.method, Method::Fixed(MethodId::RS));
        assert_eq!((c.likelihood, c.consistency), (1.0, 0.5));
    }

    #[test]
    fn parse_rejects_unknown_keys() {
        let err = RunConfig::parse("env = pacman\nlambda = 0.9\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("lambda"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(RunConfig::parse("just words").is_err());
    }

    fn arb_config() -> impl proptest::strategy::Strategy<Value = RunConfig> {
        (
            prop_oneof![Just(EnvKind::Pacman), Just(EnvKind::Cartpole)],
            0usize..6,
            1usize..100_000,
            any::<u64>(),
            0.0f64..1.0,
            0.0f64..1.0,
            proptest::option::of(0usize..5000),
            any::<bool>(),
            proptest::sample::subsequence(MethodId::ALL.to_vec(), 1..=5),
        )
            .prop_map(|(env, m, episodes, seed, l, c, disable_at, q_access, portfolio)| {
                let mut cfg = RunConfig::defaults(env);
                cfg.method = if m == 5 {
                    Method::Adaptive
                } else {
                    Method::Fixed(MethodId::ALL[m])
                };
                cfg.episodes = episodes;
                cfg.seed = seed;
                cfg.likelihood = l;
                cfg.consistency = c;
                cfg.r_h = 1.0 + l * 99.0;
                cfg.disable_at = disable_at;
                cfg.q_access = q_access;
                cfg.portfolio = portfolio;
                cfg
            })
    }

    proptest! {
        #[test]
        fn config_round_trips(cfg in arb_config()) {
            let text = cfg.to_string();
            let back = RunConfig::parse(&text).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
