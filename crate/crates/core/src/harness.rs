//! Seeded batch experiments: sweeps over teacher settings and methods,
//! moving averages, threshold statistics and CSV output.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::agent::LearnerParams;
use crate::config::{parse_err, parse_pairs, Method, RunConfig};
use crate::domain::{EnvKind, MethodId, Strategy};
use crate::env;
use crate::error::{Error, Result};
use crate::rng::RunSeed;
use crate::teacher::{train_oracle, SimulatedTeacher, TeacherQ};
use crate::trainer::{NoFeedback, Trainer};

/// One episode of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub run: usize,
    pub episode: usize,
    pub method: MethodId,
    pub ret: f64,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Episode returns of a batch of runs of one configuration.
///
/// Adaptive tables carry weight and selection-probability columns, one per
/// portfolio method; fixed-method tables have an empty portfolio.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub portfolio: Vec<MethodId>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn runs(&self) -> usize {
        self.rows.iter().map(|r| r.run + 1).max().unwrap_or(0)
    }

    /// Returns of `run` in episode order.
    pub fn returns(&self, run: usize) -> Vec<f64> {
        let mut rows: Vec<&ResultRow> = self.rows.iter().filter(|r| r.run == run).collect();
        rows.sort_by_key(|r| r.episode);
        rows.iter().map(|r| r.ret).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["run", "episode", "method", "return"].map(String::from).to_vec();
        cols.extend(self.portfolio.iter().map(|m| format!("w_{m}")));
        cols.extend(self.portfolio.iter().map(|m| format!("p_{m}")));
        cols
    }
}

/// Trailing mean over the last `window` values; the first entries average
/// whatever is available.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("moving-average window must be >= 1"));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &x) in series.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    Ok(out)
}

/// A learning-curve level to reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub window: usize,
    pub value: f64,
    /// Require the average to exceed `value` rather than reach it.
    pub strict: bool,
}

impl Threshold {
    /// Pac-Man: 100-episode average above 0. Cart-Pole: 10-episode average
    /// of at least 195.
    pub fn for_env(kind: EnvKind) -> Self {
        match kind {
            EnvKind::Pacman => Threshold {
                window: 100,
                value: 0.0,
                strict: true,
            },
            EnvKind::Cartpole => Threshold {
                window: 10,
                value: 195.0,
                strict: false,
            },
        }
    }

    fn reached(&self, avg: f64) -> bool {
        if self.strict {
            avg > self.value
        } else {
            avg >= self.value
        }
    }
}

/// Number of episodes until the moving average first reaches the threshold,
/// counting only full windows. `None` if it never does.
pub fn episodes_to_threshold(series: &[f64], threshold: &Threshold) -> Result<Option<usize>> {
    let avg = moving_average(series, threshold.window)?;
    Ok(avg
        .iter()
        .enumerate()
        .skip(threshold.window.saturating_sub(1))
        .find(|(_, &a)| threshold.reached(a))
        .map(|(i, _)| i + 1))
}

/// Mean and run-level (population) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, sd: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    /// Moving average at the last episode.
    pub final_average: Stat,
    /// Runs that never reach the threshold count as the full episode budget.
    pub episodes_to_threshold: Stat,
    pub reached: usize,
    /// Fraction of episodes in which each method acted, over all runs.
    pub selection: Vec<(MethodId, f64)>,
}

/// Aggregates a table against a threshold.
pub fn summarize(table: &ResultTable, threshold: &Threshold) -> Result<Summary> {
    let runs = table.runs();
    if runs == 0 {
        return Err(Error::invalid("cannot summarize an empty table"));
    }
    let mut finals = Vec::with_capacity(runs);
    let mut hits = Vec::with_capacity(runs);
    let mut reached = 0;
    for run in 0..runs {
        let series = table.returns(run);
        let avg = moving_average(&series, threshold.window)?;
        finals.push(*avg.last().unwrap_or(&0.0));
        match episodes_to_threshold(&series, threshold)? {
            Some(k) => {
                reached += 1;
                hits.push(k as f64);
            }
            None => hits.push(series.len() as f64),
        }
    }
    let mut counts: Vec<(MethodId, usize)> = Vec::new();
    for row in &table.rows {
        match counts.iter_mut().find(|(m, _)| *m == row.method) {
            Some((_, c)) => *c += 1,
            None => counts.push((row.method, 1)),
        }
    }
    let order = if table.portfolio.is_empty() {
        counts.iter().map(|(m, _)| *m).collect()
    } else {
        table.portfolio.clone()
    };
    let total = table.rows.len() as f64;
    let selection = order
        .into_iter()
        .map(|m| {
            let c = counts.iter().find(|(x, _)| *x == m).map_or(0, |(_, c)| *c);
            (m, c as f64 / total)
        })
        .collect();
    Ok(Summary {
        runs,
        final_average: Stat::of(&finals),
        episodes_to_threshold: Stat::of(&hits),
        reached,
        selection,
    })
}

pub fn emit_csv<W: Write>(table: &ResultTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(table.column_names())?;
    for row in &table.rows {
        let mut rec = vec![
            row.run.to_string(),
            row.episode.to_string(),
            row.method.to_string(),
            row.ret.to_string(),
        ];
        rec.extend(row.weights.iter().map(f64::to_string));
        rec.extend(row.probabilities.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<ResultTable> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let fixed = ["run", "episode", "method", "return"];
    if header.len() < 4 || header.iter().take(4).ne(fixed) || (header.len() - 4) % 2 != 0 {
        return Err(Error::Parse {
            line: 1,
            message: "unexpected header".into(),
        });
    }
    let k = (header.len() - 4) / 2;
    let portfolio = header
        .iter()
        .skip(4)
        .take(k)
        .map(|h| {
            h.strip_prefix("w_").ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("bad weight column '{h}'"),
            })?
            .parse()
        })
        .collect::<Result<Vec<MethodId>>>()?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| Error::Parse { line: i + 2, message };
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| bad(format!("bad number '{}'", &rec[j])))
        };
        rows.push(ResultRow {
            run: rec[0].parse().map_err(|_| bad(format!("bad run '{}'", &rec[0])))?,
            episode: rec[1].parse().map_err(|_| bad(format!("bad episode '{}'", &rec[1])))?,
            method: rec[2].parse()?,
            ret: num(3)?,
            weights: (4..4 + k).map(num).collect::<Result<_>>()?,
            probabilities: (4 + k..4 + 2 * k).map(num).collect::<Result<_>>()?,
        });
    }
    Ok(ResultTable { portfolio, rows })
}

/// A base configuration plus value lists to take the cartesian product of.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub methods: Vec<Method>,
    pub strategies: Vec<Strategy>,
    pub likelihoods: Vec<f64>,
    pub consistencies: Vec<f64>,
    pub r_hs: Vec<f64>,
}

impl SweepSpec {
    /// A sweep with a single combination.
    pub fn single(base: RunConfig) -> Self {
        Self {
            methods: vec![base.method],
            strategies: vec![base.strategy],
            likelihoods: vec![base.likelihood],
            consistencies: vec![base.consistency],
            r_hs: vec![base.r_h],
            base,
        }
    }

    /// Reads `key = value` lines. `method`, `strategy`, `L`, `C` and `r_h`
    /// accept comma-separated lists; every other key sets the base config.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let env = match pairs.iter().find(|(_, k, _)| k == "env") {
            Some((line, _, v)) => v.parse().map_err(|e: Error| parse_err(*line, e))?,
            None => EnvKind::Pacman,
        };
        let mut spec = SweepSpec::single(RunConfig::defaults(env));
        for (line, key, value) in &pairs {
            let wrap = |e| parse_err(*line, e);
            let items = || value.split(',').map(str::trim);
            match key.as_str() {
                "method" => spec.methods = items().map(str::parse).collect::<Result<_>>().map_err(wrap)?,
                "strategy" => spec.strategies = items().map(str::parse).collect::<Result<_>>().map_err(wrap)?,
                "L" | "C" | "r_h" => {
                    let list: Vec<f64> = items()
                        .map(|v| v.parse().map_err(|_| Error::invalid(format!("{key}: bad number '{v}'"))))
                        .collect::<Result<_>>()
                        .map_err(wrap)?;
                    match key.as_str() {
                        "L" => spec.likelihoods = list,
                        "C" => spec.consistencies = list,
                        _ => spec.r_hs = list,
                    }
                }
                _ => spec.base.set(key, value).map_err(wrap)?,
            }
        }
        Ok(spec)
    }

    /// Every combination, validated, in a fixed order.
    pub fn combinations(&self) -> Result<Vec<RunConfig>> {
        let mut out = Vec::new();
        for &method in &self.methods {
            for &strategy in &self.strategies {
                for &likelihood in &self.likelihoods {
                    for &consistency in &self.consistencies {
                        for &r_h in &self.r_hs {
                            let cfg = RunConfig {
                                method,
                                strategy,
                                likelihood,
                                consistency,
                                r_h,
                                ..self.base.clone()
                            };
                            out.push(cfg.validate().map_err(Error::Config)?);
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::invalid("sweep has no combinations"));
        }
        Ok(out)
    }
}

/// Short file-name-safe label of a combination.
pub fn combination_label(cfg: &RunConfig) -> String {
    format!(
        "{}_{}_{}_L{}_C{}_rh{}",
        cfg.env,
        cfg.method,
        cfg.strategy,
        cfg.likelihood,
        cfg.consistency,
        cfg.r_h
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct OracleKey {
    env: EnvKind,
    episodes: usize,
    seed: u64,
    params: [u64; 3],
}

impl OracleKey {
    fn of(cfg: &RunConfig) -> Self {
        let p = cfg.learner();
        Self {
            env: cfg.env,
            episodes: cfg.oracle_episodes,
            seed: cfg.oracle_seed,
            params: [p.alpha.to_bits(), p.gamma.to_bits(), p.epsilon.to_bits()],
        }
    }
}

/// Trained teachers, shared read-only between runs.
#[derive(Debug, Default, Clone)]
pub struct OracleCache {
    oracles: HashMap<OracleKey, Arc<TeacherQ>>,
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// The teacher for `cfg`, training it on first use.
    pub fn get(&mut self, cfg: &RunConfig) -> Result<Arc<TeacherQ>> {
        let key = OracleKey::of(cfg);
        if let Some(t) = self.oracles.get(&key) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(oracle_for(cfg)?);
        self.oracles.insert(key, Arc::clone(&t));
        Ok(t)
    }

    /// Stores a teacher loaded elsewhere for configurations like `cfg`.
    pub fn insert(&mut self, cfg: &RunConfig, oracle: TeacherQ) {
        self.oracles.insert(OracleKey::of(cfg), Arc::new(oracle));
    }
}

/// Trains the teacher a configuration asks for.
pub fn oracle_for(cfg: &RunConfig) -> Result<TeacherQ> {
    let params: LearnerParams = cfg.learner();
    let mut env = env::make(cfg.env);
    train_oracle(env.as_mut(), cfg.oracle_episodes, &params, RunSeed(cfg.oracle_seed))
}

/// Episode logs of one run.
pub fn run_once(cfg: &RunConfig, run: usize, oracle: Option<Arc<TeacherQ>>) -> Result<Vec<crate::selector::EpisodeLog>> {
    let seed = RunSeed::for_run(cfg.seed, run, 0);
    let mut trainer = Trainer::new(cfg, seed)?;
    let mut logs = Vec::with_capacity(cfg.episodes);
    match (cfg.needs_teacher(), oracle) {
        (true, Some(oracle)) => {
            let mut teacher = SimulatedTeacher::new(oracle, cfg.oracle(), cfg.episodes, seed);
            for _ in 0..cfg.episodes {
                logs.push(trainer.run_episode(&mut teacher)?);
            }
        }
        (true, None) => return Err(Error::invalid("configuration needs a teacher")),
        (false, _) => {
            for _ in 0..cfg.episodes {
                logs.push(trainer.run_episode(&mut NoFeedback)?);
            }
        }
    }
    Ok(logs)
}

/// All runs of one configuration, executed in parallel.
pub fn run_config(cfg: &RunConfig, oracle: Option<Arc<TeacherQ>>) -> Result<ResultTable> {
    let per_run: Vec<Vec<crate::selector::EpisodeLog>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_once(cfg, run, oracle.clone()))
        .collect::<Result<_>>()?;
    let portfolio = match cfg.method {
        Method::Adaptive => cfg.portfolio.clone(),
        Method::Fixed(_) => Vec::new(),
    };
    let rows = per_run
        .into_iter()
        .enumerate()
        .flat_map(|(run, logs)| {
            logs.into_iter().map(move |log| ResultRow {
                run,
                episode: log.episode,
                method: log.method,
                ret: log.ret,
                weights: log.weights,
                probabilities: if matches!(cfg.method, Method::Adaptive) {
                    log.probabilities
                } else {
                    Vec::new()
                },
            })
        })
        .collect();
    Ok(ResultTable { portfolio, rows })
}

#[derive(Debug, Clone)]
pub struct CombinationResult {
    pub config: RunConfig,
    pub table: ResultTable,
}

/// Runs every combination of the sweep. A failure names its combination.
pub fn run_experiment(spec: &SweepSpec, cache: &mut OracleCache) -> Result<Vec<CombinationResult>> {
    let combos = spec.combinations()?;
    let mut oracles = Vec::with_capacity(combos.len());
    for cfg in &combos {
        oracles.push(if cfg.needs_teacher() { Some(cache.get(cfg)?) } else { None });
    }
    combos
        .into_par_iter()
        .zip(oracles)
        .map(|(config, oracle)| {
            let table = run_config(&config, oracle).map_err(|e| Error::Combination {
                combination: combination_label(&config),
                source: Box::new(e),
            })?;
            Ok(CombinationResult { config, table })
        })
        .collect()
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "runs={} final={:.2}±{:.2} to_threshold={:.1}±{:.1} reached={}/{}",
            self.runs,
            self.final_average.mean,
            self.final_average.sd,
            self.episodes_to_threshold.mean,
            self.episodes_to_threshold.sd,
            self.reached,
            self.runs
        )?;
        for (m, p) in &self.selection {
            write!(f, " {m}={p:.3}")?;
        }
        Ok(())
    }
}
