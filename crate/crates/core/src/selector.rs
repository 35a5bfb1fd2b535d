//! Adaptive method selection.
//!
//! Each method keeps a weight. An episode is run with a method sampled from
//! a softmax over the weights; along the way every method's probability of
//! the actions actually taken is multiplied into its similarity. At the end
//! all weights move toward the episode return in proportion to their
//! normalized similarity:
//!
//! ```text
//! P(m_i)  = exp(β(w_i − min w)) / Σ_j exp(β(w_j − min w))
//! sim_i   = Π_t π_i(a_t | s_t)
//! w_i    += τ · sim_i / Σ_j sim_j · (R − w_i)
//! ```
//!
//! Similarities are kept as logarithms; a 200-step product underflows.

use serde::Serialize;

use crate::domain::MethodId;
use crate::error::{Error, Result};
use crate::rng::{unit, SimRng};

/// Per-step probability floor applied before taking logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioState {
    methods: Vec<MethodId>,
    weights: Vec<f64>,
    pub beta: f64,
    pub tau: f64,
}

impl PortfolioState {
    pub fn new(methods: Vec<MethodId>, beta: f64, tau: f64) -> Result<Self> {
        if methods.is_empty() {
            return Err(Error::invalid("portfolio must not be empty"));
        }
        let weights = vec![0.0; methods.len()];
        Ok(Self {
            methods,
            weights,
            beta,
            tau,
        })
    }

    pub fn methods(&self) -> &[MethodId] {
        &self.methods
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.methods.len() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights must be finite, one per method"));
        }
        self.weights.copy_from_slice(weights);
        Ok(())
    }

    /// Softmax selection probabilities, shifted by the minimum weight.
    pub fn method_probabilities(&self) -> Vec<f64> {
        let min = self.weights.iter().copied().fold(f64::INFINITY, f64::min);
        let raw: Vec<f64> = self
            .weights
            .iter()
            .map(|w| (self.beta * (w - min)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        if total.is_finite() {
            raw.iter().map(|x| x / total).collect()
        } else {
            // exp overflowed: the limit puts all mass on the maxima.
            let max = self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let top: Vec<bool> = self.weights.iter().map(|&w| self.beta * (max - w) < 700.0).collect();
            let shifted: Vec<f64> = self
                .weights
                .iter()
                .zip(&top)
                .map(|(w, &t)| if t { (self.beta * (w - max)).exp() } else { 0.0 })
                .collect();
            let total: f64 = shifted.iter().sum();
            shifted.iter().map(|x| x / total).collect()
        }
    }

    /// Samples a portfolio index with one uniform draw.
    pub fn sample(&self, rng: &mut SimRng) -> usize {
        sample_index(&self.method_probabilities(), unit(rng))
    }

    /// `w_i ← w_i + τ·share_i·(R − w_i)` for every method.
    pub fn update_weights(&mut self, shares: &[f64], ret: f64) -> Result<()> {
        if shares.len() != self.weights.len() {
            return Err(Error::invalid("one share per method required"));
        }
        if !ret.is_finite() {
            return Err(Error::invalid(format!("non-finite return {ret}")));
        }
        for (w, &share) in self.weights.iter_mut().zip(shares) {
            *w += self.tau * share * (ret - *w);
        }
        Ok(())
    }
}

/// Inverse-CDF sampling; `u` in `[0, 1)`.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the running total: take the last nonzero entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityAccumulator {
    log_sim: Vec<f64>,
    steps: usize,
}

impl SimilarityAccumulator {
    /// Starts every similarity at 1 (log 0).
    pub fn new(methods: usize) -> Self {
        Self {
            log_sim: vec![0.0; methods],
            steps: 0,
        }
    }

    pub fn log_similarities(&self) -> &[f64] {
        &self.log_sim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Multiplies each method's probability of this step's action into its
    /// similarity.
    pub fn accumulate(&mut self, probs: &[f64]) -> Result<()> {
        if probs.len() != self.log_sim.len() {
            return Err(Error::invalid("one probability per method required"));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0 + 1e-12).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} out of [0,1]")));
        }
        for (ls, &p) in self.log_sim.iter_mut().zip(probs) {
            *ls += p.min(1.0).max(PROBABILITY_FLOOR).ln();
        }
        self.steps += 1;
        Ok(())
    }

    /// Normalized similarities, computed with log-sum-exp.
    pub fn shares(&self) -> Vec<f64> {
        let max = self.log_sim.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = self.log_sim.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        exp.iter().map(|e| e / total).collect()
    }
}

/// What happened in one training episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// The method that acted.
    pub method: MethodId,
    /// Sum of environment rewards.
    pub ret: f64,
    pub steps: usize,
    /// Steps on which feedback was present.
    pub advised_steps: usize,
    /// Normalized similarities; a single `1.0` for fixed-method runs.
    pub shares: Vec<f64>,
    /// Weights after the end-of-episode update (empty for fixed methods).
    pub weights: Vec<f64>,
    /// Selection probabilities the method was sampled from.
    pub probabilities: Vec<f64>,
    pub won: Option<bool>,
}
