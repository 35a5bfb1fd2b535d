//! The four feedback combiners and the per-method action distributions the
//! adaptive selector uses to score policy similarity.
//!
//! * Action biasing (AB): ε-greedy over `Q(s,·) + B·H`, selection only.
//! * Control sharing (CS): follow the suggested action with probability
//!   `min(B, 1)`, otherwise act ε-greedily on `Q`.
//! * Reward shaping (RS): learn from `r + B·H(s,a)`, act on `Q`.
//! * Q augmentation (QA): `Q(s,·) ← Q(s,·) + B·H_v` is written into the
//!   table when feedback arrives, then the agent acts ε-greedily on it.
//!
//! With `B = 0` or absent feedback every combiner reduces to plain
//! Q-learning on the same random draws.

use crate::agent::{eps_greedy_distribution, ActionDraw, QTable};
use crate::domain::{Action, Advice, FeedbackVector, MethodId, StateId};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingParams {
    /// Shaping weight, never negative.
    pub b: f64,
    /// Amount subtracted from `b` after every episode.
    pub b_decrement: f64,
    pub r_h: f64,
}

impl ShapingParams {
    /// `B ← max(0, B − decrement)`.
    pub fn decay(self) -> Self {
        Self {
            b: (self.b - self.b_decrement).max(0.0),
            ..self
        }
    }
}

pub fn decay_b(p: ShapingParams) -> ShapingParams {
    p.decay()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "feedback has {got} entries, expected {expected}"
        )))
    }
}

/// Elementwise `Q + B·H_v`.
pub fn qa_augment(row: &[f64], h_v: &[f64], b: f64) -> Result<Vec<f64>> {
    check_len(row.len(), h_v.len())?;
    Ok(row.iter().zip(h_v).map(|(q, h)| q + b * h).collect())
}

/// Stores `Q(s,·) + B·H_v` back into the table. Nothing is written without
/// feedback or with zero weight.
pub fn qa_write(q: &mut QTable, s: StateId, advice: &Advice, b: f64) -> Result<()> {
    check_len(q.action_count(), advice.len())?;
    if advice.is_absent() || b == 0.0 {
        return Ok(());
    }
    for (v, h) in q.row_mut(s).iter_mut().zip(&advice.value) {
        *v += b * h;
    }
    Ok(())
}

pub fn rs_shape_reward(r: f64, h_entry: f64, b: f64) -> f64 {
    r + b * h_entry
}

/// Probability that control sharing hands the decision to the teacher.
pub fn follow_probability(b: f64) -> f64 {
    b.clamp(0.0, 1.0)
}

fn augmented(row: &[f64], h: &[f64], b: f64) -> Vec<f64> {
    row.iter().zip(h).map(|(q, h)| q + b * h).collect()
}

/// Chooses the action `method` takes given a pre-sampled draw. `row` is the
/// table row before any QA write.
pub fn select_with_draw(
    method: MethodId,
    row: &[f64],
    advice: &Advice,
    b: f64,
    eps: f64,
    draw: &ActionDraw,
) -> Result<Action> {
    check_len(row.len(), advice.len())?;
    let action = match method {
        MethodId::Q | MethodId::RS => draw.eps_greedy(row, eps),
        MethodId::AB => draw.eps_greedy(&augmented(row, advice.h.entries(), b), eps),
        MethodId::QA => draw.eps_greedy(&augmented(row, &advice.value, b), eps),
        MethodId::CS => match advice.h.suggested() {
            Some(suggested) if draw.follow < follow_probability(b) => suggested,
            _ => draw.eps_greedy(row, eps),
        },
    };
    Ok(action)
}

/// Action biasing: ε-greedy over `Q(s,·) + B·H`.
pub fn ab_select(
    q: &QTable,
    s: StateId,
    h: &FeedbackVector,
    b: f64,
    eps: f64,
    rng: &mut SimRng,
) -> Result<Action> {
    let draw = ActionDraw::sample(rng);
    select_with_draw(MethodId::AB, q.row(s), &Advice::from_vector(h.clone()), b, eps, &draw)
}

/// Control sharing: the suggested action with probability `min(B,1)`,
/// otherwise the agent's ε-greedy choice.
pub fn cs_select(
    q: &QTable,
    s: StateId,
    h: &FeedbackVector,
    b: f64,
    eps: f64,
    rng: &mut SimRng,
) -> Result<Action> {
    let draw = ActionDraw::sample(rng);
    select_with_draw(MethodId::CS, q.row(s), &Advice::from_vector(h.clone()), b, eps, &draw)
}

/// Exact distribution over actions that `method` would use at this state.
///
/// RS ranks actions by `Q + B·H` here even though its real influence is on
/// the update; this is how its policy is compared with the others.
pub fn method_action_distribution(
    method: MethodId,
    row: &[f64],
    advice: &Advice,
    b: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    check_len(row.len(), advice.len())?;
    let dist = match method {
        MethodId::Q => eps_greedy_distribution(row, eps),
        MethodId::AB | MethodId::RS => {
            eps_greedy_distribution(&augmented(row, advice.h.entries(), b), eps)
        }
        MethodId::QA => eps_greedy_distribution(&augmented(row, &advice.value, b), eps),
        MethodId::CS => {
            let agent = eps_greedy_distribution(row, eps);
            match advice.h.suggested() {
                None => agent,
                Some(suggested) => {
                    let follow = follow_probability(b);
                    let mut p: Vec<f64> = agent.iter().map(|x| (1.0 - follow) * x).collect();
                    p[suggested.0] += follow;
                    p
                }
            }
        }
    };
    Ok(dist)
}
