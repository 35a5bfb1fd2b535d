//! Tabular Q-learning: value storage, ε-greedy selection and the TD update.
//!
//! Ties are always broken toward the lowest action index, in selection, in
//! action distributions and in the teacher.

use std::io::{BufRead, Write};

use crate::domain::{Action, StateId};
use crate::error::{Error, Result};
use crate::rng::{index_from_unit, unit, SimRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha {} out of [0,1]", self.alpha)));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma {} out of [0,1)", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon {} out of [0,1]", self.epsilon)));
        }
        Ok(())
    }
}

/// Dense action-value table over `state_count x action_count` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    actions: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn new(states: usize, actions: usize) -> Self {
        assert!(actions > 0, "a Q-table needs at least one action");
        Self {
            actions,
            values: vec![0.0; states * actions],
            visits: vec![0; states * actions],
        }
    }

    pub fn state_count(&self) -> usize {
        self.values.len() / self.actions
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    /// All values, row-major by state.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, s: StateId) -> usize {
        let i = s.index();
        assert!(
            i < self.state_count(),
            "state {i} outside table of {} states",
            self.state_count()
        );
        i * self.actions
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        let o = self.offset(s);
        &self.values[o..o + self.actions]
    }

    pub fn row_mut(&mut self, s: StateId) -> &mut [f64] {
        let o = self.offset(s);
        &mut self.values[o..o + self.actions]
    }

    pub fn get(&self, s: StateId, a: Action) -> f64 {
        self.row(s)[a.0]
    }

    pub fn set(&mut self, s: StateId, a: Action, v: f64) {
        self.row_mut(s)[a.0] = v;
    }

    pub fn visits(&self, s: StateId, a: Action) -> u64 {
        self.visits[self.offset(s) + a.0]
    }

    pub fn max_value(&self, s: StateId) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy(&self, s: StateId) -> Action {
        Action(argmax(self.row(s)))
    }

    /// Writes `state_key<TAB>a0,a1,...` for every row holding a nonzero value.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        for (s, row) in self.values.chunks(self.actions).enumerate() {
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            let cells = row
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",");
            writeln!(out, "{s}\t{cells}")?;
        }
        Ok(())
    }

    /// Reads a snapshot into a table of the given shape; absent rows are 0.
    pub fn read_snapshot<R: BufRead>(input: R, states: usize, actions: usize) -> Result<Self> {
        let mut table = QTable::new(states, actions);
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let bad = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            if line.trim().is_empty() {
                continue;
            }
            let (key, cells) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected state<TAB>values".into()))?;
            let s: usize = key
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad state key '{key}'")))?;
            if s >= states {
                return Err(bad(format!("state {s} outside {states} states")));
            }
            let row: Vec<f64> = cells
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(format!("bad values '{cells}'")))?;
            if row.len() != actions {
                return Err(bad(format!("{} values, expected {actions}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite value".into()));
            }
            table.row_mut(StateId(s as u32)).copy_from_slice(&row);
        }
        Ok(table)
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry, lowest index on ties.
pub fn argmin(row: &[f64]) -> usize {
    let mut worst = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v < row[worst] {
            worst = i;
        }
    }
    worst
}

/// The random numbers one action decision may consume.
///
/// Every decision draws exactly these three words whatever the method, so
/// runs that share a seed keep their agent streams aligned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDraw {
    /// Control-sharing coin.
    pub follow: f64,
    /// Exploration coin.
    pub explore: f64,
    /// Uniform pick used when exploring.
    pub pick: f64,
}

impl ActionDraw {
    pub fn sample(rng: &mut SimRng) -> Self {
        Self {
            follow: unit(rng),
            explore: unit(rng),
            pick: unit(rng),
        }
    }

    /// ε-greedy choice over `row` using this draw.
    pub fn eps_greedy(&self, row: &[f64], eps: f64) -> Action {
        if self.explore < eps {
            Action(index_from_unit(self.pick, row.len()))
        } else {
            Action(argmax(row))
        }
    }
}

/// ε-greedy over a restricted action set. The full action set gives the
/// same result as [`ActionDraw::eps_greedy`] on the same draw.
pub fn select_eps_greedy(
    q: &QTable,
    s: StateId,
    eps: f64,
    actions: &[Action],
    rng: &mut SimRng,
) -> Result<Action> {
    if actions.is_empty() {
        return Err(Error::contract("no actions to choose from"));
    }
    let draw = ActionDraw::sample(rng);
    let row = q.row(s);
    if draw.explore < eps {
        return Ok(actions[index_from_unit(draw.pick, actions.len())]);
    }
    let mut best = actions[0];
    for &a in &actions[1..] {
        let better = row[a.0] > row[best.0] || (row[a.0] == row[best.0] && a.0 < best.0);
        if better {
            best = a;
        }
    }
    Ok(best)
}

/// One-step TD update toward `r + γ·max Q(s',·)`; the bootstrap term is
/// dropped when `s'` is terminal. Returns the new value.
pub fn q_update(
    q: &mut QTable,
    s: StateId,
    a: Action,
    r: f64,
    s_next: StateId,
    terminal: bool,
    params: &LearnerParams,
) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::invalid(format!("non-finite reward {r}")));
    }
    let bootstrap = if terminal { 0.0 } else { q.max_value(s_next) };
    let target = r + params.gamma * bootstrap;
    let old = q.get(s, a);
    let new = old + params.alpha * (target - old);
    if !new.is_finite() {
        return Err(Error::invalid(format!("Q({s},{}) became {new}", a.0)));
    }
    q.set(s, a, new);
    let o = q.offset(s) + a.0;
    q.visits[o] += 1;
    Ok(new)
}

/// The ε-greedy distribution over `row`: the greedy action gets
/// `1 - ε + ε/|A|`, every other action `ε/|A|`.
pub fn eps_greedy_distribution(row: &[f64], eps: f64) -> Vec<f64> {
    let n = row.len() as f64;
    let mut p = vec![eps / n; row.len()];
    p[argmax(row)] += 1.0 - eps;
    p
}

/// Distribution of [`select_eps_greedy`] over the full action vector;
/// actions outside `actions` get zero.
pub fn action_distribution(
    q: &QTable,
    s: StateId,
    eps: f64,
    actions: &[Action],
) -> Result<Vec<f64>> {
    if actions.is_empty() {
        return Err(Error::contract("no actions to choose from"));
    }
    let row = q.row(s);
    let mut p = vec![0.0; row.len()];
    let share = eps / actions.len() as f64;
    let mut best = actions[0];
    for &a in actions {
        p[a.0] += share;
        if row[a.0] > row[best.0] || (row[a.0] == row[best.0] && a.0 < best.0) {
            best = a;
        }
    }
    p[best.0] += 1.0 - eps;
    Ok(p)
}
