//! Vocabulary shared by every module: actions, state keys, feedback.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an action within an environment's action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action(pub usize);

impl Action {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Dense discrete state key produced by an environment encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pacman,
    Cartpole,
}

const PACMAN_LABELS: [&str; 4] = ["up", "down", "left", "right"];
const CARTPOLE_LABELS: [&str; 2] = ["left", "right"];

impl EnvKind {
    pub fn action_count(self) -> usize {
        self.labels().len()
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            EnvKind::Pacman => &PACMAN_LABELS,
            EnvKind::Cartpole => &CARTPOLE_LABELS,
        }
    }

    pub fn action_label(self, action: Action) -> Option<&'static str> {
        self.labels().get(action.0).copied()
    }

    pub fn parse_action(self, label: &str) -> Result<Action> {
        self.labels()
            .iter()
            .position(|l| l.eq_ignore_ascii_case(label.trim()))
            .map(Action)
            .ok_or_else(|| Error::invalid(format!("'{label}' is not an action of {self}")))
    }

    /// Moving-average window used when plotting or thresholding returns.
    pub fn plot_window(self) -> usize {
        match self {
            EnvKind::Pacman => 100,
            EnvKind::Cartpole => 10,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::Pacman => "pacman",
            EnvKind::Cartpole => "cartpole",
        })
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pacman" => Ok(EnvKind::Pacman),
            "cartpole" => Ok(EnvKind::Cartpole),
            other => Err(Error::invalid(format!("unknown environment '{other}'"))),
        }
    }
}

/// A member of a shaping portfolio. `Q` is the unshaped baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodId {
    Q,
    AB,
    CS,
    RS,
    QA,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::Q,
        MethodId::AB,
        MethodId::CS,
        MethodId::RS,
        MethodId::QA,
    ];

    /// The four explicit shaping combiners.
    pub const SHAPING: [MethodId; 4] = [MethodId::AB, MethodId::CS, MethodId::RS, MethodId::QA];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Q => "Q",
            MethodId::AB => "AB",
            MethodId::CS => "CS",
            MethodId::RS => "RS",
            MethodId::QA => "QA",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "q" => Ok(MethodId::Q),
            "ab" => Ok(MethodId::AB),
            "cs" => Ok(MethodId::CS),
            "rs" => Ok(MethodId::RS),
            "qa" => Ok(MethodId::QA),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// When in the run a teacher spends its advice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Early,
    Sporadic,
    Late,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Early => "early",
            Strategy::Sporadic => "sporadic",
            Strategy::Late => "late",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "early" => Ok(Strategy::Early),
            "sporadic" => Ok(Strategy::Sporadic),
            "late" => Ok(Strategy::Late),
            other => Err(Error::invalid(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackOrigin {
    Simulated,
    Human,
}

/// What a teacher said at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSignal {
    pub suggested: Action,
    /// Teacher's action values; only a simulated teacher with value access
    /// attaches these.
    pub value_row: Option<Vec<f64>>,
    pub origin: FeedbackOrigin,
}

impl FeedbackSignal {
    pub fn human(suggested: Action) -> Self {
        Self {
            suggested,
            value_row: None,
            origin: FeedbackOrigin::Human,
        }
    }
}

/// The `±r_h` encoding of a suggested action; all zeros means no feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackVector {
    entries: Vec<f64>,
}

impl FeedbackVector {
    pub fn absent(action_count: usize) -> Self {
        Self {
            entries: vec![0.0; action_count],
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_absent(&self) -> bool {
        self.entries.iter().all(|&h| h == 0.0)
    }

    pub fn get(&self, action: Action) -> f64 {
        self.entries[action.0]
    }

    /// The action carrying `+r_h`, if any feedback is present.
    pub fn suggested(&self) -> Option<Action> {
        if self.is_absent() {
            return None;
        }
        self.entries
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |best, (i, &h)| match best {
                Some((_, b)) if b >= h => best,
                _ => Some((i, h)),
            })
            .map(|(i, _)| Action(i))
    }
}

/// Builds the feedback vector for a suggested action: `+r_h` at the
/// suggestion, `-r_h` elsewhere.
pub fn make_feedback_vector(
    suggested: Action,
    r_h: f64,
    action_count: usize,
) -> Result<FeedbackVector> {
    if suggested.0 >= action_count {
        return Err(Error::invalid(format!(
            "action index {} out of range for {action_count} actions",
            suggested.0
        )));
    }
    if !(r_h > 0.0 && r_h.is_finite()) {
        return Err(Error::invalid(format!("r_h must be positive, got {r_h}")));
    }
    let entries = (0..action_count)
        .map(|i| if i == suggested.0 { r_h } else { -r_h })
        .collect();
    Ok(FeedbackVector { entries })
}

/// Feedback as consumed by the combiners at one step.
///
/// `value` is the row used by Q augmentation; it is the teacher's value row
/// when value access is enabled, otherwise the feedback vector itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Advice {
    pub h: FeedbackVector,
    pub value: Vec<f64>,
}

impl Advice {
    pub fn absent(action_count: usize) -> Self {
        Self {
            h: FeedbackVector::absent(action_count),
            value: vec![0.0; action_count],
        }
    }

    pub fn from_vector(h: FeedbackVector) -> Self {
        let value = h.entries().to_vec();
        Self { h, value }
    }

    /// Builds advice from a teacher signal. The value row is only used when
    /// `value_access` is set and the signal carries one.
    pub fn from_signal(
        signal: &FeedbackSignal,
        r_h: f64,
        action_count: usize,
        value_access: bool,
    ) -> Result<Self> {
        let h = make_feedback_vector(signal.suggested, r_h, action_count)?;
        let value = match (&signal.value_row, value_access) {
            (Some(row), true) => {
                if row.len() != action_count {
                    return Err(Error::invalid(format!(
                        "value row has {} entries, expected {action_count}",
                        row.len()
                    )));
                }
                row.clone()
            }
            _ => h.entries().to_vec(),
        };
        Ok(Self { h, value })
    }

    pub fn is_absent(&self) -> bool {
        self.h.is_absent()
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}
