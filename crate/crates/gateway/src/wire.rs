//! Line-delimited JSON messages exchanged with the trainer UI.
//!
//! Every message is one JSON object on one line, tagged by `kind`. The
//! server numbers its messages with a strictly increasing `seq`; clients do
//! the same for theirs.

use interrl::env::Render;
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Full-speed training.
    Autonomous,
    /// Paced stepping with a feedback window before each decision.
    HumanInteraction,
    /// Paced stepping that re-issues the last feedback every step.
    DefaultRepeat,
}

impl Mode {
    pub fn is_paced(self) -> bool {
        !matches!(self, Mode::Autonomous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlAction {
    Start,
    Pause,
    Reset,
    /// Replace the run configuration; `payload` holds `key = value` lines.
    Config,
    /// Steps per second in the paced modes; `payload` holds the number.
    Pace,
    /// Take over a paused session; `payload` holds its id.
    Attach,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireMessage {
    State {
        seq: u64,
        session: u64,
        episode: usize,
        step: usize,
        mode: Mode,
        running: bool,
        l_counter: f64,
        /// Configured feedback likelihood the trainer aims for.
        target: f64,
        /// Feedback window before the next decision, 0 when unpaced.
        window_ms: u64,
        render: Option<Render>,
        /// Action taken at the last step, by label.
        action: Option<String>,
        /// Feedback vector applied at the last step.
        h: Vec<f64>,
    },
    EpisodeEnd {
        seq: u64,
        episode: usize,
        #[serde(rename = "return")]
        ret: f64,
        method: String,
        weights: Vec<f64>,
        steps: usize,
        advised_steps: usize,
    },
    Error {
        seq: u64,
        message: String,
    },
    Feedback {
        seq: u64,
        /// An action label, or `none`.
        action: String,
    },
    Mode {
        seq: u64,
        target: Mode,
    },
    Control {
        seq: u64,
        action: ControlAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<String>,
    },
}

impl WireMessage {
    pub fn seq(&self) -> u64 {
        match self {
            WireMessage::State { seq, .. }
            | WireMessage::EpisodeEnd { seq, .. }
            | WireMessage::Error { seq, .. }
            | WireMessage::Feedback { seq, .. }
            | WireMessage::Mode { seq, .. }
            | WireMessage::Control { seq, .. } => *seq,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::State { .. } => "state",
            WireMessage::EpisodeEnd { .. } => "episode_end",
            WireMessage::Error { .. } => "error",
            WireMessage::Feedback { .. } => "feedback",
            WireMessage::Mode { .. } => "mode",
            WireMessage::Control { .. } => "control",
        }
    }

    /// Messages a client may send.
    pub fn is_inbound(&self) -> bool {
        matches!(
            self,
            WireMessage::Feedback { .. } | WireMessage::Mode { .. } | WireMessage::Control { .. }
        )
    }

    /// One line of JSON, without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    pub fn decode(line: &str) -> Result<Self, GatewayError> {
        serde_json::from_str(line.trim()).map_err(|e| GatewayError::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_names_are_exact() {
        let m = WireMessage::EpisodeEnd {
            seq: 3,
            episode: 1,
            ret: 200.0,
            method: "AB".into(),
            weights: vec![1.0],
            steps: 200,
            advised_steps: 2,
        };
        let v: serde_json::Value = serde_json::from_str(&m.encode()).unwrap();
        assert_eq!(v["kind"], "episode_end");
        assert_eq!(v["return"], 200.0);
        assert_eq!(v["seq"], 3);

        let f = WireMessage::decode(r#"{"kind":"feedback","seq":1,"action":"left"}"#).unwrap();
        assert_eq!(
            f,
            WireMessage::Feedback {
                seq: 1,
                action: "left".into()
            }
        );
        let m = WireMessage::decode(r#"{"kind":"mode","seq":2,"target":"default_repeat"}"#).unwrap();
        assert_eq!(
            m,
            WireMessage::Mode {
                seq: 2,
                target: Mode::DefaultRepeat
            }
        );
        let c = WireMessage::decode(r#"{"kind":"control","seq":4,"action":"pace","payload":"4"}"#).unwrap();
        assert_eq!(c.kind(), "control");
        assert!(c.is_inbound());
    }

    #[test]
    fn unknown_kinds_are_rejected() {
        assert!(WireMessage::decode(r#"{"kind":"teleport","seq":1}"#).is_err());
        assert!(WireMessage::decode(r#"{"seq":1}"#).is_err());
        assert!(WireMessage::decode("not json").is_err());
        assert!(WireMessage::decode(r#"{"kind":"control","seq":1,"action":"explode"}"#).is_err());
    }

    proptest::proptest! {
        #[test]
        fn inbound_messages_round_trip(seq in 0u64..u64::MAX, label in "[a-z ]{0,12}", pace in proptest::option::of("[0-9.]{1,6}")) {
            for m in [
                WireMessage::Feedback { seq, action: label.clone() },
                WireMessage::Control { seq, action: ControlAction::Pace, payload: pace.clone() },
                WireMessage::Mode { seq, target: Mode::HumanInteraction },
            ] {
                let line = m.encode();
                proptest::prop_assert!(!line.contains('\n'));
                proptest::prop_assert_eq!(WireMessage::decode(&line).unwrap(), m);
            }
        }
    }
}
