//! Interactive reinforcement learning workbench.
//!
//! Tabular Q-learning agents shaped by teacher feedback through four
//! combiners (action biasing, control sharing, reward shaping, Q
//! augmentation), plus an adaptive selector that learns which combiner to
//! run each episode. Two benchmark tasks are provided (a 5x5 Pac-Man grid and
//! Cart-Pole), together with a simulated teacher and a seeded batch harness.

pub mod agent;
pub mod config;
pub mod domain;
pub mod env;
pub mod error;
pub mod harness;
pub mod rng;
pub mod selector;
pub mod shaping;
pub mod teacher;
pub mod trainer;

pub use agent::{LearnerParams, QTable};
pub use config::{Method, RunConfig};
pub use domain::{
    make_feedback_vector, Action, Advice, EnvKind, FeedbackOrigin, FeedbackSignal,
    FeedbackVector, MethodId, StateId, Strategy,
};
pub use env::{Environment, Transition};
pub use error::{Error, Result};
pub use rng::{RunSeed, SimRng, Stream};
pub use selector::{EpisodeLog, PortfolioState, SimilarityAccumulator};
pub use shaping::ShapingParams;
pub use teacher::{OracleParams, SimulatedTeacher, TeacherQ};
pub use trainer::{FeedbackSource, NoFeedback, StepContext, StepRecord, Trainer};
