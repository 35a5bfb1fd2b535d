//! Benchmark tasks behind a common episodic interface.

pub mod cartpole;
pub mod pacman;

use serde::{Deserialize, Serialize};

use crate::domain::{Action, EnvKind, StateId};
use crate::error::Result;
use crate::rng::SimRng;

pub use cartpole::{CartpoleEnv, CartpoleState};
pub use pacman::{PacmanEnv, PacmanState};

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: StateId,
    pub reward: f64,
    pub terminal: bool,
    /// `Some(true)` on a win, `Some(false)` on a loss, `None` otherwise.
    pub won: Option<bool>,
}

/// An episodic task with a dense discrete state encoding.
pub trait Environment {
    fn action_count(&self) -> usize;

    /// Size of the state key space; every key is `< state_count()`.
    fn state_count(&self) -> usize;

    fn reset(&mut self, rng: &mut SimRng) -> StateId;

    /// Advances one tick. Stepping a finished episode is a contract error.
    fn step(&mut self, action: Action, rng: &mut SimRng) -> Result<Transition>;

    fn render(&self) -> Option<Render> {
        None
    }
}

/// Builds a fresh environment of the given kind.
pub fn make(kind: EnvKind) -> Box<dyn Environment + Send> {
    match kind {
        EnvKind::Pacman => Box::new(PacmanEnv::new()),
        EnvKind::Cartpole => Box::new(CartpoleEnv::new()),
    }
}

/// Every action is always available in both tasks; walls only block
/// movement, they never remove an action.
pub fn legal_actions(kind: EnvKind) -> Vec<Action> {
    (0..kind.action_count()).map(Action).collect()
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn action_count(&self) -> usize {
        (**self).action_count()
    }

    fn state_count(&self) -> usize {
        (**self).state_count()
    }

    fn reset(&mut self, rng: &mut SimRng) -> StateId {
        (**self).reset(rng)
    }

    fn step(&mut self, action: Action, rng: &mut SimRng) -> Result<Transition> {
        (**self).step(action, rng)
    }

    fn render(&self) -> Option<Render> {
        (**self).render()
    }
}

/// One grid cell of the Pac-Man view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellView {
    pub wall: bool,
    pub food: bool,
    pub agent: bool,
    pub ghost: bool,
}

/// Display payload streamed to the trainer UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "lowercase")]
pub enum Render {
    Pacman {
        /// `grid[row][col]`, row 0 at the bottom.
        grid: Vec<Vec<CellView>>,
        ghost_dir: String,
    },
    Cartpole {
        x: f64,
        x_dot: f64,
        theta: f64,
        theta_dot: f64,
        bins: [usize; 2],
    },
}
