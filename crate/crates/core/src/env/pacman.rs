//! Small-grid Pac-Man: a 5x5 open board, two food pellets, one random ghost.
//!
//! Coordinates are `(col, row)` with row 0 at the bottom, so `up` increases
//! the row. Rewards: -1 per step, +10 per pellet, +500 for clearing the
//! board, -500 when the ghost catches Pac-Man.

use crate::domain::{Action, StateId};
use crate::error::{Error, Result};
use crate::rng::{index_from_unit, unit, SimRng};

use super::{CellView, Environment, Render, Transition};

pub const SIZE: i8 = 5;
pub const UP: Action = Action(0);
pub const DOWN: Action = Action(1);
pub const LEFT: Action = Action(2);
pub const RIGHT: Action = Action(3);

pub const STEP_REWARD: f64 = -1.0;
pub const FOOD_REWARD: f64 = 10.0;
pub const WIN_REWARD: f64 = 500.0;
pub const LOSE_REWARD: f64 = -500.0;

const FOODS: [Pos; 2] = [Pos { col: 0, row: 4 }, Pos { col: 4, row: 4 }];
const PACMAN_START: Pos = Pos { col: 2, row: 0 };
const GHOST_START: Pos = Pos { col: 2, row: 4 };

/// 25 agent cells x 25 ghost cells x 4 headings x 4 food masks.
pub const STATE_COUNT: usize = 25 * 25 * 4 * 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pos {
    pub col: i8,
    pub row: i8,
}

impl Pos {
    pub fn new(col: i8, row: i8) -> Self {
        Self { col, row }
    }

    fn offset(self, a: Action) -> Pos {
        let (dc, dr) = match a.0 {
            0 => (0, 1),
            1 => (0, -1),
            2 => (-1, 0),
            _ => (1, 0),
        };
        Pos::new(self.col + dc, self.row + dr)
    }

    fn inside(self) -> bool {
        (0..SIZE).contains(&self.col) && (0..SIZE).contains(&self.row)
    }

    fn cell(self) -> usize {
        self.row as usize * SIZE as usize + self.col as usize
    }
}

fn reverse(a: Action) -> Action {
    match a {
        UP => DOWN,
        DOWN => UP,
        LEFT => RIGHT,
        _ => LEFT,
    }
}

fn direction_label(a: Action) -> &'static str {
    ["up", "down", "left", "right"][a.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PacmanState {
    pub pacman: Pos,
    pub ghost: Pos,
    pub ghost_dir: Action,
    /// Bit `i` set while `FOODS[i]` is still on the board.
    pub food_mask: u8,
    pub terminal: bool,
}

impl PacmanState {
    pub fn foods_left(&self) -> u32 {
        self.food_mask.count_ones()
    }

    pub fn has_food(&self, p: Pos) -> bool {
        FOODS
            .iter()
            .enumerate()
            .any(|(i, &f)| f == p && self.food_mask & (1 << i) != 0)
    }

    pub fn encode(&self) -> StateId {
        let key = ((self.pacman.cell() * 25 + self.ghost.cell()) * 4 + self.ghost_dir.0) * 4
            + self.food_mask as usize;
        StateId(key as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacmanOutcome {
    pub next: PacmanState,
    pub reward: f64,
    pub terminal: bool,
    pub won: Option<bool>,
}

pub fn pacman_reset() -> PacmanState {
    PacmanState {
        pacman: PACMAN_START,
        ghost: GHOST_START,
        ghost_dir: DOWN,
        food_mask: 0b11,
        terminal: false,
    }
}

/// Moves the ghost may take: in-bounds, never reversing unless cornered.
pub fn ghost_moves(ghost: Pos, heading: Action) -> Vec<Action> {
    let open: Vec<Action> = (0..4)
        .map(Action)
        .filter(|&a| ghost.offset(a).inside())
        .collect();
    let forward: Vec<Action> = open
        .iter()
        .copied()
        .filter(|&a| a != reverse(heading))
        .collect();
    if forward.is_empty() {
        open
    } else {
        forward
    }
}

/// Pac-Man moves, food and win are resolved, then the ghost moves and
/// collisions (shared cell or swapped cells) are checked.
pub fn pacman_step(s: &PacmanState, a: Action, rng: &mut SimRng) -> Result<PacmanOutcome> {
    if s.terminal {
        return Err(Error::contract("step on a finished Pac-Man episode"));
    }
    if a.0 >= 4 {
        return Err(Error::invalid(format!("Pac-Man has no action {}", a.0)));
    }
    // The ghost's draw is consumed on every step so the stream stays aligned.
    let u = unit(rng);

    let mut next = *s;
    let mut reward = STEP_REWARD;
    let target = s.pacman.offset(a);
    if target.inside() {
        next.pacman = target;
    }
    if let Some(i) = FOODS.iter().position(|&f| f == next.pacman) {
        if next.food_mask & (1 << i) != 0 {
            next.food_mask &= !(1 << i);
            reward += FOOD_REWARD;
            if next.food_mask == 0 {
                next.terminal = true;
                return Ok(PacmanOutcome {
                    next,
                    reward: reward + WIN_REWARD,
                    terminal: true,
                    won: Some(true),
                });
            }
        }
    }

    let caught = |next: &mut PacmanState, reward: f64| {
        next.terminal = true;
        PacmanOutcome {
            next: *next,
            reward: reward + LOSE_REWARD,
            terminal: true,
            won: Some(false),
        }
    };
    if next.pacman == next.ghost {
        return Ok(caught(&mut next, reward));
    }

    let moves = ghost_moves(s.ghost, s.ghost_dir);
    let dir = moves[index_from_unit(u, moves.len())];
    next.ghost = s.ghost.offset(dir);
    next.ghost_dir = dir;
    let swapped = next.ghost == s.pacman && next.pacman == s.ghost;
    if next.ghost == next.pacman || swapped {
        return Ok(caught(&mut next, reward));
    }

    Ok(PacmanOutcome {
        next,
        reward,
        terminal: false,
        won: None,
    })
}

#[derive(Debug, Clone)]
pub struct PacmanEnv {
    state: PacmanState,
}

impl PacmanEnv {
    pub fn new() -> Self {
        Self {
            state: pacman_reset(),
        }
    }

    pub fn state(&self) -> &PacmanState {
        &self.state
    }
}

impl Default for PacmanEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PacmanEnv {
    fn action_count(&self) -> usize {
        4
    }

    fn state_count(&self) -> usize {
        STATE_COUNT
    }

    fn reset(&mut self, _rng: &mut SimRng) -> StateId {
        self.state = pacman_reset();
        self.state.encode()
    }

    fn step(&mut self, action: Action, rng: &mut SimRng) -> Result<Transition> {
        let out = pacman_step(&self.state, action, rng)?;
        self.state = out.next;
        Ok(Transition {
            state: out.next.encode(),
            reward: out.reward,
            terminal: out.terminal,
            won: out.won,
        })
    }

    fn render(&self) -> Option<Render> {
        let s = &self.state;
        let grid = (0..SIZE)
            .map(|row| {
                (0..SIZE)
                    .map(|col| {
                        let p = Pos::new(col, row);
                        CellView {
                            wall: false,
                            food: s.has_food(p),
                            agent: s.pacman == p,
                            ghost: s.ghost == p,
                        }
                    })
                    .collect()
            })
            .collect();
        Some(Render::Pacman {
            grid,
            ghost_dir: direction_label(s.ghost_dir).to_string(),
        })
    }
}
