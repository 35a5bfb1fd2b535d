//! Live training sessions for the trainer UI over newline-delimited JSON.

pub mod error;
pub mod server;
pub mod session;
pub mod wire;

pub use error::{GatewayError, Result};
pub use server::Server;
pub use session::{Session, SessionOptions};
pub use wire::{ControlAction, Mode, WireMessage};
