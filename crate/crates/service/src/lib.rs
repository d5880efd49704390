//! Real-time apparatus for the tracking experiment: subjects steer the base
//! of a simulated stick (or of two rod-coupled sticks) with their pointer
//! while the model runs at a fixed tick rate.

pub mod protocol;
pub mod server;
pub mod session;

pub use balance_core::trial::{ScreenMap, SessionConfig, TerminationCause, TrialMode};
pub use protocol::{ClientMessage, ServerMessage};
pub use server::{serve, ServiceConfig, SessionSummary};
pub use session::{Session, TickOutcome};

use std::path::PathBuf;

use balance_core::trial::TrialError;
use balance_core::SddeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(SddeError),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Trial(TrialError),
    #[error("trial writer thread panicked")]
    WriterPanicked,
}
