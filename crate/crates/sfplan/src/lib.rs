//! Text formats, file IO, the experiment harness and plotting for
//! `sfplan-core`.

pub mod config;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod io;
pub mod layout;
pub mod plot;
pub mod task;

pub use error::{AppError, AppResult};
