//! Consecutive human motion prediction with deviation feedback.
//!
//! A long pose sequence is cut into semi-overlapping "observe then predict"
//! rounds. A small deviation encoder reads the velocity-space difference
//! between what was just observed and what the model predicted for those
//! frames one round earlier, and feeds it into a baseline predictor for the
//! next round.

pub mod autodiff;
pub mod cli;
pub mod deviation;
pub mod error;
pub mod motion;
pub mod nets;
pub mod rollout;
pub mod rounds;
pub mod training;

pub use error::{Error, Result};
