//! Contextual Thompson-sampling bandit for ranking a small promotional
//! catalog of titles.
//!
//! The model is a Bayesian logistic regression with one mean weight vector
//! shared by every arm and a diagonal variance vector per arm. On top of it
//! the crate provides three robustness mechanisms:
//!
//! * recency-bin data augmentation ([`augment`]),
//! * temporal normalized-distinct-stream title signals ([`features`]),
//! * L2 smoothing of the mean weights toward their recent history ([`bandit`]).
//!
//! [`simulator`] produces synthetic interaction logs with known conversion
//! dynamics, [`eval`] holds the offline metric suite and [`experiment`]
//! drives the closed-loop incremental train/evaluate cycle.

pub mod augment;
pub mod bandit;
pub mod catalog;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod simulator;

pub use error::{Error, Result};
