//! Two-stage layer-count configuration for fully connected networks.
//!
//! Stage one is a convolutional regressor (the depth predictor) that maps an
//! encoded training dataset to an estimated hidden-layer count. Stage two is
//! an actor-critic controller that refines that estimate by repeatedly
//! rebuilding and retraining the target network and rewarding loss
//! improvements.

pub mod config;
pub mod data;
pub mod env;
pub mod fmodel;
pub mod error;
pub mod nn;
pub mod rl;
pub mod harness;
pub mod report;
pub mod seeding;
pub mod surrogate;
pub mod tensor;

pub use error::{Error, Result};
