//! Behaviour-grounded object learning on a simulated stacking task.
//!
//! * [`simworld`] generates stacking-play data.
//! * [`tensornn`] is the small dense/conv1d training engine.
//! * [`classify`] trains the nine-way behaviour classifier and embeds its hidden layer with MDS.
//! * [`expand`] grows a classifier one class at a time and adds a flat/round concept head.
//! * [`policy`] trains and evaluates a TD3 stacking policy.
//! * [`novelty`] decides whether a batch of episodes comes from an unseen class.

pub mod error;
pub mod rng;
pub mod simworld;
pub mod tensornn;
pub mod classify;
pub mod expand;
pub mod plot;
pub mod policy;
pub mod novelty;

pub use error::{Error, Result};
