//! Cooperative gridworlds, scripted partners with latent traits, a small
//! recurrent actor-critic trained with PPO, and probing tools for what the
//! trained agent's hidden state encodes.

pub mod env;
pub mod experiment;
pub mod nn;
pub mod error;
pub mod par;
pub mod partner;
pub mod ppo;
pub mod probe;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
