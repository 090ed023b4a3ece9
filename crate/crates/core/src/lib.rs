pub mod envs;
pub mod error;
pub mod mdp;
pub mod mtbc;
pub mod policy;
pub mod rng;
pub mod theory;
pub mod xp;

pub use error::{Error, Result};
