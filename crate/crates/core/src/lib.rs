//! Bandits with expert advice over countably infinite expert pools.
//!
//! - [`exp4r`]: Exp4.R, an Exp4.P variant whose final weights certify
//!   pairwise rankings of the experts it ran on.
//! - [`meta`]: BEES and BEES.LB, which run Exp4.R on geometrically growing
//!   windows of the pool, and the truncated Exp4.P baseline.
//! - [`env`]: oblivious adversaries, structured expert pools and an exact
//!   oracle for regret.
//! - [`harness`]: config-driven experiment sweeps behind the `bees` binary.

pub mod env;
pub mod error;
pub mod exp4r;
pub mod harness;
pub mod meta;
pub mod rng;
pub mod simplex;

pub use error::{Error, Result};
