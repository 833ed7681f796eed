//! Progressive sampling of simulation-based normal-form games.
//!
//! A simulator exposes noisy, bounded, unbiased utility samples for every
//! pure strategy profile of a hidden game. The progressive sampling loop in
//! [`psp`] draws samples in growing batches, maintains empirical Bennett and
//! Hoeffding deviation bounds per utility index, and stops sampling an index
//! once it is either well estimated or provably a poor response (regret
//! pruning). [`analysis`] checks the resulting empirical game against the
//! truth by brute force.

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod game;
pub mod psp;
pub mod simulation;

pub use error::{Error, Result};
pub use exec::Execution;
pub use game::{MixedProfile, NormalFormGame, PureProfile, StrategySpace, UtilityIndex};
