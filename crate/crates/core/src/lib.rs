//! Zero-determinant strategies with long memory for repeated games.
//!
//! Strategies are conditional probability tensors over the last `n` action
//! profiles. The crate builds them (including several families of
//! ZD-type strategies), checks their feasibility, solves the Markov chain
//! they induce, and evaluates the linear and correlation relations they
//! enforce on stationary distributions.

pub mod catalog;
pub mod cli;
pub mod config;
pub mod construct;
pub mod error;
pub mod game;
pub mod markov;
pub mod strategy;
pub mod tolerance;
pub mod verify;

pub use construct::{BiasWeights, ConstructedStrategy, Construction, HFamily};
pub use error::{Result, ZdError};
pub use game::{ActionProfile, GameSpec, History, HistorySpace, PrisonersDilemmaParams};
pub use markov::{build_chain, stationary_exact, HistoryChain, StationaryDistribution};
pub use strategy::{from_press_dyson, press_dyson, PressDysonTensor, StrategyTensor};
