//! Reach-avoid value functions for deterministic control systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`]: benchmark systems with target and safety margins
//! - [`bellman`]: payoff functional and backup operators
//! - [`tabular`]: grids, value iteration and tabular Q-learning
//! - [`neural`]: a small MLP, optimizers, replay and the double-DQN loop
//! - [`certify`]: rollout certification, shielding and exhaustive validation
//! - [`io`]: artifact serialization and the CSV grid format

pub mod bellman;
pub mod certify;
pub mod env;
pub mod io;
pub mod neural;
pub mod rng;
pub mod tabular;
