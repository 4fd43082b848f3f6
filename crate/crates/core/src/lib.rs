//! Model-based reinforcement learning for differential graphical games.
//!
//! Followers with control-affine dynamics track a leader in formation over a
//! directed network. Each agent identifies its neighbors' drift with a
//! concurrent-learning identifier and learns an approximate feedback-Nash
//! policy with an actor and a critic trained on extrapolated Bellman errors.

pub mod actor_critic;
pub mod identifier;
pub mod linalg;
pub mod netgraph;
pub mod plant;
pub mod sim;
