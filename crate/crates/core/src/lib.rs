//! Contact-rich manipulation tree search and demonstration-bootstrapped
//! goal-conditioned reinforcement learning on planar desk-scale tasks.

pub mod harness;
pub mod learner;
pub mod nn;
pub mod planner;
pub mod sim;
