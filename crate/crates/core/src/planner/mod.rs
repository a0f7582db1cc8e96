//! Sampling-based manipulation tree search.
//!
//! The planner grows a tree of simulated states from a single start state.
//! Each iteration picks a node by reward rank, then chains a few extensions
//! from it using a mix of random, continuation, proximity-seeking and
//! goal-directed actions. Sub-goals are resampled periodically to escape
//! local minima, and the selection greediness and extension horizon adapt
//! to whether the search is improving.

mod actions;
mod export;
mod params;
mod rewards;
mod search;
mod selection;
mod tree;

pub use actions::{goal_directed_delta, proximity_gradient, sample_action, sample_action_type, ActionCommand, ActionType};
pub use export::{read_tree_records, write_trajectory_csv, write_tree_jsonl, NodeRecord};
pub use params::{PlannerParams, SearchBounds};
pub use rewards::{distance_reward, node_rewards, reachability, reachability_reward, weighted_norm, RewardComponents};
pub use search::{plan, sample_goal, update_search_params, SearchStats};
pub use selection::{pareto_rank_distribution, pareto_rank_pmf, reward_ranking, sample_pareto_rank, select_node};
pub use tree::{best_trajectory, extend, extend_traced, search_progress, trajectory_to, SearchTree, Trajectory, TreeNode};

use thiserror::Error;

use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid planner parameter `{key}`: {reason}")]
    InvalidParam { key: &'static str, reason: String },
    #[error("goal-directed system matrix is not positive definite; check Q and R")]
    NotPositiveDefinite,
    #[error("dimension mismatch in {0}")]
    Dimension(&'static str),
    #[error("node {0} does not exist")]
    NoSuchNode(usize),
}
