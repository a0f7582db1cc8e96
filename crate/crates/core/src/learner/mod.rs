//! Goal-conditioned DDPG with planner demonstrations in the replay buffer.

mod agent;
mod config;
mod demos;
mod episode;
mod pretrain;
mod train;

pub use agent::{action_to_command, command_to_action, ddpg_update, ddpg_update_on_batch, dual_policy_select, policy_action, Agent, UpdateStats};
pub use config::{DemoMode, PretrainMode, TrainConfig};
pub use demos::{demo_trajectory, fit_trajectory, DemoSet};
pub use episode::{her_relabel, sparse_reward, Episode, ReplayBuffer, Transition};
pub use pretrain::{mc_returns, pretrain, successful_demos, PretrainOutcome};
pub use train::{
    collect_cycle, demo_probability, evaluate, run_episode, sample_goal_state, sample_start, sample_task_pair, train, write_metrics_csv, CycleStats,
    EpochMetrics, Policies, TrainOutcome,
};

use thiserror::Error;

use crate::nn::NnError;
use crate::planner::PlannerError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid training parameter `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("demonstrations requested but the demonstration set is empty")]
    NoDemos,
    #[error("no demonstration reached its goal")]
    NoSuccessfulDemos,
    #[error("replay buffer holds {have} transitions, a batch needs {need}")]
    BufferTooSmall { have: usize, need: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("epoch {epoch}, cycle {cycle}: {source}")]
    At {
        epoch: usize,
        cycle: usize,
        #[source]
        source: Box<LearnerError>,
    },
}

impl LearnerError {
    pub(crate) fn context(self, epoch: usize, cycle: usize) -> Self {
        LearnerError::At {
            epoch,
            cycle,
            source: Box::new(self),
        }
    }
}
