use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::planner::PlannerParams;
use crate::sim::{EnvModel, TaskId};

/// How planner demonstrations enter the replay buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoMode {
    None,
    /// Each episode is a demonstration with probability `b_p`.
    FixedRatio,
    /// Probability `b_p * (1 - last success rate)`.
    Decaying,
    /// Probability `b_p` during the first epoch only.
    InitialOnly,
}

impl DemoMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DemoMode::None => "none",
            DemoMode::FixedRatio => "fixed_ratio",
            DemoMode::Decaying => "decaying",
            DemoMode::InitialOnly => "initial_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => DemoMode::None,
            "fixed_ratio" => DemoMode::FixedRatio,
            "decaying" => DemoMode::Decaying,
            "initial_only" => DemoMode::InitialOnly,
            _ => return None,
        })
    }
}

/// Which networks are initialized from demonstrations before training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PretrainMode {
    None,
    Policy,
    PolicyValue,
    /// Pre-trained policy and value; rollouts pick the better of the
    /// imitation and RL policies by the critic.
    Dual,
}

impl PretrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PretrainMode::None => "none",
            PretrainMode::Policy => "policy",
            PretrainMode::PolicyValue => "policy_value",
            PretrainMode::Dual => "dual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => PretrainMode::None,
            "policy" => PretrainMode::Policy,
            "policy_value" => PretrainMode::PolicyValue,
            "dual" => PretrainMode::Dual,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_epochs: usize,
    pub n_cycles: usize,
    pub n_rollouts: usize,
    pub n_steps: usize,
    pub n_episode: usize,
    pub n_batch: usize,
    pub gamma: f64,
    pub tau: f64,
    /// Chance of a uniformly random exploration action.
    pub eta: f64,
    /// Gaussian exploration noise, as a fraction of the action half-range.
    pub noise_sigma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Penalty on squared policy outputs in the actor objective.
    pub action_l2: f64,
    /// Success threshold on the relative goal distance.
    pub epsilon: f64,
    /// Per-coordinate weights of the goal distance in the reward.
    pub goal_weights: Vec<f64>,
    pub demo_mode: DemoMode,
    pub b_p: f64,
    /// Hindsight relabeling probability (0 disables it).
    pub p_her: f64,
    pub eval_runs: usize,
    /// Greedy episodes of the held-out evaluation after training (0 skips it).
    pub final_eval_runs: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Replay capacity in episodes.
    pub buffer_episodes: usize,
    pub norm_clip: f64,
    /// Planner trees backing the demonstration set.
    pub demo_trees: usize,
    /// Node budget per demonstration tree.
    pub demo_tree_nodes: usize,
    pub pretrain: PretrainMode,
    pub pretrain_demos: usize,
    pub pretrain_updates: usize,
    /// Stop after the epoch in which on-policy steps reach this count.
    pub max_env_steps: Option<usize>,
}

impl TrainConfig {
    /// Published training hyperparameters with full-size networks.
    pub fn full(env: &EnvModel) -> Self {
        let n_steps = match env.task {
            TaskId::BoxPush1d => 75,
            TaskId::BoxPush2d => 100,
            TaskId::PlanarHand => 80,
        };
        Self {
            n_epochs: 150,
            n_cycles: 50,
            n_rollouts: 2,
            n_steps,
            n_episode: 40,
            n_batch: 256,
            gamma: 0.98,
            tau: 0.05,
            eta: 0.3,
            noise_sigma: 0.1,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            action_l2: 1.0,
            epsilon: 0.2,
            goal_weights: PlannerParams::for_task(env).q_d,
            demo_mode: DemoMode::FixedRatio,
            b_p: 0.25,
            p_her: 0.0,
            eval_runs: 10,
            final_eval_runs: 50,
            hidden_layers: 4,
            hidden_width: 256,
            buffer_episodes: 10_000,
            norm_clip: 5.0,
            demo_trees: 10,
            demo_tree_nodes: 3000,
            pretrain: PretrainMode::None,
            pretrain_demos: 200,
            pretrain_updates: 2000,
            max_env_steps: None,
        }
    }

    /// Reduced budget that runs in minutes on one core.
    pub fn desk(env: &EnvModel) -> Self {
        let full = Self::full(env);
        let (n_epochs, n_cycles, n_steps, demo_tree_nodes) = match env.task {
            TaskId::BoxPush1d => (20, 10, 25, 1000),
            TaskId::BoxPush2d => (45, 10, 30, 3000),
            TaskId::PlanarHand => (30, 10, 40, 5000),
        };
        Self {
            n_epochs,
            n_cycles,
            n_steps,
            n_episode: 20,
            n_batch: 128,
            hidden_width: 64,
            hidden_layers: 3,
            buffer_episodes: 2000,
            demo_trees: 5,
            demo_tree_nodes,
            ..full
        }
    }

    pub fn validate(&self, env: &EnvModel) -> Result<(), LearnerError> {
        let bad = |key: &'static str, reason: &str| Err(LearnerError::InvalidConfig { key, reason: reason.into() });
        if self.goal_weights.len() != env.n_s() {
            return bad("goal_weights", "needs one weight per state coordinate");
        }
        for (key, v) in [("gamma", self.gamma), ("tau", self.tau), ("eta", self.eta), ("b_p", self.b_p), ("p_her", self.p_her)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(key, "must lie in [0, 1]");
            }
        }
        if self.gamma >= 1.0 {
            return bad("gamma", "must be below 1");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "must be positive");
        }
        if self.goal_weights.iter().any(|w| !(*w >= 0.0)) || self.goal_weights.iter().all(|w| *w == 0.0) {
            return bad("goal_weights", "must be non-negative and not all zero");
        }
        if !(self.noise_sigma >= 0.0) || !(self.action_l2 >= 0.0) {
            return bad("noise_sigma", "must be non-negative");
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return bad("lr_actor", "learning rates must be positive");
        }
        if self.n_steps == 0 || self.n_batch == 0 || self.n_rollouts == 0 || self.hidden_width == 0 || self.buffer_episodes == 0 {
            return bad("n_steps", "sizes must be positive");
        }
        if self.eval_runs == 0 {
            return bad("eval_runs", "must be positive");
        }
        if !(self.norm_clip > 0.0) {
            return bad("norm_clip", "must be positive");
        }
        if self.demo_mode != DemoMode::None || self.pretrain != PretrainMode::None {
            if self.demo_trees == 0 || self.demo_tree_nodes < 2 {
                return bad("demo_trees", "demonstrations need at least one tree of two nodes");
            }
        }
        Ok(())
    }

    /// Hidden widths of both networks.
    pub fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_width; self.hidden_layers]
    }

    /// Lowest reachable discounted return.
    pub fn value_floor(&self) -> f64 {
        -1.0 / (1.0 - self.gamma)
    }
}
