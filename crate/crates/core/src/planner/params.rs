use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::sim::{EnvModel, TaskId};

/// Search parameters. Defaults follow the published planner settings; the
/// regularizers `mu` and `r_goal` and the initial adaptive values are local
/// choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    /// Number of (sub-)goals.
    pub n_g: usize,
    /// Node selections per goal.
    pub n_i: usize,
    /// Probability of using the task goal instead of a random sub-goal.
    pub b_g: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Holds the selection exponent constant when set.
    pub fixed_beta: Option<f64>,
    /// Initial extension horizon (stored as a real, rounded at use).
    pub n_e_init: f64,
    pub n_e_max: f64,
    /// Holds the extension horizon constant when set.
    pub fixed_n_e: Option<usize>,
    /// Unnormalized weights of [random, continuation, proximity, goal-directed].
    pub p_a: [f64; 4],
    pub alpha_max: Vec<f64>,
    pub k_max: usize,
    /// Diagonal of the distance weight `Q_d` (length `n_s`).
    pub q_d: Vec<f64>,
    /// Diagonal of the proximity weight `Q_p` (length `n_p`).
    pub q_p: Vec<f64>,
    pub q_m: f64,
    pub m_min: f64,
    /// Regularizer of the reachability metric.
    pub mu: f64,
    /// Diagonal of the goal-directed state weight `Q`.
    pub q_goal: Vec<f64>,
    /// Goal-directed action weight, `R = r_goal * I`.
    pub r_goal: f64,
    pub fd_step: f64,
    /// Stop once the tree holds this many nodes.
    pub max_nodes: Option<usize>,
}

/// Bounds for the adaptive selection exponent and extension horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchBounds {
    pub beta_min: f64,
    pub beta_max: f64,
    pub n_e_max: f64,
}

impl PlannerParams {
    /// Defaults for a task: shared search settings plus the per-task action
    /// distribution and reward weights.
    pub fn for_task(env: &EnvModel) -> Self {
        let (p_a, q_obj, q_p, q_m): ([f64; 4], Vec<f64>, f64, f64) = match env.task {
            TaskId::BoxPush1d => ([1.0, 1.0, 2.0, 2.0], vec![1.0], 1.0, 1.0),
            TaskId::BoxPush2d => ([6.0, 2.0, 2.0, 1.0], vec![1.0, 1.0], 0.001, 0.001),
            TaskId::PlanarHand => ([1.0, 1.0, 2.0, 2.0], vec![1.0, 1.0, std::f64::consts::FRAC_PI_2], 0.01, 0.01),
        };
        let q_d = distance_weights(env, &q_obj, 0.1);
        let q_goal = distance_weights(env, &q_obj, 0.0);
        Self {
            n_g: 30,
            n_i: 30,
            b_g: 0.0,
            beta_min: 0.2,
            beta_max: 1.2,
            fixed_beta: None,
            n_e_init: 1.0,
            n_e_max: 10.0,
            fixed_n_e: None,
            p_a,
            alpha_max: env.alpha_max.clone(),
            k_max: 3,
            q_d,
            q_p: vec![q_p; env.n_p()],
            q_m,
            m_min: 0.001,
            mu: 1e-4,
            q_goal,
            r_goal: 1e-3,
            fd_step: crate::sim::FD_STEP,
            max_nodes: None,
        }
    }

    pub fn bounds(&self) -> SearchBounds {
        SearchBounds {
            beta_min: self.beta_min,
            beta_max: self.beta_max,
            n_e_max: self.n_e_max,
        }
    }

    /// Action-type probabilities normalized to sum to one.
    pub fn action_probabilities(&self) -> [f64; 4] {
        let total: f64 = self.p_a.iter().sum();
        self.p_a.map(|p| p / total)
    }

    pub fn validate(&self, env: &EnvModel) -> Result<(), PlannerError> {
        let bad = |key: &'static str, reason: String| Err(PlannerError::InvalidParam { key, reason });
        if !(0.0..=1.0).contains(&self.b_g) {
            return bad("b_g", format!("{} not in [0, 1]", self.b_g));
        }
        if self.p_a.iter().any(|p| !(*p >= 0.0)) || !(self.p_a.iter().sum::<f64>() > 0.0) {
            return bad("p_a", "weights must be non-negative with a positive sum".into());
        }
        if !(self.beta_min > 0.0 && self.beta_min <= self.beta_max) {
            return bad("beta_min", format!("need 0 < beta_min <= beta_max, got [{}, {}]", self.beta_min, self.beta_max));
        }
        if let Some(b) = self.fixed_beta {
            if !(b > 0.0) {
                return bad("fixed_beta", "must be positive".into());
            }
        }
        if !(self.n_e_max >= 1.0) || !(1.0..=self.n_e_max).contains(&self.n_e_init) {
            return bad("n_e_init", format!("need 1 <= n_e_init <= n_e_max, got {} / {}", self.n_e_init, self.n_e_max));
        }
        if self.fixed_n_e == Some(0) {
            return bad("fixed_n_e", "must be at least 1".into());
        }
        if self.k_max == 0 {
            return bad("k_max", "must be at least 1".into());
        }
        if self.alpha_max.len() != env.n_r || self.alpha_max.iter().any(|a| !(*a >= 0.0)) {
            return bad("alpha_max", format!("need {} non-negative entries", env.n_r));
        }
        if self.q_d.len() != env.n_s() || self.q_goal.len() != env.n_s() {
            return bad("q_d", format!("need {} entries", env.n_s()));
        }
        if self.q_p.len() != env.n_p() {
            return bad("q_p", format!("need {} entries", env.n_p()));
        }
        if self.q_d.iter().chain(&self.q_p).chain(&self.q_goal).any(|w| !(*w >= 0.0)) || !(self.q_m >= 0.0) {
            return bad("q_d", "weights must be non-negative".into());
        }
        if !(self.m_min > 0.0) {
            return bad("m_min", "must be positive".into());
        }
        if !(self.mu > 0.0) {
            return bad("mu", "must be positive".into());
        }
        if !(self.r_goal > 0.0) {
            return bad("r_goal", "must be positive".into());
        }
        if !(self.fd_step > 0.0) {
            return bad("fd_step", "must be positive".into());
        }
        Ok(())
    }
}

/// Diagonal distance weights: zero on the robot, `q_obj` on the object
/// configuration and `vel` on the object velocity.
fn distance_weights(env: &EnvModel, q_obj: &[f64], vel: f64) -> Vec<f64> {
    let mut w = vec![0.0; env.n_s()];
    let off = 2 * env.n_r;
    w[off..off + env.n_o].copy_from_slice(q_obj);
    for v in &mut w[off + env.n_o..] {
        *v = vel;
    }
    w
}
