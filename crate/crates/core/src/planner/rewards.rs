use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PlannerParams;
use crate::sim::{ProximityReading, SystemState};

/// Reward terms of a node; `total` is always `r_d + r_p + r_m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub r_d: f64,
    pub r_p: f64,
    pub r_m: f64,
    pub total: f64,
}

impl RewardComponents {
    pub fn new(r_d: f64, r_p: f64, r_m: f64) -> Self {
        Self {
            r_d,
            r_p,
            r_m,
            total: r_d + r_p + r_m,
        }
    }
}

/// `sqrt(x^T W x)` for a diagonal weight `W`.
pub fn weighted_norm(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(v, wi)| wi * v * v).sum::<f64>().sqrt()
}

pub fn distance_reward(s: &SystemState, goal: &SystemState, q_d: &[f64]) -> f64 {
    let diff: Vec<f64> = s.as_slice().iter().zip(goal.as_slice()).map(|(a, b)| a - b).collect();
    -weighted_norm(&diff, q_d)
}

/// `-q_m log(max(m, m_min) / m_min)`; zero whenever `m <= m_min`.
pub fn reachability_reward(m: f64, q_m: f64, m_min: f64) -> f64 {
    -q_m * (m.max(m_min) / m_min).ln()
}

pub fn node_rewards(s: &SystemState, goal: &SystemState, d: &ProximityReading, m: f64, params: &PlannerParams) -> RewardComponents {
    let r_d = distance_reward(s, goal, &params.q_d);
    let r_p = -weighted_norm(&d.d, &params.q_p);
    let r_m = reachability_reward(m, params.q_m, params.m_min);
    RewardComponents::new(r_d, r_p, r_m)
}

/// Local Mahalanobis measure `dx^T (B_o B_o^T + mu I)^{-1} dx`, evaluated
/// with a Cholesky solve.
pub fn reachability(b_o: &DMatrix<f64>, delta_o: &[f64], mu: f64) -> f64 {
    let n = delta_o.len();
    let dx = DVector::from_column_slice(delta_o);
    if dx.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let mut metric = b_o * b_o.transpose();
    for i in 0..n {
        metric[(i, i)] += mu;
    }
    let chol = metric.cholesky().expect("B B^T + mu I is positive definite for mu > 0");
    let y = chol.solve(&dx);
    dx.dot(&y).max(0.0)
}
