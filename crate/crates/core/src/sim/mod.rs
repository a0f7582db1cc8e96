//! Planar rigid-body environments with compliant contact.
//!
//! The simulator is the single source of dynamics for both the planner and
//! the learner. Every stepping function is a pure function of its inputs.

mod dynamics;
mod env;
mod geometry;
mod jacobian;
mod sensing;
mod state;

pub use dynamics::{contact_forces, rollout_segment, substep, ContactRecord, RolloutTrace};
pub use env::{make_env, make_env_by_name, param_keys, ContactParams, EnvModel, Geometry, ParamValue, TaskId};
pub use jacobian::{control_jacobian, control_jacobian_with_step, rollout_map, ControlJacobian, FD_STEP};
pub use sensing::{is_penetrating, penetration_depth, proximity, sample_feasible_state, ProximityReading};
pub use state::SystemState;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation diverged: state coordinate {coordinate} became non-finite")]
    Divergence { coordinate: usize },
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("unknown task `{0}` (expected box_push_1d, box_push_2d or planar_hand)")]
    UnknownTask(String),
    #[error("invalid environment parameter `{key}`: {reason}")]
    InvalidParam { key: String, reason: String },
    #[error("rollout duration {dt_total} s is not a positive multiple of the action step {dt_a} s")]
    BadDuration { dt_total: f64, dt_a: f64 },
    #[error("no feasible state found after {retries} samples")]
    RetryExhausted { retries: usize },
    #[error("jacobian perturbation of action coordinate {coordinate} diverged")]
    JacobianDivergence { coordinate: usize },
}
