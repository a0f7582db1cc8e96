use nalgebra::DMatrix;

use super::dynamics::rollout_final;
use super::env::EnvModel;
use super::{SimError, SystemState};

/// Default central-difference perturbation, in action units.
pub const FD_STEP: f64 = 1e-4;

/// Control Jacobian of the one-action-step map and its object block.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlJacobian {
    /// `n_s x n_r`: derivative of the full successor state.
    pub b: DMatrix<f64>,
    /// `n_o x n_r`: rows of `b` belonging to the object configuration.
    pub b_o: DMatrix<f64>,
}

/// State after one base action step from `s`, tracking a reference that
/// moves from `prev_cmd` to the absolute command `cmd`.
pub fn rollout_map(env: &EnvModel, s: &SystemState, prev_cmd: &[f64], cmd: &[f64]) -> Result<SystemState, SimError> {
    rollout_final(env, s, prev_cmd, cmd, env.dt_a)
}

/// Central finite differences of [`rollout_map`] with respect to each
/// coordinate of the absolute command `a0`.
pub fn control_jacobian(env: &EnvModel, s: &SystemState, prev_cmd: &[f64], a0: &[f64]) -> Result<ControlJacobian, SimError> {
    control_jacobian_with_step(env, s, prev_cmd, a0, FD_STEP)
}

pub fn control_jacobian_with_step(
    env: &EnvModel,
    s: &SystemState,
    prev_cmd: &[f64],
    a0: &[f64],
    h: f64,
) -> Result<ControlJacobian, SimError> {
    let n_s = env.n_s();
    let n_r = env.n_r;
    let mut b = DMatrix::zeros(n_s, n_r);
    let mut cmd = a0.to_vec();
    for j in 0..n_r {
        let diverged = |e: SimError| match e {
            SimError::Divergence { .. } => SimError::JacobianDivergence { coordinate: j },
            other => other,
        };
        cmd[j] = a0[j] + h;
        let plus = rollout_map(env, s, prev_cmd, &cmd).map_err(diverged)?;
        cmd[j] = a0[j] - h;
        let minus = rollout_map(env, s, prev_cmd, &cmd).map_err(diverged)?;
        cmd[j] = a0[j];
        for i in 0..n_s {
            b[(i, j)] = (plus.as_slice()[i] - minus.as_slice()[i]) / (2.0 * h);
        }
    }
    let off = 2 * n_r;
    let b_o = b.rows(off, env.n_o).into_owned();
    Ok(ControlJacobian { b, b_o })
}
