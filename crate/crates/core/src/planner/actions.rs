use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{PlannerError, PlannerParams, SearchTree};
use crate::sim::{control_jacobian_with_step, proximity, rollout_map, EnvModel, SystemState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    Random,
    Continuation,
    Proximity,
    GoalDirected,
}

impl ActionType {
    pub const ALL: [ActionType; 4] = [
        ActionType::Random,
        ActionType::Continuation,
        ActionType::Proximity,
        ActionType::GoalDirected,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionType::Random => "random",
            ActionType::Continuation => "continuation",
            ActionType::Proximity => "proximity",
            ActionType::GoalDirected => "goal_directed",
        }
    }
}

/// A relative joint action `direction * magnitude`, applied for
/// `step_multiple` base steps. `method` is the type actually used, after any
/// fallback to random.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionCommand {
    pub method: ActionType,
    pub direction: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub step_multiple: usize,
}

impl ActionCommand {
    pub fn relative(&self) -> Vec<f64> {
        self.direction.iter().zip(&self.magnitude).map(|(d, a)| d * a).collect()
    }
}

pub fn sample_action_type<R: Rng + ?Sized>(p_a: &[f64; 4], rng: &mut R) -> ActionType {
    let total: f64 = p_a.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (t, p) in ActionType::ALL.iter().zip(p_a) {
        if u < *p {
            return *t;
        }
        u -= p;
    }
    // Rounding can leave `u` marginally above the last bin.
    *ActionType::ALL.iter().zip(p_a).rev().find(|(_, p)| **p > 0.0).map(|(t, _)| t).unwrap()
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 1e-12 && n.is_finite() {
        Some(v.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = unit(&v) {
            return u;
        }
    }
}

/// `g = J_d^T d`, the gradient of `|d|^2 / 2` with respect to the robot
/// joints, from central differences of the sensors under a kinematic
/// displacement of the joints.
pub fn proximity_gradient(env: &EnvModel, s: &SystemState, h: f64) -> Vec<f64> {
    let d0 = proximity(env, s).d;
    let mut probe = s.clone();
    (0..env.n_r)
        .map(|j| {
            let q = s.q_r()[j];
            probe.q_r_mut()[j] = q + h;
            let plus = proximity(env, &probe).d;
            probe.q_r_mut()[j] = q - h;
            let minus = proximity(env, &probe).d;
            probe.q_r_mut()[j] = q;
            d0.iter()
                .zip(plus.iter().zip(&minus))
                .map(|(d, (p, m))| d * (p - m) / (2.0 * h))
                .sum()
        })
        .collect()
}

/// Minimizer of the linearized one-step tracking problem
/// `|B (a0 + da) + f0 - B a0 - s_g|_Q^2 + |a0 + da|_R^2`:
/// `da = -(B^T Q B + R)^{-1} (B^T Q (f0 - s_g) + R a0)`.
pub fn goal_directed_delta(
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    f0_star: &[f64],
    a0_star: &[f64],
    s_g: &[f64],
) -> Result<DVector<f64>, PlannerError> {
    let (n_s, n_r) = b.shape();
    if q.shape() != (n_s, n_s) || r.shape() != (n_r, n_r) || f0_star.len() != n_s || s_g.len() != n_s || a0_star.len() != n_r {
        return Err(PlannerError::Dimension("goal-directed action"));
    }
    let err = DVector::from_iterator(n_s, f0_star.iter().zip(s_g).map(|(f, g)| f - g));
    let a0 = DVector::from_column_slice(a0_star);
    let bt_q = b.transpose() * q;
    let lhs = &bt_q * b + r;
    let rhs = &bt_q * err + r * a0;
    let chol = lhs.cholesky().ok_or(PlannerError::NotPositiveDefinite)?;
    Ok(-chol.solve(&rhs))
}

/// Draws an action of the requested type at node `node_idx`.
pub fn sample_action<R: Rng + ?Sized>(
    tree: &SearchTree,
    node_idx: usize,
    method: ActionType,
    env: &EnvModel,
    params: &PlannerParams,
    rng: &mut R,
) -> Result<ActionCommand, PlannerError> {
    let node = tree.nodes.get(node_idx).ok_or(PlannerError::NoSuchNode(node_idx))?;
    let n_r = env.n_r;
    let k = rng.gen_range(1..=params.k_max);
    let random_magnitude = |rng: &mut R| -> Vec<f64> { params.alpha_max.iter().map(|a| rng.gen::<f64>() * a).collect() };

    let direction = match method {
        ActionType::Random => None,
        ActionType::Continuation => node.action.as_ref().map(|a| a.direction.clone()),
        ActionType::Proximity => {
            let g = proximity_gradient(env, &node.state, params.fd_step);
            unit(&g).map(|u| u.iter().map(|v| -v).collect())
        }
        ActionType::GoalDirected => {
            let a0: Vec<f64> = node.action.as_ref().map_or_else(|| vec![0.0; n_r], |a| a.relative());
            let cmd = clip_command(env, &node.state.q_r().iter().zip(&a0).map(|(q, a)| q + a).collect::<Vec<_>>());
            let prev = &node.absolute_command;
            let jac = control_jacobian_with_step(env, &node.state, prev, &cmd, params.fd_step)?;
            let f0 = rollout_map(env, &node.state, prev, &cmd)?;
            let q = DMatrix::from_diagonal(&DVector::from_column_slice(&params.q_goal));
            let r = DMatrix::identity(n_r, n_r) * params.r_goal;
            let da = goal_directed_delta(&jac.b, &q, &r, f0.as_slice(), &a0, tree.current_goal.as_slice())?;
            let a: Vec<f64> = a0.iter().zip(da.iter()).map(|(x, d)| x + d).collect();
            unit(&a)
        }
    };

    Ok(match direction {
        Some(direction) => {
            let magnitude = if method == ActionType::GoalDirected {
                params.alpha_max.clone()
            } else {
                random_magnitude(rng)
            };
            ActionCommand {
                method,
                direction,
                magnitude,
                step_multiple: k,
            }
        }
        None => ActionCommand {
            method: ActionType::Random,
            direction: random_direction(n_r, rng),
            magnitude: random_magnitude(rng),
            step_multiple: k,
        },
    })
}

/// Clips an absolute joint command to the joint position bounds.
pub(crate) fn clip_command(env: &EnvModel, cmd: &[f64]) -> Vec<f64> {
    cmd.iter()
        .zip(env.joint_min().iter().zip(env.joint_max()))
        .map(|(c, (lo, hi))| c.clamp(*lo, *hi))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::sim::{make_env, TaskId};

    #[test]
    fn fully_actuated_step_reaches_goal() {
        let b = DMatrix::identity(3, 3);
        let q = DMatrix::identity(3, 3);
        let r = DMatrix::identity(3, 3) * 1e-9;
        let da = goal_directed_delta(&b, &q, &r, &[0.0, 1.0, 2.0], &[0.0; 3], &[1.0, 1.0, -1.0]).unwrap();
        assert_relative_eq!(da[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(da[1], 0.0, epsilon = 1e-6);
        assert_relative_eq!(da[2], -3.0, epsilon = 1e-6);
    }

    #[test]
    fn at_goal_delta_vanishes() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]);
        let da = goal_directed_delta(&b, &DMatrix::identity(2, 2), &(DMatrix::identity(2, 2) * 1e-6), &[0.3, 0.4], &[0.0, 0.0], &[0.3, 0.4]).unwrap();
        assert!(da.norm() < 1e-12);
    }

    #[test]
    fn zero_weight_system_is_rejected() {
        let b = DMatrix::identity(2, 2);
        let z = DMatrix::zeros(2, 2);
        assert!(matches!(
            goal_directed_delta(&b, &z, &z, &[0.0; 2], &[0.0; 2], &[1.0; 2]),
            Err(PlannerError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn proximity_points_toward_the_object() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let tree = SearchTree::new(&env, &env.start, &env.goal, &PlannerParams::for_task(&env)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cmd = sample_action(&tree, 0, ActionType::Proximity, &env, &PlannerParams::for_task(&env), &mut rng).unwrap();
        assert_eq!(cmd.method, ActionType::Proximity);
        assert_eq!(cmd.direction, vec![1.0]);
    }

    #[test]
    fn continuation_at_root_falls_back() {
        let env = make_env(TaskId::BoxPush2d, &BTreeMap::new()).unwrap();
        let p = PlannerParams::for_task(&env);
        let tree = SearchTree::new(&env, &env.start, &env.goal, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cmd = sample_action(&tree, 0, ActionType::Continuation, &env, &p, &mut rng).unwrap();
        assert_eq!(cmd.method, ActionType::Random);
        assert_relative_eq!(cmd.direction.iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(cmd.magnitude.iter().zip(&p.alpha_max).all(|(a, m)| *a >= 0.0 && a <= m));
        assert!((1..=p.k_max).contains(&cmd.step_multiple));
    }

    #[test]
    fn type_frequencies_follow_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = [6.0, 2.0, 2.0, 1.0];
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_action_type(&p, &mut rng).index()] += 1;
        }
        for (c, w) in counts.iter().zip(p) {
            assert!((*c as f64 / n as f64 - w / 11.0).abs() < 0.01);
        }
    }
}
