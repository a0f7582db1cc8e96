use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rewards::distance_reward;
use super::{extend, sample_action, sample_action_type, select_node, PlannerError, PlannerParams, SearchBounds, SearchTree};
use crate::sim::{sample_feasible_state, EnvModel, SimError, SystemState};

/// Bookkeeping of one search run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Progress toward the task goal after each node was added (`progress[0]`
    /// is the root alone).
    pub progress: Vec<f64>,
    /// Extensions per action type actually used, in [`super::ActionType`] order.
    pub method_counts: [usize; 4],
    pub failures: usize,
    pub task_goal_draws: usize,
    /// Selection exponent and extension horizon at each node selection.
    pub beta_trace: Vec<f64>,
    pub n_e_trace: Vec<f64>,
}

/// Task goal with probability `b_g`, otherwise a feasible uniform sample.
pub fn sample_goal<R: Rng + ?Sized>(task_goal: &SystemState, b_g: f64, env: &EnvModel, rng: &mut R) -> Result<SystemState, SimError> {
    if rng.gen::<f64>() < b_g {
        Ok(task_goal.clone())
    } else {
        sample_feasible_state(env, rng)
    }
}

/// Adapts the selection exponent and extension horizon. `i_e` is the
/// 1-based extension index at which a new best node appeared.
pub fn update_search_params(beta: f64, n_e: f64, found_better: bool, i_e: usize, bounds: &SearchBounds) -> (f64, f64) {
    let (beta, n_e) = if found_better {
        (bounds.beta_max, 0.95 * n_e + 0.05 * (i_e as f64 + 1.0))
    } else {
        ((0.99 * beta).max(bounds.beta_min), (0.95 * n_e + 0.05 * (n_e + 1.0)).min(bounds.n_e_max))
    };
    (beta, n_e.clamp(1.0, bounds.n_e_max))
}

/// Grows a search tree from `s_1` toward `task_goal`.
pub fn plan<R: Rng + ?Sized>(
    env: &EnvModel,
    s_1: &SystemState,
    task_goal: &SystemState,
    params: &PlannerParams,
    rng: &mut R,
) -> Result<SearchTree, PlannerError> {
    let mut tree = SearchTree::new(env, s_1, task_goal, params)?;
    let bounds = params.bounds();
    let mut beta = params.fixed_beta.unwrap_or(params.beta_max);
    let mut n_e = params.n_e_init;
    let p_a = params.action_probabilities();
    let budget = params.max_nodes.unwrap_or(usize::MAX);

    let r0 = distance_reward(s_1, task_goal, &params.q_d);
    let mut best_r_d = r0;
    let progress_of = |r: f64| if r0 == 0.0 { 1.0 } else { (1.0 - r / r0).clamp(0.0, 1.0) };
    tree.stats.progress.push(progress_of(best_r_d));

    'search: for _ in 0..params.n_g {
        let goal = sample_goal(task_goal, params.b_g, env, rng)?;
        if goal == *task_goal {
            tree.stats.task_goal_draws += 1;
        }
        tree.recompute_rewards(&goal);
        for _ in 0..params.n_i {
            if tree.len() >= budget {
                break 'search;
            }
            let mut idx = select_node(&tree, beta, rng);
            let horizon = params.fixed_n_e.unwrap_or_else(|| (n_e.round() as usize).max(1));
            tree.stats.beta_trace.push(beta);
            tree.stats.n_e_trace.push(n_e);
            let mut found_better = false;
            for i_e in 1..=horizon {
                if tree.len() >= budget {
                    break;
                }
                let method = sample_action_type(&p_a, rng);
                let cmd = match sample_action(&tree, idx, method, env, params, rng) {
                    Ok(c) => c,
                    Err(PlannerError::Sim(_)) => {
                        tree.stats.failures += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let best_before = tree.nodes[tree.best_index].rewards.total;
                let new = match extend(&mut tree, idx, &cmd, env) {
                    Ok(i) => i,
                    Err(PlannerError::Sim(_)) => continue,
                    Err(e) => return Err(e),
                };
                tree.stats.method_counts[cmd.method.index()] += 1;
                best_r_d = best_r_d.max(distance_reward(&tree.nodes[new].state, task_goal, &params.q_d));
                tree.stats.progress.push(progress_of(best_r_d));
                if tree.nodes[new].rewards.total > best_before {
                    found_better = true;
                    let (b, n) = update_search_params(beta, n_e, true, i_e, &bounds);
                    beta = b;
                    n_e = n;
                }
                idx = new;
            }
            if !found_better {
                let (b, n) = update_search_params(beta, n_e, false, 0, &bounds);
                beta = b;
                n_e = n;
            }
            if let Some(b) = params.fixed_beta {
                beta = b;
            }
        }
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::sim::{is_penetrating, make_env, TaskId};

    const BOUNDS: SearchBounds = SearchBounds {
        beta_min: 0.2,
        beta_max: 1.2,
        n_e_max: 10.0,
    };

    #[test]
    fn improvement_update() {
        let (b, n) = update_search_params(0.5, 10.0, true, 1, &BOUNDS);
        assert_eq!(b, 1.2);
        assert!((n - 9.6).abs() < 1e-12);
    }

    #[test]
    fn beta_floor_holds() {
        assert_eq!(update_search_params(0.2, 3.0, false, 0, &BOUNDS).0, 0.2);
    }

    #[test]
    fn stagnation_drives_limits() {
        let (mut b, mut n) = (1.2, 1.0);
        let mut prev_n = n;
        for _ in 0..1000 {
            (b, n) = update_search_params(b, n, false, 0, &BOUNDS);
            assert!(n >= prev_n);
            prev_n = n;
        }
        assert_eq!(b, 0.2);
        assert_eq!(n, 10.0);
    }

    #[test]
    fn goal_bias_extremes() {
        let env = make_env(TaskId::BoxPush2d, &BTreeMap::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert_eq!(sample_goal(&env.goal, 1.0, &env, &mut rng).unwrap(), env.goal);
            let g = sample_goal(&env.goal, 0.0, &env, &mut rng).unwrap();
            assert_ne!(g, env.goal);
            assert!(!is_penetrating(&env, &g));
        }
    }

    #[test]
    fn goal_bias_frequency() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let hits = (0..n).filter(|_| sample_goal(&env.goal, 0.5, &env, &mut rng).unwrap() == env.goal).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn zero_iterations_keep_the_root() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let mut p = PlannerParams::for_task(&env);
        p.n_g = 1;
        p.n_i = 0;
        let tree = plan(&env, &env.start, &env.goal, &p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(tree.len(), 1);
    }

    #[test]
    fn small_search_keeps_invariants() {
        let env = make_env(TaskId::BoxPush2d, &BTreeMap::new()).unwrap();
        let mut p = PlannerParams::for_task(&env);
        p.n_g = 3;
        p.n_i = 10;
        let tree = plan(&env, &env.start, &env.goal, &p, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert!(tree.len() >= 1 + 30 - tree.stats.failures);
        for (i, n) in tree.nodes.iter().enumerate() {
            if let Some(parent) = n.parent {
                assert!(parent < i);
            }
            assert_eq!(n.rewards.total, n.rewards.r_d + n.rewards.r_p + n.rewards.r_m);
        }
        assert!(tree.stats.progress.windows(2).all(|w| w[0] <= w[1]));
    }
}
