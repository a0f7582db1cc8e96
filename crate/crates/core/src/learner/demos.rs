use rand::Rng;

use super::agent::command_to_action;
use super::{sample_task_pair, Episode, LearnerError, TrainConfig};
use crate::planner::{distance_reward, plan, trajectory_to, PlannerParams, SearchTree, Trajectory};
use crate::sim::{EnvModel, SystemState};

/// Planner trees grown from sampled start states; any node can serve as the
/// end of a demonstration.
#[derive(Clone, Debug)]
pub struct DemoSet {
    pub trees: Vec<SearchTree>,
    pub q_d: Vec<f64>,
    joint_min: Vec<f64>,
    joint_max: Vec<f64>,
}

impl DemoSet {
    pub fn from_trees(env: &EnvModel, trees: Vec<SearchTree>, q_d: Vec<f64>) -> Self {
        Self {
            trees,
            q_d,
            joint_min: env.joint_min().to_vec(),
            joint_max: env.joint_max().to_vec(),
        }
    }

    /// Grows `cfg.demo_trees` trees of `cfg.demo_tree_nodes` nodes, each from
    /// a sampled start toward a sampled goal.
    pub fn build<R: Rng + ?Sized>(env: &EnvModel, cfg: &TrainConfig, params: &PlannerParams, rng: &mut R) -> Result<Self, LearnerError> {
        let mut p = params.clone();
        p.max_nodes = Some(cfg.demo_tree_nodes);
        let mut trees = Vec::with_capacity(cfg.demo_trees);
        for _ in 0..cfg.demo_trees {
            let (start, goal) = sample_task_pair(env, rng)?;
            trees.push(plan(env, &start, &goal, &p, rng)?);
        }
        Ok(Self::from_trees(env, trees, params.q_d.clone()))
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.trees.iter().map(SearchTree::len).sum()
    }

    /// `(tree, node)` with the highest distance reward toward `goal`.
    pub fn closest(&self, goal: &SystemState) -> Option<(usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for (t, tree) in self.trees.iter().enumerate() {
            for (i, node) in tree.nodes.iter().enumerate() {
                let r = distance_reward(&node.state, goal, &self.q_d);
                if best.map_or(true, |(b, _, _)| r > b) {
                    best = Some((r, t, i));
                }
            }
        }
        best.map(|(_, t, i)| (t, i))
    }
}

/// Demonstration episode of exactly `n_steps` toward `goal`, ending at the
/// closest stored node.
pub fn demo_trajectory(demo_set: &DemoSet, goal: &SystemState, n_steps: usize) -> Result<Episode, LearnerError> {
    let (t, i) = demo_set.closest(goal).ok_or(LearnerError::NoDemos)?;
    let traj = trajectory_to(&demo_set.trees[t], i);
    Ok(fit_trajectory(&traj, goal, n_steps, &demo_set.joint_min, &demo_set.joint_max))
}

/// Keeps the last `n_steps` base steps of `traj`, or front-pads it by
/// holding the start state at its initial joint positions.
pub fn fit_trajectory(traj: &Trajectory, goal: &SystemState, n_steps: usize, joint_min: &[f64], joint_max: &[f64]) -> Episode {
    let start = &traj.states[0];
    let hold = command_to_action(start.q_r(), joint_min, joint_max);
    let len = traj.commands.len();
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut actions = Vec::with_capacity(n_steps);
    if len >= n_steps {
        let cut = len - n_steps;
        states.extend(traj.states[cut..].iter().map(|s| s.as_slice().to_vec()));
        actions.extend(traj.commands[cut..].iter().map(|c| command_to_action(c, joint_min, joint_max)));
    } else {
        let pad = n_steps - len;
        states.extend(std::iter::repeat(start.as_slice().to_vec()).take(pad));
        actions.extend(std::iter::repeat(hold).take(pad));
        states.extend(traj.states.iter().map(|s| s.as_slice().to_vec()));
        actions.extend(traj.commands.iter().map(|c| command_to_action(c, joint_min, joint_max)));
    }
    Episode {
        s0: states[0].clone(),
        goal: goal.as_slice().to_vec(),
        states,
        actions,
        is_demo: true,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::planner::{extend, ActionCommand, ActionType};
    use crate::sim::{make_env, TaskId};

    fn chain(env: &EnvModel, steps: &[usize]) -> SearchTree {
        let p = PlannerParams::for_task(env);
        let mut tree = SearchTree::new(env, &env.start, &env.goal, &p).unwrap();
        let mut idx = 0;
        for &k in steps {
            let cmd = ActionCommand {
                method: ActionType::Random,
                direction: vec![1.0],
                magnitude: vec![0.05],
                step_multiple: k,
            };
            idx = extend(&mut tree, idx, &cmd, env).unwrap();
        }
        tree
    }

    #[test]
    fn clip_and_pad_rules() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let tree = chain(&env, &[3, 3, 1]);
        let traj = trajectory_to(&tree, tree.len() - 1);
        assert_eq!(traj.commands.len(), 7);
        let (lo, hi) = (env.joint_min(), env.joint_max());

        let same = fit_trajectory(&traj, &env.goal, 7, lo, hi);
        assert_eq!(same.states[0], env.start.as_slice());
        assert_eq!(same.states.len(), 8);

        let cut = fit_trajectory(&traj, &env.goal, 5, lo, hi);
        assert_eq!(cut.actions.len(), 5);
        assert_eq!(cut.states[0], traj.states[2].as_slice());
        assert_eq!(cut.states[5], traj.states[7].as_slice());

        let padded = fit_trajectory(&traj, &env.goal, 10, lo, hi);
        let hold = command_to_action(env.start.q_r(), lo, hi);
        for t in 0..3 {
            assert_eq!(padded.states[t], env.start.as_slice());
            assert_eq!(padded.states[t + 1], env.start.as_slice());
            assert_eq!(padded.actions[t], hold);
        }
        assert_eq!(padded.states[10], traj.states[7].as_slice());
    }

    #[test]
    fn demo_ends_at_closest_node() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let tree = chain(&env, &[2, 2]);
        let set = DemoSet::from_trees(&env, vec![tree.clone()], vec![1.0; 4]);
        let goal = tree.nodes[1].state.clone();
        let ep = demo_trajectory(&set, &goal, 6).unwrap();
        assert_eq!(ep.states.last().unwrap(), goal.as_slice());
        assert!(ep.is_demo);
        let empty = DemoSet::from_trees(&env, vec![], vec![1.0; 4]);
        assert!(matches!(demo_trajectory(&empty, &goal, 6), Err(LearnerError::NoDemos)));
    }
}
