use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::actions::clip_command;
use super::rewards::{distance_reward, reachability, reachability_reward, weighted_norm};
use super::{ActionCommand, PlannerError, PlannerParams, RewardComponents, SearchStats};
use crate::sim::{control_jacobian_with_step, proximity, rollout_segment, EnvModel, RolloutTrace, SimError, SystemState};

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub state: SystemState,
    pub parent: Option<usize>,
    /// Incoming action; `None` at the root.
    pub action: Option<ActionCommand>,
    /// Joint reference held at the end of the incoming action.
    pub absolute_command: Vec<f64>,
    /// Reference at the end of each base step of the incoming action.
    pub base_commands: Vec<Vec<f64>>,
    /// State after each base step of the incoming action (last is `state`).
    pub base_states: Vec<SystemState>,
    pub proximity: Vec<f64>,
    /// Object block of the control Jacobian at this node.
    pub b_o: DMatrix<f64>,
    pub rewards: RewardComponents,
}

/// Append-only search tree. Parents always precede their children.
#[derive(Clone, Debug)]
pub struct SearchTree {
    pub nodes: Vec<TreeNode>,
    pub best_index: usize,
    pub current_goal: SystemState,
    pub params: PlannerParams,
    pub stats: SearchStats,
}

/// States and base-step commands along a tree path. `commands[i]` moves
/// `states[i]` to `states[i + 1]`, starting from reference `start_command`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_command: Vec<f64>,
    pub states: Vec<SystemState>,
    pub commands: Vec<Vec<f64>>,
}

impl SearchTree {
    pub fn new(env: &EnvModel, root: &SystemState, goal: &SystemState, params: &PlannerParams) -> Result<Self, PlannerError> {
        params.validate(env)?;
        if root.dim() != env.n_s() || goal.dim() != env.n_s() {
            return Err(PlannerError::Dimension("search tree root or goal"));
        }
        let cmd = root.q_r().to_vec();
        let (prox, b_o) = probe_node(env, root, &cmd, params)?;
        let mut tree = Self {
            nodes: Vec::new(),
            best_index: 0,
            current_goal: goal.clone(),
            params: params.clone(),
            stats: SearchStats::default(),
        };
        let rewards = tree.score(root, &prox, &b_o);
        tree.nodes.push(TreeNode {
            state: root.clone(),
            parent: None,
            action: None,
            absolute_command: cmd,
            base_commands: Vec::new(),
            base_states: Vec::new(),
            proximity: prox,
            b_o,
            rewards,
        });
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    fn score(&self, s: &SystemState, prox: &[f64], b_o: &DMatrix<f64>) -> RewardComponents {
        let p = &self.params;
        let goal = &self.current_goal;
        let r_d = distance_reward(s, goal, &p.q_d);
        let r_p = -weighted_norm(prox, &p.q_p);
        let delta: Vec<f64> = s.q_o().iter().zip(goal.q_o()).map(|(a, b)| a - b).collect();
        let m = reachability(b_o, &delta, p.mu);
        RewardComponents::new(r_d, r_p, reachability_reward(m, p.q_m, p.m_min))
    }

    /// Re-scores every node under a new goal and refreshes `best_index`.
    pub fn recompute_rewards(&mut self, goal: &SystemState) {
        self.current_goal = goal.clone();
        for i in 0..self.nodes.len() {
            let n = &self.nodes[i];
            let r = self.score(&n.state, &n.proximity, &n.b_o);
            self.nodes[i].rewards = r;
        }
        self.best_index = 0;
        for i in 1..self.nodes.len() {
            if self.nodes[i].rewards.total > self.nodes[self.best_index].rewards.total {
                self.best_index = i;
            }
        }
    }

    /// Node indices from the root to `idx`.
    pub fn path_to(&self, idx: usize) -> Vec<usize> {
        let mut path = vec![idx];
        let mut cur = idx;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Index of the node closest to `goal` under the distance reward alone.
    pub fn closest_index(&self, goal: &SystemState) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            let r = distance_reward(&n.state, goal, &self.params.q_d);
            if r > best.1 {
                best = (i, r);
            }
        }
        best.0
    }
}

/// Proximity reading and reachability Jacobian of a freshly created node,
/// linearized around holding the current joint positions.
fn probe_node(env: &EnvModel, s: &SystemState, cmd: &[f64], params: &PlannerParams) -> Result<(Vec<f64>, DMatrix<f64>), SimError> {
    let prox = proximity(env, s).d;
    let jac = control_jacobian_with_step(env, s, cmd, s.q_r(), params.fd_step)?;
    Ok((prox, jac.b_o))
}

pub fn extend(tree: &mut SearchTree, node_idx: usize, cmd: &ActionCommand, env: &EnvModel) -> Result<usize, PlannerError> {
    extend_traced(tree, node_idx, cmd, env).map(|(idx, _)| idx)
}

/// Like [`extend`], also returning the concatenated substep trace.
pub fn extend_traced(
    tree: &mut SearchTree,
    node_idx: usize,
    cmd: &ActionCommand,
    env: &EnvModel,
) -> Result<(usize, RolloutTrace), PlannerError> {
    let node = tree.nodes.get(node_idx).ok_or(PlannerError::NoSuchNode(node_idx))?;
    let k = cmd.step_multiple;
    if k == 0 || cmd.direction.len() != env.n_r || cmd.magnitude.len() != env.n_r {
        return Err(PlannerError::Dimension("action command"));
    }
    let prev = node.absolute_command.clone();
    let target: Vec<f64> = node.state.q_r().iter().zip(cmd.relative()).map(|(q, a)| q + a).collect();
    let target = clip_command(env, &target);

    let mut state = node.state.clone();
    let mut base_states = Vec::with_capacity(k);
    let mut base_commands = Vec::with_capacity(k);
    let mut trace = RolloutTrace::default();
    let mut from = prev.clone();
    for j in 1..=k {
        let w = j as f64 / k as f64;
        let to: Vec<f64> = if j == k {
            target.clone()
        } else {
            prev.iter().zip(&target).map(|(p, t)| p + (t - p) * w).collect()
        };
        let (next, seg) = rollout_segment(env, &state, &from, &to, env.dt_a).inspect_err(|_| tree.stats.failures += 1)?;
        if trace.substates.is_empty() {
            trace = seg;
        } else {
            trace.substates.extend(seg.substates.into_iter().skip(1));
            trace.applied_reference.extend(seg.applied_reference.into_iter().skip(1));
        }
        state = next;
        base_states.push(state.clone());
        base_commands.push(to.clone());
        from = to;
    }

    let (prox, b_o) = probe_node(env, &state, &target, &tree.params).inspect_err(|_| tree.stats.failures += 1)?;
    let rewards = tree.score(&state, &prox, &b_o);
    tree.nodes.push(TreeNode {
        state,
        parent: Some(node_idx),
        action: Some(cmd.clone()),
        absolute_command: target,
        base_commands,
        base_states,
        proximity: prox,
        b_o,
        rewards,
    });
    let idx = tree.nodes.len() - 1;
    if rewards.total > tree.nodes[tree.best_index].rewards.total {
        tree.best_index = idx;
    }
    Ok((idx, trace))
}

/// Path from the root to the node closest to `goal`, expanded to base steps.
pub fn best_trajectory(tree: &SearchTree, goal: &SystemState) -> Trajectory {
    trajectory_to(tree, tree.closest_index(goal))
}

/// Path from the root to node `idx`, expanded to base steps.
pub fn trajectory_to(tree: &SearchTree, idx: usize) -> Trajectory {
    let path = tree.path_to(idx);
    let mut traj = Trajectory {
        start_command: tree.root().absolute_command.clone(),
        states: vec![tree.root().state.clone()],
        commands: Vec::new(),
    };
    for &i in &path[1..] {
        let n = &tree.nodes[i];
        traj.states.extend(n.base_states.iter().cloned());
        traj.commands.extend(n.base_commands.iter().cloned());
    }
    traj
}

/// `1 - r_d(best) / r_d(s_0)` over all nodes, clamped to `[0, 1]`; 1 when the
/// start already scores zero distance.
pub fn search_progress(tree: &SearchTree, s_0: &SystemState, goal: &SystemState) -> f64 {
    let q_d = &tree.params.q_d;
    let r0 = distance_reward(s_0, goal, q_d);
    if r0 == 0.0 {
        return 1.0;
    }
    let best = tree
        .nodes
        .iter()
        .map(|n| distance_reward(&n.state, goal, q_d))
        .fold(f64::NEG_INFINITY, f64::max);
    (1.0 - best / r0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::planner::ActionType;
    use crate::sim::{make_env, TaskId};

    fn setup(task: TaskId) -> (EnvModel, SearchTree) {
        let env = make_env(task, &BTreeMap::new()).unwrap();
        let p = PlannerParams::for_task(&env);
        let tree = SearchTree::new(&env, &env.start, &env.goal, &p).unwrap();
        (env, tree)
    }

    fn action(dir: Vec<f64>, mag: Vec<f64>, k: usize) -> ActionCommand {
        ActionCommand {
            method: ActionType::Random,
            direction: dir,
            magnitude: mag,
            step_multiple: k,
        }
    }

    #[test]
    fn zero_action_keeps_static_state() {
        let (env, mut tree) = setup(TaskId::BoxPush1d);
        let idx = extend(&mut tree, 0, &action(vec![1.0], vec![0.0], 1), &env).unwrap();
        assert_eq!(tree.nodes[idx].state, tree.nodes[0].state);
        assert_eq!(tree.nodes[idx].parent, Some(0));
        assert_eq!(tree.len(), 2);
    }

    #[test]
    fn multiple_step_trace_length() {
        let (env, mut tree) = setup(TaskId::BoxPush2d);
        let (idx, trace) = extend_traced(&mut tree, 0, &action(vec![0.6, 0.8], vec![0.3, 0.2], 3), &env).unwrap();
        assert_eq!(trace.substates.len(), 3 * env.substeps_per_action() + 1);
        assert_eq!(tree.nodes[idx].base_states.len(), 3);
        let traj = trajectory_to(&tree, idx);
        assert_eq!(traj.commands.len(), 3);
        assert_eq!(traj.states.len(), 4);
    }

    #[test]
    fn single_node_queries() {
        let (env, mut tree) = setup(TaskId::PlanarHand);
        let traj = best_trajectory(&tree, &env.goal);
        assert_eq!(traj.states.len(), 1);
        assert!(traj.commands.is_empty());
        assert_eq!(search_progress(&tree, &env.start, &env.goal), 0.0);
        tree.recompute_rewards(&env.start);
        assert_eq!(tree.best_index, 0);
    }

    #[test]
    fn recompute_with_same_goal_is_idempotent() {
        let (env, mut tree) = setup(TaskId::BoxPush1d);
        for (d, m) in [(1.0, 0.5), (-1.0, 0.3), (1.0, 0.66)] {
            let last = tree.len() - 1;
            extend(&mut tree, last, &action(vec![d], vec![m], 2), &env).unwrap();
        }
        let before: Vec<_> = tree.nodes.iter().map(|n| n.rewards).collect();
        let best = tree.best_index;
        tree.recompute_rewards(&env.goal);
        let after: Vec<_> = tree.nodes.iter().map(|n| n.rewards).collect();
        assert_eq!(before, after);
        assert_eq!(best, tree.best_index);
    }

    #[test]
    fn progress_arithmetic() {
        let (env, mut tree) = setup(TaskId::BoxPush1d);
        let mut s = env.goal.clone();
        s.q_o_mut()[0] -= 0.5;
        tree.nodes[0].state = s;
        let mut s0 = env.goal.clone();
        s0.q_o_mut()[0] -= 2.0;
        assert!((search_progress(&tree, &s0, &env.goal) - 0.75).abs() < 1e-12);
        assert_eq!(search_progress(&tree, &env.goal, &env.goal), 1.0);
    }
}
