use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::planner::weighted_norm;

/// `0` when the weighted goal distance of `s_t` is at most `epsilon` times
/// that of `s_0`, else `-1`. A start that already sits on the goal counts as
/// success.
pub fn sparse_reward(s_t: &[f64], s_0: &[f64], s_g: &[f64], epsilon: f64, q_d: &[f64]) -> f64 {
    let dist = |s: &[f64]| {
        let diff: Vec<f64> = s.iter().zip(s_g).map(|(a, b)| a - b).collect();
        weighted_norm(&diff, q_d)
    };
    let d0 = dist(s_0);
    if d0 == 0.0 || dist(s_t) <= epsilon * d0 {
        0.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    /// Normalized action in `[-1, 1]`.
    pub a: Vec<f64>,
    pub s_g: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub is_demo: bool,
}

/// One fixed-horizon episode. Rewards are not stored; they are recomputed
/// from `s0`, `goal` and the successor states whenever needed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub s0: Vec<f64>,
    pub goal: Vec<f64>,
    /// `n_steps + 1` states.
    pub states: Vec<Vec<f64>>,
    /// `n_steps` normalized actions.
    pub actions: Vec<Vec<f64>>,
    pub is_demo: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn transition(&self, t: usize, goal: &[f64], epsilon: f64, q_d: &[f64]) -> Transition {
        Transition {
            s: self.states[t].clone(),
            a: self.actions[t].clone(),
            s_g: goal.to_vec(),
            r: sparse_reward(&self.states[t + 1], &self.s0, goal, epsilon, q_d),
            s_next: self.states[t + 1].clone(),
            is_demo: self.is_demo,
        }
    }

    pub fn transitions(&self, epsilon: f64, q_d: &[f64]) -> Vec<Transition> {
        (0..self.len()).map(|t| self.transition(t, &self.goal, epsilon, q_d)).collect()
    }

    pub fn rewards(&self, epsilon: f64, q_d: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|t| sparse_reward(&self.states[t + 1], &self.s0, &self.goal, epsilon, q_d))
            .collect()
    }

    /// Whether any successor state meets the success threshold.
    pub fn reached_goal(&self, epsilon: f64, q_d: &[f64]) -> bool {
        self.rewards(epsilon, q_d).iter().any(|r| *r == 0.0)
    }

    /// Transition `t` with its goal replaced by a state achieved later in the
    /// episode.
    pub fn relabeled<R: Rng + ?Sized>(&self, t: usize, epsilon: f64, q_d: &[f64], rng: &mut R) -> Transition {
        let future = rng.gen_range(t + 1..=self.len());
        self.transition(t, &self.states[future], epsilon, q_d)
    }
}

/// Hindsight copies: each transition is relabeled with probability `p_her`.
pub fn her_relabel<R: Rng + ?Sized>(episode: &Episode, p_her: f64, epsilon: f64, q_d: &[f64], rng: &mut R) -> Vec<Transition> {
    let mut out = Vec::new();
    for t in 0..episode.len() {
        if rng.gen::<f64>() < p_her {
            out.push(episode.relabeled(t, epsilon, q_d, rng));
        }
    }
    out
}

/// FIFO ring of episodes.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Episode>,
    demo_count: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            episodes: VecDeque::with_capacity(capacity.min(4096)),
            demo_count: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn n_transitions(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter()
    }

    pub fn push(&mut self, ep: Episode) {
        if self.episodes.len() == self.capacity {
            let old = self.episodes.pop_front().unwrap();
            self.demo_count -= old.is_demo as usize;
        }
        self.demo_count += ep.is_demo as usize;
        self.episodes.push_back(ep);
    }

    /// Fraction of stored episodes that are demonstrations.
    pub fn demo_fraction(&self) -> f64 {
        if self.episodes.is_empty() {
            0.0
        } else {
            self.demo_count as f64 / self.episodes.len() as f64
        }
    }

    /// Uniform transitions, each relabeled with probability `p_her`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, p_her: f64, epsilon: f64, q_d: &[f64], rng: &mut R) -> Vec<Transition> {
        assert!(!self.episodes.is_empty());
        (0..n)
            .map(|_| {
                let ep = &self.episodes[rng.gen_range(0..self.episodes.len())];
                let t = rng.gen_range(0..ep.len());
                if p_her > 0.0 && rng.gen::<f64>() < p_her {
                    ep.relabeled(t, epsilon, q_d, rng)
                } else {
                    ep.transition(t, &ep.goal, epsilon, q_d)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const Q: [f64; 2] = [1.0, 1.0];

    fn episode(n: usize, demo: bool) -> Episode {
        Episode {
            s0: vec![0.0, 0.0],
            goal: vec![1.0, 0.0],
            states: (0..=n).map(|i| vec![i as f64 / n as f64, 0.0]).collect(),
            actions: vec![vec![0.0]; n],
            is_demo: demo,
        }
    }

    #[test]
    fn reward_conventions() {
        let (s0, g) = ([0.0, 0.0], [1.0, 0.0]);
        assert_eq!(sparse_reward(&g, &s0, &g, 0.2, &Q), 0.0);
        assert_eq!(sparse_reward(&s0, &s0, &g, 0.2, &Q), -1.0);
        assert_eq!(sparse_reward(&[0.5, 0.0], &s0, &g, 0.5, &Q), 0.0);
        assert_eq!(sparse_reward(&[0.3, 0.0], &g, &g, 0.2, &Q), 0.0);
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            let mut e = episode(4, i % 2 == 0);
            e.goal = vec![i as f64, 0.0];
            b.push(e);
        }
        assert_eq!(b.len(), 3);
        let goals: Vec<f64> = b.episodes().map(|e| e.goal[0]).collect();
        assert_eq!(goals, vec![2.0, 3.0, 4.0]);
        assert!((b.demo_fraction() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn self_goal_relabel_succeeds() {
        let ep = episode(5, false);
        let t = ep.transition(2, &ep.states[3], 0.2, &Q);
        assert_eq!(t.r, 0.0);
    }

    #[test]
    fn relabel_rates() {
        let ep = episode(10, false);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(her_relabel(&ep, 0.0, 0.2, &Q, &mut rng).is_empty());
        let mut n = 0;
        for _ in 0..1000 {
            n += her_relabel(&ep, 0.8, 0.2, &Q, &mut rng).len();
        }
        assert!((n as f64 / 10_000.0 - 0.8).abs() < 0.02);
    }

    #[test]
    fn sampled_rewards_match_recomputation() {
        let mut b = ReplayBuffer::new(10);
        b.push(episode(8, true));
        b.push(episode(8, false));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in b.sample(500, 0.5, 0.2, &Q, &mut rng) {
            assert_eq!(t.r, sparse_reward(&t.s_next, &[0.0, 0.0], &t.s_g, 0.2, &Q));
        }
    }
}
