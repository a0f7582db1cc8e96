use ndarray::Array2;
use rand::Rng;

use super::{demo_trajectory, sample_goal_state, Agent, DemoSet, Episode, LearnerError, PretrainMode, TrainConfig};
use crate::nn::Mlp;
use crate::sim::EnvModel;

/// Discounted returns `v_t = sum_j gamma^(j - t) r_j` to the end of the episode.
pub fn mc_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Demonstrations toward `cfg.pretrain_demos` sampled goals, keeping only
/// those that reach their goal.
pub fn successful_demos<R: Rng + ?Sized>(env: &EnvModel, demo_set: &DemoSet, cfg: &TrainConfig, rng: &mut R) -> Result<Vec<Episode>, LearnerError> {
    let mut out = Vec::new();
    for _ in 0..cfg.pretrain_demos {
        let goal = sample_goal_state(env, rng)?;
        let ep = demo_trajectory(demo_set, &goal, cfg.n_steps)?;
        if ep.reached_goal(cfg.epsilon, &cfg.goal_weights) {
            out.push(ep);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct PretrainOutcome {
    /// Policy fitted to the demonstrations.
    pub imitation: Mlp,
    pub policy_loss: f64,
    pub value_loss: Option<f64>,
    pub n_samples: usize,
}

struct Sample<'a> {
    s: &'a [f64],
    g: &'a [f64],
    a: &'a [f64],
    v: f64,
}

/// Supervised initialization of the actor, and of the critic for the value
/// modes, from goal-reaching demonstrations.
pub fn pretrain<R: Rng + ?Sized>(
    agent: &mut Agent,
    demos: &[Episode],
    cfg: &TrainConfig,
    q_d: &[f64],
    rng: &mut R,
) -> Result<PretrainOutcome, LearnerError> {
    if demos.is_empty() {
        return Err(LearnerError::NoSuccessfulDemos);
    }
    let mut samples = Vec::new();
    for ep in demos {
        let v = mc_returns(&ep.rewards(cfg.epsilon, q_d), cfg.gamma);
        for t in 0..ep.len() {
            samples.push(Sample {
                s: &ep.states[t],
                g: &ep.goal,
                a: &ep.actions[t],
                v: v[t],
            });
        }
    }
    agent.update_normalizers(demos.iter().flat_map(|ep| ep.states.iter().map(move |s| (s.as_slice(), ep.goal.as_slice()))));

    let train_value = matches!(cfg.pretrain, PretrainMode::PolicyValue | PretrainMode::Dual);
    let n_r = agent.n_r();
    let b = cfg.n_batch.min(samples.len());
    let (mut policy_loss, mut value_loss) = (0.0, 0.0);
    for _ in 0..cfg.pretrain_updates {
        let batch: Vec<&Sample> = (0..b).map(|_| &samples[rng.gen_range(0..samples.len())]).collect();
        let x = agent.actor_inputs(batch.iter().map(|s| (s.s, s.g)));

        let cache = agent.actor.forward_cached(x.view())?;
        let mut up = Array2::zeros((b, n_r));
        policy_loss = 0.0;
        let scale = 1.0 / (b * n_r) as f64;
        for (i, s) in batch.iter().enumerate() {
            for j in 0..n_r {
                let d = cache.output()[(i, j)] - s.a[j];
                policy_loss += d * d * scale;
                up[(i, j)] = 2.0 * d * scale;
            }
        }
        if !policy_loss.is_finite() {
            return Err(LearnerError::NonFinite(format!("pretraining policy loss {policy_loss}")));
        }
        let (g, _) = agent.actor.backward_cached(&cache, up.view())?;
        agent.actor_opt.step(&mut agent.actor, &g)?;

        if train_value {
            let mut xa = Array2::zeros((b, x.ncols() + n_r));
            xa.slice_mut(ndarray::s![.., ..x.ncols()]).assign(&x);
            for (i, s) in batch.iter().enumerate() {
                for j in 0..n_r {
                    xa[(i, x.ncols() + j)] = s.a[j];
                }
            }
            let cache = agent.critic.forward_cached(xa.view())?;
            let mut up = Array2::zeros((b, 1));
            value_loss = 0.0;
            for (i, s) in batch.iter().enumerate() {
                let d = cache.output()[(i, 0)] - s.v;
                value_loss += d * d / b as f64;
                up[(i, 0)] = 2.0 * d / b as f64;
            }
            if !value_loss.is_finite() {
                return Err(LearnerError::NonFinite(format!("pretraining value loss {value_loss}")));
            }
            let (g, _) = agent.critic.backward_cached(&cache, up.view())?;
            agent.critic_opt.step(&mut agent.critic, &g)?;
        }
    }
    agent.blend_targets(1.0);
    Ok(PretrainOutcome {
        imitation: agent.actor.clone(),
        policy_loss,
        value_loss: train_value.then_some(value_loss),
        n_samples: samples.len(),
    })
}
