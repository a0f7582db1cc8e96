use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pretrain::{pretrain, successful_demos, PretrainOutcome};
use super::{ddpg_update, demo_trajectory, dual_policy_select, policy_action, Agent, DemoMode, DemoSet, Episode, LearnerError, PretrainMode, ReplayBuffer, TrainConfig};
use crate::nn::Mlp;
use crate::sim::{is_penetrating, rollout_map, EnvModel, SimError, SystemState};

fn perturbed<R: Rng + ?Sized>(env: &EnvModel, center: &SystemState, noise: &[f64], rng: &mut R) -> Result<SystemState, SimError> {
    for _ in 0..env.sample_retries.max(1) {
        let data: Vec<f64> = center
            .as_slice()
            .iter()
            .zip(noise)
            .zip(env.state_min.iter().zip(&env.state_max))
            .map(|((c, n), (lo, hi))| {
                let v = if *n > 0.0 { c + rng.gen_range(-n..=*n) } else { *c };
                v.clamp(*lo, *hi)
            })
            .collect();
        let s = SystemState::from_flat(env.n_r, env.n_o, data)?;
        if !is_penetrating(env, &s) {
            return Ok(s);
        }
    }
    Err(SimError::RetryExhausted {
        retries: env.sample_retries,
    })
}

/// Task start with uniform noise of width `start_noise`, resampled while
/// penetrating.
pub fn sample_start<R: Rng + ?Sized>(env: &EnvModel, rng: &mut R) -> Result<SystemState, SimError> {
    perturbed(env, &env.start, &env.start_noise, rng)
}

/// Task goal with uniform noise of width `goal_noise`.
pub fn sample_goal_state<R: Rng + ?Sized>(env: &EnvModel, rng: &mut R) -> Result<SystemState, SimError> {
    perturbed(env, &env.goal, &env.goal_noise, rng)
}

pub fn sample_task_pair<R: Rng + ?Sized>(env: &EnvModel, rng: &mut R) -> Result<(SystemState, SystemState), SimError> {
    Ok((sample_start(env, rng)?, sample_goal_state(env, rng)?))
}

/// Chance that the next episode of a cycle is a demonstration.
pub fn demo_probability(cfg: &TrainConfig, epoch: usize, success_rate: f64) -> f64 {
    match cfg.demo_mode {
        DemoMode::None => 0.0,
        DemoMode::FixedRatio => cfg.b_p,
        DemoMode::Decaying => cfg.b_p * (1.0 - success_rate),
        DemoMode::InitialOnly if epoch == 0 => cfg.b_p,
        DemoMode::InitialOnly => 0.0,
    }
}

/// Policies acting in the environment.
#[derive(Clone, Copy)]
pub struct Policies<'a> {
    pub agent: &'a Agent,
    /// Imitation policy competing with the RL policy under the critic.
    pub imitation: Option<&'a Mlp>,
}

impl Policies<'_> {
    /// Greedy action and whether the imitation policy supplied it.
    fn greedy(&self, s: &[f64], g: &[f64]) -> (Vec<f64>, bool) {
        match self.imitation {
            Some(il) => dual_policy_select(self.agent, il, s, g),
            None => (self.agent.act(s, g), false),
        }
    }

    fn behaviour<R: Rng + ?Sized>(&self, s: &[f64], g: &[f64], cfg: &TrainConfig, rng: &mut R) -> (Vec<f64>, bool) {
        match self.imitation {
            None => (policy_action(self.agent, s, g, true, cfg.eta, cfg.noise_sigma, rng), false),
            Some(_) => {
                if rng.gen::<f64>() < cfg.eta {
                    let a = (0..self.agent.n_r()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                    return (a, false);
                }
                let (a, used_il) = self.greedy(s, g);
                let a = a
                    .into_iter()
                    .map(|v| {
                        let n: f64 = rng.sample(rand_distr::StandardNormal);
                        (v + cfg.noise_sigma * n).clamp(-1.0, 1.0)
                    })
                    .collect();
                (a, used_il)
            }
        }
    }
}

/// One episode of `n_steps` from `start`; returns it with the number of
/// imitation-policy actions taken.
pub fn run_episode<R: Rng + ?Sized>(
    env: &EnvModel,
    policies: Policies,
    start: &SystemState,
    goal: &SystemState,
    cfg: &TrainConfig,
    explore: bool,
    rng: &mut R,
) -> Result<(Episode, usize), SimError> {
    let agent = policies.agent;
    let g = goal.as_slice();
    let mut s = start.clone();
    let mut prev_cmd = start.q_r().to_vec();
    let mut states = vec![s.as_slice().to_vec()];
    let mut actions = Vec::with_capacity(cfg.n_steps);
    let mut il_steps = 0;
    for _ in 0..cfg.n_steps {
        let (a, used_il) = if explore {
            policies.behaviour(s.as_slice(), g, cfg, rng)
        } else {
            policies.greedy(s.as_slice(), g)
        };
        il_steps += used_il as usize;
        let cmd = agent.to_command(&a);
        s = rollout_map(env, &s, &prev_cmd, &cmd)?;
        prev_cmd = cmd;
        states.push(s.as_slice().to_vec());
        actions.push(a);
    }
    Ok((
        Episode {
            s0: start.as_slice().to_vec(),
            goal: g.to_vec(),
            states,
            actions,
            is_demo: false,
        },
        il_steps,
    ))
}

/// Episode counts of one collection cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CycleStats {
    pub rollouts: usize,
    pub demos: usize,
    pub env_steps: usize,
    pub reward_sum: f64,
    /// Behaviour actions drawn from the imitation and RL policies.
    pub il_selections: usize,
    pub rl_selections: usize,
}

/// Appends `cfg.n_rollouts` episodes to `buffer` and updates the input
/// normalizers with them.
#[allow(clippy::too_many_arguments)]
pub fn collect_cycle<R: Rng + ?Sized>(
    env: &EnvModel,
    agent: &mut Agent,
    imitation: Option<&Mlp>,
    demo_set: Option<&DemoSet>,
    cfg: &TrainConfig,
    epoch: usize,
    success_rate: f64,
    buffer: &mut ReplayBuffer,
    rng: &mut R,
) -> Result<CycleStats, LearnerError> {
    let p_demo = demo_probability(cfg, epoch, success_rate);
    let mut stats = CycleStats::default();
    let mut new = Vec::with_capacity(cfg.n_rollouts);
    for _ in 0..cfg.n_rollouts {
        if p_demo > 0.0 && rng.gen::<f64>() < p_demo {
            let set = demo_set.ok_or(LearnerError::NoDemos)?;
            let goal = sample_goal_state(env, rng)?;
            new.push(demo_trajectory(set, &goal, cfg.n_steps)?);
            stats.demos += 1;
            continue;
        }
        let policies = Policies { agent, imitation };
        let mut attempt = 0;
        let (ep, il) = loop {
            let (start, goal) = sample_task_pair(env, rng)?;
            match run_episode(env, policies, &start, &goal, cfg, true, rng) {
                Ok(r) => break r,
                Err(SimError::Divergence { .. }) if attempt == 0 => attempt += 1,
                Err(e) => return Err(e.into()),
            }
        };
        stats.rollouts += 1;
        stats.env_steps += ep.len();
        stats.reward_sum += ep.rewards(cfg.epsilon, &cfg.goal_weights).iter().sum::<f64>();
        stats.il_selections += il;
        stats.rl_selections += ep.len() - il;
        new.push(ep);
    }
    agent.update_normalizers(new.iter().flat_map(|ep| ep.states.iter().map(move |s| (s.as_slice(), ep.goal.as_slice()))));
    for ep in new {
        buffer.push(ep);
    }
    Ok(stats)
}

/// Fraction of `cfg.eval_runs` greedy episodes that reach their goal, and
/// their mean return.
pub fn evaluate<R: Rng + ?Sized>(env: &EnvModel, policies: Policies, cfg: &TrainConfig, rng: &mut R) -> Result<(f64, f64), LearnerError> {
    let mut successes = 0;
    let mut reward = 0.0;
    for _ in 0..cfg.eval_runs {
        let (start, goal) = sample_task_pair(env, rng)?;
        let (ep, _) = run_episode(env, policies, &start, &goal, cfg, false, rng)?;
        let r = ep.rewards(cfg.epsilon, &cfg.goal_weights);
        successes += r.iter().any(|v| *v == 0.0) as usize;
        reward += r.iter().sum::<f64>();
    }
    let n = cfg.eval_runs as f64;
    Ok((successes as f64 / n, reward / n))
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Cumulative on-policy environment steps.
    pub env_steps: usize,
    pub success_rate: f64,
    pub eval_reward: f64,
    /// Mean return of this epoch's exploration rollouts.
    pub mean_episode_reward: f64,
    pub demo_fraction: f64,
    pub demo_episodes: usize,
    pub critic_loss: f64,
    pub actor_objective: f64,
    pub il_selections: usize,
    pub rl_selections: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub imitation: Option<Mlp>,
    pub pretrain: Option<PretrainOutcome>,
    pub metrics: Vec<EpochMetrics>,
    /// Success rate of the held-out evaluation after training.
    pub final_eval: Option<f64>,
}

impl TrainOutcome {
    pub fn final_success(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.success_rate)
    }

    /// Mean success rate over `n_epochs` epochs; epochs skipped by the early
    /// stop count at the last recorded rate.
    pub fn average_success(&self, n_epochs: usize) -> f64 {
        let Some(last) = self.metrics.last() else {
            return 0.0;
        };
        let n = n_epochs.max(self.metrics.len());
        let held = (n - self.metrics.len()) as f64 * last.success_rate;
        (self.metrics.iter().map(|m| m.success_rate).sum::<f64>() + held) / n as f64
    }
}

/// Seeded DDPG training with optional demonstrations and pre-training.
/// Stops early once every evaluation run succeeds.
pub fn train(env: &EnvModel, demo_set: Option<&DemoSet>, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome, LearnerError> {
    cfg.validate(env)?;
    let needs_demos = cfg.demo_mode != DemoMode::None || cfg.pretrain != PretrainMode::None;
    if needs_demos && demo_set.map_or(true, DemoSet::is_empty) {
        return Err(LearnerError::NoDemos);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut agent = Agent::new(env, cfg, &mut rng);

    let mut pre = None;
    if cfg.pretrain != PretrainMode::None {
        let set = demo_set.expect("checked above");
        let demos = successful_demos(env, set, cfg, &mut rng)?;
        pre = Some(pretrain(&mut agent, &demos, cfg, &cfg.goal_weights, &mut rng)?);
    }
    let imitation = match (&pre, cfg.pretrain) {
        (Some(p), PretrainMode::Dual) => Some(p.imitation.clone()),
        _ => None,
    };

    let mut buffer = ReplayBuffer::new(cfg.buffer_episodes);
    let mut metrics = Vec::with_capacity(cfg.n_epochs);
    let mut success_rate = 0.0;
    let mut env_steps = 0;
    for epoch in 0..cfg.n_epochs {
        let mut totals = CycleStats::default();
        let (mut critic_loss, mut actor_objective, mut n_updates) = (0.0, 0.0, 0usize);
        for cycle in 0..cfg.n_cycles {
            let stats = collect_cycle(env, &mut agent, imitation.as_ref(), demo_set, cfg, epoch, success_rate, &mut buffer, &mut rng)
                .map_err(|e| e.context(epoch, cycle))?;
            totals.rollouts += stats.rollouts;
            totals.demos += stats.demos;
            totals.env_steps += stats.env_steps;
            totals.reward_sum += stats.reward_sum;
            totals.il_selections += stats.il_selections;
            totals.rl_selections += stats.rl_selections;
            if buffer.n_transitions() < cfg.n_batch {
                continue;
            }
            for _ in 0..cfg.n_episode {
                let u = ddpg_update(&buffer, &mut agent, cfg, &cfg.goal_weights, &mut rng).map_err(|e| e.context(epoch, cycle))?;
                critic_loss += u.critic_loss;
                actor_objective += u.actor_objective;
                n_updates += 1;
            }
            agent.blend_targets(cfg.tau);
        }
        env_steps += totals.env_steps;
        let policies = Policies {
            agent: &agent,
            imitation: imitation.as_ref(),
        };
        let (rate, eval_reward) = evaluate(env, policies, cfg, &mut eval_rng)?;
        success_rate = rate;
        let per = |v: f64, n: usize| if n == 0 { 0.0 } else { v / n as f64 };
        metrics.push(EpochMetrics {
            epoch,
            env_steps,
            success_rate,
            eval_reward,
            mean_episode_reward: per(totals.reward_sum, totals.rollouts),
            demo_fraction: buffer.demo_fraction(),
            demo_episodes: totals.demos,
            critic_loss: per(critic_loss, n_updates),
            actor_objective: per(actor_objective, n_updates),
            il_selections: totals.il_selections,
            rl_selections: totals.rl_selections,
        });
        if success_rate >= 1.0 || cfg.max_env_steps.is_some_and(|m| env_steps >= m) {
            break;
        }
    }
    let mut final_eval = None;
    if cfg.final_eval_runs > 0 {
        let mut c = cfg.clone();
        c.eval_runs = cfg.final_eval_runs;
        let policies = Policies {
            agent: &agent,
            imitation: imitation.as_ref(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1b5_4a32_d192_ed03);
        final_eval = Some(evaluate(env, policies, &c, &mut rng)?.0);
    }
    Ok(TrainOutcome {
        agent,
        imitation,
        pretrain: pre,
        metrics,
        final_eval,
    })
}

pub fn write_metrics_csv<W: Write>(metrics: &[EpochMetrics], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if metrics.is_empty() {
        w.write_record([
            "epoch",
            "env_steps",
            "success_rate",
            "eval_reward",
            "mean_episode_reward",
            "demo_fraction",
            "demo_episodes",
            "critic_loss",
            "actor_objective",
            "il_selections",
            "rl_selections",
        ])?;
    }
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}
