use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{LearnerError, ReplayBuffer, TrainConfig, Transition};
use crate::nn::{polyak_blend, Adam, Checkpoint, Mlp, Normalizer, OutputActivation};
use crate::sim::EnvModel;

/// Actor-critic pair with target copies, optimizers and input normalizers.
///
/// Actions live in `[-1, 1]^n_r` and map affinely onto absolute joint
/// position commands within the joint bounds.
#[derive(Clone, Debug)]
pub struct Agent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub obs_norm: Normalizer,
    pub goal_norm: Normalizer,
    pub joint_min: Vec<f64>,
    pub joint_max: Vec<f64>,
}

/// Losses of one gradient step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(env: &EnvModel, cfg: &TrainConfig, rng: &mut R) -> Self {
        let (n_s, n_r) = (env.n_s(), env.n_r);
        let hidden = cfg.hidden();
        let mut actor_sizes = vec![2 * n_s];
        actor_sizes.extend(&hidden);
        actor_sizes.push(n_r);
        let mut critic_sizes = vec![2 * n_s + n_r];
        critic_sizes.extend(&hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, OutputActivation::Tanh, 1e-2, rng);
        let critic = Mlp::new(&critic_sizes, OutputActivation::Identity, 1.0, rng);
        Self {
            actor_opt: Adam::new(&actor, cfg.lr_actor),
            critic_opt: Adam::new(&critic, cfg.lr_critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            obs_norm: Normalizer::new(n_s, cfg.norm_clip),
            goal_norm: Normalizer::new(n_s, cfg.norm_clip),
            joint_min: env.joint_min().to_vec(),
            joint_max: env.joint_max().to_vec(),
        }
    }

    pub fn n_s(&self) -> usize {
        self.obs_norm.dim()
    }

    pub fn n_r(&self) -> usize {
        self.joint_min.len()
    }

    /// Absolute joint command for a normalized action.
    pub fn to_command(&self, a: &[f64]) -> Vec<f64> {
        action_to_command(a, &self.joint_min, &self.joint_max)
    }

    /// Normalized action for an absolute joint command.
    pub fn from_command(&self, cmd: &[f64]) -> Vec<f64> {
        command_to_action(cmd, &self.joint_min, &self.joint_max)
    }

    fn write_input(&self, s: &[f64], g: &[f64], row: &mut [f64]) {
        let n = self.n_s();
        self.obs_norm.normalize_into(s, &mut row[..n]);
        self.goal_norm.normalize_into(g, &mut row[n..2 * n]);
    }

    /// Normalized actor inputs, one row per `(s, g)` pair.
    pub fn actor_inputs<'a, I>(&self, pairs: I) -> Array2<f64>
    where
        I: ExactSizeIterator<Item = (&'a [f64], &'a [f64])>,
    {
        let mut x = Array2::zeros((pairs.len(), 2 * self.n_s()));
        for (i, (s, g)) in pairs.enumerate() {
            self.write_input(s, g, x.row_mut(i).as_slice_mut().unwrap());
        }
        x
    }

    fn critic_inputs(&self, x: &Array2<f64>, a: &Array2<f64>) -> Array2<f64> {
        ndarray::concatenate![ndarray::Axis(1), *x, *a]
    }

    /// Deterministic policy output.
    pub fn act(&self, s: &[f64], g: &[f64]) -> Vec<f64> {
        act_with(&self.actor, self, s, g)
    }

    pub fn q_value(&self, s: &[f64], g: &[f64], a: &[f64]) -> f64 {
        let x = self.actor_inputs(std::iter::once((s, g)));
        let a = Array2::from_shape_vec((1, a.len()), a.to_vec()).unwrap();
        self.critic.forward(self.critic_inputs(&x, &a).view()).unwrap()[(0, 0)]
    }

    pub fn update_normalizers<'a, I>(&mut self, pairs: I)
    where
        I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
    {
        let (s, g): (Vec<&[f64]>, Vec<&[f64]>) = pairs.into_iter().unzip();
        self.obs_norm.update(s);
        self.goal_norm.update(g);
    }

    pub fn blend_targets(&mut self, tau: f64) {
        polyak_blend(&mut self.actor_target, &self.actor, tau).expect("target shares architecture");
        polyak_blend(&mut self.critic_target, &self.critic, tau).expect("target shares architecture");
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            nets: vec![
                ("actor".into(), self.actor.clone()),
                ("critic".into(), self.critic.clone()),
                ("actor_target".into(), self.actor_target.clone()),
                ("critic_target".into(), self.critic_target.clone()),
            ],
            normalizers: vec![("obs".into(), self.obs_norm.clone()), ("goal".into(), self.goal_norm.clone())],
        }
    }
}

/// Maps `[-1, 1]` affinely onto `[lo, hi]` per joint.
pub fn action_to_command(a: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(lo.iter().zip(hi))
        .map(|(a, (lo, hi))| {
            let t = 0.5 * (a + 1.0);
            lo * (1.0 - t) + hi * t
        })
        .collect()
}

/// Inverse of [`action_to_command`], clipped to `[-1, 1]`.
pub fn command_to_action(cmd: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    cmd.iter()
        .zip(lo.iter().zip(hi))
        .map(|(c, (lo, hi))| {
            let half = 0.5 * (hi - lo);
            if half > 0.0 {
                ((c - 0.5 * (lo + hi)) / half).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Output of `actor` on the agent's normalized inputs.
pub(crate) fn act_with(actor: &Mlp, agent: &Agent, s: &[f64], g: &[f64]) -> Vec<f64> {
    let mut row = vec![0.0; 2 * agent.n_s()];
    agent.write_input(s, g, &mut row);
    actor.forward_one(&row).expect("actor input width")
}

/// Behaviour action: with `explore`, a uniform action with probability
/// `eta`, otherwise the policy plus Gaussian noise, clipped to `[-1, 1]`.
pub fn policy_action<R: Rng + ?Sized>(agent: &Agent, s: &[f64], g: &[f64], explore: bool, eta: f64, sigma: f64, rng: &mut R) -> Vec<f64> {
    if !explore {
        return agent.act(s, g);
    }
    if rng.gen::<f64>() < eta {
        return (0..agent.n_r()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    }
    agent
        .act(s, g)
        .into_iter()
        .map(|a| {
            let n: f64 = rng.sample(StandardNormal);
            (a + sigma * n).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Picks between the RL policy and an imitation policy by the shared critic.
/// Returns the action and whether the imitation policy won; ties go to RL.
pub fn dual_policy_select(agent: &Agent, imitation: &Mlp, s: &[f64], g: &[f64]) -> (Vec<f64>, bool) {
    let a_rl = agent.act(s, g);
    let a_il = act_with(imitation, agent, s, g);
    if agent.q_value(s, g, &a_il) > agent.q_value(s, g, &a_rl) {
        (a_il, true)
    } else {
        (a_rl, false)
    }
}

fn rows(transitions: &[Transition], f: impl Fn(&Transition) -> &[f64]) -> Array2<f64> {
    let width = f(&transitions[0]).len();
    let mut out = Array2::zeros((transitions.len(), width));
    for (i, t) in transitions.iter().enumerate() {
        out.row_mut(i).as_slice_mut().unwrap().copy_from_slice(f(t));
    }
    out
}

/// One critic regression step and one actor ascent step on `batch`.
pub fn ddpg_update_on_batch(agent: &mut Agent, batch: &[Transition], cfg: &TrainConfig) -> Result<UpdateStats, LearnerError> {
    let b = batch.len() as f64;
    let n_r = agent.n_r();
    let x = agent.actor_inputs(batch.iter().map(|t| (t.s.as_slice(), t.s_g.as_slice())));
    let x_next = agent.actor_inputs(batch.iter().map(|t| (t.s_next.as_slice(), t.s_g.as_slice())));
    let a = rows(batch, |t| &t.a);

    let a_next = agent.actor_target.forward(x_next.view())?;
    let q_next = agent.critic_target.forward(agent.critic_inputs(&x_next, &a_next).view())?;
    let floor = cfg.value_floor();
    let targets: Vec<f64> = batch
        .iter()
        .zip(q_next.column(0))
        .map(|(t, q)| (t.r + cfg.gamma * q).clamp(floor, 0.0))
        .collect();

    let cache = agent.critic.forward_cached(agent.critic_inputs(&x, &a).view())?;
    let mut upstream = Array2::zeros((batch.len(), 1));
    let mut critic_loss = 0.0;
    for (i, v) in targets.iter().enumerate() {
        let diff = cache.output()[(i, 0)] - v;
        critic_loss += diff * diff / b;
        upstream[(i, 0)] = 2.0 * diff / b;
    }
    if !critic_loss.is_finite() {
        return Err(LearnerError::NonFinite(format!("critic loss {critic_loss} on a batch of {}", batch.len())));
    }
    let (g_critic, _) = agent.critic.backward_cached(&cache, upstream.view())?;
    agent.critic_opt.step(&mut agent.critic, &g_critic)?;

    let actor_cache = agent.actor.forward_cached(x.view())?;
    let a_pi = actor_cache.output().clone();
    let q_cache = agent.critic.forward_cached(agent.critic_inputs(&x, &a_pi).view())?;
    let actor_objective = q_cache.output().column(0).sum() / b;
    let up_q = Array2::from_elem((batch.len(), 1), -1.0 / b);
    let (_, dx) = agent.critic.backward_cached(&q_cache, up_q.view())?;
    let mut da = dx.slice(s![.., dx.ncols() - n_r..]).to_owned();
    let l2 = 2.0 * cfg.action_l2 / (b * n_r as f64);
    da.zip_mut_with(&a_pi, |d, a| *d += l2 * a);
    let (g_actor, _) = agent.actor.backward_cached(&actor_cache, da.view())?;
    if !actor_objective.is_finite() {
        return Err(LearnerError::NonFinite(format!("actor objective {actor_objective}")));
    }
    agent.actor_opt.step(&mut agent.actor, &g_actor)?;
    Ok(UpdateStats {
        critic_loss,
        actor_objective,
    })
}

/// Samples a minibatch and runs [`ddpg_update_on_batch`].
pub fn ddpg_update<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    agent: &mut Agent,
    cfg: &TrainConfig,
    q_d: &[f64],
    rng: &mut R,
) -> Result<UpdateStats, LearnerError> {
    if buffer.n_transitions() < cfg.n_batch {
        return Err(LearnerError::BufferTooSmall {
            have: buffer.n_transitions(),
            need: cfg.n_batch,
        });
    }
    let batch = buffer.sample(cfg.n_batch, cfg.p_her, cfg.epsilon, q_d, rng);
    ddpg_update_on_batch(agent, &batch, cfg)
}
