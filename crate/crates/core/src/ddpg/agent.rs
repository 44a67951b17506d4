use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{exploration_noise, AgentHyperparams, AgentState, ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Mlp};

/// Deterministic policy output for `s`, in `[0, 1]`.
pub fn actor_forward(actor: &Mlp, s: &AgentState) -> f64 {
    actor.forward(&s.to_array())[0]
}

pub fn critic_forward(critic: &Mlp, s: &AgentState, a: f64) -> f64 {
    critic.forward(&[s.progress, s.loss, a])[0]
}

pub fn actor_network(hidden: [usize; 2]) -> Mlp {
    Mlp::zeros(&[2, hidden[0], hidden[1], 1], Activation::Relu, Activation::Sigmoid)
}

pub fn critic_network(hidden: [usize; 2]) -> Mlp {
    Mlp::zeros(&[3, hidden[0], hidden[1], 1], Activation::Relu, Activation::Identity)
}

/// Gradients of one DDPG update, computed before any parameter changes.
#[derive(Debug, Clone)]
pub struct UpdateGradients {
    /// Of the mean squared Bellman residual w.r.t. critic parameters.
    pub critic: Vec<f64>,
    /// Of `-mean Q(s, mu(s))` w.r.t. actor parameters.
    pub actor: Vec<f64>,
    pub critic_loss: f64,
    pub mean_q: f64,
}

pub fn update_gradients(
    actor: &Mlp,
    critic: &Mlp,
    target_actor: &Mlp,
    target_critic: &Mlp,
    gamma: f64,
    batch: &[Transition],
) -> UpdateGradients {
    let n = batch.len() as f64;
    let mut gc = vec![0.0; critic.num_params()];
    let mut ga = vec![0.0; actor.num_params()];
    let mut scratch = vec![0.0; critic.num_params()];
    let mut critic_loss = 0.0;
    let mut mean_q = 0.0;
    for t in batch {
        let a_next = actor_forward(target_actor, &t.next_state);
        let y = t.reward + gamma * critic_forward(target_critic, &t.next_state, a_next);
        let cache = critic.forward_cached(&[t.state.progress, t.state.loss, t.action]);
        let r = cache.output()[0] - y;
        critic_loss += r * r / n;
        critic.backward(&cache, &[2.0 * r / n], &mut gc);

        let acache = actor.forward_cached(&t.state.to_array());
        let a = acache.output()[0];
        let qcache = critic.forward_cached(&[t.state.progress, t.state.loss, a]);
        mean_q += qcache.output()[0] / n;
        let dq = critic.backward(&qcache, &[1.0], &mut scratch);
        actor.backward(&acache, &[-dq[2] / n], &mut ga);
    }
    UpdateGradients {
        critic: gc,
        actor: ga,
        critic_loss,
        mean_q,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub mean_q: f64,
}

/// One actor-critic pair with targets, optimizers and its own replay buffer.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    pub buffer: ReplayBuffer,
    hyper: AgentHyperparams,
    rng: ChaCha8Rng,
    pending: Option<(AgentState, f64)>,
    updates: u64,
    skipped_nonfinite: u64,
}

impl DdpgAgent {
    pub fn new(hyper: AgentHyperparams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = hyper.hidden;
        let actor = Mlp::random(&[2, h[0], h[1], 1], Activation::Relu, Activation::Sigmoid, 3e-3, &mut rng);
        let critic = Mlp::random(&[3, h[0], h[1], 1], Activation::Relu, Activation::Identity, 3e-3, &mut rng);
        Self::from_networks(actor, critic, hyper, rng)
    }

    pub fn from_networks(actor: Mlp, critic: Mlp, hyper: AgentHyperparams, rng: ChaCha8Rng) -> Self {
        Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor_opt: Adam::new(hyper.actor_lr, actor.num_params()),
            critic_opt: Adam::new(hyper.critic_lr, critic.num_params()),
            buffer: ReplayBuffer::new(hyper.buffer_capacity),
            actor,
            critic,
            hyper,
            rng,
            pending: None,
            updates: 0,
            skipped_nonfinite: 0,
        }
    }

    pub fn hyper(&self) -> &AgentHyperparams {
        &self.hyper
    }

    /// Successful gradient updates so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Updates dropped because a gradient was not finite.
    pub fn skipped_nonfinite(&self) -> u64 {
        self.skipped_nonfinite
    }

    pub fn policy(&self, s: &AgentState) -> f64 {
        actor_forward(&self.actor, s)
    }

    /// Closes the pending transition with `s` as its next state, then acts
    /// from `s` with exploration noise.
    pub fn step(&mut self, s: AgentState) -> f64 {
        if let Some((prev, action)) = self.pending.take() {
            self.buffer.push(Transition {
                state: prev,
                action,
                reward: super::reward(s.loss),
                next_state: s,
            });
        }
        let a = exploration_noise(self.policy(&s), self.hyper.noise_scale, &mut self.rng);
        self.pending = Some((s, a));
        a
    }

    /// Samples a batch and applies one update.
    pub fn update(&mut self) -> Result<UpdateStats> {
        let batch = self.buffer.sample(self.hyper.batch_size, &mut self.rng)?;
        self.update_on(&batch)
    }

    /// One update on a given batch: critic and actor steps, then soft target updates.
    pub fn update_on(&mut self, batch: &[Transition]) -> Result<UpdateStats> {
        let g = update_gradients(
            &self.actor,
            &self.critic,
            &self.target_actor,
            &self.target_critic,
            self.hyper.gamma,
            batch,
        );
        if !g.critic.iter().chain(&g.actor).all(|v| v.is_finite()) {
            self.skipped_nonfinite += 1;
            return Err(Error::NonFiniteGradient("ddpg actor/critic".into()));
        }
        self.critic_opt.step(self.critic.params_mut(), &g.critic);
        self.actor_opt.step(self.actor.params_mut(), &g.actor);
        self.target_critic.soft_update_from(&self.critic, self.hyper.tau);
        self.target_actor.soft_update_from(&self.actor, self.hyper.tau);
        self.updates += 1;
        Ok(UpdateStats {
            critic_loss: g.critic_loss,
            mean_q: g.mean_q,
        })
    }
}
