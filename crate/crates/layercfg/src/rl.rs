//! Actor-critic depth controller: epsilon-greedy action selection over
//! {add layer, remove layer}, reward shaping from loss deltas, a FIFO replay
//! buffer, a policy-gradient actor update, and a semi-gradient TD critic
//! update.

use std::collections::VecDeque;

use rand::Rng;

use crate::env::{Environment, LayerCount};
use crate::error::{Error, Result};
use crate::nn::{Activation, Gradients, LayerSpec, Network};
use crate::seeding;
use crate::tensor::Tensor;

/// Denominator guard for the reward formula.
pub const REWARD_EPS_DEN: f64 = 1e-8;
/// Rewards are clipped to this symmetric range.
pub const REWARD_CLIP: f64 = 10.0;
/// Smallest probability used inside `ln` and its gradient.
pub const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Add,
    Remove,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Add, Action::Remove];

    pub fn delta(self) -> i64 {
        match self {
            Action::Add => 1,
            Action::Remove => -1,
        }
    }

    /// Position in policy/value network outputs: 0 = add, 1 = remove.
    pub fn index(self) -> usize {
        match self {
            Action::Add => 0,
            Action::Remove => 1,
        }
    }

    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::Add
        } else {
            Action::Remove
        }
    }
}

/// One replay record: `(loss_t, a_t, loss_{t+1}, r_t)`. Losses are stored
/// raw; normalization happens at network-input time.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub state: f64,
    pub action: Action,
    pub next_state: f64,
    pub reward: f64,
}

/// FIFO buffer with oldest-first eviction.
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    records: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        ReplayBuffer {
            capacity,
            records: VecDeque::with_capacity(capacity.min(4096)),
        }
    }

    pub fn push(&mut self, tr: Transition) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(tr);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.records.iter()
    }

    /// Uniform sample of `batch_size` transitions, with replacement.
    pub fn sample<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if self.records.is_empty() {
            return Err(Error::Empty("replay buffer"));
        }
        Ok((0..batch_size)
            .map(|_| self.records[rng.gen_range(0..self.records.len())])
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct RLConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden_dim: usize,
    /// Learning steps to run critic-only before actor updates begin; lets
    /// the critic's Q values shrink toward reward scale so early TD errors
    /// do not push the policy in an arbitrary direction.
    pub actor_warmup_steps: usize,
    /// Positive divisor applied to raw losses before they enter the nets.
    /// `None` locks it to the first evaluated loss of the controller's
    /// first episode, keeping one consistent scale across the whole run.
    pub state_scale: Option<f64>,
    /// Re-initialize the critic every this many learning steps. Each fresh
    /// critic gives the actor another independent convergence transient,
    /// which is when the TD error still carries an advantage signal; the
    /// per-critic approximation bias averages out across restarts.
    pub critic_reset_period: Option<usize>,
}

impl Default for RLConfig {
    fn default() -> Self {
        RLConfig {
            gamma: 0.9,
            epsilon: 0.1,
            buffer_capacity: 1000,
            batch_size: 32,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            hidden_dim: 32,
            actor_warmup_steps: 0,
            state_scale: None,
            critic_reset_period: None,
        }
    }
}

/// Actor: normalized loss -> probabilities over (add, remove).
pub struct PolicyNet {
    pub net: Network,
}

impl PolicyNet {
    pub fn new(hidden_dim: usize, lr: f64, seed: u64) -> Result<PolicyNet> {
        let net = Network::new(
            &[1],
            &[
                LayerSpec::Dense {
                    in_dim: 1,
                    out_dim: hidden_dim,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    in_dim: hidden_dim,
                    out_dim: hidden_dim,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    in_dim: hidden_dim,
                    out_dim: 2,
                    activation: Activation::Softmax,
                },
            ],
            lr,
            seed,
        )?;
        Ok(PolicyNet { net })
    }

    pub fn probs(&mut self, state_norm: f64) -> Result<[f64; 2]> {
        let x = Tensor::from_vec(&[1, 1], vec![state_norm])?;
        let y = self.net.forward(&x)?;
        Ok([y.data()[0], y.data()[1]])
    }

    pub fn probs_batch(&mut self, states_norm: &[f64]) -> Result<Tensor> {
        let x = Tensor::from_vec(&[states_norm.len(), 1], states_norm.to_vec())?;
        self.net.forward(&x)
    }

    /// Argmax action; ties break toward `Add`.
    pub fn greedy(&mut self, state_norm: f64) -> Result<Action> {
        let p = self.probs(state_norm)?;
        Ok(argmax_action(&p))
    }
}

/// Critic: (normalized loss, one-hot action) -> scalar Q.
pub struct ValueNet {
    pub net: Network,
}

impl ValueNet {
    pub fn new(hidden_dim: usize, lr: f64, seed: u64) -> Result<ValueNet> {
        let net = Network::new(
            &[3],
            &[
                LayerSpec::Dense {
                    in_dim: 3,
                    out_dim: hidden_dim,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    in_dim: hidden_dim,
                    out_dim: hidden_dim,
                    activation: Activation::Relu,
                },
                LayerSpec::Dense {
                    in_dim: hidden_dim,
                    out_dim: 1,
                    activation: Activation::Identity,
                },
            ],
            lr,
            seed,
        )?;
        let mut v = ValueNet { net };
        // zero output head: Q starts identically 0, so early TD errors
        // reflect observed rewards instead of the random asymmetry between
        // the two actions that a Glorot head would bake in
        if let Some(layer) = v.net.layers_mut().last_mut() {
            for p in layer.params_mut() {
                for x in p.data_mut() {
                    *x = 0.0;
                }
            }
        }
        Ok(v)
    }

    pub fn q(&mut self, state_norm: f64, action: Action) -> Result<f64> {
        let x = Tensor::from_vec(&[1, 3], encode_sa(state_norm, action))?;
        Ok(self.net.forward(&x)?.data()[0])
    }

    pub fn q_batch(&mut self, inputs: &Tensor) -> Result<Tensor> {
        self.net.forward(inputs)
    }
}

fn encode_sa(state_norm: f64, action: Action) -> Vec<f64> {
    let mut v = vec![state_norm, 0.0, 0.0];
    v[1 + action.index()] = 1.0;
    v
}

fn argmax_action(probs: &[f64; 2]) -> Action {
    if probs[1] > probs[0] {
        Action::Remove
    } else {
        Action::Add
    }
}

/// Reward for a loss change: `(loss_t - loss_next) / (loss_next * 100)` with
/// a denominator guard and clipping to `[-REWARD_CLIP, REWARD_CLIP]`.
pub fn compute_reward(loss_t: f64, loss_next: f64) -> f64 {
    let den = loss_next.max(REWARD_EPS_DEN) * 100.0;
    ((loss_t - loss_next) / den).clamp(-REWARD_CLIP, REWARD_CLIP)
}

/// `layer + delta`, clamped into `[1, layer_max]`.
pub fn apply_action(layer: LayerCount, action: Action, layer_max: u32) -> LayerCount {
    let next = (layer.get() as i64 + action.delta()).clamp(1, layer_max as i64) as u32;
    LayerCount::new(next, layer_max).expect("clamped into bounds")
}

/// Epsilon-greedy selection over the policy output.
pub fn select_action<R: Rng>(
    policy: &mut PolicyNet,
    state_norm: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Action> {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Ok(Action::from_index(rng.gen_range(0..2)))
    } else {
        policy.greedy(state_norm)
    }
}

/// TD error from already-evaluated Q values:
/// `delta = r + gamma * q_next - q`.
pub fn td_error_from_q(reward: f64, gamma: f64, q_next: f64, q: f64) -> f64 {
    reward + gamma * q_next - q
}

/// TD error for one transition; `a_next` is the bootstrap action at the next
/// state (the current policy's greedy choice).
pub fn td_error(
    critic: &mut ValueNet,
    tr: &Transition,
    a_next: Action,
    gamma: f64,
    state_scale: f64,
) -> Result<f64> {
    let q = critic.q(tr.state / state_scale, tr.action)?;
    let q_next = critic.q(tr.next_state / state_scale, a_next)?;
    Ok(td_error_from_q(tr.reward, gamma, q_next, q))
}

/// Critic inputs `[B, 3]` for the (state, action) pairs of a batch.
pub fn critic_inputs(batch: &[Transition], state_scale: f64) -> Result<Tensor> {
    let data: Vec<f64> = batch
        .iter()
        .flat_map(|tr| encode_sa(tr.state / state_scale, tr.action))
        .collect();
    Tensor::from_vec(&[batch.len(), 3], data)
}

/// Bootstrap targets `r + gamma * Q(s', a')` with `a'` the current policy's
/// greedy action at `s'`. Held constant during differentiation.
pub fn critic_targets(
    critic: &mut ValueNet,
    policy: &mut PolicyNet,
    batch: &[Transition],
    gamma: f64,
    state_scale: f64,
) -> Result<Vec<f64>> {
    let next_states: Vec<f64> = batch.iter().map(|tr| tr.next_state / state_scale).collect();
    let probs = policy.probs_batch(&next_states)?;
    let next_inputs: Vec<f64> = batch
        .iter()
        .enumerate()
        .flat_map(|(i, tr)| {
            let p = [probs.data()[2 * i], probs.data()[2 * i + 1]];
            encode_sa(tr.next_state / state_scale, argmax_action(&p))
        })
        .collect();
    let q_next = critic.q_batch(&Tensor::from_vec(&[batch.len(), 3], next_inputs)?)?;
    Ok(batch
        .iter()
        .zip(q_next.data())
        .map(|(tr, &qn)| tr.reward + gamma * qn)
        .collect())
}

/// Mean batch loss `mean(0.5 * (target - Q)^2)` and its exact gradient with
/// respect to the critic parameters (targets fixed).
pub fn critic_loss_and_grads(
    critic: &mut ValueNet,
    inputs: &Tensor,
    targets: &[f64],
) -> Result<(f64, Gradients)> {
    let batch = targets.len() as f64;
    let q = critic.q_batch(inputs)?;
    let deltas: Vec<f64> = targets
        .iter()
        .zip(q.data())
        .map(|(&t, &qv)| t - qv)
        .collect();
    let loss = deltas.iter().map(|d| 0.5 * d * d).sum::<f64>() / batch;
    // dL/dq_i = -delta_i / B
    let upstream = Tensor::from_vec(
        &[targets.len(), 1],
        deltas.iter().map(|d| -d / batch).collect(),
    )?;
    let grads = critic.net.backward(&upstream)?;
    Ok((loss, grads))
}

/// One semi-gradient TD step on the critic. Returns the pre-step mean loss.
pub fn critic_update(
    critic: &mut ValueNet,
    batch: &[Transition],
    policy: &mut PolicyNet,
    gamma: f64,
    state_scale: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch"));
    }
    let targets = critic_targets(critic, policy, batch, gamma, state_scale)?;
    let inputs = critic_inputs(batch, state_scale)?;
    let (loss, grads) = critic_loss_and_grads(critic, &inputs, &targets)?;
    critic.net.adam_step(&grads)?;
    Ok(loss)
}

/// Advantage-weighted log-prob objective `J = mean(delta_i * ln pi(a_i|s_i))`
/// and the gradient of `-J` (so an Adam step ascends `J`). The TD errors
/// `deltas` are constants here.
pub fn actor_objective_and_grads(
    policy: &mut PolicyNet,
    states_norm: &[f64],
    actions: &[Action],
    deltas: &[f64],
) -> Result<(f64, Gradients)> {
    let b = states_norm.len();
    let probs = policy.probs_batch(states_norm)?;
    let mut objective = 0.0;
    let mut upstream = vec![0.0; b * 2];
    for i in 0..b {
        // floor keeps ln and its gradient finite when the policy saturates
        let p = probs.data()[2 * i + actions[i].index()].max(PROB_FLOOR);
        objective += deltas[i] * p.ln();
        // d(-J)/d pi(a_i) = -delta_i / (B * pi(a_i))
        upstream[2 * i + actions[i].index()] = -deltas[i] / (b as f64 * p);
    }
    objective /= b as f64;
    let grads = policy.net.backward(&Tensor::from_vec(&[b, 2], upstream)?)?;
    Ok((objective, grads))
}

/// One policy-gradient ascent step on the actor. Returns the pre-step
/// objective `J`.
pub fn actor_update(
    policy: &mut PolicyNet,
    critic: &mut ValueNet,
    batch: &[Transition],
    gamma: f64,
    state_scale: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch"));
    }
    let targets = critic_targets(critic, policy, batch, gamma, state_scale)?;
    let inputs = critic_inputs(batch, state_scale)?;
    let q = critic.q_batch(&inputs)?;
    let deltas: Vec<f64> = targets
        .iter()
        .zip(q.data())
        .map(|(&t, &qv)| t - qv)
        .collect();
    let states: Vec<f64> = batch.iter().map(|tr| tr.state / state_scale).collect();
    let actions: Vec<Action> = batch.iter().map(|tr| tr.action).collect();
    let (objective, grads) = actor_objective_and_grads(policy, &states, &actions, &deltas)?;
    policy.net.adam_step(&grads)?;
    Ok(objective)
}

/// Finite-horizon discounted return `R_1 = sum_k gamma^(k-1) r_k`.
/// Diagnostic only; the updates use per-transition TD errors.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards
        .iter()
        .rev()
        .fold(0.0, |acc, &r| r + gamma * acc)
}

/// Per-step record of one controller episode.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    pub layer: u32,
    pub loss: f64,
    pub reward: f64,
    pub action: Action,
    pub epsilon: f64,
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub fault: bool,
}

#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: usize,
    pub init_layer: u32,
    pub initial_loss: f64,
    pub initial_fault: bool,
    pub steps: Vec<StepRecord>,
    pub best_layer: u32,
    pub discounted_return: f64,
}

/// Actor, critic, and replay buffer bundled with their config. Owns all
/// mutable controller state; one instance per seed.
pub struct Controller {
    pub actor: PolicyNet,
    pub critic: ValueNet,
    pub buffer: ReplayBuffer,
    pub cfg: RLConfig,
    /// Total learning steps taken, for the actor warm-up schedule.
    pub learn_steps: usize,
    /// Loss normalizer, fixed at the first evaluation unless the config
    /// pins it; shared by every subsequent episode.
    pub state_scale: Option<f64>,
    seed: u64,
    critic_resets: u64,
}

impl Controller {
    pub fn new(cfg: RLConfig, seed: u64) -> Result<Controller> {
        let actor = PolicyNet::new(
            cfg.hidden_dim,
            cfg.actor_lr,
            seeding::derive_seed(seed, "actor"),
        )?;
        let critic = ValueNet::new(
            cfg.hidden_dim,
            cfg.critic_lr,
            seeding::derive_seed(seed, "critic"),
        )?;
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        Ok(Controller {
            actor,
            critic,
            buffer,
            cfg,
            learn_steps: 0,
            state_scale: None,
            seed,
            critic_resets: 0,
        })
    }

    /// Runs `t_steps` controller steps from `init_layer`. With
    /// `learn = false` the actor and critic parameters are left untouched
    /// and nothing is pushed to the replay buffer's learning path.
    pub fn run_episode<R: Rng>(
        &mut self,
        env: &mut dyn Environment,
        init_layer: LayerCount,
        t_steps: usize,
        learn: bool,
        episode_index: usize,
        episode_nonce: u64,
        rng: &mut R,
    ) -> Result<EpisodeLog> {
        let layer_max = env.layer_max();
        let mut layer = init_layer;
        let first = env.evaluate(layer, episode_nonce);
        let mut loss = first.loss;
        let state_scale = match self.cfg.state_scale.or(self.state_scale) {
            Some(s) => s,
            None => {
                let s = if first.loss.abs() > REWARD_EPS_DEN {
                    first.loss.abs()
                } else {
                    1.0
                };
                self.state_scale = Some(s);
                s
            }
        };

        let mut best = (first.loss, layer.get());
        let mut steps = Vec::with_capacity(t_steps);
        let mut rewards = Vec::with_capacity(t_steps);
        for t in 1..=t_steps {
            let action = select_action(&mut self.actor, loss / state_scale, self.cfg.epsilon, rng)?;
            layer = apply_action(layer, action, layer_max);
            let outcome = env.evaluate(layer, episode_nonce);
            let reward = compute_reward(loss, outcome.loss);
            let tr = Transition {
                state: loss,
                action,
                next_state: outcome.loss,
                reward,
            };
            let (mut actor_loss, mut critic_loss) = (None, None);
            if learn {
                self.buffer.push(tr);
                let batch = self.buffer.sample(self.cfg.batch_size, rng)?;
                critic_loss = Some(critic_update(
                    &mut self.critic,
                    &batch,
                    &mut self.actor,
                    self.cfg.gamma,
                    state_scale,
                )?);
                self.learn_steps += 1;
                if let Some(period) = self.cfg.critic_reset_period {
                    if period > 0 && self.learn_steps % period == 0 {
                        self.critic_resets += 1;
                        let reset_seed = seeding::combine(
                            seeding::derive_seed(self.seed, "critic-reset"),
                            &[self.critic_resets],
                        );
                        self.critic =
                            ValueNet::new(self.cfg.hidden_dim, self.cfg.critic_lr, reset_seed)?;
                    }
                }
                if self.learn_steps > self.cfg.actor_warmup_steps {
                    actor_loss = Some(actor_update(
                        &mut self.actor,
                        &mut self.critic,
                        &batch,
                        self.cfg.gamma,
                        state_scale,
                    )?);
                }
            }
            if outcome.loss < best.0 || (outcome.loss == best.0 && layer.get() < best.1) {
                best = (outcome.loss, layer.get());
            }
            rewards.push(reward);
            steps.push(StepRecord {
                t,
                layer: layer.get(),
                loss: outcome.loss,
                reward,
                action,
                epsilon: self.cfg.epsilon,
                actor_loss,
                critic_loss,
                fault: outcome.fault,
            });
            loss = outcome.loss;
        }
        Ok(EpisodeLog {
            episode: episode_index,
            init_layer: init_layer.get(),
            initial_loss: first.loss,
            initial_fault: first.fault,
            steps,
            best_layer: best.1,
            discounted_return: discounted_return(&rewards, self.cfg.gamma),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvResult;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn lc(v: u32) -> LayerCount {
        LayerCount::new(v, 15).unwrap()
    }

    #[test]
    fn reward_direct_substitution() {
        assert!((compute_reward(2.0, 1.0) - 0.01).abs() < 1e-15);
        assert!((compute_reward(1.0, 2.0) - (-0.005)).abs() < 1e-15);
        assert_eq!(compute_reward(0.7, 0.7), 0.0);
    }

    #[test]
    fn reward_is_clipped_and_signed() {
        assert_eq!(compute_reward(1e9, 1e-12), REWARD_CLIP);
        assert!(compute_reward(0.0, 1e9) < 0.0);
        assert!(compute_reward(5.0, 1.0) > 0.0);
        assert!(compute_reward(1.0, 5.0) < 0.0);
    }

    #[test]
    fn apply_action_follows_delta_and_clamps() {
        assert_eq!(apply_action(lc(5), Action::Add, 15).get(), 6);
        assert_eq!(apply_action(lc(15), Action::Add, 15).get(), 15);
        assert_eq!(apply_action(lc(1), Action::Remove, 15).get(), 1);
    }

    #[test]
    fn buffer_fifo_eviction() {
        let mut buf = ReplayBuffer::new(2);
        for i in 0..3 {
            buf.push(Transition {
                state: i as f64,
                action: Action::Add,
                next_state: 0.0,
                reward: 0.0,
            });
        }
        assert_eq!(buf.len(), 2);
        let states: Vec<f64> = buf.iter().map(|t| t.state).collect();
        assert_eq!(states, vec![1.0, 2.0]);
    }

    #[test]
    fn empty_buffer_behaviour() {
        let buf = ReplayBuffer::new(4);
        assert_eq!(buf.len(), 0);
        assert!(buf.sample(1, &mut rng(0)).is_err());
    }

    #[test]
    fn single_element_sample_with_replacement() {
        let mut buf = ReplayBuffer::new(4);
        buf.push(Transition {
            state: 3.0,
            action: Action::Remove,
            next_state: 1.0,
            reward: 0.5,
        });
        let batch = buf.sample(4, &mut rng(0)).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.iter().all(|t| t.state == 3.0));
    }

    #[test]
    fn sample_uniformity_two_elements() {
        let mut buf = ReplayBuffer::new(4);
        for s in [0.0, 1.0] {
            buf.push(Transition {
                state: s,
                action: Action::Add,
                next_state: 0.0,
                reward: 0.0,
            });
        }
        let mut r = rng(42);
        let n = 10_000;
        let batch = buf.sample(n, &mut r).unwrap();
        let ones = batch.iter().filter(|t| t.state == 1.0).count();
        // 3 sigma for binomial(10000, 0.5) is ~150
        assert!((ones as i64 - 5000).abs() < 150, "ones = {ones}");
    }

    #[test]
    fn sample_is_deterministic_in_rng() {
        let mut buf = ReplayBuffer::new(8);
        for s in 0..5 {
            buf.push(Transition {
                state: s as f64,
                action: Action::Add,
                next_state: 0.0,
                reward: 0.0,
            });
        }
        let a: Vec<f64> = buf.sample(6, &mut rng(9)).unwrap().iter().map(|t| t.state).collect();
        let b: Vec<f64> = buf.sample(6, &mut rng(9)).unwrap().iter().map(|t| t.state).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let mut policy = PolicyNet::new(8, 1e-3, 0).unwrap();
        let mut r = rng(7);
        let n = 10_000;
        let mut adds = 0;
        for _ in 0..n {
            if select_action(&mut policy, 1.0, 1.0, &mut r).unwrap() == Action::Add {
                adds += 1;
            }
        }
        assert!((adds as i64 - 5000).abs() < 150, "adds = {adds}");
    }

    #[test]
    fn epsilon_zero_is_argmax_with_add_tiebreak() {
        assert_eq!(argmax_action(&[0.9, 0.1]), Action::Add);
        assert_eq!(argmax_action(&[0.1, 0.9]), Action::Remove);
        assert_eq!(argmax_action(&[0.5, 0.5]), Action::Add);
    }

    #[test]
    fn td_error_substitution() {
        let d = td_error_from_q(0.01, 0.9, 0.5, 0.4);
        assert!((d - 0.06).abs() < 1e-12);
        assert!((0.5 * d * d - 0.0018).abs() < 1e-12);
        // gamma = 0 and Q(s,a) = r gives zero error
        assert_eq!(td_error_from_q(0.3, 0.0, 123.0, 0.3), 0.0);
    }

    #[test]
    fn td_error_matches_direct_q_calls() {
        let mut critic = ValueNet::new(8, 1e-3, 3).unwrap();
        let tr = Transition {
            state: 2.0,
            action: Action::Remove,
            next_state: 1.0,
            reward: 0.01,
        };
        let d = td_error(&mut critic, &tr, Action::Add, 0.9, 2.0).unwrap();
        let q = critic.q(1.0, Action::Remove).unwrap();
        let qn = critic.q(0.5, Action::Add).unwrap();
        assert!((d - (0.01 + 0.9 * qn - q)).abs() < 1e-12);
    }

    #[test]
    fn critic_zero_delta_batch_is_fixed_point() {
        // gamma = 0 and reward equal to Q(s,a) makes every delta zero
        let mut critic = ValueNet::new(8, 1e-3, 3).unwrap();
        let mut policy = PolicyNet::new(8, 1e-3, 4).unwrap();
        let q = critic.q(1.0, Action::Add).unwrap();
        let batch = vec![Transition {
            state: 1.0,
            action: Action::Add,
            next_state: 1.0,
            reward: q,
        }];
        let before = critic.net.params_flat();
        let loss = critic_update(&mut critic, &batch, &mut policy, 0.0, 1.0).unwrap();
        assert!(loss.abs() < 1e-20);
        assert_eq!(critic.net.params_flat(), before);
    }

    #[test]
    fn critic_loss_decreases_with_frozen_targets() {
        // gamma = 0 freezes the bootstrap term, so the target is constant
        let mut critic = ValueNet::new(8, 1e-2, 3).unwrap();
        let mut policy = PolicyNet::new(8, 1e-3, 4).unwrap();
        let batch = vec![Transition {
            state: 1.0,
            action: Action::Add,
            next_state: 0.5,
            reward: 2.0,
        }];
        let mut prev = f64::INFINITY;
        for _ in 0..10 {
            let loss = critic_update(&mut critic, &batch, &mut policy, 0.0, 1.0).unwrap();
            assert!(loss < prev, "loss {loss} did not decrease from {prev}");
            prev = loss;
        }
    }

    #[test]
    fn actor_zero_advantage_is_noop() {
        let mut policy = PolicyNet::new(8, 1e-3, 4).unwrap();
        let before = policy.net.params_flat();
        let (_, grads) =
            actor_objective_and_grads(&mut policy, &[1.0], &[Action::Add], &[0.0]).unwrap();
        policy.net.adam_step(&grads).unwrap();
        assert_eq!(policy.net.params_flat(), before);
    }

    #[test]
    fn actor_positive_advantage_increases_action_prob() {
        let mut policy = PolicyNet::new(8, 1e-3, 4).unwrap();
        let p_before = policy.probs(1.0).unwrap()[Action::Remove.index()];
        let (_, grads) =
            actor_objective_and_grads(&mut policy, &[1.0], &[Action::Remove], &[1.0]).unwrap();
        policy.net.adam_step(&grads).unwrap();
        let p_after = policy.probs(1.0).unwrap()[Action::Remove.index()];
        assert!(p_after > p_before, "{p_after} <= {p_before}");
    }

    #[test]
    fn policy_stays_a_distribution_after_updates() {
        let mut policy = PolicyNet::new(8, 1e-2, 4).unwrap();
        for i in 0..20 {
            let a = if i % 2 == 0 { Action::Add } else { Action::Remove };
            let (_, grads) =
                actor_objective_and_grads(&mut policy, &[0.5], &[a], &[0.7]).unwrap();
            policy.net.adam_step(&grads).unwrap();
            let p = policy.probs(0.5).unwrap();
            assert!(p[0] > 0.0 && p[1] > 0.0);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn discounted_return_examples() {
        assert!((discounted_return(&[1.0, 1.0, 1.0], 0.9) - 2.71).abs() < 1e-12);
        assert_eq!(discounted_return(&[0.4, 7.0], 0.0), 0.4);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
    }

    #[test]
    fn discounted_return_is_linear() {
        let rewards = [0.3, -0.2, 0.8, 0.1];
        let scaled: Vec<f64> = rewards.iter().map(|r| r * 3.5).collect();
        let a = discounted_return(&rewards, 0.85);
        let b = discounted_return(&scaled, 0.85);
        assert!((b - 3.5 * a).abs() < 1e-12);
    }

    /// Analytic test stand-in: loss(L) = 1/L, so deeper is always better.
    struct InverseLoss;

    impl Environment for InverseLoss {
        fn evaluate(&mut self, layer: LayerCount, _nonce: u64) -> EnvResult {
            EnvResult {
                loss: 1.0 / layer.get() as f64,
                fault: false,
            }
        }
        fn layer_max(&self) -> u32 {
            15
        }
    }

    #[test]
    fn zero_step_episode_only_evaluates_once() {
        let mut ctl = Controller::new(RLConfig::default(), 1).unwrap();
        let log = ctl
            .run_episode(&mut InverseLoss, lc(5), 0, true, 0, 0, &mut rng(0))
            .unwrap();
        assert!(log.steps.is_empty());
        assert_eq!(log.best_layer, 5);
        assert_eq!(log.initial_loss, 0.2);
    }

    #[test]
    fn frozen_episode_leaves_parameters_bitwise_unchanged() {
        let mut ctl = Controller::new(
            RLConfig {
                epsilon: 0.0,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let actor_before = ctl.actor.net.params_flat();
        let critic_before = ctl.critic.net.params_flat();
        ctl.run_episode(&mut InverseLoss, lc(5), 10, false, 0, 0, &mut rng(0))
            .unwrap();
        assert_eq!(ctl.actor.net.params_flat(), actor_before);
        assert_eq!(ctl.critic.net.params_flat(), critic_before);
    }

    #[test]
    fn episode_log_shape() {
        let mut ctl = Controller::new(RLConfig::default(), 1).unwrap();
        let log = ctl
            .run_episode(&mut InverseLoss, lc(5), 7, true, 3, 11, &mut rng(2))
            .unwrap();
        assert_eq!(log.steps.len(), 7);
        assert_eq!(log.episode, 3);
        assert!(log.steps.iter().all(|s| s.layer >= 1 && s.layer <= 15));
        assert!(log.best_layer >= 1 && log.best_layer <= 15);
    }
}
