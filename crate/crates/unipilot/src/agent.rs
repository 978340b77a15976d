//! DDPG: replay buffer, target networks, ε-greedy Gaussian exploration and
//! the coupled critic/actor update loop.

use crate::env::{Environment, EpisodeConfig, Observation};
use crate::error::Error;
use crate::kinematics::Action;
use crate::net::{
    init_actor, init_critic, ActorNet, AdamState, CriticNet, Direction, Scalar, OBS_DIM,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter};
use std::path::Path;

/// One replay record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    pub obs: [T; 6],
    pub action: [T; 2],
    pub reward: T,
    pub next_obs: [T; 6],
    pub done: bool,
}

/// Fixed-capacity ring that overwrites the oldest record once full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    data: Vec<Transition<T>>,
    capacity: usize,
    cursor: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay capacity must be >= 1");
        Self { data: Vec::new(), capacity, cursor: 0 }
    }

    pub fn push(&mut self, t: Transition<T>) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn records(&self) -> &[Transition<T>] {
        &self.data
    }

    /// `n` uniform draws with replacement; the buffer must be non-empty.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<Transition<T>> {
        assert!(!self.data.is_empty(), "sampling from an empty replay buffer");
        (0..n)
            .map(|_| self.data[rng.random_range(0..self.data.len())])
            .collect()
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Discount factor.
    pub gamma: f64,
    /// Target-network soft-update factor.
    pub tau: f64,
    /// Transitions per gradient step.
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Probability of replacing the greedy action with a noisy one.
    pub eps_explore: f64,
    /// Std of the Gaussian exploration noise around the greedy action.
    pub sigma_explore: f64,
    /// Episodes that only fill the replay memory, without gradient updates.
    pub warmup_episodes: u32,
    /// Total episodes per training run.
    pub episodes: u32,
    pub buffer_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tau: 0.1,
            batch_size: 500,
            lr_actor: 1e-2,
            lr_critic: 1e-4,
            eps_explore: 0.5,
            sigma_explore: 3.0,
            warmup_episodes: 250,
            episodes: 4000,
            buffer_capacity: 50_000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(format!("agent.gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(format!("agent.tau must be in (0, 1], got {}", self.tau));
        }
        if self.batch_size < 1 {
            return Err("agent.batch_size must be >= 1".into());
        }
        if self.buffer_capacity < 1 {
            return Err("agent.buffer_capacity must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.eps_explore) {
            return Err(format!("agent.eps_explore must be in [0, 1], got {}", self.eps_explore));
        }
        if self.sigma_explore < 0.0 {
            return Err(format!("agent.sigma_explore must be >= 0, got {}", self.sigma_explore));
        }
        if self.episodes < 1 {
            return Err("agent.episodes must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Train,
    Test,
}

/// Per-episode training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub steps: u32,
    #[serde(rename = "return")]
    pub ret: f64,
    /// Final distance to the goal, m.
    pub positional_error: f64,
    /// Final orientation residual magnitude, rad.
    pub angular_error: f64,
    /// Final speed residual magnitude, m/s.
    pub velocity_error: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub records: Vec<EpisodeRecord>,
}

impl TrainingLog {
    pub fn write_csv(&self, path: &Path) -> Result<(), Error> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for r in &self.records {
            writer.serialize(r).map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self, Error> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let records = reader
            .deserialize()
            .collect::<Result<Vec<EpisodeRecord>, _>>()
            .map_err(|e| csv_error(path, e))?;
        Ok(Self { records })
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    let text = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        _ => Error::format(path, line, text),
    }
}

/// Deep deterministic policy gradient agent.
#[derive(Debug, Clone)]
pub struct DdpgAgent<T: Scalar> {
    actor: ActorNet<T>,
    critic: CriticNet<T>,
    actor_target: ActorNet<T>,
    critic_target: CriticNet<T>,
    adam_actor: AdamState<T>,
    adam_critic: AdamState<T>,
    buffer: ReplayBuffer<T>,
    config: AgentConfig,
    rng: ChaCha8Rng,
}

impl<T: Scalar> DdpgAgent<T> {
    /// Fresh agent with full-size networks.
    pub fn new(config: AgentConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = init_actor(&mut rng);
        let critic = init_critic(&mut rng);
        Self::assemble(actor, critic, config, rng)
    }

    /// Builds an agent around existing networks; the targets start as
    /// copies. Used by the oracle tests with reduced layer widths.
    pub fn from_parts(actor: ActorNet<T>, critic: CriticNet<T>, config: AgentConfig, seed: u64) -> Self {
        Self::assemble(actor, critic, config, ChaCha8Rng::seed_from_u64(seed))
    }

    fn assemble(actor: ActorNet<T>, critic: CriticNet<T>, config: AgentConfig, rng: ChaCha8Rng) -> Self {
        let adam_actor = AdamState::for_params(config.lr_actor, &actor.param_tensors());
        let adam_critic = AdamState::for_params(config.lr_critic, &critic.param_tensors());
        Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            adam_actor,
            adam_critic,
            buffer: ReplayBuffer::with_capacity(config.buffer_capacity),
            config,
            rng,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn actor(&self) -> &ActorNet<T> {
        &self.actor
    }

    pub fn critic(&self) -> &CriticNet<T> {
        &self.critic
    }

    pub fn actor_target(&self) -> &ActorNet<T> {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &CriticNet<T> {
        &self.critic_target
    }

    pub fn buffer(&self) -> &ReplayBuffer<T> {
        &self.buffer
    }

    pub fn buffer_mut(&mut self) -> &mut ReplayBuffer<T> {
        &mut self.buffer
    }

    /// Greedy action, optionally perturbed: in train mode, with probability
    /// `eps_explore` the action is redrawn from a Gaussian centered on the
    /// greedy output. The result is clipped to `[-1, 1]²`.
    pub fn select_action(&mut self, obs: &Observation, mode: ActionMode) -> Action {
        self.select_action_traced(obs, mode).0
    }

    /// Like [`select_action`](Self::select_action) but also reports whether
    /// exploration noise was applied.
    pub fn select_action_traced(&mut self, obs: &Observation, mode: ActionMode) -> (Action, bool) {
        let x = obs_to_scalar::<T>(obs);
        let greedy = self.actor.infer(&x, 1);
        let mut u_lin = greedy[0].to_f64();
        let mut u_ang = greedy[1].to_f64();
        let mut explored = false;
        if mode == ActionMode::Train {
            let gate: f64 = self.rng.random();
            if gate < self.config.eps_explore {
                explored = true;
                let z1: f64 = StandardNormal.sample(&mut self.rng);
                let z2: f64 = StandardNormal.sample(&mut self.rng);
                u_lin += self.config.sigma_explore * z1;
                u_ang += self.config.sigma_explore * z2;
            }
        }
        (Action::clipped(u_lin, u_ang), explored)
    }

    /// Bootstrap targets `y_i = r_i + gamma * (1 - done_i) * Q'(s'_i, mu'(s'_i))`.
    pub fn compute_targets(&self, batch: &[Transition<T>]) -> Vec<T> {
        let n = batch.len();
        let mut next_obs = Vec::with_capacity(n * OBS_DIM);
        for t in batch {
            next_obs.extend_from_slice(&t.next_obs);
        }
        let a_next = self.actor_target.infer(&next_obs, n);
        let q_next = self.critic_target.infer(&next_obs, &a_next, n);
        let gamma = T::from_f64(self.config.gamma);
        batch
            .iter()
            .zip(q_next)
            .map(|(t, q)| {
                let mask = if t.done { T::zero() } else { T::one() };
                t.reward + gamma * mask * q
            })
            .collect()
    }

    /// One coupled update: critic descends the squared Bellman residual,
    /// the actor ascends the mean Q of its own actions, and both targets
    /// blend toward the live networks.
    pub fn train_step(&mut self, batch: &[Transition<T>]) {
        assert!(!batch.is_empty(), "train_step on an empty batch");
        let n = batch.len();
        let y = self.compute_targets(batch);

        let mut obs = Vec::with_capacity(n * OBS_DIM);
        let mut actions = Vec::with_capacity(n * 2);
        for t in batch {
            obs.extend_from_slice(&t.obs);
            actions.extend_from_slice(&t.action);
        }

        // critic: minimize (1/n) Σ (y_i - Q(s_i, a_i))²
        let (q, cache) = self.critic.forward_batch(&obs, &actions, n);
        let scale = T::from_f64(2.0 / n as f64);
        let dq: Vec<T> = q.iter().zip(&y).map(|(&qi, &yi)| scale * (qi - yi)).collect();
        let (critic_grads, _, _) = self.critic.backward_batch(&cache, &dq);
        self.adam_critic.step(
            self.critic.param_tensors_mut(),
            critic_grads.tensors(),
            Direction::Minimize,
        );

        // actor: ascend (1/n) Σ Q(s_i, mu(s_i)) via the chain rule through
        // the critic's action input
        let (mu, actor_cache) = self.actor.forward_batch(&obs, n);
        let (_, critic_cache) = self.critic.forward_batch(&obs, &mu, n);
        let dq_mean = vec![T::from_f64(1.0 / n as f64); n];
        let d_action = self.critic.action_gradient(&critic_cache, &dq_mean);
        let actor_grads = self.actor.backward_batch(&actor_cache, d_action);
        self.adam_actor.step(
            self.actor.param_tensors_mut(),
            actor_grads.tensors(),
            Direction::Maximize,
        );

        self.critic_target.blend_from(&self.critic, self.config.tau);
        self.actor_target.blend_from(&self.actor, self.config.tau);
    }

    fn sample_own_batch(&mut self) -> Vec<Transition<T>> {
        let Self { buffer, rng, config, .. } = self;
        buffer.sample(config.batch_size, rng)
    }

    /// Runs the full training protocol: `episodes` episodes against `env`'s
    /// task distribution, the first `warmup_episodes` of them only filling
    /// the replay memory, then one gradient step per environment step.
    pub fn train(&mut self, episode: &EpisodeConfig, task_rng: &mut impl Rng) -> TrainingLog {
        let mut env = Environment::new(*episode);
        let mut records = Vec::with_capacity(self.config.episodes as usize);
        let mut recent_success = 0usize;
        for ep in 0..self.config.episodes {
            let warmup = ep < self.config.warmup_episodes;
            let mut obs = env.reset(task_rng);
            let mut ret = 0.0f64;
            let outcome = loop {
                let action = self.select_action(&obs, ActionMode::Train);
                let out = env.step(action);
                self.buffer.push(Transition {
                    obs: obs_to_scalar::<T>(&obs),
                    action: [T::from_f64(action.u_lin), T::from_f64(action.u_ang)],
                    reward: T::from_f64(out.reward),
                    next_obs: obs_to_scalar::<T>(&out.obs),
                    done: out.done,
                });
                if !warmup && self.buffer.len() >= self.config.batch_size {
                    let batch = self.sample_own_batch();
                    self.train_step(&batch);
                }
                ret += out.reward;
                obs = out.obs;
                if out.done {
                    break out;
                }
            };
            records.push(EpisodeRecord {
                episode: ep,
                steps: env.steps_taken(),
                ret,
                positional_error: outcome.error_components.positional,
                angular_error: outcome.error_components.angular,
                velocity_error: outcome.error_components.velocity,
                success: outcome.success,
            });
            recent_success += outcome.success as usize;
            if (ep + 1) % 100 == 0 {
                log::info!(
                    "episode {:>5}/{}: success {:>3}/100, last error {:.3}",
                    ep + 1,
                    self.config.episodes,
                    recent_success,
                    outcome.error,
                );
                recent_success = 0;
            }
        }
        TrainingLog { records }
    }

    /// Writes a versioned JSON checkpoint (networks, targets, optimizer
    /// states; replay contents are not persisted).
    pub fn save_checkpoint(&self, path: &Path, episode: &EpisodeConfig) -> Result<(), Error> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let checkpoint = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            dtype: T::DTYPE.to_string(),
            episode: *episode,
            agent: self.config,
            actor: &self.actor,
            critic: &self.critic,
            actor_target: &self.actor_target,
            critic_target: &self.critic_target,
            adam_actor: &self.adam_actor,
            adam_critic: &self.adam_critic,
        };
        serde_json::to_writer(BufWriter::new(file), &checkpoint)
            .map_err(|e| Error::Checkpoint(format!("writing {}: {e}", path.display())))
    }

    /// Restores an agent and the episode configuration it was trained
    /// under. The replay buffer starts empty and the RNG from `seed`.
    pub fn load_checkpoint(path: &Path, seed: u64) -> Result<(Self, EpisodeConfig), Error> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let checkpoint: CheckpointOwned<T> = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Checkpoint(format!("parsing {}: {e}", path.display())))?;
        if checkpoint.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "{} is not an agent checkpoint (format '{}')",
                path.display(),
                checkpoint.format
            )));
        }
        if checkpoint.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {})",
                checkpoint.version, CHECKPOINT_VERSION
            )));
        }
        if checkpoint.dtype != T::DTYPE {
            return Err(Error::Checkpoint(format!(
                "checkpoint dtype {} does not match runtime dtype {}",
                checkpoint.dtype,
                T::DTYPE
            )));
        }
        let agent = Self {
            actor: checkpoint.actor,
            critic: checkpoint.critic,
            actor_target: checkpoint.actor_target,
            critic_target: checkpoint.critic_target,
            adam_actor: checkpoint.adam_actor,
            adam_critic: checkpoint.adam_critic,
            buffer: ReplayBuffer::with_capacity(checkpoint.agent.buffer_capacity),
            config: checkpoint.agent,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        Ok((agent, checkpoint.episode))
    }
}

pub(crate) fn obs_to_scalar<T: Scalar>(obs: &Observation) -> [T; 6] {
    obs.as_array().map(T::from_f64)
}

const CHECKPOINT_FORMAT: &str = "unipilot-agent";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Checkpoint<'a, T: Scalar> {
    format: String,
    version: u32,
    dtype: String,
    episode: EpisodeConfig,
    agent: AgentConfig,
    actor: &'a ActorNet<T>,
    critic: &'a CriticNet<T>,
    actor_target: &'a ActorNet<T>,
    critic_target: &'a CriticNet<T>,
    adam_actor: &'a AdamState<T>,
    adam_critic: &'a AdamState<T>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct CheckpointOwned<T: Scalar> {
    format: String,
    version: u32,
    dtype: String,
    episode: EpisodeConfig,
    agent: AgentConfig,
    actor: ActorNet<T>,
    critic: CriticNet<T>,
    actor_target: ActorNet<T>,
    critic_target: CriticNet<T>,
    adam_actor: AdamState<T>,
    adam_critic: AdamState<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ProblemVariant;
    use crate::net::{ActorNet, CriticNet};
    use proptest::prelude::*;

    fn small_config() -> AgentConfig {
        AgentConfig {
            batch_size: 16,
            buffer_capacity: 512,
            warmup_episodes: 1,
            episodes: 3,
            ..AgentConfig::default()
        }
    }

    fn small_agent(seed: u64) -> DdpgAgent<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = ActorNet::init_with_dims(&mut rng, 6, &[8, 8], 2, 0.3, 0.1);
        let critic = CriticNet::init_with_dims(&mut rng, 6, 2, [8, 8, 8], 0.3, 0.1);
        DdpgAgent::from_parts(actor, critic, small_config(), seed + 1000)
    }

    fn transition(tag: f64, done: bool) -> Transition<f64> {
        Transition {
            obs: [tag, 0.1, -0.2, 0.3, 0.4, -0.5],
            action: [0.2, -0.3],
            reward: 0.7 + tag,
            next_obs: [tag + 0.5, -0.1, 0.2, -0.3, 0.1, 0.0],
            done,
        }
    }

    #[test]
    fn buffer_grows_then_evicts_fifo() {
        let mut buf: ReplayBuffer<f64> = ReplayBuffer::with_capacity(5);
        buf.push(transition(0.0, false));
        assert_eq!(buf.len(), 1);
        for i in 1..6 {
            buf.push(transition(i as f64, false));
        }
        assert_eq!(buf.len(), 5);
        let tags: Vec<f64> = buf.records().iter().map(|t| t.obs[0]).collect();
        // record 0 evicted, slot reused by record 5
        assert_eq!(tags, vec![5.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_with_replacement_from_one_record() {
        let mut buf: ReplayBuffer<f64> = ReplayBuffer::with_capacity(8);
        buf.push(transition(7.0, true));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = buf.sample(3, &mut rng);
        assert_eq!(batch.len(), 3);
        assert!(batch.iter().all(|t| t.obs[0] == 7.0));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut buf: ReplayBuffer<f64> = ReplayBuffer::with_capacity(64);
        for i in 0..64 {
            buf.push(transition(i as f64, false));
        }
        let a = buf.sample(10, &mut ChaCha8Rng::seed_from_u64(3));
        let b = buf.sample(10, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let mut buf: ReplayBuffer<f64> = ReplayBuffer::with_capacity(10);
        for i in 0..10 {
            buf.push(transition(i as f64, false));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = [0usize; 10];
        let draws = 10_000;
        for t in buf.sample(draws, &mut rng) {
            counts[t.obs[0] as usize] += 1;
        }
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square critical value, 9 dof, alpha = 0.01
        assert!(chi2 < 21.67, "chi2 {chi2}");
    }

    #[test]
    fn targets_without_bootstrap_when_done() {
        let agent = small_agent(5);
        let batch = vec![transition(0.0, true), transition(1.0, true)];
        let y = agent.compute_targets(&batch);
        assert_eq!(y, vec![batch[0].reward, batch[1].reward]);
    }

    #[test]
    fn targets_without_bootstrap_when_gamma_zero() {
        let mut agent = small_agent(6);
        agent.config.gamma = 0.0;
        let batch = vec![transition(0.0, false), transition(1.0, false)];
        let y = agent.compute_targets(&batch);
        assert_eq!(y, vec![batch[0].reward, batch[1].reward]);
    }

    #[test]
    fn targets_match_hand_bellman_evaluation() {
        let agent = small_agent(7);
        let batch = vec![transition(0.3, false), transition(-0.4, true)];
        let y = agent.compute_targets(&batch);
        for (t, &yi) in batch.iter().zip(&y) {
            let a = agent.actor_target().infer(&t.next_obs, 1);
            let q = agent.critic_target().infer(&t.next_obs, &a, 1)[0];
            let mask = if t.done { 0.0 } else { 1.0 };
            assert_eq!(yi, t.reward + agent.config().gamma * mask * q);
        }
    }

    fn critic_mse(agent: &DdpgAgent<f64>, batch: &[Transition<f64>], y: &[f64]) -> f64 {
        let n = batch.len();
        let mut obs = Vec::new();
        let mut act = Vec::new();
        for t in batch {
            obs.extend_from_slice(&t.obs);
            act.extend_from_slice(&t.action);
        }
        let q = agent.critic().infer(&obs, &act, n);
        q.iter().zip(y).map(|(qi, yi)| (yi - qi).powi(2)).sum::<f64>() / n as f64
    }

    #[test]
    fn repeated_train_steps_fit_a_fixed_batch() {
        let mut agent = small_agent(8);
        // all-done transitions freeze the targets at the stored rewards
        let batch: Vec<Transition<f64>> = (0..16)
            .map(|i| transition((i as f64) * 0.37 % 2.0 - 1.0, true))
            .collect();
        let y = agent.compute_targets(&batch);
        let start = critic_mse(&agent, &batch, &y);
        let mut losses = Vec::new();
        for _ in 0..100 {
            agent.train_step(&batch);
            losses.push(critic_mse(&agent, &batch, &y));
        }
        let end = *losses.last().unwrap();
        assert!(end < start * 0.5, "loss did not shrink: {start} -> {end}");
        let early: f64 = losses[..10].iter().sum::<f64>() / 10.0;
        let late: f64 = losses[90..].iter().sum::<f64>() / 10.0;
        assert!(late < early, "no downward trend: early {early}, late {late}");
    }

    #[test]
    fn soft_updates_pull_targets_toward_live_networks() {
        let mut agent = small_agent(9);
        let batch = vec![transition(0.2, false); 8];
        let live_before = agent.critic().clone();
        let target_before = agent.critic_target().clone();
        assert_eq!(live_before, target_before, "targets start as copies");
        agent.train_step(&batch);
        assert_ne!(agent.critic(), &live_before, "critic moved");
        assert_ne!(agent.critic_target(), &target_before, "target trailed");
        // target moved toward the live network, not past it
        let live = agent.critic().param_tensors();
        let target = agent.critic_target().param_tensors();
        let old = target_before.param_tensors();
        for ((l, t), o) in live.iter().zip(&target).zip(&old) {
            for ((&lv, &tv), &ov) in l.iter().zip(t.iter()).zip(o.iter()) {
                let blended = agent.config().tau * lv + (1.0 - agent.config().tau) * ov;
                assert!((tv - blended).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn test_mode_returns_the_greedy_action() {
        let mut agent = small_agent(10);
        let obs = Observation {
            distance: 2.0,
            bearing: 0.3,
            d_nu: -0.5,
            d_theta: 0.1,
            nu: 1.0,
            phi: 0.0,
        };
        let greedy = agent.actor().infer(&obs_to_scalar::<f64>(&obs), 1);
        let (action, explored) = agent.select_action_traced(&obs, ActionMode::Test);
        assert!(!explored);
        assert_eq!(action.u_lin, greedy[0].clamp(-1.0, 1.0));
        assert_eq!(action.u_ang, greedy[1].clamp(-1.0, 1.0));
    }

    #[test]
    fn zero_epsilon_train_mode_matches_test_mode() {
        let mut agent = small_agent(11);
        agent.config.eps_explore = 0.0;
        let obs = Observation {
            distance: 1.0,
            bearing: -0.2,
            d_nu: 0.4,
            d_theta: 0.6,
            nu: 0.5,
            phi: 0.1,
        };
        let (train_action, explored) = agent.select_action_traced(&obs, ActionMode::Train);
        assert!(!explored);
        let (test_action, _) = agent.select_action_traced(&obs, ActionMode::Test);
        assert_eq!(train_action, test_action);
    }

    /// Standard normal CDF via the Abramowitz-Stegun erf approximation.
    fn normal_cdf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.3275911 * (x.abs() / std::f64::consts::SQRT_2));
        let erf = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
                + 0.254829592)
                * t
                * (-x * x / 2.0).exp();
        if x >= 0.0 {
            0.5 * (1.0 + erf)
        } else {
            0.5 * (1.0 - erf)
        }
    }

    #[test]
    fn exploration_noise_saturates_at_the_clip_rate() {
        let mut agent = small_agent(12);
        let obs = Observation {
            distance: 3.0,
            bearing: 0.0,
            d_nu: 0.0,
            d_theta: 0.0,
            nu: 0.0,
            phi: 0.0,
        };
        let greedy = agent.actor().infer(&obs_to_scalar::<f64>(&obs), 1);
        let sigma = agent.config().sigma_explore;
        let mut saturated = 0usize;
        let mut explored_draws = 0usize;
        for _ in 0..20_000 {
            let (action, explored) = agent.select_action_traced(&obs, ActionMode::Train);
            if explored {
                explored_draws += 2;
                saturated += (action.u_lin.abs() == 1.0) as usize;
                saturated += (action.u_ang.abs() == 1.0) as usize;
            }
        }
        let p_sat_lin =
            normal_cdf((-1.0 - greedy[0]) / sigma) + 1.0 - normal_cdf((1.0 - greedy[0]) / sigma);
        let p_sat_ang =
            normal_cdf((-1.0 - greedy[1]) / sigma) + 1.0 - normal_cdf((1.0 - greedy[1]) / sigma);
        let predicted = (p_sat_lin + p_sat_ang) / 2.0;
        let observed = saturated as f64 / explored_draws as f64;
        assert!(
            (observed - predicted).abs() < 0.02,
            "saturation rate {observed} vs predicted {predicted}"
        );
        assert!(predicted > 0.7, "sigma=3 noise should mostly saturate");
    }

    #[test]
    fn warmup_episodes_leave_parameters_untouched() {
        let mut agent = small_agent(13);
        agent.config.warmup_episodes = 250;
        agent.config.episodes = 2;
        let actor_before = agent.actor().clone();
        let critic_before = agent.critic().clone();
        let episode = EpisodeConfig { variant: ProblemVariant::P2d, max_steps: 30, ..Default::default() };
        let mut task_rng = ChaCha8Rng::seed_from_u64(99);
        let log = agent.train(&episode, &mut task_rng);
        assert_eq!(log.records.len(), 2);
        assert_eq!(agent.actor(), &actor_before);
        assert_eq!(agent.critic(), &critic_before);
        assert!(agent.buffer().len() > 0, "warmup still fills the memory");
    }

    #[test]
    fn training_is_reproducible_from_seed() {
        let episode = EpisodeConfig { variant: ProblemVariant::P2d, max_steps: 20, ..Default::default() };
        let run = |seed: u64| {
            let mut agent = small_agent(seed);
            let mut task_rng = ChaCha8Rng::seed_from_u64(7);
            let log = agent.train(&episode, &mut task_rng);
            (log, agent.actor().clone())
        };
        let (log_a, actor_a) = run(21);
        let (log_b, actor_b) = run(21);
        assert_eq!(log_a, log_b);
        assert_eq!(actor_a, actor_b);
    }

    #[test]
    fn training_log_csv_round_trips() {
        let log = TrainingLog {
            records: vec![
                EpisodeRecord {
                    episode: 0,
                    steps: 200,
                    ret: 55.25,
                    positional_error: 3.5,
                    angular_error: 0.7,
                    velocity_error: 1.25,
                    success: false,
                },
                EpisodeRecord {
                    episode: 1,
                    steps: 42,
                    ret: 130.5,
                    positional_error: 0.25,
                    angular_error: 0.1,
                    velocity_error: 0.5,
                    success: true,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        log.write_csv(&path).unwrap();
        assert_eq!(TrainingLog::read_csv(&path).unwrap(), log);
    }

    #[test]
    fn checkpoint_round_trips_and_checks_dtype() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.json");
        let agent = small_agent(30);
        let episode = EpisodeConfig::default();
        agent.save_checkpoint(&path, &episode).unwrap();
        let (restored, episode_back) = DdpgAgent::<f64>::load_checkpoint(&path, 0).unwrap();
        assert_eq!(episode_back, episode);
        assert_eq!(restored.actor(), agent.actor());
        assert_eq!(restored.critic_target(), agent.critic_target());
        let err = DdpgAgent::<f32>::load_checkpoint(&path, 0).unwrap_err();
        assert!(err.to_string().contains("dtype"), "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn interleaved_store_sample_yields_only_stored_records(
            ops in proptest::collection::vec((any::<bool>(), 0.0f64..100.0), 1..200)
        ) {
            let mut buf: ReplayBuffer<f64> = ReplayBuffer::with_capacity(16);
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let mut stored = std::collections::HashSet::new();
            for (sample, tag) in ops {
                if sample && !buf.is_empty() {
                    for t in buf.sample(4, &mut rng) {
                        prop_assert!(stored.contains(&t.obs[0].to_bits()));
                    }
                } else {
                    stored.insert(tag.to_bits());
                    buf.push(transition(tag, false));
                }
                prop_assert!(buf.len() <= buf.capacity());
            }
        }
    }
}
