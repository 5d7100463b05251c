//! Dueling double deep Q-learning: epsilon-greedy acting, double-Q targets,
//! uniform replay, plain SGD on the squared TD error, and periodic hard
//! target-network syncs. Checkpoints restore bit-identical behavior.

mod network;
mod replay;

pub use network::{dueling_q, ForwardTrace, LayerGrad, LinearLayer, NetGrads, QNetwork};
pub use replay::{ReplayBuffer, Transition};

use crate::rng::{stream_rng, streams};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("replay buffer has {len} transitions, batch needs {batch}")]
    UnderfullBuffer { len: usize, batch: usize },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint encoding: {0}")]
    Encoding(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint rng state is malformed")]
    RngState,
}

/// Learning hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// Replay buffer capacity.
    pub capacity: usize,
    /// Hard target sync every this many train steps.
    pub sync_period: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Decision steps over which epsilon decays linearly.
    pub eps_decay_steps: u64,
    /// Run a train step every this many decision steps.
    pub train_period: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            hidden: vec![128, 128],
            learning_rate: 1e-3,
            gamma: 0.99,
            batch_size: 32,
            capacity: 50_000,
            sync_period: 500,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: 50_000,
            train_period: 1,
        }
    }
}

/// Linear epsilon schedule clamped at the end value.
pub fn epsilon_at(hp: &Hyperparams, decision_step: u64) -> f64 {
    if hp.eps_decay_steps == 0 || decision_step >= hp.eps_decay_steps {
        return hp.eps_end;
    }
    let frac = decision_step as f64 / hp.eps_decay_steps as f64;
    hp.eps_start + (hp.eps_end - hp.eps_start) * frac
}

/// Greedy action with lowest-index tie breaking.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action selection.
pub fn act(net: &QNetwork, state: &[f64], epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..net.n_actions())
    } else {
        argmax(&net.forward(state))
    }
}

/// Double-Q targets: y = r + gamma * Q_target(s', argmax_a Q_online(s', a)),
/// or y = r on terminal transitions.
pub fn double_q_targets(
    batch: &[&Transition],
    online: &QNetwork,
    target: &QNetwork,
    gamma: f64,
) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                t.reward
            } else {
                let a = argmax(&online.forward(&t.next_state));
                t.reward + gamma * target.forward(&t.next_state)[a]
            }
        })
        .collect()
}

/// One uniform-minibatch SGD step on the mean squared TD error. Returns the
/// batch loss, or the underfull-buffer signal when there is not enough
/// experience yet (no parameters change).
pub fn train_step(
    online: &mut QNetwork,
    target: &QNetwork,
    buffer: &ReplayBuffer,
    hp: &Hyperparams,
    rng: &mut ChaCha8Rng,
) -> Result<f64, AgentError> {
    if buffer.len() < hp.batch_size {
        return Err(AgentError::UnderfullBuffer {
            len: buffer.len(),
            batch: hp.batch_size,
        });
    }
    let indices = buffer.sample_indices(hp.batch_size, rng);
    let batch: Vec<&Transition> = indices.iter().map(|&i| buffer.get(i)).collect();
    let targets = double_q_targets(&batch, online, target, hp.gamma);

    let mut grads = online.zero_grads();
    let inv_batch = 1.0 / hp.batch_size as f64;
    let mut loss = 0.0;
    let mut dq = vec![0.0; online.n_actions()];
    for (t, y) in batch.iter().zip(&targets) {
        let trace = online.forward_trace(&t.state);
        let err = trace.q[t.action] - y;
        loss += err * err * inv_batch;
        dq.fill(0.0);
        dq[t.action] = 2.0 * err * inv_batch;
        online.backward(&trace, &dq, &mut grads);
    }
    online.apply_gradients(&grads, hp.learning_rate);
    Ok(loss)
}

/// Hard-copies the online network into the target every `period` steps.
pub fn sync_target(online: &QNetwork, target: &mut QNetwork, step: u64, period: u64) {
    debug_assert!(period >= 1);
    if step % period == 0 {
        *target = online.clone();
    }
}

#[derive(Serialize, Deserialize)]
struct RngSnapshot {
    seed: Vec<u8>,
    word_pos: u128,
}

impl RngSnapshot {
    fn capture(rng: &ChaCha8Rng) -> Self {
        RngSnapshot {
            seed: rng.get_seed().to_vec(),
            word_pos: rng.get_word_pos(),
        }
    }

    fn restore(&self) -> Result<ChaCha8Rng, AgentError> {
        let seed: [u8; 32] = self.seed.as_slice().try_into().map_err(|_| AgentError::RngState)?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_word_pos(self.word_pos);
        Ok(rng)
    }
}

const CHECKPOINT_VERSION: u32 = 1;

/// Serialized agent: dimensions, parameters, hyperparameters and RNG state.
/// Reloading reproduces forward outputs bit-identically and resumes
/// training deterministically (the replay buffer is rebuilt from scratch).
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    version: u32,
    online: QNetwork,
    target: QNetwork,
    hyperparams: Hyperparams,
    decision_steps: u64,
    train_steps: u64,
    policy_rng: RngSnapshot,
    replay_rng: RngSnapshot,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(AgentError::Version(ckpt.version));
        }
        Ok(ckpt)
    }

    /// The greedy policy network for evaluation runs.
    pub fn policy_network(&self) -> QNetwork {
        self.online.clone()
    }
}

/// Online + target networks, replay buffer and counters: the full learner.
#[derive(Clone, Debug)]
pub struct DqnAgent {
    online: QNetwork,
    target: QNetwork,
    buffer: ReplayBuffer,
    hp: Hyperparams,
    policy_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    decision_steps: u64,
    train_steps: u64,
}

impl DqnAgent {
    pub fn new(seed: u64, input_dim: usize, n_actions: usize, hp: Hyperparams) -> Self {
        let mut init_rng = stream_rng(seed, streams::NET_INIT, 0);
        let online = QNetwork::new(input_dim, &hp.hidden, n_actions, &mut init_rng);
        let target = online.clone();
        DqnAgent {
            buffer: ReplayBuffer::new(hp.capacity),
            policy_rng: stream_rng(seed, streams::POLICY, 0),
            replay_rng: stream_rng(seed, streams::REPLAY, 0),
            online,
            target,
            hp,
            decision_steps: 0,
            train_steps: 0,
        }
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn decision_steps(&self) -> u64 {
        self.decision_steps
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(&self.hp, self.decision_steps)
    }

    /// Epsilon-greedy action for training; advances the schedule.
    pub fn act_exploring(&mut self, state: &[f64]) -> (usize, f64) {
        let eps = self.epsilon();
        let action = act(&self.online, state, eps, &mut self.policy_rng);
        self.decision_steps += 1;
        (action, eps)
    }

    pub fn observe(&mut self, transition: Transition) {
        self.buffer.push(transition);
    }

    /// Train step honoring the configured period; syncs the target network.
    /// Returns the loss when an update ran.
    pub fn maybe_train(&mut self) -> Option<f64> {
        if self.decision_steps % self.hp.train_period != 0 {
            return None;
        }
        match train_step(
            &mut self.online,
            &self.target,
            &self.buffer,
            &self.hp,
            &mut self.replay_rng,
        ) {
            Ok(loss) => {
                self.train_steps += 1;
                sync_target(&self.online, &mut self.target, self.train_steps, self.hp.sync_period);
                Some(loss)
            }
            Err(AgentError::UnderfullBuffer { .. }) => None,
            Err(_) => unreachable!("train_step only signals underfull buffers"),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            online: self.online.clone(),
            target: self.target.clone(),
            hyperparams: self.hp.clone(),
            decision_steps: self.decision_steps,
            train_steps: self.train_steps,
            policy_rng: RngSnapshot::capture(&self.policy_rng),
            replay_rng: RngSnapshot::capture(&self.replay_rng),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, AgentError> {
        Ok(DqnAgent {
            buffer: ReplayBuffer::new(ckpt.hyperparams.capacity),
            online: ckpt.online.clone(),
            target: ckpt.target.clone(),
            hp: ckpt.hyperparams.clone(),
            policy_rng: ckpt.policy_rng.restore()?,
            replay_rng: ckpt.replay_rng.restore()?,
            decision_steps: ckpt.decision_steps,
            train_steps: ckpt.train_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_net(seed: u64, input: usize, actions: usize) -> QNetwork {
        let mut rng = stream_rng(seed, streams::NET_INIT, 0);
        QNetwork::new(input, &[8], actions, &mut rng)
    }

    #[test]
    fn greedy_action_is_argmax_with_low_tie() {
        assert_eq!(argmax(&[0.0, 5.0, 1.0, 2.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 2.0, 2.0]), 0);
    }

    #[test]
    fn greedy_act_uses_q_values() {
        let net = constant_q_net(3, 0.0, [0.0, 5.0, 1.0, 2.0]);
        let mut rng = stream_rng(9, streams::POLICY, 0);
        assert_eq!(act(&net, &[0.3, 0.1, 0.9], 0.0, &mut rng), 1);
        let tied = constant_q_net(3, 2.0, [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(act(&tied, &[0.3, 0.1, 0.9], 0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform_within_three_sigma() {
        let net = tiny_net(1, 4, 4);
        let mut rng = stream_rng(5, streams::POLICY, 0);
        let mut counts = [0u32; 4];
        let n = 10_000;
        for _ in 0..n {
            counts[act(&net, &[0.1, 0.2, 0.3, 0.4], 1.0, &mut rng)] += 1;
        }
        // Multinomial: sigma = sqrt(n * p * (1 - p)) with p = 1/4.
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!(
                (c as f64 - n as f64 * 0.25).abs() <= 3.0 * sigma,
                "counts {counts:?}"
            );
        }
    }

    /// Trunk-free net with all-zero weights and prescribed head biases, so
    /// Q is a known constant vector: Q_a = v + b_a - mean(b).
    fn constant_q_net(input: usize, value_bias: f64, adv_biases: [f64; 4]) -> QNetwork {
        let mut rng = stream_rng(0, streams::NET_INIT, 0);
        let mut net = QNetwork::new(input, &[], 4, &mut rng);
        // Layout: value_w (input), value_b (1), adv_w (input*4), adv_b (4).
        let mut p = vec![0.0; net.flat_params().len()];
        p[input] = value_bias;
        let n = p.len();
        p[n - 4..].copy_from_slice(&adv_biases);
        net.set_flat_params(&p);
        net
    }

    #[test]
    fn double_q_target_direct_substitution() {
        // With online argmax at action 2 and Q_target(s', 2) = 2:
        // y = 1 + 0.9 * 2 = 2.8.
        let online = constant_q_net(2, 0.0, [0.0, 0.1, 0.9, 0.2]);
        // Target advantage centering subtracts 0.5; value bias 0.5 puts
        // Q_target(s', 2) at exactly 2.0.
        let target = constant_q_net(2, 0.5, [0.0, 0.0, 2.0, 0.0]);
        assert_eq!(argmax(&online.forward(&[0.0, 0.0])), 2);
        assert_abs_diff_eq!(target.forward(&[0.0, 0.0])[2], 2.0, epsilon = 1e-12);

        let t = Transition {
            state: vec![0.0, 0.0],
            action: 0,
            reward: 1.0,
            next_state: vec![0.0, 0.0],
            done: false,
        };
        let y = double_q_targets(&[&t], &online, &target, 0.9);
        assert_abs_diff_eq!(y[0], 2.8, epsilon = 1e-9);
    }

    #[test]
    fn terminal_transitions_ignore_networks() {
        let online = tiny_net(2, 3, 4);
        let target = tiny_net(3, 3, 4);
        let t = Transition {
            state: vec![0.0; 3],
            action: 1,
            reward: -7.5,
            next_state: vec![1.0; 3],
            done: true,
        };
        let y = double_q_targets(&[&t], &online, &target, 0.99);
        assert_eq!(y[0], -7.5);
    }

    #[test]
    fn identical_networks_reduce_to_plain_dqn_target() {
        let online = tiny_net(9, 3, 4);
        let target = online.clone();
        let t = Transition {
            state: vec![0.0; 3],
            action: 0,
            reward: 0.5,
            next_state: vec![0.3, -0.2, 0.9],
            done: false,
        };
        let y = double_q_targets(&[&t], &online, &target, 0.9)[0];
        let q = online.forward(&t.next_state);
        let plain = t.reward + 0.9 * q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(y, plain, epsilon = 1e-12);
    }

    #[test]
    fn underfull_buffer_changes_nothing() {
        let mut online = tiny_net(4, 3, 4);
        let target = online.clone();
        let before = online.flat_params();
        let buffer = ReplayBuffer::new(64);
        let hp = Hyperparams::default();
        let mut rng = stream_rng(0, streams::REPLAY, 0);
        let res = train_step(&mut online, &target, &buffer, &hp, &mut rng);
        assert!(matches!(res, Err(AgentError::UnderfullBuffer { .. })));
        assert_eq!(online.flat_params(), before);
    }

    #[test]
    fn single_transition_regression_converges_to_reward() {
        // gamma = 0 turns the TD update into scalar regression on r.
        let mut online = tiny_net(7, 2, 3);
        let target = online.clone();
        let hp = Hyperparams {
            hidden: vec![8],
            learning_rate: 0.05,
            gamma: 0.0,
            batch_size: 1,
            capacity: 8,
            sync_period: 1_000_000,
            ..Hyperparams::default()
        };
        let mut buffer = ReplayBuffer::new(hp.capacity);
        buffer.push(Transition {
            state: vec![0.4, -0.7],
            action: 1,
            reward: 3.25,
            next_state: vec![0.0, 0.0],
            done: false,
        });
        let mut rng = stream_rng(2, streams::REPLAY, 0);
        for _ in 0..2000 {
            train_step(&mut online, &target, &buffer, &hp, &mut rng).unwrap();
        }
        let q = online.forward(&[0.4, -0.7]);
        assert!((q[1] - 3.25).abs() < 1e-3, "Q = {q:?}");
    }

    #[test]
    fn target_sync_periodicity() {
        let mut online = tiny_net(4, 3, 4);
        let mut target = tiny_net(5, 3, 4);
        assert_ne!(online.flat_params(), target.flat_params());
        sync_target(&online, &mut target, 7, 5);
        assert_ne!(online.flat_params(), target.flat_params());
        sync_target(&online, &mut target, 10, 5);
        assert_eq!(online.flat_params(), target.flat_params());
        // C = 1 keeps them identical after every step.
        let mut p = online.flat_params();
        p[0] += 1.0;
        online.set_flat_params(&p);
        sync_target(&online, &mut target, 11, 1);
        assert_eq!(online.flat_params(), target.flat_params());
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let hp = Hyperparams::default();
        assert_eq!(epsilon_at(&hp, 0), 1.0);
        assert_abs_diff_eq!(epsilon_at(&hp, 25_000), 0.525, epsilon = 1e-12);
        assert_eq!(epsilon_at(&hp, 50_000), 0.05);
        assert_eq!(epsilon_at(&hp, 999_999), 0.05);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.json");
        let mut agent = DqnAgent::new(11, 6, 4, Hyperparams {
            hidden: vec![8],
            batch_size: 4,
            ..Hyperparams::default()
        });
        // Burn in some state so counters and RNG positions are non-trivial.
        for i in 0..40 {
            let s = vec![i as f64 * 0.1; 6];
            let (a, _) = agent.act_exploring(&s);
            agent.observe(Transition {
                state: s.clone(),
                action: a,
                reward: -(i as f64),
                next_state: s,
                done: false,
            });
            agent.maybe_train();
        }
        agent.checkpoint().save(&path).unwrap();
        let restored = DqnAgent::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
        let probe = vec![0.25; 6];
        let a = agent.online().forward(&probe);
        let b = restored.online().forward(&probe);
        assert_eq!(a, b, "forward outputs must match bit for bit");
        assert_eq!(agent.decision_steps(), restored.decision_steps());
        // The policy stream resumes at the same position.
        let mut x = agent;
        let mut y = restored;
        for _ in 0..16 {
            assert_eq!(x.act_exploring(&probe).0, y.act_exploring(&probe).0);
        }
    }
}
