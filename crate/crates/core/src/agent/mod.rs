//! Double deep Q-learning with experience replay.

pub mod checkpoint;
mod network;
mod tabular;

use std::collections::VecDeque;
use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use network::{NetworkConfig, QNetwork};
pub use tabular::TabularQ;

use crate::error::{Error, Result};

/// Action-value function the learner can query and fit.
pub trait QFunction<S>: Clone {
    fn num_actions(&self) -> usize;

    /// Inference-mode action values.
    fn q_values(&self, state: &S) -> Result<Vec<f64>>;

    fn q_values_batch(&self, states: &[&S]) -> Result<Vec<Vec<f64>>> {
        states.iter().map(|s| self.q_values(s)).collect()
    }

    /// One optimisation step on squared error at the taken actions; returns
    /// the mean loss before the step.
    fn fit(&mut self, states: &[&S], actions: &[usize], targets: &[f64]) -> Result<f64>;
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub reward: f64,
    pub terminal: bool,
    /// Short label for logs.
    pub kind: &'static str,
}

/// Reset/step contract of the control loop.
pub trait Environment {
    type State: Clone;

    fn num_actions(&self) -> usize;

    fn reset(&mut self) -> Result<Self::State>;

    fn step(&mut self, action: usize) -> Result<Transition<Self::State>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Learning steps.
    pub total_steps: usize,
    pub replay_capacity: usize,
    pub gamma: f64,
    pub epsilon0: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub batch_size: usize,
    /// Target sync period, steps.
    pub target_sync: usize,
    /// Forced episode length, steps.
    pub reset_period: usize,
    /// Double-Q target; `false` uses the target network's own max.
    pub double_q: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            total_steps: 300,
            replay_capacity: 500,
            gamma: 0.85,
            epsilon0: 0.1,
            epsilon_decay: 0.995,
            epsilon_min: 0.01,
            batch_size: 32,
            target_sync: 20,
            reset_period: 300,
            double_q: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::validation(format!("hyperparameters: {m}")));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0 <= self.epsilon_min && self.epsilon_min <= self.epsilon0 && self.epsilon0 <= 1.0) {
            return bad("need 0 <= epsilon_min <= epsilon0 <= 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay) {
            return bad("epsilon_decay must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return bad("batch_size must be in [1, replay_capacity]");
        }
        if self.target_sync == 0 || self.reset_period == 0 {
            return bad("target_sync and reset_period must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience<S> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    pub terminal: bool,
}

/// Bounded FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<S> {
    capacity: usize,
    items: VecDeque<Experience<S>>,
}

impl<S> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, e: Experience<S>) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience<S>> {
        self.items.iter()
    }

    /// `n` distinct entries chosen uniformly.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<&Experience<S>> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice. The uniform draw always happens so the RNG stream
/// does not depend on the network.
pub fn select_action<S, Q: QFunction<S>, R: Rng>(q: &Q, state: &S, epsilon: f64, rng: &mut R) -> Result<usize> {
    let explore = rng.random::<f64>() < epsilon;
    if explore {
        Ok(rng.random_range(0..q.num_actions()))
    } else {
        Ok(argmax(&q.q_values(state)?))
    }
}

pub fn greedy_policy<S, Q: QFunction<S>>(q: &Q, states: &[&S]) -> Result<Vec<usize>> {
    Ok(q.q_values_batch(states)?.iter().map(|v| argmax(v)).collect())
}

pub fn epsilon_decay(epsilon: f64, hp: &Hyperparams) -> f64 {
    (epsilon * hp.epsilon_decay).max(hp.epsilon_min)
}

/// Bootstrapped targets: `r` for terminal transitions, otherwise
/// `r + gamma * Q_target(s', a*)` with `a*` the online argmax (double) or
/// the target argmax (vanilla).
pub fn td_targets<S, Q: QFunction<S>>(
    online: &Q,
    target: &Q,
    batch: &[&Experience<S>],
    gamma: f64,
    double_q: bool,
) -> Result<Vec<f64>> {
    let next: Vec<&S> = batch.iter().map(|e| &e.next_state).collect();
    let q_target = target.q_values_batch(&next)?;
    let q_online = if double_q {
        online.q_values_batch(&next)?
    } else {
        q_target.clone()
    };
    Ok(batch
        .iter()
        .enumerate()
        .map(|(b, e)| {
            if e.terminal {
                e.reward
            } else {
                e.reward + gamma * q_target[b][argmax(&q_online[b])]
            }
        })
        .collect())
}

/// One minibatch update of `online`. `None` until the buffer holds more than
/// `batch_size` transitions.
pub fn train_step<S, Q: QFunction<S>, R: Rng>(
    online: &mut Q,
    target: &Q,
    buffer: &ReplayBuffer<S>,
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<Option<f64>> {
    if buffer.len() <= hp.batch_size {
        return Ok(None);
    }
    let batch = buffer.sample(hp.batch_size, rng);
    let targets = td_targets(online, target, &batch, hp.gamma, hp.double_q)?;
    let states: Vec<&S> = batch.iter().map(|e| &e.state).collect();
    let actions: Vec<usize> = batch.iter().map(|e| e.action).collect();
    online.fit(&states, &actions, &targets).map(Some)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub epsilon: f64,
    pub loss: Option<f64>,
    pub action: usize,
    pub reward: f64,
    pub kind: &'static str,
    pub terminal: bool,
}

impl StepLog {
    pub fn write_csv_header<W: Write>(wtr: &mut csv::Writer<W>) -> Result<()> {
        wtr.write_record(["step", "epsilon", "loss", "action", "reward", "kind"])?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, wtr: &mut csv::Writer<W>) -> Result<()> {
        wtr.write_record([
            self.step.to_string(),
            format!("{:.6}", self.epsilon),
            self.loss.map_or(String::new(), |l| format!("{l:.8}")),
            self.action.to_string(),
            format!("{:.6}", self.reward),
            self.kind.to_string(),
        ])?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<Q> {
    pub online: Q,
    pub target: Q,
    pub log: Vec<StepLog>,
    pub epsilon: f64,
}

/// The learning loop: act, store, learn once the buffer exceeds the batch
/// size, sync the target every `target_sync` steps, and reset after terminal
/// steps (every `reset_period`-th step counts as terminal).
pub fn train<E, Q>(env: &mut E, online: Q, hp: &Hyperparams, seed: u64) -> Result<TrainOutcome<Q>>
where
    E: Environment,
    Q: QFunction<E::State>,
{
    hp.validate()?;
    if online.num_actions() != env.num_actions() {
        return Err(Error::Dimension {
            expected: env.num_actions(),
            actual: online.num_actions(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut online = online;
    let mut target = online.clone();
    let mut buffer = ReplayBuffer::new(hp.replay_capacity);
    let mut epsilon = hp.epsilon0;
    let mut log = Vec::with_capacity(hp.total_steps);
    if hp.total_steps == 0 {
        return Ok(TrainOutcome {
            online,
            target,
            log,
            epsilon,
        });
    }
    let mut state = env.reset()?;
    for step in 1..=hp.total_steps {
        let eps_used = epsilon;
        let action = select_action(&online, &state, epsilon, &mut rng)?;
        let tr = env.step(action)?;
        let terminal = tr.terminal || step % hp.reset_period == 0;
        buffer.push(Experience {
            state,
            action,
            reward: tr.reward,
            next_state: tr.state.clone(),
            terminal,
        });
        let loss = train_step(&mut online, &target, &buffer, hp, &mut rng)?;
        if let Some(l) = loss {
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    detail: format!("loss {l} at epsilon {eps_used:.4}, action {action}"),
                });
            }
            epsilon = epsilon_decay(epsilon, hp);
        }
        if step % hp.target_sync == 0 {
            target = online.clone();
        }
        log.push(StepLog {
            step,
            epsilon: eps_used,
            loss,
            action,
            reward: tr.reward,
            kind: tr.kind,
            terminal,
        });
        state = if terminal { env.reset()? } else { tr.state };
    }
    Ok(TrainOutcome {
        online,
        target,
        log,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[0.0, 1.0, 3.0, 2.0, 3.0]), 2);
        let mut v = vec![0.0; 12];
        v[3] = 1.0;
        v[9] = 1.0;
        assert_eq!(argmax(&v), 3);
    }

    #[test]
    fn replay_evicts_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(Experience {
                state: i,
                action: 0,
                reward: 0.0,
                next_state: i,
                terminal: false,
            });
        }
        assert_eq!(b.len(), 3);
        let kept: Vec<i32> = b.iter().map(|e| e.state).collect();
        assert_eq!(kept, vec![2, 3, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut got: Vec<i32> = b.sample(3, &mut rng).iter().map(|e| e.state).collect();
        got.sort();
        assert_eq!(got, vec![2, 3, 4]);
    }

    #[test]
    fn decay_floors() {
        let hp = Hyperparams {
            epsilon_decay: 0.99,
            ..Hyperparams::default()
        };
        assert!((epsilon_decay(0.1, &hp) - 0.099).abs() < 1e-15);
        assert_eq!(epsilon_decay(hp.epsilon_min, &hp), hp.epsilon_min);
    }

    fn toy(values: &[&[f64]]) -> TabularQ {
        let mut t = TabularQ::new(values.len(), values[0].len(), 0.1);
        for (s, row) in values.iter().enumerate() {
            for (a, &v) in row.iter().enumerate() {
                t.set(s, a, v);
            }
        }
        t
    }

    #[test]
    fn double_q_target() {
        let online = toy(&[&[0.0, 0.0, 0.0], &[1.0, 5.0, 2.0]]);
        let target = toy(&[&[0.0, 0.0, 0.0], &[0.5, 0.2, 0.9]]);
        let e = Experience {
            state: 0usize,
            action: 0,
            reward: 1.0,
            next_state: 1usize,
            terminal: false,
        };
        let t = td_targets(&online, &target, &[&e], 0.85, true).unwrap();
        assert!((t[0] - 1.17).abs() < 1e-12);
        let t = td_targets(&online, &target, &[&e], 0.85, false).unwrap();
        assert!((t[0] - (1.0 + 0.85 * 0.9)).abs() < 1e-12);
        let t = td_targets(&online, &target, &[&e], 0.0, true).unwrap();
        assert_eq!(t[0], 1.0);
        let end = Experience {
            reward: -0.4,
            terminal: true,
            ..e
        };
        assert_eq!(td_targets(&online, &target, &[&end], 0.85, true).unwrap()[0], -0.4);
    }

    #[test]
    fn greedy_selection() {
        let mut row = vec![0.0; 12];
        row[7] = 2.0;
        let q = toy(&[&row]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_action(&q, &0usize, 0.0, &mut rng).unwrap(), 7);
        assert_eq!(greedy_policy(&q, &[&0usize]).unwrap(), vec![7]);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q = TabularQ::new(1, 198, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut counts = vec![0f64; 198];
        for _ in 0..n {
            counts[select_action(&q, &0usize, 1.0, &mut rng).unwrap()] += 1.0;
        }
        let e = n as f64 / 198.0;
        let chi2: f64 = counts.iter().map(|c| (c - e) * (c - e) / e).sum();
        // 197 degrees of freedom; 99.9th percentile is about 267
        assert!(chi2 < 267.0, "{chi2}");
    }
}
