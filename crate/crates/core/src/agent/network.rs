//! Convolutional Q-network over the state matrix.
//!
//! Four `conv3x3 (same padding) -> batch norm -> tanh` stages and a dense
//! output layer. Activations are kept as `(N*H*W, C)` matrices with rows in
//! `(n, h, w)` order, so a convolution is one im2col product and the dense
//! layer sees each sample flattened in `(h, w, c)` order.

use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::QFunction;
use crate::error::{Error, Result};
use crate::telemetry::{NetworkState, NUM_ROWS};

const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub channels: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// Initial value of every output bias. A value above the reachable
    /// returns makes untried actions look attractive to the greedy policy.
    pub output_bias_init: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            channels: vec![16, 32, 32, 64],
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            output_bias_init: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QNetwork {
    height: usize,
    width: usize,
    num_actions: usize,
    cfg: NetworkConfig,
    /// conv weight, bn gamma, bn beta per stage, then dense weight and bias.
    params: Vec<Array2<f64>>,
    running_mean: Vec<Array1<f64>>,
    running_var: Vec<Array1<f64>>,
    adam_m: Vec<Array2<f64>>,
    adam_v: Vec<Array2<f64>>,
    adam_t: i32,
}

struct StageCache {
    cols: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    out: Array2<f64>,
    mean: Array1<f64>,
    var: Array1<f64>,
}

struct Forward {
    q: Array2<f64>,
    stages: Vec<StageCache>,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}

impl QNetwork {
    /// `height x width` single-channel input, `num_actions` outputs.
    pub fn new(height: usize, width: usize, num_actions: usize, cfg: NetworkConfig, seed: u64) -> Result<Self> {
        if height == 0 || width == 0 || num_actions == 0 || cfg.channels.is_empty() || cfg.channels.contains(&0) {
            return Err(Error::validation("network dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut running_mean = Vec::new();
        let mut running_var = Vec::new();
        let mut c_in = 1;
        for &c in &cfg.channels {
            let k2 = KERNEL * KERNEL;
            params.push(xavier(&mut rng, k2 * c_in, c, k2 * c_in, k2 * c));
            params.push(Array2::ones((1, c)));
            params.push(Array2::zeros((1, c)));
            running_mean.push(Array1::zeros(c));
            running_var.push(Array1::ones(c));
            c_in = c;
        }
        let flat = height * width * c_in;
        params.push(xavier(&mut rng, flat, num_actions, flat, num_actions));
        params.push(Array2::from_elem((1, num_actions), cfg.output_bias_init));
        let zeros: Vec<Array2<f64>> = params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Ok(QNetwork {
            height,
            width,
            num_actions,
            cfg,
            adam_m: zeros.clone(),
            adam_v: zeros,
            adam_t: 0,
            params,
            running_mean,
            running_var,
        })
    }

    /// Network for a `4 x (num_slices + 1)` state.
    pub fn for_slices(num_slices: usize, num_actions: usize, cfg: NetworkConfig, seed: u64) -> Result<Self> {
        QNetwork::new(NUM_ROWS, num_slices + 1, num_actions, cfg, seed)
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn num_stages(&self) -> usize {
        self.cfg.channels.len()
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.num_stages() {
            names.push(format!("conv{i}.weight"));
            names.push(format!("bn{i}.gamma"));
            names.push(format!("bn{i}.beta"));
        }
        names.push("fc.weight".into());
        names.push("fc.bias".into());
        names
    }

    pub fn parameters(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn running_stats(&self) -> (&[Array1<f64>], &[Array1<f64>]) {
        (&self.running_mean, &self.running_var)
    }

    pub(crate) fn from_parts(
        height: usize,
        width: usize,
        cfg: NetworkConfig,
        params: Vec<Array2<f64>>,
        running_mean: Vec<Array1<f64>>,
        running_var: Vec<Array1<f64>>,
    ) -> Result<Self> {
        let num_actions = params.last().map_or(0, |b| b.ncols());
        let template = QNetwork::new(height, width, num_actions.max(1), cfg, 0)?;
        let shapes_ok = template.params.len() == params.len()
            && template.params.iter().zip(&params).all(|(a, b)| a.dim() == b.dim())
            && running_mean.len() == template.running_mean.len()
            && running_var.len() == template.running_var.len()
            && template
                .running_mean
                .iter()
                .zip(running_mean.iter().zip(&running_var))
                .all(|(t, (m, v))| t.len() == m.len() && t.len() == v.len());
        if !shapes_ok {
            return Err(Error::Checkpoint("tensor shapes do not match the network layout".into()));
        }
        Ok(QNetwork {
            params,
            running_mean,
            running_var,
            ..template
        })
    }

    fn input(&self, states: &[&NetworkState]) -> Result<Array2<f64>> {
        let hw = self.height * self.width;
        let mut x = Array2::zeros((states.len() * hw, 1));
        for (n, s) in states.iter().enumerate() {
            if (s.rows(), s.cols()) != (self.height, self.width) {
                return Err(Error::Dimension {
                    expected: hw,
                    actual: s.rows() * s.cols(),
                });
            }
            for (k, &v) in s.as_slice().iter().enumerate() {
                x[[n * hw + k, 0]] = v;
            }
        }
        Ok(x)
    }

    fn im2col(&self, x: &Array2<f64>, n: usize) -> Array2<f64> {
        let (h, w, c) = (self.height, self.width, x.ncols());
        let mut cols = Array2::zeros((n * h * w, KERNEL * KERNEL * c));
        for b in 0..n {
            for i in 0..h {
                for j in 0..w {
                    let row = (b * h + i) * w + j;
                    for kh in 0..KERNEL {
                        let ii = i as isize + kh as isize - 1;
                        if ii < 0 || ii >= h as isize {
                            continue;
                        }
                        for kw in 0..KERNEL {
                            let jj = j as isize + kw as isize - 1;
                            if jj < 0 || jj >= w as isize {
                                continue;
                            }
                            let src = (b * h + ii as usize) * w + jj as usize;
                            let off = (kh * KERNEL + kw) * c;
                            cols.slice_mut(s![row, off..off + c]).assign(&x.row(src));
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &Array2<f64>, n: usize, c: usize) -> Array2<f64> {
        let (h, w) = (self.height, self.width);
        let mut dx = Array2::zeros((n * h * w, c));
        for b in 0..n {
            for i in 0..h {
                for j in 0..w {
                    let row = (b * h + i) * w + j;
                    for kh in 0..KERNEL {
                        let ii = i as isize + kh as isize - 1;
                        if ii < 0 || ii >= h as isize {
                            continue;
                        }
                        for kw in 0..KERNEL {
                            let jj = j as isize + kw as isize - 1;
                            if jj < 0 || jj >= w as isize {
                                continue;
                            }
                            let dst = (b * h + ii as usize) * w + jj as usize;
                            let off = (kh * KERNEL + kw) * c;
                            let mut d = dx.row_mut(dst);
                            d += &dcols.slice(s![row, off..off + c]);
                        }
                    }
                }
            }
        }
        dx
    }

    fn forward(&self, states: &[&NetworkState], training: bool) -> Result<Forward> {
        let n = states.len();
        let mut x = self.input(states)?;
        let mut stages = Vec::with_capacity(self.num_stages());
        for i in 0..self.num_stages() {
            let cols = self.im2col(&x, n);
            let z = cols.dot(&self.params[3 * i]);
            let (mean, var) = if training {
                let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                let var = z.var_axis(Axis(0), 0.0);
                (mean, var)
            } else {
                (self.running_mean[i].clone(), self.running_var[i].clone())
            };
            let inv_std = var.mapv(|v| 1.0 / (v + self.cfg.bn_eps).sqrt());
            let xhat = (&z - &mean) * &inv_std;
            let gamma = self.params[3 * i + 1].row(0);
            let beta = self.params[3 * i + 2].row(0);
            let out = (&xhat * &gamma + &beta).mapv(f64::tanh);
            x = out.clone();
            stages.push(StageCache {
                cols,
                xhat,
                inv_std,
                out,
                mean,
                var,
            });
        }
        let flat = x
            .into_shape_with_order((n, self.height * self.width * self.cfg.channels[self.num_stages() - 1]))
            .expect("contiguous activations");
        let k = self.params.len();
        let q = flat.dot(&self.params[k - 2]) + &self.params[k - 1].row(0);
        Ok(Forward { q, stages })
    }

    /// Q-values for a batch, one row per state.
    pub fn predict(&self, states: &[&NetworkState], training: bool) -> Result<Array2<f64>> {
        Ok(self.forward(states, training)?.q)
    }

    /// Mean squared TD error on the taken actions and its gradient for every
    /// parameter, using batch statistics.
    pub fn loss_and_gradients(
        &self,
        states: &[&NetworkState],
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        let (loss, grads, _) = self.backprop(states, actions, targets)?;
        Ok((loss, grads))
    }

    fn backprop(
        &self,
        states: &[&NetworkState],
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Vec<Array2<f64>>, Forward)> {
        let n = states.len();
        if n == 0 || actions.len() != n || targets.len() != n {
            return Err(Error::validation("batch states, actions and targets must align"));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.num_actions) {
            return Err(Error::OutOfRange {
                what: "action id",
                value: a.to_string(),
                range: format!("[0, {})", self.num_actions),
            });
        }
        let fwd = self.forward(states, true)?;
        let mut dq = Array2::zeros((n, self.num_actions));
        let mut loss = 0.0;
        for b in 0..n {
            let err = fwd.q[[b, actions[b]]] - targets[b];
            loss += err * err;
            dq[[b, actions[b]]] = 2.0 * err / n as f64;
        }
        loss /= n as f64;

        let k = self.params.len();
        let mut grads: Vec<Array2<f64>> = self.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        let last = &fwd.stages[self.num_stages() - 1].out;
        let c_last = last.ncols();
        let flat = last
            .view()
            .into_shape_with_order((n, self.height * self.width * c_last))
            .expect("contiguous activations");
        grads[k - 2] = flat.t().dot(&dq);
        grads[k - 1] = dq.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut dy = dq
            .dot(&self.params[k - 2].t())
            .into_shape_with_order((n * self.height * self.width, c_last))
            .expect("contiguous gradient");

        let m = (n * self.height * self.width) as f64;
        for i in (0..self.num_stages()).rev() {
            let st = &fwd.stages[i];
            let dz = &dy * &st.out.mapv(|y| 1.0 - y * y);
            grads[3 * i + 1] = (&dz * &st.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
            grads[3 * i + 2] = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
            let dxhat = &dz * &self.params[3 * i + 1].row(0);
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &st.xhat).sum_axis(Axis(0));
            let dpre = (&dxhat * m - &sum_dxhat - &st.xhat * &sum_dxhat_xhat) * &(&st.inv_std / m);
            grads[3 * i] = st.cols.t().dot(&dpre);
            if i > 0 {
                let dcols = dpre.dot(&self.params[3 * i].t());
                dy = self.col2im(&dcols, n, self.params[3 * (i - 1)].ncols());
            }
        }
        Ok((loss, grads, fwd))
    }

    /// One Adam step on the batch; updates running statistics. Returns the
    /// pre-update loss.
    pub fn train_batch(&mut self, states: &[&NetworkState], actions: &[usize], targets: &[f64]) -> Result<f64> {
        let (loss, grads, fwd) = self.backprop(states, actions, targets)?;
        if !loss.is_finite() {
            return Ok(loss);
        }
        let mom = self.cfg.bn_momentum;
        for (i, st) in fwd.stages.iter().enumerate() {
            self.running_mean[i] = &self.running_mean[i] * (1.0 - mom) + &st.mean * mom;
            self.running_var[i] = &self.running_var[i] * (1.0 - mom) + &st.var * mom;
        }
        self.adam_t += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(self.adam_t);
        let c2 = 1.0 - b2.powi(self.adam_t);
        let (lr, eps) = (self.cfg.learning_rate, self.cfg.adam_eps);
        for ((p, g), (m, v)) in self
            .params
            .iter_mut()
            .zip(&grads)
            .zip(self.adam_m.iter_mut().zip(self.adam_v.iter_mut()))
        {
            m.zip_mut_with(g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
            v.zip_mut_with(g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            });
        }
        Ok(loss)
    }
}

impl QFunction<NetworkState> for QNetwork {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn q_values(&self, state: &NetworkState) -> Result<Vec<f64>> {
        Ok(self.predict(&[state], false)?.row(0).to_vec())
    }

    fn q_values_batch(&self, states: &[&NetworkState]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .predict(states, false)?
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect())
    }

    fn fit(&mut self, states: &[&NetworkState], actions: &[usize], targets: &[f64]) -> Result<f64> {
        self.train_batch(states, actions, targets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(seed: u64) -> NetworkState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NetworkState::from_rows(3, (0..16).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn output_shape() {
        let net = QNetwork::for_slices(3, 198, NetworkConfig::default(), 1).unwrap();
        let s = state(0);
        assert_eq!(net.q_values(&s).unwrap().len(), 198);
        let q = net.predict(&[&s, &state(1)], true).unwrap();
        assert_eq!(q.dim(), (2, 198));
        assert!(net.q_values(&NetworkState::zeros(2)).is_err());
    }

    #[test]
    fn inference_is_deterministic_and_batch_independent() {
        let net = QNetwork::for_slices(3, 10, NetworkConfig::default(), 4).unwrap();
        let (a, b) = (state(0), state(1));
        let single = net.q_values(&a).unwrap();
        let batch = net.q_values_batch(&[&b, &a]).unwrap();
        assert_eq!(single, batch[1]);
        assert_eq!(single, net.q_values(&a).unwrap());
    }

    #[test]
    fn zero_error_leaves_parameters() {
        let mut net = QNetwork::for_slices(3, 5, NetworkConfig::default(), 2).unwrap();
        let ss = [state(0), state(1), state(2)];
        let refs: Vec<&NetworkState> = ss.iter().collect();
        let actions = [0, 3, 4];
        let q = net.predict(&refs, true).unwrap();
        let targets: Vec<f64> = actions.iter().enumerate().map(|(b, &a)| q[[b, a]]).collect();
        let before = net.params.clone();
        let loss = net.fit(&refs, &actions, &targets).unwrap();
        assert_eq!(loss, 0.0);
        for (a, b) in before.iter().zip(&net.params) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn repeated_fit_reaches_target() {
        let mut net = QNetwork::for_slices(3, 6, NetworkConfig::default(), 3).unwrap();
        let s = state(9);
        for _ in 0..3000 {
            net.fit(&[&s], &[2], &[0.75]).unwrap();
        }
        let q = net.q_values(&s).unwrap()[2];
        assert!((q - 0.75).abs() < 1e-3, "{q}");
    }
}
