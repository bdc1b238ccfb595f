use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::{LstmCellParams, Step};
use super::resample::{resample, unresample, Matrix};
use super::LstmError;

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    /// Samples per recurrent step.
    pub tau: usize,
    pub input_channels: usize,
    pub output_channels: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without sufficient training-loss improvement before stopping.
    pub patience_epochs: usize,
    /// Relative improvement that resets the patience counter.
    pub min_improvement_fraction: f64,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            hidden_size: 30,
            tau: 9,
            input_channels: 3,
            output_channels: 1,
            learning_rate: 0.01,
            max_epochs: 1000,
            patience_epochs: 100,
            min_improvement_fraction: 0.01,
            batch_size: 32,
            rng_seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let counts = [
            ("num_layers", self.num_layers),
            ("hidden_size", self.hidden_size),
            ("tau", self.tau),
            ("input_channels", self.input_channels),
            ("output_channels", self.output_channels),
            ("max_epochs", self.max_epochs),
            ("patience_epochs", self.patience_epochs),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(LstmError::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LstmError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.min_improvement_fraction >= 0.0 && self.min_improvement_fraction < 1.0) {
            return Err(LstmError::Config(format!(
                "min_improvement_fraction must lie in [0, 1), got {}",
                self.min_improvement_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScale {
    pub mean: f64,
    pub scale: f64,
}

impl ChannelScale {
    pub const IDENTITY: ChannelScale = ChannelScale { mean: 0.0, scale: 1.0 };

    /// z-score parameters of `values`; a constant channel gets scale 1.
    pub fn fit<'a>(values: impl Iterator<Item = &'a [f64]> + Clone) -> ChannelScale {
        let (mut n, mut sum) = (0usize, 0.0);
        for v in values.clone() {
            n += v.len();
            sum += v.iter().sum::<f64>();
        }
        if n == 0 {
            return Self::IDENTITY;
        }
        let mean = sum / n as f64;
        let var = values.map(|v| v.iter().map(|x| (x - mean).powi(2)).sum::<f64>()).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        ChannelScale { mean, scale }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.scale
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.scale + self.mean
    }
}

/// Per-channel z-scores for inputs and targets, fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub inputs: Vec<ChannelScale>,
    pub targets: Vec<ChannelScale>,
}

impl Normalization {
    pub fn identity(input_channels: usize, output_channels: usize) -> Self {
        Self {
            inputs: vec![ChannelScale::IDENTITY; input_channels],
            targets: vec![ChannelScale::IDENTITY; output_channels],
        }
    }
}

/// `y = W·h + b` with `W` of shape `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub outputs: usize,
    pub inputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearHead {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            outputs,
            inputs,
            w: vec![0.0; outputs * inputs],
            b: vec![0.0; outputs],
        }
    }

    fn apply(&self, h: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let w = &self.w[r * self.inputs..(r + 1) * self.inputs];
            *o = self.b[r] + w.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Every trainable tensor of a network. Gradients and optimizer moments use
/// the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub layers: Vec<LstmCellParams>,
    pub head: LinearHead,
}

impl Parameters {
    pub fn random(cfg: &NetworkConfig, rng: &mut impl Rng) -> Self {
        let h = cfg.hidden_size;
        let layers = (0..cfg.num_layers)
            .map(|l| {
                let d = if l == 0 { cfg.tau * cfg.input_channels } else { h };
                LstmCellParams::random(h, d, rng)
            })
            .collect();
        let bound = 1.0 / (h as f64).sqrt();
        let mut head = LinearHead::zeros(cfg.tau * cfg.output_channels, h);
        head.w.iter_mut().for_each(|v| *v = rng.gen_range(-bound..=bound));
        Self { layers, head }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| LstmCellParams::zeros(l.hidden, l.input)).collect(),
            head: LinearHead::zeros(self.head.outputs, self.head.inputs),
        }
    }

    /// Named views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.w"), &l.w));
            out.push((format!("layer{i}.u"), &l.u));
            out.push((format!("layer{i}.b"), &l.b));
        }
        out.push(("head.w".into(), &self.head.w));
        out.push(("head.b".into(), &self.head.b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in self.layers.iter_mut() {
            out.push(&mut l.w);
            out.push(&mut l.u);
            out.push(&mut l.b);
        }
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `self += k · other`.
    pub fn add_scaled(&mut self, other: &Parameters, k: f64) {
        let src = other.tensors();
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(src) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += k * b;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    fn check(&self, x: &Matrix) -> Result<(), LstmError> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| LstmError::Shape("network has no layers".into()))?;
        if x.cols() != first.input {
            return Err(LstmError::Shape(format!(
                "input rows have {} values, first layer expects {}",
                x.cols(),
                first.input
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            if i > 0 && l.input != self.layers[i - 1].hidden {
                return Err(LstmError::Shape(format!("layer {i} input width {} mismatch", l.input)));
            }
        }
        let top = self.layers.last().map(|l| l.hidden).unwrap_or(0);
        let head = &self.head;
        if head.inputs != top || head.w.len() != head.outputs * head.inputs || head.b.len() != head.outputs {
            return Err(LstmError::Shape("output head does not match top layer".into()));
        }
        Ok(())
    }

    /// Normalized-space output for a resampled input.
    pub fn predict_matrix(&self, x: &Matrix) -> Result<Matrix, LstmError> {
        self.check(x)?;
        Ok(self.run(x).1)
    }

    fn run(&self, x: &Matrix) -> (Vec<LayerTrace>, Matrix) {
        let steps = x.rows();
        let mut traces: Vec<LayerTrace> = Vec::with_capacity(self.layers.len());
        for (l, p) in self.layers.iter().enumerate() {
            let h = p.hidden;
            let mut tr = LayerTrace {
                h: Vec::with_capacity(steps + 1),
                c: Vec::with_capacity(steps + 1),
                steps: Vec::with_capacity(steps),
            };
            tr.h.push(vec![0.0; h]);
            tr.c.push(vec![0.0; h]);
            for t in 0..steps {
                let input: &[f64] = if l == 0 { x.row(t) } else { &traces[l - 1].h[t + 1] };
                let s = Step::forward(p, input, &tr.h[t], &tr.c[t]);
                tr.h.push(s.hidden());
                tr.c.push(s.c.clone());
                tr.steps.push(s);
            }
            traces.push(tr);
        }
        let mut out = Matrix::zeros(steps, self.head.outputs);
        if let Some(top) = traces.last() {
            for t in 0..steps {
                self.head.apply(&top.h[t + 1], out.row_mut(t));
            }
        }
        (traces, out)
    }

    fn backward(&self, x: &Matrix, traces: &[LayerTrace], dy: &Matrix) -> Parameters {
        let mut grad = self.zeros_like();
        let steps = x.rows();
        let top = traces.last().expect("at least one layer");
        let hd = self.head.inputs;
        let mut dh_above = vec![vec![0.0; hd]; steps];
        for t in 0..steps {
            let h = &top.h[t + 1];
            for (r, &g) in dy.row(t).iter().enumerate() {
                grad.head.b[r] += g;
                let w = &self.head.w[r * hd..(r + 1) * hd];
                let gw = &mut grad.head.w[r * hd..(r + 1) * hd];
                for k in 0..hd {
                    gw[k] += g * h[k];
                    dh_above[t][k] += g * w[k];
                }
            }
        }
        for l in (0..self.layers.len()).rev() {
            let p = &self.layers[l];
            let tr = &traces[l];
            let h = p.hidden;
            let mut dx_all = if l > 0 { vec![vec![0.0; p.input]; steps] } else { Vec::new() };
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            let mut dh = vec![0.0; h];
            let mut dh_prev = vec![0.0; h];
            let mut dc_prev = vec![0.0; h];
            for t in (0..steps).rev() {
                for i in 0..h {
                    dh[i] = dh_above[t][i] + dh_next[i];
                }
                let input: &[f64] = if l == 0 { x.row(t) } else { &traces[l - 1].h[t + 1] };
                tr.steps[t].backward(
                    p,
                    input,
                    &tr.h[t],
                    &tr.c[t],
                    &dh,
                    &dc_next,
                    &mut grad.layers[l],
                    dx_all.get_mut(t).map(|v| v.as_mut_slice()),
                    &mut dh_prev,
                    &mut dc_prev,
                );
                std::mem::swap(&mut dh_next, &mut dh_prev);
                std::mem::swap(&mut dc_next, &mut dc_prev);
            }
            dh_above = dx_all;
        }
        grad
    }
}

struct LayerTrace {
    /// h_0 .. h_T.
    h: Vec<Vec<f64>>,
    /// c_0 .. c_T.
    c: Vec<Vec<f64>>,
    steps: Vec<Step>,
}

/// Mean squared error between equal-length windows.
pub fn mse(target: &[f64], prediction: &[f64]) -> Result<f64, LstmError> {
    if target.len() != prediction.len() {
        return Err(LstmError::Shape(format!(
            "target has {} samples, prediction {}",
            target.len(),
            prediction.len()
        )));
    }
    if target.is_empty() {
        return Err(LstmError::Shape("empty window".into()));
    }
    let s: f64 = target.iter().zip(prediction).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / target.len() as f64)
}

fn check_target(params: &Parameters, x: &Matrix, y: &Matrix) -> Result<(), LstmError> {
    params.check(x)?;
    if y.rows() != x.rows() || y.cols() != params.head.outputs {
        return Err(LstmError::Shape(format!(
            "target {}x{} vs expected {}x{}",
            y.rows(),
            y.cols(),
            x.rows(),
            params.head.outputs
        )));
    }
    Ok(())
}

/// MSE of one resampled, normalized sample.
pub fn loss(params: &Parameters, x: &Matrix, y: &Matrix) -> Result<f64, LstmError> {
    check_target(params, x, y)?;
    if x.rows() == 0 {
        return Ok(0.0);
    }
    let (_, out) = params.run(x);
    mse(y.data(), out.data())
}

/// MSE of one sample and its exact gradient with respect to every parameter.
pub fn loss_and_gradient(params: &Parameters, x: &Matrix, y: &Matrix) -> Result<(f64, Parameters), LstmError> {
    check_target(params, x, y)?;
    if x.rows() == 0 {
        return Ok((0.0, params.zeros_like()));
    }
    let (traces, out) = params.run(x);
    let n = out.data().len() as f64;
    let mut dy = out.clone();
    for (d, t) in dy.data_mut().iter_mut().zip(y.data()) {
        *d = 2.0 * (*d - t) / n;
    }
    let l = mse(y.data(), out.data())?;
    Ok((l, params.backward(x, &traces, &dy)))
}

/// Batch-mean loss and gradient. Samples are processed in parallel and summed
/// in batch order, so the result does not depend on the thread count.
pub fn batch_loss_and_gradient(
    params: &Parameters,
    batch: &[(&Matrix, &Matrix)],
) -> Result<(f64, Parameters), LstmError> {
    if batch.is_empty() {
        return Err(LstmError::Empty("batch".into()));
    }
    let parts = batch
        .par_iter()
        .map(|(x, y)| loss_and_gradient(params, x, y))
        .collect::<Result<Vec<_>, _>>()?;
    let k = 1.0 / batch.len() as f64;
    let mut grad = params.zeros_like();
    let mut total = 0.0;
    for (l, g) in &parts {
        total += l;
        grad.add_scaled(g, k);
    }
    Ok((total * k, grad))
}

/// A configured network with its parameters and normalization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub config: NetworkConfig,
    pub params: Parameters,
    pub normalization: Normalization,
}

impl LstmNetwork {
    /// Freshly initialized from `config.rng_seed`, identity normalization.
    pub fn new(config: NetworkConfig) -> Result<Self, LstmError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let params = Parameters::random(&config, &mut rng);
        let normalization = Normalization::identity(config.input_channels, config.output_channels);
        Ok(Self {
            config,
            params,
            normalization,
        })
    }

    fn check_channels(&self, n: usize, expected: usize, what: &str) -> Result<(), LstmError> {
        if n != expected {
            return Err(LstmError::Shape(format!("{n} {what} channels, network expects {expected}")));
        }
        Ok(())
    }

    /// Normalize and resample input channels.
    pub fn prepare_inputs(&self, inputs: &[&[f64]]) -> Result<Matrix, LstmError> {
        self.check_channels(inputs.len(), self.config.input_channels, "input")?;
        let scaled: Vec<Vec<f64>> = inputs
            .iter()
            .zip(&self.normalization.inputs)
            .map(|(c, s)| c.iter().map(|&v| s.apply(v)).collect())
            .collect();
        let refs: Vec<&[f64]> = scaled.iter().map(|v| v.as_slice()).collect();
        resample(&refs, self.config.tau)
    }

    /// Normalize and resample target channels.
    pub fn prepare_targets(&self, targets: &[&[f64]]) -> Result<Matrix, LstmError> {
        self.check_channels(targets.len(), self.config.output_channels, "target")?;
        let scaled: Vec<Vec<f64>> = targets
            .iter()
            .zip(&self.normalization.targets)
            .map(|(c, s)| c.iter().map(|&v| s.apply(v)).collect())
            .collect();
        let refs: Vec<&[f64]> = scaled.iter().map(|v| v.as_slice()).collect();
        resample(&refs, self.config.tau)
    }

    /// Map input channels to de-normalized output channels of
    /// `floor(len / tau) · tau` samples each.
    pub fn forward(&self, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>, LstmError> {
        let x = self.prepare_inputs(inputs)?;
        let y = self.params.predict_matrix(&x)?;
        let mut out = unresample(&y, self.config.output_channels)?;
        for (ch, s) in out.iter_mut().zip(&self.normalization.targets) {
            ch.iter_mut().for_each(|v| *v = s.invert(*v));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> NetworkConfig {
        NetworkConfig {
            num_layers: 2,
            hidden_size: 4,
            tau: 9,
            input_channels: 3,
            output_channels: 1,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let a: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 2.0).collect();
        assert!((mse(&a, &b).unwrap() - 4.0).abs() < 1e-12);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn output_length_and_purity() {
        let net = LstmNetwork::new(small_config()).unwrap();
        let ch: Vec<Vec<f64>> = (0..3).map(|c| (0..31).map(|i| ((i * (c + 1)) as f64).cos()).collect()).collect();
        let refs: Vec<&[f64]> = ch.iter().map(|v| v.as_slice()).collect();
        let a = net.forward(&refs).unwrap();
        let b = net.forward(&refs).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].len(), 27);
    }

    #[test]
    fn small_weights_zero_input_gives_head_bias() {
        let mut net = LstmNetwork::new(small_config()).unwrap();
        for t in net.params.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= 1e-6);
        }
        net.params.head.b.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * i as f64);
        net.normalization.targets[0] = ChannelScale { mean: 3.0, scale: 2.0 };
        let zeros = vec![0.0; 27];
        let out = net.forward(&[&zeros, &zeros, &zeros]).unwrap();
        for (j, v) in out[0].iter().enumerate() {
            let expected = 3.0 + 2.0 * 0.1 * (j % 9) as f64;
            assert!((v - expected).abs() < 1e-6, "{v} vs {expected}");
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let net = LstmNetwork::new(small_config()).unwrap();
        let z = vec![0.0; 27];
        assert!(net.forward(&[&z, &z]).is_err());
    }

    #[test]
    fn zero_length_sequence_has_zero_gradient() {
        let net = LstmNetwork::new(small_config()).unwrap();
        let x = Matrix::zeros(0, 27);
        let y = Matrix::zeros(0, 9);
        let (l, g) = loss_and_gradient(&net.params, &x, &y).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.tensors().iter().all(|(_, t)| t.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn duplicated_sample_leaves_mean_gradient_unchanged() {
        let net = LstmNetwork::new(NetworkConfig {
            tau: 1,
            input_channels: 2,
            hidden_size: 3,
            ..NetworkConfig::default()
        })
        .unwrap();
        let x = Matrix::from_vec(4, 2, vec![0.1, -0.3, 0.5, 0.2, -0.7, 0.9, 0.0, 0.4]).unwrap();
        let y = Matrix::from_vec(4, 1, vec![0.3, -0.1, 0.2, 0.8]).unwrap();
        let (l1, g1) = batch_loss_and_gradient(&net.params, &[(&x, &y)]).unwrap();
        let (l2, g2) = batch_loss_and_gradient(&net.params, &[(&x, &y), (&x, &y)]).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for ((_, a), (_, b)) in g1.tensors().iter().zip(g2.tensors()) {
            for (p, q) in a.iter().zip(b) {
                assert!((p - q).abs() <= 1e-15 * p.abs().max(1.0));
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(NetworkConfig::default().validate().is_ok());
        for bad in [
            NetworkConfig { tau: 0, ..NetworkConfig::default() },
            NetworkConfig { hidden_size: 0, ..NetworkConfig::default() },
            NetworkConfig { learning_rate: 0.0, ..NetworkConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
