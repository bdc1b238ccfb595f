//! Independent oracles shared by the test targets.
#![allow(dead_code)]

use mfextreme::lstm::{loss, loss_and_gradient, Gate, LstmCellParams, LstmNetwork, Matrix, NetworkConfig, Parameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine(w: &[f64], u: &[f64], b: &[f64], x: &[f64], h: &[f64], row: usize) -> f64 {
    let d = x.len();
    let n = h.len();
    let mut s = b[row];
    for k in 0..d {
        s += w[row * d + k] * x[k];
    }
    for k in 0..n {
        s += u[row * n + k] * h[k];
    }
    s
}

/// Straight-line cell: each gate from its own W, U, b block.
pub fn oracle_cell(p: &LstmCellParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.hidden;
    let mut h_new = vec![0.0; n];
    let mut c_new = vec![0.0; n];
    for i in 0..n {
        let g = |gate: Gate| affine(p.w_gate(gate), p.u_gate(gate), p.b_gate(gate), x, h, i);
        let f1 = sig(g(Gate::Forget));
        let f2 = sig(g(Gate::Input));
        let f3 = g(Gate::Candidate).tanh();
        let f4 = sig(g(Gate::Output));
        c_new[i] = f1 * c[i] + f2 * f3;
        h_new[i] = f4 * c_new[i].tanh();
    }
    (h_new, c_new)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Independent forward: explicit reshaping, per-layer oracle cells, head.
pub fn oracle_forward(net: &LstmNetwork, inputs: &[Vec<f64>]) -> Vec<f64> {
    let cfg = &net.config;
    let tau = cfg.tau;
    let steps = inputs[0].len() / tau;
    let h = cfg.hidden_size;
    let mut states: Vec<(Vec<f64>, Vec<f64>)> = vec![(vec![0.0; h], vec![0.0; h]); cfg.num_layers];
    let mut out = Vec::new();
    let ts = net.normalization.targets[0];
    for j in 0..steps {
        let mut x = Vec::new();
        for (c, ch) in inputs.iter().enumerate() {
            let s = net.normalization.inputs[c];
            for k in 0..tau {
                x.push((ch[j * tau + k] - s.mean) / s.scale);
            }
        }
        for (l, p) in net.params.layers.iter().enumerate() {
            let (hn, cn) = oracle_cell(p, &x, &states[l].0, &states[l].1);
            states[l] = (hn.clone(), cn);
            x = hn;
        }
        let head = &net.params.head;
        for r in 0..head.outputs {
            let mut y = head.b[r];
            for k in 0..h {
                y += head.w[r * h + k] * x[k];
            }
            out.push(y * ts.scale + ts.mean);
        }
    }
    out
}

fn toy_problem(seed: u64) -> (Parameters, Matrix, Matrix) {
    let cfg = NetworkConfig {
        num_layers: 2,
        hidden_size: 3,
        tau: 1,
        input_channels: 2,
        output_channels: 1,
        rng_seed: seed,
        ..NetworkConfig::default()
    };
    let net = LstmNetwork::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    let x = Matrix::from_vec(4, 2, random_vec(&mut rng, 8, 2.0)).unwrap();
    let y = Matrix::from_vec(4, 1, random_vec(&mut rng, 4, 1.0)).unwrap();
    (net.params, x, y)
}

/// Worst per-tensor relative error ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖).
pub fn gradient_check(seed: u64) -> f64 {
    let (params, x, y) = toy_problem(seed);
    let (_, grad) = loss_and_gradient(&params, &x, &y).unwrap();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (ti, (_, analytic)) in grad.tensors().iter().enumerate() {
        let mut diff = 0.0;
        let mut na = 0.0;
        let mut nn = 0.0;
        for k in 0..analytic.len() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti][k] += eps;
            let mut minus = params.clone();
            minus.tensors_mut()[ti][k] -= eps;
            let numeric = (loss(&plus, &x, &y).unwrap() - loss(&minus, &x, &y).unwrap()) / (2.0 * eps);
            diff += (analytic[k] - numeric).powi(2);
            na += analytic[k].powi(2);
            nn += numeric.powi(2);
        }
        let denom = na.sqrt().max(nn.sqrt());
        if denom > 0.0 {
            worst = worst.max(diff.sqrt() / denom);
        }
    }
    worst
}

