mod common;

use common::{gradient_check, oracle_cell, oracle_forward, random_vec};
use mfextreme::lstm::{
    cell_forward, mse, resample, train, unresample, ChannelScale, LstmCellParams, LstmNetwork, LstmState,
    NetworkConfig, TrainingSample,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn cell_matches_straight_line_oracle() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = LstmCellParams::random(3, 2, &mut rng);
        let x = random_vec(&mut rng, 2, 2.0);
        let s = LstmState {
            hidden: random_vec(&mut rng, 3, 1.0),
            cell: random_vec(&mut rng, 3, 3.0),
        };
        let out = cell_forward(&x, &s, &p).unwrap();
        let (h, c) = oracle_cell(&p, &x, &s.hidden, &s.cell);
        for i in 0..3 {
            assert!((out.hidden[i] - h[i]).abs() < 1e-12);
            assert!((out.cell[i] - c[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn network_forward_matches_oracle() {
    let mut net = LstmNetwork::new(NetworkConfig {
        num_layers: 2,
        hidden_size: 4,
        tau: 9,
        input_channels: 3,
        output_channels: 1,
        rng_seed: 21,
        ..NetworkConfig::default()
    })
    .unwrap();
    net.normalization.inputs = vec![
        ChannelScale { mean: 0.5, scale: 2.0 },
        ChannelScale { mean: -1.0, scale: 0.3 },
        ChannelScale { mean: 0.0, scale: 1.7 },
    ];
    net.normalization.targets[0] = ChannelScale { mean: 1.5, scale: 4.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let inputs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 27, 3.0)).collect();
    let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
    let got = net.forward(&refs).unwrap();
    assert_eq!(got[0].len(), 27);
    let want = oracle_forward(&net, &inputs);
    for (a, b) in got[0].iter().zip(&want) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn bptt_matches_finite_differences() {
    for seed in 0..20 {
        let err = gradient_check(seed);
        assert!(err < 1e-5, "seed {seed}: relative error {err}");
    }
}

#[test]
fn resample_rule() {
    for n in [20usize, 27, 9000] {
        for tau in [1usize, 9] {
            let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let m = resample(&[&x], tau).unwrap();
            assert_eq!(m.rows(), n / tau);
            assert_eq!(m.cols(), tau);
            for j in 0..m.rows() {
                for k in 0..tau {
                    assert_eq!(m.get(j, k), (j * tau + k) as f64);
                }
            }
            let back = unresample(&m, 1).unwrap();
            assert_eq!(back[0], x[..(n / tau) * tau]);
        }
    }
}

#[test]
fn mse_matches_two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_vec(&mut rng, 100, 3.0);
    let b = random_vec(&mut rng, 100, 3.0);
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
    let oracle = diffs.iter().map(|d| d * d).sum::<f64>() / 100.0;
    let got = mse(&a, &b).unwrap();
    assert!((got - oracle).abs() <= 1e-12 * oracle);
}

fn sine_samples(n: usize, len: usize, seed: u64, input_scale: f64) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: f64 = rng.gen_range(0.5..2.0);
            let ph: f64 = rng.gen_range(0.0..6.0);
            let x: Vec<f64> = (0..len).map(|i| a * (0.4 * i as f64 + ph).sin()).collect();
            let y: Vec<f64> = x.iter().map(|v| v + 0.2 * v * v).collect();
            TrainingSample {
                inputs: vec![x.iter().map(|v| v * input_scale).collect()],
                target: vec![y],
            }
        })
        .collect()
}

#[test]
fn input_scaling_does_not_change_predictions() {
    let cfg = NetworkConfig {
        num_layers: 1,
        hidden_size: 5,
        tau: 2,
        input_channels: 1,
        output_channels: 1,
        max_epochs: 10,
        batch_size: 8,
        rng_seed: 3,
        ..NetworkConfig::default()
    };
    let k = 1000.0;
    let (a, _) = train(&sine_samples(24, 20, 1, 1.0), &sine_samples(6, 20, 2, 1.0), &cfg).unwrap();
    let (b, _) = train(&sine_samples(24, 20, 1, k), &sine_samples(6, 20, 2, k), &cfg).unwrap();
    for s in sine_samples(5, 20, 3, 1.0) {
        let ya = a.forward(&[&s.inputs[0]]).unwrap();
        let scaled: Vec<f64> = s.inputs[0].iter().map(|v| v * k).collect();
        let yb = b.forward(&[&scaled]).unwrap();
        for (p, q) in ya[0].iter().zip(&yb[0]) {
            assert!((p - q).abs() <= 1e-6 * p.abs().max(1e-3), "{p} vs {q}");
        }
    }
}

#[test]
fn paper_scale_config_runs() {
    let cfg = NetworkConfig {
        max_epochs: 1,
        ..NetworkConfig::default()
    };
    assert_eq!((cfg.tau, cfg.hidden_size, cfg.num_layers, cfg.learning_rate), (9, 30, 2, 0.01));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples: Vec<TrainingSample> = (0..4)
        .map(|_| TrainingSample {
            inputs: (0..3).map(|_| random_vec(&mut rng, 501, 1.0)).collect(),
            target: vec![random_vec(&mut rng, 501, 1.0)],
        })
        .collect();
    let (net, hist) = train(&samples, &samples, &cfg).unwrap();
    assert_eq!(hist.epochs.len(), 1);
    let refs: Vec<&[f64]> = samples[0].inputs.iter().map(|v| v.as_slice()).collect();
    assert_eq!(net.forward(&refs).unwrap()[0].len(), 495);
}
