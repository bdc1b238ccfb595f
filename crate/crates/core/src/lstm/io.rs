//! Versioned JSON model file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cell::{Gate, LstmCellParams};
use super::network::{LinearHead, LstmNetwork, NetworkConfig, Normalization, Parameters};
use super::LstmError;

pub const MODEL_FORMAT: &str = "mfextreme-lstm";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Row-major tensor with its declared shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    fn new(shape: Vec<usize>, data: &[f64]) -> Self {
        Self {
            shape,
            data: data.to_vec(),
        }
    }

    fn expect(self, shape: &[usize], name: &str) -> Result<Vec<f64>, LstmError> {
        if self.shape != shape || self.data.len() != shape.iter().product::<usize>() {
            return Err(LstmError::Format(format!(
                "{name}: declared shape {:?} with {} values, expected {shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(self.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerTensors {
    w: Tensor,
    u: Tensor,
    b: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadTensors {
    w: Tensor,
    b: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    /// Order of the stacked gate blocks inside every `w`, `u` and `b`.
    gate_order: Vec<Gate>,
    config: NetworkConfig,
    normalization: Normalization,
    layers: Vec<LayerTensors>,
    head: HeadTensors,
}

impl LstmNetwork {
    pub fn to_json(&self) -> String {
        let p = &self.params;
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            gate_order: Gate::ALL.to_vec(),
            config: self.config.clone(),
            normalization: self.normalization.clone(),
            layers: p
                .layers
                .iter()
                .map(|l| LayerTensors {
                    w: Tensor::new(vec![4 * l.hidden, l.input], &l.w),
                    u: Tensor::new(vec![4 * l.hidden, l.hidden], &l.u),
                    b: Tensor::new(vec![4 * l.hidden], &l.b),
                })
                .collect(),
            head: HeadTensors {
                w: Tensor::new(vec![p.head.outputs, p.head.inputs], &p.head.w),
                b: Tensor::new(vec![p.head.outputs], &p.head.b),
            },
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LstmError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(LstmError::Format(format!("unknown format {:?}", file.format)));
        }
        if file.version != MODEL_FORMAT_VERSION {
            return Err(LstmError::Format(format!(
                "version {} not supported (expected {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        if file.gate_order != Gate::ALL {
            return Err(LstmError::Format("unsupported gate order".into()));
        }
        let cfg = file.config;
        cfg.validate()?;
        if file.layers.len() != cfg.num_layers {
            return Err(LstmError::Format(format!(
                "{} layers stored, config says {}",
                file.layers.len(),
                cfg.num_layers
            )));
        }
        if file.normalization.inputs.len() != cfg.input_channels
            || file.normalization.targets.len() != cfg.output_channels
        {
            return Err(LstmError::Format("normalization channel count mismatch".into()));
        }
        let h = cfg.hidden_size;
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for (i, l) in file.layers.into_iter().enumerate() {
            let d = if i == 0 { cfg.tau * cfg.input_channels } else { h };
            let params = LstmCellParams {
                hidden: h,
                input: d,
                w: l.w.expect(&[4 * h, d], &format!("layer{i}.w"))?,
                u: l.u.expect(&[4 * h, h], &format!("layer{i}.u"))?,
                b: l.b.expect(&[4 * h], &format!("layer{i}.b"))?,
            };
            params.validate()?;
            layers.push(params);
        }
        let outputs = cfg.tau * cfg.output_channels;
        let head = LinearHead {
            outputs,
            inputs: h,
            w: file.head.w.expect(&[outputs, h], "head.w")?,
            b: file.head.b.expect(&[outputs], "head.b")?,
        };
        Ok(Self {
            config: cfg,
            params: Parameters { layers, head },
            normalization: file.normalization,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LstmError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LstmError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::ChannelScale;

    fn net() -> LstmNetwork {
        let mut n = LstmNetwork::new(NetworkConfig {
            hidden_size: 5,
            tau: 3,
            rng_seed: 9,
            ..NetworkConfig::default()
        })
        .unwrap();
        n.normalization.inputs[1] = ChannelScale { mean: 0.1 + 0.2, scale: 1.0 / 3.0 };
        n
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let a = net();
        let b = LstmNetwork::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b);
        let ch: Vec<Vec<f64>> = (0..3).map(|c| (0..30).map(|i| (i as f64 * 0.37 + c as f64).sin()).collect()).collect();
        let refs: Vec<&[f64]> = ch.iter().map(|v| v.as_slice()).collect();
        let (ya, yb) = (a.forward(&refs).unwrap(), b.forward(&refs).unwrap());
        for (p, q) in ya[0].iter().zip(&yb[0]) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let a = net();
        a.save(&path).unwrap();
        assert_eq!(LstmNetwork::load(&path).unwrap(), a);
    }

    #[test]
    fn rejects_wrong_version_and_shapes() {
        let text = net().to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut bumped = v.clone();
        bumped["version"] = serde_json::json!(2);
        assert!(matches!(LstmNetwork::from_json(&bumped.to_string()), Err(LstmError::Format(_))));
        let mut bad = v.clone();
        bad["layers"][0]["u"]["shape"] = serde_json::json!([20, 4]);
        assert!(matches!(LstmNetwork::from_json(&bad.to_string()), Err(LstmError::Format(_))));
        let mut extra = v;
        extra["comment"] = serde_json::json!("x");
        assert!(LstmNetwork::from_json(&extra.to_string()).is_err());
    }
}
