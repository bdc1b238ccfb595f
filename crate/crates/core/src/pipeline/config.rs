use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{io_err, PipelineError};
use crate::hydro::Simulator;
use crate::lstm::NetworkConfig;
use crate::seaway::{SeaStateConfig, WaveSettings};

/// Realization counts per split. Indices are assigned in this order, so the
/// splits of one sea state never share a realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSplits {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl EnsembleSplits {
    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }

    pub fn range(&self, split: Split) -> std::ops::Range<usize> {
        match split {
            Split::Train => 0..self.train,
            Split::Validation => self.train..self.train + self.validation,
            Split::Test => self.train + self.validation..self.total(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledSeaState {
    pub label: String,
    pub sea_state: SeaStateConfig,
    pub splits: EnsembleSplits,
}

/// Snippets per realization: a fixed count or `"auto"` for the count chosen
/// by the gap analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KSetting {
    Auto,
    Fixed(usize),
}

impl Serialize for KSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            KSetting::Auto => s.serialize_str("auto"),
            KSetting::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(k) => Ok(KSetting::Fixed(k)),
            Raw::Word(w) if w == "auto" => Ok(KSetting::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("k must be a count or \"auto\", got {w:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnippetSettings {
    pub window_seconds: f64,
    pub k: KSetting,
    /// Coverage required when `k` is `"auto"`.
    pub coverage_threshold: f64,
}

/// Everything a run depends on. Unknown keys are rejected.
///
/// `network.rng_seed` is ignored: both training modes start from the seed
/// derived for `"network"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sea_states: Vec<LabeledSeaState>,
    /// Sea state whose train/validation splits feed the networks.
    pub training_label: String,
    pub simulator: Simulator,
    /// Record length (`n_samples`, including the ramp), rate and spectral grid.
    pub waves: WaveSettings,
    pub snippets: SnippetSettings,
    pub network: NetworkConfig,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// Desk-scale experiment: 300/100/600 Sea State 5 realizations and 600
    /// Sea State 6 test realizations of 10 minutes after the ramp.
    fn default() -> Self {
        Self {
            sea_states: vec![
                LabeledSeaState {
                    label: "ss5".into(),
                    sea_state: SeaStateConfig::sea_state_5(),
                    splits: EnsembleSplits {
                        train: 300,
                        validation: 100,
                        test: 600,
                    },
                },
                LabeledSeaState {
                    label: "ss6".into(),
                    sea_state: SeaStateConfig::sea_state_6(),
                    splits: EnsembleSplits {
                        train: 0,
                        validation: 0,
                        test: 600,
                    },
                },
            ],
            training_label: "ss5".into(),
            simulator: Simulator::default(),
            waves: WaveSettings {
                n_samples: 7000,
                ..WaveSettings::default()
            },
            snippets: SnippetSettings {
                window_seconds: 50.0,
                k: KSetting::Auto,
                coverage_threshold: 0.95,
            },
            network: NetworkConfig {
                max_epochs: 100,
                ..NetworkConfig::default()
            },
            rng_seed: 2024,
            output_dir: PathBuf::from("runs/desk"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.sea_states.is_empty() {
            return bad("at least one sea state is required".into());
        }
        let mut labels = BTreeSet::new();
        for s in &self.sea_states {
            if s.label.is_empty() || !s.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                return bad(format!("label {:?} must be non-empty ASCII alphanumerics or '-'", s.label));
            }
            if !labels.insert(s.label.as_str()) {
                return bad(format!("duplicate label {:?}", s.label));
            }
            s.sea_state.validate()?;
        }
        let training = self.training()?;
        if training.splits.train == 0 || training.splits.validation == 0 {
            return bad(format!("{} needs train and validation realizations", training.label));
        }
        self.simulator.hull.validate()?;
        let w = &self.waves;
        if w.n_components == 0 || !(w.dt > 0.0) || !(0.0 < w.range_factors.0 && w.range_factors.0 < w.range_factors.1) {
            return bad("waves: need components, positive dt and 0 < low < high range factors".into());
        }
        if w.n_samples <= self.simulator.ramp_samples + self.window_length() {
            return bad(format!(
                "records of {} samples leave no room for a {}-sample window after the {}-sample ramp",
                w.n_samples,
                self.window_length(),
                self.simulator.ramp_samples
            ));
        }
        let sn = &self.snippets;
        if !(sn.window_seconds > 0.0) {
            return bad("snippets.window_seconds must be positive".into());
        }
        if !(sn.coverage_threshold > 0.0 && sn.coverage_threshold <= 1.0) {
            return bad("snippets.coverage_threshold must lie in (0, 1]".into());
        }
        if sn.k == KSetting::Fixed(0) {
            return bad("snippets.k must be at least 1".into());
        }
        self.network.validate()?;
        if self.network.input_channels != crate::snippets::INPUT_CHANNELS.len() || self.network.output_channels != 1 {
            return bad("network must take 3 input channels and produce 1 output channel".into());
        }
        if self.network.tau > self.window_length() {
            return bad("network.tau exceeds the snippet window".into());
        }
        Ok(())
    }

    pub fn training(&self) -> Result<&LabeledSeaState, PipelineError> {
        self.sea_state(&self.training_label)
    }

    pub fn sea_state(&self, label: &str) -> Result<&LabeledSeaState, PipelineError> {
        self.sea_states
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| PipelineError::Config(format!("unknown sea state label {label:?}")))
    }

    pub fn window_length(&self) -> usize {
        crate::snippets::window_length(self.snippets.window_seconds, self.waves.dt)
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn wave_seed(&self, label: &str, index: usize) -> u64 {
        derive_seed(self.rng_seed, &format!("wave/{label}/{index}"))
    }

    pub fn network_seed(&self) -> u64 {
        derive_seed(self.rng_seed, "network")
    }
}

/// First eight bytes (little-endian) of SHA-256(master seed LE ‖ label).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert!(text.contains("\"k\": \"auto\""));
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = serde_json::to_value(ExperimentConfig::default()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ExperimentConfig>(v.clone()).is_err());
        v.as_object_mut().unwrap().remove("extra");
        v["snippets"]["k"] = serde_json::json!("eight");
        assert!(serde_json::from_value::<ExperimentConfig>(v.clone()).is_err());
        v["snippets"]["k"] = serde_json::json!(8);
        let c: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert_eq!(c.snippets.k, KSetting::Fixed(8));
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut c = ExperimentConfig::default();
        c.sea_states[1].label = "ss5".into();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.training_label = "ss9".into();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.waves.n_samples = 1200;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.rng_seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn splits_are_disjoint_ranges() {
        let s = EnsembleSplits {
            train: 3,
            validation: 2,
            test: 4,
        };
        assert_eq!(s.range(Split::Train), 0..3);
        assert_eq!(s.range(Split::Validation), 3..5);
        assert_eq!(s.range(Split::Test), 5..9);
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        let a = derive_seed(7, "wave/ss5/0");
        assert_eq!(a, derive_seed(7, "wave/ss5/0"));
        assert_ne!(a, derive_seed(7, "wave/ss5/1"));
        assert_ne!(a, derive_seed(8, "wave/ss5/0"));
    }
}
