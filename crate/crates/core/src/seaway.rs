//! Irregular long-crested seaway synthesis.
//!
//! Elevation is a sum of cosines with random uniform phases whose amplitudes
//! follow a two-parameter Bretschneider spectrum. For a ship advancing into
//! head seas the components are re-expressed at encounter frequency so the
//! resulting record is the elevation seen at the ship's center of gravity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::TimeSeries;
use crate::GRAVITY;

/// Samples at the start of every record over which the simulators ramp the
/// wave amplitude in. They are excluded from all statistics.
pub const RAMP_SAMPLES: usize = 1000;

/// 10 knots in m/s.
pub const TEN_KNOTS: f64 = 5.144;

#[derive(Debug, Error, PartialEq)]
pub enum SeawayError {
    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("invalid sea state: {0}")]
    InvalidConfig(String),
    #[error("frequency range [{low}, {high}] is empty or non-positive")]
    EmptyRange { low: f64, high: f64 },
    #[error("at least one spectral component is required")]
    NoComponents,
    #[error("at least one sample is required")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaStateConfig {
    /// Hs, meters.
    pub significant_wave_height: f64,
    /// Tm, seconds.
    pub modal_period: f64,
    /// Wave heading relative to the ship, radians. π is head seas.
    #[serde(default = "head_seas")]
    pub heading: f64,
    /// Forward speed, m/s.
    #[serde(default)]
    pub ship_speed: f64,
}

fn head_seas() -> f64 {
    PI
}

impl SeaStateConfig {
    /// Sea State 5 at 10 knots in head seas.
    pub fn sea_state_5() -> Self {
        Self {
            significant_wave_height: 4.0,
            modal_period: 15.0,
            heading: PI,
            ship_speed: TEN_KNOTS,
        }
    }

    /// Sea State 6 at 10 knots in head seas.
    pub fn sea_state_6() -> Self {
        Self {
            significant_wave_height: 6.0,
            modal_period: 12.0,
            heading: PI,
            ship_speed: TEN_KNOTS,
        }
    }

    pub fn validate(&self) -> Result<(), SeawayError> {
        if !(self.significant_wave_height > 0.0) {
            return Err(SeawayError::InvalidConfig(format!(
                "significant wave height must be positive, got {}",
                self.significant_wave_height
            )));
        }
        if !(self.modal_period > 0.0) {
            return Err(SeawayError::InvalidConfig(format!(
                "modal period must be positive, got {}",
                self.modal_period
            )));
        }
        if !(self.ship_speed >= 0.0) {
            return Err(SeawayError::InvalidConfig(format!(
                "ship speed must be non-negative, got {}",
                self.ship_speed
            )));
        }
        if !self.heading.is_finite() {
            return Err(SeawayError::InvalidConfig("heading must be finite".into()));
        }
        Ok(())
    }

    /// Spectral peak frequency ω_m = 2π/Tm.
    pub fn modal_frequency(&self) -> f64 {
        2.0 * PI / self.modal_period
    }

    /// Zeroth spectral moment; the closed-form integral of the spectrum.
    pub fn variance(&self) -> f64 {
        self.significant_wave_height.powi(2) / 16.0
    }

    /// Encounter frequency of the spectral peak.
    pub fn modal_encounter_frequency(&self) -> f64 {
        encounter_frequency(self.modal_frequency(), self)
    }

    pub fn modal_encounter_period(&self) -> f64 {
        2.0 * PI / self.modal_encounter_frequency()
    }

    /// Frequency grid used when no explicit range is given: [0.3·ω_m, 4·ω_m].
    pub fn default_range(&self) -> (f64, f64) {
        let wm = self.modal_frequency();
        (0.3 * wm, 4.0 * wm)
    }
}

/// Bretschneider spectral density S(ω) in m²·s.
///
/// S(ω) = (1.25/4)·(ω_m⁴/ω⁵)·Hs²·exp(−1.25·(ω_m/ω)⁴)
pub fn bretschneider_density(cfg: &SeaStateConfig, omega: f64) -> Result<f64, SeawayError> {
    if !(omega > 0.0) {
        return Err(SeawayError::NonPositiveFrequency(omega));
    }
    let wm = cfg.modal_frequency();
    let ratio4 = (wm / omega).powi(4);
    Ok(1.25 / 4.0 * ratio4 / omega * cfg.significant_wave_height.powi(2) * (-1.25 * ratio4).exp())
}

/// Frequency-domain description of one realization: a finite set of
/// cosine components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDiscretization {
    /// rad/s, strictly increasing.
    pub frequencies: Vec<f64>,
    /// m.
    pub amplitudes: Vec<f64>,
    /// rad, in [0, 2π).
    pub phases: Vec<f64>,
}

impl SpectrumDiscretization {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Σ aᵢ²/2, the variance carried by the component set.
    pub fn variance(&self) -> f64 {
        self.amplitudes.iter().map(|a| 0.5 * a * a).sum()
    }

    /// Same amplitudes and phases with every frequency mapped to its
    /// encounter frequency.
    pub fn to_encounter(&self, cfg: &SeaStateConfig) -> Self {
        Self {
            frequencies: self
                .frequencies
                .iter()
                .map(|&w| encounter_frequency(w, cfg))
                .collect(),
            amplitudes: self.amplitudes.clone(),
            phases: self.phases.clone(),
        }
    }
}

/// Uniform-Δω discretization over `omega_range` with seeded uniform phases.
///
/// Component `i` sits at the cell midpoint `low + (i + ½)·Δω` and carries
/// amplitude `sqrt(2·S(ωᵢ)·Δω)`.
pub fn discretize(
    cfg: &SeaStateConfig,
    n_components: usize,
    omega_range: (f64, f64),
    rng_seed: u64,
) -> Result<SpectrumDiscretization, SeawayError> {
    cfg.validate()?;
    if n_components == 0 {
        return Err(SeawayError::NoComponents);
    }
    let (low, high) = omega_range;
    if !(low > 0.0 && high > low) {
        return Err(SeawayError::EmptyRange { low, high });
    }
    let dw = (high - low) / n_components as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut frequencies = Vec::with_capacity(n_components);
    let mut amplitudes = Vec::with_capacity(n_components);
    let mut phases = Vec::with_capacity(n_components);
    for i in 0..n_components {
        let w = low + (i as f64 + 0.5) * dw;
        let s = bretschneider_density(cfg, w)?;
        frequencies.push(w);
        amplitudes.push((2.0 * s * dw).sqrt());
        phases.push(rng.gen_range(0.0..2.0 * PI));
    }
    Ok(SpectrumDiscretization {
        frequencies,
        amplitudes,
        phases,
    })
}

// Samples between exact re-anchoring of the rotation recurrence.
const REANCHOR: usize = 128;

/// η(t_j) = Σᵢ aᵢ·cos(ωᵢ·t_j + φᵢ), t_j = j·dt.
pub fn realize_elevation(
    disc: &SpectrumDiscretization,
    n_samples: usize,
    dt: f64,
) -> Result<TimeSeries, SeawayError> {
    if n_samples == 0 {
        return Err(SeawayError::NoSamples);
    }
    let mut eta = vec![0.0; n_samples];
    for ((&w, &a), &phi) in disc
        .frequencies
        .iter()
        .zip(&disc.amplitudes)
        .zip(&disc.phases)
    {
        // Rotate the phasor a·e^{i(ωt+φ)} by e^{iωdt} per sample.
        let (sd, cd) = (w * dt).sin_cos();
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, out) in eta.iter_mut().enumerate() {
            if j % REANCHOR == 0 {
                let (s, c) = (w * j as f64 * dt + phi).sin_cos();
                re = a * c;
                im = a * s;
            } else {
                let nre = re * cd - im * sd;
                im = re * sd + im * cd;
                re = nre;
            }
            *out += re;
        }
    }
    TimeSeries::new(eta, dt, 0.0).map_err(|_| SeawayError::NoSamples)
}

/// Doppler-shifted frequency seen by a ship at speed U and heading μ in
/// deep water: ω_e = ω − (ω²/g)·U·cos μ. In head seas (μ = π) this is
/// ω + ω²U/g.
pub fn encounter_frequency(omega: f64, cfg: &SeaStateConfig) -> f64 {
    omega - omega * omega / GRAVITY * cfg.ship_speed * cfg.heading.cos()
}

/// A frequency-domain component set together with the elevation record it
/// produces at the ship.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveRealization {
    pub components: SpectrumDiscretization,
    pub elevation: TimeSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSettings {
    pub n_components: usize,
    /// Grid bounds as multiples of ω_m.
    pub range_factors: (f64, f64),
    pub n_samples: usize,
    pub dt: f64,
}

impl Default for WaveSettings {
    fn default() -> Self {
        Self {
            n_components: 400,
            range_factors: (0.3, 4.0),
            n_samples: 19_000,
            dt: 0.1,
        }
    }
}

/// Encountered elevation record for one seeded realization.
pub fn generate_realization(
    cfg: &SeaStateConfig,
    settings: &WaveSettings,
    seed: u64,
) -> Result<WaveRealization, SeawayError> {
    let wm = cfg.modal_frequency();
    let range = (settings.range_factors.0 * wm, settings.range_factors.1 * wm);
    let components = discretize(cfg, settings.n_components, range, seed)?.to_encounter(cfg);
    let elevation = realize_elevation(&components, settings.n_samples, settings.dt)?;
    Ok(WaveRealization {
        components,
        elevation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid_m0(cfg: &SeaStateConfig, hi: f64, n: usize) -> f64 {
        let h = hi / n as f64;
        (1..=n)
            .map(|i| {
                let w = i as f64 * h;
                let s = bretschneider_density(cfg, w).unwrap();
                if i == n {
                    0.5 * s * h
                } else {
                    s * h
                }
            })
            .sum()
    }

    #[test]
    fn density_integrates_to_hs() {
        for cfg in [SeaStateConfig::sea_state_5(), SeaStateConfig::sea_state_6()] {
            let m0 = trapezoid_m0(&cfg, 4.0, 100_000);
            let hs = 4.0 * m0.sqrt();
            assert!(
                (hs - cfg.significant_wave_height).abs() / cfg.significant_wave_height < 0.01,
                "hs {hs}"
            );
        }
    }

    #[test]
    fn density_vanishes_at_low_frequency() {
        let cfg = SeaStateConfig::sea_state_5();
        let s = bretschneider_density(&cfg, 0.01 * cfg.modal_frequency()).unwrap();
        assert!(s < 1e-12);
        assert!(bretschneider_density(&cfg, 1e3).unwrap() < 1e-12);
    }

    #[test]
    fn density_rejects_non_positive_frequency() {
        let cfg = SeaStateConfig::sea_state_5();
        assert_eq!(
            bretschneider_density(&cfg, 0.0),
            Err(SeawayError::NonPositiveFrequency(0.0))
        );
        assert!(bretschneider_density(&cfg, -1.0).is_err());
    }

    #[test]
    fn density_peaks_at_modal_frequency() {
        let cfg = SeaStateConfig::sea_state_6();
        let grid: Vec<f64> = (1..=40_000).map(|i| i as f64 * 1e-4).collect();
        let (argmax, _) = grid
            .iter()
            .map(|&w| (w, bretschneider_density(&cfg, w).unwrap()))
            .fold((0.0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!((argmax - 2.0 * PI / 12.0).abs() <= 1e-4);
    }

    #[test]
    fn single_component_amplitude() {
        let cfg = SeaStateConfig::sea_state_5();
        let wm = cfg.modal_frequency();
        let disc = discretize(&cfg, 1, (wm - 0.05, wm + 0.05), 7).unwrap();
        assert!((disc.frequencies[0] - wm).abs() < 1e-12);
        let expected = (2.0 * bretschneider_density(&cfg, wm).unwrap() * 0.1).sqrt();
        assert!((disc.amplitudes[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn seeded_phases_are_reproducible() {
        let cfg = SeaStateConfig::sea_state_5();
        let a = discretize(&cfg, 50, cfg.default_range(), 11).unwrap();
        let b = discretize(&cfg, 50, cfg.default_range(), 11).unwrap();
        let c = discretize(&cfg, 50, cfg.default_range(), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.phases, c.phases);
        assert!(a.phases.iter().all(|p| (0.0..2.0 * PI).contains(p)));
    }

    #[test]
    fn discretize_errors() {
        let cfg = SeaStateConfig::sea_state_5();
        assert_eq!(
            discretize(&cfg, 10, (1.0, 1.0), 0),
            Err(SeawayError::EmptyRange { low: 1.0, high: 1.0 })
        );
        assert!(discretize(&cfg, 10, (0.0, 1.0), 0).is_err());
        assert_eq!(discretize(&cfg, 0, (0.1, 1.0), 0), Err(SeawayError::NoComponents));
        let bad = SeaStateConfig {
            significant_wave_height: -1.0,
            ..cfg
        };
        assert!(matches!(
            discretize(&bad, 10, (0.1, 1.0), 0),
            Err(SeawayError::InvalidConfig(_))
        ));
    }

    #[test]
    fn single_cosine() {
        let disc = SpectrumDiscretization {
            frequencies: vec![1.0],
            amplitudes: vec![1.0],
            phases: vec![0.0],
        };
        let eta = realize_elevation(&disc, 1000, 0.1).unwrap();
        assert_eq!(eta.values()[0], 1.0);
        for (j, v) in eta.values().iter().enumerate() {
            assert!((v - (j as f64 * 0.1).cos()).abs() < 1e-12, "sample {j}");
        }
        assert_eq!(realize_elevation(&disc, 0, 0.1), Err(SeawayError::NoSamples));
    }

    #[test]
    fn encounter_shift() {
        let mut cfg = SeaStateConfig::sea_state_5();
        let w = 0.419;
        assert!((encounter_frequency(w, &cfg) - (w + w * w * 5.144 / 9.80665)).abs() < 1e-12);
        let added = encounter_frequency(w, &cfg) - w;
        cfg.ship_speed *= 2.0;
        assert!((encounter_frequency(w, &cfg) - w - 2.0 * added).abs() < 1e-12);
        cfg.ship_speed = 0.0;
        assert_eq!(encounter_frequency(w, &cfg), w);
    }

    #[test]
    fn record_design_length() {
        let cfg = SeaStateConfig::sea_state_5();
        let r = generate_realization(&cfg, &WaveSettings::default(), 3).unwrap();
        assert_eq!(r.elevation.len(), 19_000);
        assert!((r.elevation.dt() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn realized_variance_matches_spectrum() {
        let cfg = SeaStateConfig::sea_state_5();
        let settings = WaveSettings {
            n_samples: 108_000,
            ..WaveSettings::default()
        };
        // Sample-variance oracle on a 3-hour record.
        let wm = cfg.modal_frequency();
        let disc = discretize(&cfg, 400, (0.3 * wm, 4.0 * wm), 99).unwrap();
        let eta = realize_elevation(&disc, settings.n_samples, settings.dt).unwrap();
        let var = eta.values().iter().map(|v| v * v).sum::<f64>() / eta.len() as f64;
        assert!((var - cfg.variance()).abs() / cfg.variance() < 0.03, "var {var}");
        let half = eta.len() / 2;
        let v1 = eta.values()[..half].iter().map(|v| v * v).sum::<f64>() / half as f64;
        let v2 = eta.values()[half..].iter().map(|v| v * v).sum::<f64>() / half as f64;
        assert!((v1 - v2).abs() / v1.max(v2) < 0.10);
    }
}
