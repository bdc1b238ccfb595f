//! High- and low-fidelity pitch/heave simulators.
//!
//! Both fidelities integrate a pair of forced oscillators (pitch in radians,
//! heave in meters) with fixed-step RK4 at the record's sample interval.
//! Pitch is forced by the quasi-static wave slope under the ship and heave by
//! the encountered elevation. The high-fidelity model adds optional cubic
//! restoring and a bow-emergence term: once heave plus bow-up pitch lift the
//! bow past a threshold, the flare leaves the water, bow buoyancy drops and a
//! tanh-saturated bow-up moment acts. The low-fidelity model drops both and
//! sees its forcing through a small constant delay. It under-predicts the
//! large bow-up peaks and shifts them slightly in time, while matching the
//! high-fidelity response at small amplitude apart from that delay.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalstats::{self, StatsError};
use crate::seaway::SeaStateConfig;
use crate::timeseries::TimeSeries;
use crate::GRAVITY;

#[derive(Debug, Error, PartialEq)]
pub enum HydroError {
    #[error("simulation diverged at sample {index}")]
    Divergence { index: usize },
    #[error("invalid hull configuration: {0}")]
    InvalidHull(String),
    #[error("invalid wave input: {0}")]
    InvalidWave(String),
    #[error("ensembles are not paired: {0}")]
    Unpaired(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DofCoeffs {
    pub pitch: f64,
    pub heave: f64,
}

/// Hull particulars and surrogate dynamics coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HullConfig {
    /// Length between perpendiculars, m.
    pub length: f64,
    pub beam: f64,
    pub draft: f64,
    /// t.
    pub displacement: f64,
    /// s.
    pub natural_period_pitch: f64,
    /// s.
    pub natural_period_heave: f64,
    pub linear_damping_ratio: DofCoeffs,
    /// Coefficient on `v·|v|` (1/rad for pitch, 1/m for heave).
    pub quadratic_damping_coeff: DofCoeffs,
    /// Coefficient on `x³` relative to the linear restoring (1/rad², 1/m²).
    pub cubic_restoring_coeff: DofCoeffs,
    /// Saturation scale of the bow-flare moment, m of bow rise.
    pub fk_saturation_coeff: f64,
    /// Relative bow rise (heave plus half-length times sin pitch, less the
    /// weighted bow wave) at which flare starts to act, m.
    pub flare_threshold: f64,
    /// Equivalent static pitch per meter of bow rise past the threshold, rad/m.
    pub flare_moment_coeff: f64,
    /// Fraction of the local wave elevation at the bow subtracted from the bow
    /// rise before the threshold test. The bow sees the wave half a ship length
    /// ahead of amidships, at the modal wave celerity.
    pub bow_wave_weight: f64,
    /// Apply the flare moment only while the bow is rising.
    pub flare_rising_only: bool,
    /// Fraction of the quasi-static wave slope reaching pitch.
    pub pitch_excitation_gain: f64,
    /// Fraction of the encountered elevation reaching heave.
    pub heave_excitation_gain: f64,
}

impl Default for HullConfig {
    /// Flared tumblehome combatant (L 154 m, B 18.8 m, T 5.5 m, 8730 t) with
    /// dynamics coefficients calibrated for the fidelity gap at Sea State 5.
    fn default() -> Self {
        Self {
            length: 154.0,
            beam: 18.8,
            draft: 5.5,
            displacement: 8730.0,
            natural_period_pitch: 8.0,
            natural_period_heave: 7.0,
            linear_damping_ratio: DofCoeffs {
                pitch: 0.15,
                heave: 0.2,
            },
            quadratic_damping_coeff: DofCoeffs {
                pitch: 2.0,
                heave: 0.2,
            },
            cubic_restoring_coeff: DofCoeffs {
                pitch: 0.0,
                heave: 0.0,
            },
            fk_saturation_coeff: 1.5,
            flare_threshold: 7.6,
            flare_moment_coeff: 0.1,
            bow_wave_weight: 0.2,
            flare_rising_only: false,
            pitch_excitation_gain: 0.7,
            heave_excitation_gain: 0.9,
        }
    }
}

impl HullConfig {
    pub fn validate(&self) -> Result<(), HydroError> {
        let positive = [
            ("length", self.length),
            ("beam", self.beam),
            ("draft", self.draft),
            ("displacement", self.displacement),
            ("natural_period_pitch", self.natural_period_pitch),
            ("natural_period_heave", self.natural_period_heave),
            ("fk_saturation_coeff", self.fk_saturation_coeff),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HydroError::InvalidHull(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, z) in [
            ("pitch damping ratio", self.linear_damping_ratio.pitch),
            ("heave damping ratio", self.linear_damping_ratio.heave),
        ] {
            if !(z > 0.0 && z < 1.0) {
                return Err(HydroError::InvalidHull(format!("{name} must lie in (0, 1), got {z}")));
            }
        }
        let nonneg = [
            ("pitch quadratic damping", self.quadratic_damping_coeff.pitch),
            ("heave quadratic damping", self.quadratic_damping_coeff.heave),
            ("flare_threshold", self.flare_threshold),
            ("flare_moment_coeff", self.flare_moment_coeff),
            ("bow_wave_weight", self.bow_wave_weight),
            ("pitch_excitation_gain", self.pitch_excitation_gain),
            ("heave_excitation_gain", self.heave_excitation_gain),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(HydroError::InvalidHull(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn pitch_natural_frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.natural_period_pitch
    }

    pub fn heave_natural_frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.natural_period_heave
    }
}

/// What separates the low-fidelity model from the high-fidelity one, beyond
/// dropping the nonlinear restoring and flare terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowFidelityOffsets {
    /// Constant delay applied to the forcing, s.
    pub group_delay: f64,
    /// Multiplier on the quadratic damping coefficients, in [0, 1].
    pub quadratic_damping_scale: f64,
}

impl Default for LowFidelityOffsets {
    fn default() -> Self {
        Self {
            group_delay: 1.0,
            quadratic_damping_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Low,
    High,
}

impl Fidelity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fidelity::Low => "low",
            Fidelity::High => "high",
        }
    }
}

/// Aligned motion channels from one simulation. Pitch and roll are in
/// degrees (bow-up positive), heave and wave in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionRecord {
    pub pitch: TimeSeries,
    pub heave: TimeSeries,
    pub roll: TimeSeries,
    pub wave: TimeSeries,
    pub fidelity: Fidelity,
}

impl MotionRecord {
    pub fn len(&self) -> usize {
        self.pitch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitch.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.pitch.dt()
    }
}

/// Fidelity pair sharing one hull and ramp length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulator {
    pub hull: HullConfig,
    pub low_fidelity: LowFidelityOffsets,
    pub ramp_samples: usize,
}

impl Default for Simulator {
    fn default() -> Self {
        Self {
            hull: HullConfig::default(),
            low_fidelity: LowFidelityOffsets::default(),
            ramp_samples: crate::seaway::RAMP_SAMPLES,
        }
    }
}

/// High-fidelity simulation with the default ramp and low-fidelity offsets.
pub fn simulate_high_fidelity(
    wave: &TimeSeries,
    hull: &HullConfig,
    cfg: &SeaStateConfig,
) -> Result<MotionRecord, HydroError> {
    Simulator {
        hull: *hull,
        ..Simulator::default()
    }
    .simulate(Fidelity::High, wave, cfg)
}

/// Low-fidelity simulation with the default ramp and low-fidelity offsets.
pub fn simulate_low_fidelity(
    wave: &TimeSeries,
    hull: &HullConfig,
    cfg: &SeaStateConfig,
) -> Result<MotionRecord, HydroError> {
    Simulator {
        hull: *hull,
        ..Simulator::default()
    }
    .simulate(Fidelity::Low, wave, cfg)
}

struct Coefficients {
    wp: f64,
    wz: f64,
    zeta_p: f64,
    zeta_z: f64,
    quad_p: f64,
    quad_z: f64,
    cubic_p: f64,
    cubic_z: f64,
    flare: Option<Flare>,
}

struct Flare {
    half_length: f64,
    threshold: f64,
    scale: f64,
    coeff: f64,
    bow_wave_weight: f64,
    rising_only: bool,
}

// Forcing sampled once per record sample; RK4 half steps interpolate.
struct Forcing {
    slope: Vec<f64>,
    elevation: Vec<f64>,
    /// Unscaled encountered elevation, sampled `bow_lead` seconds ahead.
    bow: Vec<f64>,
    bow_lead: f64,
    dt: f64,
    delay: f64,
}

impl Forcing {
    fn at(series: &[f64], pos: f64) -> f64 {
        let last = series.len() - 1;
        if pos <= 0.0 {
            return series[0];
        }
        let i = pos.floor() as usize;
        if i >= last {
            return series[last];
        }
        let frac = pos - i as f64;
        series[i] + frac * (series[i + 1] - series[i])
    }

    fn sample(&self, t: f64) -> (f64, f64) {
        let pos = (t - self.delay) / self.dt;
        (Self::at(&self.slope, pos), Self::at(&self.elevation, pos))
    }

    fn bow_elevation(&self, t: f64) -> f64 {
        Self::at(&self.bow, (t - self.delay + self.bow_lead) / self.dt)
    }
}

impl Simulator {
    pub fn simulate(
        &self,
        fidelity: Fidelity,
        wave: &TimeSeries,
        cfg: &SeaStateConfig,
    ) -> Result<MotionRecord, HydroError> {
        self.hull.validate()?;
        cfg.validate()
            .map_err(|e| HydroError::InvalidWave(e.to_string()))?;
        if wave.len() < 2 {
            return Err(HydroError::InvalidWave("record needs at least two samples".into()));
        }
        let h = &self.hull;
        let dt = wave.dt();
        let n = wave.len();

        let ramped: Vec<f64> = wave
            .values()
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if j < self.ramp_samples {
                    v * j as f64 / self.ramp_samples as f64
                } else {
                    v
                }
            })
            .collect();
        // Quasi-static slope under the ship: ∂η/∂x = η̇/(c + U) with the
        // phase speed taken at the modal frequency.
        let wm = cfg.modal_frequency();
        let celerity = GRAVITY / wm + cfg.ship_speed * (-cfg.heading.cos()).max(0.0);
        let slope: Vec<f64> = (0..n)
            .map(|j| {
                let rate = if j == 0 {
                    (ramped[1] - ramped[0]) / dt
                } else if j == n - 1 {
                    (ramped[n - 1] - ramped[n - 2]) / dt
                } else {
                    (ramped[j + 1] - ramped[j - 1]) / (2.0 * dt)
                };
                h.pitch_excitation_gain * rate / celerity
            })
            .collect();
        let elevation: Vec<f64> = ramped.iter().map(|v| h.heave_excitation_gain * v).collect();

        let (coeffs, delay) = match fidelity {
            Fidelity::High => (
                Coefficients {
                    wp: h.pitch_natural_frequency(),
                    wz: h.heave_natural_frequency(),
                    zeta_p: h.linear_damping_ratio.pitch,
                    zeta_z: h.linear_damping_ratio.heave,
                    quad_p: h.quadratic_damping_coeff.pitch,
                    quad_z: h.quadratic_damping_coeff.heave,
                    cubic_p: h.cubic_restoring_coeff.pitch,
                    cubic_z: h.cubic_restoring_coeff.heave,
                    flare: Some(Flare {
                        half_length: 0.5 * h.length,
                        threshold: h.flare_threshold,
                        scale: h.fk_saturation_coeff,
                        coeff: h.flare_moment_coeff,
                        bow_wave_weight: h.bow_wave_weight,
                        rising_only: h.flare_rising_only,
                    }),
                },
                0.0,
            ),
            Fidelity::Low => {
                let q = self.low_fidelity.quadratic_damping_scale;
                (
                    Coefficients {
                        wp: h.pitch_natural_frequency(),
                        wz: h.heave_natural_frequency(),
                        zeta_p: h.linear_damping_ratio.pitch,
                        zeta_z: h.linear_damping_ratio.heave,
                        quad_p: q * h.quadratic_damping_coeff.pitch,
                        quad_z: q * h.quadratic_damping_coeff.heave,
                        cubic_p: 0.0,
                        cubic_z: 0.0,
                        flare: None,
                    },
                    self.low_fidelity.group_delay,
                )
            }
        };
        let forcing = Forcing {
            slope,
            elevation,
            bow: ramped,
            bow_lead: 0.5 * h.length / celerity,
            dt,
            delay,
        };

        let mut pitch = Vec::with_capacity(n);
        let mut heave = Vec::with_capacity(n);
        // [θ, θ̇, z, ż]
        let mut state = [0.0f64; 4];
        pitch.push(0.0);
        heave.push(0.0);
        for j in 1..n {
            let t = (j - 1) as f64 * dt;
            state = rk4_step(&coeffs, &forcing, state, t, dt);
            if !state.iter().all(|v| v.is_finite()) || state[0].abs() > std::f64::consts::FRAC_PI_2 {
                return Err(HydroError::Divergence { index: j });
            }
            pitch.push(state[0].to_degrees());
            heave.push(state[2]);
        }

        let series = |v: Vec<f64>| TimeSeries::new(v, dt, wave.t0()).expect("non-empty record");
        Ok(MotionRecord {
            pitch: series(pitch),
            heave: series(heave),
            roll: series(vec![0.0; n]),
            wave: wave.clone(),
            fidelity,
        })
    }
}

fn derivative(c: &Coefficients, f: &Forcing, s: [f64; 4], t: f64) -> [f64; 4] {
    let [p, pv, z, zv] = s;
    let (slope, elev) = f.sample(t);
    let mut pitch_excitation = slope;
    if let Some(flare) = &c.flare {
        let relative = z + flare.half_length * p.sin() - flare.bow_wave_weight * f.bow_elevation(t);
        let excess = relative - flare.threshold;
        if excess > 0.0 && (!flare.rising_only || pv > 0.0) {
            pitch_excitation += flare.coeff * flare.scale * (excess / flare.scale).tanh();
        }
    }
    let pa = -2.0 * c.zeta_p * c.wp * pv - c.quad_p * pv * pv.abs()
        - c.wp * c.wp * (p + c.cubic_p * p * p * p)
        + c.wp * c.wp * pitch_excitation;
    let za = -2.0 * c.zeta_z * c.wz * zv - c.quad_z * zv * zv.abs()
        - c.wz * c.wz * (z + c.cubic_z * z * z * z)
        + c.wz * c.wz * elev;
    [pv, pa, zv, za]
}

fn rk4_step(c: &Coefficients, f: &Forcing, s: [f64; 4], t: f64, dt: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], k: f64| {
        [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2], a[3] + k * b[3]]
    };
    let k1 = derivative(c, f, s, t);
    let k2 = derivative(c, f, add(s, k1, 0.5 * dt), t + 0.5 * dt);
    let k3 = derivative(c, f, add(s, k2, 0.5 * dt), t + 0.5 * dt);
    let k4 = derivative(c, f, add(s, k3, dt), t + dt);
    let mut out = s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Per-realization comparison of the two fidelities' pitch maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// (low-fidelity max, high-fidelity max) per realization, degrees.
    pub maxima: Vec<(f64, f64)>,
    pub correlation: f64,
    /// Mean of low/high maxima ratios.
    pub mean_peak_ratio: f64,
    /// Mean of (low max time − high max time), s.
    pub mean_peak_time_offset: f64,
}

/// Compare pitch maxima of paired ensembles, ignoring the first `skip`
/// samples of each record.
pub fn fidelity_gap_report(
    ensemble_lf: &[MotionRecord],
    ensemble_hf: &[MotionRecord],
    skip: usize,
) -> Result<GapReport, HydroError> {
    if ensemble_lf.len() != ensemble_hf.len() {
        return Err(HydroError::Unpaired(format!(
            "{} low-fidelity vs {} high-fidelity records",
            ensemble_lf.len(),
            ensemble_hf.len()
        )));
    }
    if ensemble_lf.is_empty() {
        return Err(HydroError::Unpaired("ensembles are empty".into()));
    }
    let mut maxima = Vec::with_capacity(ensemble_lf.len());
    let mut ratio = 0.0;
    let mut offset = 0.0;
    for (i, (lf, hf)) in ensemble_lf.iter().zip(ensemble_hf).enumerate() {
        if lf.wave != hf.wave {
            return Err(HydroError::Unpaired(format!("realization {i} has different waves")));
        }
        let (il, ml) = lf
            .pitch
            .argmax_from(skip)
            .ok_or_else(|| HydroError::Unpaired(format!("realization {i} shorter than skip")))?;
        let (ih, mh) = hf
            .pitch
            .argmax_from(skip)
            .ok_or_else(|| HydroError::Unpaired(format!("realization {i} shorter than skip")))?;
        maxima.push((ml, mh));
        ratio += ml / mh;
        offset += lf.pitch.time(il) - hf.pitch.time(ih);
    }
    let n = maxima.len() as f64;
    let (x, y): (Vec<f64>, Vec<f64>) = maxima.iter().copied().unzip();
    Ok(GapReport {
        correlation: evalstats::correlation(&x, &y)?,
        maxima,
        mean_peak_ratio: ratio / n,
        mean_peak_time_offset: offset / n,
    })
}

/// Grid searched by [`calibrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationGrid {
    pub group_delays: Vec<f64>,
    pub flare_thresholds: Vec<f64>,
    pub saturation_coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub simulator: Simulator,
    pub correlation: f64,
    pub mean_peak_ratio: f64,
}

/// Grid search for the simulator whose maxima correlation on `waves` is
/// closest to `target_correlation` while the low fidelity still
/// under-predicts on average. Returns the winner and every evaluated point.
pub fn calibrate(
    base: &Simulator,
    grid: &CalibrationGrid,
    waves: &[TimeSeries],
    cfg: &SeaStateConfig,
    target_correlation: f64,
) -> Result<(CalibrationPoint, Vec<CalibrationPoint>), HydroError> {
    let mut candidates = Vec::new();
    for &delay in &grid.group_delays {
        for &threshold in &grid.flare_thresholds {
            for &saturation in &grid.saturation_coeffs {
                let mut sim = *base;
                sim.low_fidelity.group_delay = delay;
                sim.hull.flare_threshold = threshold;
                sim.hull.fk_saturation_coeff = saturation;
                candidates.push(sim);
            }
        }
    }
    if candidates.is_empty() {
        return Err(HydroError::InvalidHull("empty calibration grid".into()));
    }
    let points = candidates
        .into_par_iter()
        .map(|sim| {
            let (lf, hf) = waves
                .iter()
                .map(|w| Ok((sim.simulate(Fidelity::Low, w, cfg)?, sim.simulate(Fidelity::High, w, cfg)?)))
                .collect::<Result<(Vec<_>, Vec<_>), HydroError>>()?;
            let gap = fidelity_gap_report(&lf, &hf, sim.ramp_samples)?;
            Ok(CalibrationPoint {
                simulator: sim,
                correlation: gap.correlation,
                mean_peak_ratio: gap.mean_peak_ratio,
            })
        })
        .collect::<Result<Vec<_>, HydroError>>()?;
    let best = points
        .iter()
        .filter(|p| p.mean_peak_ratio < 1.0)
        .min_by(|a, b| {
            let da = (a.correlation - target_correlation).abs();
            let db = (b.correlation - target_correlation).abs();
            da.total_cmp(&db)
        })
        .cloned()
        .ok_or_else(|| HydroError::InvalidHull("no grid point under-predicts".into()))?;
    Ok((best, points))
}
