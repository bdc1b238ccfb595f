use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, KSetting, LabeledSeaState, Split};
use super::files::{fmt, read_json, read_motion, write_atomic, write_csv, write_json, write_motion, write_wave};
use super::manifest::RunManifest;
use super::{io_err, PipelineError};
use crate::evalstats::{build_report, MaximaSample, MetricsReport, PdfCurve};
use crate::hydro::{fidelity_gap_report, Fidelity, MotionRecord};
use crate::lstm::{train_with_observer, LstmNetwork, StopReason, TrainingSample};
use crate::seaway::generate_realization;
use crate::snippets::{
    choose_k, coverage_curve, detect_peaks, extract_snippet, read_snippets, relative_rank, select_best_output, top_k,
    write_snippets, CorrectedWindow, KChoice, PeakOptions, Snippet, SnippetIndex, INPUT_CHANNELS, TARGET_CHANNEL,
};

pub const METHOD_LOW_FIDELITY: &str = "low_fidelity";
pub const METHOD_BASE: &str = "base_lstm";
pub const METHOD_SNIPPET: &str = "snippet_lstm";

/// A validated config bound to its run directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: ExperimentConfig,
    pub dir: PathBuf,
    hash: String,
}

impl Run {
    pub fn new(config: ExperimentConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self {
            dir: config.output_dir.clone(),
            hash: config.hash(),
            config,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn manifest(&self) -> Result<RunManifest, PipelineError> {
        RunManifest::load(&self.dir, &self.hash)
    }

    pub fn wave_rel(label: &str, index: usize) -> String {
        format!("data/{label}/wave_{label}_{index}.csv")
    }

    pub fn motion_rel(fidelity: Fidelity, label: &str, index: usize) -> String {
        format!("data/{label}/motion_{}_{label}_{index}.csv", fidelity.as_str())
    }

    pub fn snippets_rel(split: Split, label: &str, training_label: &str) -> String {
        if split == Split::Test {
            format!("snippets/snippets_test_{label}.csv")
        } else {
            debug_assert_eq!(label, training_label);
            format!("snippets/snippets_{}.csv", split.as_str())
        }
    }

    pub fn model_rel(mode: TrainMode) -> String {
        format!("models/model_{}.json", mode.as_str())
    }

    pub fn metrics_rel(label: &str) -> String {
        format!("eval/{label}/metrics.json")
    }

    fn load_motion(&self, fidelity: Fidelity, label: &str, index: usize) -> Result<MotionRecord, PipelineError> {
        read_motion(&self.path(&Self::motion_rel(fidelity, label, index)), fidelity, self.config.waves.dt)
    }

    fn peak_options(&self, sea: &LabeledSeaState) -> PeakOptions {
        PeakOptions::for_encounter_period(
            sea.sea_state.modal_encounter_period(),
            self.config.waves.dt,
            self.config.simulator.ramp_samples,
        )
    }

    fn ramp(&self) -> usize {
        self.config.simulator.ramp_samples
    }
}

/// Waves and paired motions for every realization of every sea state.
/// Starts a fresh manifest.
pub fn generate(run: &Run) -> Result<(), PipelineError> {
    let cfg = &run.config;
    fs::create_dir_all(&run.dir).map_err(io_err(&run.dir))?;
    write_json(&run.path("config.json"), cfg)?;
    let mut manifest = RunManifest::new(run.hash.clone());
    let mut paths = vec!["config.json".to_string()];
    for sea in &cfg.sea_states {
        info!("generate {}: {} realizations", sea.label, sea.splits.total());
        let files = (0..sea.splits.total())
            .into_par_iter()
            .map(|index| {
                let wave = generate_realization(&sea.sea_state, &cfg.waves, cfg.wave_seed(&sea.label, index))?.elevation;
                let mut out = vec![Run::wave_rel(&sea.label, index)];
                write_wave(&run.path(&out[0]), &wave)?;
                for fidelity in [Fidelity::Low, Fidelity::High] {
                    let rec = cfg
                        .simulator
                        .simulate(fidelity, &wave, &sea.sea_state)
                        .map_err(|source| PipelineError::Simulation {
                            label: sea.label.clone(),
                            index,
                            source,
                        })?;
                    let rel = Run::motion_rel(fidelity, &sea.label, index);
                    write_motion(&run.path(&rel), &rec)?;
                    out.push(rel);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        paths.extend(files.into_iter().flatten());
    }
    manifest.record(&run.dir, "generate", &paths, &[])?;
    manifest.save(&run.dir)
}

/// Scalar results of the gap analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub label: String,
    pub realizations: usize,
    pub correlation: f64,
    pub mean_peak_ratio: f64,
    pub mean_peak_time_offset: f64,
    pub rank1_fraction: f64,
    pub unmatched_fraction: f64,
    pub match_tolerance_seconds: f64,
    pub coverage_threshold: f64,
    pub k: KChoice,
    pub coverage_at_k: f64,
}

/// LF-vs-HF maxima, relative ranks and coverage over every realization of
/// the training sea state; records the chosen k.
pub fn analyze_gap(run: &Run) -> Result<GapSummary, PipelineError> {
    let mut manifest = run.manifest()?;
    manifest.verify(&run.dir, "generate")?;
    let sea = run.config.training()?;
    let label = sea.label.as_str();
    let opts = run.peak_options(sea);
    let tolerance = 0.5 * sea.sea_state.modal_encounter_period();
    let n = sea.splits.total();
    info!("analyze-gap {label}: {n} realizations");
    let pairs = (0..n)
        .into_par_iter()
        .map(|i| Ok((run.load_motion(Fidelity::Low, label, i)?, run.load_motion(Fidelity::High, label, i)?)))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let ranks: Vec<Option<usize>> = pairs
        .par_iter()
        .map(|(lf, hf)| relative_rank(&detect_peaks(&lf.pitch, &opts), &hf.pitch, tolerance, run.ramp()))
        .collect();
    let (lf, hf): (Vec<MotionRecord>, Vec<MotionRecord>) = pairs.into_iter().unzip();
    let gap = fidelity_gap_report(&lf, &hf, run.ramp())?;
    drop((lf, hf));

    let curve = coverage_curve(&ranks);
    let k = choose_k(&curve, run.config.snippets.coverage_threshold);
    let frac = |pred: &dyn Fn(&Option<usize>) -> bool| ranks.iter().filter(|r| pred(r)).count() as f64 / n as f64;
    let summary = GapSummary {
        label: label.to_string(),
        realizations: n,
        correlation: gap.correlation,
        mean_peak_ratio: gap.mean_peak_ratio,
        mean_peak_time_offset: gap.mean_peak_time_offset,
        rank1_fraction: frac(&|r| *r == Some(1)),
        unmatched_fraction: frac(&|r| r.is_none()),
        match_tolerance_seconds: tolerance,
        coverage_threshold: run.config.snippets.coverage_threshold,
        k,
        coverage_at_k: curve.coverage.get(k.k - 1).copied().unwrap_or(0.0),
    };

    let rels = [
        "gap/gap_report.json",
        "gap/maxima_scatter.csv",
        "gap/coverage.csv",
        "gap/rank_histogram.csv",
    ];
    write_json(&run.path(rels[0]), &summary)?;
    write_csv(&run.path(rels[1]), &["realization_id", "lf_max", "hf_max", "relative_rank"], |w| {
        for (i, ((l, h), r)) in gap.maxima.iter().zip(&ranks).enumerate() {
            w.write_record([i.to_string(), fmt(*l), fmt(*h), r.map_or(String::new(), |r| r.to_string())])?;
        }
        Ok(())
    })?;
    write_csv(&run.path(rels[2]), &["k", "coverage"], |w| {
        for (k, c) in curve.k_values.iter().zip(&curve.coverage) {
            w.write_record([k.to_string(), fmt(*c)])?;
        }
        Ok(())
    })?;
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for r in ranks.iter().flatten() {
        *hist.entry(*r).or_default() += 1;
    }
    write_csv(&run.path(rels[3]), &["rank", "count"], |w| {
        for (r, c) in &hist {
            w.write_record([r.to_string(), c.to_string()])?;
        }
        w.write_record(["unmatched".to_string(), ranks.iter().filter(|r| r.is_none()).count().to_string()])?;
        Ok(())
    })?;
    info!(
        "analyze-gap {label}: rho={:.3} rank1={:.3} k={} (reached: {})",
        summary.correlation, summary.rank1_fraction, k.k, k.reached
    );
    manifest.chosen_k = Some(k);
    let rels: Vec<String> = rels.iter().map(|s| s.to_string()).collect();
    manifest.record(&run.dir, "analyze-gap", &rels, &["build-snippets", "train", "evaluate", "report"])?;
    manifest.save(&run.dir)?;
    Ok(summary)
}

fn resolve_k(run: &Run, manifest: &RunManifest) -> Result<usize, PipelineError> {
    match run.config.snippets.k {
        KSetting::Fixed(k) => Ok(k),
        KSetting::Auto => {
            manifest.verify(&run.dir, "analyze-gap")?;
            manifest
                .chosen_k
                .map(|c| c.k)
                .ok_or_else(|| PipelineError::Missing("chosen k (run `analyze-gap` first)".into()))
        }
    }
}

fn check_split_hygiene(run: &Run) -> Result<(), PipelineError> {
    for sea in &run.config.sea_states {
        let mut seen = BTreeSet::new();
        for split in Split::ALL {
            for i in sea.splits.range(split) {
                if !seen.insert(i) {
                    return Err(PipelineError::SplitOverlap(i));
                }
            }
        }
    }
    Ok(())
}

fn realization_snippets(
    run: &Run,
    sea: &LabeledSeaState,
    index: usize,
    k: usize,
) -> Result<Vec<Snippet>, PipelineError> {
    let lf = run.load_motion(Fidelity::Low, &sea.label, index)?;
    let hf = run.load_motion(Fidelity::High, &sea.label, index)?;
    let peaks = top_k(&detect_peaks(&lf.pitch, &run.peak_options(sea)), k);
    peaks
        .indices
        .iter()
        .map(|&c| Ok(extract_snippet(&lf, Some(&hf.pitch), c, run.config.snippets.window_seconds, index)?))
        .collect()
}

fn write_snippet_file(path: &Path, snippets: &[Snippet], with_target: bool) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    write_snippets(&mut buf, snippets, with_target)?;
    write_atomic(path, &buf)
}

/// Training/validation snippets (with targets) for the training sea state
/// and target-free test snippets for every sea state.
pub fn build_snippets(run: &Run) -> Result<usize, PipelineError> {
    let mut manifest = run.manifest()?;
    manifest.verify(&run.dir, "generate")?;
    let k = resolve_k(run, &manifest)?;
    check_split_hygiene(run)?;
    let cfg = &run.config;
    let mut rels = Vec::new();
    let index = |count: usize, target: bool| SnippetIndex {
        window_length: cfg.window_length(),
        dt: cfg.waves.dt,
        k,
        channels: INPUT_CHANNELS.iter().map(|s| s.to_string()).collect(),
        target_channel: target.then(|| TARGET_CHANNEL.to_string()),
        count,
    };
    for sea in &cfg.sea_states {
        for split in Split::ALL {
            let range = sea.splits.range(split);
            if range.is_empty() || (split != Split::Test && sea.label != cfg.training_label) {
                continue;
            }
            let snippets: Vec<Snippet> = range
                .into_par_iter()
                .map(|i| realization_snippets(run, sea, i, k))
                .collect::<Result<Vec<_>, PipelineError>>()?
                .into_iter()
                .flatten()
                .collect();
            info!("build-snippets {} {}: {} snippets", sea.label, split.as_str(), snippets.len());
            let rel = Run::snippets_rel(split, &sea.label, &cfg.training_label);
            let with_target = split != Split::Test;
            write_snippet_file(&run.path(&rel), &snippets, with_target)?;
            rels.push(rel);
            let index_rel = if with_target {
                format!("snippets/index_{}.json", split.as_str())
            } else {
                // Targets stay out of the test inputs and are kept for scoring.
                let targets: Vec<Snippet> = snippets
                    .iter()
                    .map(|s| Snippet {
                        channels: Vec::new(),
                        ..s.clone()
                    })
                    .collect();
                let trel = format!("snippets/targets_test_{}.csv", sea.label);
                write_snippet_file(&run.path(&trel), &targets, true)?;
                rels.push(trel);
                format!("snippets/index_test_{}.json", sea.label)
            };
            write_json(&run.path(&index_rel), &index(snippets.len(), with_target))?;
            rels.push(index_rel);
        }
    }
    manifest.record(&run.dir, "build-snippets", &rels, &["train", "evaluate", "report"])?;
    manifest.save(&run.dir)?;
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Windows around the top-k low-fidelity peaks.
    Snippet,
    /// Whole post-ramp records.
    Base,
}

impl TrainMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrainMode::Snippet => "snippet",
            TrainMode::Base => "base",
        }
    }

    fn stage(&self) -> String {
        format!("train-{}", self.as_str())
    }
}

impl std::str::FromStr for TrainMode {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snippet" => Ok(TrainMode::Snippet),
            "base" => Ok(TrainMode::Base),
            _ => Err(PipelineError::Config(format!("unknown training mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub mode: TrainMode,
    pub train_samples: usize,
    pub validation_samples: usize,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub best_epoch: usize,
    pub best_validation_mse: f64,
    pub final_train_mse: f64,
}

fn read_snippet_samples(path: &Path) -> Result<Vec<TrainingSample>, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_snippets(std::io::BufReader::new(file))?
        .into_iter()
        .map(|s| {
            let target = s.target.ok_or_else(|| PipelineError::Format {
                path: path.display().to_string(),
                reason: format!("snippet ({}, {}) has no target", s.realization_id, s.center_index),
            })?;
            Ok(TrainingSample {
                inputs: s.channels,
                target: vec![target],
            })
        })
        .collect()
}

fn record_channels(lf: &MotionRecord, from: usize) -> Vec<Vec<f64>> {
    vec![
        lf.pitch.values()[from..].to_vec(),
        lf.heave.values()[from..].to_vec(),
        lf.wave.values()[from..].to_vec(),
    ]
}

fn base_samples(run: &Run, split: Split) -> Result<Vec<TrainingSample>, PipelineError> {
    let sea = run.config.training()?;
    sea.splits
        .range(split)
        .into_par_iter()
        .map(|i| {
            let lf = run.load_motion(Fidelity::Low, &sea.label, i)?;
            let hf = run.load_motion(Fidelity::High, &sea.label, i)?;
            Ok(TrainingSample {
                inputs: record_channels(&lf, run.ramp()),
                target: vec![hf.pitch.values()[run.ramp()..].to_vec()],
            })
        })
        .collect()
}

/// Fit a network in `mode`. Both modes share the derived network seed and
/// the configured epoch budget.
pub fn train(run: &Run, mode: TrainMode) -> Result<TrainingSummary, PipelineError> {
    let mut manifest = run.manifest()?;
    let (train_set, validation_set) = match mode {
        TrainMode::Snippet => {
            manifest.verify(&run.dir, "build-snippets")?;
            let tl = &run.config.training_label;
            (
                read_snippet_samples(&run.path(&Run::snippets_rel(Split::Train, tl, tl)))?,
                read_snippet_samples(&run.path(&Run::snippets_rel(Split::Validation, tl, tl)))?,
            )
        }
        TrainMode::Base => {
            manifest.verify(&run.dir, "generate")?;
            (base_samples(run, Split::Train)?, base_samples(run, Split::Validation)?)
        }
    };
    let mut net_cfg = run.config.network.clone();
    net_cfg.rng_seed = run.config.network_seed();
    info!(
        "train {}: {} training and {} validation samples, up to {} epochs",
        mode.as_str(),
        train_set.len(),
        validation_set.len(),
        net_cfg.max_epochs
    );
    let (net, history) = train_with_observer(&train_set, &validation_set, &net_cfg, |r| {
        info!(
            "train {} epoch {}: train {:.5} validation {:.5}",
            mode.as_str(),
            r.epoch,
            r.train_mse,
            r.validation_mse
        )
    })?;
    let model_rel = Run::model_rel(mode);
    write_atomic(&run.path(&model_rel), net.to_json().as_bytes())?;
    let history_rel = format!("models/history_{}.csv", mode.as_str());
    write_csv(&run.path(&history_rel), &["epoch", "train_mse", "validation_mse"], |w| {
        for r in &history.epochs {
            w.write_record([r.epoch.to_string(), fmt(r.train_mse), fmt(r.validation_mse)])?;
        }
        Ok(())
    })?;
    let summary = TrainingSummary {
        mode,
        train_samples: train_set.len(),
        validation_samples: validation_set.len(),
        epochs_run: history.epochs.len(),
        stop_reason: history.stop_reason,
        best_epoch: history.best_epoch,
        best_validation_mse: history.best_validation_mse,
        final_train_mse: history.epochs.last().map_or(f64::NAN, |r| r.train_mse),
    };
    let summary_rel = format!("models/summary_{}.json", mode.as_str());
    write_json(&run.path(&summary_rel), &summary)?;
    manifest.record(&run.dir, &mode.stage(), &[model_rel, history_rel, summary_rel], &["evaluate", "report"])?;
    manifest.save(&run.dir)?;
    Ok(summary)
}

/// The realization holding the ensemble-largest high-fidelity maximum and
/// how the corrected output reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakEvent {
    pub realization_id: usize,
    pub hf_peak: f64,
    pub hf_peak_time: f64,
    pub lf_peak: f64,
    pub lf_peak_time: f64,
    pub snippet_peak: f64,
    pub snippet_peak_time: f64,
    pub peak_relative_error: f64,
    pub peak_time_offset: f64,
    pub half_encounter_period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub label: String,
    pub realizations: usize,
    pub k: usize,
    /// Test realizations without any low-fidelity peak; scored with the
    /// low-fidelity maximum.
    pub realizations_without_snippets: usize,
    pub reports: Vec<MetricsReport>,
    pub peak_event: PeakEvent,
}

impl Evaluation {
    pub fn report(&self, method: &str) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.method == method)
    }
}

struct Scored {
    id: usize,
    truth: (usize, f64),
    lf: (usize, f64),
    snippet: (usize, f64),
    base: Option<f64>,
    best: Option<CorrectedWindow>,
    had_snippets: bool,
}

fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
}

fn correct_windows(net: &LstmNetwork, snippets: &[Snippet]) -> Result<Vec<CorrectedWindow>, PipelineError> {
    snippets
        .iter()
        .map(|s| {
            let refs: Vec<&[f64]> = s.channels.iter().map(Vec::as_slice).collect();
            Ok(CorrectedWindow {
                center_index: s.center_index,
                start_index: s.start_index,
                values: net.forward(&refs)?.remove(0),
            })
        })
        .collect()
}

fn base_prediction(run: &Run, net: &LstmNetwork, lf: &MotionRecord) -> Result<Vec<f64>, PipelineError> {
    let ch = record_channels(lf, run.ramp());
    let refs: Vec<&[f64]> = ch.iter().map(Vec::as_slice).collect();
    Ok(net.forward(&refs)?.remove(0))
}

fn write_pdf(path: &Path, pdf: &PdfCurve) -> Result<(), PipelineError> {
    write_csv(path, &["support", "density"], |w| {
        for (x, d) in pdf.support.iter().zip(&pdf.density) {
            w.write_record([fmt(*x), fmt(*d)])?;
        }
        Ok(())
    })
}

/// Score low fidelity, the base network (when trained) and the snippet
/// network against high-fidelity maxima on the test split of `label`.
pub fn evaluate(run: &Run, label: &str) -> Result<Evaluation, PipelineError> {
    let mut manifest = run.manifest()?;
    let sea = run.config.sea_state(label)?;
    if sea.splits.test == 0 {
        return Err(PipelineError::Config(format!("{label} has no test realizations")));
    }
    for stage in ["generate", "build-snippets", "train-snippet"] {
        manifest.verify(&run.dir, stage)?;
    }
    let has_base = manifest.stages.contains_key("train-base");
    if has_base {
        manifest.verify(&run.dir, "train-base")?;
    }
    let snippet_net = LstmNetwork::load(run.path(&Run::model_rel(TrainMode::Snippet)))?;
    let base_net = if has_base {
        Some(LstmNetwork::load(run.path(&Run::model_rel(TrainMode::Base)))?)
    } else {
        None
    };
    let index: SnippetIndex = read_json(&run.path(&format!("snippets/index_test_{label}.json")))?;
    let snippet_path = run.path(&Run::snippets_rel(Split::Test, label, &run.config.training_label));
    let file = fs::File::open(&snippet_path).map_err(io_err(&snippet_path))?;
    let mut by_realization: BTreeMap<usize, Vec<Snippet>> = BTreeMap::new();
    for s in read_snippets(std::io::BufReader::new(file))? {
        by_realization.entry(s.realization_id).or_default().push(s);
    }
    info!("evaluate {label}: {} test realizations", sea.splits.test);

    let ramp = run.ramp();
    let scored = sea
        .splits
        .range(Split::Test)
        .into_par_iter()
        .map(|i| {
            let lf = run.load_motion(Fidelity::Low, label, i)?;
            let hf = run.load_motion(Fidelity::High, label, i)?;
            let truth = hf.pitch.argmax_from(ramp).expect("record longer than ramp");
            let lf_max = lf.pitch.argmax_from(ramp).expect("record longer than ramp");
            let snippets = by_realization.get(&i).map(Vec::as_slice).unwrap_or(&[]);
            let windows = correct_windows(&snippet_net, snippets)?;
            let best = select_best_output(&windows).cloned();
            let snippet = match &best {
                Some(w) => {
                    let (j, v) = argmax(&w.values);
                    (w.start_index + j, v)
                }
                None => lf_max,
            };
            let base = match &base_net {
                Some(net) => Some(argmax(&base_prediction(run, net, &lf)?).1),
                None => None,
            };
            Ok(Scored {
                id: i,
                truth,
                lf: lf_max,
                snippet,
                base,
                best,
                had_snippets: !snippets.is_empty(),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let pairs = |f: &dyn Fn(&Scored) -> f64| -> Vec<MaximaSample> {
        scored
            .iter()
            .map(|s| MaximaSample {
                realization_id: s.id,
                method_max: f(s),
                truth_max: s.truth.1,
            })
            .collect()
    };
    let mut methods: Vec<(&str, Vec<MaximaSample>)> = vec![(METHOD_LOW_FIDELITY, pairs(&|s| s.lf.1))];
    if has_base {
        methods.push((METHOD_BASE, pairs(&|s| s.base.expect("base scored"))));
    }
    methods.push((METHOD_SNIPPET, pairs(&|s| s.snippet.1)));

    let dir = format!("eval/{label}");
    let mut rels = Vec::new();
    let mut reports = Vec::new();
    for (name, p) in &methods {
        let data = build_report(name, p)?;
        let rel = format!("{dir}/pdf_{name}.csv");
        write_pdf(&run.path(&rel), &data.pdf_method)?;
        rels.push(rel);
        if reports.is_empty() {
            let rel = format!("{dir}/pdf_truth.csv");
            write_pdf(&run.path(&rel), &data.pdf_truth)?;
            rels.push(rel);
        }
        info!(
            "evaluate {label} {name}: rho={:.3} R2={:.3} mpm err={:.4} p95 err={:.4}",
            data.report.correlation, data.report.r_squared, data.report.mpm_relative_error, data.report.p95_relative_error
        );
        reports.push(data.report);
    }
    let scatter_rel = format!("{dir}/maxima_scatter.csv");
    let mut header = vec!["realization_id", "truth"];
    header.extend(methods.iter().map(|(n, _)| *n));
    write_csv(&run.path(&scatter_rel), &header, |w| {
        for (row, s) in scored.iter().enumerate() {
            let mut rec = vec![s.id.to_string(), fmt(s.truth.1)];
            rec.extend(methods.iter().map(|(_, p)| fmt(p[row].method_max)));
            w.write_record(rec)?;
        }
        Ok(())
    })?;
    rels.push(scatter_rel);

    // Overlay of the realization with the largest high-fidelity event.
    let top = scored
        .iter()
        .fold(&scored[0], |b, s| if s.truth.1 > b.truth.1 { s } else { b });
    let lf = run.load_motion(Fidelity::Low, label, top.id)?;
    let hf = run.load_motion(Fidelity::High, label, top.id)?;
    let mut snippet_series = vec![f64::NAN; lf.len()];
    if let Some(w) = &top.best {
        snippet_series[w.start_index..w.start_index + w.values.len()].copy_from_slice(&w.values);
    }
    let mut base_series = vec![f64::NAN; lf.len()];
    if let Some(net) = &base_net {
        let p = base_prediction(run, net, &lf)?;
        base_series[ramp..ramp + p.len()].copy_from_slice(&p);
    }
    let overlay_rel = format!("{dir}/overlay.csv");
    write_csv(
        &run.path(&overlay_rel),
        &["t", "wave", "lf_pitch", "hf_pitch", "snippet_pitch", "base_pitch"],
        |w| {
            for i in 0..lf.len() {
                w.write_record([
                    fmt(lf.pitch.time(i)),
                    fmt(lf.wave.values()[i]),
                    fmt(lf.pitch.values()[i]),
                    fmt(hf.pitch.values()[i]),
                    fmt(snippet_series[i]),
                    fmt(base_series[i]),
                ])?;
            }
            Ok(())
        },
    )?;
    rels.push(overlay_rel);
    let t = |i: usize| hf.pitch.time(i);
    let peak_event = PeakEvent {
        realization_id: top.id,
        hf_peak: top.truth.1,
        hf_peak_time: t(top.truth.0),
        lf_peak: top.lf.1,
        lf_peak_time: t(top.lf.0),
        snippet_peak: top.snippet.1,
        snippet_peak_time: t(top.snippet.0),
        peak_relative_error: (top.snippet.1 - top.truth.1).abs() / top.truth.1.abs(),
        peak_time_offset: (t(top.snippet.0) - t(top.truth.0)).abs(),
        half_encounter_period: 0.5 * sea.sea_state.modal_encounter_period(),
    };

    let evaluation = Evaluation {
        label: label.to_string(),
        realizations: scored.len(),
        k: index.k,
        realizations_without_snippets: scored.iter().filter(|s| !s.had_snippets).count(),
        reports,
        peak_event,
    };
    let metrics_rel = Run::metrics_rel(label);
    write_json(&run.path(&metrics_rel), &evaluation)?;
    rels.push(metrics_rel);
    manifest.record(&run.dir, &format!("evaluate-{label}"), &rels, &["report"])?;
    manifest.save(&run.dir)?;
    Ok(evaluation)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub gap: Option<GapSummary>,
    pub training: Vec<TrainingSummary>,
    pub evaluations: Vec<Evaluation>,
}

/// Collect the completed stages' results into `report.json`.
pub fn report(run: &Run) -> Result<RunReport, PipelineError> {
    let mut manifest = run.manifest()?;
    let load = |stage: &str, rel: &str| -> Result<Option<PathBuf>, PipelineError> {
        if !manifest.stages.contains_key(stage) {
            return Ok(None);
        }
        manifest.verify(&run.dir, stage)?;
        Ok(Some(run.path(rel)))
    };
    let gap = load("analyze-gap", "gap/gap_report.json")?.map(|p| read_json(&p)).transpose()?;
    let mut training = Vec::new();
    for mode in [TrainMode::Snippet, TrainMode::Base] {
        if let Some(p) = load(&mode.stage(), &format!("models/summary_{}.json", mode.as_str()))? {
            training.push(read_json(&p)?);
        }
    }
    let mut evaluations = Vec::new();
    for sea in &run.config.sea_states {
        if let Some(p) = load(&format!("evaluate-{}", sea.label), &Run::metrics_rel(&sea.label))? {
            evaluations.push(read_json(&p)?);
        }
    }
    if evaluations.is_empty() {
        return Err(PipelineError::Missing("no completed evaluation (run `evaluate` first)".into()));
    }
    let out = RunReport {
        config_hash: run.hash.clone(),
        gap,
        training,
        evaluations,
    };
    write_json(&run.path("report.json"), &out)?;
    manifest.record(&run.dir, "report", &["report.json".to_string()], &[])?;
    manifest.save(&run.dir)?;
    Ok(out)
}
