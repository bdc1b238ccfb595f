//! Peak detection and snippet extraction around low-fidelity pitch peaks.
//!
//! Peaks are strict local maxima of signed (bow-up) pitch, thinned so that no
//! two lie closer than a minimum separation. The largest `k` per realization
//! become snippet centers. Relative rank ties the high-fidelity record's
//! global maximum back to the low-fidelity peak at the same instant, and the
//! coverage curve over ranks picks `k`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydro::MotionRecord;
use crate::timeseries::TimeSeries;

#[derive(Debug, Error)]
pub enum SnippetError {
    #[error("record has {len} samples but the window needs {window}")]
    RecordTooShort { len: usize, window: usize },
    #[error("center index {center} outside record of length {len}")]
    CenterOutOfRange { center: usize, len: usize },
    #[error("target series does not align with the record")]
    TargetMismatch,
    #[error("window must span at least one sample")]
    EmptyWindow,
    #[error("malformed snippet file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Chronologically ordered peaks of one series.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakSet {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Positions into `self` sorted from the largest peak down; equal values
    /// rank the earlier peak first.
    pub fn amplitude_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.values[b]
                .total_cmp(&self.values[a])
                .then(self.indices[a].cmp(&self.indices[b]))
        });
        order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeakOptions {
    /// Minimum distance between retained peaks, samples.
    pub min_separation: usize,
    /// Leading samples to ignore (the wave ramp).
    pub skip: usize,
}

impl PeakOptions {
    /// Separation of half the modal encounter period.
    pub fn for_encounter_period(period: f64, dt: f64, skip: usize) -> Self {
        Self {
            min_separation: ((0.5 * period / dt).round() as usize).max(1),
            skip,
        }
    }
}

pub fn detect_peaks(pitch: &TimeSeries, opts: &PeakOptions) -> PeakSet {
    let v = pitch.values();
    if v.len() < 3 {
        return PeakSet::default();
    }
    let start = opts.skip.max(1);
    let mut candidates: Vec<usize> = (start..v.len() - 1)
        .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
        .collect();
    // Largest first; a candidate survives if nothing larger is too close.
    candidates.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| k.abs_diff(c) >= opts.min_separation) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    PeakSet {
        values: kept.iter().map(|&i| v[i]).collect(),
        indices: kept,
    }
}

/// The `k` largest peaks, returned chronologically.
pub fn top_k(peaks: &PeakSet, k: usize) -> PeakSet {
    let mut chosen: Vec<usize> = peaks.amplitude_order().into_iter().take(k).collect();
    chosen.sort_unstable();
    PeakSet {
        indices: chosen.iter().map(|&p| peaks.indices[p]).collect(),
        values: chosen.iter().map(|&p| peaks.values[p]).collect(),
    }
}

/// Input channels in the order the network consumes them.
pub const INPUT_CHANNELS: [&str; 3] = ["lf_pitch", "lf_heave", "wave"];
pub const TARGET_CHANNEL: &str = "hf_pitch";

/// Fixed-length aligned window of low-fidelity inputs, optionally with the
/// high-fidelity pitch target over the same samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub realization_id: usize,
    pub center_index: usize,
    /// Source index of the first window sample.
    pub start_index: usize,
    /// One window per entry of [`INPUT_CHANNELS`].
    pub channels: Vec<Vec<f64>>,
    pub target: Option<Vec<f64>>,
}

impl Snippet {
    pub fn window_length(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

pub fn window_length(window_seconds: f64, dt: f64) -> usize {
    (window_seconds / dt).round() as usize + 1
}

/// Cut a window of `window_seconds` centered on `center`. Windows that would
/// overrun the record are shifted inward so every snippet has full length.
pub fn extract_snippet(
    record: &MotionRecord,
    target: Option<&TimeSeries>,
    center: usize,
    window_seconds: f64,
    realization_id: usize,
) -> Result<Snippet, SnippetError> {
    let n = record.len();
    let len = window_length(window_seconds, record.dt());
    if len == 0 {
        return Err(SnippetError::EmptyWindow);
    }
    if n < len {
        return Err(SnippetError::RecordTooShort { len: n, window: len });
    }
    if center >= n {
        return Err(SnippetError::CenterOutOfRange { center, len: n });
    }
    if let Some(t) = target {
        if t.len() != n {
            return Err(SnippetError::TargetMismatch);
        }
    }
    let start = center.saturating_sub((len - 1) / 2).min(n - len);
    let cut = |s: &TimeSeries| s.values()[start..start + len].to_vec();
    Ok(Snippet {
        realization_id,
        center_index: center,
        start_index: start,
        channels: vec![cut(&record.pitch), cut(&record.heave), cut(&record.wave)],
        target: target.map(cut),
    })
}

/// 1-based amplitude rank of the low-fidelity peak nearest in time to the
/// high-fidelity global maximum (searched from `skip`), or `None` when no
/// peak lies within `match_tolerance` seconds.
pub fn relative_rank(
    lf_peaks: &PeakSet,
    hf_pitch: &TimeSeries,
    match_tolerance: f64,
    skip: usize,
) -> Option<usize> {
    let (hf_index, _) = hf_pitch.argmax_from(skip)?;
    let tol = match_tolerance / hf_pitch.dt();
    let nearest = (0..lf_peaks.len())
        .filter(|&p| (lf_peaks.indices[p] as f64 - hf_index as f64).abs() <= tol + 1e-9)
        .min_by_key(|&p| lf_peaks.indices[p].abs_diff(hf_index))?;
    lf_peaks
        .amplitude_order()
        .iter()
        .position(|&p| p == nearest)
        .map(|r| r + 1)
}

/// Fraction of realizations whose high-fidelity maximum is matched by one of
/// the top-k low-fidelity peaks, for k = 1..=k_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub k_values: Vec<usize>,
    pub coverage: Vec<f64>,
}

/// Coverage over ranks; unmatched realizations count in the denominator but
/// are never covered. `k_max` is the largest observed rank.
pub fn coverage_curve(ranks: &[Option<usize>]) -> CoverageCurve {
    let k_max = ranks.iter().flatten().copied().max().unwrap_or(1);
    let n = ranks.len().max(1) as f64;
    let mut counts = vec![0usize; k_max + 1];
    for r in ranks.iter().flatten() {
        counts[*r] += 1;
    }
    let mut running = 0;
    let mut coverage = Vec::with_capacity(k_max);
    for c in counts.iter().skip(1) {
        running += c;
        coverage.push(running as f64 / n);
    }
    CoverageCurve {
        k_values: (1..=k_max).collect(),
        coverage,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KChoice {
    pub k: usize,
    /// False when the threshold was never reached and `k` is `k_max`.
    pub reached: bool,
}

pub fn choose_k(curve: &CoverageCurve, threshold: f64) -> KChoice {
    match curve
        .k_values
        .iter()
        .zip(&curve.coverage)
        .find(|(_, &c)| c >= threshold)
    {
        Some((&k, _)) => KChoice { k, reached: true },
        None => KChoice {
            k: curve.k_values.last().copied().unwrap_or(1),
            reached: false,
        },
    }
}

/// A corrected pitch window and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedWindow {
    pub center_index: usize,
    pub start_index: usize,
    pub values: Vec<f64>,
}

impl CorrectedWindow {
    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The window with the largest pitch maximum; ties go to the earliest
/// center. `None` for an empty list.
pub fn select_best_output(windows: &[CorrectedWindow]) -> Option<&CorrectedWindow> {
    windows.iter().reduce(|best, w| {
        let (bm, wm) = (best.max(), w.max());
        if wm > bm || (wm == bm && w.center_index < best.center_index) {
            w
        } else {
            best
        }
    })
}

/// Sidecar describing a snippet dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnippetIndex {
    pub window_length: usize,
    pub dt: f64,
    pub k: usize,
    pub channels: Vec<String>,
    pub target_channel: Option<String>,
    pub count: usize,
}

/// Long-format CSV: `realization_id,center_index,channel,sample_index,value`
/// with `sample_index` the source-record index.
pub fn write_snippets<W: Write>(out: W, snippets: &[Snippet], with_target: bool) -> Result<(), SnippetError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["realization_id", "center_index", "channel", "sample_index", "value"])?;
    for s in snippets {
        let rid = s.realization_id.to_string();
        let center = s.center_index.to_string();
        let mut emit = |name: &str, values: &[f64]| -> Result<(), SnippetError> {
            for (i, v) in values.iter().enumerate() {
                w.write_record([
                    rid.as_str(),
                    center.as_str(),
                    name,
                    &(s.start_index + i).to_string(),
                    &v.to_string(),
                ])?;
            }
            Ok(())
        };
        for (name, values) in INPUT_CHANNELS.iter().zip(&s.channels) {
            emit(name, values)?;
        }
        if with_target {
            if let Some(t) = &s.target {
                emit(TARGET_CHANNEL, t)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snippets<R: Read>(input: R) -> Result<Vec<Snippet>, SnippetError> {
    let mut r = csv::Reader::from_reader(input);
    // Keyed by first appearance so file order is preserved.
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut by_key: BTreeMap<(usize, usize), Snippet> = BTreeMap::new();
    for row in r.records() {
        let row = row?;
        if row.len() != 5 {
            return Err(SnippetError::Format(format!("expected 5 columns, got {}", row.len())));
        }
        let parse_usize = |i: usize| {
            row[i]
                .parse::<usize>()
                .map_err(|e| SnippetError::Format(format!("column {i}: {e}")))
        };
        let rid = parse_usize(0)?;
        let center = parse_usize(1)?;
        let sample = parse_usize(3)?;
        let value: f64 = row[4]
            .parse()
            .map_err(|e| SnippetError::Format(format!("value: {e}")))?;
        let snip = by_key.entry((rid, center)).or_insert_with(|| {
            order.push((rid, center));
            Snippet {
                realization_id: rid,
                center_index: center,
                start_index: sample,
                channels: vec![Vec::new(); INPUT_CHANNELS.len()],
                target: None,
            }
        });
        let dest = match &row[2] {
            c if c == TARGET_CHANNEL => snip.target.get_or_insert_with(Vec::new),
            c => {
                let ch = INPUT_CHANNELS
                    .iter()
                    .position(|n| *n == c)
                    .ok_or_else(|| SnippetError::Format(format!("unknown channel {c}")))?;
                &mut snip.channels[ch]
            }
        };
        if sample != snip.start_index + dest.len() {
            return Err(SnippetError::Format(format!(
                "non-contiguous sample {sample} in snippet ({rid}, {center})"
            )));
        }
        dest.push(value);
    }
    let snippets: Vec<Snippet> = order
        .into_iter()
        .map(|key| by_key.remove(&key).expect("key recorded on insert"))
        .collect();
    for s in &snippets {
        let len = s.window_length();
        if s.channels.iter().any(|c| c.len() != len) || s.target.as_ref().is_some_and(|t| t.len() != len) {
            return Err(SnippetError::Format(format!(
                "ragged channels in snippet ({}, {})",
                s.realization_id, s.center_index
            )));
        }
    }
    Ok(snippets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::Fidelity;

    fn series(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v, 0.1, 0.0).unwrap()
    }

    fn record(n: usize) -> MotionRecord {
        let mk = |k: f64| series((0..n).map(|i| k * i as f64).collect());
        MotionRecord {
            pitch: mk(1.0),
            heave: mk(2.0),
            roll: mk(0.0),
            wave: mk(3.0),
            fidelity: Fidelity::Low,
        }
    }

    const NO_SKIP: PeakOptions = PeakOptions {
        min_separation: 1,
        skip: 0,
    };

    #[test]
    fn sine_has_one_peak_per_period() {
        // 40 samples per period, maxima land exactly on samples 10, 50, ...
        let s = series(
            (0..400)
                .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 40.0).sin())
                .collect(),
        );
        let p = detect_peaks(&s, &PeakOptions { min_separation: 20, skip: 0 });
        assert_eq!(p.len(), 10);
        assert!(p.values.iter().all(|&v| v == p.values[0]));
        assert_eq!(p.indices[0], 10);
    }

    #[test]
    fn close_maxima_keep_larger() {
        let s = series(vec![0.0, 1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.5, 0.0]);
        let p = detect_peaks(&s, &PeakOptions { min_separation: 3, skip: 0 });
        assert_eq!(p.indices, vec![3, 8]);
        let all = detect_peaks(&s, &NO_SKIP);
        assert_eq!(all.indices, vec![1, 3, 8]);
    }

    #[test]
    fn constant_series_has_no_peaks() {
        assert!(detect_peaks(&series(vec![1.0; 50]), &NO_SKIP).is_empty());
        assert!(detect_peaks(&series(vec![1.0, 2.0]), &NO_SKIP).is_empty());
    }

    #[test]
    fn skip_excludes_ramp() {
        let s = series(vec![0.0, 5.0, 0.0, 1.0, 0.0]);
        assert_eq!(detect_peaks(&s, &PeakOptions { min_separation: 1, skip: 2 }).indices, vec![3]);
    }

    #[test]
    fn top_k_cases() {
        let p = PeakSet {
            indices: vec![2, 5, 9, 14],
            values: vec![1.0, 4.0, 2.0, 3.0],
        };
        assert_eq!(top_k(&p, 10), p);
        assert_eq!(top_k(&p, 1).indices, vec![5]);
        assert_eq!(top_k(&p, 2).indices, vec![5, 14]);
    }

    #[test]
    fn snippet_length_and_alignment() {
        let rec = record(2000);
        let s = extract_snippet(&rec, None, 1000, 50.0, 4).unwrap();
        assert_eq!(s.window_length(), 501);
        assert_eq!(s.start_index, 750);
        assert_eq!(s.channels[0][250], 1000.0);
        for (i, v) in s.channels[2].iter().enumerate() {
            assert_eq!(*v, rec.wave.values()[750 + i]);
        }
        let edge = extract_snippet(&rec, Some(&rec.pitch), 1990, 50.0, 4).unwrap();
        assert_eq!(edge.window_length(), 501);
        assert_eq!(edge.start_index, 1499);
        assert_eq!(edge.center_index, 1990);
        assert_eq!(edge.target.as_ref().unwrap()[500], 1999.0);
        let front = extract_snippet(&rec, None, 3, 50.0, 4).unwrap();
        assert_eq!(front.start_index, 0);
        assert!(matches!(
            extract_snippet(&record(300), None, 100, 50.0, 0),
            Err(SnippetError::RecordTooShort { .. })
        ));
        assert!(extract_snippet(&rec, None, 5000, 50.0, 0).is_err());
    }

    #[test]
    fn rank_identity_and_swap() {
        let v = vec![0.0, 3.0, 0.0, 5.0, 0.0, 4.0, 0.0, 1.0, 0.0];
        let hf = series(v.clone());
        let peaks = detect_peaks(&hf, &NO_SKIP);
        assert_eq!(relative_rank(&peaks, &hf, 0.1, 0), Some(1));
        let mut swapped = v;
        swapped.swap(3, 5);
        let lf_peaks = detect_peaks(&series(swapped), &NO_SKIP);
        assert_eq!(relative_rank(&lf_peaks, &hf, 0.1, 0), Some(2));
        // Nothing within tolerance.
        let far = PeakSet {
            indices: vec![8],
            values: vec![1.0],
        };
        assert_eq!(relative_rank(&far, &hf, 0.2, 0), None);
    }

    #[test]
    fn coverage_and_k() {
        let ones = vec![Some(1); 10];
        assert_eq!(choose_k(&coverage_curve(&ones), 0.95), KChoice { k: 1, reached: true });
        let uniform: Vec<Option<usize>> = (1..=20).map(Some).collect();
        let curve = coverage_curve(&uniform);
        assert_eq!(curve.k_values.len(), 20);
        assert_eq!(choose_k(&curve, 0.95).k, 19);
        let mut with_miss = uniform.clone();
        with_miss.push(None);
        let c = coverage_curve(&with_miss);
        assert!(c.coverage.last().unwrap() < &1.0);
        let choice = choose_k(&c, 0.99);
        assert!(!choice.reached);
        assert_eq!(choice.k, 20);
    }

    #[test]
    fn best_output_selection() {
        let w = |c: usize, m: f64| CorrectedWindow {
            center_index: c,
            start_index: 0,
            values: vec![0.0, m, 0.0],
        };
        let one = [w(5, 1.0)];
        assert_eq!(select_best_output(&one).unwrap().center_index, 5);
        let two = [w(5, 3.1), w(9, 4.2)];
        assert_eq!(select_best_output(&two).unwrap().center_index, 9);
        let tie = [w(9, 4.2), w(5, 4.2)];
        assert_eq!(select_best_output(&tie).unwrap().center_index, 5);
        assert!(select_best_output(&[]).is_none());
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let mut rec = record(1200);
        rec.pitch.values_mut().iter_mut().for_each(|v| *v = (*v * 0.37).sin() / 3.0);
        let target = series((0..1200).map(|i| (i as f64).sqrt() * 1e-7 + 0.1).collect());
        let snippets: Vec<Snippet> = [300, 600, 1190]
            .iter()
            .map(|&c| extract_snippet(&rec, Some(&target), c, 50.0, 7).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_snippets(&mut buf, &snippets, true).unwrap();
        let back = read_snippets(buf.as_slice()).unwrap();
        assert_eq!(back, snippets);

        let mut buf = Vec::new();
        write_snippets(&mut buf, &snippets, false).unwrap();
        let back = read_snippets(buf.as_slice()).unwrap();
        assert!(back.iter().all(|s| s.target.is_none()));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn series(v: Vec<f64>) -> TimeSeries {
            TimeSeries::new(v, 0.1, 0.0).unwrap()
        }

        proptest! {
            #[test]
            fn peaks_are_separated_local_maxima(
                v in prop::collection::vec(-5.0f64..5.0, 3..200),
                sep in 1usize..10,
            ) {
                let p = detect_peaks(&series(v.clone()), &PeakOptions { min_separation: sep, skip: 0 });
                for w in p.indices.windows(2) {
                    prop_assert!(w[1] > w[0]);
                    prop_assert!(w[1] - w[0] >= sep);
                }
                for &i in &p.indices {
                    prop_assert!(v[i] > v[i - 1] && v[i] > v[i + 1]);
                }
            }

            #[test]
            fn top_k_nested(
                v in prop::collection::vec(-5.0f64..5.0, 3..200),
                k in 1usize..12,
            ) {
                let p = detect_peaks(&series(v), &PeakOptions { min_separation: 2, skip: 0 });
                let small = top_k(&p, k);
                let big = top_k(&p, k + 1);
                prop_assert_eq!(small.len(), k.min(p.len()));
                prop_assert!(small.indices.iter().all(|i| big.indices.contains(i)));
            }

            #[test]
            fn rank_invariant_under_monotone_transform(
                lf in prop::collection::vec(-5.0f64..5.0, 3..150),
                hf in prop::collection::vec(-5.0f64..5.0, 150),
            ) {
                let n = lf.len();
                let hf = hf[..n].to_vec();
                let opts = PeakOptions { min_separation: 2, skip: 0 };
                let base = relative_rank(&detect_peaks(&series(lf.clone()), &opts), &series(hf.clone()), 0.5, 0);
                let f = |x: &f64| (x * 0.7).exp() + 3.0 * x;
                let lt: Vec<f64> = lf.iter().map(f).collect();
                let ht: Vec<f64> = hf.iter().map(f).collect();
                let moved = relative_rank(&detect_peaks(&series(lt), &opts), &series(ht), 0.5, 0);
                prop_assert_eq!(base, moved);
            }

            #[test]
            fn coverage_nondecreasing(ranks in prop::collection::vec(prop::option::of(1usize..30), 1..100)) {
                let c = coverage_curve(&ranks);
                for w in c.coverage.windows(2) {
                    prop_assert!(w[1] >= w[0]);
                }
                prop_assert!(*c.coverage.last().unwrap() <= 1.0);
                let strict = choose_k(&c, 0.95).k;
                let lenient = choose_k(&c, 0.8).k;
                prop_assert!(lenient <= strict);
            }
        }
    }
}
