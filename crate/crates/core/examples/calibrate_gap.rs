//! Print fidelity-gap statistics for a hull configuration.
//!
//! cargo run --release --example calibrate_gap -- [realizations] [hull-json-patch]

use mfextreme::hydro::{fidelity_gap_report, Fidelity, Simulator};
use mfextreme::seaway::{generate_realization, SeaStateConfig, WaveSettings, RAMP_SAMPLES};
use mfextreme::snippets::{coverage_curve, choose_k, detect_peaks, relative_rank, PeakOptions};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let mut sim = Simulator::default();
    if let Some(patch) = args.get(2) {
        let mut value = serde_json::to_value(sim).unwrap();
        merge(&mut value, serde_json::from_str(patch).expect("patch json"));
        sim = serde_json::from_value(value).expect("simulator json");
    }
    let only5 = std::env::var("SS5_ONLY").is_ok();
    let seed_base: u64 = std::env::var("SEED_BASE").ok().and_then(|s| s.parse().ok()).unwrap_or(1000);
    for (label, sea) in [("ss5", SeaStateConfig::sea_state_5()), ("ss6", SeaStateConfig::sea_state_6())] {
        if only5 && label == "ss6" {
            continue;
        }
        let settings = WaveSettings {
            n_samples: 7000,
            ..WaveSettings::default()
        };
        let mut lf = Vec::new();
        let mut hf = Vec::new();
        for i in 0..n {
            let wave = generate_realization(&sea, &settings, seed_base + i as u64).unwrap().elevation;
            lf.push(sim.simulate(Fidelity::Low, &wave, &sea).unwrap());
            match sim.simulate(Fidelity::High, &wave, &sea) {
                Ok(r) => hf.push(r),
                Err(e) => {
                    println!("{label}: diverged {e}");
                    return;
                }
            }
        }
        let gap = fidelity_gap_report(&lf, &hf, RAMP_SAMPLES).unwrap();
        let period = sea.modal_encounter_period();
        let opts = PeakOptions::for_encounter_period(period, 0.1, RAMP_SAMPLES);
        let ranks: Vec<Option<usize>> = lf
            .iter()
            .zip(&hf)
            .map(|(l, h)| relative_rank(&detect_peaks(&l.pitch, &opts), &h.pitch, 0.5 * period, RAMP_SAMPLES))
            .collect();
        let curve = coverage_curve(&ranks);
        let k = choose_k(&curve, 0.95);
        let rank1 = ranks.iter().filter(|r| **r == Some(1)).count() as f64 / n as f64;
        let miss = ranks.iter().filter(|r| r.is_none()).count() as f64 / n as f64;
        let std = |recs: &Vec<mfextreme::hydro::MotionRecord>| {
            let v: Vec<f64> = recs.iter().flat_map(|r| r.pitch.values()[RAMP_SAMPLES..].to_vec()).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let mean_max = |i: usize| gap.maxima.iter().map(|p| if i == 0 { p.0 } else { p.1 }).sum::<f64>() / n as f64;
        println!(
            "{label}: rho={:.3} ratio={:.3} offset={:.2}s std lf={:.2} hf={:.2} maxmean lf={:.2} hf={:.2} rank1={:.3} miss={:.3} k95={} ({}) cov@8={:.3}",
            gap.correlation, gap.mean_peak_ratio, gap.mean_peak_time_offset, std(&lf), std(&hf),
            mean_max(0), mean_max(1), rank1, miss, k.k, k.reached,
            curve.coverage.get(7).copied().unwrap_or(1.0)
        );
        if std::env::var("CURVE").is_ok() {
            let c: Vec<String> = curve.coverage.iter().take(16).map(|c| format!("{c:.3}")).collect();
            println!("  coverage {}", c.join(" "));
        }
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}
