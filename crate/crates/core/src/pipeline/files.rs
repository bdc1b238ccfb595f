use std::fs;
use std::io::Write;
use std::path::Path;

use super::{io_err, PipelineError};
use crate::hydro::{Fidelity, MotionRecord};
use crate::timeseries::TimeSeries;

/// Write through a sibling temporary file and rename into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let mut f = fs::File::create(tmp).map_err(io_err(tmp))?;
    f.write_all(bytes).map_err(io_err(tmp))?;
    f.sync_all().map_err(io_err(tmp))?;
    drop(f);
    fs::rename(tmp, path).map_err(io_err(path))
}

/// Build a CSV in memory with `header`, then write it atomically.
pub(crate) fn write_csv<F>(path: &Path, header: &[&str], fill: F) -> Result<(), PipelineError>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), PipelineError>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    let bytes = w.into_inner().map_err(|e| PipelineError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    write_atomic(path, &bytes)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn fmt(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// `t,eta`.
pub fn write_wave(path: &Path, eta: &TimeSeries) -> Result<(), PipelineError> {
    write_csv(path, &["t", "eta"], |w| {
        for (i, v) in eta.values().iter().enumerate() {
            w.write_record([fmt(eta.time(i)), fmt(*v)])?;
        }
        Ok(())
    })
}

/// `t,wave,pitch,heave,roll`.
pub fn write_motion(path: &Path, rec: &MotionRecord) -> Result<(), PipelineError> {
    write_csv(path, &["t", "wave", "pitch", "heave", "roll"], |w| {
        for i in 0..rec.len() {
            w.write_record([
                fmt(rec.pitch.time(i)),
                fmt(rec.wave.values()[i]),
                fmt(rec.pitch.values()[i]),
                fmt(rec.heave.values()[i]),
                fmt(rec.roll.values()[i]),
            ])?;
        }
        Ok(())
    })
}

fn read_columns(path: &Path, header: &[&str], dt: f64) -> Result<(f64, Vec<Vec<f64>>), PipelineError> {
    let bad = |reason: String| PipelineError::Format {
        path: path.display().to_string(),
        reason,
    };
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(bad(format!("header {found:?}, expected {header:?}")));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for (n, row) in r.records().enumerate() {
        let row = row?;
        for (c, field) in row.iter().enumerate() {
            cols[c].push(field.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", n + 1)))?);
        }
    }
    let t = &cols[0];
    if t.is_empty() {
        return Err(bad("no samples".into()));
    }
    let t0 = t[0];
    if let Some(i) = (0..t.len()).find(|&i| (t[i] - (t0 + i as f64 * dt)).abs() > 1e-6 * dt.max(1.0)) {
        return Err(bad(format!("sample {i} is not on the {dt} s grid")));
    }
    Ok((t0, cols))
}

pub fn read_wave(path: &Path, dt: f64) -> Result<TimeSeries, PipelineError> {
    let (t0, mut cols) = read_columns(path, &["t", "eta"], dt)?;
    Ok(TimeSeries::new(cols.remove(1), dt, t0).expect("non-empty series"))
}

pub fn read_motion(path: &Path, fidelity: Fidelity, dt: f64) -> Result<MotionRecord, PipelineError> {
    let (t0, cols) = read_columns(path, &["t", "wave", "pitch", "heave", "roll"], dt)?;
    let mut it = cols.into_iter().skip(1).map(|v| TimeSeries::new(v, dt, t0).expect("non-empty series"));
    let (wave, pitch, heave, roll) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    Ok(MotionRecord {
        pitch,
        heave,
        roll,
        wave,
        fidelity,
    })
}
