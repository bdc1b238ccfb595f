use serde::{Deserialize, Serialize};

use super::LstmError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LstmError> {
        if data.len() != rows * cols {
            return Err(LstmError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Reshape equal-length channels into `[N/tau, tau·channels]`. Row `j` holds
/// samples `j·tau .. j·tau+tau-1` of channel 0, then the same span of channel
/// 1, and so on. A trailing remainder shorter than `tau` is dropped.
pub fn resample(channels: &[&[f64]], tau: usize) -> Result<Matrix, LstmError> {
    if tau == 0 {
        return Err(LstmError::Config("tau must be at least 1".into()));
    }
    let Some(first) = channels.first() else {
        return Err(LstmError::Shape("no channels".into()));
    };
    let len = first.len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(LstmError::Shape("channels differ in length".into()));
    }
    if len < tau {
        return Err(LstmError::TooShort { len, tau });
    }
    let rows = len / tau;
    let cols = tau * channels.len();
    let mut data = Vec::with_capacity(rows * cols);
    for j in 0..rows {
        for c in channels {
            data.extend_from_slice(&c[j * tau..(j + 1) * tau]);
        }
    }
    Ok(Matrix { rows, cols, data })
}

/// Inverse of [`resample`]: split each row back into `n_channels` channels of
/// `rows · cols / n_channels` samples.
pub fn unresample(m: &Matrix, n_channels: usize) -> Result<Vec<Vec<f64>>, LstmError> {
    if n_channels == 0 || m.cols % n_channels != 0 {
        return Err(LstmError::Shape(format!(
            "{} columns do not split into {n_channels} channels",
            m.cols
        )));
    }
    let tau = m.cols / n_channels;
    let mut out = vec![Vec::with_capacity(m.rows * tau); n_channels];
    for j in 0..m.rows {
        let row = m.row(j);
        for (c, ch) in out.iter_mut().enumerate() {
            ch.extend_from_slice(&row[c * tau..(c + 1) * tau]);
        }
    }
    Ok(out)
}
