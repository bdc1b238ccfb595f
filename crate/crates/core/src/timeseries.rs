use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TimeSeriesError {
    #[error("sample interval must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("time series must hold at least one sample")]
    Empty,
}

/// A uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
    t0: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64, t0: f64) -> Result<Self, TimeSeriesError> {
        if !(dt > 0.0) {
            return Err(TimeSeriesError::NonPositiveDt(dt));
        }
        if values.is_empty() {
            return Err(TimeSeriesError::Empty);
        }
        Ok(Self { values, dt, t0 })
    }

    pub fn zeros(len: usize, dt: f64) -> Result<Self, TimeSeriesError> {
        Self::new(vec![0.0; len], dt, 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time stamp of sample `index`.
    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Index and value of the largest sample at or after `start`.
    ///
    /// Ties resolve to the earliest index. Returns `None` when `start` is past
    /// the end of the series.
    pub fn argmax_from(&self, start: usize) -> Option<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .skip(start)
            .fold(None, |best, (i, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((i, v)),
            })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len() as f64
    }
}
