//! Stroboscopic records with provenance metadata.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::ModelParams;

/// Provenance attached to every emitted record: model parameters, RNG seed
/// and free-form key/value pairs (command, recording stride, flags, ...).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesMeta {
    pub params: Option<ModelParams>,
    pub seed: Option<u64>,
    pub extra: Vec<(String, String)>,
}

impl SeriesMeta {
    pub fn with_params(params: ModelParams) -> Self {
        Self { params: Some(params), ..Default::default() }
    }

    pub fn push_extra(&mut self, key: &str, value: impl ToString) {
        self.extra.push((key.to_string(), value.to_string()));
    }
}

/// A labelled time series. Stroboscopic producers use integer-valued times;
/// the continuous-time diffusion oracle uses real times. Times are strictly
/// increasing and `values.len() == times.len()` always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    label: String,
    times: Vec<f64>,
    values: Vec<T>,
    pub meta: SeriesMeta,
}

pub type RealSeries = TimeSeries<f64>;
pub type ComplexSeries = TimeSeries<Complex64>;

impl<T: Clone> TimeSeries<T> {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), times: Vec::new(), values: Vec::new(), meta: SeriesMeta::default() }
    }

    pub fn with_meta(label: impl Into<String>, meta: SeriesMeta) -> Self {
        Self { label: label.into(), times: Vec::new(), values: Vec::new(), meta }
    }

    pub fn from_parts(
        label: impl Into<String>,
        times: Vec<f64>,
        values: Vec<T>,
        meta: SeriesMeta,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch(format!(
                "times ({}) vs values ({})",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Series("times must be strictly increasing".into()));
        }
        Ok(Self { label: label.into(), times, values, meta })
    }

    /// Appends a sample; `t` must exceed the last recorded time.
    pub fn push(&mut self, t: f64, value: T) {
        assert!(
            self.times.last().map_or(true, |&last| t > last),
            "time series must be strictly increasing"
        );
        self.times.push(t);
        self.values.push(value);
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.times.iter().copied().zip(self.values.iter())
    }

    /// Index range of samples with t in [t_min, t_max].
    pub fn window_indices(&self, t_min: f64, t_max: f64) -> std::ops::Range<usize> {
        let start = self.times.partition_point(|&t| t < t_min);
        let end = self.times.partition_point(|&t| t <= t_max);
        start..end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_window() {
        let mut s = RealSeries::new("energy");
        for t in 0..10 {
            s.push(t as f64, (t * t) as f64);
        }
        assert_eq!(s.len(), 10);
        let w = s.window_indices(3.0, 7.0);
        assert_eq!(w, 3..8);
        assert!(s.window_indices(100.0, 200.0).is_empty());
    }

    #[test]
    #[should_panic]
    fn push_rejects_non_increasing() {
        let mut s = RealSeries::new("x");
        s.push(1.0, 0.0);
        s.push(1.0, 0.0);
    }

    #[test]
    fn from_parts_validates() {
        assert!(RealSeries::from_parts("x", vec![0.0, 1.0], vec![1.0], SeriesMeta::default()).is_err());
        assert!(RealSeries::from_parts("x", vec![0.0, 0.0], vec![1.0, 2.0], SeriesMeta::default()).is_err());
        assert!(RealSeries::from_parts("x", vec![0.0, 2.0], vec![1.0, 2.0], SeriesMeta::default()).is_ok());
    }
}
