//! Simulating a trace at another resolution by linear rescaling, and the
//! error of that simulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{pearson, truncate, BitrateTrace, TraceError};

/// Cutoff applied before comparing traces, in seconds.
pub const DEFAULT_CUTOFF: f64 = 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("trace has zero mean")]
    ZeroMeanTrace,
    #[error("target mean {0} kbps is not positive")]
    InvalidTarget(f64),
    #[error("trace lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("trace intervals differ: {0} vs {1}")]
    IntervalMismatch(f64, f64),
    #[error("trace is empty")]
    EmptyTrace,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// A source trace and the mean bitrate it should be rescaled to.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePair {
    pub orig: BitrateTrace,
    pub target_mean: f64,
}

impl ScalePair {
    pub fn new(orig: BitrateTrace, target_mean: f64) -> Result<Self, ScaleError> {
        if !(target_mean > 0.0 && target_mean.is_finite()) {
            return Err(ScaleError::InvalidTarget(target_mean));
        }
        positive_mean(&orig)?;
        Ok(Self { orig, target_mean })
    }
}

fn positive_mean(t: &BitrateTrace) -> Result<f64, ScaleError> {
    match t.mean() {
        None => Err(ScaleError::EmptyTrace),
        Some(m) if m > 0.0 => Ok(m),
        Some(_) => Err(ScaleError::ZeroMeanTrace),
    }
}

/// `value_i * target_mean / mean(orig)`, keeping interval and source duration.
pub fn scale_trace(pair: &ScalePair) -> Result<BitrateTrace, ScaleError> {
    scale_to(&pair.orig, pair.target_mean)
}

pub fn scale_to(orig: &BitrateTrace, target_mean: f64) -> Result<BitrateTrace, ScaleError> {
    if !(target_mean > 0.0 && target_mean.is_finite()) {
        return Err(ScaleError::InvalidTarget(target_mean));
    }
    let m = positive_mean(orig)?;
    let values = orig.values().iter().map(|v| v * target_mean / m).collect();
    Ok(orig.map_values(values))
}

/// Mean absolute difference normalized by the mean of `orig`, in percent.
pub fn mape(orig: &BitrateTrace, sim: &BitrateTrace) -> Result<f64, ScaleError> {
    mape_values(orig.values(), sim.values())
}

pub fn mape_values(orig: &[f64], sim: &[f64]) -> Result<f64, ScaleError> {
    if orig.len() != sim.len() {
        return Err(ScaleError::LengthMismatch(orig.len(), sim.len()));
    }
    if orig.is_empty() {
        return Err(ScaleError::EmptyTrace);
    }
    let n = orig.len() as f64;
    let m = orig.iter().sum::<f64>() / n;
    if !(m > 0.0) {
        return Err(ScaleError::ZeroMeanTrace);
    }
    let abs: f64 = orig.iter().zip(sim).map(|(o, s)| (o - s).abs()).sum();
    Ok(abs / n / m * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    /// Source trace rescaled to the reference mean.
    pub scaled: BitrateTrace,
    pub mape: f64,
    /// Correlation between source and reference; `None` if either is constant.
    pub pearson: Option<f64>,
    pub compared_len: usize,
    pub warning: Option<String>,
}

/// Rescales `orig` to the mean of `reference` and measures the error, after
/// cutting both at [`DEFAULT_CUTOFF`].
pub fn simulate_resolution(orig: &BitrateTrace, reference: &BitrateTrace) -> Result<SimulationReport, ScaleError> {
    simulate_resolution_with(orig, reference, DEFAULT_CUTOFF)
}

pub fn simulate_resolution_with(
    orig: &BitrateTrace,
    reference: &BitrateTrace,
    cutoff: f64,
) -> Result<SimulationReport, ScaleError> {
    if orig.interval() != reference.interval() {
        return Err(ScaleError::IntervalMismatch(orig.interval(), reference.interval()));
    }
    let a = truncate(orig, cutoff);
    let b = truncate(reference, cutoff);
    let n = a.len().min(b.len());
    let warning = (a.len() != b.len())
        .then(|| format!("lengths differ ({} vs {} intervals); compared the first {n}", a.len(), b.len()));
    let a = a.prefix(n);
    let b = b.prefix(n);
    let target = positive_mean(&b)?;
    let scaled = scale_to(&a, target)?;
    let err = mape(&b, &scaled)?;
    let c = match pearson(&a, &b) {
        Ok(c) => Some(c),
        Err(TraceError::UndefinedCorrelation | TraceError::TooShort) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(SimulationReport { scaled, mape: err, pearson: c, compared_len: n, warning })
}
