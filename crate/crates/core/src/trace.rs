//! Frame logs, per-interval bitrate traces and the metrics derived from them.
//!
//! Units: frame sizes are bytes, every rate is kilobits per second (1 kbit =
//! 1000 bits) and every time is seconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::itag::ItagDescriptor;

/// Slack allowed between the last frame timestamp and a declared duration.
pub const DECLARED_DURATION_SLACK: f64 = 1.0;

/// Fraction of an interval the final bucket must cover to count in stats.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("frame log is empty")]
    EmptyLog,
    #[error("malformed frame log: {0}")]
    MalformedLog(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("interval must be positive, got {0}")]
    InvalidInterval(f64),
    #[error("trace lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least two paired values")]
    TooShort,
    #[error("correlation undefined for a constant trace")]
    UndefinedCorrelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Timestamp in seconds.
    pub pts: f64,
    /// Payload size in bytes.
    pub size: u64,
    pub is_key: Option<bool>,
}

impl Frame {
    pub fn new(pts: f64, size: u64) -> Self {
        Self { pts, size, is_key: None }
    }
}

/// Ordered per-frame record of one video stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub video_id: String,
    pub itag: ItagDescriptor,
    frames: Vec<Frame>,
    pub declared_duration: Option<f64>,
}

impl FrameLog {
    /// Builds a log, checking ordering and timestamp sanity.
    pub fn new(
        video_id: impl Into<String>,
        itag: ItagDescriptor,
        frames: Vec<Frame>,
        declared_duration: Option<f64>,
    ) -> Result<Self, TraceError> {
        let mut prev = 0.0_f64;
        for (i, f) in frames.iter().enumerate() {
            if !f.pts.is_finite() || f.pts < 0.0 {
                return Err(TraceError::MalformedLog(format!("frame {i} has invalid pts {}", f.pts)));
            }
            if f.pts < prev {
                return Err(TraceError::MalformedLog(format!(
                    "frame {i} pts {} precedes previous pts {prev}",
                    f.pts
                )));
            }
            prev = f.pts;
        }
        if let Some(d) = declared_duration {
            if !d.is_finite() || d < 0.0 {
                return Err(TraceError::MalformedLog(format!("invalid declared duration {d}")));
            }
            if prev > d + DECLARED_DURATION_SLACK {
                return Err(TraceError::MalformedLog(format!(
                    "last pts {prev} exceeds declared duration {d}"
                )));
            }
        }
        Ok(Self { video_id: video_id.into(), itag, frames, declared_duration })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn total_bytes(&self) -> u64 {
        self.frames.iter().map(|f| f.size).sum()
    }

    pub fn last_pts(&self) -> Option<f64> {
        self.frames.last().map(|f| f.pts)
    }
}

/// Instantaneous bitrates over fixed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitrateTrace {
    interval: f64,
    values: Vec<f64>,
    source_duration: f64,
}

impl BitrateTrace {
    /// Trace whose source duration is exactly `values.len() * interval`.
    pub fn new(interval: f64, values: Vec<f64>) -> Result<Self, TraceError> {
        let duration = values.len() as f64 * interval;
        Self::with_source_duration(interval, values, duration)
    }

    pub fn with_source_duration(
        interval: f64,
        values: Vec<f64>,
        source_duration: f64,
    ) -> Result<Self, TraceError> {
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(TraceError::InvalidInterval(interval));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(TraceError::InvalidTrace(format!("value {v} is not a finite non-negative rate")));
        }
        if !(source_duration.is_finite() && source_duration >= 0.0) {
            return Err(TraceError::InvalidTrace(format!("invalid source duration {source_duration}")));
        }
        Ok(Self { interval, values, source_duration })
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn source_duration(&self) -> f64 {
        self.source_duration
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        mean(&self.values)
    }

    /// Total kilobits carried by the trace.
    pub fn total_kbits(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.interval
    }

    /// Same interval and source duration, new values.
    pub(crate) fn map_values(&self, values: Vec<f64>) -> Self {
        Self { interval: self.interval, values, source_duration: self.source_duration }
    }

    /// First `len` buckets; source duration shrinks to cover them.
    pub fn prefix(&self, len: usize) -> Self {
        if len >= self.values.len() {
            return self.clone();
        }
        Self {
            interval: self.interval,
            values: self.values[..len].to_vec(),
            source_duration: self.source_duration.min(len as f64 * self.interval),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub mean_kbps: f64,
    pub stddev_kbps: f64,
    /// Relative standard deviation; `None` for an all-zero trace.
    pub burstiness: Option<f64>,
    pub duration: f64,
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Population standard deviation.
pub(crate) fn pop_stddev(values: &[f64], mean: f64) -> f64 {
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / values.len() as f64).sqrt()
}

/// Bins frames into `interval`-second buckets, in kbps.
///
/// A frame at `pts` lands in bucket `floor(pts / interval)`; the trace ends
/// with the bucket holding the last frame.
pub fn bin_frames(log: &FrameLog, interval: f64) -> Result<BitrateTrace, TraceError> {
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(TraceError::InvalidInterval(interval));
    }
    let last = log.last_pts().ok_or(TraceError::EmptyLog)?;
    if let Some(f) = log.frames().iter().find(|f| !(f.pts >= 0.0)) {
        return Err(TraceError::MalformedLog(format!("negative pts {}", f.pts)));
    }
    let buckets = (last / interval).floor() as usize + 1;
    let mut bytes = vec![0u64; buckets];
    for f in log.frames() {
        let k = ((f.pts / interval).floor() as usize).min(buckets - 1);
        bytes[k] += f.size;
    }
    let values = bytes.into_iter().map(|b| b as f64 * 8.0 / 1000.0 / interval).collect();
    let source_duration = log.declared_duration.map_or(last, |d| d.max(last));
    BitrateTrace::with_source_duration(interval, values, source_duration)
}

/// Mean, population stddev and burstiness with the default tail rule.
pub fn trace_stats(trace: &BitrateTrace) -> Result<TraceStats, TraceError> {
    trace_stats_with(trace, DEFAULT_TAIL_THRESHOLD)
}

/// Like [`trace_stats`], dropping the final bucket when the source covers
/// less than `tail_threshold * interval` of it.
pub fn trace_stats_with(trace: &BitrateTrace, tail_threshold: f64) -> Result<TraceStats, TraceError> {
    let n = trace.len();
    if n == 0 {
        return Err(TraceError::EmptyTrace);
    }
    let tail_start = (n - 1) as f64 * trace.interval;
    let covered = trace.source_duration - tail_start;
    let (values, duration) = if n >= 2 && covered < tail_threshold * trace.interval {
        (&trace.values[..n - 1], tail_start)
    } else {
        (&trace.values[..], trace.source_duration.max(0.0))
    };
    let mean_kbps = mean(values).expect("non-empty");
    let stddev_kbps = pop_stddev(values, mean_kbps);
    let burstiness = (mean_kbps > 0.0).then(|| stddev_kbps / mean_kbps);
    Ok(TraceStats { mean_kbps, stddev_kbps, burstiness, duration })
}

/// Keeps the buckets that start before `cutoff` seconds.
pub fn truncate(trace: &BitrateTrace, cutoff: f64) -> BitrateTrace {
    assert!(cutoff > 0.0, "cutoff must be positive");
    if trace.source_duration <= cutoff {
        return trace.clone();
    }
    // Tolerate representation error so that 180 / 1.0 keeps exactly 180 buckets.
    let keep = ((cutoff / trace.interval) - 1e-9).ceil().max(0.0) as usize;
    let mut out = trace.prefix(keep);
    out.source_duration = trace.source_duration.min(cutoff);
    out
}

/// Pearson product-moment correlation of two equally long traces.
pub fn pearson(a: &BitrateTrace, b: &BitrateTrace) -> Result<f64, TraceError> {
    pearson_values(a.values(), b.values())
}

pub fn pearson_values(a: &[f64], b: &[f64]) -> Result<f64, TraceError> {
    if a.len() != b.len() {
        return Err(TraceError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(TraceError::TooShort);
    }
    let ma = mean(a).expect("non-empty");
    let mb = mean(b).expect("non-empty");
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(TraceError::UndefinedCorrelation);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn log(frames: &[(f64, u64)]) -> FrameLog {
        FrameLog::new(
            "v",
            ItagDescriptor::unspecified(),
            frames.iter().map(|&(p, s)| Frame::new(p, s)).collect(),
            None,
        )
        .unwrap()
    }

    fn trace(values: &[f64]) -> BitrateTrace {
        BitrateTrace::new(1.0, values.to_vec()).unwrap()
    }

    #[test]
    fn bins_three_frames() {
        let t = bin_frames(&log(&[(0.0, 1000), (0.5, 1000), (1.2, 2000)]), 1.0).unwrap();
        assert_eq!(t.values(), &[16.0, 16.0]);
        assert_eq!(t.source_duration(), 1.2);
    }

    #[test]
    fn bins_single_empty_frame() {
        let t = bin_frames(&log(&[(0.0, 0)]), 1.0).unwrap();
        assert_eq!(t.values(), &[0.0]);
    }

    #[test]
    fn bins_constant_25fps() {
        let frames: Vec<(f64, u64)> = (0..300).map(|i| (i as f64 * 0.04, 625)).collect();
        let t = bin_frames(&log(&frames), 1.0).unwrap();
        assert_eq!(t.len(), 12);
        for v in t.values() {
            assert!((v - 125.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn bin_errors() {
        assert_eq!(bin_frames(&log(&[]), 1.0), Err(TraceError::EmptyLog));
        assert!(matches!(bin_frames(&log(&[(0.0, 1)]), 0.0), Err(TraceError::InvalidInterval(_))));
        let bad = FrameLog::new("v", ItagDescriptor::unspecified(), vec![Frame::new(-1.0, 5)], None);
        assert!(matches!(bad, Err(TraceError::MalformedLog(_))));
    }

    #[test]
    fn boundary_frame_goes_to_later_bucket() {
        let t = bin_frames(&log(&[(0.0, 125), (1.0, 250)]), 1.0).unwrap();
        assert_eq!(t.values(), &[1.0, 2.0]);
    }

    #[test]
    fn declared_duration_extends_source_but_not_buckets() {
        let l = FrameLog::new("v", ItagDescriptor::unspecified(), vec![Frame::new(0.2, 10)], Some(5.0)).unwrap();
        let t = bin_frames(&l, 1.0).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.source_duration(), 5.0);
        assert!(FrameLog::new("v", ItagDescriptor::unspecified(), vec![Frame::new(7.0, 10)], Some(5.0)).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = trace_stats(&trace(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!((s.mean_kbps, s.stddev_kbps, s.burstiness), (5.0, 0.0, Some(0.0)));
        let s = trace_stats(&trace(&[1.0, 3.0])).unwrap();
        assert_eq!((s.mean_kbps, s.stddev_kbps, s.burstiness), (2.0, 1.0, Some(0.5)));
        let s = trace_stats(&trace(&[0.0, 0.0])).unwrap();
        assert_eq!(s.mean_kbps, 0.0);
        assert_eq!(s.burstiness, None);
        assert_eq!(trace_stats(&trace(&[])), Err(TraceError::EmptyTrace));
    }

    #[test]
    fn short_tail_bucket_is_dropped_from_stats() {
        let t = BitrateTrace::with_source_duration(1.0, vec![10.0, 10.0, 1.0], 2.3).unwrap();
        let s = trace_stats(&t).unwrap();
        assert_eq!(s.mean_kbps, 10.0);
        assert_eq!(s.duration, 2.0);
        // threshold is configurable
        let s = trace_stats_with(&t, 0.2).unwrap();
        assert_eq!(s.mean_kbps, 7.0);
    }

    #[test]
    fn truncate_examples() {
        let t = trace(&vec![1.0; 120]);
        assert_eq!(truncate(&t, 180.0), t);
        let t = trace(&(0..600).map(|i| i as f64).collect::<Vec<_>>());
        let cut = truncate(&t, 180.0);
        assert_eq!(cut.len(), 180);
        assert_eq!(cut.values()[179], 179.0);
        assert_eq!(cut.source_duration(), 180.0);
        let t = BitrateTrace::with_source_duration(1.0, vec![1.0; 181], 180.5).unwrap();
        assert_eq!(truncate(&t, 180.0).len(), 180);
    }

    #[test]
    fn pearson_examples() {
        let a = trace(&[1.0, 2.0, 3.0]);
        assert_eq!(pearson(&a, &a).unwrap(), 1.0);
        assert!((pearson(&a, &trace(&[3.0, 2.0, 1.0])).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&a, &trace(&[10.0, 20.0, 30.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pearson(&a, &trace(&[1.0, 2.0])), Err(TraceError::LengthMismatch(3, 2)));
        assert_eq!(pearson(&a, &trace(&[4.0, 4.0, 4.0])), Err(TraceError::UndefinedCorrelation));
        assert_eq!(pearson(&trace(&[1.0]), &trace(&[2.0])), Err(TraceError::TooShort));
    }

    proptest! {
        #[test]
        fn binning_conserves_bytes(
            sizes in prop::collection::vec(0u64..200_000, 1..200),
            gaps in prop::collection::vec(0.0f64..0.3, 200),
            interval in 0.1f64..3.0,
        ) {
            let mut pts = 0.0;
            let frames: Vec<Frame> = sizes.iter().zip(&gaps).map(|(&s, &g)| {
                pts += g;
                Frame::new(pts, s)
            }).collect();
            let l = FrameLog::new("p", ItagDescriptor::unspecified(), frames, None).unwrap();
            let t = bin_frames(&l, interval).unwrap();
            let total = l.total_bytes() as f64;
            let recovered = interval * t.values().iter().sum::<f64>() / 8.0 * 1000.0;
            prop_assert!((recovered - total).abs() <= 1e-6 * total.max(1.0));
        }

        #[test]
        fn burstiness_is_scale_invariant(
            values in prop::collection::vec(0.0f64..1e4, 2..100),
            c in 1e-3f64..1e3,
        ) {
            let a = trace_stats(&trace(&values)).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let b = trace_stats(&trace(&scaled)).unwrap();
            match (a.burstiness, b.burstiness) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0)),
                (None, None) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }

        #[test]
        fn truncate_is_idempotent(len in 1usize..500, cutoff in 1.0f64..400.0, interval in 0.25f64..2.0) {
            let t = BitrateTrace::new(interval, vec![3.0; len]).unwrap();
            let once = truncate(&t, cutoff);
            prop_assert_eq!(truncate(&once, cutoff), once);
        }

        #[test]
        fn pearson_of_positive_rescale_is_one(
            values in prop::collection::vec(0.0f64..1e4, 2..100),
            scale in 1e-3f64..1e3,
        ) {
            prop_assume!(values.iter().any(|v| (v - values[0]).abs() > 1e-6));
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let r = pearson_values(&values, &scaled).unwrap();
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }
}
