//! Fluid playout simulation: download a media trace over a link into a
//! playout buffer and record startup delay and stalls.
//!
//! The download is summarized by the arrival curve `A(m)`, the wall time at
//! which media position `m` has fully arrived. Playback that started at wall
//! time `t0` from position `p0` is on time while `A(m) <= m + (t0 - p0)`.
//!
//! A stall ends at the earlier of two moments: `rebuffer_target` seconds of
//! media are buffered, or the remaining media can play through to the end
//! without stalling again. With `rebuffer_target = 0` only the second rule
//! applies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{truncate, BitrateTrace, TraceStats};

const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlayoutError {
    #[error("media trace is empty")]
    EmptyMedia,
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("link interval {link} does not match media interval {media}")]
    IntervalMismatch { link: f64, media: f64 },
    #[error("invalid player configuration: {0}")]
    InvalidConfig(String),
    #[error("media has zero mean bitrate")]
    ZeroMeanTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Capacity {
    /// Kilobits per second.
    Constant(f64),
    /// Per-interval capacities in kbps; the last value holds afterwards.
    Trace { interval: f64, kbps: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub capacity: Capacity,
    /// Seconds before the first bit arrives.
    pub latency: f64,
}

impl LinkModel {
    pub fn constant(kbps: f64) -> Self {
        Self { capacity: Capacity::Constant(kbps), latency: 0.0 }
    }

    pub fn trace(interval: f64, kbps: Vec<f64>) -> Self {
        Self { capacity: Capacity::Trace { interval, kbps }, latency: 0.0 }
    }

    pub fn with_latency(mut self, latency: f64) -> Self {
        self.latency = latency;
        self
    }

    fn validate(&self, media_interval: f64) -> Result<(), PlayoutError> {
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err(PlayoutError::InvalidLink(format!("latency {}", self.latency)));
        }
        let ok = |c: &f64| c.is_finite() && *c >= 0.0;
        match &self.capacity {
            Capacity::Constant(c) if !ok(c) => Err(PlayoutError::InvalidLink(format!("capacity {c}"))),
            Capacity::Constant(_) => Ok(()),
            Capacity::Trace { kbps, .. } if kbps.is_empty() => Err(PlayoutError::InvalidLink("empty capacity trace".into())),
            Capacity::Trace { kbps, .. } if !kbps.iter().all(ok) => {
                Err(PlayoutError::InvalidLink("capacities must be finite and non-negative".into()))
            }
            Capacity::Trace { interval, .. } if (interval - media_interval).abs() > 1e-12 => {
                Err(PlayoutError::IntervalMismatch { link: *interval, media: media_interval })
            }
            Capacity::Trace { .. } => Ok(()),
        }
    }

    /// Piece `k` of the capacity schedule: `(end, kbps)`; piece 0 is the
    /// latency gap when there is one.
    fn piece(&self, k: usize) -> (f64, f64) {
        let k = if self.latency > 0.0 {
            if k == 0 {
                return (self.latency, 0.0);
            }
            k - 1
        } else {
            k
        };
        match &self.capacity {
            Capacity::Constant(c) => (f64::INFINITY, *c),
            Capacity::Trace { interval, kbps } => {
                if k + 1 >= kbps.len() {
                    (f64::INFINITY, kbps[kbps.len() - 1])
                } else {
                    (self.latency + (k + 1) as f64 * interval, kbps[k])
                }
            }
        }
    }

    /// Kilobits deliverable in `[0, t]`.
    pub fn kbits_by(&self, t: f64) -> f64 {
        let mut total = 0.0;
        let mut start = 0.0;
        let mut k = 0;
        while start < t {
            let (end, c) = self.piece(k);
            total += c * (end.min(t) - start);
            start = end;
            k += 1;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerConfig {
    /// Seconds of media buffered before playback starts.
    pub initial_buffer: f64,
    /// Seconds of media buffered before playback resumes after a stall.
    pub rebuffer_target: f64,
    /// Media beyond this many seconds is not downloaded.
    pub cutoff: f64,
    /// Wall-clock limit for one test, seconds.
    pub ceiling: f64,
}

impl Default for PlayerConfig {
    fn default() -> Self {
        Self { initial_buffer: 2.0, rebuffer_target: 2.0, cutoff: 180.0, ceiling: 3600.0 }
    }
}

impl PlayerConfig {
    pub fn validate(&self) -> Result<(), PlayoutError> {
        let fine = |x: f64| x.is_finite() && x >= 0.0;
        if !fine(self.initial_buffer) || !fine(self.rebuffer_target) {
            return Err(PlayoutError::InvalidConfig("buffer targets must be non-negative".into()));
        }
        if !(self.cutoff > 0.0) || !(self.ceiling > 0.0) {
            return Err(PlayoutError::InvalidConfig("cutoff and ceiling must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StallEvent {
    /// Media position where playback stopped, seconds.
    pub media_time: f64,
    /// Wall time the stall began, seconds.
    pub wall_time: f64,
    /// Wall seconds until playback resumed.
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayoutResult {
    pub startup_delay: f64,
    pub stall_events: Vec<StallEvent>,
    pub total_stall: f64,
    pub downloaded_bytes: u64,
    pub completed: bool,
    pub timed_out: bool,
    pub all_frames_on_time: bool,
    /// Media seconds simulated after the cutoff.
    pub media_duration: f64,
    pub download_end: Option<f64>,
    pub playback_end: Option<f64>,
}

/// Linear piece of the arrival curve over media `[m0, m1]`.
#[derive(Debug, Clone, Copy)]
struct Segment {
    m0: f64,
    m1: f64,
    t0: f64,
    t1: f64,
}

impl Segment {
    fn at(&self, m: f64) -> f64 {
        if m <= self.m0 {
            self.t0
        } else if m >= self.m1 {
            self.t1
        } else {
            self.t0 + (self.t1 - self.t0) * (m - self.m0) / (self.m1 - self.m0)
        }
    }
}

struct Arrival {
    segs: Vec<Segment>,
    /// Media position fully downloaded before the ceiling.
    reached: f64,
    total: f64,
    /// `suffix[k]` = sup of `A(m) - m` over segments `k..`.
    suffix: Vec<f64>,
}

impl Arrival {
    fn build(values: &[f64], iv: f64, link: &LinkModel, ceiling: f64) -> Self {
        let n = values.len();
        let total = n as f64 * iv;
        let mut segs = Vec::with_capacity(2 * n + 8);
        let (mut t, mut m) = (0.0f64, 0.0f64);
        let mut i = 0;
        let mut rem = values[0] * iv;
        let mut k = 0;
        let (mut end, mut cap) = link.piece(0);
        while i < n {
            if values[i] == 0.0 {
                segs.push(Segment { m0: m, m1: (i + 1) as f64 * iv, t0: t, t1: t });
                i += 1;
                m = i as f64 * iv;
                rem = if i < n { values[i] * iv } else { 0.0 };
                continue;
            }
            if t >= ceiling {
                break;
            }
            if end <= t {
                k += 1;
                (end, cap) = link.piece(k);
                continue;
            }
            if cap == 0.0 {
                if end.is_infinite() {
                    break;
                }
                t = end;
                continue;
            }
            let finish = rem / cap;
            let dt = finish.min(end - t).min(ceiling - t);
            if dt >= finish {
                let m1 = (i + 1) as f64 * iv;
                segs.push(Segment { m0: m, m1, t0: t, t1: t + finish });
                t += finish;
                i += 1;
                m = m1;
                rem = if i < n { values[i] * iv } else { 0.0 };
            } else {
                let dm = dt * cap / values[i];
                segs.push(Segment { m0: m, m1: m + dm, t0: t, t1: t + dt });
                rem -= dt * cap;
                t += dt;
                m += dm;
            }
        }
        let reached = if i >= n { total } else { m };
        let mut suffix = vec![if reached < total { f64::INFINITY } else { f64::NEG_INFINITY }; segs.len() + 1];
        for j in (0..segs.len()).rev() {
            let s = &segs[j];
            suffix[j] = suffix[j + 1].max(s.t0 - s.m0).max(s.t1 - s.m1);
        }
        Self { segs, reached, total, suffix }
    }

    /// Index of the segment holding `m` from the right (`m0 <= m < m1`).
    fn seg_right(&self, m: f64) -> Option<usize> {
        if m >= self.reached {
            return None;
        }
        let k = self.segs.partition_point(|s| s.m1 <= m);
        (k < self.segs.len()).then_some(k)
    }

    /// Right limit `A(m+)`; infinite past the downloaded range.
    fn right(&self, m: f64) -> f64 {
        self.seg_right(m).map_or(f64::INFINITY, |k| self.segs[k].at(m))
    }

    /// Arrival time of everything up to and including `m`.
    fn left(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return self.segs.first().map_or(f64::INFINITY, |s| s.t0.min(self.right(0.0)));
        }
        if m > self.reached + EPS {
            return f64::INFINITY;
        }
        let k = self.segs.partition_point(|s| s.m1 < m);
        if k >= self.segs.len() {
            return self.segs.last().map_or(f64::INFINITY, |s| s.t1);
        }
        self.segs[k].at(m)
    }

    /// First `m >= p` at which `A(m) - m` rises above `c`.
    fn first_late(&self, p: f64, c: f64) -> Option<f64> {
        let start = self.segs.partition_point(|s| s.m1 <= p);
        for s in &self.segs[start..] {
            let ms = s.m0.max(p);
            let fs = s.at(ms) - ms;
            if fs > c + EPS {
                return Some(ms);
            }
            let fe = s.t1 - s.m1;
            if fe > c + EPS {
                let slope = (fe - fs) / (s.m1 - ms);
                return Some((ms + (c - fs) / slope).clamp(ms, s.m1));
            }
        }
        (self.reached < self.total).then_some(self.reached.max(p))
    }

    /// `sup_{m >= p} A(m+) - m`.
    fn sup_lateness(&self, p: f64) -> f64 {
        if p >= self.reached {
            return if self.reached < self.total { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        let k = self.segs.partition_point(|s| s.m1 <= p);
        let s = &self.segs[k];
        (s.at(p) - p).max(s.t1 - s.m1).max(self.suffix[k + 1])
    }
}

fn media_kbits(values: &[f64], iv: f64, m: f64) -> f64 {
    let full = ((m / iv).floor() as usize).min(values.len());
    let mut bits: f64 = values[..full].iter().sum::<f64>() * iv;
    if full < values.len() {
        bits += values[full] * (m - full as f64 * iv);
    }
    bits
}

/// Simulates one download of `media` (cut at `cfg.cutoff`) over `link`.
pub fn simulate_download(media: &BitrateTrace, link: &LinkModel, cfg: &PlayerConfig) -> Result<PlayoutResult, PlayoutError> {
    cfg.validate()?;
    link.validate(media.interval())?;
    let media = truncate(media, cfg.cutoff);
    if media.is_empty() {
        return Err(PlayoutError::EmptyMedia);
    }
    let iv = media.interval();
    let values = media.values();
    let arrival = Arrival::build(values, iv, link, cfg.ceiling);
    let total = arrival.total;
    let total_bytes = (values.iter().sum::<f64>() * iv * 125.0).round() as u64;
    let downloaded_bytes = if arrival.reached >= total {
        total_bytes
    } else {
        ((media_kbits(values, iv, arrival.reached) * 125.0).round() as u64).min(total_bytes)
    };
    let download_end = (arrival.reached >= total).then(|| arrival.left(total));

    let mut result = PlayoutResult {
        startup_delay: 0.0,
        stall_events: Vec::new(),
        total_stall: 0.0,
        downloaded_bytes,
        completed: false,
        timed_out: false,
        all_frames_on_time: false,
        media_duration: total,
        download_end,
        playback_end: None,
    };

    let t0 = if cfg.initial_buffer == 0.0 { arrival.right(0.0) } else { arrival.left(cfg.initial_buffer.min(total)) };
    if !(t0 <= cfg.ceiling) {
        result.startup_delay = cfg.ceiling;
        result.timed_out = true;
        return Ok(result);
    }
    result.startup_delay = t0;

    let mut p = 0.0;
    let mut c = t0;
    while let Some(m) = arrival.first_late(p, c) {
        let t_stall = m + c;
        if t_stall >= cfg.ceiling {
            result.timed_out = true;
            break;
        }
        let t_through = m + arrival.sup_lateness(m);
        let t_buffer =
            if cfg.rebuffer_target > 0.0 { arrival.left((m + cfg.rebuffer_target).min(total)) } else { f64::INFINITY };
        let resume = t_stall.max(t_buffer.min(t_through));
        if !(resume <= cfg.ceiling) {
            result.stall_events.push(StallEvent { media_time: m, wall_time: t_stall, duration: cfg.ceiling - t_stall });
            result.timed_out = true;
            break;
        }
        result.stall_events.push(StallEvent { media_time: m, wall_time: t_stall, duration: resume - t_stall });
        p = m;
        c = resume - m;
    }
    result.total_stall = result.stall_events.iter().map(|s| s.duration).sum();
    if !result.timed_out {
        let end = total + c;
        if end <= cfg.ceiling {
            result.completed = true;
            result.playback_end = Some(end);
        } else {
            result.timed_out = true;
        }
    }
    result.all_frames_on_time = result.completed && result.stall_events.is_empty();
    Ok(result)
}

/// Class edges used to bucket test results. A value's class is the number
/// of edges at or below it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    /// Seconds.
    pub duration_edges: Vec<f64>,
    /// Kilobits per second.
    pub bitrate_edges_kbps: Vec<f64>,
    pub burstiness_edges: Vec<f64>,
}

impl Default for ClassThresholds {
    fn default() -> Self {
        Self {
            duration_edges: vec![72.0, 180.0, 387.0, 600.0],
            bitrate_edges_kbps: vec![500.0, 1000.0, 2500.0, 5000.0, 7000.0],
            burstiness_edges: vec![0.2, 0.5, 1.0],
        }
    }
}

fn class_of(edges: &[f64], x: f64) -> usize {
    edges.iter().filter(|&&e| e <= x).count()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bucket {
    pub duration_class: usize,
    pub bitrate_class: usize,
    pub burstiness_class: usize,
    pub no_stall: bool,
}

impl Bucket {
    pub fn label(&self) -> String {
        format!(
            "d{}-r{}-b{}-{}",
            self.duration_class,
            self.bitrate_class,
            self.burstiness_class,
            if self.no_stall { "no-stall" } else { "stall" }
        )
    }
}

/// Outcome of one test together with the traits of the tested media.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub video_id: String,
    pub cycle: u32,
    pub ma_id: u32,
    pub sequence: u64,
    pub instruction: u8,
    /// Full length of the video, seconds.
    pub video_duration: f64,
    pub tested_duration: f64,
    pub cutoff: f64,
    pub startup_delay: f64,
    pub stall_count: usize,
    pub total_stall: f64,
    pub completed: bool,
    pub timed_out: bool,
    pub mean_kbps: f64,
    pub burstiness: f64,
    pub bucket: Bucket,
}

/// Bundles a playout result with the media statistics it was run on.
pub fn verdict(
    result: &PlayoutResult,
    media_stats: &TraceStats,
    video_duration: f64,
    cutoff: f64,
    thresholds: &ClassThresholds,
) -> Result<TestRecord, PlayoutError> {
    let burstiness = media_stats.burstiness.ok_or(PlayoutError::ZeroMeanTrace)?;
    let bucket = Bucket {
        duration_class: class_of(&thresholds.duration_edges, video_duration),
        bitrate_class: class_of(&thresholds.bitrate_edges_kbps, media_stats.mean_kbps),
        burstiness_class: class_of(&thresholds.burstiness_edges, burstiness),
        no_stall: result.stall_events.is_empty(),
    };
    Ok(TestRecord {
        video_id: String::new(),
        cycle: 0,
        ma_id: 0,
        sequence: 0,
        instruction: 0,
        video_duration,
        tested_duration: result.media_duration,
        cutoff,
        startup_delay: result.startup_delay,
        stall_count: result.stall_events.len(),
        total_stall: result.total_stall,
        completed: result.completed,
        timed_out: result.timed_out,
        mean_kbps: media_stats.mean_kbps,
        burstiness,
        bucket,
    })
}

pub mod reference {
    //! Slow fixed-step reference simulator used to cross-check
    //! [`simulate_download`](super::simulate_download).
    //!
    //! Arrival times are obtained by integrating the link on a wall-clock grid
    //! and inverting the cumulative media curve on a media grid, both with
    //! step `h`; playback is then stepped on the wall-clock grid.

    use super::{LinkModel, PlayerConfig};
    use crate::trace::{truncate, BitrateTrace};

    #[derive(Debug, Clone, PartialEq)]
    pub struct ReferenceResult {
        pub startup_delay: f64,
        /// `(media_time, wall_start, wall_end)` per stall.
        pub stalls: Vec<(f64, f64, f64)>,
        pub completed: bool,
        pub playback_end: Option<f64>,
    }

    struct Curve {
        /// Sorted `(media, wall)` samples of the arrival curve.
        pts: Vec<(f64, f64)>,
        /// `suffix[j]` = max of `wall - media` over samples `j..`.
        suffix: Vec<f64>,
        complete: bool,
        total: f64,
    }

    fn cum_media(values: &[f64], iv: f64, m: f64) -> f64 {
        let mut bits = 0.0;
        for (i, v) in values.iter().enumerate() {
            let a = i as f64 * iv;
            if m <= a {
                break;
            }
            bits += v * ((m - a).min(iv));
        }
        bits
    }

    impl Curve {
        fn build(values: &[f64], iv: f64, link: &LinkModel, ceiling: f64, h: f64) -> Self {
            let total = values.len() as f64 * iv;
            let media_bits = cum_media(values, iv, total);
            // Wall-clock grid of delivered kilobits.
            let steps = (ceiling / h).ceil() as usize;
            let mut wall = Vec::with_capacity(1024);
            let mut delivered = Vec::with_capacity(1024);
            for k in 0..=steps {
                let t = (k as f64 * h).min(ceiling);
                let d = link.kbits_by(t);
                wall.push(t);
                delivered.push(d);
                if d >= media_bits {
                    break;
                }
            }
            // Media grid of cumulative kilobits.
            let msteps = (total / h).round() as usize;
            let mgrid: Vec<f64> = (0..=msteps).map(|j| (j as f64 * h).min(total)).collect();
            let mbits: Vec<f64> = mgrid.iter().map(|&m| cum_media(values, iv, m)).collect();

            let arrival_of_bits = |b: f64| -> Option<f64> {
                let k = delivered.partition_point(|&d| d < b - 1e-9);
                if k >= delivered.len() {
                    return None;
                }
                if k == 0 {
                    return Some(wall[0]);
                }
                let (d0, d1) = (delivered[k - 1], delivered[k]);
                Some(wall[k - 1] + (wall[k] - wall[k - 1]) * ((b - d0) / (d1 - d0)).clamp(0.0, 1.0))
            };
            // Largest media position whose bits are within `b`.
            let media_of_bits = |b: f64| -> f64 {
                let j = mbits.partition_point(|&x| x <= b + 1e-9);
                if j == 0 {
                    return 0.0;
                }
                if j >= mbits.len() {
                    return total;
                }
                let (b0, b1) = (mbits[j - 1], mbits[j]);
                mgrid[j - 1] + (mgrid[j] - mgrid[j - 1]) * ((b - b0) / (b1 - b0)).clamp(0.0, 1.0)
            };

            let mut pts = Vec::new();
            let mut complete = true;
            for (j, &m) in mgrid.iter().enumerate() {
                match arrival_of_bits(mbits[j]) {
                    Some(t) => pts.push((m, t)),
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            for (k, &t) in wall.iter().enumerate() {
                let m = media_of_bits(delivered[k]);
                if delivered[k] <= media_bits + 1e-9 {
                    pts.push((m, t));
                }
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            // A sample at (m, t) only counts once all media before m has arrived.
            let mut running = f64::NEG_INFINITY;
            for p in pts.iter_mut() {
                running = running.max(p.1);
                p.1 = running;
            }
            let reached = if complete { total } else { media_of_bits(*delivered.last().unwrap_or(&0.0)) };
            pts.retain(|p| p.0 <= reached + 1e-12);
            let mut suffix = vec![if complete { f64::NEG_INFINITY } else { f64::INFINITY }; pts.len() + 1];
            for j in (0..pts.len()).rev() {
                suffix[j] = suffix[j + 1].max(pts[j].1 - pts[j].0);
            }
            Self { pts, suffix, complete, total }
        }

        /// Time by which all media up to `m` has arrived.
        fn at(&self, m: f64) -> f64 {
            let j = self.pts.partition_point(|p| p.0 < m);
            if j >= self.pts.len() {
                return if self.complete && m <= self.total + 1e-12 {
                    self.pts.last().map_or(0.0, |p| p.1)
                } else {
                    f64::INFINITY
                };
            }
            if j == 0 || self.pts[j].0 == m {
                return self.pts[j].1;
            }
            let (a, b) = (self.pts[j - 1], self.pts[j]);
            if b.0 == a.0 {
                return b.1;
            }
            a.1 + (b.1 - a.1) * (m - a.0) / (b.0 - a.0)
        }

        /// Time after which media just beyond `m` keeps arriving.
        fn at_right(&self, m: f64) -> f64 {
            let j = self.pts.partition_point(|p| p.0 <= m);
            let here = if j > 0 && self.pts[j - 1].0 == m { self.pts[j - 1].1 } else { self.at(m) };
            here.max(self.at(m + 1e-9))
        }

        fn sup_from(&self, m: f64) -> f64 {
            let j = self.pts.partition_point(|p| p.0 < m);
            (self.at_right(m) - m).max(self.suffix[j])
        }
    }

    pub fn simulate(media: &BitrateTrace, link: &LinkModel, cfg: &PlayerConfig, h: f64) -> ReferenceResult {
        let media = truncate(media, cfg.cutoff);
        let values = media.values();
        let iv = media.interval();
        let curve = Curve::build(values, iv, link, cfg.ceiling, h);
        let total = curve.total;

        let t0 = if cfg.initial_buffer == 0.0 { curve.at_right(0.0) } else { curve.at(cfg.initial_buffer.min(total)) };
        let mut out = ReferenceResult { startup_delay: t0, stalls: Vec::new(), completed: false, playback_end: None };
        if !(t0 <= cfg.ceiling) {
            return out;
        }
        let (mut p, mut w) = (0.0f64, t0);
        loop {
            // Play in wall steps of h while the next media step has arrived.
            let mut stalled_at = None;
            while p < total {
                let step = h.min(total - p);
                let due = curve.at(p + step);
                if due <= w + step + 1e-7 {
                    p += step;
                    w += step;
                    continue;
                }
                // Late within this step: locate the crossing of A(m) - m with w - p.
                // Bisect rather than interpolate: A(m) - m may bend inside the
                // step and a resume threshold read off a steep curve would
                // amplify the error.
                let lag = w - p;
                let m = if curve.at_right(p) - p > lag + 1e-7 {
                    p
                } else {
                    let (mut lo, mut hi) = (p, p + step);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if curve.at(mid) - mid <= lag + 1e-9 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    lo
                };
                stalled_at = Some((m, m + lag));
                break;
            }
            let Some((m, t_stall)) = stalled_at else {
                out.completed = w <= cfg.ceiling;
                out.playback_end = out.completed.then_some(w);
                return out;
            };
            if t_stall >= cfg.ceiling {
                return out;
            }
            let t_through = m + curve.sup_from(m);
            let t_buffer =
                if cfg.rebuffer_target > 0.0 { curve.at((m + cfg.rebuffer_target).min(total)) } else { f64::INFINITY };
            let resume = t_stall.max(t_buffer.min(t_through));
            if !(resume <= cfg.ceiling) {
                out.stalls.push((m, t_stall, cfg.ceiling));
                return out;
            }
            out.stalls.push((m, t_stall, resume));
            p = m;
            w = resume;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::trace_stats;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn media(kbps: f64, secs: usize) -> BitrateTrace {
        BitrateTrace::new(1.0, vec![kbps; secs]).unwrap()
    }

    fn cfg(ib: f64, rb: f64) -> PlayerConfig {
        PlayerConfig { initial_buffer: ib, rebuffer_target: rb, ..Default::default() }
    }

    #[test]
    fn fast_link_starts_after_one_second() {
        let r = simulate_download(&media(1000.0, 10), &LinkModel::constant(2000.0), &cfg(2.0, 2.0)).unwrap();
        assert_eq!(r.startup_delay, 1.0);
        assert!(r.stall_events.is_empty() && r.completed && r.all_frames_on_time);
        assert_eq!(r.downloaded_bytes, 1_250_000);
    }

    #[test]
    fn matched_rate_never_stalls() {
        let r = simulate_download(&media(1000.0, 10), &LinkModel::constant(1000.0), &cfg(0.0, 2.0)).unwrap();
        assert_eq!(r.startup_delay, 0.0);
        assert!(r.stall_events.is_empty() && r.completed);
    }

    #[test]
    fn half_rate_worked_example() {
        let r = simulate_download(&media(1000.0, 10), &LinkModel::constant(500.0), &cfg(2.0, 2.0)).unwrap();
        assert_eq!(r.startup_delay, 4.0);
        assert_eq!(r.total_stall, 6.0);
        assert_eq!(r.stall_events.len(), 2);
        assert_eq!(r.stall_events[0], StallEvent { media_time: 4.0, wall_time: 8.0, duration: 4.0 });
        assert_eq!(r.stall_events[1], StallEvent { media_time: 8.0, wall_time: 16.0, duration: 2.0 });
        assert_eq!(r.playback_end, Some(20.0));
        assert!(r.completed && !r.all_frames_on_time);

        let stats = trace_stats(&media(1000.0, 10)).unwrap();
        let rec = verdict(&r, &stats, 10.0, 180.0, &ClassThresholds::default()).unwrap();
        assert_eq!(rec.total_stall, 6.0);
        assert!(!rec.bucket.no_stall);
    }

    #[test]
    fn zero_capacity_times_out() {
        let c = PlayerConfig { ceiling: 50.0, ..cfg(2.0, 2.0) };
        let r = simulate_download(&media(1000.0, 10), &LinkModel::constant(0.0), &c).unwrap();
        assert!(r.timed_out && !r.completed);
        assert_eq!(r.downloaded_bytes, 0);
        let r = simulate_download(&media(1000.0, 10), &LinkModel::trace(1.0, vec![2000.0, 2000.0, 0.0]), &c).unwrap();
        assert!(r.timed_out && !r.completed);
        assert_eq!(r.downloaded_bytes, 500_000);
        assert_eq!(r.stall_events.len(), 1);
        assert_eq!(r.stall_events[0].media_time, 4.0);
    }

    #[test]
    fn media_is_cut_at_cutoff() {
        let r = simulate_download(&media(100.0, 600), &LinkModel::constant(1000.0), &PlayerConfig::default()).unwrap();
        assert_eq!(r.media_duration, 180.0);
        assert_eq!(r.downloaded_bytes, 180 * 100 * 125);
    }

    #[test]
    fn latency_delays_startup() {
        let link = LinkModel::constant(2000.0).with_latency(0.5);
        let r = simulate_download(&media(1000.0, 10), &link, &cfg(2.0, 2.0)).unwrap();
        assert!((r.startup_delay - 1.5).abs() < 1e-12);
    }

    #[test]
    fn verdict_examples() {
        let r = simulate_download(&media(1000.0, 10), &LinkModel::constant(5000.0), &cfg(2.0, 2.0)).unwrap();
        let stats = trace_stats(&media(1000.0, 10)).unwrap();
        let rec = verdict(&r, &stats, 300.0, 180.0, &ClassThresholds::default()).unwrap();
        assert!(rec.bucket.no_stall);
        assert!(rec.bucket.label().ends_with("no-stall"));
        assert_eq!(rec.bucket.duration_class, 2);
        assert_eq!(rec.bucket.bitrate_class, 2);
        let zero = trace_stats(&media(0.0, 10)).unwrap();
        assert_eq!(verdict(&r, &zero, 10.0, 180.0, &ClassThresholds::default()), Err(PlayoutError::ZeroMeanTrace));
    }

    #[test]
    fn input_errors() {
        let m = media(1000.0, 10);
        assert!(matches!(
            simulate_download(&m, &LinkModel::trace(0.5, vec![1.0]), &cfg(2.0, 2.0)),
            Err(PlayoutError::IntervalMismatch { .. })
        ));
        assert!(matches!(simulate_download(&m, &LinkModel::constant(-1.0), &cfg(2.0, 2.0)), Err(PlayoutError::InvalidLink(_))));
        assert!(matches!(simulate_download(&m, &LinkModel::constant(1.0), &cfg(-1.0, 2.0)), Err(PlayoutError::InvalidConfig(_))));
        let empty = BitrateTrace::new(1.0, vec![]).unwrap();
        assert_eq!(simulate_download(&empty, &LinkModel::constant(1.0), &cfg(2.0, 2.0)), Err(PlayoutError::EmptyMedia));
    }

    pub(crate) fn random_case(seed: u64) -> (BitrateTrace, LinkModel, PlayerConfig) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(5..40);
        let mean = rng.random_range(200.0..3000.0);
        let values: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.05) { 0.0 } else { mean * rng.random_range(0.2..2.0) })
            .collect();
        let link = if rng.random_bool(0.3) {
            LinkModel::constant(mean * rng.random_range(0.4..1.6))
        } else {
            let k = rng.random_range(1..60);
            LinkModel::trace(
                1.0,
                (0..k).map(|_| if rng.random_bool(0.1) { 0.0 } else { mean * rng.random_range(0.2..2.5) }).collect(),
            )
        }
        .with_latency(rng.random_range(0..500) as f64 / 1000.0);
        let cfg = PlayerConfig {
            initial_buffer: rng.random_range(0..5) as f64 * 0.75,
            rebuffer_target: rng.random_range(0..5) as f64 * 0.75,
            ..Default::default()
        };
        (BitrateTrace::new(1.0, values).unwrap(), link, cfg)
    }

    #[test]
    fn matches_reference_on_random_cases() {
        for seed in 0..30 {
            let (m, link, c) = random_case(seed);
            let fast = simulate_download(&m, &link, &c).unwrap();
            let slow = reference::simulate(&m, &link, &c, 1e-3);
            assert!((fast.startup_delay - slow.startup_delay).abs() <= 1e-3, "seed {seed}");
            assert_eq!(fast.stall_events.len(), slow.stalls.len(), "seed {seed}: {fast:?} vs {slow:?}");
            for (a, b) in fast.stall_events.iter().zip(&slow.stalls) {
                assert!((a.wall_time - b.1).abs() <= 1e-3, "seed {seed}");
                assert!((a.wall_time + a.duration - b.2).abs() <= 1e-3, "seed {seed}");
            }
            assert_eq!(fast.completed, slow.completed);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn more_capacity_never_adds_stall(
            vals in prop::collection::vec(0.0f64..3000.0, 2..40),
            cap in 100.0f64..3000.0,
            extra in 0.0f64..2000.0,
            ib in 0.0f64..4.0,
            rb in 0.0f64..4.0,
        ) {
            let m = BitrateTrace::new(1.0, vals).unwrap();
            let c = cfg(ib, rb);
            let slow = simulate_download(&m, &LinkModel::constant(cap), &c).unwrap();
            let fast = simulate_download(&m, &LinkModel::constant(cap + extra), &c).unwrap();
            prop_assert!(fast.total_stall <= slow.total_stall + 1e-9);
        }

        #[test]
        fn capacity_above_media_rate_never_stalls(
            vals in prop::collection::vec(0.0f64..3000.0, 1..40),
            headroom in prop::collection::vec(0.0f64..500.0, 40),
        ) {
            let caps: Vec<f64> = vals.iter().zip(&headroom).map(|(v, h)| v + h).collect();
            let m = BitrateTrace::new(1.0, vals).unwrap();
            let r = simulate_download(&m, &LinkModel::trace(1.0, caps), &cfg(0.0, 2.0)).unwrap();
            prop_assert!(r.stall_events.is_empty());
            prop_assert!(r.completed);
        }

        #[test]
        fn conservation(vals in prop::collection::vec(0.0f64..3000.0, 1..40), cap in 0.0f64..3000.0) {
            let m = BitrateTrace::new(1.0, vals.clone()).unwrap();
            let c = PlayerConfig { ceiling: 60.0, ..cfg(2.0, 2.0) };
            let r = simulate_download(&m, &LinkModel::constant(cap), &c).unwrap();
            let deliverable = cap * 60.0 * 125.0;
            prop_assert!(r.downloaded_bytes as f64 <= deliverable + 1.0);
            let total = (vals.iter().sum::<f64>() * 125.0).round() as u64;
            if r.completed {
                prop_assert_eq!(r.downloaded_bytes, total);
            }
            let sum: f64 = r.stall_events.iter().map(|s| s.duration).sum();
            prop_assert!((sum - r.total_stall).abs() < 1e-9);
            for w in r.stall_events.windows(2) {
                prop_assert!(w[0].wall_time + w[0].duration <= w[1].wall_time + 1e-9);
            }
        }
    }
}
