//! Traffic generator: serves pseudo-random bytes whose per-interval volume
//! follows a stored frame log, rescaled to whatever mean bitrate the client
//! asks for. Only the lowest resolution's frame log is kept; higher
//! resolutions are obtained by upscaling to their advertised mean.

mod server;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use vidmeter_core::scale::scale_to;
use vidmeter_core::synth::{read_corpus_dir, trace_to_framelog, CorpusIoError, SyntheticVideo};
use vidmeter_core::{bin_frames, BitrateTrace, FrameLog, ItagDescriptor, Container};

pub use server::{router, serve, spawn};

/// Pacing granularity, seconds.
pub const PACING_INTERVAL: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("unknown video {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("invalid catalog entry {0}: {1}")]
    InvalidEntry(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub id: String,
    pub framelog: FrameLog,
    /// Advertised mean bitrate per resolution label, kbps.
    pub advertised_kbps: BTreeMap<String, f64>,
    trace: BitrateTrace,
}

impl CatalogEntry {
    pub fn new(id: impl Into<String>, framelog: FrameLog, advertised_kbps: BTreeMap<String, f64>) -> Result<Self, ServiceError> {
        let id = id.into();
        let invalid = |m: String| ServiceError::InvalidEntry(id.clone(), m);
        if framelog.is_empty() {
            return Err(invalid("empty frame log".into()));
        }
        if let Some((res, v)) = advertised_kbps.iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(invalid(format!("advertised mean for {res} is {v}")));
        }
        let trace = bin_frames(&framelog, PACING_INTERVAL).map_err(|e| invalid(e.to_string()))?;
        if trace.mean().is_none_or(|m| m <= 0.0) {
            return Err(invalid("stored trace carries no bytes".into()));
        }
        Ok(Self { id, framelog, advertised_kbps, trace })
    }

    /// Stored per-interval bitrates, kbps.
    pub fn trace(&self) -> &BitrateTrace {
        &self.trace
    }

    pub fn stored_mean_kbps(&self) -> f64 {
        self.trace.mean().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogListing {
    pub id: String,
    pub duration: f64,
    pub stored_mean_kbps: f64,
    pub advertised_kbps: BTreeMap<String, f64>,
}

/// Read-only set of entries keyed by video id.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: BTreeMap<String, CatalogEntry>,
}

impl Catalog {
    pub fn new(entries: impl IntoIterator<Item = CatalogEntry>) -> Self {
        Self { entries: entries.into_iter().map(|e| (e.id.clone(), e)).collect() }
    }

    /// Keeps the lowest available resolution's trace of every video that has one.
    pub fn from_corpus(corpus: &[SyntheticVideo]) -> Result<Self, ServiceError> {
        let mut entries = Vec::new();
        for v in corpus {
            let (Some(base), Some(trace)) = (v.base(), v.base_trace()) else { continue };
            let itag = ItagDescriptor::for_stream(base.resolution, Container::Mp4, true);
            let log = trace_to_framelog(&v.id, itag, trace).map_err(|e| ServiceError::InvalidEntry(v.id.clone(), e.to_string()))?;
            let advertised = v.available().map(|r| (r.resolution.to_string(), r.mean_kbps)).collect();
            entries.push(CatalogEntry::new(v.id.clone(), log, advertised)?);
        }
        Ok(Self::new(entries))
    }

    /// Loads a corpus directory as written by the synthesizer.
    pub fn load_dir(dir: &Path) -> Result<Self, CatalogError> {
        let corpus = read_corpus_dir(dir)?;
        Ok(Self::from_corpus(&corpus)?)
    }

    pub fn get(&self, id: &str) -> Result<&CatalogEntry, ServiceError> {
        self.entries.get(id).ok_or_else(|| ServiceError::NotFound(id.into()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn listing(&self) -> Vec<CatalogListing> {
        self.entries
            .values()
            .map(|e| CatalogListing {
                id: e.id.clone(),
                duration: e.framelog.declared_duration.unwrap_or(e.trace.source_duration()),
                stored_mean_kbps: e.stored_mean_kbps(),
                advertised_kbps: e.advertised_kbps.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Io(#[from] CorpusIoError),
    #[error(transparent)]
    Entry(#[from] ServiceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Chunk {
    /// Seconds after response start.
    pub send_at: f64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub chunks: Vec<Chunk>,
}

impl Schedule {
    pub fn total_bytes(&self) -> u64 {
        self.chunks.iter().map(|c| c.bytes).sum()
    }

    /// Hex SHA-256 over one `send_at bytes` line per chunk.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.chunks {
            h.update(format!("{:.6} {}\n", c.send_at, c.bytes).as_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Chunk schedule for `entry` rescaled to `target_kbps`.
///
/// Chunk sizes come from rounding the cumulative byte count, so each chunk
/// is within one byte of its exact share and the total is the rounded exact
/// total.
pub fn shape_schedule(entry: &CatalogEntry, target_kbps: f64) -> Result<Schedule, ServiceError> {
    if !(target_kbps > 0.0 && target_kbps.is_finite()) {
        return Err(ServiceError::BadRequest(format!("mean_kbps must be positive, got {target_kbps}")));
    }
    let scaled = scale_to(&entry.trace, target_kbps).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let iv = scaled.interval();
    let mut cum = 0.0;
    let mut sent = 0u64;
    let chunks = scaled
        .values()
        .iter()
        .enumerate()
        .map(|(i, kbps)| {
            cum += kbps * iv * 1000.0 / 8.0;
            let upto = cum.round() as u64;
            let bytes = upto - sent;
            sent = upto;
            Chunk { send_at: i as f64 * iv, bytes }
        })
        .collect();
    Ok(Schedule { chunks })
}

/// Payload seed derived from the video id.
pub fn payload_seed(id: &str) -> u64 {
    let d = Sha256::digest(id.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vidmeter_core::Frame;

    pub(crate) fn entry(id: &str, kbps: &[f64]) -> CatalogEntry {
        let frames = kbps.iter().enumerate().map(|(i, k)| Frame::new(i as f64, (k * 1000.0 / 8.0) as u64)).collect();
        let log = FrameLog::new(id, ItagDescriptor::unspecified(), frames, None).unwrap();
        CatalogEntry::new(id, log, BTreeMap::from([("360p".to_string(), 4.0)])).unwrap()
    }

    #[test]
    fn schedule_examples() {
        let e = entry("a", &[2.0, 4.0, 6.0]);
        let s = shape_schedule(&e, 8.0).unwrap();
        assert_eq!(s.chunks.iter().map(|c| c.bytes).collect::<Vec<_>>(), vec![500, 1000, 1500]);
        assert_eq!(s.chunks.iter().map(|c| c.send_at).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
        let same = shape_schedule(&e, 4.0).unwrap();
        assert_eq!(same.chunks.iter().map(|c| c.bytes).collect::<Vec<_>>(), vec![250, 500, 750]);
        assert!(matches!(shape_schedule(&e, 0.0), Err(ServiceError::BadRequest(_))));
        assert!(matches!(shape_schedule(&e, f64::NAN), Err(ServiceError::BadRequest(_))));
        assert_eq!(s.checksum(), shape_schedule(&e, 8.0).unwrap().checksum());
        assert_ne!(s.checksum(), same.checksum());
    }

    #[test]
    fn totals_round_once() {
        let e = entry("b", &[1000.0, 3000.0, 500.0, 2200.0, 10.0, 777.0]);
        for target in [1.0, 33.3, 917.7, 4321.0] {
            let s = shape_schedule(&e, target).unwrap();
            let exact = target * 6.0 * 1000.0 / 8.0;
            assert!((s.total_bytes() as f64 - exact).abs() <= 0.5 + 1e-6);
            let scaled = scale_to(e.trace(), target).unwrap();
            for (c, k) in s.chunks.iter().zip(scaled.values()) {
                assert!((c.bytes as f64 - k * 125.0).abs() <= 1.0 + 1e-6);
            }
        }
    }

    #[test]
    fn catalog_lookup() {
        let cat = Catalog::new([entry("x", &[8.0, 8.0])]);
        assert_eq!(cat.get("y"), Err(ServiceError::NotFound("y".into())));
        assert_eq!(cat.listing()[0].stored_mean_kbps, 8.0);
        let log = FrameLog::new("z", ItagDescriptor::unspecified(), vec![Frame::new(0.0, 0)], None).unwrap();
        assert!(CatalogEntry::new("z", log, BTreeMap::new()).is_err());
    }
}
