//! Corpus directories: `<id>.json` metadata per video plus one
//! `<id>_<resolution>.csv` frame log per available resolution.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::SyntheticVideo;
use crate::framelog_io::{read_framelog_csv, write_framelog_csv, FramelogError};
use crate::itag::{Container, ItagDescriptor, Resolution};
use crate::trace::{bin_frames, BitrateTrace, Frame, FrameLog, TraceError};

#[derive(Debug, Error)]
pub enum CorpusIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Framelog { path: PathBuf, source: FramelogError },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusIoError + '_ {
    move |source| CorpusIoError::Io { path: path.to_path_buf(), source }
}

/// One frame per bucket carrying that bucket's bytes (rounded).
pub fn trace_to_framelog(video_id: &str, itag: ItagDescriptor, trace: &BitrateTrace) -> Result<FrameLog, TraceError> {
    let iv = trace.interval();
    let frames = trace
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| Frame::new(i as f64 * iv, (v * iv * 1000.0 / 8.0).round() as u64))
        .collect();
    FrameLog::new(video_id, itag, frames, Some(trace.source_duration()))
}

pub fn trace_from_framelog(log: &FrameLog, interval: f64) -> Result<BitrateTrace, TraceError> {
    bin_frames(log, interval)
}

pub fn trace_file_name(id: &str, res: Resolution) -> String {
    format!("{id}_{res}.csv")
}

pub fn write_corpus_dir(dir: &Path, corpus: &[SyntheticVideo]) -> Result<(), CorpusIoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for v in corpus {
        let path = dir.join(format!("{}.json", v.id));
        let json = serde_json::to_vec_pretty(v).map_err(|source| CorpusIoError::Json { path: path.clone(), source })?;
        fs::write(&path, json).map_err(io_err(&path))?;
        for r in v.available() {
            let Some(trace) = &r.trace else { continue };
            let itag = ItagDescriptor::for_stream(r.resolution, Container::Mp4, true);
            let log = trace_to_framelog(&v.id, itag, trace)?;
            let path = dir.join(trace_file_name(&v.id, r.resolution));
            fs::write(&path, write_framelog_csv(&log)).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

/// Loads every `*.json` video in `dir` with whatever traces exist beside it,
/// ordered by index.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<SyntheticVideo>, CorpusIoError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut corpus = Vec::with_capacity(paths.len());
    for path in paths {
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let mut v: SyntheticVideo =
            serde_json::from_slice(&bytes).map_err(|source| CorpusIoError::Json { path: path.clone(), source })?;
        for r in v.variants.iter_mut().filter(|r| r.available) {
            let tpath = dir.join(trace_file_name(&v.id, r.resolution));
            if !tpath.exists() {
                continue;
            }
            let bytes = fs::read(&tpath).map_err(io_err(&tpath))?;
            let log = read_framelog_csv(&bytes).map_err(|source| CorpusIoError::Framelog { path: tpath.clone(), source })?;
            r.trace = Some(trace_from_framelog(&log, 1.0)?);
        }
        corpus.push(v);
    }
    corpus.sort_by_key(|v| v.index);
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_corpus, PopulationProfile};

    #[test]
    fn corpus_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = PopulationProfile::default();
        let corpus = synth_corpus(12, &p, 77).unwrap();
        write_corpus_dir(dir.path(), &corpus).unwrap();
        let back = read_corpus_dir(dir.path()).unwrap();
        assert_eq!(back.len(), corpus.len());
        for (a, b) in corpus.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.duration, b.duration);
            for (ra, rb) in a.variants.iter().zip(&b.variants) {
                assert_eq!(ra.mp4_size_mb, rb.mp4_size_mb);
                match (&ra.trace, &rb.trace) {
                    (Some(ta), Some(tb)) => {
                        assert_eq!(ta.len(), tb.len());
                        // byte rounding moves each bucket by at most 4 bits
                        for (x, y) in ta.values().iter().zip(tb.values()) {
                            assert!((x - y).abs() <= 0.004 + 1e-9);
                        }
                    }
                    (None, None) => {}
                    _ => panic!("trace presence differs"),
                }
            }
        }
    }
}
