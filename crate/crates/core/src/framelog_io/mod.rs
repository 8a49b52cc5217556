//! Frame-log serialization and extraction from MP4 containers.

mod csv;
pub mod mp4;

use thiserror::Error;

use crate::trace::TraceError;

pub use self::csv::{read_framelog_csv, write_framelog_csv, CSV_HEADER};
pub use self::mp4::{parse_mp4, parse_sample_table, Mp4SampleTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FramelogError {
    #[error("bad CSV header: {0}")]
    SchemaError(String),
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("frame log is empty")]
    EmptyLog,
    #[error("malformed frame log: {0}")]
    MalformedLog(String),
    #[error("box at offset {0} runs past the end of its parent")]
    TruncatedBox(u64),
    #[error("invalid box at offset {offset}: {reason}")]
    InvalidBox { offset: u64, reason: String },
    #[error("no video track with samples")]
    NoVideoTrack,
    #[error("inconsistent sample table: {0}")]
    InconsistentSampleTable(String),
    #[error("more than {0} samples")]
    TooManySamples(usize),
}

impl From<TraceError> for FramelogError {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::EmptyLog => FramelogError::EmptyLog,
            TraceError::MalformedLog(m) => FramelogError::MalformedLog(m),
            other => FramelogError::MalformedLog(other.to_string()),
        }
    }
}
