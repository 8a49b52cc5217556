//! Bitrate traces, duration and size fitting, trace scaling, synthetic
//! corpora, playout simulation and measurement-cycle orchestration for
//! video streaming measurements.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod framelog_io;
pub mod distfit;
pub mod itag;
pub mod orchestrator;
pub mod playout;
pub mod scale;
pub mod synth;
pub mod trace;

pub use itag::{Container, ItagDescriptor, Resolution};
pub use trace::{bin_frames, pearson, trace_stats, truncate, BitrateTrace, Frame, FrameLog, TraceError, TraceStats};
