//! Canonical CSV frame-log format.
//!
//! ```text
//! # video_id=abc123
//! # itag=18
//! # resolution=360p
//! # container=mp4
//! # has_audio=true
//! # declared_duration=12.5
//! index,pts_seconds,size_bytes,is_key
//! 0,0.000000,1000,
//! 1,0.040000,620,0
//! ```
//!
//! The `#` metadata lines are optional; missing keys fall back to an empty id
//! and an unspecified itag.

use std::fmt::Write as _;

use super::FramelogError;
use crate::itag::{Container, ItagDescriptor, Resolution};
use crate::trace::{Frame, FrameLog};

pub const CSV_HEADER: [&str; 4] = ["index", "pts_seconds", "size_bytes", "is_key"];

/// Formats a timestamp with at least six decimals, falling back to the
/// shortest exact representation when six are not enough.
fn format_pts(pts: f64) -> String {
    let fixed = format!("{pts:.6}");
    if fixed.parse::<f64>().ok() == Some(pts) {
        fixed
    } else {
        let exact = format!("{pts}");
        if exact.contains('.') {
            exact
        } else {
            format!("{exact}.000000")
        }
    }
}

pub fn write_framelog_csv(log: &FrameLog) -> Vec<u8> {
    let mut out = String::new();
    let itag = &log.itag;
    let _ = writeln!(out, "# video_id={}", log.video_id.replace(['\n', '\r'], " "));
    let _ = writeln!(out, "# itag={}", itag.itag);
    let _ = writeln!(out, "# resolution={}", itag.resolution);
    let _ = writeln!(out, "# container={}", itag.container);
    let _ = writeln!(out, "# has_audio={}", itag.has_audio);
    if let Some(d) = log.declared_duration {
        let _ = writeln!(out, "# declared_duration={}", format_pts(d));
    }
    out.push_str(&CSV_HEADER.join(","));
    out.push('\n');
    for (i, f) in log.frames().iter().enumerate() {
        let key = match f.is_key {
            None => "",
            Some(true) => "1",
            Some(false) => "0",
        };
        let _ = writeln!(out, "{i},{},{},{key}", format_pts(f.pts), f.size);
    }
    out.into_bytes()
}

struct Meta {
    video_id: String,
    itag: Option<u32>,
    resolution: Option<Resolution>,
    container: Option<Container>,
    has_audio: Option<bool>,
    declared_duration: Option<f64>,
}

fn parse_meta(lines: &[(u64, &str)]) -> Result<Meta, FramelogError> {
    let mut meta = Meta {
        video_id: String::new(),
        itag: None,
        resolution: None,
        container: None,
        has_audio: None,
        declared_duration: None,
    };
    for &(line, text) in lines {
        let body = text.trim_start_matches('#').trim();
        let Some((key, value)) = body.split_once('=') else { continue };
        let value = value.trim();
        let bad = |what: &str| FramelogError::ParseError { line, message: format!("invalid {what} `{value}`") };
        match key.trim() {
            "video_id" => meta.video_id = value.to_string(),
            "itag" => meta.itag = Some(value.parse().map_err(|_| bad("itag"))?),
            "resolution" => meta.resolution = Some(value.parse().map_err(|_| bad("resolution"))?),
            "container" => meta.container = Some(value.parse().map_err(|_| bad("container"))?),
            "has_audio" => meta.has_audio = Some(value.parse().map_err(|_| bad("has_audio"))?),
            "declared_duration" => {
                meta.declared_duration = Some(value.parse().map_err(|_| bad("declared_duration"))?)
            }
            _ => {}
        }
    }
    Ok(meta)
}

fn resolve_itag(meta: &Meta) -> ItagDescriptor {
    let known = meta.itag.and_then(ItagDescriptor::lookup);
    let base = known.unwrap_or_else(ItagDescriptor::unspecified);
    ItagDescriptor {
        itag: meta.itag.unwrap_or(0),
        resolution: meta.resolution.unwrap_or(base.resolution),
        container: meta.container.unwrap_or(base.container),
        has_audio: meta.has_audio.unwrap_or(base.has_audio),
    }
}

pub fn read_framelog_csv(bytes: &[u8]) -> Result<FrameLog, FramelogError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| FramelogError::ParseError { line: 1, message: format!("not UTF-8: {e}") })?;

    // Split off the `#` preamble; the first other non-blank line is the header.
    let mut preamble = Vec::new();
    let mut body_start = text.len();
    let mut header_line = 0;
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            preamble.push((i as u64 + 1, trimmed));
        } else if !trimmed.is_empty() {
            body_start = offset;
            header_line = i as u64;
            break;
        }
        offset += line.len();
    }
    let meta = parse_meta(&preamble)?;

    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(&bytes[body_start..]);
    let headers = reader
        .headers()
        .map_err(|e| FramelogError::SchemaError(e.to_string()))?
        .clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != CSV_HEADER {
        return Err(FramelogError::SchemaError(format!(
            "expected `{}`, found `{}`",
            CSV_HEADER.join(","),
            got.join(",")
        )));
    }

    let mut frames = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| FramelogError::ParseError {
            line: header_line + e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = header_line + record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        let err = |what: &str, v: &str| FramelogError::ParseError { line, message: format!("invalid {what} `{v}`") };
        if record.len() < 3 || record.len() > 4 {
            return Err(FramelogError::ParseError { line, message: format!("expected 4 columns, found {}", record.len()) });
        }
        cell(0).parse::<u64>().map_err(|_| err("index", cell(0)))?;
        let pts: f64 = cell(1).parse().map_err(|_| err("pts_seconds", cell(1)))?;
        if !pts.is_finite() {
            return Err(err("pts_seconds", cell(1)));
        }
        let size: u64 = cell(2).parse().map_err(|_| err("size_bytes", cell(2)))?;
        let is_key = match cell(3) {
            "" => None,
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            other => return Err(err("is_key", other)),
        };
        frames.push(Frame { pts, size, is_key });
    }
    if frames.is_empty() {
        return Err(FramelogError::EmptyLog);
    }
    let itag = resolve_itag(&meta);
    Ok(FrameLog::new(meta.video_id, itag, frames, meta.declared_duration)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture_a() -> FrameLog {
        let frames = [(0.0, 100), (0.1, 200), (0.2, 300), (0.3, 400)]
            .iter()
            .map(|&(p, s)| Frame::new(p, s))
            .collect();
        FrameLog::new("fixture-a", ItagDescriptor::lookup(134).unwrap(), frames, None).unwrap()
    }

    #[test]
    fn roundtrip_fixture_a() {
        let log = fixture_a();
        let bytes = write_framelog_csv(&log);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("index,pts_seconds,size_bytes,is_key\n0,0.000000,100,\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_framelog_csv(&bytes).unwrap(), log);
    }

    #[test]
    fn decreasing_pts_is_malformed() {
        let csv = "index,pts_seconds,size_bytes,is_key\n0,1.0,10,\n1,0.5,10,\n";
        assert!(matches!(read_framelog_csv(csv.as_bytes()), Err(FramelogError::MalformedLog(_))));
    }

    #[test]
    fn header_only_is_empty() {
        let csv = "index,pts_seconds,size_bytes,is_key\n";
        assert_eq!(read_framelog_csv(csv.as_bytes()), Err(FramelogError::EmptyLog));
    }

    #[test]
    fn wrong_header_is_schema_error() {
        let csv = "idx,pts,size\n0,0,1\n";
        assert!(matches!(read_framelog_csv(csv.as_bytes()), Err(FramelogError::SchemaError(_))));
        assert!(matches!(read_framelog_csv(b""), Err(FramelogError::SchemaError(_))));
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let csv = "# video_id=x\nindex,pts_seconds,size_bytes,is_key\n0,0.0,10,\n1,abc,10,\n";
        assert_eq!(
            read_framelog_csv(csv.as_bytes()),
            Err(FramelogError::ParseError { line: 4, message: "invalid pts_seconds `abc`".into() })
        );
    }

    #[test]
    fn key_column_may_be_blank_or_flagged() {
        let csv = "index,pts_seconds,size_bytes,is_key\n0,0.0,10,1\n1,0.04,10,\n2,0.08,10,0\n";
        let log = read_framelog_csv(csv.as_bytes()).unwrap();
        let keys: Vec<_> = log.frames().iter().map(|f| f.is_key).collect();
        assert_eq!(keys, vec![Some(true), None, Some(false)]);
        assert_eq!(log.itag, ItagDescriptor::unspecified());
    }

    #[test]
    fn awkward_timestamps_keep_full_precision() {
        assert_eq!(format_pts(0.1), "0.100000");
        assert_eq!(format_pts(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(format_pts(1e-7).parse::<f64>().unwrap(), 1e-7);
    }

    proptest! {
        #[test]
        fn csv_roundtrip(
            gaps in prop::collection::vec(0.0f64..2.0, 1..50),
            sizes in prop::collection::vec(any::<u32>(), 50),
            keys in prop::collection::vec(prop::option::of(any::<bool>()), 50),
            id in "[a-zA-Z0-9_-]{0,12}",
            itag in 0u32..200,
        ) {
            let mut pts = 0.0;
            let frames: Vec<Frame> = gaps.iter().enumerate().map(|(i, g)| {
                pts += g;
                Frame { pts, size: sizes[i] as u64, is_key: keys[i] }
            }).collect();
            let desc = ItagDescriptor::lookup(itag).unwrap_or(ItagDescriptor {
                itag,
                resolution: Resolution::Other(itag),
                container: Container::WebM,
                has_audio: itag % 2 == 0,
            });
            let log = FrameLog::new(id, desc, frames, Some(pts + 0.5)).unwrap();
            let back = read_framelog_csv(&write_framelog_csv(&log)).unwrap();
            prop_assert_eq!(back, log);
        }
    }
}
