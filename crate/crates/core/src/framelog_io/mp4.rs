//! Minimal ISO-BMFF reader that recovers per-sample sizes and decode times.
//!
//! Only the boxes needed for a frame log are interpreted:
//! `moov/trak/{tkhd, mdia/{mdhd, hdlr, minf/stbl/{stsz, stts}}}`,
//! `moov/mvex/trex` and `moof/traf/{tfhd, trun}`. Everything else is skipped.

use std::collections::HashMap;

use super::FramelogError;
use crate::itag::{Container, ItagDescriptor, Resolution};
use crate::trace::{Frame, FrameLog};

/// Upper bound on samples accepted from one file.
pub const MAX_SAMPLES: usize = 10_000_000;

/// Sample sizes and decode deltas of one video track.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mp4SampleTable {
    pub timescale: u32,
    pub sample_sizes: Vec<u32>,
    pub sample_deltas: Vec<u32>,
    pub fragmented: bool,
    /// Display height from the track header, when present.
    pub height: Option<u32>,
    pub has_audio: bool,
    /// Media duration from `mdhd`, in timescale ticks.
    pub media_duration: Option<u64>,
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    base: u64,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], base: u64) -> Self {
        Self { data, pos: 0, base }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FramelogError> {
        if self.data.len() - self.pos < n {
            return Err(FramelogError::TruncatedBox(self.base + self.pos as u64));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FramelogError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FramelogError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn skip(&mut self, n: usize) -> Result<(), FramelogError> {
        self.take(n).map(|_| ())
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    /// Version and flags of a full box.
    fn full_header(&mut self) -> Result<(u8, u32), FramelogError> {
        let v = self.u32()?;
        Ok(((v >> 24) as u8, v & 0x00FF_FFFF))
    }
}

struct Mp4Box<'a> {
    kind: [u8; 4],
    payload: &'a [u8],
    payload_offset: u64,
}

struct BoxIter<'a> {
    data: &'a [u8],
    pos: usize,
    base: u64,
    failed: bool,
}

fn boxes(data: &[u8], base: u64) -> BoxIter<'_> {
    BoxIter { data, pos: 0, base, failed: false }
}

impl<'a> BoxIter<'a> {
    fn next_box(&mut self) -> Result<Mp4Box<'a>, FramelogError> {
        let offset = self.base + self.pos as u64;
        let rest = &self.data[self.pos..];
        if rest.len() < 8 {
            return Err(FramelogError::TruncatedBox(offset));
        }
        let size32 = u32::from_be_bytes(rest[0..4].try_into().unwrap());
        let kind: [u8; 4] = rest[4..8].try_into().unwrap();
        let (size, header) = match size32 {
            0 => (rest.len() as u64, 8usize),
            1 => {
                if rest.len() < 16 {
                    return Err(FramelogError::TruncatedBox(offset));
                }
                (u64::from_be_bytes(rest[8..16].try_into().unwrap()), 16)
            }
            s => (s as u64, 8),
        };
        if size < header as u64 {
            return Err(FramelogError::InvalidBox { offset, reason: format!("size {size} smaller than header") });
        }
        if size > rest.len() as u64 {
            return Err(FramelogError::TruncatedBox(offset));
        }
        let size = size as usize;
        self.pos += size;
        Ok(Mp4Box {
            kind,
            payload: &rest[header..size],
            payload_offset: offset + header as u64,
        })
    }
}

impl<'a> Iterator for BoxIter<'a> {
    type Item = Result<Mp4Box<'a>, FramelogError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.pos >= self.data.len() {
            return None;
        }
        let r = self.next_box();
        self.failed = r.is_err();
        Some(r)
    }
}

/// Constant-size tables are kept compact until validated.
enum SampleSizes {
    Constant { size: u32, count: u32 },
    Table(Vec<u32>),
}

impl SampleSizes {
    fn count(&self) -> u64 {
        match self {
            Self::Constant { count, .. } => *count as u64,
            Self::Table(v) => v.len() as u64,
        }
    }
}

#[derive(Default)]
struct Track {
    track_id: u32,
    handler: [u8; 4],
    timescale: u32,
    height: Option<u32>,
    media_duration: Option<u64>,
    sizes: Option<SampleSizes>,
    deltas: Option<Vec<(u32, u32)>>,
}

#[derive(Clone, Copy, Default)]
struct TrackDefaults {
    duration: Option<u32>,
    size: Option<u32>,
}

struct FragmentRun {
    track_id: u32,
    sizes: Vec<u32>,
    deltas: Vec<u32>,
}

fn parse_tkhd(payload: &[u8], base: u64, track: &mut Track) -> Result<(), FramelogError> {
    let mut r = Reader::new(payload, base);
    let (version, _) = r.full_header()?;
    if version == 1 {
        r.skip(16)?;
        track.track_id = r.u32()?;
        r.skip(4 + 8)?;
    } else {
        r.skip(8)?;
        track.track_id = r.u32()?;
        r.skip(4 + 4)?;
    }
    // reserved(8) layer(2) alternate_group(2) volume(2) reserved(2) matrix(36) width(4)
    r.skip(8 + 2 + 2 + 2 + 2 + 36 + 4)?;
    track.height = Some(r.u32()? >> 16);
    Ok(())
}

fn parse_mdhd(payload: &[u8], base: u64, track: &mut Track) -> Result<(), FramelogError> {
    let mut r = Reader::new(payload, base);
    let (version, _) = r.full_header()?;
    if version == 1 {
        r.skip(16)?;
        track.timescale = r.u32()?;
        track.media_duration = Some(r.u64()?);
    } else {
        r.skip(8)?;
        track.timescale = r.u32()?;
        track.media_duration = Some(r.u32()? as u64);
    }
    Ok(())
}

fn parse_hdlr(payload: &[u8], base: u64, track: &mut Track) -> Result<(), FramelogError> {
    let mut r = Reader::new(payload, base);
    r.full_header()?;
    r.skip(4)?;
    track.handler = r.take(4)?.try_into().unwrap();
    Ok(())
}

fn parse_stsz(payload: &[u8], base: u64) -> Result<SampleSizes, FramelogError> {
    let mut r = Reader::new(payload, base);
    r.full_header()?;
    let size = r.u32()?;
    let count = r.u32()?;
    if size != 0 {
        return Ok(SampleSizes::Constant { size, count });
    }
    if (count as u64) * 4 > r.remaining() as u64 {
        return Err(FramelogError::TruncatedBox(base));
    }
    (0..count).map(|_| r.u32()).collect::<Result<_, _>>().map(SampleSizes::Table)
}

fn parse_stts(payload: &[u8], base: u64) -> Result<Vec<(u32, u32)>, FramelogError> {
    let mut r = Reader::new(payload, base);
    r.full_header()?;
    let count = r.u32()?;
    if (count as u64) * 8 > r.remaining() as u64 {
        return Err(FramelogError::TruncatedBox(base));
    }
    (0..count).map(|_| Ok((r.u32()?, r.u32()?))).collect()
}

fn parse_container<'a>(
    payload: &'a [u8],
    base: u64,
    mut visit: impl FnMut(Mp4Box<'a>) -> Result<(), FramelogError>,
) -> Result<(), FramelogError> {
    for b in boxes(payload, base) {
        visit(b?)?;
    }
    Ok(())
}

fn parse_trak(payload: &[u8], base: u64) -> Result<Track, FramelogError> {
    let mut track = Track::default();
    parse_container(payload, base, |b| match &b.kind {
        b"tkhd" => parse_tkhd(b.payload, b.payload_offset, &mut track),
        b"mdia" => parse_container(b.payload, b.payload_offset, |m| match &m.kind {
            b"mdhd" => parse_mdhd(m.payload, m.payload_offset, &mut track),
            b"hdlr" => parse_hdlr(m.payload, m.payload_offset, &mut track),
            b"minf" => parse_container(m.payload, m.payload_offset, |n| match &n.kind {
                b"stbl" => parse_container(n.payload, n.payload_offset, |s| {
                    match &s.kind {
                        b"stsz" => track.sizes = Some(parse_stsz(s.payload, s.payload_offset)?),
                        b"stts" => track.deltas = Some(parse_stts(s.payload, s.payload_offset)?),
                        _ => {}
                    }
                    Ok(())
                }),
                _ => Ok(()),
            }),
            _ => Ok(()),
        }),
        _ => Ok(()),
    })?;
    Ok(track)
}

fn parse_trex(payload: &[u8], base: u64) -> Result<(u32, TrackDefaults), FramelogError> {
    let mut r = Reader::new(payload, base);
    r.full_header()?;
    let track_id = r.u32()?;
    r.skip(4)?; // default_sample_description_index
    let duration = r.u32()?;
    let size = r.u32()?;
    Ok((track_id, TrackDefaults { duration: Some(duration), size: Some(size) }))
}

fn parse_traf(
    payload: &[u8],
    base: u64,
    trex: &HashMap<u32, TrackDefaults>,
    budget: &mut usize,
    runs: &mut Vec<FragmentRun>,
) -> Result<(), FramelogError> {
    let mut header: Option<(u32, TrackDefaults)> = None;
    for b in boxes(payload, base) {
        let b = b?;
        match &b.kind {
            b"tfhd" => {
                let mut r = Reader::new(b.payload, b.payload_offset);
                let (_, flags) = r.full_header()?;
                let track_id = r.u32()?;
                let mut defaults = trex.get(&track_id).copied().unwrap_or_default();
                if flags & 0x01 != 0 {
                    r.u64()?;
                }
                if flags & 0x02 != 0 {
                    r.u32()?;
                }
                if flags & 0x08 != 0 {
                    defaults.duration = Some(r.u32()?);
                }
                if flags & 0x10 != 0 {
                    defaults.size = Some(r.u32()?);
                }
                header = Some((track_id, defaults));
            }
            b"trun" => {
                let Some((track_id, defaults)) = header else {
                    return Err(FramelogError::InvalidBox {
                        offset: b.payload_offset - 8,
                        reason: "trun before tfhd".into(),
                    });
                };
                let mut r = Reader::new(b.payload, b.payload_offset);
                let (_, flags) = r.full_header()?;
                let count = r.u32()? as usize;
                if flags & 0x001 != 0 {
                    r.u32()?;
                }
                if flags & 0x004 != 0 {
                    r.u32()?;
                }
                let per_sample = [0x100, 0x200, 0x400, 0x800].iter().filter(|&&f| flags & f != 0).count() * 4;
                if per_sample > 0 && count.saturating_mul(per_sample) > r.remaining() {
                    return Err(FramelogError::TruncatedBox(b.payload_offset));
                }
                if count > *budget {
                    return Err(FramelogError::TooManySamples(MAX_SAMPLES));
                }
                *budget -= count;
                let mut run = FragmentRun {
                    track_id,
                    sizes: Vec::with_capacity(count),
                    deltas: Vec::with_capacity(count),
                };
                let missing = |what: &str| {
                    FramelogError::InconsistentSampleTable(format!("fragment run without sample {what}"))
                };
                for _ in 0..count {
                    let duration = if flags & 0x100 != 0 { r.u32()? } else { defaults.duration.ok_or_else(|| missing("duration"))? };
                    let size = if flags & 0x200 != 0 { r.u32()? } else { defaults.size.ok_or_else(|| missing("size"))? };
                    if flags & 0x400 != 0 {
                        r.u32()?;
                    }
                    if flags & 0x800 != 0 {
                        r.u32()?;
                    }
                    run.sizes.push(size);
                    run.deltas.push(duration);
                }
                runs.push(run);
            }
            _ => {}
        }
    }
    Ok(())
}

/// Walks the box tree and returns the first video track's sample table.
pub fn parse_sample_table(bytes: &[u8]) -> Result<Mp4SampleTable, FramelogError> {
    let mut tracks = Vec::new();
    let mut trex = HashMap::new();
    let mut runs = Vec::new();
    let mut saw_mvex = false;
    let mut budget = MAX_SAMPLES;

    for b in boxes(bytes, 0) {
        let b = b?;
        match &b.kind {
            b"moov" => parse_container(b.payload, b.payload_offset, |m| {
                match &m.kind {
                    b"trak" => tracks.push(parse_trak(m.payload, m.payload_offset)?),
                    b"mvex" => {
                        saw_mvex = true;
                        parse_container(m.payload, m.payload_offset, |x| {
                            if &x.kind == b"trex" {
                                let (id, d) = parse_trex(x.payload, x.payload_offset)?;
                                trex.insert(id, d);
                            }
                            Ok(())
                        })?;
                    }
                    _ => {}
                }
                Ok(())
            })?,
            b"moof" => parse_container(b.payload, b.payload_offset, |m| {
                if &m.kind == b"traf" {
                    parse_traf(m.payload, m.payload_offset, &trex, &mut budget, &mut runs)?;
                }
                Ok(())
            })?,
            _ => {}
        }
    }

    let has_audio = tracks.iter().any(|t| &t.handler == b"soun");
    let video = tracks.into_iter().find(|t| &t.handler == b"vide").ok_or(FramelogError::NoVideoTrack)?;
    let fragmented = saw_mvex || !runs.is_empty();

    let (mut sizes, mut deltas) = match (video.sizes, video.deltas) {
        (Some(sizes), Some(stts)) => {
            let declared = sizes.count();
            let mut expanded: u64 = 0;
            for &(n, _) in &stts {
                expanded += n as u64;
            }
            if expanded != declared {
                return Err(FramelogError::InconsistentSampleTable(format!(
                    "{declared} sample sizes but {expanded} decode deltas"
                )));
            }
            if declared > budget as u64 {
                return Err(FramelogError::TooManySamples(MAX_SAMPLES));
            }
            let sizes = match sizes {
                SampleSizes::Constant { size, count } => vec![size; count as usize],
                SampleSizes::Table(v) => v,
            };
            let deltas = stts.iter().flat_map(|&(n, d)| std::iter::repeat_n(d, n as usize)).collect();
            (sizes, deltas)
        }
        (None, None) if fragmented => (Vec::new(), Vec::new()),
        (None, None) => return Err(FramelogError::NoVideoTrack),
        _ => {
            return Err(FramelogError::InconsistentSampleTable(
                "sample size and decode time tables must both be present".into(),
            ))
        }
    };
    for run in runs.into_iter().filter(|r| r.track_id == video.track_id) {
        sizes.extend(run.sizes);
        deltas.extend(run.deltas);
    }
    if sizes.is_empty() {
        return Err(FramelogError::NoVideoTrack);
    }
    if video.timescale == 0 {
        return Err(FramelogError::InconsistentSampleTable("media timescale is zero".into()));
    }
    Ok(Mp4SampleTable {
        timescale: video.timescale,
        sample_sizes: sizes,
        sample_deltas: deltas,
        fragmented,
        height: video.height.filter(|&h| h > 0),
        has_audio,
        media_duration: video.media_duration.filter(|&d| d > 0),
    })
}

impl Mp4SampleTable {
    /// Frame log with decode times as timestamps.
    pub fn to_framelog(&self, video_id: &str) -> Result<FrameLog, FramelogError> {
        if self.sample_sizes.len() != self.sample_deltas.len() {
            return Err(FramelogError::InconsistentSampleTable(format!(
                "{} sizes vs {} deltas",
                self.sample_sizes.len(),
                self.sample_deltas.len()
            )));
        }
        if self.timescale == 0 {
            return Err(FramelogError::InconsistentSampleTable("media timescale is zero".into()));
        }
        let timescale = self.timescale as f64;
        let mut ticks: u64 = 0;
        let frames: Vec<Frame> = self
            .sample_sizes
            .iter()
            .zip(&self.sample_deltas)
            .map(|(&size, &delta)| {
                let f = Frame::new(ticks as f64 / timescale, size as u64);
                ticks += delta as u64;
                f
            })
            .collect();
        let container = if self.fragmented { Container::Mp4Dash } else { Container::Mp4 };
        let resolution = Resolution::from_height(self.height.unwrap_or(0));
        let itag = ItagDescriptor::for_stream(resolution, container, self.has_audio);
        let last = frames.last().map_or(0.0, |f| f.pts);
        let declared = self
            .media_duration
            .map(|d| d as f64 / timescale)
            .filter(|&d| last <= d + crate::trace::DECLARED_DURATION_SLACK);
        Ok(FrameLog::new(video_id, itag, frames, declared)?)
    }

    /// Serializes the table as a minimal MP4 file. With `fragments = Some(k)`
    /// the samples are split over `k` movie fragments after an empty `moov`.
    pub fn to_mp4_bytes(&self, fragments: Option<usize>) -> Vec<u8> {
        writer::build(self, fragments)
    }
}

/// Extracts a frame log from MP4 bytes. The returned log has an empty id.
pub fn parse_mp4(bytes: &[u8]) -> Result<FrameLog, FramelogError> {
    parse_sample_table(bytes)?.to_framelog("")
}

mod writer {
    use super::Mp4SampleTable;

    fn bx(kind: &[u8; 4], body: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(body.len() + 8);
        out.extend_from_slice(&(body.len() as u32 + 8).to_be_bytes());
        out.extend_from_slice(kind);
        out.extend_from_slice(body);
        out
    }

    fn full(kind: &[u8; 4], version: u8, flags: u32, body: &[u8]) -> Vec<u8> {
        let mut b = ((version as u32) << 24 | flags).to_be_bytes().to_vec();
        b.extend_from_slice(body);
        bx(kind, &b)
    }

    fn u32s(values: &[u32]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_be_bytes()).collect()
    }

    fn trak(track_id: u32, handler: &[u8; 4], t: &Mp4SampleTable, sizes: &[u32], deltas: &[u32]) -> Vec<u8> {
        let mut tkhd = u32s(&[0, 0, track_id, 0, 0]);
        tkhd.extend_from_slice(&[0; 8 + 2 + 2 + 2 + 2 + 36]);
        tkhd.extend(u32s(&[0, t.height.unwrap_or(0) << 16]));
        let duration = t.media_duration.unwrap_or(0) as u32;
        let mdhd = full(b"mdhd", 0, 0, &u32s(&[0, 0, t.timescale, duration, 0]));
        let mut hdlr_body = u32s(&[0]);
        hdlr_body.extend_from_slice(handler);
        hdlr_body.extend_from_slice(&[0; 12]);
        hdlr_body.push(0);
        let hdlr = full(b"hdlr", 0, 0, &hdlr_body);

        let mut stts_entries: Vec<(u32, u32)> = Vec::new();
        for &d in deltas {
            match stts_entries.last_mut() {
                Some((n, last)) if *last == d => *n += 1,
                _ => stts_entries.push((1, d)),
            }
        }
        let mut stts_body = u32s(&[stts_entries.len() as u32]);
        for (n, d) in &stts_entries {
            stts_body.extend(u32s(&[*n, *d]));
        }
        let mut stsz_body = u32s(&[0, sizes.len() as u32]);
        stsz_body.extend(u32s(sizes));
        let stbl = bx(
            b"stbl",
            &[
                full(b"stsd", 0, 0, &u32s(&[0])),
                full(b"stts", 0, 0, &stts_body),
                full(b"stsc", 0, 0, &u32s(&[0])),
                full(b"stsz", 0, 0, &stsz_body),
                full(b"stco", 0, 0, &u32s(&[0])),
            ]
            .concat(),
        );
        let minf = bx(b"minf", &stbl);
        let mdia = bx(b"mdia", &[mdhd, hdlr, minf].concat());
        bx(b"trak", &[full(b"tkhd", 0, 7, &tkhd), mdia].concat())
    }

    pub(super) fn build(t: &Mp4SampleTable, fragments: Option<usize>) -> Vec<u8> {
        let ftyp = bx(b"ftyp", b"isom\0\0\x02\0isomiso2avc1mp41");
        let mvhd = full(b"mvhd", 0, 0, &[0; 96]);
        let mut out = ftyp;
        match fragments {
            None => {
                let moov = bx(b"moov", &[mvhd, trak(1, b"vide", t, &t.sample_sizes, &t.sample_deltas)].concat());
                out.extend(moov);
                let total: u32 = t.sample_sizes.iter().sum();
                out.extend(bx(b"mdat", &vec![0; total as usize]));
            }
            Some(k) => {
                let trex = full(b"trex", 0, 0, &u32s(&[1, 1, 0, 0, 0]));
                let moov = bx(
                    b"moov",
                    &[mvhd, trak(1, b"vide", t, &[], &[]), bx(b"mvex", &trex)].concat(),
                );
                out.extend(moov);
                let n = t.sample_sizes.len();
                let per = n.div_ceil(k.max(1)).max(1);
                for (seq, start) in (0..n).step_by(per).enumerate() {
                    let end = (start + per).min(n);
                    let mfhd = full(b"mfhd", 0, 0, &u32s(&[seq as u32 + 1]));
                    let tfhd = full(b"tfhd", 0, 0x02_0000, &u32s(&[1]));
                    let tfdt = full(b"tfdt", 0, 0, &u32s(&[t.sample_deltas[..start].iter().sum()]));
                    let mut trun_body = u32s(&[(end - start) as u32]);
                    for i in start..end {
                        trun_body.extend(u32s(&[t.sample_deltas[i], t.sample_sizes[i]]));
                    }
                    let trun = full(b"trun", 0, 0x300, &trun_body);
                    let traf = bx(b"traf", &[tfhd, tfdt, trun].concat());
                    out.extend(bx(b"moof", &[mfhd, traf].concat()));
                    let total: u32 = t.sample_sizes[start..end].iter().sum();
                    out.extend(bx(b"mdat", &vec![0; total as usize]));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fixture_a() -> Mp4SampleTable {
        Mp4SampleTable {
            timescale: 30000,
            sample_sizes: vec![100, 200, 300, 400],
            sample_deltas: vec![3000; 4],
            fragmented: false,
            height: Some(360),
            has_audio: false,
            media_duration: Some(12000),
        }
    }

    #[test]
    fn fixture_a_non_fragmented() {
        let log = parse_mp4(&fixture_a().to_mp4_bytes(None)).unwrap();
        let pts: Vec<f64> = log.frames().iter().map(|f| f.pts).collect();
        let sizes: Vec<u64> = log.frames().iter().map(|f| f.size).collect();
        assert_eq!(pts, vec![0.0, 0.1, 0.2, 0.3]);
        assert_eq!(sizes, vec![100, 200, 300, 400]);
        assert_eq!(log.itag.resolution, Resolution::P360);
        assert_eq!(log.itag.container, Container::Mp4);
    }

    #[test]
    fn fixture_b_zero_samples() {
        let mut t = fixture_a();
        t.sample_sizes.clear();
        t.sample_deltas.clear();
        assert_eq!(parse_mp4(&t.to_mp4_bytes(None)), Err(FramelogError::NoVideoTrack));
    }

    #[test]
    fn fixture_c_fragmented_matches_a() {
        let bytes = fixture_a().to_mp4_bytes(Some(2));
        let table = parse_sample_table(&bytes).unwrap();
        assert!(table.fragmented);
        let a = parse_mp4(&fixture_a().to_mp4_bytes(None)).unwrap();
        let c = table.to_framelog("").unwrap();
        assert_eq!(a.frames(), c.frames());
        // DASH 360p without audio resolves to itag 134
        assert_eq!(c.itag.itag, 134);
    }

    #[test]
    fn truncated_input_reports_offset() {
        let bytes = fixture_a().to_mp4_bytes(None);
        let cut = &bytes[..bytes.len() - 5];
        assert!(matches!(parse_mp4(cut), Err(FramelogError::TruncatedBox(_))));
        assert_eq!(parse_mp4(&[0, 0, 0]), Err(FramelogError::TruncatedBox(0)));
    }

    #[test]
    fn stsz_stts_mismatch_is_inconsistent() {
        let mut t = fixture_a();
        t.sample_deltas.push(3000);
        let bytes = writer::build(&t, None);
        assert!(matches!(parse_mp4(&bytes), Err(FramelogError::InconsistentSampleTable(_))));
    }

    #[test]
    fn largesize_boxes_are_supported() {
        let mut bytes = Vec::new();
        let payload = b"hello";
        bytes.extend_from_slice(&1u32.to_be_bytes());
        bytes.extend_from_slice(b"free");
        bytes.extend_from_slice(&(16 + payload.len() as u64).to_be_bytes());
        bytes.extend_from_slice(payload);
        bytes.extend(fixture_a().to_mp4_bytes(None));
        assert_eq!(parse_mp4(&bytes).unwrap().len(), 4);

        // a 64-bit size pointing past the end is an error, not a clamp
        let mut bad = Vec::new();
        bad.extend_from_slice(&1u32.to_be_bytes());
        bad.extend_from_slice(b"free");
        bad.extend_from_slice(&(1u64 << 40).to_be_bytes());
        assert_eq!(parse_mp4(&bad), Err(FramelogError::TruncatedBox(0)));
    }

    #[test]
    fn audio_track_is_ignored() {
        // Append an audio trak to the moov of fixture A.
        let t = fixture_a();
        let bytes = t.to_mp4_bytes(None);
        let parsed = parse_sample_table(&bytes).unwrap();
        assert!(!parsed.has_audio);
        assert_eq!(parsed.sample_sizes.iter().map(|&s| s as u64).sum::<u64>(), 1000);
    }
}
