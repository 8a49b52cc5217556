//! YouTube stream variant identifiers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Vertical resolution class of a video stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resolution {
    P240,
    P360,
    P480,
    P720,
    P1080,
    /// Any other height, in pixels.
    Other(u32),
}

impl Resolution {
    pub fn from_height(height: u32) -> Self {
        match height {
            240 => Self::P240,
            360 => Self::P360,
            480 => Self::P480,
            720 => Self::P720,
            1080 => Self::P1080,
            h => Self::Other(h),
        }
    }

    pub fn height(self) -> u32 {
        match self {
            Self::P240 => 240,
            Self::P360 => 360,
            Self::P480 => 480,
            Self::P720 => 720,
            Self::P1080 => 1080,
            Self::Other(h) => h,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}p", self.height())
    }
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.trim().trim_end_matches(['p', 'P']);
        digits
            .parse::<u32>()
            .map(Self::from_height)
            .map_err(|_| format!("invalid resolution `{s}`"))
    }
}

/// Container format of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Container {
    Mp4,
    WebM,
    Flv,
    Mp4Dash,
}

impl fmt::Display for Container {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mp4 => "mp4",
            Self::WebM => "webm",
            Self::Flv => "flv",
            Self::Mp4Dash => "mp4-dash",
        })
    }
}

impl FromStr for Container {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mp4" => Ok(Self::Mp4),
            "webm" => Ok(Self::WebM),
            "flv" => Ok(Self::Flv),
            "mp4-dash" | "mp4dash" | "dash" => Ok(Self::Mp4Dash),
            other => Err(format!("invalid container `{other}`")),
        }
    }
}

/// A stream variant: itag code plus what it encodes.
///
/// Codes outside the built-in catalog are allowed; code `0` is used for
/// streams whose itag is not known (for example logs extracted from a local
/// MP4 file).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItagDescriptor {
    pub itag: u32,
    pub resolution: Resolution,
    pub container: Container,
    pub has_audio: bool,
}

const fn row(itag: u32, resolution: Resolution, container: Container, has_audio: bool) -> ItagDescriptor {
    ItagDescriptor { itag, resolution, container, has_audio }
}

static CATALOG: [ItagDescriptor; 11] = [
    row(46, Resolution::P1080, Container::WebM, true),
    row(45, Resolution::P720, Container::WebM, true),
    row(43, Resolution::P360, Container::WebM, true),
    row(37, Resolution::P1080, Container::Mp4, true),
    row(22, Resolution::P720, Container::Mp4, true),
    row(18, Resolution::P360, Container::Mp4, true),
    row(137, Resolution::P1080, Container::Mp4Dash, false),
    row(136, Resolution::P720, Container::Mp4Dash, false),
    row(135, Resolution::P480, Container::Mp4Dash, false),
    row(134, Resolution::P360, Container::Mp4Dash, false),
    row(34, Resolution::P360, Container::Flv, true),
];

impl ItagDescriptor {
    /// The built-in catalog of known YouTube itags.
    pub fn catalog() -> &'static [ItagDescriptor] {
        &CATALOG
    }

    pub fn lookup(itag: u32) -> Option<ItagDescriptor> {
        CATALOG.iter().copied().find(|d| d.itag == itag)
    }

    /// Finds the catalog row for a (resolution, container, audio) triple, or
    /// builds an uncatalogued descriptor with itag `0`.
    pub fn for_stream(resolution: Resolution, container: Container, has_audio: bool) -> ItagDescriptor {
        CATALOG
            .iter()
            .copied()
            .find(|d| d.resolution == resolution && d.container == container && d.has_audio == has_audio)
            .unwrap_or(ItagDescriptor { itag: 0, resolution, container, has_audio })
    }

    pub fn unspecified() -> ItagDescriptor {
        ItagDescriptor {
            itag: 0,
            resolution: Resolution::Other(0),
            container: Container::Mp4,
            has_audio: false,
        }
    }

    pub fn is_dash(&self) -> bool {
        self.container == Container::Mp4Dash
    }
}
