//! Synthetic video populations drawn from fitted duration and size models.
//!
//! Every video is generated from its own ChaCha stream `(seed, index)`, so a
//! corpus can be built in parallel and still match a serial run exactly.

mod export;
mod trace;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distfit::{lognormal_quantile, LognormalFit};
use crate::itag::{Container, Resolution};
use crate::trace::BitrateTrace;

pub use self::export::{read_corpus_dir, trace_file_name, trace_from_framelog, trace_to_framelog, write_corpus_dir, CorpusIoError};
pub use self::trace::{synth_trace, synth_trace_family, TRACE_AR_COEFF, SPIKE_FACTOR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("unknown resolution key {0}")]
    UnknownResolution(String),
    #[error("no {1} size fit for {0}")]
    MissingSizeFit(Resolution, Container),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid profile: {0}")]
    Invalid(String),
}

/// How WebM sizes are derived from MP4 sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WebmModel {
    /// `ln W = a + b ln M + e`, with `a` and `b` chosen per resolution so the
    /// WebM marginal matches its size fit; `e` has the given log-space sd.
    LogLinear { noise_sdlog: f64 },
    /// `W = M * slope * exp(e)`.
    Proportional { slope: f64, noise_sdlog: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationProfile {
    pub length_fit: LognormalFit,
    /// Durations are drawn from `length_fit` restricted to `>= min_duration`.
    pub min_duration: f64,
    pub size_fits: BTreeMap<(Resolution, Container), LognormalFit>,
    pub availability: BTreeMap<Resolution, f64>,
    pub webm_model: WebmModel,
    pub webm_size_slope: f64,
    pub dash_bitrate_delta: f64,
    /// Accepted implied MP4 bitrate range, Mbps.
    pub bitrate_bounds_mbps: (f64, f64),
    /// Per-video burstiness distribution.
    pub burstiness: LognormalFit,
    pub subsegment: f64,
    pub correlation_floor: f64,
    /// Shared share of the per-resolution trace noise.
    pub cross_resolution_rho: f64,
    pub categories: Vec<(String, f64)>,
}

pub const CATEGORIES: [&str; 15] = [
    "Autos & Vehicles",
    "Comedy",
    "Education",
    "Entertainment",
    "Film & Animation",
    "Gaming",
    "Howto & Style",
    "Music",
    "News & Politics",
    "Nonprofits & Activism",
    "People & Blogs",
    "Pets & Animals",
    "Science & Technology",
    "Sports",
    "Travel & Events",
];

/// Reference resolution; always present when any resolution is.
pub const BASE_RESOLUTION: Resolution = Resolution::P360;

impl Default for PopulationProfile {
    fn default() -> Self {
        use Container::{Mp4, WebM};
        use Resolution::{P1080, P360, P720};
        let size_fits = BTreeMap::from([
            ((P360, Mp4), LognormalFit::new(2.30, 1.35)),
            ((P720, Mp4), LognormalFit::new(3.77, 1.32)),
            ((P1080, Mp4), LognormalFit::new(4.36, 1.32)),
            ((P360, WebM), LognormalFit::new(2.42, 1.42)),
            ((P720, WebM), LognormalFit::new(3.80, 1.37)),
            ((P1080, WebM), LognormalFit::new(4.39, 1.35)),
        ]);
        Self {
            length_fit: LognormalFit::new(5.16, 1.31),
            min_duration: 0.0,
            size_fits,
            availability: BTreeMap::from([(P360, 1.0), (P720, 0.485), (P1080, 0.210)]),
            webm_model: WebmModel::LogLinear { noise_sdlog: 0.05 },
            webm_size_slope: 1.05,
            dash_bitrate_delta: -0.05,
            bitrate_bounds_mbps: (0.1, 50.0),
            burstiness: LognormalFit::new(0.25f64.ln(), 0.5),
            subsegment: 5.0,
            correlation_floor: 0.75,
            cross_resolution_rho: 0.95,
            categories: CATEGORIES.iter().map(|c| (c.to_string(), 1.0)).collect(),
        }
    }
}

/// Per-resolution size model resolved from a profile.
#[derive(Debug, Clone, Copy)]
struct SizeModel {
    resolution: Resolution,
    availability: f64,
    /// Log-space mean and sd of the MP4 bitrate in Mbps.
    bitrate: LognormalFit,
    webm_a: f64,
    webm_b: f64,
    webm_noise: f64,
}

impl PopulationProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        self.size_models().map(|_| ())
    }

    fn size_models(&self) -> Result<Vec<SizeModel>, ProfileError> {
        let fit_ok = |f: &LognormalFit| f.meanlog.is_finite() && f.sdlog.is_finite() && f.sdlog >= 0.0;
        if !fit_ok(&self.length_fit) || !fit_ok(&self.burstiness) {
            return Err(ProfileError::Invalid("length and burstiness fits must be finite".into()));
        }
        if !(self.min_duration >= 0.0 && self.min_duration.is_finite()) {
            return Err(ProfileError::Invalid(format!("min_duration {}", self.min_duration)));
        }
        if !(self.subsegment > 0.0) {
            return Err(ProfileError::Invalid("subsegment must be positive".into()));
        }
        let (lo, hi) = self.bitrate_bounds_mbps;
        if !(lo > 0.0 && hi > lo) {
            return Err(ProfileError::Invalid(format!("bitrate bounds ({lo}, {hi})")));
        }
        if !(0.0..=1.0).contains(&self.cross_resolution_rho) || !(-1.0..=1.0).contains(&self.correlation_floor) {
            return Err(ProfileError::Invalid("correlation parameters out of range".into()));
        }
        if !(self.dash_bitrate_delta > -1.0) {
            return Err(ProfileError::Invalid("dash_bitrate_delta must exceed -1".into()));
        }
        if self.categories.is_empty() || self.categories.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(ProfileError::Invalid("category weights".into()));
        }
        if self.categories.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return Err(ProfileError::Invalid("category weights sum to zero".into()));
        }
        for &(res, container) in self.size_fits.keys() {
            if !self.availability.contains_key(&res) {
                return Err(ProfileError::UnknownResolution(res.to_string()));
            }
            if !matches!(container, Container::Mp4 | Container::WebM) {
                return Err(ProfileError::UnknownResolution(format!("{res}/{container}")));
            }
        }
        let base = *self
            .availability
            .get(&BASE_RESOLUTION)
            .ok_or_else(|| ProfileError::UnknownResolution(format!("{BASE_RESOLUTION} missing")))?;
        let mut models = Vec::new();
        for (&res, &p) in &self.availability {
            if !(0.0..=1.0).contains(&p) {
                return Err(ProfileError::InvalidProbability(p));
            }
            if p > base {
                return Err(ProfileError::Invalid(format!("{res} more available than {BASE_RESOLUTION}")));
            }
            let mp4 = self.size_fits.get(&(res, Container::Mp4)).ok_or(ProfileError::MissingSizeFit(res, Container::Mp4))?;
            let webm =
                self.size_fits.get(&(res, Container::WebM)).ok_or(ProfileError::MissingSizeFit(res, Container::WebM))?;
            if !fit_ok(mp4) || !fit_ok(webm) {
                return Err(ProfileError::Invalid(format!("{res} size fit")));
            }
            // size_MB = duration * bitrate_Mbps / 8
            let var_b = mp4.sdlog.powi(2) - self.length_fit.sdlog.powi(2);
            if var_b < 0.0 {
                return Err(ProfileError::Invalid(format!(
                    "{res}: MP4 size sdlog {} is below the duration sdlog {}",
                    mp4.sdlog, self.length_fit.sdlog
                )));
            }
            let bitrate = LognormalFit::new(mp4.meanlog - self.length_fit.meanlog + 8f64.ln(), var_b.sqrt());
            let (webm_a, webm_b, webm_noise) = match self.webm_model {
                WebmModel::LogLinear { noise_sdlog } => {
                    let var = webm.sdlog.powi(2) - noise_sdlog.powi(2);
                    if var < 0.0 || mp4.sdlog == 0.0 {
                        return Err(ProfileError::Invalid(format!("{res}: WebM noise exceeds WebM spread")));
                    }
                    let b = var.sqrt() / mp4.sdlog;
                    (webm.meanlog - b * mp4.meanlog, b, noise_sdlog)
                }
                WebmModel::Proportional { slope, noise_sdlog } => {
                    if !(slope > 0.0) {
                        return Err(ProfileError::Invalid("WebM slope must be positive".into()));
                    }
                    (slope.ln(), 1.0, noise_sdlog)
                }
            };
            models.push(SizeModel { resolution: res, availability: p, bitrate, webm_a, webm_b, webm_noise });
        }
        Ok(models)
    }

    /// Alternative WebM model: proportional with `webm_size_slope`.
    pub fn with_proportional_webm(mut self) -> Self {
        self.webm_model = WebmModel::Proportional { slope: self.webm_size_slope, noise_sdlog: 0.05 };
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionVariant {
    pub resolution: Resolution,
    pub available: bool,
    /// Megabytes (10^6 bytes).
    pub mp4_size_mb: f64,
    pub webm_size_mb: f64,
    pub mean_kbps: f64,
    pub dash_mean_kbps: f64,
    /// Materialized per-second trace; absent for unavailable variants and
    /// for metadata-only corpora.
    #[serde(skip)]
    pub trace: Option<BitrateTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticVideo {
    pub id: String,
    pub index: u64,
    /// Seconds.
    pub duration: f64,
    pub category: String,
    /// Target relative standard deviation of the traces.
    pub burstiness: f64,
    pub trace_seed: u64,
    pub variants: Vec<ResolutionVariant>,
}

impl SyntheticVideo {
    pub fn variant(&self, res: Resolution) -> Option<&ResolutionVariant> {
        self.variants.iter().find(|v| v.resolution == res)
    }

    pub fn available(&self) -> impl Iterator<Item = &ResolutionVariant> {
        self.variants.iter().filter(|v| v.available)
    }

    /// Lowest available resolution.
    pub fn base(&self) -> Option<&ResolutionVariant> {
        self.available().min_by_key(|v| v.resolution.height())
    }

    pub fn base_trace(&self) -> Option<&BitrateTrace> {
        self.base().and_then(|v| v.trace.as_ref())
    }

    /// Generates the traces of all available variants from `trace_seed`.
    pub fn materialize_traces(&mut self, profile: &PopulationProfile) {
        let means: Vec<f64> = self.available().map(|v| v.mean_kbps).collect();
        let traces = synth_trace_family(
            self.duration,
            &means,
            self.burstiness,
            profile.subsegment,
            profile.cross_resolution_rho,
            profile.correlation_floor,
            self.trace_seed,
        );
        for (v, t) in self.variants.iter_mut().filter(|v| v.available).zip(traces) {
            v.trace = Some(t);
        }
    }
}

fn video_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Open-interval uniform, safe for quantile functions.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn synth_metadata(index: u64, profile: &PopulationProfile, models: &[SizeModel], seed: u64) -> SyntheticVideo {
    let mut rng = video_rng(seed, index);

    let lf = &profile.length_fit;
    let duration = if profile.min_duration > 0.0 {
        let p0 = lf.cdf(profile.min_duration);
        let u = p0 + (1.0 - p0) * open_unit(&mut rng);
        if u >= 1.0 {
            profile.min_duration
        } else {
            lognormal_quantile(u, lf).unwrap_or(profile.min_duration).max(profile.min_duration)
        }
    } else {
        (lf.meanlog + lf.sdlog * std_normal(&mut rng)).exp()
    };

    let total: f64 = profile.categories.iter().map(|(_, w)| w).sum();
    let mut pick = rng.random::<f64>() * total;
    let mut category = profile.categories.last().map(|c| c.0.clone()).unwrap_or_default();
    for (name, w) in &profile.categories {
        if pick < *w {
            category = name.clone();
            break;
        }
        pick -= w;
    }

    let b = &profile.burstiness;
    let burstiness = (b.meanlog + b.sdlog * std_normal(&mut rng)).exp();

    let mut avail: Vec<bool> = models.iter().map(|m| rng.random::<f64>() < m.availability).collect();
    if avail.iter().any(|&a| a) {
        if let Some(i) = models.iter().position(|m| m.resolution == BASE_RESOLUTION) {
            avail[i] = true;
        }
    }

    // One bitrate quantile shared across resolutions keeps their order stable.
    let (lo, hi) = profile.bitrate_bounds_mbps;
    let z_shared = std_normal(&mut rng);
    let variants = models
        .iter()
        .zip(avail)
        .map(|(m, available)| {
            let mut z = z_shared;
            let mut mbps = (m.bitrate.meanlog + m.bitrate.sdlog * z).exp();
            let mut redraws = 0;
            while !(lo..=hi).contains(&mbps) && redraws < 16 {
                z = std_normal(&mut rng);
                mbps = (m.bitrate.meanlog + m.bitrate.sdlog * z).exp();
                redraws += 1;
            }
            let mbps = mbps.clamp(lo, hi);
            let mp4_size_mb = duration * mbps / 8.0;
            let eps = m.webm_noise * std_normal(&mut rng);
            let webm_size_mb = (m.webm_a + m.webm_b * mp4_size_mb.ln() + eps).exp();
            let mean_kbps = mp4_size_mb * 8.0 * 1000.0 / duration;
            ResolutionVariant {
                resolution: m.resolution,
                available,
                mp4_size_mb,
                webm_size_mb,
                mean_kbps,
                dash_mean_kbps: mean_kbps * (1.0 + profile.dash_bitrate_delta),
                trace: None,
            }
        })
        .collect();

    SyntheticVideo {
        id: format!("syn{index:07}"),
        index,
        duration,
        category,
        burstiness,
        trace_seed: rng.random(),
        variants,
    }
}

/// Metadata only: durations, sizes and bitrates, no traces.
pub fn synth_corpus_metadata(n: usize, profile: &PopulationProfile, seed: u64) -> Result<Vec<SyntheticVideo>, ProfileError> {
    let models = profile.size_models()?;
    Ok((0..n as u64).into_par_iter().map(|i| synth_metadata(i, profile, &models, seed)).collect())
}

/// Full corpus including per-resolution traces.
pub fn synth_corpus(n: usize, profile: &PopulationProfile, seed: u64) -> Result<Vec<SyntheticVideo>, ProfileError> {
    if n == 0 {
        return Err(ProfileError::Invalid("corpus size must be at least 1".into()));
    }
    let models = profile.size_models()?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut v = synth_metadata(i, profile, &models, seed);
            v.materialize_traces(profile);
            v
        })
        .collect())
}

/// Model probability that a duration exceeds `t` seconds.
pub fn duration_tail(profile: &PopulationProfile, t: f64) -> f64 {
    1.0 - profile.length_fit.cdf(t)
}

/// `(ln MP4, ln WebM)` size pairs of every available variant.
pub fn log_size_pairs(corpus: &[SyntheticVideo]) -> Vec<(f64, f64)> {
    corpus
        .iter()
        .flat_map(|v| v.available().map(|r| (r.mp4_size_mb.ln(), r.webm_size_mb.ln())))
        .collect()
}

/// Least-squares slope of `y` on `x`.
pub fn regression_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pairs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
