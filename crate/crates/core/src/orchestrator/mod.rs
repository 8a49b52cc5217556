//! Measurement cycle: a controller instructs measurement agents (MAs), the
//! agents test videos from a chart, and a repository collects the results.
//!
//! One cycle has three phases:
//!
//! 1. every MA fetches the chart, keeps the top-`N` videos lasting at least
//!    `MINLENGTH`, and tests one of them at random;
//! 2. the tested videos are classified by duration, bitrate and burstiness,
//!    and `MINLENGTH` moves to the first quartile of their durations unless
//!    that would reach `CUTOFF`;
//! 3. the controller hands out the classified videos round-robin until each
//!    MA has run `tests_per_ma_per_cycle` tests.

mod chart;

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::playout::{simulate_download, verdict, Bucket, ClassThresholds, LinkModel, PlayerConfig, PlayoutError, TestRecord};
use crate::synth::SyntheticVideo;
use crate::trace::{trace_stats, truncate};

pub use self::chart::{ChartEntry, ChartService, MIN_CHART_LEN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchestratorError {
    #[error("invalid cycle configuration: {0}")]
    Config(String),
    #[error("no chart video lasts at least MINLENGTH")]
    NoEligibleVideos,
    #[error("video {0} not found")]
    VideoNotFound(String),
    #[error("video {0} has no trace")]
    MissingTrace(String),
    #[error(transparent)]
    Playout(#[from] PlayoutError),
}

fn d_minlength() -> f64 {
    72.0
}
fn d_cutoff() -> f64 {
    180.0
}
fn d_one() -> usize {
    1
}
fn d_cycles() -> u32 {
    1
}
fn d_buffer() -> f64 {
    2.0
}
fn d_ceiling() -> f64 {
    3600.0
}
fn d_duration_edges() -> Vec<f64> {
    ClassThresholds::default().duration_edges
}
fn d_bitrate_edges() -> Vec<f64> {
    ClassThresholds::default().bitrate_edges_kbps
}
fn d_burstiness_edges() -> Vec<f64> {
    ClassThresholds::default().burstiness_edges
}
fn d_link_median() -> f64 {
    2000.0
}
fn d_link_sdlog() -> f64 {
    0.7
}
fn d_corpus_size() -> usize {
    1000
}

/// Cycle configuration. Key names match the TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleConfig {
    /// Number of measurement agents.
    #[serde(rename = "M")]
    pub m: usize,
    /// Chart size; defaults to `max(20, M / 50)`.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "MINLENGTH", default = "d_minlength")]
    pub minlength: f64,
    #[serde(rename = "CUTOFF", default = "d_cutoff")]
    pub cutoff: f64,
    #[serde(default = "d_one")]
    pub tests_per_ma_per_cycle: usize,
    #[serde(default = "d_cycles")]
    pub cycles: u32,
    #[serde(default = "d_duration_edges")]
    pub duration_edges: Vec<f64>,
    #[serde(default = "d_bitrate_edges")]
    pub bitrate_edges_kbps: Vec<f64>,
    #[serde(default = "d_burstiness_edges")]
    pub burstiness_edges: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_buffer")]
    pub initial_buffer: f64,
    #[serde(default = "d_buffer")]
    pub rebuffer_target: f64,
    #[serde(default = "d_ceiling")]
    pub ceiling: f64,
    /// Median access-link capacity of generated agents, kbps.
    #[serde(default = "d_link_median")]
    pub link_kbps_median: f64,
    #[serde(default = "d_link_sdlog")]
    pub link_kbps_sdlog: f64,
    /// Size of the synthetic corpus when none is supplied.
    #[serde(default = "d_corpus_size")]
    pub corpus_size: usize,
}

impl CycleConfig {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            n: None,
            minlength: d_minlength(),
            cutoff: d_cutoff(),
            tests_per_ma_per_cycle: 1,
            cycles: 1,
            duration_edges: d_duration_edges(),
            bitrate_edges_kbps: d_bitrate_edges(),
            burstiness_edges: d_burstiness_edges(),
            seed: 0,
            initial_buffer: d_buffer(),
            rebuffer_target: d_buffer(),
            ceiling: d_ceiling(),
            link_kbps_median: d_link_median(),
            link_kbps_sdlog: d_link_sdlog(),
            corpus_size: d_corpus_size(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, OrchestratorError> {
        let cfg: Self = toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn chart_size(&self) -> usize {
        self.n.unwrap_or_else(|| (self.m / 50).max(20))
    }

    pub fn thresholds(&self) -> ClassThresholds {
        ClassThresholds {
            duration_edges: self.duration_edges.clone(),
            bitrate_edges_kbps: self.bitrate_edges_kbps.clone(),
            burstiness_edges: self.burstiness_edges.clone(),
        }
    }

    pub fn player(&self) -> PlayerConfig {
        PlayerConfig {
            initial_buffer: self.initial_buffer,
            rebuffer_target: self.rebuffer_target,
            cutoff: self.cutoff,
            ceiling: self.ceiling,
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: &str| Err(OrchestratorError::Config(m.into()));
        if self.m == 0 {
            return bad("M must be at least 1");
        }
        if self.chart_size() == 0 {
            return bad("N must be at least 1");
        }
        if !(self.cutoff > 0.0) {
            return bad("CUTOFF must be positive");
        }
        if !(self.minlength >= 0.0 && self.minlength < self.cutoff) {
            return bad("MINLENGTH must be non-negative and below CUTOFF");
        }
        if self.tests_per_ma_per_cycle == 0 {
            return bad("tests_per_ma_per_cycle must be at least 1");
        }
        for edges in [&self.duration_edges, &self.bitrate_edges_kbps, &self.burstiness_edges] {
            if edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
                return bad("class edges must be finite and strictly increasing");
            }
        }
        if !(self.link_kbps_median > 0.0 && self.link_kbps_sdlog >= 0.0) {
            return bad("link capacity parameters");
        }
        self.player().validate().map_err(|e| OrchestratorError::Config(e.to_string()))
    }

    /// Non-fatal configuration findings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.chart_size() >= self.m {
            w.push(format!("chart size N = {} is not smaller than M = {}", self.chart_size(), self.m));
        }
        w
    }

    /// `M` idle agents with seeded lognormal link capacities.
    pub fn agents(&self) -> Vec<MeasurementAgent> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX - 1);
        let dist = LogNormal::new(self.link_kbps_median.ln(), self.link_kbps_sdlog).expect("validated parameters");
        (0..self.m as u32)
            .map(|id| MeasurementAgent { id, link: LinkModel::constant(dist.sample(&mut rng)), idle: true })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementAgent {
    pub id: u32,
    pub link: LinkModel,
    /// Tests run only while the subscriber line is idle.
    pub idle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    /// Fetch the chart and test one eligible video at random.
    ChartRandomTest,
    /// Test the named video.
    TestVideo(String),
}

impl Instruction {
    pub fn kind(&self) -> u8 {
        match self {
            Self::ChartRandomTest => 1,
            Self::TestVideo(_) => 2,
        }
    }
}

/// Chart prefix of at most `n` videos lasting at least `minlength` seconds.
pub fn select_videos(charts: &[ChartEntry], n: usize, minlength: f64) -> Result<Vec<ChartEntry>, OrchestratorError> {
    let out: Vec<ChartEntry> = charts.iter().filter(|e| !(e.duration < minlength)).take(n).cloned().collect();
    if out.is_empty() {
        Err(OrchestratorError::NoEligibleVideos)
    } else {
        Ok(out)
    }
}

/// Read-only state shared by all agents during one cycle.
pub struct CycleContext<'a> {
    pub cfg: &'a CycleConfig,
    pub cycle: u32,
    pub chart: ChartService,
    pub minlength: f64,
    videos: HashMap<&'a str, &'a SyntheticVideo>,
}

impl<'a> CycleContext<'a> {
    pub fn new(cfg: &'a CycleConfig, corpus: &'a [SyntheticVideo], cycle: u32, minlength: f64) -> Self {
        let chart_len = cfg.chart_size().max(MIN_CHART_LEN);
        let chart_seed = cfg.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(cycle as u64 + 1));
        Self {
            cfg,
            cycle,
            chart: ChartService::zipf(corpus, chart_len, chart_seed),
            minlength,
            videos: corpus.iter().map(|v| (v.id.as_str(), v)).collect(),
        }
    }

    fn test(&self, ma: &MeasurementAgent, video_id: &str, kind: u8) -> Result<TestRecord, OrchestratorError> {
        let video = self.videos.get(video_id).ok_or_else(|| OrchestratorError::VideoNotFound(video_id.into()))?;
        let trace = video.base_trace().ok_or_else(|| OrchestratorError::MissingTrace(video_id.into()))?;
        let player = self.cfg.player();
        let result = simulate_download(trace, &ma.link, &player)?;
        let stats = trace_stats(&truncate(trace, player.cutoff)).map_err(|_| PlayoutError::EmptyMedia)?;
        let mut rec = verdict(&result, &stats, video.duration, player.cutoff, &self.cfg.thresholds())?;
        rec.video_id = video.id.clone();
        rec.cycle = self.cycle;
        rec.ma_id = ma.id;
        rec.instruction = kind;
        Ok(rec)
    }
}

fn agent_rng(seed: u64, cycle: u32, ma: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cycle as u64) << 32) | ma as u64);
    rng
}

/// Executes one instruction on one agent.
pub fn run_instruction(
    ctx: &CycleContext<'_>,
    ma: &MeasurementAgent,
    instruction: &Instruction,
    rng: &mut ChaCha8Rng,
) -> Result<TestRecord, OrchestratorError> {
    match instruction {
        Instruction::ChartRandomTest => {
            let eligible = select_videos(ctx.chart.fetch(), ctx.cfg.chart_size(), ctx.minlength)?;
            let pick = &eligible[rng.random_range(0..eligible.len())];
            ctx.test(ma, &pick.video_id, 1)
        }
        Instruction::TestVideo(id) => ctx.test(ma, id, 2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub cycle: u32,
    pub minlength_in_force: f64,
    /// First quartile of the durations tested in phase 1.
    pub proposed_minlength: Option<f64>,
    pub minlength_after: f64,
    pub update_ignored: bool,
    pub classified_videos: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAggregate {
    pub tests: usize,
    pub stalled_tests: usize,
    pub mean_total_stall: f64,
    pub mean_startup_delay: f64,
}

/// Append-only store of test records.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Repository {
    records: Vec<TestRecord>,
    pub minlength: f64,
    pub cycles: Vec<CycleSummary>,
}

impl Repository {
    pub fn new(minlength: f64) -> Self {
        Self { records: Vec::new(), minlength, cycles: Vec::new() }
    }

    pub fn records(&self) -> &[TestRecord] {
        &self.records
    }

    fn append(&mut self, mut batch: Vec<TestRecord>) {
        batch.sort_by_key(|r| (r.cycle, r.ma_id, r.sequence));
        self.records.extend(batch);
    }

    /// One JSON object per record, newline terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn video_aggregates(&self) -> BTreeMap<String, VideoAggregate> {
        let mut acc: BTreeMap<String, (usize, usize, f64, f64)> = BTreeMap::new();
        for r in &self.records {
            let e = acc.entry(r.video_id.clone()).or_default();
            e.0 += 1;
            e.1 += (r.stall_count > 0) as usize;
            e.2 += r.total_stall;
            e.3 += r.startup_delay;
        }
        acc.into_iter()
            .map(|(id, (n, s, stall, start))| {
                let k = n as f64;
                (id, VideoAggregate { tests: n, stalled_tests: s, mean_total_stall: stall / k, mean_startup_delay: start / k })
            })
            .collect()
    }

    pub fn bucket_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.bucket.label()).or_insert(0) += 1;
        }
        out
    }
}

/// Linear-interpolation first quartile.
fn first_quartile(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = 0.25 * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

fn check_inputs(cfg: &CycleConfig, corpus: &[SyntheticVideo], agents: &[MeasurementAgent]) -> Result<(), OrchestratorError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(OrchestratorError::Config("corpus is empty".into()));
    }
    if agents.len() != cfg.m {
        return Err(OrchestratorError::Config(format!("{} agents supplied for M = {}", agents.len(), cfg.m)));
    }
    Ok(())
}

/// Runs `cfg.cycles` cycles on a fresh repository.
pub fn run_cycles(
    cfg: &CycleConfig,
    corpus: &[SyntheticVideo],
    agents: &[MeasurementAgent],
) -> Result<Repository, OrchestratorError> {
    check_inputs(cfg, corpus, agents)?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    let mut repo = Repository::new(cfg.minlength);
    for cycle in 0..cfg.cycles {
        run_cycle_into(&mut repo, cycle, cfg, corpus, agents)?;
    }
    Ok(repo)
}

/// Runs a single cycle on a fresh repository.
pub fn run_cycle(
    cfg: &CycleConfig,
    corpus: &[SyntheticVideo],
    agents: &[MeasurementAgent],
) -> Result<Repository, OrchestratorError> {
    check_inputs(cfg, corpus, agents)?;
    let mut repo = Repository::new(cfg.minlength);
    run_cycle_into(&mut repo, 0, cfg, corpus, agents)?;
    Ok(repo)
}

fn log_failure(ma: u32, e: &OrchestratorError) {
    log::warn!("agent {ma}: test failed: {e}");
}

/// Runs one cycle, appending to `repo` and updating its MINLENGTH.
pub fn run_cycle_into(
    repo: &mut Repository,
    cycle: u32,
    cfg: &CycleConfig,
    corpus: &[SyntheticVideo],
    agents: &[MeasurementAgent],
) -> Result<(), OrchestratorError> {
    check_inputs(cfg, corpus, agents)?;
    let minlength = repo.minlength;
    let ctx = CycleContext::new(cfg, corpus, cycle, minlength);
    let mut next_seq: HashMap<u32, u64> = HashMap::new();
    for r in &repo.records {
        let s = next_seq.entry(r.ma_id).or_default();
        *s = (*s).max(r.sequence + 1);
    }
    let seq0 = |id: u32| next_seq.get(&id).copied().unwrap_or(0);

    // Phase 1: one chart-driven random test per idle agent.
    let phase1: Vec<TestRecord> = agents
        .par_iter()
        .filter(|a| a.idle)
        .filter_map(|ma| {
            let mut rng = agent_rng(cfg.seed, cycle, ma.id);
            match run_instruction(&ctx, ma, &Instruction::ChartRandomTest, &mut rng) {
                Ok(mut r) => {
                    r.sequence = seq0(ma.id);
                    Some(Ok(r))
                }
                Err(OrchestratorError::NoEligibleVideos) => Some(Err(OrchestratorError::NoEligibleVideos)),
                Err(e) => {
                    log_failure(ma.id, &e);
                    None
                }
            }
        })
        .collect::<Result<_, _>>()?;

    // Phase 2: classify tested videos and move MINLENGTH.
    let mut first_seen: Vec<&TestRecord> = Vec::new();
    for r in &phase1 {
        if !first_seen.iter().any(|s| s.video_id == r.video_id) {
            first_seen.push(r);
        }
    }
    let durations: Vec<f64> = first_seen.iter().map(|r| r.video_duration).collect();
    let proposed = first_quartile(&durations);
    let update_ignored = proposed.is_some_and(|q| q >= cfg.cutoff);
    let new_minlength = match proposed {
        Some(q) if q < cfg.cutoff => q,
        _ => minlength,
    };
    let mut by_bucket: BTreeMap<Bucket, Vec<String>> = BTreeMap::new();
    for r in first_seen.iter().filter(|r| !(r.video_duration < new_minlength)) {
        let mut key = r.bucket.clone();
        key.no_stall = true;
        by_bucket.entry(key).or_default().push(r.video_id.clone());
    }
    // Interleave buckets so consecutive assignments cover different classes.
    let mut classified = Vec::new();
    let depth = by_bucket.values().map(Vec::len).max().unwrap_or(0);
    for i in 0..depth {
        for ids in by_bucket.values() {
            if let Some(id) = ids.get(i) {
                classified.push(id.clone());
            }
        }
    }

    // Phase 3: round-robin type-2 tests for the remaining slots.
    let mut plan: Vec<(usize, Vec<String>)> = Vec::new();
    if !classified.is_empty() {
        let mut g = 0;
        for (i, _) in agents.iter().enumerate().filter(|(_, a)| a.idle) {
            let mut ids = Vec::new();
            for _ in 1..cfg.tests_per_ma_per_cycle {
                ids.push(classified[g % classified.len()].clone());
                g += 1;
            }
            plan.push((i, ids));
        }
    }
    let ctx3 = CycleContext { minlength: new_minlength, ..ctx };
    let phase3: Vec<TestRecord> = plan
        .par_iter()
        .flat_map_iter(|(i, ids)| {
            let ma = &agents[*i];
            let start = seq0(ma.id) + 1;
            let ctx3 = &ctx3;
            ids.iter().enumerate().filter_map(move |(k, id)| {
                // type-2 tests draw nothing from the rng
                let mut rng = agent_rng(ctx3.cfg.seed, ctx3.cycle, ma.id);
                match run_instruction(ctx3, ma, &Instruction::TestVideo(id.clone()), &mut rng) {
                    Ok(mut r) => {
                        r.sequence = start + k as u64;
                        Some(r)
                    }
                    Err(e) => {
                        log_failure(ma.id, &e);
                        None
                    }
                }
            })
        })
        .collect();

    repo.append(phase1);
    repo.append(phase3);
    repo.records.sort_by_key(|r| (r.cycle, r.ma_id, r.sequence));
    repo.cycles.push(CycleSummary {
        cycle,
        minlength_in_force: minlength,
        proposed_minlength: proposed,
        minlength_after: new_minlength,
        update_ignored,
        classified_videos: classified.len(),
    });
    repo.minlength = new_minlength;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_corpus, PopulationProfile};
    use crate::trace::BitrateTrace;

    fn entries(durations: &[f64]) -> Vec<ChartEntry> {
        durations.iter().enumerate().map(|(i, &d)| ChartEntry { video_id: format!("v{i}"), duration: d }).collect()
    }

    #[test]
    fn select_examples() {
        let sel = select_videos(&entries(&[60.0, 72.0, 300.0]), 3, 72.0).unwrap();
        assert_eq!(sel.iter().map(|e| e.duration).collect::<Vec<_>>(), vec![72.0, 300.0]);
        assert_eq!(select_videos(&entries(&[10.0, 20.0]), 3, 72.0), Err(OrchestratorError::NoEligibleVideos));
        let sel = select_videos(&entries(&[60.0, 100.0, 300.0]), 1, 72.0).unwrap();
        assert_eq!(sel.len(), 1);
        assert_eq!(sel[0].duration, 100.0);
    }

    #[test]
    fn config_from_toml() {
        let cfg = CycleConfig::from_toml("M = 1000\nMINLENGTH = 60\nseed = 3\n").unwrap();
        assert_eq!(cfg.chart_size(), 20);
        assert_eq!(cfg.cutoff, 180.0);
        assert_eq!(cfg.minlength, 60.0);
        assert_eq!(CycleConfig::new(5000).chart_size(), 100);
        assert!(CycleConfig::from_toml("M = 10\nMINLENGTH = 200\n").is_err());
        assert!(CycleConfig::from_toml("M = 10\nbogus = 1\n").is_err());
        assert!(!CycleConfig::new(10).warnings().is_empty());
    }

    fn small_corpus() -> Vec<SyntheticVideo> {
        synth_corpus(150, &PopulationProfile::default(), 11).unwrap()
    }

    #[test]
    fn cycle_counts_and_invariants() {
        let corpus = small_corpus();
        let mut cfg = CycleConfig::new(10);
        cfg.n = Some(5);
        cfg.tests_per_ma_per_cycle = 3;
        cfg.seed = 4;
        let agents = cfg.agents();
        let repo = run_cycle(&cfg, &corpus, &agents).unwrap();
        assert_eq!(repo.records().len(), 30);
        for a in &agents {
            assert!(repo.records().iter().any(|r| r.ma_id == a.id));
        }
        let mut distinct: Vec<&str> = repo.records().iter().map(|r| r.video_id.as_str()).collect();
        distinct.sort();
        distinct.dedup();
        assert!(distinct.len() <= 5);
        let summary = &repo.cycles[0];
        for r in repo.records() {
            let floor = if r.instruction == 1 { summary.minlength_in_force } else { summary.minlength_after };
            assert!(r.video_duration >= floor);
            assert_eq!(r.cutoff, 180.0);
        }
        assert_eq!(repo.bucket_counts().values().sum::<usize>(), repo.records().len());
        let again = run_cycle(&cfg, &corpus, &agents).unwrap();
        assert_eq!(repo.to_jsonl(), again.to_jsonl());
    }

    #[test]
    fn single_agent_cycle() {
        let corpus = small_corpus();
        let cfg = CycleConfig { n: Some(3), ..CycleConfig::new(1) };
        let repo = run_cycle(&cfg, &corpus, &cfg.agents()).unwrap();
        assert_eq!(repo.records().len(), 1);
    }

    fn fixed_corpus(durations: &[f64]) -> Vec<SyntheticVideo> {
        let mut corpus = synth_corpus(durations.len(), &PopulationProfile::default(), 2).unwrap();
        for (v, &d) in corpus.iter_mut().zip(durations) {
            v.duration = d;
            for r in v.variants.iter_mut().filter(|r| r.available) {
                r.trace = Some(BitrateTrace::new(1.0, vec![500.0; d as usize]).unwrap());
            }
        }
        corpus
    }

    #[test]
    fn long_videos_do_not_move_minlength_past_cutoff() {
        let corpus = fixed_corpus(&[300.0; 20]);
        let cfg = CycleConfig { n: Some(5), tests_per_ma_per_cycle: 2, ..CycleConfig::new(4) };
        let repo = run_cycle(&cfg, &corpus, &cfg.agents()).unwrap();
        let s = &repo.cycles[0];
        assert_eq!(s.proposed_minlength, Some(300.0));
        assert!(s.update_ignored);
        assert_eq!(repo.minlength, 72.0);
    }

    #[test]
    fn type_two_on_long_video_is_cut() {
        let corpus = fixed_corpus(&[600.0, 90.0]);
        let cfg = CycleConfig::new(1);
        let ctx = CycleContext::new(&cfg, &corpus, 0, 72.0);
        let ma = &cfg.agents()[0];
        let mut rng = agent_rng(0, 0, 0);
        let rec = run_instruction(&ctx, ma, &Instruction::TestVideo(corpus[0].id.clone()), &mut rng).unwrap();
        assert_eq!(rec.cutoff, 180.0);
        assert_eq!(rec.tested_duration, 180.0);
        assert_eq!(rec.instruction, 2);
        assert_eq!(
            run_instruction(&ctx, ma, &Instruction::TestVideo("nope".into()), &mut rng),
            Err(OrchestratorError::VideoNotFound("nope".into()))
        );
    }

    #[test]
    fn type_one_is_forced_and_repeatable() {
        let corpus = fixed_corpus(&[30.0, 40.0, 100.0]);
        let cfg = CycleConfig::new(1);
        let ctx = CycleContext::new(&cfg, &corpus, 0, 72.0);
        let ma = &cfg.agents()[0];
        let a = run_instruction(&ctx, ma, &Instruction::ChartRandomTest, &mut agent_rng(1, 0, 0)).unwrap();
        assert_eq!(a.video_id, corpus[2].id);
        let corpus = small_corpus();
        let ctx = CycleContext::new(&cfg, &corpus, 0, 72.0);
        let a = run_instruction(&ctx, ma, &Instruction::ChartRandomTest, &mut agent_rng(1, 0, 0)).unwrap();
        let b = run_instruction(&ctx, ma, &Instruction::ChartRandomTest, &mut agent_rng(1, 0, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quartile() {
        assert_eq!(first_quartile(&[300.0; 4]), Some(300.0));
        assert_eq!(first_quartile(&[1.0, 2.0, 3.0, 4.0, 5.0]), Some(2.0));
        assert_eq!(first_quartile(&[]), None);
    }
}
