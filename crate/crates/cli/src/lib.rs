//! `vidmeter` command-line front end.
//!
//! Every subcommand writes a `<command>_report.csv` into `--out` (default
//! the working directory) plus plot-ready CSV tables. Exit status is 0 on
//! success, 1 on usage errors and 2 on data errors.

pub mod report;

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use vidmeter_core::distfit::{ecdf, fit_lognormal, ks_statistic, lognormal_quantile};
use vidmeter_core::framelog_io::{parse_mp4, read_framelog_csv, write_framelog_csv};
use vidmeter_core::orchestrator::{run_cycles, CycleConfig};
use vidmeter_core::playout::{simulate_download, LinkModel, PlayerConfig};
use vidmeter_core::scale::simulate_resolution_with;
use vidmeter_core::synth::{
    duration_tail, log_size_pairs, read_corpus_dir, synth_corpus, synth_corpus_metadata, write_corpus_dir,
    PopulationProfile,
};
use vidmeter_core::{bin_frames, trace_stats, truncate, BitrateTrace, FrameLog, Resolution};

pub use report::{Provenance, Report, ReportRecord};
use report::{table, write_file};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
        }
    }
}

fn data<E: std::fmt::Display>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{ctx}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "vidmeter", version, about = "Video bitrate trace analysis and active measurement toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for every random draw [default: 0, or the config file's seed]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Truncation time in seconds [default: 180, or the config file's CUTOFF]
    #[arg(long, global = true)]
    pub cutoff: Option<f64>,
    /// Bitrate binning interval in seconds
    #[arg(long, global = true, default_value_t = 1.0)]
    pub interval: f64,
    /// Directory for report files
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

impl Global {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn cutoff(&self) -> f64 {
        self.cutoff.unwrap_or(180.0)
    }

    fn echo(&self, r: &mut Report) {
        r.config("seed", self.seed()).config("cutoff", self.cutoff()).config("interval", self.interval);
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert an MP4 file or frame-log CSV into a canonical frame-log CSV
    Ingest { input: PathBuf, output: PathBuf },
    /// Bitrate statistics of frame logs, full length and cut at --cutoff
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Fit a lognormal to positive samples (one per line) or to synthetic durations
    Fit {
        input: Option<PathBuf>,
        /// Fit the durations of this many synthetic videos instead of a file
        #[arg(long, conflicts_with = "input")]
        synth_durations: Option<usize>,
    },
    /// Rescale a source trace to a reference trace's mean and measure the error
    Scale { source: PathBuf, reference: PathBuf },
    /// Generate a synthetic corpus directory
    Synth {
        count: usize,
        output: PathBuf,
        /// Write metadata only, without traces
        #[arg(long)]
        metadata_only: bool,
        /// Shortest video duration in seconds
        #[arg(long)]
        min_duration: Option<f64>,
    },
    /// Simulate a progressive download over a link
    Simulate(SimulateArgs),
    /// Run measurement cycles against a corpus
    Cycle {
        /// TOML cycle configuration
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corpus directory; a synthetic corpus is generated when absent
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Number of measurement agents when no config is given
        #[arg(long, default_value_t = 100)]
        agents: usize,
    },
    /// Serve a corpus directory as paced byte streams
    Serve {
        corpus: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Media frame log (MP4 or CSV)
    pub media: Option<PathBuf>,
    /// Constant media bitrate instead of a frame log, kbps
    #[arg(long, conflicts_with = "media", requires = "media_duration")]
    pub media_kbps: Option<f64>,
    /// Duration of the constant media, seconds
    #[arg(long)]
    pub media_duration: Option<f64>,
    /// Constant link capacity, kbps
    #[arg(long, conflicts_with = "link_trace")]
    pub link_kbps: Option<f64>,
    /// Link capacity per --interval, one kbps value per line
    #[arg(long)]
    pub link_trace: Option<PathBuf>,
    /// Wall seconds before the first byte arrives
    #[arg(long, default_value_t = 0.0)]
    pub latency: f64,
    #[arg(long, default_value_t = 2.0)]
    pub initial_buffer: f64,
    #[arg(long, default_value_t = 2.0)]
    pub rebuffer_target: f64,
    #[arg(long, default_value_t = 3600.0)]
    pub ceiling: f64,
}

/// Parses `argv` and runs the command, returning the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if !(g.interval > 0.0 && g.interval.is_finite()) {
        return Err(CliError::Usage("--interval must be positive".into()));
    }
    if g.cutoff.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
        return Err(CliError::Usage("--cutoff must be positive".into()));
    }
    match &cli.command {
        Command::Ingest { input, output } => ingest(g, input, output),
        Command::Stats { inputs } => stats(g, inputs),
        Command::Fit { input, synth_durations } => fit(g, input.as_deref(), *synth_durations),
        Command::Scale { source, reference } => scale(g, source, reference),
        Command::Synth { count, output, metadata_only, min_duration } => {
            synth(g, *count, output, *metadata_only, *min_duration)
        }
        Command::Simulate(a) => simulate(g, a),
        Command::Cycle { config, corpus, agents } => cycle(g, config.as_deref(), corpus.as_deref(), *agents),
        Command::Serve { corpus, listen } => serve(corpus, *listen),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(data(path.display()))
}

fn looks_like_mp4(bytes: &[u8]) -> bool {
    bytes.len() >= 8 && matches!(&bytes[4..8], b"ftyp" | b"styp" | b"moov" | b"moof" | b"sidx" | b"free" | b"mdat")
}

/// Reads an MP4 file or frame-log CSV. MP4 logs take the file stem as id.
pub fn load_framelog(path: &Path) -> Result<FrameLog, CliError> {
    let bytes = read(path)?;
    if looks_like_mp4(&bytes) {
        let mut log = parse_mp4(&bytes).map_err(data(path.display()))?;
        log.video_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(log)
    } else {
        read_framelog_csv(&bytes).map_err(data(path.display()))
    }
}

fn load_trace(path: &Path, interval: f64) -> Result<(String, BitrateTrace), CliError> {
    let log = load_framelog(path)?;
    let trace = bin_frames(&log, interval).map_err(data(path.display()))?;
    Ok((log.video_id, trace))
}

/// One positive number per line; blank lines and `#` comments are skipped.
fn read_numbers(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = String::from_utf8(read(path)?).map_err(data(path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

fn trace_rows(traces: &[&BitrateTrace]) -> Vec<Vec<String>> {
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let iv = traces.first().map_or(1.0, |t| t.interval());
    (0..len)
        .map(|i| {
            let mut row = vec![format!("{}", i as f64 * iv)];
            row.extend(traces.iter().map(|t| t.values().get(i).map_or(String::new(), |v| v.to_string())));
            row
        })
        .collect()
}

fn ingest(g: &Global, input: &Path, output: &Path) -> Result<(), CliError> {
    let log = load_framelog(input)?;
    write_file(output, &write_framelog_csv(&log))?;
    let mut r = Report::new("ingest");
    g.echo(&mut r);
    r.config("input", input.display()).config("output", output.display()).config("itag", log.itag.itag);
    r.push("frames", log.len() as f64, "count", Provenance::Measured)?;
    r.push("total_bytes", log.total_bytes() as f64, "bytes", Provenance::Measured)?;
    r.push("last_pts", log.last_pts().unwrap_or(0.0), "s", Provenance::Measured)?;
    if let Some(d) = log.declared_duration {
        r.push("declared_duration", d, "s", Provenance::Measured)?;
    }
    r.write(&g.out.join("ingest_report.csv"))
}

fn stats(g: &Global, inputs: &[PathBuf]) -> Result<(), CliError> {
    let mut r = Report::new("stats");
    g.echo(&mut r);
    for path in inputs {
        let (id, trace) = load_trace(path, g.interval)?;
        r.config("input", path.display());
        let tag = format!("measured:{id}");
        let cut = truncate(&trace, g.cutoff());
        for (suffix, t) in [("", &trace), ("_cutoff", &cut)] {
            let s = trace_stats(t).map_err(data(path.display()))?;
            r.push_tagged(&format!("mean_kbps{suffix}"), s.mean_kbps, "kbps", &tag)?;
            r.push_tagged(&format!("stddev_kbps{suffix}"), s.stddev_kbps, "kbps", &tag)?;
            if let Some(b) = s.burstiness {
                r.push_tagged(&format!("burstiness{suffix}"), b, "ratio", &tag)?;
            }
            r.push_tagged(&format!("duration{suffix}"), s.duration, "s", &tag)?;
        }
        let file = g.out.join(format!("stats_trace_{id}.csv"));
        write_file(&file, table(&["time_s", "kbps"], trace_rows(&[&trace])).as_bytes())?;
    }
    r.write(&g.out.join("stats_report.csv"))
}

fn fit(g: &Global, input: Option<&Path>, synth_n: Option<usize>) -> Result<(), CliError> {
    let mut r = Report::new("fit");
    g.echo(&mut r);
    let samples = match (input, synth_n) {
        (Some(p), _) => {
            r.config("input", p.display());
            read_numbers(p)?
        }
        (None, Some(n)) => {
            r.config("synth_durations", n);
            let corpus = synth_corpus_metadata(n, &PopulationProfile::default(), g.seed()).map_err(data("synth"))?;
            corpus.iter().map(|v| v.duration).collect()
        }
        (None, None) => return Err(CliError::Usage("fit needs an input file or --synth-durations".into())),
    };
    let f = fit_lognormal(&samples).map_err(data("fit"))?;
    let ks = ks_statistic(&samples, &f).map_err(data("fit"))?;
    let q = |p| lognormal_quantile(p, &f).map_err(data("quantile"));
    r.push("n", f.n as f64, "count", Provenance::Measured)?;
    r.push("meanlog", f.meanlog, "log", Provenance::Measured)?;
    r.push("sdlog", f.sdlog, "log", Provenance::Measured)?;
    r.push("median", f.median(), "sample", Provenance::Model)?;
    r.push("mean", f.mean(), "sample", Provenance::Model)?;
    r.push("q1", q(0.25)?, "sample", Provenance::Model)?;
    r.push("q3", q(0.75)?, "sample", Provenance::Model)?;
    r.push("ks_statistic", ks, "ratio", Provenance::Measured)?;
    let table_rows = ecdf(&samples)
        .map_err(data("ecdf"))?
        .points
        .iter()
        .map(|&(x, p)| vec![x.to_string(), p.to_string(), f.cdf(x).to_string()])
        .collect::<Vec<_>>();
    write_file(&g.out.join("fit_ecdf.csv"), table(&["x", "ecdf", "model_cdf"], table_rows).as_bytes())?;
    r.write(&g.out.join("fit_report.csv"))
}

fn scale(g: &Global, source: &Path, reference: &Path) -> Result<(), CliError> {
    let (sid, src) = load_trace(source, g.interval)?;
    let (rid, refr) = load_trace(reference, g.interval)?;
    let rep = simulate_resolution_with(&src, &refr, g.cutoff()).map_err(data("scale"))?;
    let mut r = Report::new("scale");
    g.echo(&mut r);
    r.config("source", source.display()).config("reference", reference.display());
    if let Some(w) = &rep.warning {
        r.config("warning", w);
        log::warn!("{w}");
    }
    r.push("mape", rep.mape, "percent", Provenance::Measured)?;
    if let Some(p) = rep.pearson {
        r.push("pearson", p, "ratio", Provenance::Measured)?;
    }
    r.push("compared_len", rep.compared_len as f64, "intervals", Provenance::Measured)?;
    r.push("scaled_mean_kbps", rep.scaled.mean().unwrap_or(0.0), "kbps", Provenance::Measured)?;
    let n = rep.compared_len;
    let (a, b) = (src.prefix(n), refr.prefix(n));
    let rows = trace_rows(&[&a, &b, &rep.scaled]);
    let header = ["time_s", &format!("{sid}_kbps"), &format!("{rid}_kbps"), "scaled_kbps"];
    write_file(&g.out.join("scale_traces.csv"), table(&header, rows).as_bytes())?;
    r.write(&g.out.join("scale_report.csv"))
}

fn synth(g: &Global, n: usize, output: &Path, metadata_only: bool, min_duration: Option<f64>) -> Result<(), CliError> {
    let mut profile = PopulationProfile::default();
    if let Some(m) = min_duration {
        profile.min_duration = m;
    }
    profile.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = if metadata_only {
        synth_corpus_metadata(n, &profile, g.seed())
    } else {
        synth_corpus(n, &profile, g.seed())
    }
    .map_err(data("synth"))?;
    write_corpus_dir(output, &corpus).map_err(data(output.display()))?;

    let mut r = Report::new("synth");
    g.echo(&mut r);
    r.config("output", output.display()).config("metadata_only", metadata_only).config("min_duration", profile.min_duration);
    r.push("videos", corpus.len() as f64, "count", Provenance::Run)?;
    let durations: Vec<f64> = corpus.iter().map(|v| v.duration).collect();
    let df = fit_lognormal(&durations).map_err(data("duration fit"))?;
    r.push("duration_meanlog", df.meanlog, "log_s", Provenance::Measured)?;
    r.push("duration_sdlog", df.sdlog, "log_s", Provenance::Measured)?;
    let over = durations.iter().filter(|d| **d > 600.0).count() as f64 / durations.len() as f64;
    r.push("fraction_over_600s", over, "ratio", Provenance::Measured)?;
    r.push("model_fraction_over_600s", duration_tail(&profile, 600.0), "ratio", Provenance::Model)?;
    for res in [Resolution::P360, Resolution::P720, Resolution::P1080] {
        let variants: Vec<_> = corpus.iter().filter_map(|v| v.variant(res)).filter(|x| x.available).collect();
        if variants.len() < 2 {
            continue;
        }
        for (label, sizes) in [
            ("mp4", variants.iter().map(|x| x.mp4_size_mb).collect::<Vec<_>>()),
            ("webm", variants.iter().map(|x| x.webm_size_mb).collect()),
        ] {
            let f = fit_lognormal(&sizes).map_err(data("size fit"))?;
            r.push(&format!("{label}_{res}_size_meanlog"), f.meanlog, "log_MB", Provenance::Measured)?;
            r.push(&format!("{label}_{res}_size_sdlog"), f.sdlog, "log_MB", Provenance::Measured)?;
        }
    }
    let pairs = log_size_pairs(&corpus);
    if pairs.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        if let Ok(p) = vidmeter_core::trace::pearson_values(&x, &y) {
            r.push("log_size_pearson_mp4_webm", p, "ratio", Provenance::Measured)?;
        }
        if let Some(s) = vidmeter_core::synth::regression_slope(&pairs) {
            r.push("log_size_slope_mp4_webm", s, "ratio", Provenance::Measured)?;
        }
    }
    r.write(&g.out.join("synth_report.csv"))
}

fn simulate(g: &Global, a: &SimulateArgs) -> Result<(), CliError> {
    let mut r = Report::new("simulate");
    g.echo(&mut r);
    let media = match (&a.media, a.media_kbps, a.media_duration) {
        (Some(p), _, _) => {
            r.config("media", p.display());
            load_trace(p, g.interval)?.1
        }
        (None, Some(k), Some(d)) => {
            r.config("media_kbps", k).config("media_duration", d);
            if !(k >= 0.0 && d > 0.0) {
                return Err(CliError::Usage("--media-kbps and --media-duration must be positive".into()));
            }
            let n = (d / g.interval).ceil() as usize;
            BitrateTrace::new(g.interval, vec![k; n]).map_err(data("media"))?
        }
        _ => return Err(CliError::Usage("simulate needs a media file or --media-kbps with --media-duration".into())),
    };
    let link = match (a.link_kbps, &a.link_trace) {
        (Some(k), _) => {
            r.config("link_kbps", k);
            LinkModel::constant(k)
        }
        (None, Some(p)) => {
            r.config("link_trace", p.display());
            LinkModel::trace(g.interval, read_numbers(p)?)
        }
        (None, None) => return Err(CliError::Usage("simulate needs --link-kbps or --link-trace".into())),
    }
    .with_latency(a.latency);
    let cfg = PlayerConfig {
        initial_buffer: a.initial_buffer,
        rebuffer_target: a.rebuffer_target,
        cutoff: g.cutoff(),
        ceiling: a.ceiling,
    };
    r.config("latency", a.latency)
        .config("initial_buffer", a.initial_buffer)
        .config("rebuffer_target", a.rebuffer_target)
        .config("ceiling", a.ceiling);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let res = simulate_download(&media, &link, &cfg).map_err(data("simulate"))?;
    r.push("startup_delay", res.startup_delay, "s", Provenance::Simulated)?;
    r.push("stall_count", res.stall_events.len() as f64, "count", Provenance::Simulated)?;
    r.push("total_stall", res.total_stall, "s", Provenance::Simulated)?;
    r.push("downloaded_bytes", res.downloaded_bytes as f64, "bytes", Provenance::Simulated)?;
    r.push("media_duration", res.media_duration, "s", Provenance::Simulated)?;
    r.push("completed", res.completed as u8 as f64, "bool", Provenance::Simulated)?;
    r.push("timed_out", res.timed_out as u8 as f64, "bool", Provenance::Simulated)?;
    if let Some(t) = res.playback_end {
        r.push("playback_end", t, "s", Provenance::Simulated)?;
    }
    let rows = res
        .stall_events
        .iter()
        .map(|s| vec![s.media_time.to_string(), s.wall_time.to_string(), s.duration.to_string()])
        .collect::<Vec<_>>();
    write_file(&g.out.join("simulate_stalls.csv"), table(&["media_time_s", "wall_time_s", "duration_s"], rows).as_bytes())?;
    r.write(&g.out.join("simulate_report.csv"))
}

fn cycle(g: &Global, config: Option<&Path>, corpus_dir: Option<&Path>, agents: usize) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(p) => {
            let text = String::from_utf8(read(p)?).map_err(data(p.display()))?;
            CycleConfig::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => CycleConfig::new(agents),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(c) = g.cutoff {
        cfg.cutoff = c;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    let corpus = match corpus_dir {
        Some(d) => read_corpus_dir(d).map_err(data(d.display()))?,
        None => synth_corpus(cfg.corpus_size, &PopulationProfile::default(), cfg.seed).map_err(data("synth"))?,
    };
    let agents = cfg.agents();
    let repo = run_cycles(&cfg, &corpus, &agents).map_err(data("cycle"))?;

    write_file(&g.out.join("repository.jsonl"), repo.to_jsonl().as_bytes())?;
    let cycles = serde_json::to_string_pretty(&repo.cycles).map_err(data("cycles"))?;
    write_file(&g.out.join("cycles.json"), cycles.as_bytes())?;
    let buckets = repo.bucket_counts().into_iter().map(|(k, v)| vec![k, v.to_string()]);
    write_file(&g.out.join("cycle_buckets.csv"), table(&["bucket", "tests"], buckets).as_bytes())?;
    let videos = repo.video_aggregates().into_iter().map(|(id, a)| {
        vec![id, a.tests.to_string(), a.stalled_tests.to_string(), a.mean_total_stall.to_string(), a.mean_startup_delay.to_string()]
    });
    let header = ["video_id", "tests", "stalled_tests", "mean_total_stall_s", "mean_startup_delay_s"];
    write_file(&g.out.join("cycle_videos.csv"), table(&header, videos).as_bytes())?;

    let mut r = Report::new("cycle");
    let toml = config_echo(&cfg);
    for line in toml.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            r.config(k, v);
        }
    }
    r.config("corpus", corpus_dir.map_or("synthetic".to_string(), |d| d.display().to_string()));
    r.push("tests", repo.records().len() as f64, "count", Provenance::Run)?;
    let stalled = repo.records().iter().filter(|x| x.stall_count > 0).count();
    r.push("stalled_tests", stalled as f64, "count", Provenance::Simulated)?;
    let mut distinct: Vec<&str> = repo.records().iter().map(|x| x.video_id.as_str()).collect();
    distinct.sort_unstable();
    distinct.dedup();
    r.push("distinct_videos", distinct.len() as f64, "count", Provenance::Run)?;
    r.push("final_minlength", repo.minlength, "s", Provenance::Run)?;
    r.write(&g.out.join("cycle_report.csv"))
}

fn config_echo(cfg: &CycleConfig) -> String {
    let v = serde_json::to_value(cfg).unwrap_or_default();
    let mut out = String::new();
    if let Some(map) = v.as_object() {
        for (k, v) in map {
            out.push_str(&format!("{k} = {v}\n"));
        }
    }
    out
}

fn serve(corpus: &Path, listen: SocketAddr) -> Result<(), CliError> {
    let catalog = vidmeter_trafficgen::Catalog::load_dir(corpus).map_err(data(corpus.display()))?;
    let rt = tokio::runtime::Runtime::new().map_err(data("runtime"))?;
    rt.block_on(vidmeter_trafficgen::serve(catalog, listen)).map_err(data(listen))
}
