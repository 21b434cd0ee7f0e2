//! `thdaq` command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (bad data, comparison outside
//! tolerance, I/O), 2 usage or configuration error. Diagnostics go to
//! stderr; data goes to files or stdout. Every argument and configuration
//! file is validated before any output file is created.

use std::ffi::OsString;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use chrono::{DateTime, SubsecRound, TimeDelta, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::acquisition::{
    acquire, format_timestamp, ChannelSet, Clock, LiveReadout, SampleSink, SessionConfig,
    TransportSpec, DEFAULT_BAUD,
};
use crate::calibration::{fit_polynomial, ProfileConfig, ProfileSet};
use crate::device_sim::{AmbientScenario, Pacing, SimConfig, Simulator, Source};
use crate::storage::{
    compare_series, format_sig6, read_csv, reconstruct_waveform, reconstruct_waveform_as, Column,
    CsvWriter, PlotFormat, Series,
};
use crate::stop::StopHandle;

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "THDAQ_CONFIG";
/// Time base used for synthetic timestamps unless overridden.
pub const DEFAULT_TIME_BASE: &str = "2024-01-01T00:00:00Z";

#[derive(Debug, Parser)]
#[command(
    name = "thdaq",
    version,
    about = "Temperature/humidity acquisition: simulate, acquire, replay, fit, compare, plot",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Configuration file with [ch0]..[ch3] profiles and an optional [session] table.
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Print the fully resolved configuration to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the device simulator and emit wire records.
    Simulate(SimulateArgs),
    /// Acquire from a serial port, TCP endpoint or file.
    Acquire(AcquireArgs),
    /// Decode a recorded capture with reproducible timestamps.
    Replay(ReplayArgs),
    /// Least-squares polynomial fit of calibration points.
    Fit(FitArgs),
    /// Compare one column of two CSV logs.
    Compare(CompareArgs),
    /// Reconstruct waveforms from CSV logs.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Constant scenario shorthand, `const:TEMP,RH`.
    #[arg(long, value_name = "SPEC", conflicts_with = "scenario_file")]
    pub scenario: Option<String>,
    /// Scenario definition file (TOML).
    #[arg(long, value_name = "PATH")]
    pub scenario_file: Option<PathBuf>,
    /// Temperature source: const:V, sine:MEAN,AMP,PERIOD_S[,PHASE], csv:PATH#COL, or off.
    #[arg(long = "temp", value_name = "SPEC")]
    pub temperature: Option<String>,
    /// Humidity source, same forms as --temp.
    #[arg(long, value_name = "SPEC")]
    pub rh: Option<String>,
    /// Scenario length in simulated seconds.
    #[arg(long, value_name = "SECONDS")]
    pub duration: Option<f64>,
    /// Stop after this many frames.
    #[arg(long, value_name = "N")]
    pub count: Option<u64>,
    /// Sample rate in Hz (0.1 to 1000).
    #[arg(long, value_name = "HZ")]
    pub rate: Option<f64>,
    /// Constant voltage on channel 2.
    #[arg(long, value_name = "VOLTS")]
    pub ch2: Option<f64>,
    /// Constant voltage on channel 3.
    #[arg(long, value_name = "VOLTS")]
    pub ch3: Option<f64>,
    /// Allowed temperature span, `LO,HI` in °C.
    #[arg(long, value_name = "LO,HI")]
    pub temp_envelope: Option<String>,
    /// Allowed humidity span, `LO,HI` in %RH.
    #[arg(long, value_name = "LO,HI")]
    pub rh_envelope: Option<String>,
    /// Add ±½ LSB uniform noise before quantization.
    #[arg(long)]
    pub noise: bool,
    /// Noise seed (implies --noise).
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Pace frames in real time instead of as fast as possible.
    #[arg(long)]
    pub realtime: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Write records to a file, FIFO or pseudo-terminal.
    #[arg(long, value_name = "PATH", required_unless_present = "listen", conflicts_with = "listen")]
    pub out: Option<PathBuf>,
    /// Serve records to one TCP client at this address.
    #[arg(long, value_name = "ADDR")]
    pub listen: Option<String>,
    /// Also write the true scenario values as a CSV log.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Timestamp of tick 0 in the truth log.
    #[arg(long, value_name = "RFC3339")]
    pub time_base: Option<String>,
}

#[derive(Debug, Args)]
pub struct SinkArgs {
    /// Log samples to this CSV file.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Append to the CSV file instead of replacing it.
    #[arg(long, requires = "csv")]
    pub append: bool,
    /// Enabled channels, e.g. `0,1`.
    #[arg(long, value_name = "LIST")]
    pub channels: Option<String>,
    /// Print one readout line per sample to stdout.
    #[arg(long)]
    pub live: bool,
}

#[derive(Debug, Args)]
pub struct AcquireArgs {
    /// Serial device path (8N1).
    #[arg(long, value_name = "PATH", group = "source")]
    pub serial: Option<String>,
    /// Serial baud rate.
    #[arg(long, requires = "serial")]
    pub baud: Option<u32>,
    /// TCP endpoint `host:port`.
    #[arg(long, value_name = "ADDR", group = "source")]
    pub connect: Option<String>,
    /// Read from a file or FIFO.
    #[arg(long, value_name = "PATH", group = "source")]
    pub file: Option<PathBuf>,
    /// Start a simulator on a local socket and acquire from it.
    #[arg(long, group = "source")]
    pub loopback: bool,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub sinks: SinkArgs,
    /// End the session after this many seconds.
    #[arg(long, value_name = "SECONDS")]
    pub max_duration: Option<f64>,
    /// Use synthetic timestamps starting here, spaced by --rate.
    #[arg(long, value_name = "RFC3339")]
    pub time_base: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Recorded capture file.
    pub capture: PathBuf,
    #[command(flatten)]
    pub sinks: SinkArgs,
    /// Frame rate the capture was recorded at, for timestamps.
    #[arg(long, value_name = "HZ")]
    pub rate: Option<f64>,
    /// Timestamp of the first frame.
    #[arg(long, value_name = "RFC3339")]
    pub time_base: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV file with a header row.
    pub points: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub degree: usize,
    #[arg(long, default_value = "x")]
    pub x_column: String,
    #[arg(long, default_value = "y")]
    pub y_column: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Reference log.
    pub a: PathBuf,
    /// Log compared against the reference.
    pub b: PathBuf,
    /// temp_c, rh_pct or chN_raw.
    #[arg(long, default_value = "rh_pct")]
    pub column: String,
    #[arg(long, default_value_t = 2.0)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// One or more CSV logs.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Columns to draw (repeatable).
    #[arg(long = "column", value_name = "COLUMN", default_values_t = ["temp_c".to_string(), "rh_pct".to_string()])]
    pub columns: Vec<String>,
    /// Output file; `.txt`/`.dat`/`.tsv` give a text table, otherwise SVG.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also write the text table here.
    #[arg(long, value_name = "PATH")]
    pub text: Option<PathBuf>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionDefaults {
    baud: Option<u32>,
    channels: Option<String>,
    rate: Option<f64>,
    time_base: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    profiles: ProfileConfig,
    #[serde(default)]
    session: SessionDefaults,
}

struct Resolved {
    profiles: ProfileSet,
    session: SessionDefaults,
}

fn load_config(path: Option<&Path>) -> Result<Resolved, CliError> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str::<ConfigFile>(&text)
                .map_err(|e| usage(format!("config {}: {e}", p.display())))?
        }
        None => ConfigFile::default(),
    };
    Ok(Resolved {
        profiles: file.profiles.resolve().map_err(usage)?,
        session: file.session,
    })
}

fn parse_time(s: &str) -> Result<DateTime<Utc>, CliError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.to_utc())
        .map_err(|e| usage(format!("bad timestamp {s:?}: {e}")))
}

fn parse_pair(s: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| usage(format!("expected LO,HI, got {s:?}")))?;
    let a: f64 = a.trim().parse().map_err(|_| usage(format!("bad number in {s:?}")))?;
    let b: f64 = b.trim().parse().map_err(|_| usage(format!("bad number in {s:?}")))?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(usage(format!("{s:?}: need finite LO <= HI")));
    }
    Ok((a, b))
}

fn parse_source(spec: &str) -> Result<Option<Source>, CliError> {
    if spec == "off" {
        return Ok(None);
    }
    Source::parse_spec(spec).map(Some).map_err(usage)
}

fn build_simulator(args: &ScenarioArgs, default_rate: Option<f64>) -> Result<Simulator, CliError> {
    let mut scenario = match (&args.scenario, &args.scenario_file) {
        (Some(s), _) => AmbientScenario::parse_shorthand(s).map_err(usage)?,
        (None, Some(p)) => AmbientScenario::load(p).map_err(usage)?,
        (None, None) => AmbientScenario::constant(25.0, 50.0),
    };
    if let Some(spec) = &args.temperature {
        scenario.temperature = parse_source(spec)?;
    }
    if let Some(spec) = &args.rh {
        scenario.rh = parse_source(spec)?;
    }
    if let Some(d) = args.duration {
        scenario.duration_s = Some(d);
    }
    if let Some(v) = args.ch2 {
        scenario.aux_volts[0] = v;
    }
    if let Some(v) = args.ch3 {
        scenario.aux_volts[1] = v;
    }
    if let Some(e) = &args.temp_envelope {
        scenario.temperature_envelope = parse_pair(e)?;
    }
    if let Some(e) = &args.rh_envelope {
        scenario.rh_envelope = parse_pair(e)?;
    }
    let noise_seed = match (args.noise, args.seed) {
        (_, Some(seed)) => Some(seed),
        (true, None) => Some(0),
        (false, None) => None,
    };
    let config = SimConfig {
        sample_rate_hz: args.rate.or(default_rate).unwrap_or(1.0),
        pacing: if args.realtime {
            Pacing::WallClock
        } else {
            Pacing::AsFastAsPossible
        },
        max_frames: args.count,
        noise_seed,
    };
    Simulator::new(scenario, config).map_err(usage)
}

fn describe_simulator(sim: &Simulator) -> String {
    let sc = sim.scenario();
    let cfg = sim.config();
    let src = |s: &Option<Source>| s.as_ref().map_or("off".to_string(), |s| s.to_string());
    format!(
        "temperature   {}\nhumidity      {}\nduration      {}\nframes        {}\nrate          {} Hz\npacing        {:?}\nenvelopes     T {:?} RH {:?}\naux volts     {:?}\nnoise seed    {:?}",
        src(&sc.temperature),
        src(&sc.rh),
        sc.duration_s.map_or("unbounded".into(), |d| format!("{d} s")),
        sim.planned_frames().map_or("unbounded".into(), |n| n.to_string()),
        cfg.sample_rate_hz,
        cfg.pacing,
        sc.temperature_envelope,
        sc.rh_envelope,
        sc.aux_volts,
        cfg.noise_seed,
    )
}

fn run_simulate(args: &SimulateArgs, cfg: &Resolved, verbose: bool, stop: &StopHandle) -> Result<(), CliError> {
    let mut sim = build_simulator(&args.scenario, cfg.session.rate)?;
    let base = parse_time(
        args.time_base
            .as_deref()
            .or(cfg.session.time_base.as_deref())
            .unwrap_or(DEFAULT_TIME_BASE),
    )?;
    if sim.planned_frames().is_none() && args.truth.is_some() && args.out.is_some() {
        log::warn!("unbounded run to a file; stop with Ctrl-C");
    }
    if verbose {
        eprintln!("{}", describe_simulator(&sim));
    }
    let mut truth = match &args.truth {
        Some(p) => Some(CsvWriter::open(p, ChannelSet::ALL, false).map_err(domain)?),
        None => None,
    };
    let mut truth_err = None;
    let mut observer = |tick: &crate::device_sim::Tick| {
        if let Some(w) = truth.as_mut() {
            let ts = base + TimeDelta::milliseconds((tick.t_s * 1000.0).round() as i64);
            let raw = tick.frame.raw();
            let opt = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
            let row = [
                format_timestamp(&ts),
                raw[0].to_string(),
                raw[1].to_string(),
                raw[2].to_string(),
                raw[3].to_string(),
                opt(tick.temperature),
                opt(tick.rh),
                String::new(),
            ];
            if let Err(e) = w.write_row(&row) {
                truth_err.get_or_insert(e);
            }
        }
    };

    let summary = match (&args.out, &args.listen) {
        (Some(path), _) => {
            let file = std::fs::OpenOptions::new()
                .write(true)
                .create(true)
                .truncate(true)
                .open(path)
                .map_err(|e| domain(format!("cannot open {}: {e}", path.display())))?;
            let mut out = io::BufWriter::new(file);
            sim.run_observed(&mut out, stop, &mut observer).map_err(domain)?
        }
        (None, Some(addr)) => {
            let listener = TcpListener::bind(addr).map_err(|e| domain(format!("cannot listen on {addr}: {e}")))?;
            eprintln!(
                "listening on {}",
                listener.local_addr().map(|a| a.to_string()).unwrap_or_default()
            );
            serve_observed(&mut sim, &listener, stop, &mut observer)?
        }
        (None, None) => unreachable!("clap requires --out or --listen"),
    };
    if let Some(e) = truth_err {
        return Err(domain(e));
    }
    if let Some(w) = truth.as_mut() {
        w.flush().map_err(domain)?;
    }
    eprintln!(
        "simulation summary\n  frames emitted   {}\n  bytes written    {}\n  saturated frames {}",
        summary.frames_emitted, summary.bytes_written, summary.saturated_frames
    );
    Ok(())
}

fn serve_observed(
    sim: &mut Simulator,
    listener: &TcpListener,
    stop: &StopHandle,
    observer: &mut dyn FnMut(&crate::device_sim::Tick),
) -> Result<crate::device_sim::RunSummary, CliError> {
    listener.set_nonblocking(false).map_err(domain)?;
    let (stream, peer) = listener.accept().map_err(domain)?;
    log::info!("client connected from {peer}");
    stream.set_nodelay(true).map_err(domain)?;
    let mut out = io::BufWriter::new(stream);
    let s = sim.run_observed(&mut out, stop, observer).map_err(domain)?;
    Ok(s)
}

fn session_channels(sinks: &SinkArgs, cfg: &Resolved) -> Result<ChannelSet, CliError> {
    match sinks.channels.as_deref().or(cfg.session.channels.as_deref()) {
        Some(s) => s.parse().map_err(usage),
        None => Ok(ChannelSet::ALL),
    }
}

fn run_session(
    config: &SessionConfig,
    live: bool,
    verbose: bool,
    stop: &StopHandle,
) -> Result<(), CliError> {
    if verbose {
        eprintln!("{config}");
    }
    let stdout = io::stdout();
    let mut readout = LiveReadout::new(stdout.lock(), config.channels);
    let mut extra: Vec<&mut dyn SampleSink> = Vec::new();
    if live {
        extra.push(&mut readout);
    }
    match acquire(config, &mut extra, stop) {
        Ok(stats) => {
            eprintln!("{stats}");
            Ok(())
        }
        Err(e) => {
            if let Some(stats) = e.partial_stats() {
                eprintln!("{stats}");
            }
            Err(match e {
                crate::acquisition::AcquisitionError::Config(_) => usage(e),
                _ => domain(e),
            })
        }
    }
}

fn run_acquire(args: &AcquireArgs, cfg: &Resolved, verbose: bool, stop: &StopHandle) -> Result<(), CliError> {
    let channels = session_channels(&args.sinks, cfg)?;
    let rate = args.scenario.rate.or(cfg.session.rate).unwrap_or(1.0);
    let clock = match args.time_base.as_deref().or(cfg.session.time_base.as_deref()) {
        Some(t) => Clock::Synthetic {
            base: parse_time(t)?,
            rate_hz: rate,
        },
        // an unpaced loopback outruns the wall clock; stamp at the simulated rate instead
        None if args.loopback && !args.scenario.realtime => Clock::Synthetic {
            base: Utc::now().trunc_subsecs(3),
            rate_hz: rate,
        },
        None => Clock::System,
    };
    let max_duration = match args.max_duration {
        Some(s) if s.is_finite() && s > 0.0 => Some(Duration::from_secs_f64(s)),
        Some(s) => return Err(usage(format!("--max-duration must be positive, got {s}"))),
        None => None,
    };
    let session = |transport: TransportSpec| SessionConfig {
        transport,
        profiles: cfg.profiles.clone(),
        csv_path: args.sinks.csv.clone(),
        csv_append: args.sinks.append,
        channels,
        max_duration,
        clock,
    };

    if args.loopback {
        let mut sim = build_simulator(&args.scenario, cfg.session.rate)?;
        if verbose {
            eprintln!("{}", describe_simulator(&sim));
        }
        let listener = TcpListener::bind("127.0.0.1:0").map_err(domain)?;
        let addr = listener.local_addr().map_err(domain)?;
        let sim_stop = stop.clone();
        let handle = thread::spawn(move || sim.serve_tcp(&listener, &sim_stop));
        let result = run_session(&session(TransportSpec::Socket(addr.to_string())), args.sinks.live, verbose, stop);
        // a session that ends first (max duration, error) must not leave the simulator running
        stop.stop();
        match handle.join() {
            Ok(Ok(_)) => {}
            Ok(Err(e)) => log::warn!("simulator: {e}"),
            Err(_) => return Err(domain("simulator thread panicked")),
        }
        return result;
    }

    let transport = if let Some(path) = &args.serial {
        TransportSpec::Serial {
            path: path.clone(),
            baud: args.baud.or(cfg.session.baud).unwrap_or(DEFAULT_BAUD),
        }
    } else if let Some(ep) = &args.connect {
        TransportSpec::Socket(ep.clone())
    } else if let Some(p) = &args.file {
        TransportSpec::File(p.clone())
    } else {
        return Err(usage("one of --serial, --connect, --file or --loopback is required"));
    };
    transport.validate().map_err(usage)?;
    run_session(&session(transport), args.sinks.live, verbose, stop)
}

fn run_replay(args: &ReplayArgs, cfg: &Resolved, verbose: bool, stop: &StopHandle) -> Result<(), CliError> {
    let channels = session_channels(&args.sinks, cfg)?;
    let rate = args.rate.or(cfg.session.rate).unwrap_or(1.0);
    if !(rate.is_finite() && rate > 0.0) {
        return Err(usage(format!("--rate must be positive, got {rate}")));
    }
    let base = parse_time(
        args.time_base
            .as_deref()
            .or(cfg.session.time_base.as_deref())
            .unwrap_or(DEFAULT_TIME_BASE),
    )?;
    if !args.capture.is_file() {
        return Err(domain(format!("capture {} does not exist", args.capture.display())));
    }
    let config = SessionConfig {
        transport: TransportSpec::File(args.capture.clone()),
        profiles: cfg.profiles.clone(),
        csv_path: args.sinks.csv.clone(),
        csv_append: args.sinks.append,
        channels,
        max_duration: None,
        clock: Clock::Synthetic {
            base,
            rate_hz: rate,
        },
    };
    run_session(&config, args.sinks.live, verbose, stop)
}

fn run_fit(args: &FitArgs, verbose: bool) -> Result<(), CliError> {
    let mut rdr = csv::Reader::from_path(&args.points).map_err(domain)?;
    let headers = rdr.headers().map_err(domain)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| usage(format!("{} has no column {name:?}", args.points.display())))
    };
    let (xi, yi) = (col(&args.x_column)?, col(&args.y_column)?);
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(domain)?;
        let get = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| domain(format!("line {}: not a number", row + 2)))
        };
        points.push((get(xi)?, get(yi)?));
    }
    if verbose {
        eprintln!("{} points, degree {}", points.len(), args.degree);
    }
    let fit = fit_polynomial(&points, args.degree).map_err(domain)?;
    let mut out = io::stdout().lock();
    let desc: Vec<String> = fit.polynomial.descending().iter().map(|c| format!("{c:.10e}")).collect();
    let _ = writeln!(out, "y = {}", fit.polynomial);
    let _ = writeln!(out, "coefficients = [{}]", desc.join(", "));
    let _ = writeln!(out, "residual_sum_squares = {:.6e}", fit.residual_sum_squares);
    let _ = writeln!(out, "condition_estimate = {:.3e}", fit.condition_estimate);
    let _ = writeln!(out, "\n# profile snippet\n[ch1]\nkind = \"polynomial\"\ncoefficients = [{}]", desc.join(", "));
    if fit.ill_conditioned() {
        eprintln!("warning: fit is ill-conditioned; coefficients may be inaccurate");
    }
    Ok(())
}

fn load_series(path: &Path, column: Column, label: String) -> Result<Series, CliError> {
    let log = read_csv(path).map_err(domain)?;
    if !log.skipped.is_empty() {
        eprintln!("{}: skipped {} malformed rows", path.display(), log.skipped.len());
    }
    Series::from_records(label, &log.records, column).map_err(domain)
}

fn run_compare(args: &CompareArgs, verbose: bool) -> Result<(), CliError> {
    let column: Column = args.column.parse().map_err(usage)?;
    if !(args.tolerance.is_finite() && args.tolerance >= 0.0) {
        return Err(usage(format!("tolerance must be non-negative, got {}", args.tolerance)));
    }
    let a = load_series(&args.a, column, args.a.display().to_string())?;
    let b = load_series(&args.b, column, args.b.display().to_string())?;
    if verbose {
        eprintln!(
            "comparing {} ({} points) with {} ({} points) on {}",
            a.label(),
            a.len(),
            b.label(),
            b.len(),
            column.name()
        );
    }
    let cmp = compare_series(&a, &b, args.tolerance).map_err(domain)?;
    println!("{cmp}");
    if cmp.within_tolerance {
        Ok(())
    } else {
        Err(domain(format!(
            "max deviation {:.6} exceeds tolerance {}",
            cmp.max_abs_dev, args.tolerance
        )))
    }
}

fn run_plot(args: &PlotArgs, verbose: bool) -> Result<(), CliError> {
    let columns: Vec<Column> = args
        .columns
        .iter()
        .map(|c| c.parse().map_err(usage))
        .collect::<Result<_, _>>()?;
    let mut series = Vec::new();
    for path in &args.inputs {
        let log = read_csv(path).map_err(domain)?;
        for &column in &columns {
            let label = if args.inputs.len() == 1 {
                column.name()
            } else {
                format!(
                    "{}:{}",
                    path.file_stem().and_then(|s| s.to_str()).unwrap_or("?"),
                    column.name()
                )
            };
            let s = Series::from_records(label, &log.records, column).map_err(domain)?;
            if s.is_empty() {
                log::warn!("{}: column {} is empty", path.display(), column.name());
                continue;
            }
            series.push(s);
        }
    }
    if series.is_empty() {
        return Err(domain("no data to plot"));
    }
    let summary = reconstruct_waveform(&series, &args.out).map_err(domain)?;
    if let Some(text) = &args.text {
        reconstruct_waveform_as(&series, text, PlotFormat::Text).map_err(domain)?;
    }
    if verbose {
        for t in &summary.traces {
            eprintln!(
                "{} [{}]: {} points, min {} max {}, {:.3}..{:.3} s",
                t.label, t.unit, t.points, t.min, t.max, t.start_s, t.end_s
            );
        }
    }
    Ok(())
}

/// Parses `argv` and runs the selected subcommand. Returns the exit code.
pub fn run<I, T>(argv: I, stop: &StopHandle) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli, stop) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Domain(m) => eprintln!("error: {m}"),
            }
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, stop: &StopHandle) -> Result<(), CliError> {
    let v = cli.verbose;
    match &cli.command {
        Command::Fit(a) => run_fit(a, v),
        Command::Compare(a) => run_compare(a, v),
        Command::Plot(a) => run_plot(a, v),
        cmd => {
            let cfg = load_config(cli.config.as_deref())?;
            if v {
                if let Some(p) = &cli.config {
                    eprintln!("config        {}", p.display());
                }
            }
            match cmd {
                Command::Simulate(a) => run_simulate(a, &cfg, v, stop),
                Command::Acquire(a) => run_acquire(a, &cfg, v, stop),
                Command::Replay(a) => run_replay(a, &cfg, v, stop),
                _ => unreachable!(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_arguments_is_usage() {
        assert_eq!(run(["thdaq"], &StopHandle::new()), 2);
    }

    #[test]
    fn unknown_subcommand_is_usage() {
        assert_eq!(run(["thdaq", "frobnicate"], &StopHandle::new()), 2);
        assert_eq!(run(["thdaq", "fit", "--bogus"], &StopHandle::new()), 2);
    }

    #[test]
    fn help_is_success() {
        assert_eq!(run(["thdaq", "--help"], &StopHandle::new()), 0);
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("0,50").unwrap(), (0.0, 50.0));
        assert!(parse_pair("50,0").is_err());
        assert!(parse_pair("x").is_err());
    }

    #[test]
    fn config_sections_parse() {
        let text = "[session]\nbaud = 19200\nchannels = \"0,1\"\n[ch0]\nlabel = \"air\"\n";
        let file: ConfigFile = toml::from_str(text).unwrap();
        assert_eq!(file.session.baud, Some(19200));
        assert_eq!(file.profiles.resolve().unwrap().get(0).label, "air");
    }
}
