//! Host-side acquisition session.
//!
//! One reader owns the transport and the decoder. Every decoded frame is
//! timestamped, calibrated, and handed synchronously to each sink in wire
//! order. Reads block for at most [`READ_TIMEOUT`], so a stop request or an
//! expired session deadline is noticed within that bound.

mod clock;
mod transport;

use std::fmt;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use crate::calibration::{calibrate_frame, ProfileSet, Sample};
use crate::protocol::{Decoder, Frame, CHANNELS};
use crate::stop::StopHandle;
use crate::storage::CsvWriter;

pub use clock::{Clock, Timestamper};
pub use transport::{
    open_transport, Transport, TransportSpec, DEFAULT_BAUD, READ_TIMEOUT, STANDARD_BAUDS,
};

/// Subset of the four channels, used for display and logging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelSet(u8);

impl ChannelSet {
    pub const ALL: ChannelSet = ChannelSet(0b1111);

    pub fn from_channels(channels: &[usize]) -> Result<Self, AcquisitionError> {
        let mut bits = 0u8;
        for &ch in channels {
            if ch >= CHANNELS {
                return Err(AcquisitionError::Config(format!(
                    "channel {ch} does not exist (valid: 0-3)"
                )));
            }
            bits |= 1 << ch;
        }
        if bits == 0 {
            return Err(AcquisitionError::Config(
                "at least one channel must be enabled".into(),
            ));
        }
        Ok(ChannelSet(bits))
    }

    pub fn contains(self, channel: usize) -> bool {
        channel < CHANNELS && self.0 & (1 << channel) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..CHANNELS).filter(move |&c| self.contains(c))
    }
}

impl Default for ChannelSet {
    fn default() -> Self {
        ChannelSet::ALL
    }
}

impl FromStr for ChannelSet {
    type Err = AcquisitionError;

    /// Comma-separated channel numbers, e.g. `0,1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let channels = s
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<usize>()
                    .map_err(|_| AcquisitionError::Config(format!("bad channel {c:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ChannelSet::from_channels(&channels)
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list: Vec<String> = self.iter().map(|c| c.to_string()).collect();
        f.write_str(&list.join(","))
    }
}

#[derive(Debug, Error)]
pub enum AcquisitionError {
    #[error("cannot open {endpoint}: {source}")]
    Open {
        endpoint: String,
        source: io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport read failed: {source}")]
    Read {
        source: io::Error,
        stats: AcquisitionStats,
    },
    #[error("sink {sink} failed: {source}")]
    Sink {
        sink: &'static str,
        source: io::Error,
        stats: AcquisitionStats,
    },
}

impl AcquisitionError {
    /// Statistics gathered before a mid-session failure.
    pub fn partial_stats(&self) -> Option<&AcquisitionStats> {
        match self {
            AcquisitionError::Read { stats, .. } | AcquisitionError::Sink { stats, .. } => {
                Some(stats)
            }
            _ => None,
        }
    }
}

/// Consumer of calibrated samples.
pub trait SampleSink {
    fn name(&self) -> &'static str;
    fn accept(&mut self, sample: &Sample) -> io::Result<()>;
    fn finish(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl SampleSink for CsvWriter {
    fn name(&self) -> &'static str {
        "csv"
    }

    fn accept(&mut self, sample: &Sample) -> io::Result<()> {
        self.write_sample(sample).map_err(io::Error::other)
    }

    fn finish(&mut self) -> io::Result<()> {
        self.flush().map_err(io::Error::other)
    }
}

/// Collects samples in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub samples: Vec<Sample>,
}

impl SampleSink for MemorySink {
    fn name(&self) -> &'static str {
        "memory"
    }

    fn accept(&mut self, sample: &Sample) -> io::Result<()> {
        self.samples.push(sample.clone());
        Ok(())
    }
}

/// Prints one [`live_readout`] line per sample.
pub struct LiveReadout<W: Write> {
    out: W,
    channels: ChannelSet,
}

impl<W: Write> LiveReadout<W> {
    pub fn new(out: W, channels: ChannelSet) -> Self {
        LiveReadout { out, channels }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> SampleSink for LiveReadout<W> {
    fn name(&self) -> &'static str {
        "live"
    }

    fn accept(&mut self, sample: &Sample) -> io::Result<()> {
        writeln!(self.out, "{}", live_readout(sample, self.channels))
    }

    fn finish(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Millisecond UTC timestamp, e.g. `2024-01-01T00:00:00.000Z`.
pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// One display line: timestamp, then `chN value unit` per enabled channel.
/// Flagged values carry a `!` suffix.
pub fn live_readout(sample: &Sample, channels: ChannelSet) -> String {
    let mut line = format_timestamp(&sample.timestamp);
    for ch in channels.iter() {
        let v = sample.values[ch];
        let mark = if sample.flags[ch].is_empty() { "" } else { "!" };
        line.push_str(&format!(
            "  ch{ch} {:.*}{mark} {}",
            v.unit.display_precision(),
            v.value,
            v.unit
        ));
    }
    line
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcquisitionStats {
    pub frames_ok: u64,
    pub frames_rejected: u64,
    pub bytes_total: u64,
    pub bytes_skipped: u64,
    pub first_timestamp: Option<DateTime<Utc>>,
    pub last_timestamp: Option<DateTime<Utc>>,
}

impl AcquisitionStats {
    /// Frames per second between the first and last sample.
    pub fn effective_rate_hz(&self) -> Option<f64> {
        let (first, last) = (self.first_timestamp?, self.last_timestamp?);
        let secs = (last - first).num_milliseconds() as f64 / 1000.0;
        (self.frames_ok > 1 && secs > 0.0).then(|| (self.frames_ok - 1) as f64 / secs)
    }
}

impl fmt::Display for AcquisitionStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "acquisition summary")?;
        writeln!(f, "  frames ok        {}", self.frames_ok)?;
        writeln!(f, "  frames rejected  {}", self.frames_rejected)?;
        writeln!(f, "  bytes read       {}", self.bytes_total)?;
        writeln!(f, "  bytes skipped    {}", self.bytes_skipped)?;
        let ts = |t: Option<DateTime<Utc>>| t.map_or("-".to_string(), |t| format_timestamp(&t));
        writeln!(f, "  first sample     {}", ts(self.first_timestamp))?;
        writeln!(f, "  last sample      {}", ts(self.last_timestamp))?;
        match self.effective_rate_hz() {
            Some(r) => write!(f, "  effective rate   {r:.3} Hz"),
            None => write!(f, "  effective rate   -"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub transport: TransportSpec,
    pub profiles: ProfileSet,
    pub csv_path: Option<PathBuf>,
    /// Append to an existing CSV instead of replacing it.
    pub csv_append: bool,
    pub channels: ChannelSet,
    pub max_duration: Option<Duration>,
    pub clock: Clock,
}

impl SessionConfig {
    pub fn new(transport: TransportSpec) -> Self {
        SessionConfig {
            transport,
            profiles: ProfileSet::default(),
            csv_path: None,
            csv_append: false,
            channels: ChannelSet::ALL,
            max_duration: None,
            clock: Clock::System,
        }
    }
}

impl fmt::Display for SessionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "transport     {}", self.transport)?;
        writeln!(f, "channels      {}", self.channels)?;
        for p in self.profiles.iter() {
            writeln!(f, "profile ch{}   {} [{}] {:?}", p.channel, p.label, p.unit, p.sensor)?;
        }
        match &self.csv_path {
            Some(p) => writeln!(
                f,
                "csv           {}{}",
                p.display(),
                if self.csv_append { " (append)" } else { "" }
            )?,
            None => writeln!(f, "csv           -")?,
        }
        match self.max_duration {
            Some(d) => writeln!(f, "max duration  {:.3} s", d.as_secs_f64())?,
            None => writeln!(f, "max duration  -")?,
        }
        match self.clock {
            Clock::System => write!(f, "clock         system"),
            Clock::Synthetic { base, rate_hz } => write!(
                f,
                "clock         synthetic from {} at {rate_hz} Hz",
                format_timestamp(&base)
            ),
        }
    }
}

/// Opens the transport and CSV file and runs the session to completion.
pub fn acquire(
    config: &SessionConfig,
    extra_sinks: &mut [&mut dyn SampleSink],
    stop: &StopHandle,
) -> Result<AcquisitionStats, AcquisitionError> {
    let mut csv = match &config.csv_path {
        Some(path) => Some(
            CsvWriter::open(path, config.channels, config.csv_append).map_err(|e| {
                AcquisitionError::Open {
                    endpoint: path.display().to_string(),
                    source: io::Error::other(e.to_string()),
                }
            })?,
        ),
        None => None,
    };
    let transport = open_transport(&config.transport)?;
    let mut sinks: Vec<&mut dyn SampleSink> = Vec::with_capacity(extra_sinks.len() + 1);
    if let Some(csv) = csv.as_mut() {
        sinks.push(csv);
    }
    for s in extra_sinks.iter_mut() {
        sinks.push(&mut **s);
    }
    acquire_from(transport, config, &mut sinks, stop)
}

/// The session loop over an already-open reader.
pub fn acquire_from<R: Read>(
    mut reader: R,
    config: &SessionConfig,
    sinks: &mut [&mut dyn SampleSink],
    stop: &StopHandle,
) -> Result<AcquisitionStats, AcquisitionError> {
    let started = Instant::now();
    let mut decoder = Decoder::new();
    let mut stamper = Timestamper::new(config.clock);
    let mut stats = AcquisitionStats::default();
    let mut buf = vec![0u8; 8192];
    let mut frames: Vec<Frame> = Vec::new();

    loop {
        if stop.is_stopped() {
            log::info!("stop requested");
            break;
        }
        if config.max_duration.is_some_and(|d| started.elapsed() >= d) {
            log::info!("maximum session duration reached");
            break;
        }
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock | io::ErrorKind::Interrupted
                ) =>
            {
                continue
            }
            Err(source) => return Err(AcquisitionError::Read { source, stats }),
        };
        stats.bytes_total += n as u64;
        let delta = decoder.decode_into(&buf[..n], &mut frames);
        stats.frames_rejected += delta.frames_rejected;
        stats.bytes_skipped += delta.bytes_skipped;
        for frame in frames.drain(..) {
            let ts = stamper.stamp();
            let sample = calibrate_frame(&frame, &config.profiles, ts);
            for sink in sinks.iter_mut() {
                if let Err(source) = sink.accept(&sample) {
                    let name = sink.name();
                    return Err(AcquisitionError::Sink {
                        sink: name,
                        source,
                        stats,
                    });
                }
            }
            stats.frames_ok += 1;
            stats.first_timestamp.get_or_insert(ts);
            stats.last_timestamp = Some(ts);
        }
    }
    if decoder.pending_len() > 0 {
        log::warn!(
            "stream ended inside a record; {} trailing bytes ignored",
            decoder.pending_len()
        );
    }
    for sink in sinks.iter_mut() {
        if let Err(source) = sink.finish() {
            return Err(AcquisitionError::Sink {
                sink: sink.name(),
                source,
                stats,
            });
        }
    }
    Ok(stats)
}
