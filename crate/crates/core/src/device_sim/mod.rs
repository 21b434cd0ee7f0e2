//! Software stand-in for the acquisition board.
//!
//! The simulator samples an [`AmbientScenario`] at a fixed rate, runs every
//! channel through its sensor model, conditioning stage and converter, and
//! writes the resulting wire records to any byte sink: a file, a TCP
//! connection, or a FIFO/pseudo-terminal opened as a file.

mod frontend;
mod scenario;

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocol::{encode_frame, AdcCode, Frame, CHANNELS};
use crate::stop::StopHandle;

pub use frontend::{
    apply_chain, lm35_voltage, quantize, tps_voltage, AdcModel, ChainError, HumiditySensor,
    SignalChain, LM35_VOLTS_PER_DEGREE,
};
pub use scenario::{
    AmbientScenario, ReplayTrace, ScenarioError, Source, DEFAULT_RH_ENVELOPE,
    DEFAULT_TEMPERATURE_ENVELOPE,
};

pub const MIN_RATE_HZ: f64 = 0.1;
pub const MAX_RATE_HZ: f64 = 1000.0;
pub const DEFAULT_RATE_HZ: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// Sleep until each tick's deadline.
    WallClock,
    /// Emit as fast as the sink accepts bytes.
    AsFastAsPossible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sample_rate_hz: f64,
    pub pacing: Pacing,
    /// Stop after this many frames even if the scenario continues.
    pub max_frames: Option<u64>,
    /// Seed for optional ±½ LSB uniform noise. `None` disables noise.
    pub noise_seed: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sample_rate_hz: DEFAULT_RATE_HZ,
            pacing: Pacing::AsFastAsPossible,
            max_frames: None,
            noise_seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub frames_emitted: u64,
    pub bytes_written: u64,
    /// Frames where at least one channel sat on the converter's upper rail.
    pub saturated_frames: u64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sample rate {0} Hz is outside [0.1, 1000]")]
    Rate(f64),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("humidity {rh} %RH at t = {t_s} s cannot be produced by the sensor model")]
    Sensor { rh: f64, t_s: f64 },
    #[error("cannot open transport {endpoint}: {source}")]
    Open {
        endpoint: String,
        source: io::Error,
    },
    #[error("transport write failed after {} frames: {source}", summary.frames_emitted)]
    Transport {
        source: io::Error,
        summary: RunSummary,
    },
}

/// Everything computed for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub index: u64,
    pub t_s: f64,
    pub temperature: Option<f64>,
    pub rh: Option<f64>,
    /// Converter-input voltages after conditioning and clamp, before noise.
    pub bus_volts: [f64; CHANNELS],
    pub frame: Frame,
}

/// Device simulator. One instance drives one transport.
#[derive(Debug)]
pub struct Simulator {
    scenario: AmbientScenario,
    config: SimConfig,
    humidity: HumiditySensor,
    adc: AdcModel,
    chains: [SignalChain; CHANNELS],
    rng: Option<ChaCha8Rng>,
}

impl Simulator {
    pub fn new(scenario: AmbientScenario, config: SimConfig) -> Result<Self, SimError> {
        let rate = config.sample_rate_hz;
        if !(MIN_RATE_HZ..=MAX_RATE_HZ).contains(&rate) {
            return Err(SimError::Rate(rate));
        }
        let humidity = HumiditySensor::new();
        scenario.validate(&humidity)?;
        let rng = config.noise_seed.map(ChaCha8Rng::seed_from_u64);
        Ok(Simulator {
            scenario,
            config,
            humidity,
            adc: AdcModel::default(),
            chains: [
                SignalChain::temperature(),
                SignalChain::humidity(),
                SignalChain::passthrough(),
                SignalChain::passthrough(),
            ],
            rng,
        })
    }

    pub fn scenario(&self) -> &AmbientScenario {
        &self.scenario
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Simulated time of tick `index`.
    pub fn tick_time(&self, index: u64) -> f64 {
        index as f64 / self.config.sample_rate_hz
    }

    /// Number of ticks the run will produce, if bounded.
    pub fn planned_frames(&self) -> Option<u64> {
        let by_duration = self
            .scenario
            .duration_s
            .map(|d| (d * self.config.sample_rate_hz - 1e-9).ceil().max(0.0) as u64);
        match (by_duration, self.config.max_frames) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Computes tick `index`. Advances the noise generator when noise is on.
    pub fn tick(&mut self, index: u64) -> Result<Tick, SimError> {
        let t_s = self.tick_time(index);
        let temperature = self.scenario.temperature_at(t_s);
        let rh = self.scenario.rh_at(t_s);

        let mut bus_volts = [0.0; CHANNELS];
        if let Some(t) = temperature {
            bus_volts[0] = self.chains[0].apply(lm35_voltage(t));
        }
        if let Some(rh) = rh {
            let v = self
                .humidity
                .voltage(rh)
                .map_err(|_| SimError::Sensor { rh, t_s })?;
            bus_volts[1] = self.chains[1].apply(v);
        }
        for (slot, (v, chain)) in bus_volts[2..]
            .iter_mut()
            .zip(self.scenario.aux_volts.iter().zip(&self.chains[2..]))
        {
            *slot = chain.apply(*v);
        }

        let half_lsb = 0.5 * self.adc.lsb();
        let mut codes = [AdcCode::ZERO; CHANNELS];
        for (code, &v) in codes.iter_mut().zip(&bus_volts) {
            let jitter = match self.rng.as_mut() {
                Some(rng) => rng.random_range(-half_lsb..=half_lsb),
                None => 0.0,
            };
            *code = self.adc.quantize(v + jitter);
        }
        Ok(Tick {
            index,
            t_s,
            temperature,
            rh,
            bus_volts,
            frame: Frame::new(codes),
        })
    }

    /// Runs to completion, writing one record per tick to `out`.
    pub fn run<W: Write>(&mut self, out: &mut W, stop: &StopHandle) -> Result<RunSummary, SimError> {
        self.run_observed(out, stop, |_| {})
    }

    /// Like [`Simulator::run`], calling `observer` with every tick after its
    /// record has been written.
    pub fn run_observed<W: Write>(
        &mut self,
        out: &mut W,
        stop: &StopHandle,
        mut observer: impl FnMut(&Tick),
    ) -> Result<RunSummary, SimError> {
        let limit = self.planned_frames();
        let start = Instant::now();
        let period = Duration::from_secs_f64(1.0 / self.config.sample_rate_hz);
        let mut summary = RunSummary::default();
        let mut index = 0u64;
        while limit.is_none_or(|n| index < n) && !stop.is_stopped() {
            if self.config.pacing == Pacing::WallClock {
                let deadline = start + period.mul_f64(index as f64);
                if !sleep_until(deadline, stop) {
                    break;
                }
            }
            let tick = self.tick(index)?;
            let record = encode_frame(&tick.frame);
            let written = out.write_all(&record).and_then(|_| {
                if self.config.pacing == Pacing::WallClock {
                    out.flush()
                } else {
                    Ok(())
                }
            });
            if let Err(source) = written {
                return Err(SimError::Transport { source, summary });
            }
            summary.frames_emitted += 1;
            summary.bytes_written += record.len() as u64;
            if tick.frame.codes.iter().any(|c| c.is_full_scale()) {
                summary.saturated_frames += 1;
            }
            observer(&tick);
            index += 1;
        }
        out.flush()
            .map_err(|source| SimError::Transport { source, summary })?;
        Ok(summary)
    }

    /// Writes the run to a file, FIFO or pseudo-terminal path.
    pub fn run_to_path(&mut self, path: &Path, stop: &StopHandle) -> Result<RunSummary, SimError> {
        let file = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)
            .map_err(|source| SimError::Open {
                endpoint: path.display().to_string(),
                source,
            })?;
        let mut out = io::BufWriter::new(file);
        self.run(&mut out, stop)
    }

    /// Accepts a single TCP client on `listener` and streams the run to it.
    /// Returns early with an empty summary if stopped before a client connects.
    pub fn serve_tcp(
        &mut self,
        listener: &TcpListener,
        stop: &StopHandle,
    ) -> Result<RunSummary, SimError> {
        let endpoint = listener
            .local_addr()
            .map(|a| a.to_string())
            .unwrap_or_default();
        let open_err = |source| SimError::Open {
            endpoint: endpoint.clone(),
            source,
        };
        listener.set_nonblocking(true).map_err(open_err)?;
        let stream = loop {
            if stop.is_stopped() {
                return Ok(RunSummary::default());
            }
            match listener.accept() {
                Ok((stream, _)) => break stream,
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(5))
                }
                Err(e) => return Err(open_err(e)),
            }
        };
        stream.set_nonblocking(false).map_err(open_err)?;
        stream.set_nodelay(true).map_err(open_err)?;
        let mut out = io::BufWriter::new(stream);
        let summary = self.run(&mut out, stop)?;
        if let Ok(stream) = out.into_inner() {
            let _ = stream.shutdown(std::net::Shutdown::Write);
        }
        Ok(summary)
    }
}

/// Sleeps in short slices so a stop request is noticed promptly. Returns
/// false if stopped.
fn sleep_until(deadline: Instant, stop: &StopHandle) -> bool {
    const SLICE: Duration = Duration::from_millis(50);
    loop {
        if stop.is_stopped() {
            return false;
        }
        let now = Instant::now();
        if now >= deadline {
            return true;
        }
        std::thread::sleep((deadline - now).min(SLICE));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{calibrate_frame, ProfileSet};
    use crate::protocol::Decoder;

    fn fast(rate: f64) -> SimConfig {
        SimConfig {
            sample_rate_hz: rate,
            ..Default::default()
        }
    }

    #[test]
    fn rejects_bad_rate() {
        let sc = AmbientScenario::constant(25.0, 50.0);
        assert!(matches!(
            Simulator::new(sc.clone(), fast(0.01)),
            Err(SimError::Rate(_))
        ));
        assert!(Simulator::new(sc, fast(2000.0)).is_err());
    }

    #[test]
    fn constant_scenario_three_identical_frames() {
        let sc = AmbientScenario::constant(25.0, 50.0).with_duration(3.0);
        let mut sim = Simulator::new(sc, fast(1.0)).unwrap();
        let mut out = Vec::new();
        let summary = sim.run(&mut out, &StopHandle::new()).unwrap();
        assert_eq!(summary.frames_emitted, 3);
        assert_eq!(out.len(), 51);
        let (frames, _) = Decoder::new().decode_chunk(&out);
        assert_eq!(frames.len(), 3);
        assert!(frames.iter().all(|f| *f == frames[0]));
        let s = calibrate_frame(&frames[0], &ProfileSet::default(), chrono::DateTime::UNIX_EPOCH);
        let lsb_celsius = 10.0 * 5.0 / 1023.0;
        assert!((s.values[0].value - 25.0).abs() <= lsb_celsius);
        assert_eq!(frames[0].code(0).value(), 512);
    }

    #[test]
    fn disabled_humidity_reads_zero() {
        let sc = AmbientScenario::new(Some(Source::Constant(0.0)), None).with_duration(5.0);
        let mut sim = Simulator::new(sc, fast(1.0)).unwrap();
        let mut out = Vec::new();
        sim.run(&mut out, &StopHandle::new()).unwrap();
        let (frames, _) = Decoder::new().decode_chunk(&out);
        assert_eq!(frames.len(), 5);
        assert!(frames.iter().all(|f| f.raw() == [0, 0, 0, 0]));
    }

    #[test]
    fn sinusoid_traces_full_code_range() {
        let sc = AmbientScenario::new(
            Some(Source::Sinusoid {
                mean: 25.0,
                amplitude: 25.0,
                period_s: 60.0,
                phase: 0.0,
            }),
            Some(Source::Constant(50.0)),
        )
        .with_duration(60.0);
        let mut sim = Simulator::new(sc, fast(1.0)).unwrap();
        let mut ticks = Vec::new();
        sim.run_observed(&mut io::sink(), &StopHandle::new(), |t| ticks.push(*t))
            .unwrap();
        assert_eq!(ticks.len(), 60);
        let codes: Vec<u16> = ticks.iter().map(|t| t.frame.code(0).value()).collect();
        assert_eq!(*codes.iter().min().unwrap(), 0);
        assert_eq!(*codes.iter().max().unwrap(), 1023);
        assert_eq!(codes[0], 512);
        assert_eq!(codes[15], 1023);
        assert_eq!(codes[45], 0);
    }

    #[test]
    fn aux_channels_carry_constant_volts() {
        let sc = AmbientScenario::constant(25.0, 50.0)
            .with_duration(1.0)
            .with_aux_volts(2.5, 7.0);
        let mut sim = Simulator::new(sc, fast(1.0)).unwrap();
        let t = sim.tick(0).unwrap();
        assert_eq!(t.frame.code(2).value(), 512);
        assert_eq!(t.frame.code(3).value(), 1023);
    }

    #[test]
    fn runs_are_deterministic_with_and_without_noise() {
        let sc = AmbientScenario::constant(21.3, 47.0).with_duration(200.0);
        for seed in [None, Some(7)] {
            let cfg = SimConfig {
                noise_seed: seed,
                ..fast(10.0)
            };
            let mut a = Vec::new();
            let mut b = Vec::new();
            Simulator::new(sc.clone(), cfg.clone())
                .unwrap()
                .run(&mut a, &StopHandle::new())
                .unwrap();
            Simulator::new(sc.clone(), cfg)
                .unwrap()
                .run(&mut b, &StopHandle::new())
                .unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 2000 * 17);
        }
    }

    #[test]
    fn noise_stays_within_one_code() {
        let sc = AmbientScenario::constant(21.3, 47.0).with_duration(100.0);
        let mut clean = Simulator::new(sc.clone(), fast(10.0)).unwrap();
        let mut noisy = Simulator::new(
            sc,
            SimConfig {
                noise_seed: Some(3),
                ..fast(10.0)
            },
        )
        .unwrap();
        let reference = clean.tick(0).unwrap().frame;
        for i in 0..1000 {
            let f = noisy.tick(i).unwrap().frame;
            for ch in 0..2 {
                let d = i32::from(f.code(ch).value()) - i32::from(reference.code(ch).value());
                assert!(d.abs() <= 1, "channel {ch} moved {d} codes");
            }
        }
    }

    #[test]
    fn max_frames_caps_unbounded_scenario() {
        let sc = AmbientScenario::constant(25.0, 50.0);
        let cfg = SimConfig {
            max_frames: Some(42),
            ..fast(1000.0)
        };
        let mut sim = Simulator::new(sc, cfg).unwrap();
        assert_eq!(sim.planned_frames(), Some(42));
        let s = sim.run(&mut io::sink(), &StopHandle::new()).unwrap();
        assert_eq!(s.frames_emitted, 42);
    }

    #[test]
    fn stop_ends_unbounded_run() {
        let sc = AmbientScenario::constant(25.0, 50.0);
        let mut sim = Simulator::new(sc, fast(1000.0)).unwrap();
        let stop = StopHandle::new();
        let mut n = 0;
        let s = sim
            .run_observed(&mut io::sink(), &stop, |_| {
                n += 1;
                if n == 10 {
                    stop.stop();
                }
            })
            .unwrap();
        assert_eq!(s.frames_emitted, 10);
    }

    #[test]
    fn write_failure_reports_partial_summary() {
        struct Failing(usize);
        impl Write for Failing {
            fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
                if self.0 == 0 {
                    return Err(io::Error::new(io::ErrorKind::BrokenPipe, "gone"));
                }
                self.0 -= 1;
                Ok(buf.len())
            }
            fn flush(&mut self) -> io::Result<()> {
                Ok(())
            }
        }
        let sc = AmbientScenario::constant(25.0, 50.0).with_duration(10.0);
        let mut sim = Simulator::new(sc, fast(1.0)).unwrap();
        match sim.run(&mut Failing(4), &StopHandle::new()) {
            Err(SimError::Transport { summary, .. }) => assert_eq!(summary.frames_emitted, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wall_clock_pacing_takes_real_time() {
        let sc = AmbientScenario::constant(25.0, 50.0).with_duration(0.5);
        let cfg = SimConfig {
            sample_rate_hz: 20.0,
            pacing: Pacing::WallClock,
            ..Default::default()
        };
        let mut sim = Simulator::new(sc, cfg).unwrap();
        let start = Instant::now();
        let s = sim.run(&mut io::sink(), &StopHandle::new()).unwrap();
        assert_eq!(s.frames_emitted, 10);
        assert!(start.elapsed() >= Duration::from_millis(440));
    }
}
