//! Ambient conditions that drive the simulated device.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::DateTime;
use serde::Deserialize;
use thiserror::Error;

use super::frontend::HumiditySensor;

pub const DEFAULT_TEMPERATURE_ENVELOPE: (f64, f64) = (0.0, 50.0);
pub const DEFAULT_RH_ENVELOPE: (f64, f64) = (12.0, 88.0);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("replay file {path}: {message}")]
    Replay { path: String, message: String },
    #[error("invalid source spec {spec:?}: {message}")]
    Spec { spec: String, message: String },
    #[error("{quantity} source spans [{lo}, {hi}], outside its envelope [{env_lo}, {env_hi}]")]
    Envelope {
        quantity: &'static str,
        lo: f64,
        hi: f64,
        env_lo: f64,
        env_hi: f64,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Piecewise-linear series loaded from a CSV column.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTrace {
    pub path: PathBuf,
    pub column: String,
    points: Vec<(f64, f64)>,
}

impl ReplayTrace {
    /// Loads `column` from a CSV file with a header row.
    ///
    /// Time comes from a `t_s` column (seconds) if present, otherwise from an
    /// RFC 3339 `timestamp` column relative to the first row, otherwise rows
    /// are taken one second apart. Empty cells are skipped.
    pub fn load(path: &Path, column: &str) -> Result<Self, ScenarioError> {
        let err = |message: String| ScenarioError::Replay {
            path: path.display().to_string(),
            message,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let value_col = find(column).ok_or_else(|| err(format!("no column named {column:?}")))?;
        let t_col = find("t_s");
        let ts_col = find("timestamp");

        let mut points = Vec::new();
        let mut t0 = None;
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let line = row + 2;
            let cell = rec.get(value_col).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let value: f64 = cell
                .parse()
                .map_err(|_| err(format!("line {line}: {cell:?} is not a number")))?;
            let t = if let Some(c) = t_col {
                rec.get(c)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("line {line}: bad t_s")))?
            } else if let Some(c) = ts_col {
                let ts = DateTime::parse_from_rfc3339(rec.get(c).unwrap_or("").trim())
                    .map_err(|e| err(format!("line {line}: bad timestamp: {e}")))?;
                let base = *t0.get_or_insert(ts);
                (ts - base).num_milliseconds() as f64 / 1000.0
            } else {
                row as f64
            };
            if !value.is_finite() || !t.is_finite() {
                return Err(err(format!("line {line}: non-finite value")));
            }
            if let Some(&(prev, _)) = points.last() {
                if t <= prev {
                    return Err(err(format!("line {line}: time does not increase")));
                }
            }
            points.push((t, value));
        }
        if points.is_empty() {
            return Err(err(format!("column {column:?} has no values")));
        }
        Ok(ReplayTrace {
            path: path.to_path_buf(),
            column: column.to_string(),
            points,
        })
    }

    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self, ScenarioError> {
        if points.is_empty() || points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ScenarioError::Invalid(
                "replay points must be non-empty with increasing time".into(),
            ));
        }
        Ok(ReplayTrace {
            path: PathBuf::new(),
            column: String::new(),
            points,
        })
    }

    /// Linear interpolation, holding the end values outside the trace.
    pub fn value_at(&self, t: f64) -> f64 {
        let pts = &self.points;
        let i = pts.partition_point(|&(pt, _)| pt <= t);
        if i == 0 {
            return pts[0].1;
        }
        if i == pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (t0, v0) = pts[i - 1];
        let (t1, v1) = pts[i];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn span(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn duration(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }
}

/// Time-parameterized value generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Constant(f64),
    /// `mean + amplitude · sin(2π t / period + phase)`, phase in radians.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period_s: f64,
        phase: f64,
    },
    Replay(ReplayTrace),
}

impl Source {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Source::Constant(v) => *v,
            Source::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase,
            } => mean + amplitude * (TAU * t / period_s + phase).sin(),
            Source::Replay(trace) => trace.value_at(t),
        }
    }

    /// Smallest interval containing every value the source can produce.
    pub fn span(&self) -> (f64, f64) {
        match self {
            Source::Constant(v) => (*v, *v),
            Source::Sinusoid {
                mean, amplitude, ..
            } => (mean - amplitude.abs(), mean + amplitude.abs()),
            Source::Replay(trace) => trace.span(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            Source::Constant(v) if !v.is_finite() => Err("constant must be finite".into()),
            Source::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase,
            } => {
                if !(mean.is_finite() && amplitude.is_finite() && phase.is_finite()) {
                    Err("sinusoid parameters must be finite".into())
                } else if !(period_s.is_finite() && *period_s > 0.0) {
                    Err("sinusoid period must be positive".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Parses the compact command-line form:
    ///
    /// * `const:25`
    /// * `sine:MEAN,AMPLITUDE,PERIOD_S[,PHASE_RAD]`
    /// * `csv:PATH#COLUMN`
    pub fn parse_spec(spec: &str) -> Result<Self, ScenarioError> {
        let bad = |message: &str| ScenarioError::Spec {
            spec: spec.to_string(),
            message: message.to_string(),
        };
        let (kind, args) = spec
            .split_once(':')
            .ok_or_else(|| bad("expected KIND:ARGS"))?;
        let nums = || -> Result<Vec<f64>, ScenarioError> {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| bad("expected numbers")))
                .collect()
        };
        let source = match kind {
            "const" | "constant" => match nums()?.as_slice() {
                [v] => Source::Constant(*v),
                _ => return Err(bad("const takes one value")),
            },
            "sine" | "sinusoid" => match nums()?.as_slice() {
                [mean, amplitude, period_s] => Source::Sinusoid {
                    mean: *mean,
                    amplitude: *amplitude,
                    period_s: *period_s,
                    phase: 0.0,
                },
                [mean, amplitude, period_s, phase] => Source::Sinusoid {
                    mean: *mean,
                    amplitude: *amplitude,
                    period_s: *period_s,
                    phase: *phase,
                },
                _ => return Err(bad("sine takes MEAN,AMPLITUDE,PERIOD_S[,PHASE]")),
            },
            "csv" => {
                let (path, column) = args
                    .rsplit_once('#')
                    .ok_or_else(|| bad("csv takes PATH#COLUMN"))?;
                Source::Replay(ReplayTrace::load(Path::new(path), column)?)
            }
            _ => return Err(bad("unknown source kind")),
        };
        source.validate().map_err(|m| bad(&m))?;
        Ok(source)
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Constant(v) => write!(f, "const:{v}"),
            Source::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase,
            } => write!(f, "sine:{mean},{amplitude},{period_s},{phase}"),
            Source::Replay(t) => write!(f, "csv:{}#{}", t.path.display(), t.column),
        }
    }
}

/// True temperature and humidity over simulated time, plus the constant
/// voltages on the two spare inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientScenario {
    pub temperature: Option<Source>,
    pub rh: Option<Source>,
    /// `None` runs until stopped or until a frame limit is reached.
    pub duration_s: Option<f64>,
    pub temperature_envelope: (f64, f64),
    pub rh_envelope: (f64, f64),
    pub aux_volts: [f64; 2],
}

impl AmbientScenario {
    pub fn new(temperature: Option<Source>, rh: Option<Source>) -> Self {
        AmbientScenario {
            temperature,
            rh,
            duration_s: None,
            temperature_envelope: DEFAULT_TEMPERATURE_ENVELOPE,
            rh_envelope: DEFAULT_RH_ENVELOPE,
            aux_volts: [0.0; 2],
        }
    }

    pub fn constant(temperature: f64, rh: f64) -> Self {
        Self::new(Some(Source::Constant(temperature)), Some(Source::Constant(rh)))
    }

    pub fn with_duration(mut self, seconds: f64) -> Self {
        self.duration_s = Some(seconds);
        self
    }

    pub fn with_temperature_envelope(mut self, lo: f64, hi: f64) -> Self {
        self.temperature_envelope = (lo, hi);
        self
    }

    pub fn with_rh_envelope(mut self, lo: f64, hi: f64) -> Self {
        self.rh_envelope = (lo, hi);
        self
    }

    pub fn with_aux_volts(mut self, ch2: f64, ch3: f64) -> Self {
        self.aux_volts = [ch2, ch3];
        self
    }

    /// `const:T,RH` shorthand for a constant scenario.
    pub fn parse_shorthand(spec: &str) -> Result<Self, ScenarioError> {
        let bad = |m: &str| ScenarioError::Spec {
            spec: spec.to_string(),
            message: m.to_string(),
        };
        let args = spec
            .strip_prefix("const:")
            .ok_or_else(|| bad("expected const:TEMPERATURE,RH"))?;
        let (t, rh) = args
            .split_once(',')
            .ok_or_else(|| bad("expected const:TEMPERATURE,RH"))?;
        let t: f64 = t.trim().parse().map_err(|_| bad("bad temperature"))?;
        let rh: f64 = rh.trim().parse().map_err(|_| bad("bad humidity"))?;
        Ok(Self::constant(t, rh))
    }

    /// Checks envelopes and that every humidity value is reachable by the
    /// sensor model.
    pub fn validate(&self, sensor: &HumiditySensor) -> Result<(), ScenarioError> {
        for src in self.temperature.iter().chain(self.rh.iter()) {
            src.validate().map_err(ScenarioError::Invalid)?;
        }
        if let Some(d) = self.duration_s {
            if !(d.is_finite() && d >= 0.0) {
                return Err(ScenarioError::Invalid(format!(
                    "duration must be non-negative, got {d}"
                )));
            }
        }
        if self.aux_volts.iter().any(|v| !v.is_finite()) {
            return Err(ScenarioError::Invalid("aux voltages must be finite".into()));
        }
        let (img_lo, img_hi) = sensor.image();
        let (env_lo, env_hi) = self.rh_envelope;
        if !(env_lo >= img_lo && env_hi <= img_hi && env_lo <= env_hi) {
            return Err(ScenarioError::Invalid(format!(
                "humidity envelope [{env_lo}, {env_hi}] must lie within the sensor range [{img_lo:.3}, {img_hi:.3}]"
            )));
        }
        check_envelope("temperature", self.temperature.as_ref(), self.temperature_envelope)?;
        check_envelope("humidity", self.rh.as_ref(), self.rh_envelope)?;
        Ok(())
    }

    pub fn temperature_at(&self, t: f64) -> Option<f64> {
        self.temperature.as_ref().map(|s| s.value_at(t))
    }

    pub fn rh_at(&self, t: f64) -> Option<f64> {
        self.rh.as_ref().map(|s| s.value_at(t))
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        file.into_scenario(base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

fn check_envelope(
    quantity: &'static str,
    source: Option<&Source>,
    (env_lo, env_hi): (f64, f64),
) -> Result<(), ScenarioError> {
    let Some(source) = source else { return Ok(()) };
    let (lo, hi) = source.span();
    if lo < env_lo || hi > env_hi {
        return Err(ScenarioError::Envelope {
            quantity,
            lo,
            hi,
            env_lo,
            env_hi,
        });
    }
    Ok(())
}

/// On-disk scenario layout.
///
/// ```toml
/// duration_s = 3600
/// temperature = { kind = "sinusoid", mean = 25.0, amplitude = 10.0, period_s = 600.0 }
/// rh = { kind = "constant", value = 55.0 }
/// temperature_envelope = [0.0, 50.0]
/// rh_envelope = [12.0, 88.0]
/// ch2_volts = 1.25
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    duration_s: Option<f64>,
    temperature: Option<SourceFile>,
    rh: Option<SourceFile>,
    temperature_envelope: Option<[f64; 2]>,
    rh_envelope: Option<[f64; 2]>,
    #[serde(default)]
    ch2_volts: f64,
    #[serde(default)]
    ch3_volts: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum SourceFile {
    Off,
    Constant {
        value: f64,
    },
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period_s: f64,
        #[serde(default)]
        phase: f64,
    },
    Csv {
        path: PathBuf,
        column: String,
    },
}

impl SourceFile {
    fn into_source(self, base_dir: &Path) -> Result<Option<Source>, ScenarioError> {
        Ok(match self {
            SourceFile::Off => None,
            SourceFile::Constant { value } => Some(Source::Constant(value)),
            SourceFile::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase,
            } => Some(Source::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase,
            }),
            SourceFile::Csv { path, column } => {
                let path = if path.is_relative() {
                    base_dir.join(path)
                } else {
                    path
                };
                Some(Source::Replay(ReplayTrace::load(&path, &column)?))
            }
        })
    }
}

impl ScenarioFile {
    fn into_scenario(self, base_dir: &Path) -> Result<AmbientScenario, ScenarioError> {
        let temperature = match self.temperature {
            Some(s) => s.into_source(base_dir)?,
            None => None,
        };
        let rh = match self.rh {
            Some(s) => s.into_source(base_dir)?,
            None => None,
        };
        let mut sc = AmbientScenario::new(temperature, rh);
        sc.duration_s = self.duration_s;
        if let Some([lo, hi]) = self.temperature_envelope {
            sc.temperature_envelope = (lo, hi);
        }
        if let Some([lo, hi]) = self.rh_envelope {
            sc.rh_envelope = (lo, hi);
        }
        sc.aux_volts = [self.ch2_volts, self.ch3_volts];
        Ok(sc)
    }
}
