//! Channel profiles from a TOML file.
//!
//! ```toml
//! [ch1]
//! label = "humidity"
//! kind = "polynomial"
//! unit = "pctRH"
//! conditioning_gain = 0.5
//! conditioning_offset = 0.5
//! # highest degree first
//! coefficients = [15.538, -161.37, 655.54, -1289.1, 1259.3, -472.15]
//! input_range = [1.0, 3.0]
//! nominal_range = [10.0, 90.0]
//! ```
//!
//! Sections left out keep the built-in default for that channel.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{
    ChannelProfile, LinearMap, LinearMapError, Polynomial, PolynomialError, ProfileSet,
    SensorTransform, Unit, UnknownUnit,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed profile configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("ch{channel}: {message}")]
    Channel { channel: usize, message: String },
}

impl ConfigError {
    fn channel(channel: usize, message: impl Into<String>) -> Self {
        ConfigError::Channel {
            channel,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Linear,
    Polynomial,
    Raw,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub label: Option<String>,
    pub kind: Option<TransformKind>,
    pub unit: Option<String>,
    pub gain: Option<f64>,
    pub offset: Option<f64>,
    pub conditioning_gain: Option<f64>,
    pub conditioning_offset: Option<f64>,
    /// Highest degree first.
    pub coefficients: Option<Vec<f64>>,
    pub input_range: Option<[f64; 2]>,
    pub nominal_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ProfileConfig {
    pub ch0: Option<ChannelConfig>,
    pub ch1: Option<ChannelConfig>,
    pub ch2: Option<ChannelConfig>,
    pub ch3: Option<ChannelConfig>,
}

impl ProfileConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Resolves against the default profile set.
    pub fn resolve(&self) -> Result<ProfileSet, ConfigError> {
        let defaults = ProfileSet::default();
        let sections = [&self.ch0, &self.ch1, &self.ch2, &self.ch3];
        let mut out: Vec<ChannelProfile> = Vec::with_capacity(4);
        for (ch, section) in sections.into_iter().enumerate() {
            let base = defaults.get(ch).clone();
            out.push(match section {
                Some(cfg) => cfg.apply(base)?,
                None => base,
            });
        }
        let arr: [ChannelProfile; 4] = out.try_into().expect("four channels");
        Ok(ProfileSet::new(arr).expect("channels built in order"))
    }
}

fn range(channel: usize, name: &str, r: [f64; 2]) -> Result<(f64, f64), ConfigError> {
    if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
        Ok((r[0], r[1]))
    } else {
        Err(ConfigError::channel(
            channel,
            format!("{name} must be [low, high] with low <= high"),
        ))
    }
}

impl ChannelConfig {
    fn apply(&self, mut profile: ChannelProfile) -> Result<ChannelProfile, ConfigError> {
        let ch = profile.channel;
        let map_err = |e: LinearMapError| ConfigError::channel(ch, e.to_string());
        let poly_err = |e: PolynomialError| ConfigError::channel(ch, e.to_string());

        if let Some(label) = &self.label {
            profile.label = label.clone();
        }
        if let Some(unit) = &self.unit {
            profile.unit = unit
                .parse()
                .map_err(|e: UnknownUnit| ConfigError::channel(ch, e.to_string()))?;
        }
        if self.conditioning_gain.is_some() || self.conditioning_offset.is_some() {
            let m = LinearMap::new(
                self.conditioning_gain.unwrap_or(1.0),
                self.conditioning_offset.unwrap_or(0.0),
            )
            .map_err(map_err)?;
            profile.conditioning_inverse = Some(m);
        }

        let kind = self.kind.or(match profile.sensor {
            SensorTransform::Linear(_) => Some(TransformKind::Linear),
            SensorTransform::Polynomial(_) => Some(TransformKind::Polynomial),
            SensorTransform::RawVolts => Some(TransformKind::Raw),
        });
        match kind {
            Some(TransformKind::Linear) => {
                let (g0, o0) = match &profile.sensor {
                    SensorTransform::Linear(m) => (m.gain(), m.offset()),
                    _ => (1.0, 0.0),
                };
                let m = LinearMap::new(self.gain.unwrap_or(g0), self.offset.unwrap_or(o0))
                    .map_err(map_err)?;
                profile.sensor = SensorTransform::Linear(m);
            }
            Some(TransformKind::Polynomial) => {
                let p = match (&self.coefficients, &profile.sensor) {
                    (Some(c), _) => Polynomial::from_descending(c).map_err(poly_err)?,
                    (None, SensorTransform::Polynomial(p)) => p.clone(),
                    (None, _) => {
                        return Err(ConfigError::channel(
                            ch,
                            "polynomial transform requires coefficients",
                        ))
                    }
                };
                profile.sensor = SensorTransform::Polynomial(p);
            }
            Some(TransformKind::Raw) | None => {
                profile.sensor = SensorTransform::RawVolts;
                if self.unit.is_none() {
                    profile.unit = Unit::Volt;
                }
            }
        }
        if let Some(r) = self.input_range {
            profile.input_range = Some(range(ch, "input_range", r)?);
        }
        if let Some(r) = self.nominal_range {
            profile.nominal_range = Some(range(ch, "nominal_range", r)?);
        }
        Ok(profile)
    }
}
