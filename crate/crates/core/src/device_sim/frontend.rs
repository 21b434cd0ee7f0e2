//! Sensor models, conditioning stages and the converter.

use thiserror::Error;

use crate::calibration::{
    rh_curve, InversionError, MonotoneInverse, ADC_FULL_SCALE, ADC_MAX_CODE, CLAMP_VOLTS,
    RH_SENSOR_RANGE,
};
use crate::protocol::AdcCode;

/// LM35 scale factor, volts per °C.
pub const LM35_VOLTS_PER_DEGREE: f64 = 0.010;

/// LM35 output for a temperature in °C.
pub fn lm35_voltage(t: f64) -> f64 {
    LM35_VOLTS_PER_DEGREE * t
}

/// Humidity sensor modelled as the exact inverse of the host calibration
/// curve over its 1–3 V output span.
#[derive(Debug, Clone)]
pub struct HumiditySensor {
    inverse: MonotoneInverse,
}

impl HumiditySensor {
    pub fn new() -> Self {
        let (lo, hi) = RH_SENSOR_RANGE;
        HumiditySensor {
            inverse: MonotoneInverse::new(rh_curve(), lo, hi)
                .expect("calibration curve is monotone on the sensor span"),
        }
    }

    /// Humidity range the sensor can represent.
    pub fn image(&self) -> (f64, f64) {
        self.inverse.image()
    }

    /// Sensor output voltage for a relative humidity in %RH.
    pub fn voltage(&self, rh: f64) -> Result<f64, InversionError> {
        self.inverse.invert(rh)
    }
}

impl Default for HumiditySensor {
    fn default() -> Self {
        Self::new()
    }
}

/// Sensor output voltage for `rh`. Builds the inverse on every call; hold a
/// [`HumiditySensor`] when converting many values.
pub fn tps_voltage(rh: f64) -> Result<f64, InversionError> {
    HumiditySensor::new().voltage(rh)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("signal chain gain must be positive and finite, got {0}")]
    Gain(f64),
    #[error("clamp window [{min}, {max}] is empty")]
    Clamp { min: f64, max: f64 },
}

/// Gain/offset stage followed by the protective clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalChain {
    gain: f64,
    offset: f64,
    clamp_min: f64,
    clamp_max: f64,
}

impl SignalChain {
    pub fn new(gain: f64, offset: f64, clamp_min: f64, clamp_max: f64) -> Result<Self, ChainError> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(ChainError::Gain(gain));
        }
        if clamp_min.is_nan() || clamp_max.is_nan() || clamp_min >= clamp_max {
            return Err(ChainError::Clamp {
                min: clamp_min,
                max: clamp_max,
            });
        }
        Ok(SignalChain {
            gain,
            offset,
            clamp_min,
            clamp_max,
        })
    }

    /// ×10 stage mapping the LM35's 0–0.5 V onto 0–5 V.
    pub fn temperature() -> Self {
        SignalChain::new(10.0, 0.0, 0.0, CLAMP_VOLTS).expect("valid chain")
    }

    /// `2·v − 1` stage mapping the humidity sensor's 1–3 V onto 1–5 V.
    pub fn humidity() -> Self {
        SignalChain::new(2.0, -1.0, 0.0, CLAMP_VOLTS).expect("valid chain")
    }

    /// Unity gain with only the clamp.
    pub fn passthrough() -> Self {
        SignalChain::new(1.0, 0.0, 0.0, CLAMP_VOLTS).expect("valid chain")
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn apply(&self, v: f64) -> f64 {
        (self.gain * v + self.offset).clamp(self.clamp_min, self.clamp_max)
    }
}

pub fn apply_chain(chain: &SignalChain, v: f64) -> f64 {
    chain.apply(v)
}

/// Ideal converter with round-to-nearest transfer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcModel {
    pub vref: f64,
    pub max_code: u16,
}

impl Default for AdcModel {
    fn default() -> Self {
        AdcModel {
            vref: ADC_FULL_SCALE,
            max_code: ADC_MAX_CODE,
        }
    }
}

impl AdcModel {
    /// One code step in volts.
    pub fn lsb(&self) -> f64 {
        self.vref / f64::from(self.max_code)
    }

    /// `round(v / vref × 1023)`, saturating at both rails. NaN maps to 0.
    pub fn quantize(&self, v: f64) -> AdcCode {
        let scaled = (v / self.vref * f64::from(self.max_code)).round();
        if scaled.is_nan() {
            return AdcCode::ZERO;
        }
        AdcCode::saturating(scaled.clamp(0.0, f64::from(self.max_code)) as i64)
    }
}

pub fn quantize(adc: &AdcModel, v: f64) -> AdcCode {
    adc.quantize(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lm35_examples() {
        assert_eq!(lm35_voltage(0.0), 0.0);
        assert!((lm35_voltage(50.0) - 0.5).abs() < 1e-15);
        assert!((lm35_voltage(25.0) - 0.25).abs() < 1e-15);
        assert!((SignalChain::temperature().apply(lm35_voltage(50.0)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn humidity_sensor_examples() {
        let s = HumiditySensor::new();
        assert!((s.voltage(49.666).unwrap() - 2.0).abs() < 1e-8);
        assert!((s.voltage(7.758).unwrap() - 1.0).abs() < 1e-8);
        assert!((s.voltage(108.194).unwrap() - 3.0).abs() < 1e-8);
        assert!(tps_voltage(5.0).is_err());
        assert!(tps_voltage(110.0).is_err());
    }

    #[test]
    fn chain_examples() {
        assert!((apply_chain(&SignalChain::temperature(), 0.25) - 2.5).abs() < 1e-12);
        assert_eq!(apply_chain(&SignalChain::humidity(), 3.0), 5.0);
        assert_eq!(apply_chain(&SignalChain::temperature(), 0.6), 5.1);
        assert_eq!(apply_chain(&SignalChain::humidity(), 0.2), 0.0);
    }

    #[test]
    fn chain_validation() {
        assert!(SignalChain::new(0.0, 0.0, 0.0, 5.1).is_err());
        assert!(SignalChain::new(-1.0, 0.0, 0.0, 5.1).is_err());
        assert!(SignalChain::new(1.0, 0.0, 5.1, 5.1).is_err());
    }

    #[test]
    fn quantize_examples() {
        let adc = AdcModel::default();
        assert_eq!(quantize(&adc, 0.0).value(), 0);
        assert_eq!(quantize(&adc, 5.0).value(), 1023);
        assert_eq!(quantize(&adc, 5.1).value(), 1023);
        assert_eq!(quantize(&adc, -0.3).value(), 0);
        assert_eq!(quantize(&adc, 2.5).value(), 512);
        assert_eq!(quantize(&adc, f64::NAN).value(), 0);
        assert_eq!(quantize(&adc, f64::INFINITY).value(), 1023);
    }
}
