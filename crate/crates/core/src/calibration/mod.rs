//! Raw code → engineering unit conversion.
//!
//! Each channel runs the same three-stage pipeline:
//!
//! 1. ADC transfer: `code × 5.0 / 1023` gives the voltage on the converter input.
//! 2. Conditioning inverse: undo the analog gain/offset stage, recovering the
//!    sensor's own output voltage.
//! 3. Sensor transform: linear, polynomial, or pass-through volts.
//!
//! Values outside a channel's valid range are computed and flagged, never
//! clamped.

mod config;
mod polynomial;

use std::fmt;
use std::str::FromStr;

use bitflags::bitflags;
use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::protocol::{AdcCode, Frame, CHANNELS};

pub use config::{ChannelConfig, ConfigError, ProfileConfig, TransformKind};
pub use polynomial::{
    eval_polynomial, fit_polynomial, invert_monotone, FitError, InversionError, MonotoneInverse,
    PolyFit, Polynomial, PolynomialError, CONDITION_WARN, INVERSION_TOLERANCE,
};

/// Converter reference voltage.
pub const ADC_FULL_SCALE: f64 = 5.0;
/// Highest converter code. The transfer divides by this, not by 1024.
pub const ADC_MAX_CODE: u16 = 1023;
/// Zener clamp level on every analog input.
pub const CLAMP_VOLTS: f64 = 5.1;

/// RH sensor calibration curve, highest degree first, x in sensor volts.
pub const RH_CURVE_DESCENDING: [f64; 6] = [15.538, -161.37, 655.54, -1289.1, 1259.3, -472.15];
/// Sensor output span of the humidity sensor.
pub const RH_SENSOR_RANGE: (f64, f64) = (1.0, 3.0);
/// Rated humidity span of the sensor.
pub const RH_NOMINAL_RANGE: (f64, f64) = (10.0, 90.0);

/// Temperature conditioning: 0–50 °C spans 0–5 V on the converter input.
pub const TEMPERATURE_PER_BUS_VOLT: f64 = 10.0;

/// The humidity calibration polynomial in ascending storage order.
pub fn rh_curve() -> Polynomial {
    Polynomial::from_descending(&RH_CURVE_DESCENDING).expect("constant curve is valid")
}

/// Engineering units a channel can report in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Celsius,
    PercentRh,
    Volt,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Celsius => "°C",
            Unit::PercentRh => "%RH",
            Unit::Volt => "V",
        }
    }

    /// ASCII name used in configuration files.
    pub fn key(self) -> &'static str {
        match self {
            Unit::Celsius => "degC",
            Unit::PercentRh => "pctRH",
            Unit::Volt => "V",
        }
    }

    /// Decimal places used when displaying a value in this unit.
    pub fn display_precision(self) -> usize {
        match self {
            Unit::Celsius => 2,
            Unit::PercentRh => 1,
            Unit::Volt => 3,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown unit {0:?} (expected degC, pctRH or V)")]
pub struct UnknownUnit(pub String);

impl FromStr for Unit {
    type Err = UnknownUnit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "degC" | "°C" | "C" | "celsius" => Ok(Unit::Celsius),
            "pctRH" | "%RH" | "rh" | "RH" => Ok(Unit::PercentRh),
            "V" | "volt" | "volts" => Ok(Unit::Volt),
            other => Err(UnknownUnit(other.to_string())),
        }
    }
}

bitflags! {
    /// Per-channel quality markers.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct Flags: u8 {
        /// Input or result lies outside the channel's rated range.
        const OUT_OF_RANGE = 0b001;
        /// Humidity outside [0, 100] %RH.
        const UNPHYSICAL = 0b010;
        /// Code sits on the converter's upper rail; the true input may be higher.
        const SATURATED = 0b100;
    }
}

const FLAG_NAMES: [(Flags, &str); 3] = [
    (Flags::OUT_OF_RANGE, "oor"),
    (Flags::UNPHYSICAL, "unphys"),
    (Flags::SATURATED, "sat"),
];

impl Flags {
    /// Short text form, e.g. `oor+sat`. Empty when no flag is set.
    pub fn to_tag(self) -> String {
        FLAG_NAMES
            .iter()
            .filter(|(f, _)| self.contains(*f))
            .map(|(_, n)| *n)
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn from_tag(tag: &str) -> Option<Flags> {
        let mut flags = Flags::empty();
        for part in tag.split('+').filter(|p| !p.is_empty()) {
            let (f, _) = FLAG_NAMES.iter().find(|(_, n)| *n == part)?;
            flags |= *f;
        }
        Some(flags)
    }
}

/// A computed value with its unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineeringValue {
    pub value: f64,
    pub unit: Unit,
}

impl fmt::Display for EngineeringValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.*} {}",
            self.unit.display_precision(),
            self.value,
            self.unit
        )
    }
}

/// A value together with any range flags raised while computing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub value: f64,
    pub flags: Flags,
}

/// `gain · x + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMap {
    gain: f64,
    offset: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearMapError {
    #[error("linear map gain must be finite and nonzero, got {0}")]
    Gain(f64),
    #[error("linear map offset must be finite, got {0}")]
    Offset(f64),
}

impl LinearMap {
    pub fn new(gain: f64, offset: f64) -> Result<Self, LinearMapError> {
        if !gain.is_finite() || gain == 0.0 {
            return Err(LinearMapError::Gain(gain));
        }
        if !offset.is_finite() {
            return Err(LinearMapError::Offset(offset));
        }
        Ok(LinearMap { gain, offset })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.gain * x + self.offset
    }

    pub fn inverse(&self) -> LinearMap {
        LinearMap {
            gain: 1.0 / self.gain,
            offset: -self.offset / self.gain,
        }
    }
}

/// Final stage of a channel pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorTransform {
    Linear(LinearMap),
    Polynomial(Polynomial),
    RawVolts,
}

impl SensorTransform {
    pub fn apply(&self, v: f64) -> f64 {
        match self {
            SensorTransform::Linear(m) => m.apply(v),
            SensorTransform::Polynomial(p) => p.eval(v),
            SensorTransform::RawVolts => v,
        }
    }
}

/// Complete code → engineering value transform for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub channel: usize,
    pub label: String,
    /// Maps converter-input volts back to sensor volts. `None` is identity.
    pub conditioning_inverse: Option<LinearMap>,
    pub sensor: SensorTransform,
    pub unit: Unit,
    /// Accepted span of the sensor-side voltage, inclusive.
    pub input_range: Option<(f64, f64)>,
    /// Rated span of the engineering value, inclusive.
    pub nominal_range: Option<(f64, f64)>,
}

impl ChannelProfile {
    /// Channel 0 default: temperature, 10 °C per converter volt.
    pub fn temperature(channel: usize) -> Self {
        ChannelProfile {
            channel,
            label: "temperature".into(),
            conditioning_inverse: None,
            sensor: SensorTransform::Linear(
                LinearMap::new(TEMPERATURE_PER_BUS_VOLT, 0.0).expect("nonzero gain"),
            ),
            unit: Unit::Celsius,
            input_range: Some((0.0, CLAMP_VOLTS)),
            nominal_range: None,
        }
    }

    /// Channel 1 default: humidity through the 2·v − 1 conditioning stage and
    /// the fifth-order sensor curve.
    pub fn humidity(channel: usize) -> Self {
        ChannelProfile {
            channel,
            label: "humidity".into(),
            conditioning_inverse: Some(rh_conditioning().inverse()),
            sensor: SensorTransform::Polynomial(rh_curve()),
            unit: Unit::PercentRh,
            input_range: Some(RH_SENSOR_RANGE),
            nominal_range: Some(RH_NOMINAL_RANGE),
        }
    }

    /// Spare input reported as converter volts.
    pub fn raw_volts(channel: usize) -> Self {
        ChannelProfile {
            channel,
            label: format!("ch{channel}"),
            conditioning_inverse: None,
            sensor: SensorTransform::RawVolts,
            unit: Unit::Volt,
            input_range: None,
            nominal_range: None,
        }
    }

    pub fn sensor_voltage(&self, bus_volts: f64) -> f64 {
        match &self.conditioning_inverse {
            Some(m) => m.apply(bus_volts),
            None => bus_volts,
        }
    }

    /// Runs the full pipeline on one code.
    pub fn convert(&self, code: AdcCode) -> Reading {
        let bus = code_to_bus_voltage(code);
        let sensor_v = self.sensor_voltage(bus);
        let value = self.sensor.apply(sensor_v);
        let mut flags = Flags::empty();
        if let Some((lo, hi)) = self.input_range {
            if !(lo..=hi).contains(&sensor_v) {
                flags |= Flags::OUT_OF_RANGE;
            }
        }
        if let Some((lo, hi)) = self.nominal_range {
            if !(lo..=hi).contains(&value) {
                flags |= Flags::OUT_OF_RANGE;
            }
        }
        if self.unit == Unit::PercentRh && !(0.0..=100.0).contains(&value) {
            flags |= Flags::UNPHYSICAL;
        }
        if code.is_full_scale() {
            flags |= Flags::SATURATED;
        }
        Reading { value, flags }
    }
}

/// The analog humidity stage: `v_bus = 2·v_sensor − 1`.
pub fn rh_conditioning() -> LinearMap {
    LinearMap::new(2.0, -1.0).expect("nonzero gain")
}

/// Profiles for all four channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    profiles: [ChannelProfile; CHANNELS],
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("profile at position {position} is labelled channel {channel}")]
pub struct ProfileOrderError {
    pub position: usize,
    pub channel: usize,
}

impl ProfileSet {
    pub fn new(profiles: [ChannelProfile; CHANNELS]) -> Result<Self, ProfileOrderError> {
        for (position, p) in profiles.iter().enumerate() {
            if p.channel != position {
                return Err(ProfileOrderError {
                    position,
                    channel: p.channel,
                });
            }
        }
        Ok(ProfileSet { profiles })
    }

    pub fn get(&self, channel: usize) -> &ChannelProfile {
        &self.profiles[channel]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ChannelProfile> {
        self.profiles.iter()
    }

    /// First channel reporting in `unit`.
    pub fn channel_with_unit(&self, unit: Unit) -> Option<usize> {
        self.profiles.iter().position(|p| p.unit == unit)
    }
}

impl Default for ProfileSet {
    /// ch0 temperature, ch1 humidity, ch2/ch3 raw volts.
    fn default() -> Self {
        ProfileSet {
            profiles: [
                ChannelProfile::temperature(0),
                ChannelProfile::humidity(1),
                ChannelProfile::raw_volts(2),
                ChannelProfile::raw_volts(3),
            ],
        }
    }
}

/// Converter transfer, `code × 5.0 / 1023`.
pub fn code_to_bus_voltage(code: AdcCode) -> f64 {
    f64::from(code.value()) * ADC_FULL_SCALE / f64::from(ADC_MAX_CODE)
}

/// Temperature from converter-input volts, flagged outside [0, 5.1] V.
pub fn temperature_from_bus(v_bus: f64) -> Reading {
    let flags = if (0.0..=CLAMP_VOLTS).contains(&v_bus) {
        Flags::empty()
    } else {
        Flags::OUT_OF_RANGE
    };
    Reading {
        value: TEMPERATURE_PER_BUS_VOLT * v_bus,
        flags,
    }
}

/// Undoes the humidity conditioning stage.
pub fn bus_to_sensor_voltage_rh(v_bus: f64) -> f64 {
    (v_bus + 1.0) / 2.0
}

/// Humidity from sensor volts via the calibration curve.
pub fn rh_from_sensor_voltage(x: f64) -> Reading {
    let value = rh_curve().eval(x);
    let mut flags = Flags::empty();
    let (lo, hi) = RH_SENSOR_RANGE;
    let (rh_lo, rh_hi) = RH_NOMINAL_RANGE;
    if !(lo..=hi).contains(&x) || !(rh_lo..=rh_hi).contains(&value) {
        flags |= Flags::OUT_OF_RANGE;
    }
    if !(0.0..=100.0).contains(&value) {
        flags |= Flags::UNPHYSICAL;
    }
    Reading { value, flags }
}

/// One calibrated acquisition instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub timestamp: DateTime<Utc>,
    pub raw: Frame,
    pub values: [EngineeringValue; CHANNELS],
    pub flags: [Flags; CHANNELS],
}

impl Sample {
    pub fn any_flagged(&self) -> bool {
        self.flags.iter().any(|f| !f.is_empty())
    }
}

/// Applies each channel's profile to the frame.
pub fn calibrate_frame(frame: &Frame, profiles: &ProfileSet, timestamp: DateTime<Utc>) -> Sample {
    let mut values = [EngineeringValue {
        value: 0.0,
        unit: Unit::Volt,
    }; CHANNELS];
    let mut flags = [Flags::empty(); CHANNELS];
    for (ch, profile) in profiles.iter().enumerate() {
        let r = profile.convert(frame.code(ch));
        values[ch] = EngineeringValue {
            value: r.value,
            unit: profile.unit,
        };
        flags[ch] = r.flags;
    }
    Sample {
        timestamp,
        raw: *frame,
        values,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(v: u16) -> AdcCode {
        AdcCode::new(v).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn adc_transfer_examples() {
        assert_eq!(code_to_bus_voltage(code(0)), 0.0);
        assert_eq!(code_to_bus_voltage(code(1023)), 5.0);
        close(code_to_bus_voltage(code(512)), 512.0 * 5.0 / 1023.0, 0.0);
        close(code_to_bus_voltage(code(512)), 2.502_443_792_766_373, 1e-15);
    }

    #[test]
    fn adc_transfer_strictly_increasing() {
        let volts: Vec<f64> = (0..=1023).map(|c| code_to_bus_voltage(code(c))).collect();
        assert!(volts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn temperature_examples() {
        assert_eq!(temperature_from_bus(0.0).value, 0.0);
        assert_eq!(temperature_from_bus(5.0).value, 50.0);
        assert_eq!(temperature_from_bus(2.5).value, 25.0);
        assert!(temperature_from_bus(2.5).flags.is_empty());
        assert_eq!(temperature_from_bus(5.2).flags, Flags::OUT_OF_RANGE);
        assert_eq!(temperature_from_bus(-0.1).flags, Flags::OUT_OF_RANGE);
    }

    #[test]
    fn rh_conditioning_inverse_examples() {
        assert_eq!(bus_to_sensor_voltage_rh(1.0), 1.0);
        assert_eq!(bus_to_sensor_voltage_rh(5.0), 3.0);
        assert_eq!(bus_to_sensor_voltage_rh(3.0), 2.0);
        let inv = rh_conditioning().inverse();
        for v in [1.0, 1.5, 2.0, 2.75, 3.0] {
            assert_eq!(inv.apply(rh_conditioning().apply(v)), v);
            assert_eq!(bus_to_sensor_voltage_rh(2.0 * v - 1.0), v);
        }
    }

    #[test]
    fn rh_curve_spot_values() {
        let mid = rh_from_sensor_voltage(2.0);
        close(mid.value, 49.666, 1e-9);
        assert!(mid.flags.is_empty());

        let low = rh_from_sensor_voltage(1.0);
        close(low.value, 7.758, 1e-9);
        assert_eq!(low.flags, Flags::OUT_OF_RANGE);

        let high = rh_from_sensor_voltage(3.0);
        close(high.value, 108.194, 1e-9);
        assert_eq!(high.flags, Flags::OUT_OF_RANGE | Flags::UNPHYSICAL);

        assert!(rh_from_sensor_voltage(3.2).flags.contains(Flags::OUT_OF_RANGE));
    }

    #[test]
    fn linear_map_rejects_zero_gain() {
        assert_eq!(LinearMap::new(0.0, 1.0), Err(LinearMapError::Gain(0.0)));
        assert!(LinearMap::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn calibrate_full_scale_temperature() {
        let s = calibrate_frame(
            &Frame::from_raw([1023, 617, 0, 0]).unwrap(),
            &ProfileSet::default(),
            DateTime::UNIX_EPOCH,
        );
        assert_eq!(s.values[0].value, 50.0);
        assert_eq!(s.values[0].unit, Unit::Celsius);
        assert_eq!(s.flags[0], Flags::SATURATED);
        assert_eq!(s.raw.raw(), [1023, 617, 0, 0]);
    }

    #[test]
    fn calibrate_zero_frame_flags_humidity_only() {
        let s = calibrate_frame(&Frame::default(), &ProfileSet::default(), DateTime::UNIX_EPOCH);
        assert_eq!(s.values[0].value, 0.0);
        assert!(s.flags[0].is_empty());
        // 0 V on the bus inverts to 0.5 V at the sensor, below its 1 V floor
        assert!(s.flags[1].contains(Flags::OUT_OF_RANGE));
        close(s.values[1].value, rh_curve().eval(0.5), 1e-12);
        assert!(s.flags[2].is_empty() && s.flags[3].is_empty());
    }

    #[test]
    fn calibrate_spare_channel_volts() {
        let s = calibrate_frame(
            &Frame::from_raw([0, 0, 512, 0]).unwrap(),
            &ProfileSet::default(),
            DateTime::UNIX_EPOCH,
        );
        assert_eq!(s.values[2].unit, Unit::Volt);
        close(s.values[2].value, 2.50244, 1e-5);
    }

    #[test]
    fn flag_tags_round_trip() {
        for bits in 0..8u8 {
            let f = Flags::from_bits(bits).unwrap();
            assert_eq!(Flags::from_tag(&f.to_tag()), Some(f));
        }
        assert_eq!(Flags::from_tag("bogus"), None);
    }

    #[test]
    fn profile_set_checks_order() {
        let err = ProfileSet::new([
            ChannelProfile::raw_volts(1),
            ChannelProfile::raw_volts(1),
            ChannelProfile::raw_volts(2),
            ChannelProfile::raw_volts(3),
        ])
        .unwrap_err();
        assert_eq!(err.position, 0);
    }

    #[test]
    fn engineering_value_display() {
        let v = EngineeringValue {
            value: 25.0244,
            unit: Unit::Celsius,
        };
        assert_eq!(v.to_string(), "25.02 °C");
    }
}
