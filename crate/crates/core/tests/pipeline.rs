use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use thdaq::acquisition::{acquire_from, Clock, MemorySink, SampleSink, SessionConfig, TransportSpec};
use thdaq::calibration::{fit_polynomial, Flags, Polynomial};
use thdaq::device_sim::{AmbientScenario, SimConfig, Simulator};
use thdaq::{calibrate_frame, ProfileSet, StopHandle};

fn run_constant(t: f64, rh: f64) -> thdaq::Sample {
    let mut sim = Simulator::new(
        AmbientScenario::constant(t, rh),
        SimConfig { max_frames: Some(1), ..SimConfig::default() },
    )
    .unwrap();
    let frame = sim.tick(0).unwrap().frame;
    calibrate_frame(&frame, &ProfileSet::default(), Utc::now())
}

proptest! {
    #[test]
    fn simulated_ambient_is_recovered(t in 0.0f64..50.0, rh in 15.0f64..85.0) {
        let s = run_constant(t, rh);
        // half an LSB on the bus is 0.0244 °C; humidity error depends on the curve slope
        prop_assert!((s.values[0].value - t).abs() <= 0.025, "t {t} -> {}", s.values[0].value);
        prop_assert!((s.values[1].value - rh).abs() <= 0.5, "rh {rh} -> {}", s.values[1].value);
        prop_assert!(!s.any_flagged());
    }

    #[test]
    fn fit_recovers_random_cubics(c in proptest::array::uniform4(-5.0f64..5.0)) {
        let p = Polynomial::new(c.to_vec()).unwrap();
        let pts: Vec<(f64, f64)> = (0..15).map(|i| {
            let x = -1.0 + i as f64 / 7.0;
            (x, p.eval(x))
        }).collect();
        let fit = fit_polynomial(&pts, 3).unwrap();
        for (a, b) in fit.polynomial.coefficients().iter().zip(c) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn session_over_a_capture_matches_direct_calibration() {
    let mut sim = Simulator::new(
        AmbientScenario::parse_shorthand("const:31.5,62").unwrap(),
        SimConfig { max_frames: Some(50), ..SimConfig::default() },
    )
    .unwrap();
    let mut capture = Vec::new();
    sim.run(&mut capture, &StopHandle::new()).unwrap();

    let mut cfg = SessionConfig::new(TransportSpec::File("unused".into()));
    cfg.clock = Clock::Synthetic {
        base: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        rate_hz: 2.0,
    };
    let mut mem = MemorySink::default();
    let stats = acquire_from(
        capture.as_slice(),
        &cfg,
        &mut [&mut mem as &mut dyn SampleSink],
        &StopHandle::new(),
    )
    .unwrap();
    assert_eq!(stats.frames_ok, 50);
    assert_eq!(stats.effective_rate_hz(), Some(2.0));
    let s = &mem.samples[0];
    assert!((s.values[0].value - 31.5).abs() <= 0.025);
    assert!((s.values[1].value - 62.0).abs() <= 0.5);
    assert_eq!(mem.samples[1].timestamp - s.timestamp, chrono::TimeDelta::milliseconds(500));
}

#[test]
fn hot_scenario_saturates_and_flags() {
    let mut sim = Simulator::new(
        AmbientScenario::constant(60.0, 50.0).with_temperature_envelope(0.0, 70.0),
        SimConfig::default(),
    )
    .unwrap();
    let frame = sim.tick(0).unwrap().frame;
    assert!(frame.code(0).is_full_scale());
    let s = calibrate_frame(&frame, &ProfileSet::default(), Utc::now());
    assert!(s.flags[0].contains(Flags::SATURATED));
    assert!(!s.flags[1].contains(Flags::SATURATED));
}

#[test]
fn scenario_outside_its_envelope_is_rejected() {
    let err = Simulator::new(AmbientScenario::constant(60.0, 50.0), SimConfig::default());
    assert!(err.is_err());
    let err = Simulator::new(
        AmbientScenario::constant(25.0, 5.0).with_rh_envelope(0.0, 100.0),
        SimConfig::default(),
    );
    assert!(err.is_err(), "humidity envelope beyond the sensor curve must be refused");
}
