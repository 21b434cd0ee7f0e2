//! Generate a capture file from a sinusoidal ambient scenario.

use thdaq::device_sim::{AmbientScenario, SimConfig, Simulator, Source};
use thdaq::StopHandle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = AmbientScenario::new(
        Some(Source::Sinusoid { mean: 25.0, amplitude: 10.0, period_s: 60.0, phase: 0.0 }),
        Some(Source::Sinusoid { mean: 50.0, amplitude: 30.0, period_s: 90.0, phase: 0.0 }),
    )
    .with_duration(120.0);
    let config = SimConfig { sample_rate_hz: 2.0, ..SimConfig::default() };
    let mut sim = Simulator::new(scenario, config)?;

    let path = std::env::temp_dir().join("thdaq-example-capture.bin");
    let summary = sim.run_to_path(&path, &StopHandle::new())?;
    println!("{} frames, {} bytes -> {}", summary.frames_emitted, summary.bytes_written, path.display());
    Ok(())
}
