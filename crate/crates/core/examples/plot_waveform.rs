//! Render temperature and humidity traces to SVG and a text table.

use chrono::{TimeDelta, TimeZone, Utc};
use thdaq::storage::{reconstruct_waveform, reconstruct_waveform_as, PlotFormat, Series};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let ts = |i: i64| t0 + TimeDelta::seconds(i);
    let temp = Series::new(
        "temp_c",
        "°C",
        (0..300).map(|i| (ts(i), 25.0 + 5.0 * (i as f64 / 40.0).sin())).collect(),
    )?;
    let rh = Series::new(
        "rh_pct",
        "%RH",
        (0..300).map(|i| (ts(i), 50.0 - 15.0 * (i as f64 / 40.0).sin())).collect(),
    )?;

    let dir = std::env::temp_dir();
    let svg = dir.join("thdaq-example.svg");
    let summary = reconstruct_waveform(&[temp.clone(), rh.clone()], &svg)?;
    reconstruct_waveform_as(&[temp, rh], &dir.join("thdaq-example.txt"), PlotFormat::Text)?;
    for t in &summary.traces {
        println!("{} [{}]: {} points, {:.2}..{:.2}", t.label, t.unit, t.points, t.min, t.max);
    }
    println!("wrote {}", svg.display());
    Ok(())
}
