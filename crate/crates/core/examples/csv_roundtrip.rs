//! Log calibrated samples to CSV and read them back.

use chrono::{TimeDelta, TimeZone, Utc};
use thdaq::acquisition::ChannelSet;
use thdaq::storage::{read_csv, write_csv};
use thdaq::{calibrate_frame, Frame, ProfileSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profiles = ProfileSet::default();
    let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let samples: Vec<_> = (0..50u16)
        .map(|i| {
            let frame = Frame::from_raw([400 + i, 500 + i, 0, 0]).expect("codes in range");
            calibrate_frame(&frame, &profiles, t0 + TimeDelta::milliseconds(i as i64 * 500))
        })
        .collect();

    let path = std::env::temp_dir().join("thdaq-example-log.csv");
    let rows = write_csv(&samples, &path, ChannelSet::ALL, false)?;
    let log = read_csv(&path)?;
    println!("wrote {rows} rows, read {} back ({} skipped)", log.records.len(), log.skipped.len());
    let worst = log
        .records
        .iter()
        .map(|r| r.calibration_mismatch(&profiles))
        .fold(0.0, f64::max);
    println!("largest stored-vs-recomputed difference: {worst:.2e}");
    Ok(())
}
