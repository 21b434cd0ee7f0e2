//! Align two series sampled on offset clocks and summarize their deviation.

use chrono::{TimeDelta, TimeZone, Utc};
use thdaq::storage::{compare_series, Series};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let reference: Vec<_> = (0..60)
        .map(|i| (t0 + TimeDelta::seconds(i), 50.0 + 20.0 * (i as f64 / 10.0).sin()))
        .collect();
    // logger clock runs 300 ms late and reads 0.3 %RH high
    let measured: Vec<_> = reference
        .iter()
        .map(|&(t, v)| (t + TimeDelta::milliseconds(300), v + 0.3))
        .collect();
    let a = Series::new("reference", "%RH", reference)?;
    let b = Series::new("logger", "%RH", measured)?;
    println!("{}", compare_series(&a, &b, 0.5)?);
    Ok(())
}
