//! Walk humidity through the sensor, signal chain and ADC, then calibrate it back.

use chrono::Utc;
use thdaq::device_sim::{lm35_voltage, AdcModel, HumiditySensor, SignalChain};
use thdaq::AdcCode;
use thdaq::{calibrate_frame, Frame, ProfileSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sensor = HumiditySensor::new();
    let adc = AdcModel::default();
    let rh_chain = SignalChain::humidity();
    let t_chain = SignalChain::temperature();
    let profiles = ProfileSet::default();

    println!("{:>6} {:>8} {:>6} {:>9}", "RH%", "sensor V", "code", "recovered");
    for rh in [15.0, 30.0, 50.0, 70.0, 85.0] {
        let v = sensor.voltage(rh)?;
        let code = adc.quantize(rh_chain.apply(v));
        let t_code = adc.quantize(t_chain.apply(lm35_voltage(25.0)));
        let sample = calibrate_frame(&Frame::new([t_code, code, AdcCode::ZERO, AdcCode::ZERO]), &profiles, Utc::now());
        println!(
            "{rh:>6.1} {v:>8.4} {:>6} {:>9.3}",
            code.value(),
            sample.values[1].value
        );
    }
    Ok(())
}
