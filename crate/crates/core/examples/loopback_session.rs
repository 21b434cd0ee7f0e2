//! Run a simulator on a local socket and acquire from it, printing live readouts.

use std::net::TcpListener;
use std::thread;

use chrono::{DateTime, Utc};
use thdaq::acquisition::{acquire, ChannelSet, Clock, LiveReadout, SampleSink, SessionConfig, TransportSpec};
use thdaq::device_sim::{AmbientScenario, SimConfig, Simulator};
use thdaq::StopHandle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sim = Simulator::new(
        AmbientScenario::constant(22.5, 40.0),
        SimConfig { max_frames: Some(10), ..SimConfig::default() },
    )?;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let stop = StopHandle::new();
    let sim_stop = stop.clone();
    let server = thread::spawn(move || sim.serve_tcp(&listener, &sim_stop));

    let mut config = SessionConfig::new(TransportSpec::Socket(addr.to_string()));
    config.clock = Clock::Synthetic {
        base: "2024-01-01T00:00:00Z".parse::<DateTime<Utc>>()?,
        rate_hz: 1.0,
    };
    let mut live = LiveReadout::new(std::io::stdout(), ChannelSet::from_channels(&[0, 1])?);
    let stats = acquire(&config, &mut [&mut live as &mut dyn SampleSink], &stop)?;
    server.join().expect("simulator thread")?;
    eprintln!("{stats}");
    Ok(())
}
