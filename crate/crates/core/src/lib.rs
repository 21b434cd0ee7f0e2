//! Temperature and humidity data acquisition.
//!
//! The crate covers both ends of a four-channel, 10-bit acquisition link:
//!
//! * [`protocol`]: the fixed-width ASCII record format and its resynchronizing decoder.
//! * [`calibration`]: code → volts → engineering unit conversion, polynomial
//!   fitting and inversion.
//! * [`device_sim`]: a simulated board that turns ambient scenarios into records.
//! * [`acquisition`]: the host session that reads a transport, decodes,
//!   calibrates and fans samples out to sinks.
//! * [`storage`]: CSV logs, waveform plots and series comparison.
//! * [`cli`]: the `thdaq` command-line front end.

pub mod acquisition;
pub mod calibration;
pub mod cli;
pub mod device_sim;
pub mod protocol;
pub mod storage;
mod stop;

pub use calibration::{calibrate_frame, ProfileSet, Sample};
pub use protocol::{AdcCode, Decoder, Frame};
pub use stop::StopHandle;
