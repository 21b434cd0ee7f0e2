//! Byte-stream sources the host can read device records from.

use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::time::Duration;

use super::AcquisitionError;

/// Blocking reads give up after this long so the loop can check for stop
/// requests and deadlines.
pub const READ_TIMEOUT: Duration = Duration::from_millis(250);

pub const DEFAULT_BAUD: u32 = 9600;
pub const STANDARD_BAUDS: [u32; 8] = [1200, 2400, 4800, 9600, 19200, 38400, 57600, 115200];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportSpec {
    /// Serial device, always 8 data bits, no parity, one stop bit.
    Serial { path: String, baud: u32 },
    /// TCP `host:port` endpoint.
    Socket(String),
    /// Recorded capture, FIFO, or any readable path.
    File(PathBuf),
}

impl fmt::Display for TransportSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportSpec::Serial { path, baud } => write!(f, "serial:{path}@{baud} 8N1"),
            TransportSpec::Socket(ep) => write!(f, "tcp:{ep}"),
            TransportSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl TransportSpec {
    pub fn validate(&self) -> Result<(), AcquisitionError> {
        if let TransportSpec::Serial { baud, .. } = self {
            if !STANDARD_BAUDS.contains(baud) {
                return Err(AcquisitionError::Config(format!(
                    "baud {baud} is not one of {STANDARD_BAUDS:?}"
                )));
            }
        }
        Ok(())
    }
}

/// A readable device stream. A read returning `Ok(0)` means the stream has
/// ended; `TimedOut`/`WouldBlock` errors mean no data arrived within
/// [`READ_TIMEOUT`].
pub type Transport = Box<dyn Read + Send>;

/// Opens the configured endpoint.
pub fn open_transport(spec: &TransportSpec) -> Result<Transport, AcquisitionError> {
    spec.validate()?;
    let endpoint = spec.to_string();
    let open_err = |source: io::Error| AcquisitionError::Open {
        endpoint: endpoint.clone(),
        source,
    };
    match spec {
        TransportSpec::File(path) => {
            let file = File::open(path).map_err(open_err)?;
            Ok(Box::new(file))
        }
        TransportSpec::Socket(ep) => {
            let addrs: Vec<_> = ep.to_socket_addrs().map_err(open_err)?.collect();
            let mut last = io::Error::new(io::ErrorKind::NotFound, "endpoint resolved to nothing");
            for addr in addrs {
                match TcpStream::connect_timeout(&addr, Duration::from_secs(5)) {
                    Ok(stream) => {
                        stream.set_read_timeout(Some(READ_TIMEOUT)).map_err(open_err)?;
                        return Ok(Box::new(stream));
                    }
                    Err(e) => last = e,
                }
            }
            Err(open_err(last))
        }
        TransportSpec::Serial { path, baud } => {
            if !std::path::Path::new(path).exists() {
                return Err(open_err(io::Error::new(
                    io::ErrorKind::NotFound,
                    "no such device",
                )));
            }
            let port = serialport::new(path, *baud)
                .data_bits(serialport::DataBits::Eight)
                .parity(serialport::Parity::None)
                .stop_bits(serialport::StopBits::One)
                .flow_control(serialport::FlowControl::None)
                .timeout(READ_TIMEOUT)
                .open()
                .map_err(|e| match e.kind() {
                    serialport::ErrorKind::InvalidInput => AcquisitionError::Config(format!(
                        "{endpoint}: serial parameters rejected: {e}"
                    )),
                    _ => open_err(io::Error::other(e.to_string())),
                })?;
            Ok(Box::new(port))
        }
    }
}
