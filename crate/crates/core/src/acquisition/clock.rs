use chrono::{DateTime, DurationRound, TimeDelta, Utc};

/// Where sample timestamps come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    /// Host receive time.
    System,
    /// `base + n / rate` for the n-th frame of the session. Makes sessions
    /// reproducible and lines decoded frames up with simulated time.
    Synthetic { base: DateTime<Utc>, rate_hz: f64 },
}

/// Hands out millisecond timestamps that never go backwards.
#[derive(Debug)]
pub struct Timestamper {
    clock: Clock,
    issued: u64,
    last: Option<DateTime<Utc>>,
}

impl Timestamper {
    pub fn new(clock: Clock) -> Self {
        Timestamper {
            clock,
            issued: 0,
            last: None,
        }
    }

    pub fn stamp(&mut self) -> DateTime<Utc> {
        let raw = match self.clock {
            Clock::System => Utc::now(),
            Clock::Synthetic { base, rate_hz } => {
                let ms = (self.issued as f64 * 1000.0 / rate_hz).round() as i64;
                base + TimeDelta::milliseconds(ms)
            }
        };
        let ts = raw
            .duration_trunc(TimeDelta::milliseconds(1))
            .unwrap_or(raw);
        let ts = match self.last {
            Some(prev) if prev > ts => prev,
            _ => ts,
        };
        self.issued += 1;
        self.last = Some(ts);
        ts
    }
}
