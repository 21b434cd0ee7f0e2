//! CSV session log.
//!
//! ```text
//! timestamp,ch0_raw,ch1_raw,ch2_raw,ch3_raw,temp_c,rh_pct,flags
//! 2024-01-01T00:00:00.000Z,512,617,0,0,25.0244,50.0455,
//! ```
//!
//! Raw codes are always written so a log can be recalibrated later. `temp_c`
//! and `rh_pct` come from the first enabled channel reporting in °C and %RH
//! respectively and are empty when there is none. `flags` lists flagged
//! enabled channels as `chN:tag` joined with `;`.

use std::fs::{File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::acquisition::{format_timestamp, ChannelSet};
use crate::calibration::{calibrate_frame, Flags, ProfileSet, Sample, Unit};
use crate::protocol::{AdcCode, Frame, CHANNELS};

pub const CSV_HEADER: [&str; 8] = [
    "timestamp",
    "ch0_raw",
    "ch1_raw",
    "ch2_raw",
    "ch3_raw",
    "temp_c",
    "rh_pct",
    "flags",
];

/// Buffered rows are flushed at least this often.
pub const FLUSH_INTERVAL: Duration = Duration::from_secs(1);

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: I/O error after {rows} data rows: {source}")]
    Io {
        path: PathBuf,
        rows: u64,
        source: std::io::Error,
    },
    #[error("{path}: header column {column} is {found:?}, expected {expected:?}")]
    Schema {
        path: PathBuf,
        column: usize,
        expected: String,
        found: String,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: csv::Error },
}

/// Formats a real with six significant digits, without trailing zeros.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if !(-5..=5).contains(&exp) {
        return sci;
    }
    let decimals = (5 - exp).max(0) as usize;
    let fixed = format!("{x:.decimals$}");
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

fn flags_field(sample: &Sample, channels: ChannelSet) -> String {
    channels
        .iter()
        .filter(|&ch| !sample.flags[ch].is_empty())
        .map(|ch| format!("ch{ch}:{}", sample.flags[ch].to_tag()))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_flags(field: &str) -> Option<[Flags; CHANNELS]> {
    let mut flags = [Flags::empty(); CHANNELS];
    for part in field.split(';').filter(|p| !p.is_empty()) {
        let (ch, tag) = part.split_once(':')?;
        let ch: usize = ch.strip_prefix("ch")?.parse().ok()?;
        if ch >= CHANNELS {
            return None;
        }
        flags[ch] = Flags::from_tag(tag)?;
    }
    Some(flags)
}

fn unit_value(sample: &Sample, channels: ChannelSet, unit: Unit) -> Option<f64> {
    channels
        .iter()
        .find(|&ch| sample.values[ch].unit == unit)
        .map(|ch| sample.values[ch].value)
}

/// Data row fields for one sample.
pub fn sample_row(sample: &Sample, channels: ChannelSet) -> [String; 8] {
    let raw = sample.raw.raw();
    let opt = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
    [
        format_timestamp(&sample.timestamp),
        raw[0].to_string(),
        raw[1].to_string(),
        raw[2].to_string(),
        raw[3].to_string(),
        opt(unit_value(sample, channels, Unit::Celsius)),
        opt(unit_value(sample, channels, Unit::PercentRh)),
        flags_field(sample, channels),
    ]
}

/// Buffered, single-owner CSV writer.
pub struct CsvWriter {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    channels: ChannelSet,
    rows: u64,
    last_flush: Instant,
}

impl CsvWriter {
    /// Creates or truncates `path`, or appends to it when `append` is set.
    /// The header is written only when the file starts out empty.
    pub fn open(path: &Path, channels: ChannelSet, append: bool) -> Result<Self, CsvError> {
        let io_err = |source| CsvError::Io {
            path: path.to_path_buf(),
            rows: 0,
            source,
        };
        let file = if append {
            OpenOptions::new().create(true).append(true).open(path)
        } else {
            File::create(path)
        }
        .map_err(io_err)?;
        let is_new = file.metadata().map_err(io_err)?.len() == 0;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(file));
        if is_new {
            writer
                .write_record(CSV_HEADER)
                .map_err(|e| io_err(e.into()))?;
        }
        Ok(CsvWriter {
            path: path.to_path_buf(),
            writer,
            channels,
            rows: 0,
            last_flush: Instant::now(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    fn io_err(&self, source: std::io::Error) -> CsvError {
        CsvError::Io {
            path: self.path.clone(),
            rows: self.rows,
            source,
        }
    }

    pub fn write_sample(&mut self, sample: &Sample) -> Result<(), CsvError> {
        let row = sample_row(sample, self.channels);
        self.write_row(&row)
    }

    /// Writes an arbitrary row in the log schema.
    pub fn write_row(&mut self, row: &[String; 8]) -> Result<(), CsvError> {
        if let Err(e) = self.writer.write_record(row) {
            return Err(self.io_err(e.into()));
        }
        self.rows += 1;
        if self.last_flush.elapsed() >= FLUSH_INTERVAL {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), CsvError> {
        self.last_flush = Instant::now();
        self.writer.flush().map_err(|e| self.io_err(e))
    }
}

impl Drop for CsvWriter {
    fn drop(&mut self) {
        let _ = self.writer.flush();
    }
}

/// Writes `samples` to `path` and returns the number of data rows.
pub fn write_csv<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    path: &Path,
    channels: ChannelSet,
    append: bool,
) -> Result<u64, CsvError> {
    let mut w = CsvWriter::open(path, channels, append)?;
    for s in samples {
        w.write_sample(s)?;
    }
    w.flush()?;
    Ok(w.rows())
}

/// One parsed data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub timestamp: DateTime<Utc>,
    pub raw: Frame,
    pub temp_c: Option<f64>,
    pub rh_pct: Option<f64>,
    pub flags: [Flags; CHANNELS],
}

impl CsvRecord {
    /// Recomputes engineering values from the raw codes.
    pub fn to_sample(&self, profiles: &ProfileSet) -> Sample {
        calibrate_frame(&self.raw, profiles, self.timestamp)
    }

    /// Largest absolute difference between the stored engineering columns
    /// and a fresh calibration of the raw codes.
    pub fn calibration_mismatch(&self, profiles: &ProfileSet) -> f64 {
        let s = self.to_sample(profiles);
        let mut worst: f64 = 0.0;
        for (stored, unit) in [(self.temp_c, Unit::Celsius), (self.rh_pct, Unit::PercentRh)] {
            if let (Some(v), Some(ch)) = (stored, profiles.channel_with_unit(unit)) {
                worst = worst.max((v - s.values[ch].value).abs());
            }
        }
        worst
    }

    pub fn column(&self, column: Column) -> Option<f64> {
        match column {
            Column::TempC => self.temp_c,
            Column::RhPct => self.rh_pct,
            Column::Raw(ch) => Some(f64::from(self.raw.code(ch).value())),
        }
    }
}

/// Numeric columns of the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    TempC,
    RhPct,
    Raw(usize),
}

impl Column {
    pub fn name(self) -> String {
        match self {
            Column::TempC => "temp_c".into(),
            Column::RhPct => "rh_pct".into(),
            Column::Raw(ch) => format!("ch{ch}_raw"),
        }
    }

    pub fn unit_label(self) -> &'static str {
        match self {
            Column::TempC => Unit::Celsius.symbol(),
            Column::RhPct => Unit::PercentRh.symbol(),
            Column::Raw(_) => "code",
        }
    }
}

impl std::str::FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temp_c" => Ok(Column::TempC),
            "rh_pct" => Ok(Column::RhPct),
            _ => s
                .strip_prefix("ch")
                .and_then(|r| r.strip_suffix("_raw"))
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n < CHANNELS)
                .map(Column::Raw)
                .ok_or_else(|| format!("unknown column {s:?} (temp_c, rh_pct, ch0_raw..ch3_raw)")),
        }
    }
}

/// A row that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    /// 1-based line number in the file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct CsvLog {
    pub records: Vec<CsvRecord>,
    pub skipped: Vec<SkippedRow>,
}

fn parse_row(rec: &csv::StringRecord) -> Result<CsvRecord, String> {
    if rec.len() != CSV_HEADER.len() {
        return Err(format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()));
    }
    let timestamp = DateTime::parse_from_rfc3339(&rec[0])
        .map_err(|e| format!("timestamp {:?}: {e}", &rec[0]))?
        .to_utc();
    let mut codes = [AdcCode::ZERO; CHANNELS];
    for (ch, code) in codes.iter_mut().enumerate() {
        let field = &rec[1 + ch];
        let v: u16 = field
            .parse()
            .map_err(|_| format!("ch{ch}_raw {field:?} is not an integer"))?;
        *code = AdcCode::new(v).map_err(|e| format!("ch{ch}_raw: {e}"))?;
    }
    let real = |idx: usize| -> Result<Option<f64>, String> {
        let f = &rec[idx];
        if f.is_empty() {
            return Ok(None);
        }
        f.parse::<f64>()
            .map(Some)
            .map_err(|_| format!("{} {f:?} is not a number", CSV_HEADER[idx]))
    };
    let flags = parse_flags(&rec[7]).ok_or_else(|| format!("bad flags {:?}", &rec[7]))?;
    Ok(CsvRecord {
        timestamp,
        raw: Frame::new(codes),
        temp_c: real(5)?,
        rh_pct: real(6)?,
        flags,
    })
}

/// Reads a log. Malformed data rows are skipped and reported.
pub fn read_csv(path: &Path) -> Result<CsvLog, CsvError> {
    let parse_err = |source| CsvError::Parse {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(parse_err)?;
    let headers = rdr.headers().map_err(parse_err)?.clone();
    for (i, expected) in CSV_HEADER.iter().enumerate() {
        let found = headers.get(i).unwrap_or("");
        if found != *expected {
            return Err(CsvError::Schema {
                path: path.to_path_buf(),
                column: i,
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
    }
    if headers.len() > CSV_HEADER.len() {
        return Err(CsvError::Schema {
            path: path.to_path_buf(),
            column: CSV_HEADER.len(),
            expected: String::new(),
            found: headers[CSV_HEADER.len()].to_string(),
        });
    }

    let mut log = CsvLog::default();
    let mut rec = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => match parse_row(&rec) {
                Ok(r) => log.records.push(r),
                Err(reason) => log.skipped.push(SkippedRow {
                    line: rec.position().map_or(line, |p| p.line()),
                    reason,
                }),
            },
            Err(e) => {
                if let csv::ErrorKind::Io(_) = e.kind() {
                    return Err(parse_err(e));
                }
                log.skipped.push(SkippedRow {
                    line: e.position().map_or(line, |p| p.line()),
                    reason: e.to_string(),
                });
            }
        }
    }
    for s in &log.skipped {
        log::warn!("{}: skipped line {}: {}", path.display(), s.line, s.reason);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeDelta;

    fn ts(i: i64) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z")
            .unwrap()
            .to_utc()
            + TimeDelta::seconds(i)
    }

    fn sample(i: i64, raw: [u16; 4]) -> Sample {
        calibrate_frame(&Frame::from_raw(raw).unwrap(), &ProfileSet::default(), ts(i))
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(25.024437927663), "25.0244");
        assert_eq!(format_sig6(50.0), "50");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(-1.5), "-1.5");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
        assert_eq!(format_sig6(999999.7), "1.00000e6");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1.0e-9), "1.00000e-9");
        for x in [1.23456789, -271.828182, 0.0123456789, 108.194] {
            let back: f64 = format_sig6(x).parse().unwrap();
            assert!(((back - x) / x).abs() <= 5e-6, "{x}");
        }
    }

    #[test]
    fn row_for_nominal_sample() {
        let row = sample(0, [512, 617, 0, 0]);
        let fields = sample_row(&row, "0,1".parse().unwrap());
        assert_eq!(fields[0], "2024-01-01T00:00:00.000Z");
        assert_eq!(&fields[1..5], &["512", "617", "0", "0"]);
        assert_eq!(fields[5], "25.0244");
        assert!(fields[6].starts_with("50.0"), "{}", fields[6]);
        assert_eq!(fields[7], "");
    }

    #[test]
    fn disabled_channels_leave_fields_empty() {
        let s = sample(0, [0, 0, 0, 0]);
        let fields = sample_row(&s, "2".parse().unwrap());
        assert_eq!(fields[5], "");
        assert_eq!(fields[6], "");
        let all = sample_row(&s, ChannelSet::ALL);
        assert_eq!(all[7], "ch1:oor+unphys");
    }

    #[test]
    fn write_read_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let samples: Vec<Sample> = (0..3).map(|i| sample(i, [512, 617, 1, 1023])).collect();
        assert_eq!(write_csv(&samples, &path, ChannelSet::ALL, false).unwrap(), 3);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));

        write_csv(&samples, &path, ChannelSet::ALL, true).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert_eq!(text.matches("timestamp").count(), 1);

        let log = read_csv(&path).unwrap();
        assert_eq!(log.records.len(), 6);
        assert!(log.skipped.is_empty());
        assert_eq!(log.records[0].raw.raw(), [512, 617, 1, 1023]);
        assert_eq!(log.records[0].flags[3], Flags::SATURATED);
        assert!(log.records[0].calibration_mismatch(&ProfileSet::default()) < 1e-3);
    }

    #[test]
    fn malformed_rows_are_skipped_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let samples: Vec<Sample> = (0..100).map(|i| sample(i, [100, 600, 0, 0])).collect();
        write_csv(&samples, &path, ChannelSet::ALL, false).unwrap();
        let mut lines: Vec<String> = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        lines[41] = lines[41].replace(",100,", ",1x0,");
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let log = read_csv(&path).unwrap();
        assert_eq!(log.records.len(), 99);
        assert_eq!(log.skipped.len(), 1);
        assert_eq!(log.skipped[0].line, 42);
    }

    #[test]
    fn short_rows_and_bad_codes_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let text = format!(
            "{}\n2024-01-01T00:00:00.000Z,1,2,3,4,,,\n2024-01-01T00:00:01.000Z,1,2\n2024-01-01T00:00:02.000Z,1,2,3,2000,,,\nnot-a-time,1,2,3,4,,,\n",
            CSV_HEADER.join(",")
        );
        std::fs::write(&path, text).unwrap();
        let log = read_csv(&path).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(
            log.skipped.iter().map(|s| s.line).collect::<Vec<_>>(),
            vec![3, 4, 5]
        );
    }

    #[test]
    fn wrong_header_names_first_bad_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        std::fs::write(&path, "timestamp,ch0_raw,ch1,ch2_raw,ch3_raw,temp_c,rh_pct,flags\n").unwrap();
        match read_csv(&path) {
            Err(CsvError::Schema { column, found, .. }) => {
                assert_eq!(column, 2);
                assert_eq!(found, "ch1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn column_names_parse() {
        assert_eq!("rh_pct".parse::<Column>(), Ok(Column::RhPct));
        assert_eq!("ch3_raw".parse::<Column>(), Ok(Column::Raw(3)));
        assert!("ch4_raw".parse::<Column>().is_err());
        assert!("volts".parse::<Column>().is_err());
    }

    #[test]
    fn write_error_names_path() {
        let err = CsvWriter::open(Path::new("/nonexistent-dir/x.csv"), ChannelSet::ALL, false)
            .err()
            .unwrap();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
