use chrono::{DateTime, Utc};
use thiserror::Error;

use super::csv_log::{Column, CsvRecord};
use crate::calibration::Sample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series {label:?}: timestamps must strictly increase (point {index})")]
    NotIncreasing { label: String, index: usize },
    #[error("series {label:?}: value at point {index} is not finite")]
    NonFinite { label: String, index: usize },
}

/// Labelled time series in a single unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    label: String,
    unit: String,
    points: Vec<(DateTime<Utc>, f64)>,
}

impl Series {
    pub fn new(
        label: impl Into<String>,
        unit: impl Into<String>,
        points: Vec<(DateTime<Utc>, f64)>,
    ) -> Result<Self, SeriesError> {
        let label = label.into();
        for (index, w) in points.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(SeriesError::NotIncreasing {
                    label,
                    index: index + 1,
                });
            }
        }
        if let Some(index) = points.iter().position(|(_, v)| !v.is_finite()) {
            return Err(SeriesError::NonFinite { label, index });
        }
        Ok(Series {
            label,
            unit: unit.into(),
            points,
        })
    }

    /// Builds a series from one log column, skipping rows where it is empty.
    pub fn from_records(
        label: impl Into<String>,
        records: &[CsvRecord],
        column: Column,
    ) -> Result<Self, SeriesError> {
        let points = records
            .iter()
            .filter_map(|r| r.column(column).map(|v| (r.timestamp, v)))
            .collect();
        Series::new(label, column.unit_label(), points)
    }

    /// Builds a series from one channel of calibrated samples.
    pub fn from_samples(
        label: impl Into<String>,
        samples: &[Sample],
        channel: usize,
    ) -> Result<Self, SeriesError> {
        let unit = samples
            .first()
            .map(|s| s.values[channel].unit.symbol())
            .unwrap_or("");
        let points = samples
            .iter()
            .map(|s| (s.timestamp, s.values[channel].value))
            .collect();
        Series::new(label, unit, points)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn points(&self) -> &[(DateTime<Utc>, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Median spacing between consecutive points, in milliseconds.
    pub fn median_interval_ms(&self) -> Option<i64> {
        let mut gaps: Vec<i64> = self
            .points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).num_milliseconds())
            .collect();
        if gaps.is_empty() {
            return None;
        }
        gaps.sort_unstable();
        let mid = gaps.len() / 2;
        Some(if gaps.len() % 2 == 1 {
            gaps[mid]
        } else {
            (gaps[mid - 1] + gaps[mid]) / 2
        })
    }

    /// Index of the point nearest to `t`.
    pub fn nearest(&self, t: DateTime<Utc>) -> Option<usize> {
        if self.points.is_empty() {
            return None;
        }
        let i = self.points.partition_point(|(pt, _)| *pt < t);
        let candidates = [i.checked_sub(1), (i < self.points.len()).then_some(i)];
        candidates
            .into_iter()
            .flatten()
            .min_by_key(|&j| (self.points[j].0 - t).num_milliseconds().abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeDelta;

    fn t(ms: i64) -> DateTime<Utc> {
        DateTime::UNIX_EPOCH + TimeDelta::milliseconds(ms)
    }

    #[test]
    fn rejects_unordered_points() {
        assert!(Series::new("a", "V", vec![(t(0), 1.0), (t(0), 2.0)]).is_err());
        assert!(Series::new("a", "V", vec![(t(1), 1.0), (t(0), 2.0)]).is_err());
        assert!(Series::new("a", "V", vec![(t(0), f64::NAN)]).is_err());
    }

    #[test]
    fn median_and_nearest() {
        let s = Series::new(
            "a",
            "V",
            vec![(t(0), 0.0), (t(1000), 1.0), (t(2000), 2.0), (t(5000), 3.0)],
        )
        .unwrap();
        assert_eq!(s.median_interval_ms(), Some(1000));
        assert_eq!(s.nearest(t(1400)), Some(1));
        assert_eq!(s.nearest(t(1600)), Some(2));
        assert_eq!(s.nearest(t(-100)), Some(0));
        assert_eq!(s.nearest(t(99_999)), Some(3));
    }
}
