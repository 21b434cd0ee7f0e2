use std::fmt;

use thiserror::Error;

use super::series::Series;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("cannot compare {a:?} in {unit_a} with {b:?} in {unit_b}")]
    UnitMismatch {
        a: String,
        unit_a: String,
        b: String,
        unit_b: String,
    },
    #[error("no points of {b:?} fall within {window_ms} ms of any point of {a:?}")]
    NoOverlap { a: String, b: String, window_ms: i64 },
    #[error("tolerance must be a non-negative number, got {0}")]
    Tolerance(f64),
}

/// Deviation statistics between two aligned series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesComparison {
    pub max_abs_dev: f64,
    pub mean_abs_dev: f64,
    /// Mean of `b − a`.
    pub mean_dev: f64,
    pub n_compared: usize,
    pub tolerance: f64,
    pub within_tolerance: bool,
    /// Pairing window used, in milliseconds.
    pub window_ms: i64,
}

impl fmt::Display for SeriesComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_compared       {}", self.n_compared)?;
        writeln!(f, "max_abs_dev      {:.6}", self.max_abs_dev)?;
        writeln!(f, "mean_abs_dev     {:.6}", self.mean_abs_dev)?;
        writeln!(f, "mean_dev         {:+.6}", self.mean_dev)?;
        writeln!(f, "tolerance        {}", self.tolerance)?;
        write!(f, "within_tolerance {}", self.within_tolerance)
    }
}

/// Pairs each point of `a` with the nearest point of `b` no more than half
/// of `a`'s median sampling interval away, then summarizes `|b − a|`.
///
/// A single-point `a` has no interval and only pairs exact timestamp matches.
pub fn compare_series(a: &Series, b: &Series, tolerance: f64) -> Result<SeriesComparison, CompareError> {
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(CompareError::Tolerance(tolerance));
    }
    if a.unit() != b.unit() {
        return Err(CompareError::UnitMismatch {
            a: a.label().into(),
            unit_a: a.unit().into(),
            b: b.label().into(),
            unit_b: b.unit().into(),
        });
    }
    let window_ms = a.median_interval_ms().unwrap_or(0) / 2;

    let mut n = 0usize;
    let mut max_abs: f64 = 0.0;
    let mut sum_abs = 0.0;
    let mut sum = 0.0;
    for &(t, va) in a.points() {
        let Some(j) = b.nearest(t) else { break };
        let (tb, vb) = b.points()[j];
        if (tb - t).num_milliseconds().abs() > window_ms {
            continue;
        }
        let d = vb - va;
        n += 1;
        max_abs = max_abs.max(d.abs());
        sum_abs += d.abs();
        sum += d;
    }
    if n == 0 {
        return Err(CompareError::NoOverlap {
            a: a.label().into(),
            b: b.label().into(),
            window_ms,
        });
    }
    Ok(SeriesComparison {
        max_abs_dev: max_abs,
        mean_abs_dev: sum_abs / n as f64,
        mean_dev: sum / n as f64,
        n_compared: n,
        tolerance,
        within_tolerance: max_abs <= tolerance,
        window_ms,
    })
}
