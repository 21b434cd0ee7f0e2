//! Real polynomials: evaluation, least-squares fitting, monotone inversion.

use std::fmt;

use thiserror::Error;

/// Coefficients stored in ascending degree: `c[0] + c[1]·x + … + c[n]·xⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolynomialError {
    #[error("a polynomial needs at least one coefficient")]
    Empty,
    #[error("coefficient {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
}

impl Polynomial {
    pub fn new(ascending: Vec<f64>) -> Result<Self, PolynomialError> {
        if ascending.is_empty() {
            return Err(PolynomialError::Empty);
        }
        if let Some((index, &value)) = ascending.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(PolynomialError::NonFinite { index, value });
        }
        Ok(Polynomial {
            coefficients: ascending,
        })
    }

    /// Builds from coefficients written highest degree first, the way
    /// calibration curves are usually printed.
    pub fn from_descending(descending: &[f64]) -> Result<Self, PolynomialError> {
        Self::new(descending.iter().rev().copied().collect())
    }

    pub fn constant(c: f64) -> Self {
        Polynomial {
            coefficients: vec![c],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn descending(&self) -> Vec<f64> {
        self.coefficients.iter().rev().copied().collect()
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc.mul_add(x, c))
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coefficients.len() == 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial {
            coefficients: self
                .coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coefficients.iter().enumerate().rev() {
            if c == 0.0 && self.coefficients.len() > 1 {
                continue;
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}x", c.abs())?,
                _ => write!(f, "{}x^{k}", c.abs())?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Horner evaluation of `p` at `x`.
pub fn eval_polynomial(p: &Polynomial, x: f64) -> f64 {
    p.eval(x)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("{points} points cannot determine a degree-{degree} polynomial (need at least {})", degree + 1)]
    Underdetermined { points: usize, degree: usize },
    #[error("point {index} is not finite")]
    NonFinite { index: usize },
    #[error("design matrix is rank deficient: fewer than {needed} distinct x values")]
    RankDeficient { needed: usize },
}

/// Condition estimates above this trigger a warning on the fit result.
pub const CONDITION_WARN: f64 = 1e10;

/// Result of a least-squares fit.
#[derive(Debug, Clone)]
pub struct PolyFit {
    pub polynomial: Polynomial,
    /// Σ (y − p(x))² over the input points.
    pub residual_sum_squares: f64,
    /// Ratio of the largest to smallest diagonal entry of R after column
    /// equilibration; a cheap lower bound on the condition number.
    pub condition_estimate: f64,
}

impl PolyFit {
    pub fn ill_conditioned(&self) -> bool {
        self.condition_estimate > CONDITION_WARN
    }
}

/// Least-squares polynomial fit of the given degree.
///
/// Solves the Vandermonde system with Householder QR after scaling each
/// column to unit norm. Normal equations square the condition number, which
/// for a degree-5 fit on a narrow interval such as [1, 3] costs most of the
/// available precision.
pub fn fit_polynomial(points: &[(f64, f64)], degree: usize) -> Result<PolyFit, FitError> {
    let m = points.len();
    let n = degree + 1;
    if m < n {
        return Err(FitError::Underdetermined {
            points: m,
            degree,
        });
    }
    if let Some(index) = points
        .iter()
        .position(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(FitError::NonFinite { index });
    }

    // column-major design matrix
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|k| points.iter().map(|&(x, _)| x.powi(k as i32)).collect())
        .collect();
    let mut b: Vec<f64> = points.iter().map(|&(_, y)| y).collect();

    let mut scale = vec![1.0; n];
    for (col, s) in a.iter_mut().zip(scale.iter_mut()) {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            *s = norm;
            col.iter_mut().for_each(|v| *v /= norm);
        }
    }

    let mut diag = vec![0.0; n];
    for k in 0..n {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(FitError::RankDeficient { needed: n });
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k + 1) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(p, q)| p * q).sum();
                let f = 2.0 * dot / vnorm2;
                col[k..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= f * vi);
            }
            let dot: f64 = v.iter().zip(&b[k..]).map(|(p, q)| p * q).sum();
            let f = 2.0 * dot / vnorm2;
            b[k..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= f * vi);
        }
        a[k][k] = alpha;
    }

    let dmax = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let dmin = diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    if dmin <= dmax * f64::EPSILON * m as f64 {
        return Err(FitError::RankDeficient { needed: n });
    }
    let condition_estimate = dmax / dmin;

    // back substitution on R (upper triangle stored column-major in `a`)
    let mut coef = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[j][i] * coef[j];
        }
        coef[i] = s / a[i][i];
    }
    coef.iter_mut().zip(&scale).for_each(|(c, s)| *c /= s);

    let polynomial = Polynomial {
        coefficients: coef,
    };
    let residual_sum_squares = points
        .iter()
        .map(|&(x, y)| (y - polynomial.eval(x)).powi(2))
        .sum();
    if condition_estimate > CONDITION_WARN {
        log::warn!(
            "degree-{degree} fit is ill-conditioned (estimate {condition_estimate:.3e}); coefficients may be inaccurate"
        );
    }
    Ok(PolyFit {
        polynomial,
        residual_sum_squares,
        condition_estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InversionError {
    #[error("interval [{lo}, {hi}] is empty or not finite")]
    BadInterval { lo: f64, hi: f64 },
    #[error("polynomial is not strictly monotone on [{lo}, {hi}] (derivative changes sign near x = {at})")]
    NotMonotone { lo: f64, hi: f64, at: f64 },
    #[error("target {y} lies outside the image [{min}, {max}]")]
    OutOfRange { y: f64, min: f64, max: f64 },
}

/// Width below which bisection stops, in units of x.
pub const INVERSION_TOLERANCE: f64 = 1e-9;

/// Derivative sign samples used for the monotonicity check.
const MONOTONE_SAMPLES: usize = 1000;

/// A polynomial restricted to an interval on which it was verified strictly
/// monotone. Construction does the check once; [`MonotoneInverse::invert`] is
/// then plain bisection.
#[derive(Debug, Clone)]
pub struct MonotoneInverse {
    poly: Polynomial,
    lo: f64,
    hi: f64,
    y_lo: f64,
    y_hi: f64,
    increasing: bool,
}

impl MonotoneInverse {
    pub fn new(poly: Polynomial, lo: f64, hi: f64) -> Result<Self, InversionError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(InversionError::BadInterval { lo, hi });
        }
        let d = poly.derivative();
        let step = (hi - lo) / (MONOTONE_SAMPLES - 1) as f64;
        let sign_at = |i: usize| d.eval(lo + step * i as f64);
        let increasing = sign_at(0) > 0.0;
        for i in 0..MONOTONE_SAMPLES {
            let s = sign_at(i);
            if s == 0.0 || (s > 0.0) != increasing {
                return Err(InversionError::NotMonotone {
                    lo,
                    hi,
                    at: lo + step * i as f64,
                });
            }
        }
        let (y_lo, y_hi) = (poly.eval(lo), poly.eval(hi));
        Ok(MonotoneInverse {
            poly,
            lo,
            hi,
            y_lo,
            y_hi,
            increasing,
        })
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    /// Image of the interval, low end first.
    pub fn image(&self) -> (f64, f64) {
        if self.increasing {
            (self.y_lo, self.y_hi)
        } else {
            (self.y_hi, self.y_lo)
        }
    }

    /// Finds x in the interval with p(x) = y.
    pub fn invert(&self, y: f64) -> Result<f64, InversionError> {
        let (min, max) = self.image();
        // targets that equal an endpoint value up to rounding are accepted
        let slack = 1e-12 * min.abs().max(max.abs()).max(1.0);
        if !(y >= min - slack && y <= max + slack) {
            return Err(InversionError::OutOfRange { y, min, max });
        }
        let (mut a, mut b) = (self.lo, self.hi);
        let sign = if self.increasing { 1.0 } else { -1.0 };
        while b - a > INVERSION_TOLERANCE {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sign * (self.poly.eval(mid) - y) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// One-shot inversion of a polynomial that is strictly monotone on
/// `[lo, hi]`.
pub fn invert_monotone(p: &Polynomial, y: f64, lo: f64, hi: f64) -> Result<f64, InversionError> {
    MonotoneInverse::new(p.clone(), lo, hi)?.invert(y)
}
