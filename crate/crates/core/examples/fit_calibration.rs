//! Recover the humidity curve from sampled calibration points by least squares.

use thdaq::calibration::{fit_polynomial, rh_curve};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let curve = rh_curve();
    let points: Vec<(f64, f64)> = (0..=20)
        .map(|i| {
            let x = 1.0 + i as f64 * 0.1;
            (x, curve.eval(x))
        })
        .collect();
    let fit = fit_polynomial(&points, 5)?;
    println!("reference: {curve}");
    println!("fitted:    {}", fit.polynomial);
    println!("rss {:.3e}, condition {:.3e}", fit.residual_sum_squares, fit.condition_estimate);
    for (a, b) in curve.descending().iter().zip(fit.polynomial.descending()) {
        println!("{a:>12.6} {b:>12.6}  rel err {:.2e}", ((a - b) / a).abs());
    }
    Ok(())
}
