//! Least-squares fits on logarithmic and semi-logarithmic axes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest relative deviation `|fit/y - 1|` over the samples.
    pub residual: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn check(xs: &[f64], ys: &[f64], min_rows: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::argument("x and y columns differ in length"));
    }
    if xs.len() < min_rows {
        return Err(Error::argument(format!("need at least {min_rows} rows, got {}", xs.len())));
    }
    Ok(())
}

/// Fits `y = e^{intercept} x^{slope}` by least squares on `(ln x, ln y)`.
pub fn power_law(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    check(xs, ys, 2)?;
    if let Some((x, y)) = xs.iter().zip(ys).find(|(x, y)| !(**x > 0.0 && **y > 0.0)) {
        return Err(Error::argument(format!("log-log fit needs positive entries, got ({x}, {y})")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept) = least_squares(&lx, &ly);
    let residual = lx
        .iter()
        .zip(ys)
        .map(|(x, y)| ((intercept + slope * x).exp() / y - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(LineFit {
        slope,
        intercept,
        residual,
    })
}

/// Fits `y = e^{intercept + slope·x}` by least squares on `(x, ln y)`.
pub fn exponential(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    check(xs, ys, 2)?;
    if ys.iter().any(|y| !(*y > 0.0)) {
        return Err(Error::argument("exponential fit needs positive values"));
    }
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept) = least_squares(xs, &ly);
    let residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| ((intercept + slope * x).exp() / y - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(LineFit {
        slope,
        intercept,
        residual,
    })
}
