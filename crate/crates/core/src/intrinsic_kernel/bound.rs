use rayon::prelude::*;

use super::KernelSlice;
use crate::error::{Error, Result};
use crate::fit;

/// Fitted decay constants. Power-law fits fill `alpha` and `c`; envelope
/// fits of `C t^{-1/2}[e^{-Dz²/t} + e^{-E|z|}]` also fill `d` and `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub alpha: f64,
    pub c: f64,
    pub d: Option<f64>,
    pub e: Option<f64>,
    /// Power law: max relative deviation. Envelope: mean relative slack `1 - ratio/C`.
    pub residual: f64,
    pub t_window: (f64, f64),
    /// Envelope fits only: share of samples within 5 % of equality.
    pub active_fraction: Option<f64>,
    pub sample_count: usize,
}

/// `(D, E)` grid scanned by [`fit_gaussian_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundScan {
    pub d_values: Vec<f64>,
    pub e_values: Vec<f64>,
}

impl BoundScan {
    pub fn log_grid(min: f64, max: f64, count: usize) -> Self {
        let values: Vec<f64> = (0..count)
            .map(|j| {
                let s = if count > 1 { j as f64 / (count - 1) as f64 } else { 0.0 };
                (min.ln() + s * (max.ln() - min.ln())).exp()
            })
            .collect();
        Self {
            d_values: values.clone(),
            e_values: values,
        }
    }
}

impl Default for BoundScan {
    fn default() -> Self {
        Self::log_grid(0.05, 5.0, 13)
    }
}

/// Entries below this fraction of the largest `|∂ₓL|` are at the kernel's
/// rounding level and are not tested against the envelope.
const NOISE_FLOOR: f64 = 1e-12;

struct Sample {
    t: f64,
    z: f64,
    scaled: f64,
}

fn collect(slices: &[KernelSlice]) -> Vec<Sample> {
    let peak = slices
        .iter()
        .flat_map(|s| s.dldx().iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = Vec::new();
    for s in slices {
        let t = s.t();
        for (i, &x) in s.x_samples().iter().enumerate() {
            for (j, &y) in s.y_samples().iter().enumerate() {
                let v = s.dldx()[(i, j)].abs();
                if v <= NOISE_FLOOR * peak {
                    continue;
                }
                out.push(Sample {
                    t,
                    z: x - y,
                    scaled: v * t.sqrt(),
                });
            }
        }
    }
    out
}

fn ratio(s: &Sample, d: f64, e: f64) -> f64 {
    s.scaled / ((-d * s.z * s.z / s.t).exp() + (-e * s.z.abs()).exp())
}

/// Smallest `C` with `|∂ₓL_t| ≤ C t^{-1/2}[e^{-Dz²/t} + e^{-E|z|}]` on every sample.
pub fn gaussian_envelope_constant(slices: &[KernelSlice], d: f64, e: f64) -> f64 {
    collect(slices).iter().map(|s| ratio(s, d, e)).fold(0.0, f64::max)
}

/// Envelope fit over `scan`: the `(D, E)` pair needing the smallest `C`.
pub fn fit_gaussian_bound(slices: &[KernelSlice], scan: &BoundScan) -> Result<DecayFit> {
    if slices.len() < 3 {
        return Err(Error::argument(format!("need at least 3 times, got {}", slices.len())));
    }
    if let Some(s) = slices.iter().find(|s| s.x_samples().len() * s.y_samples().len() < 100) {
        return Err(Error::argument(format!("slice at t = {} has fewer than 100 (x, y) pairs", s.t())));
    }
    let samples = collect(slices);
    let pairs: Vec<(f64, f64)> = scan
        .d_values
        .iter()
        .flat_map(|&d| scan.e_values.iter().map(move |&e| (d, e)))
        .filter(|&(d, e)| d > 0.01 && e > 0.01)
        .collect();
    let constants: Vec<f64> = pairs
        .par_iter()
        .map(|&(d, e)| samples.iter().map(|s| ratio(s, d, e)).fold(0.0, f64::max))
        .collect();
    let best = constants
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::PropertyViolation("no finite envelope constant for D, E > 0.01".into()))?;
    let (d, e) = pairs[best];
    let c = constants[best];
    let ratios: Vec<f64> = samples.iter().map(|s| ratio(s, d, e) / c).collect();
    let active = ratios.iter().filter(|&&r| r >= 0.95).count();
    let slack = ratios.iter().map(|r| 1.0 - r).sum::<f64>() / ratios.len().max(1) as f64;
    let (t_lo, t_hi) = t_window(slices.iter().map(|s| s.t()));
    Ok(DecayFit {
        alpha: 0.5,
        c,
        d: Some(d),
        e: Some(e),
        residual: slack,
        t_window: (t_lo, t_hi),
        active_fraction: Some(active as f64 / ratios.len().max(1) as f64),
        sample_count: samples.len(),
    })
}

fn t_window(ts: impl Iterator<Item = f64>) -> (f64, f64) {
    ts.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)))
}

/// Power-law fit `value ≈ C t^{-α}` of a diagnostic sequence (at least 4 times).
pub fn decay_fit(ts: &[f64], values: &[f64]) -> Result<DecayFit> {
    if ts.len() < 4 {
        return Err(Error::argument(format!("decay fits need at least 4 times, got {}", ts.len())));
    }
    let line = fit::power_law(ts, values)?;
    Ok(DecayFit {
        alpha: -line.slope,
        c: line.intercept.exp(),
        d: None,
        e: None,
        residual: line.residual,
        t_window: t_window(ts.iter().copied()),
        active_fraction: None,
        sample_count: ts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints() {
        let scan = BoundScan::log_grid(0.05, 5.0, 13);
        assert!((scan.d_values[0] - 0.05).abs() <= 1e-15);
        assert!((scan.d_values[12] - 5.0).abs() <= 1e-12);
        assert!(scan.d_values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn decay_fit_needs_four_points() {
        assert!(decay_fit(&[1.0, 2.0, 4.0], &[1.0, 0.5, 0.25]).is_err());
        let fit = decay_fit(&[1.0, 2.0, 4.0, 8.0], &[2.0, 1.0, 0.5, 0.25]).unwrap();
        assert!((fit.alpha - 1.0).abs() <= 1e-12);
        assert!((fit.c - 2.0).abs() <= 1e-12);
        assert_eq!(fit.t_window, (1.0, 8.0));
    }

    #[test]
    fn envelope_ratio() {
        let s = Sample {
            t: 4.0,
            z: 2.0,
            scaled: 1.0,
        };
        let expected = 1.0 / ((-0.5f64).exp() + (-2.0f64).exp());
        assert!((ratio(&s, 0.5, 1.0) - expected).abs() <= 1e-15);
    }
}
