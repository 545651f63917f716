//! Free heat flow on the line from piecewise-constant data on widening
//! symmetric shells, evaluated in closed form with error functions.
//!
//! Shell `n` is `R_n ≤ |y| < R_{n+1}` (1-based) and takes
//! `values[n mod values.len()]`, so `(3, 1)` reproduces `2 + (-1)ⁿ`. The core
//! `|y| < R₁` belongs to shell 1 and `|y| ≥ R_m` takes the background.

use std::f64::consts::PI;

use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LineHeatProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
    background: f64,
}

impl LineHeatProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>, background: f64) -> Result<Self> {
        if radii.is_empty() || values.is_empty() {
            return Err(Error::argument("profile needs at least one radius and one value"));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::argument("radii must be positive and strictly increasing"));
        }
        if values.iter().chain([&background]).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::argument("profile values must be positive and finite"));
        }
        Ok(Self {
            radii,
            values,
            background,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    /// Value on region `i`: 0 is the core, `1..radii.len()` the shells,
    /// `radii.len()` the background.
    pub fn region_value(&self, i: usize) -> f64 {
        if i >= self.radii.len() {
            self.background
        } else {
            self.values[i.max(1) % self.values.len()]
        }
    }

    /// Initial datum φ₀(y).
    pub fn initial(&self, y: f64) -> f64 {
        let r = y.abs();
        let region = self.radii.iter().take_while(|&&radius| radius <= r).count();
        self.region_value(region)
    }

    fn spread(&self) -> f64 {
        let all = self.values.iter().chain([&self.background]);
        let max = all.clone().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let min = all.fold(f64::INFINITY, |m, &v| m.min(v));
        max - min
    }

    /// `(max value - min value) (2πt)^{-1/2} · (number of boundaries)`.
    pub fn gradient_ceiling(&self, t: f64) -> f64 {
        self.spread() * (2.0 * PI * t).powf(-0.5) * (2 * self.radii.len()) as f64
    }
}

/// `P(a < Y < b)` for `Y ~ N(x, t)`, accurate far in either tail.
fn gaussian_mass(a: f64, b: f64, x: f64, t: f64) -> f64 {
    let s = (2.0 * t).sqrt();
    let za = (a - x) / s;
    let zb = (b - x) / s;
    if za >= 0.0 {
        0.5 * (erfc(za) - erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (erfc(-zb) - erfc(-za))
    } else {
        0.5 * (erf(zb) - erf(za))
    }
}

fn gaussian_tail_above(a: f64, x: f64, t: f64) -> f64 {
    0.5 * erfc((a - x) / (2.0 * t).sqrt())
}

/// `φ(x, t)` for the generator `½Δ` (heat kernel of variance `t`).
pub fn line_heat_phi(profile: &LineHeatProfile, t: f64, x: f64) -> f64 {
    let mut phi = 0.0;
    let mut inner = 0.0;
    for (i, &outer) in profile.radii.iter().enumerate() {
        let mass = if inner == 0.0 {
            gaussian_mass(-outer, outer, x, t)
        } else {
            gaussian_mass(inner, outer, x, t) + gaussian_mass(-outer, -inner, x, t)
        };
        phi += profile.region_value(i) * mass;
        inner = outer;
    }
    let outside = gaussian_tail_above(inner, x, t) + gaussian_tail_above(inner, -x, t);
    phi + profile.background * outside
}

/// `∂ₓφ(x, t) = Σ_c (v_right(c) - v_left(c)) p_t(c - x)` over boundaries `c = ±R_i`.
pub fn line_heat_gradient(profile: &LineHeatProfile, t: f64, x: f64) -> f64 {
    let density = |c: f64| (-(c - x) * (c - x) / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
    profile
        .radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let jump = profile.region_value(i + 1) - profile.region_value(i);
            // at +R the value steps from region i to i+1 going right; at -R the reverse
            jump * (density(r) - density(-r))
        })
        .sum()
}

/// `sup_x |∂ₓφ(x, t)|` over a log-spaced grid in `|x|`, refined around every
/// shell boundary.
pub fn line_heat_grad_sup(profile: &LineHeatProfile, t: f64) -> f64 {
    let sigma = t.sqrt();
    let lo = (profile.radii[0].min(sigma) * 1e-3).log10();
    let hi = (profile.radii.last().unwrap().max(sigma) * 1e2).log10();
    let per_decade = 200.0;
    let count = ((hi - lo) * per_decade).ceil() as usize;
    let mut xs: Vec<f64> = vec![0.0];
    xs.extend((0..=count).map(|j| 10f64.powf(lo + (hi - lo) * j as f64 / count as f64)));
    for &r in &profile.radii {
        xs.extend((-40..=40).map(|j| r + 0.1 * j as f64 * sigma).filter(|&x| x >= 0.0));
    }
    xs.iter()
        .map(|&x| line_heat_gradient(profile, t, x).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_validation() {
        assert!(LineHeatProfile::new(vec![], vec![1.0], 1.0).is_err());
        assert!(LineHeatProfile::new(vec![2.0, 1.0], vec![1.0], 1.0).is_err());
        assert!(LineHeatProfile::new(vec![1.0], vec![-1.0], 1.0).is_err());
        assert!(LineHeatProfile::new(vec![1.0], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn regions_alternate() {
        let p = LineHeatProfile::new(vec![1e2, 1e4, 1e8], vec![3.0, 1.0], 3.0).unwrap();
        assert_eq!(p.initial(0.0), 1.0);
        assert_eq!(p.initial(-150.0), 1.0);
        assert_eq!(p.initial(2e4), 3.0);
        assert_eq!(p.initial(-1e9), 3.0);
    }

    #[test]
    fn constant_profile_is_invariant() {
        let p = LineHeatProfile::new(vec![1.0, 5.0], vec![1.0], 1.0).unwrap();
        for &t in &[1e-3, 1.0, 1e6] {
            for &x in &[0.0, 3.0, -40.0] {
                assert!((line_heat_phi(&p, t, x) - 1.0).abs() <= 1e-14);
            }
            assert_eq!(line_heat_grad_sup(&p, t), 0.0);
        }
    }

    #[test]
    fn short_time_recovers_data() {
        let p = LineHeatProfile::new(vec![1e2, 1e4, 1e8], vec![3.0, 1.0], 3.0).unwrap();
        let t = 1e-4;
        assert!((line_heat_phi(&p, t, 500.0) - 1.0).abs() <= 1e-10);
        assert!((line_heat_phi(&p, t, -2e4) - 3.0).abs() <= 1e-10);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = LineHeatProfile::new(vec![1.0, 3.0, 5.0], vec![2.0, 0.5], 1.5).unwrap();
        let t = 0.8;
        for &x in &[-2.5, 0.3, 1.1, 4.0, -5.5] {
            let h = 1e-5;
            let fd = (line_heat_phi(&p, t, x + h) - line_heat_phi(&p, t, x - h)) / (2.0 * h);
            assert!((fd - line_heat_gradient(&p, t, x)).abs() <= 1e-8);
        }
    }

    #[test]
    fn gaussian_mass_tails() {
        let m = gaussian_mass(10.0, 11.0, 0.0, 1.0);
        let expected = 0.5 * (erfc(10.0 / 2f64.sqrt()) - erfc(11.0 / 2f64.sqrt()));
        assert!(m > 0.0 && (m - expected).abs() <= 1e-30);
        assert!((gaussian_mass(-1.0, 1.0, 0.0, 1.0) - erf(1.0 / 2f64.sqrt())).abs() <= 1e-15);
    }
}
