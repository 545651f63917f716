//! Periodic grids and trigonometric-spectral calculus on the torus.
//!
//! Grids are uniform with `n` samples per axis (a power of two, `n >= 8`)
//! on `[0, period)^dim`, `dim` in {1, 2}. In two dimensions values are
//! stored row-major with axis 1 contiguous: `values[i0 * n + i1]` is the
//! sample at `(x_{i0}, y_{i1})`.
//!
//! All transforms are full complex FFTs of real data; odd-order
//! derivatives zero the Nyquist mode so that real input stays real.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const DEFAULT_PERIOD: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    period: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::argument(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::argument(format!(
                "samples per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::argument(format!("period must be positive, got {period}")));
        }
        Ok(Self { dim, n, period })
    }

    /// One-dimensional grid on `[0, 2π)`.
    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, n, DEFAULT_PERIOD)
    }

    /// Two-dimensional grid on `[0, 2π)²`.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(2, n, DEFAULT_PERIOD)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Total number of grid points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        j as f64 * self.period / self.n as f64
    }

    /// Coordinates of flat index `idx`; unused axes are zero.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coordinate(idx), 0.0],
            _ => [self.coordinate(idx / self.n), self.coordinate(idx % self.n)],
        }
    }

    /// Signed integer frequency of FFT bin `q`; the Nyquist bin maps to `+n/2`.
    pub fn signed_mode(&self, q: usize) -> i64 {
        let n = self.n as i64;
        let q = q as i64;
        if q <= n / 2 {
            q
        } else {
            q - n
        }
    }

    /// FFT bin holding signed frequency `m`, if representable on this grid.
    pub fn bin_of_mode(&self, m: i64) -> Option<usize> {
        let n = self.n as i64;
        if m > n / 2 || m <= -n / 2 {
            return None;
        }
        Some(m.rem_euclid(n) as usize)
    }

    /// Angular wavenumber of FFT bin `q`.
    pub fn wavenumber(&self, q: usize) -> f64 {
        2.0 * PI / self.period * self.signed_mode(q) as f64
    }

    pub fn is_nyquist(&self, q: usize) -> bool {
        q == self.n / 2
    }

    /// Reciprocal lattice spacing `2π / period`.
    pub fn reciprocal(&self) -> f64 {
        2.0 * PI / self.period
    }
}

/// Sampled real function on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
    label: String,
}

impl Field {
    pub fn new(grid: TorusGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if values.len() != grid.len() {
            return Err(Error::argument(format!(
                "field '{label}' has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::argument(format!("field '{label}' has a non-finite value at index {j}")));
        }
        Ok(Self { grid, values, label })
    }

    /// Samples `f` at every grid point. `f` receives `[x, y]` (y = 0 in 1-D).
    pub fn from_fn(grid: TorusGrid, label: impl Into<String>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        Self::new(grid, values, label)
    }

    pub fn constant(grid: TorusGrid, value: f64, label: impl Into<String>) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], label)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map; fails if the result is not finite.
    pub fn map(&self, label: impl Into<String>, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|&v| f(v)).collect(), label)
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Field, label: impl Into<String>, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.require_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(self.grid, values, label)
    }

    pub(crate) fn require_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::argument(format!(
                "fields '{}' and '{}' live on different grids",
                self.label, other.label
            )));
        }
        Ok(())
    }
}

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plan {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

fn transform(grid: &TorusGrid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let plan = Plan::new(n);
    let fft = if inverse { &plan.inverse } else { &plan.forward };
    match grid.dim() {
        1 => fft.process(data),
        _ => {
            for row in data.chunks_exact_mut(n) {
                fft.process(row);
            }
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for i1 in 0..n {
                for i0 in 0..n {
                    column[i0] = data[i0 * n + i1];
                }
                fft.process(&mut column);
                for i0 in 0..n {
                    data[i0 * n + i1] = column[i0];
                }
            }
        }
    }
}

/// Normalized Fourier coefficients `ĉ_q = N⁻¹ Σ_j f_j e^{-i κ_q·x_j}` in FFT bin order.
pub fn fourier_coefficients(f: &Field) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&f.grid, &mut data, false);
    let scale = 1.0 / f.grid.len() as f64;
    data.iter_mut().for_each(|c| *c *= scale);
    data
}

/// Inverse of [`fourier_coefficients`], keeping the real part.
pub fn synthesize(grid: &TorusGrid, coefficients: &[Complex64], label: impl Into<String>) -> Result<Field> {
    if coefficients.len() != grid.len() {
        return Err(Error::argument("coefficient count does not match grid"));
    }
    let mut data = coefficients.to_vec();
    transform(grid, &mut data, true);
    Field::new(*grid, data.iter().map(|c| c.re).collect(), label)
}

/// Applies a Fourier multiplier. The closure sees the wavenumber vector and
/// which axes sit on the Nyquist bin.
fn apply_multiplier(
    f: &Field,
    label: String,
    symbol: impl Fn([f64; 2], [bool; 2]) -> Complex64,
) -> Result<Field> {
    let grid = f.grid;
    let n = grid.n();
    let mut spectrum = fourier_coefficients(f);
    for (idx, c) in spectrum.iter_mut().enumerate() {
        let (q0, q1) = match grid.dim() {
            1 => (idx, 0),
            _ => (idx / n, idx % n),
        };
        let kappa = [grid.wavenumber(q0), if grid.dim() == 2 { grid.wavenumber(q1) } else { 0.0 }];
        let nyquist = [grid.is_nyquist(q0), grid.dim() == 2 && grid.is_nyquist(q1)];
        *c *= symbol(kappa, nyquist);
    }
    synthesize(&grid, &spectrum, label)
}

/// Spectral derivative along `axis` of the trigonometric interpolant of `f`.
pub fn derivative(f: &Field, axis: usize) -> Result<Field> {
    if axis >= f.grid.dim() {
        return Err(Error::argument(format!(
            "axis {axis} out of range for a {}-dimensional grid",
            f.grid.dim()
        )));
    }
    let label = format!("d{}({})", axis, f.label);
    apply_multiplier(f, label, |kappa, nyquist| {
        if nyquist[axis] {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, kappa[axis])
        }
    })
}

/// Gradient as one field per axis.
pub fn gradient(f: &Field) -> Result<Vec<Field>> {
    (0..f.grid.dim()).map(|axis| derivative(f, axis)).collect()
}

/// Spectral Laplacian. The Nyquist mode keeps its symbol `-(n/2)²`, which
/// matches the discrete operator used by the propagator.
pub fn laplacian(f: &Field) -> Result<Field> {
    let label = format!("lap({})", f.label);
    apply_multiplier(f, label, |kappa, _| {
        Complex64::new(-(kappa[0] * kappa[0] + kappa[1] * kappa[1]), 0.0)
    })
}

/// Trapezoid rule `(period/n)^dim · Σ values`; exact for trigonometric
/// polynomials of degree below `n`.
pub fn quadrature(f: &Field) -> f64 {
    let cell = f.grid.spacing().powi(f.grid.dim() as i32);
    cell * f.values.iter().sum::<f64>()
}

/// Grid index of `x` if it lies exactly on a node, after reduction modulo the period.
fn node_index(grid: &TorusGrid, x: f64) -> Option<usize> {
    let x = x.rem_euclid(grid.period());
    let j = (x / grid.spacing()).round() as usize;
    if grid.coordinate(j) == x {
        Some(j % grid.n())
    } else {
        None
    }
}

/// Value of the trigonometric interpolant at `x` (only the first `dim`
/// coordinates are read). At grid nodes the stored sample is returned as is.
pub fn interpolate(f: &Field, x: &[f64]) -> f64 {
    let grid = f.grid;
    let n = grid.n();
    let dim = grid.dim();
    let nodes: Vec<Option<usize>> = x.iter().take(dim).map(|&xi| node_index(&grid, xi)).collect();
    if nodes.iter().all(Option::is_some) {
        let idx = match dim {
            1 => nodes[0].unwrap(),
            _ => nodes[0].unwrap() * n + nodes[1].unwrap(),
        };
        return f.values[idx];
    }
    let spectrum = fourier_coefficients(f);
    let phases: Vec<Vec<Complex64>> = x
        .iter()
        .take(dim)
        .map(|&xi| (0..n).map(|q| Complex64::from_polar(1.0, grid.wavenumber(q) * xi)).collect())
        .collect();
    let mut sum = Complex64::new(0.0, 0.0);
    match dim {
        1 => {
            for (c, p) in spectrum.iter().zip(&phases[0]) {
                sum += c * p;
            }
        }
        _ => {
            for q0 in 0..n {
                let mut row = Complex64::new(0.0, 0.0);
                for q1 in 0..n {
                    row += spectrum[q0 * n + q1] * phases[1][q1];
                }
                sum += row * phases[0][q0];
            }
        }
    }
    sum.re
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> TorusGrid {
        TorusGrid::line(n).unwrap()
    }

    fn max_err(a: &Field, f: impl Fn([f64; 2]) -> f64) -> f64 {
        (0..a.grid().len())
            .map(|i| (a.values()[i] - f(a.grid().point(i))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(3, 16, 1.0).is_err());
        assert!(TorusGrid::new(1, 4, 1.0).is_err());
        assert!(TorusGrid::new(1, 24, 1.0).is_err());
        assert!(TorusGrid::new(1, 16, 0.0).is_err());
        let g = TorusGrid::square(16).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.point(17), [g.coordinate(1), g.coordinate(1)]);
    }

    #[test]
    fn field_rejects_bad_values() {
        let g = line(8);
        assert!(Field::new(g, vec![0.0; 7], "short").is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(Field::new(g, v, "nan").is_err());
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let f = Field::from_fn(line(32), "sin", |p| p[0].sin()).unwrap();
        let d = derivative(&f, 0).unwrap();
        assert!(max_err(&d, |p| p[0].cos()) <= 1e-12);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let f = Field::constant(line(16), 1.0, "one").unwrap();
        assert!(derivative(&f, 0).unwrap().max_abs() <= 1e-15);
    }

    #[test]
    fn derivative_of_cos2x() {
        let f = Field::from_fn(line(64), "cos2x", |p| (2.0 * p[0]).cos()).unwrap();
        let d = derivative(&f, 0).unwrap();
        assert!(max_err(&d, |p| -2.0 * (2.0 * p[0]).sin()) <= 1e-12);
    }

    #[test]
    fn derivative_axis_out_of_range() {
        let f = Field::constant(line(16), 1.0, "one").unwrap();
        assert!(matches!(derivative(&f, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn derivative_in_two_dimensions() {
        let g = TorusGrid::square(32).unwrap();
        let f = Field::from_fn(g, "f", |p| p[0].sin() * (2.0 * p[1]).cos()).unwrap();
        let dx = derivative(&f, 0).unwrap();
        let dy = derivative(&f, 1).unwrap();
        assert!(max_err(&dx, |p| p[0].cos() * (2.0 * p[1]).cos()) <= 1e-12);
        assert!(max_err(&dy, |p| -2.0 * p[0].sin() * (2.0 * p[1]).sin()) <= 1e-12);
    }

    #[test]
    fn nyquist_mode_is_dropped_by_derivative() {
        let g = line(16);
        let f = Field::from_fn(g, "nyq", |p| (8.0 * p[0]).cos()).unwrap();
        assert!(derivative(&f, 0).unwrap().max_abs() <= 1e-13);
    }

    #[test]
    fn laplacian_of_product_mode() {
        let g = TorusGrid::square(16).unwrap();
        let f = Field::from_fn(g, "f", |p| (p[0] + 3.0 * p[1]).cos()).unwrap();
        let lap = laplacian(&f).unwrap();
        assert!(max_err(&lap, |p| -10.0 * (p[0] + 3.0 * p[1]).cos()) <= 1e-11);
    }

    #[test]
    fn quadrature_examples() {
        let g = line(16);
        let one = Field::constant(g, 1.0, "one").unwrap();
        assert!((quadrature(&one) - 2.0 * PI).abs() <= 1e-14);
        let c = Field::from_fn(g, "cos", |p| p[0].cos()).unwrap();
        assert!(quadrature(&c).abs() <= 1e-14);
        let c2 = Field::from_fn(g, "cos2", |p| p[0].cos().powi(2)).unwrap();
        assert!((quadrature(&c2) - PI).abs() <= 1e-12);
    }

    #[test]
    fn quadrature_in_two_dimensions() {
        let g = TorusGrid::new(2, 16, 3.0).unwrap();
        let one = Field::constant(g, 2.0, "two").unwrap();
        assert!((quadrature(&one) - 18.0).abs() <= 1e-12);
    }

    #[test]
    fn interpolation_examples() {
        let g = line(32);
        let s = Field::from_fn(g, "sin", |p| p[0].sin()).unwrap();
        assert!((interpolate(&s, &[PI / 3.0]) - (PI / 3.0).sin()).abs() <= 1e-12);
        let c3 = Field::from_fn(g, "cos3", |p| (3.0 * p[0]).cos()).unwrap();
        assert!((interpolate(&c3, &[0.1]) - 0.3f64.cos()).abs() <= 1e-12);
        for j in 0..32 {
            assert_eq!(interpolate(&s, &[g.coordinate(j)]).to_bits(), s.values()[j].to_bits());
        }
        // reduction modulo the period
        assert!((interpolate(&s, &[g.coordinate(5) + 2.0 * PI]) - s.values()[5]).abs() <= 1e-13);
    }

    #[test]
    fn interpolation_in_two_dimensions() {
        let g = TorusGrid::square(16).unwrap();
        let f = Field::from_fn(g, "f", |p| p[0].sin() * p[1].cos() + (2.0 * p[1]).sin()).unwrap();
        let (x, y): (f64, f64) = (0.37, 2.9);
        let exact = x.sin() * y.cos() + (2.0 * y).sin();
        assert!((interpolate(&f, &[x, y]) - exact).abs() <= 1e-12);
        assert_eq!(interpolate(&f, &[g.coordinate(3), g.coordinate(7)]), f.values()[3 * 16 + 7]);
    }

    #[test]
    fn coefficients_round_trip() {
        let g = TorusGrid::square(8).unwrap();
        let f = Field::from_fn(g, "f", |p| (p[0] - 2.0 * p[1]).sin() + 0.5).unwrap();
        let back = synthesize(&g, &fourier_coefficients(&f), "back").unwrap();
        let err = f.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-14);
    }
}
