//! Ground-state-transformed heat kernel on the line.
//!
//! For a periodic potential the kernel of `e^{-tH}` on ℝ is assembled from
//! Bloch fibers,
//!
//! ```text
//! K_t(x, y) = (1/2π) ∫_BZ Σ_n e^{-t E_n(k)} w_{n,k}(x) conj(w_{n,k}(y)) dk,
//! w_{n,k}(x) = Σ_G c_G e^{i(k+G)x},
//! ```
//!
//! with a uniform trapezoid rule in `k` and a finite number of bands. The
//! intrinsic kernel is `L_t(x, y) = K_t(x, y) / (Ω(x) Ω(y))`; it is the
//! kernel of `e^{-tM}` on `L²(Ω² dx)`, so `∫ L_t(x, y) Ω(y)² dy = 1`.

mod bound;
mod line_heat;

pub use bound::{decay_fit, fit_gaussian_bound, gaussian_envelope_constant, BoundScan, DecayFit};
pub use line_heat::{line_heat_grad_sup, line_heat_phi, LineHeatProfile};

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::schrodinger::{assemble_fibers, GroundState, Potential};

pub const DEFAULT_BANDS: usize = 6;
pub const DEFAULT_K_POINTS: usize = 256;
/// Plane-wave cutoff used for kernel fibers.
pub const DEFAULT_KERNEL_CUTOFF: usize = 16;
/// Gauss–Legendre nodes per y panel.
pub const DEFAULT_PANEL_ORDER: usize = 16;
/// Half-width of the y window in units of `√t`, on top of one period.
pub const DEFAULT_TAIL_SIGMAS: f64 = 10.0;

/// Bloch data of a 1-D shifted potential on a uniform k grid, ready to
/// evaluate kernel slices at any `t`.
#[derive(Debug, Clone)]
pub struct BlochKernel {
    period: f64,
    reciprocal: f64,
    n_bands: usize,
    ks: Vec<f64>,
    modes: Vec<i64>,
    /// `[k][band]`
    energies: Vec<Vec<f64>>,
    /// `[k][band][mode]`
    coefficients: Vec<Vec<Vec<Complex64>>>,
    /// `min_k E_{n_bands}(k)` and higher minima, used for the truncation bound.
    omitted_minima: Vec<f64>,
    /// `max (Σ_G |c_G|)²` over k and the first omitted band.
    coefficient_sup: f64,
    ground: GroundState,
}

impl BlochKernel {
    /// `shifted` must be the potential returned alongside `ground` by
    /// [`ground_state`](crate::schrodinger::ground_state).
    pub fn new(shifted: &Potential, ground: &GroundState, n_bands: usize, n_k: usize, cutoff: usize) -> Result<Self> {
        let grid = shifted.grid();
        if grid.dim() != 1 {
            return Err(Error::argument("Bloch kernels are only built on the line"));
        }
        if n_bands < 2 {
            return Err(Error::argument(format!("need at least 2 bands, got {n_bands}")));
        }
        if n_k < 64 {
            return Err(Error::argument(format!("need at least 64 k-points, got {n_k}")));
        }
        if 2 * cutoff + 1 <= n_bands {
            return Err(Error::argument(format!(
                "cutoff {cutoff} gives only {} bands, fewer than n_bands + 1",
                2 * cutoff + 1
            )));
        }
        let reciprocal = grid.reciprocal();
        let ks: Vec<f64> = (0..n_k)
            .map(|j| reciprocal * (-0.5 + j as f64 / n_k as f64))
            .collect();
        let points: Vec<[f64; 2]> = ks.iter().map(|&k| [k, 0.0]).collect();
        let fibers = assemble_fibers(shifted, &points, cutoff)?;
        let modes: Vec<i64> = fibers[0].basis().modes().iter().map(|g| g[0]).collect();
        let energies = fibers.iter().map(|f| f.energies()[..n_bands].to_vec()).collect();
        let coefficients = fibers
            .iter()
            .map(|f| (0..n_bands).map(|b| f.eigenvector(b).to_vec()).collect())
            .collect();
        let total_bands = fibers[0].band_count();
        let omitted_minima = (n_bands..total_bands)
            .map(|b| fibers.iter().map(|f| f.energies()[b]).fold(f64::INFINITY, f64::min))
            .collect();
        let coefficient_sup = fibers
            .iter()
            .map(|f| f.eigenvector(n_bands).iter().map(|c| c.norm()).sum::<f64>().powi(2))
            .fold(0.0, f64::max);
        Ok(Self {
            period: grid.period(),
            reciprocal,
            n_bands,
            ks,
            modes,
            energies,
            coefficients,
            omitted_minima,
            coefficient_sup,
            ground: ground.clone(),
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn ground(&self) -> &GroundState {
        &self.ground
    }

    /// Lowest energy over the Brillouin zone of every retained band.
    pub fn band_minima(&self) -> Vec<f64> {
        (0..self.n_bands)
            .map(|b| self.energies.iter().map(|e| e[b]).fold(f64::INFINITY, f64::min))
            .collect()
    }

    /// `(w_{n,k}(x), ∂ₓw_{n,k}(x))` for every `(k, band)` in flat order.
    fn bloch_row(&self, x: f64, with_derivative: bool) -> (Vec<Complex64>, Vec<Complex64>) {
        let r = self.reciprocal;
        let lattice: Vec<Complex64> = self
            .modes
            .iter()
            .map(|&g| Complex64::from_polar(1.0, r * g as f64 * x))
            .collect();
        let size = self.ks.len() * self.n_bands;
        let mut values = Vec::with_capacity(size);
        let mut derivatives = Vec::with_capacity(if with_derivative { size } else { 0 });
        for (ik, &k) in self.ks.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, k * x);
            for band in &self.coefficients[ik] {
                let mut w = Complex64::new(0.0, 0.0);
                let mut dw = Complex64::new(0.0, 0.0);
                for ((c, e), &g) in band.iter().zip(&lattice).zip(&self.modes) {
                    let term = c * e;
                    w += term;
                    if with_derivative {
                        dw += term * (k + r * g as f64);
                    }
                }
                values.push(w * phase);
                if with_derivative {
                    // d/dx e^{iqx} = i q e^{iqx}
                    derivatives.push(Complex64::new(0.0, 1.0) * dw * phase);
                }
            }
        }
        (values, derivatives)
    }

    /// Estimate of the largest omitted-band contribution to `L_t`.
    pub fn truncation_bound(&self, t: f64) -> f64 {
        let Some(&first) = self.omitted_minima.first() else {
            return 0.0;
        };
        let tail: f64 = self.omitted_minima.iter().map(|e| (-t * (e - first)).exp()).sum();
        let a = self.ground.a();
        self.reciprocal / (2.0 * PI) * (-t * first).exp() * self.coefficient_sup * tail / (a * a)
    }

    /// Assembles `L_t` and `∂ₓL_t` on `samples`.
    pub fn slice(&self, t: f64, samples: &KernelSamples) -> Result<KernelSlice> {
        if !(t >= 1.0 && t.is_finite()) {
            return Err(Error::argument(format!("kernel slices need t >= 1, got {t}")));
        }
        let dk = self.reciprocal / self.ks.len() as f64;
        let weights: Vec<f64> = self
            .energies
            .iter()
            .flat_map(|e| e.iter().map(move |&en| (-t * en).exp() * dk / (2.0 * PI)))
            .collect();

        struct Row {
            omega: f64,
            domega: f64,
            w: Vec<Complex64>,
            dw: Vec<Complex64>,
        }
        let rows: Vec<Row> = samples
            .x
            .par_iter()
            .map(|&x| {
                let (w, dw) = self.bloch_row(x, true);
                let (omega, grad) = self.ground.value_at([x, 0.0]);
                let w = w.iter().zip(&weights).map(|(v, s)| v * s).collect();
                let dw = dw.iter().zip(&weights).map(|(v, s)| v * s).collect();
                Row {
                    omega,
                    domega: grad[0],
                    w,
                    dw,
                }
            })
            .collect();

        // column j holds (Ω(y_j), [K(x_i, y_j)], [∂ₓK(x_i, y_j)], max |Im K|)
        let columns: Vec<(f64, Vec<f64>, Vec<f64>, f64)> = samples
            .y
            .par_iter()
            .map(|&y| {
                let (wy, _) = self.bloch_row(y, false);
                let (omega_y, _) = self.ground.value_at([y, 0.0]);
                let mut k_col = Vec::with_capacity(rows.len());
                let mut dk_col = Vec::with_capacity(rows.len());
                let mut imag: f64 = 0.0;
                for row in &rows {
                    let mut kxy = Complex64::new(0.0, 0.0);
                    let mut dkxy = 0.0;
                    for ((a, da), b) in row.w.iter().zip(&row.dw).zip(&wy) {
                        kxy += a * b.conj();
                        dkxy += da.re * b.re + da.im * b.im;
                    }
                    imag = imag.max(kxy.im.abs());
                    k_col.push(kxy.re);
                    dk_col.push(dkxy);
                }
                (omega_y, k_col, dk_col, imag)
            })
            .collect();

        let nx = samples.x.len();
        let ny = samples.y.len();
        let mut l = DMatrix::zeros(nx, ny);
        let mut dldx = DMatrix::zeros(nx, ny);
        let mut imaginary_residual: f64 = 0.0;
        let mut omega_y = Vec::with_capacity(ny);
        for (j, (wy, k_col, dk_col, imag)) in columns.into_iter().enumerate() {
            omega_y.push(wy);
            imaginary_residual = imaginary_residual.max(imag);
            for (i, row) in rows.iter().enumerate() {
                let denom = row.omega * wy;
                l[(i, j)] = k_col[i] / denom;
                dldx[(i, j)] = dk_col[i] / denom - k_col[i] * row.domega / (row.omega * denom);
            }
        }

        let truncation_bound = self.truncation_bound(t);
        let peak = l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if truncation_bound > 1e-6 * peak {
            return Err(Error::argument(format!(
                "omitted bands may contribute {truncation_bound:.3e} against max L = {peak:.3e} at t = {t}; increase n_bands or t"
            )));
        }
        Ok(KernelSlice {
            t,
            samples: samples.clone(),
            l,
            dldx,
            truncation_bound,
            omega_x: rows.iter().map(|r| r.omega).collect(),
            omega_y,
            imaginary_residual,
        })
    }
}

/// Convenience wrapper: builds the Bloch data and assembles one slice.
pub fn bloch_kernel(
    shifted: &Potential,
    ground: &GroundState,
    t: f64,
    samples: &KernelSamples,
    n_bands: usize,
    n_k: usize,
) -> Result<KernelSlice> {
    BlochKernel::new(shifted, ground, n_bands, n_k, DEFAULT_KERNEL_CUTOFF)?.slice(t, samples)
}

/// Sample points for a kernel slice. With panels, `y` consists of
/// consecutive Gauss–Legendre groups of `panel_order` nodes and `y_weights`
/// integrates over their union.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSamples {
    x: Vec<f64>,
    y: Vec<f64>,
    y_weights: Option<Vec<f64>>,
    panels: Option<Panels>,
}

#[derive(Debug, Clone, PartialEq)]
struct Panels {
    order: usize,
    /// Reference nodes on [-1, 1] and barycentric weights for them.
    reference: Vec<f64>,
    barycentric: Vec<f64>,
    bounds: Vec<(f64, f64)>,
}

impl KernelSamples {
    /// Arbitrary point lists without quadrature weights.
    pub fn points(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::argument("sample lists must be nonempty"));
        }
        Ok(Self {
            x,
            y,
            y_weights: None,
            panels: None,
        })
    }

    /// `x_per_cell` points `x_i = i·period/x_per_cell` across one cell, and y
    /// panels of width `period/x_per_cell` covering the cell plus
    /// `tail_sigmas·√t` on either side. Panel edges include every `x_i`.
    pub fn cell_scan(period: f64, x_per_cell: usize, t: f64, tail_sigmas: f64, panel_order: usize) -> Result<Self> {
        let width = tail_sigmas * t.sqrt() + period;
        Self::cell_window(period, x_per_cell, width, panel_order)
    }

    /// As [`cell_scan`](Self::cell_scan) with an explicit one-sided window width.
    pub fn cell_window(period: f64, x_per_cell: usize, width: f64, panel_order: usize) -> Result<Self> {
        if x_per_cell == 0 || panel_order < 2 {
            return Err(Error::argument("need at least one x point and two nodes per panel"));
        }
        let h = period / x_per_cell as f64;
        let x: Vec<f64> = (0..x_per_cell).map(|i| i as f64 * h).collect();
        let panels_each_side = (width / h).ceil() as i64;
        let first = -panels_each_side;
        let last = x_per_cell as i64 + panels_each_side;
        let rule = GaussLegendre::new(NonZeroUsize::new(panel_order).unwrap());
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let reference: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let barycentric: Vec<f64> = (0..panel_order)
            .map(|j| {
                1.0 / (0..panel_order)
                    .filter(|&m| m != j)
                    .map(|m| reference[j] - reference[m])
                    .product::<f64>()
            })
            .collect();
        let mut y = Vec::new();
        let mut w = Vec::new();
        let mut bounds = Vec::new();
        for p in first..last {
            let (a, b) = (p as f64 * h, (p + 1) as f64 * h);
            bounds.push((a, b));
            for &(node, weight) in &pairs {
                y.push(0.5 * (a + b) + 0.5 * (b - a) * node);
                w.push(0.5 * (b - a) * weight);
            }
        }
        Ok(Self {
            x,
            y,
            y_weights: Some(w),
            panels: Some(Panels {
                order: panel_order,
                reference,
                barycentric,
                bounds,
            }),
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_weights(&self) -> Option<&[f64]> {
        self.y_weights.as_deref()
    }

    /// Same layout translated by `shift` in both x and y.
    pub fn translated(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.x.iter_mut().for_each(|v| *v += shift);
        out.y.iter_mut().for_each(|v| *v += shift);
        if let Some(p) = out.panels.as_mut() {
            p.bounds.iter_mut().for_each(|(a, b)| {
                *a += shift;
                *b += shift;
            });
        }
        out
    }
}

/// `L_t` and `∂ₓL_t` sampled on an `(x, y)` layout at one time.
#[derive(Debug, Clone)]
pub struct KernelSlice {
    t: f64,
    samples: KernelSamples,
    l: DMatrix<f64>,
    dldx: DMatrix<f64>,
    truncation_bound: f64,
    omega_x: Vec<f64>,
    omega_y: Vec<f64>,
    imaginary_residual: f64,
}

impl KernelSlice {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x_samples(&self) -> &[f64] {
        &self.samples.x
    }

    pub fn y_samples(&self) -> &[f64] {
        &self.samples.y
    }

    pub fn samples(&self) -> &KernelSamples {
        &self.samples
    }

    /// `L_t(x_i, y_j)`.
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `∂ₓL_t(x_i, y_j)`.
    pub fn dldx(&self) -> &DMatrix<f64> {
        &self.dldx
    }

    pub fn truncation_bound(&self) -> f64 {
        self.truncation_bound
    }

    pub fn omega_x(&self) -> &[f64] {
        &self.omega_x
    }

    pub fn omega_y(&self) -> &[f64] {
        &self.omega_y
    }

    /// Largest imaginary part discarded from `K_t`; zero up to rounding for
    /// real potentials.
    pub fn imaginary_residual(&self) -> f64 {
        self.imaginary_residual
    }

    fn weights(&self) -> Result<&[f64]> {
        self.samples
            .y_weights
            .as_deref()
            .ok_or_else(|| Error::argument("slice has no y quadrature weights"))
    }

    /// `max_x |∫ L_t(x, y) Ω(y)² dy - 1|` over the sampled window.
    pub fn stochasticity_defect(&self) -> Result<f64> {
        let w = self.weights()?;
        Ok((0..self.l.nrows())
            .map(|i| {
                let mass: f64 = (0..self.l.ncols())
                    .map(|j| w[j] * self.l[(i, j)] * self.omega_y[j] * self.omega_y[j])
                    .sum();
                (mass - 1.0).abs()
            })
            .fold(0.0, f64::max))
    }
}

/// `sup_x ∫ |∂ₓL_t(x, y)| dy` with its tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralDiagnostic {
    pub value: f64,
    /// Gaussian estimate of the mass of `|∂ₓL_t|` outside the y window,
    /// relative to the integral.
    pub tail_fraction: f64,
    /// Set when the tail estimate exceeds 1 %.
    pub tail_warning: bool,
}

pub fn integral_diagnostic(slice: &KernelSlice) -> Result<IntegralDiagnostic> {
    let w = slice.weights()?;
    let y = slice.y_samples();
    let ny = y.len();
    let mut value: f64 = 0.0;
    let mut tail_fraction: f64 = 0.0;
    for (i, &x) in slice.x_samples().iter().enumerate() {
        let integral: f64 = (0..ny).map(|j| w[j] * slice.dldx[(i, j)].abs()).sum();
        // For a Gaussian-like profile, ∫_Z^∞ |f| ≈ |f(Z)| σ² / |Z - x|, σ² ≤ t.
        let edge = |j: usize| slice.dldx[(i, j)].abs() * slice.t / (y[j] - x).abs().max(1e-300);
        let tail = edge(0) + edge(ny - 1);
        if integral > 0.0 {
            tail_fraction = tail_fraction.max(tail / integral);
        }
        value = value.max(integral);
    }
    Ok(IntegralDiagnostic {
        value,
        tail_fraction,
        tail_warning: tail_fraction > 0.01,
    })
}

/// `max |∂ₓL_t(x, y)|` over the samples. On panel layouts the maximum in y
/// is refined on the Gauss–Legendre interpolant of each candidate panel.
pub fn pointwise_diagnostic(slice: &KernelSlice) -> f64 {
    let raw = slice.dldx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let Some(panels) = slice.samples.panels.as_ref() else {
        return raw;
    };
    let q = panels.order;
    let mut best = raw;
    for i in 0..slice.dldx.nrows() {
        for (p, _) in panels.bounds.iter().enumerate() {
            let vals: Vec<f64> = (0..q).map(|j| slice.dldx[(i, p * q + j)]).collect();
            let local = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if local < 0.9 * raw {
                continue;
            }
            best = best.max(refine_panel_max(panels, &vals));
        }
    }
    best
}

fn barycentric_eval(panels: &Panels, vals: &[f64], s: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&node, &bw), &v) in panels.reference.iter().zip(&panels.barycentric).zip(vals) {
        let d = s - node;
        if d == 0.0 {
            return v;
        }
        num += bw / d * v;
        den += bw / d;
    }
    num / den
}

fn refine_panel_max(panels: &Panels, vals: &[f64]) -> f64 {
    let f = |s: f64| barycentric_eval(panels, vals, s).abs();
    let probes = 256;
    let (mut s_best, mut f_best) = (-1.0, f(-1.0));
    for j in 1..=probes {
        let s = -1.0 + 2.0 * j as f64 / probes as f64;
        let v = f(s);
        if v > f_best {
            s_best = s;
            f_best = v;
        }
    }
    // golden-section polish around the best probe
    let step = 2.0 / probes as f64;
    let (mut lo, mut hi) = ((s_best - step).max(-1.0), (s_best + step).min(1.0));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f_best.max(f(0.5 * (lo + hi)))
}
