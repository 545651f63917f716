//! Periodic Schrödinger operator `H = -½Δ + V`, its Bloch fibers and the
//! positive ground state.
//!
//! A fiber at quasimomentum `k` is the plane-wave matrix
//! `½|k + G|² δ_{GG'} + V̂(G - G')` over reciprocal vectors with
//! `|G_i| ≤ m` (in units of `2π/period`). Eigenvectors are the Fourier
//! coefficients of the periodic part `u_{n,k}`, normalized so that
//! `Σ|c_G|² = 1`, i.e. unit norm for the cell-averaged inner product.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{self, Field, TorusGrid};

/// Default plane-wave cutoff per axis.
pub fn default_cutoff(dim: usize) -> usize {
    if dim == 1 {
        64
    } else {
        16
    }
}

/// Tolerance on `max |(-½Δ + V)Ω|` accepted by [`ground_state`].
pub const GROUND_STATE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    v: Field,
    holder_note: String,
}

impl Potential {
    pub fn new(v: Field, holder_note: impl Into<String>) -> Self {
        Self {
            v,
            holder_note: holder_note.into(),
        }
    }

    pub fn zero(grid: TorusGrid) -> Result<Self> {
        Ok(Self::new(Field::constant(grid, 0.0, "V")?, "constant"))
    }

    /// `amplitude · cos x` (in 2-D, constant along y).
    pub fn cosine(grid: TorusGrid, amplitude: f64) -> Result<Self> {
        let r = grid.reciprocal();
        let v = Field::from_fn(grid, "V", |p| amplitude * (r * p[0]).cos())?;
        Ok(Self::new(v, "trigonometric polynomial, analytic"))
    }

    /// `amplitude · (cos x + ½ cos 2x)`.
    pub fn two_mode(grid: TorusGrid, amplitude: f64) -> Result<Self> {
        let r = grid.reciprocal();
        let v = Field::from_fn(grid, "V", |p| {
            amplitude * ((r * p[0]).cos() + 0.5 * (2.0 * r * p[0]).cos())
        })?;
        Ok(Self::new(v, "trigonometric polynomial, analytic"))
    }

    /// `amplitude · (cos x + cos y)` on a 2-D grid.
    pub fn separable_2d(grid: TorusGrid, amplitude: f64) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::argument("separable-2d potential needs a two-dimensional grid"));
        }
        let r = grid.reciprocal();
        let v = Field::from_fn(grid, "V", |p| amplitude * ((r * p[0]).cos() + (r * p[1]).cos()))?;
        Ok(Self::new(v, "trigonometric polynomial, analytic"))
    }

    /// Looks up a named built-in potential.
    pub fn builtin(name: &str, amplitude: f64, grid: TorusGrid) -> Result<Self> {
        match name {
            "zero" => Self::zero(grid),
            "cosine" => Self::cosine(grid, amplitude),
            "two-mode" => Self::two_mode(grid, amplitude),
            "separable-2d" => Self::separable_2d(grid, amplitude),
            other => Err(Error::argument(format!("unknown potential '{other}'"))),
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 4] = ["zero", "cosine", "two-mode", "separable-2d"];

    pub fn field(&self) -> &Field {
        &self.v
    }

    pub fn grid(&self) -> &TorusGrid {
        self.v.grid()
    }

    pub fn holder_note(&self) -> &str {
        &self.holder_note
    }

    /// `V - shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        Ok(Self::new(self.v.map("V", |v| v - shift)?, self.holder_note.clone()))
    }
}

/// Reciprocal vectors `G` (integer components) spanned by a fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveBasis {
    dim: usize,
    cutoff: usize,
    reciprocal: f64,
    modes: Vec<[i64; 2]>,
}

impl PlaneWaveBasis {
    pub fn new(grid: &TorusGrid, cutoff: usize) -> Result<Self> {
        if cutoff == 0 || cutoff > grid.n() / 2 {
            return Err(Error::argument(format!(
                "plane-wave cutoff {cutoff} must lie in 1..={} for this grid",
                grid.n() / 2
            )));
        }
        let m = cutoff as i64;
        let modes = match grid.dim() {
            1 => (-m..=m).map(|g| [g, 0]).collect(),
            _ => (-m..=m).flat_map(|g0| (-m..=m).map(move |g1| [g0, g1])).collect(),
        };
        Ok(Self {
            dim: grid.dim(),
            cutoff,
            reciprocal: grid.reciprocal(),
            modes,
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[[i64; 2]] {
        &self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reciprocal(&self) -> f64 {
        self.reciprocal
    }

    fn index_of(&self, mode: [i64; 2]) -> Option<usize> {
        self.modes.iter().position(|&g| g == mode)
    }
}

/// Fourier coefficients of the potential indexed by integer mode. Modes the
/// grid cannot resolve (including the Nyquist bin) read as zero.
struct PotentialSpectrum {
    grid: TorusGrid,
    coefficients: Vec<Complex64>,
}

impl PotentialSpectrum {
    fn new(v: &Potential) -> Self {
        Self {
            grid: *v.grid(),
            coefficients: spectral::fourier_coefficients(v.field()),
        }
    }

    fn at(&self, mode: [i64; 2]) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let n = self.grid.n() as i64;
        if mode.iter().take(self.grid.dim()).any(|&g| g.abs() >= n / 2) {
            return zero;
        }
        let b0 = self.grid.bin_of_mode(mode[0]).unwrap();
        match self.grid.dim() {
            1 => self.coefficients[b0],
            _ => self.coefficients[b0 * self.grid.n() + self.grid.bin_of_mode(mode[1]).unwrap()],
        }
    }

    fn is_real(&self) -> bool {
        let scale = self.coefficients.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        self.coefficients.iter().all(|c| c.im.abs() <= 1e-14 * scale.max(1.0))
    }
}

/// Eigen-decomposition of one Bloch fiber `H(k)`.
#[derive(Debug, Clone)]
pub struct FiberSpectrum {
    k: [f64; 2],
    energies: Vec<f64>,
    eigenvectors: Vec<Vec<Complex64>>,
    basis: Arc<PlaneWaveBasis>,
}

impl FiberSpectrum {
    pub fn k(&self) -> [f64; 2] {
        self.k
    }

    /// Band energies in ascending order.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Plane-wave coefficients of the periodic part of band `n`.
    pub fn eigenvector(&self, band: usize) -> &[Complex64] {
        &self.eigenvectors[band]
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.basis
    }

    pub fn band_count(&self) -> usize {
        self.energies.len()
    }

    /// Bloch function `Σ_G c_G e^{i(k+G)·x}` of band `n` and its gradient.
    pub fn bloch_value(&self, band: usize, x: [f64; 2]) -> (Complex64, [Complex64; 2]) {
        let r = self.basis.reciprocal;
        let mut value = Complex64::new(0.0, 0.0);
        let mut grad = [Complex64::new(0.0, 0.0); 2];
        for (c, g) in self.eigenvectors[band].iter().zip(&self.basis.modes) {
            let q = [self.k[0] + r * g[0] as f64, self.k[1] + r * g[1] as f64];
            let term = c * Complex64::from_polar(1.0, q[0] * x[0] + q[1] * x[1]);
            value += term;
            grad[0] += term * Complex64::new(0.0, q[0]);
            grad[1] += term * Complex64::new(0.0, q[1]);
        }
        (value, grad)
    }
}

fn eigh_real(matrix: DMatrix<f64>) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let size = matrix.nrows();
    let eig = SymmetricEigen::try_new(matrix, f64::EPSILON, 100 * size.max(10))
        .ok_or_else(|| Error::numerical("fiber eigensolver", format!("no convergence for size {size}")))?;
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = order
        .iter()
        .map(|&j| eig.eigenvectors.column(j).iter().map(|&v| Complex64::new(v, 0.0)).collect())
        .collect();
    Ok((energies, vectors))
}

fn eigh_complex(matrix: DMatrix<Complex64>) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let size = matrix.nrows();
    let eig = SymmetricEigen::try_new(matrix, f64::EPSILON, 100 * size.max(10))
        .ok_or_else(|| Error::numerical("fiber eigensolver", format!("no convergence for size {size}")))?;
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = order
        .iter()
        .map(|&j| eig.eigenvectors.column(j).iter().copied().collect())
        .collect();
    Ok((energies, vectors))
}

fn solve_fiber(spectrum: &PotentialSpectrum, basis: Arc<PlaneWaveBasis>, k: [f64; 2]) -> Result<FiberSpectrum> {
    let size = basis.len();
    let r = basis.reciprocal;
    let kinetic = |g: [i64; 2]| {
        let q0 = k[0] + r * g[0] as f64;
        let q1 = k[1] + r * g[1] as f64;
        0.5 * (q0 * q0 + q1 * q1)
    };
    let coupling = |a: [i64; 2], b: [i64; 2]| spectrum.at([a[0] - b[0], a[1] - b[1]]);
    let modes = &basis.modes;
    let (energies, eigenvectors) = if spectrum.is_real() {
        let h = DMatrix::from_fn(size, size, |i, j| {
            let diag = if i == j { kinetic(modes[i]) } else { 0.0 };
            diag + coupling(modes[i], modes[j]).re
        });
        eigh_real(h)?
    } else {
        let h = DMatrix::from_fn(size, size, |i, j| {
            let diag = if i == j { kinetic(modes[i]) } else { 0.0 };
            Complex64::new(diag, 0.0) + coupling(modes[i], modes[j])
        });
        eigh_complex(h)?
    };
    Ok(FiberSpectrum {
        k,
        energies,
        eigenvectors,
        basis,
    })
}

/// Fiber `H(k)` of `v` with plane-wave cutoff `cutoff`, fully diagonalized.
/// In 1-D only `k[0]` matters.
pub fn assemble_fiber(v: &Potential, k: [f64; 2], cutoff: usize) -> Result<FiberSpectrum> {
    let basis = Arc::new(PlaneWaveBasis::new(v.grid(), cutoff)?);
    solve_fiber(&PotentialSpectrum::new(v), basis, k)
}

/// Solves many fibers of the same potential in parallel; output order follows `ks`.
pub fn assemble_fibers(v: &Potential, ks: &[[f64; 2]], cutoff: usize) -> Result<Vec<FiberSpectrum>> {
    let basis = Arc::new(PlaneWaveBasis::new(v.grid(), cutoff)?);
    let spectrum = PotentialSpectrum::new(v);
    ks.par_iter()
        .map(|&k| solve_fiber(&spectrum, Arc::clone(&basis), k))
        .collect()
}

/// Positive periodic ground state Ω of the shifted operator, scaled to `max Ω = 1`.
#[derive(Debug, Clone)]
pub struct GroundState {
    omega: Field,
    e0: f64,
    a: f64,
    b: f64,
    residual: Option<f64>,
    /// `(G, c_G)` with `Ω(x) = Σ c_G e^{iG·x}`, same scale as `omega`.
    coefficients: Vec<([i64; 2], Complex64)>,
    reciprocal: f64,
}

impl GroundState {
    /// Wraps externally supplied positive samples (no eigenproblem attached):
    /// `e0 = 0` and no residual is recorded.
    pub fn from_samples(omega: &Field) -> Result<Self> {
        if omega.min() <= 0.0 {
            return Err(Error::argument("ground state samples must be strictly positive"));
        }
        let peak = omega.max();
        let omega = omega.map("Omega", |w| w / peak)?;
        let grid = *omega.grid();
        let n = grid.n();
        let coefficients = spectral::fourier_coefficients(&omega)
            .into_iter()
            .enumerate()
            .filter_map(|(idx, c)| {
                let (q0, q1) = if grid.dim() == 1 { (idx, 0) } else { (idx / n, idx % n) };
                if grid.is_nyquist(q0) || (grid.dim() == 2 && grid.is_nyquist(q1)) {
                    return None;
                }
                let g1 = if grid.dim() == 2 { grid.signed_mode(q1) } else { 0 };
                Some(([grid.signed_mode(q0), g1], c))
            })
            .collect();
        Ok(Self {
            a: omega.min(),
            b: omega.max(),
            omega,
            e0: 0.0,
            residual: None,
            coefficients,
            reciprocal: grid.reciprocal(),
        })
    }

    pub fn omega(&self) -> &Field {
        &self.omega
    }

    /// Constant subtracted from V so that the bottom of the spectrum is 0.
    pub fn e0(&self) -> f64 {
        self.e0
    }

    /// Lower bound `a = min Ω`.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Upper bound `b = max Ω` (= 1 by normalization).
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn residual(&self) -> Option<f64> {
        self.residual
    }

    /// Ω and ∇Ω at an arbitrary point.
    pub fn value_at(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let r = self.reciprocal;
        let mut value = 0.0;
        let mut grad = [0.0; 2];
        for (g, c) in &self.coefficients {
            let q = [r * g[0] as f64, r * g[1] as f64];
            let term = c * Complex64::from_polar(1.0, q[0] * x[0] + q[1] * x[1]);
            value += term.re;
            grad[0] -= q[0] * term.im;
            grad[1] -= q[1] * term.im;
        }
        (value, grad)
    }
}

/// Result of [`ground_state`]: Ω together with the shifted potential `V - e0`.
#[derive(Debug, Clone)]
pub struct ShiftedGroundState {
    pub ground: GroundState,
    pub potential: Potential,
    pub cutoff: usize,
}

fn try_ground_state(v: &Potential, cutoff: usize) -> Result<ShiftedGroundState> {
    let fiber = assemble_fiber(v, [0.0, 0.0], cutoff)?;
    let e0 = fiber.energies()[0];
    let basis = fiber.basis();
    let zero_mode = basis.index_of([0, 0]).expect("basis contains G = 0");
    let mut coefficients = fiber.eigenvector(0).to_vec();
    let average = coefficients[zero_mode];
    if average.norm() <= 1e-12 {
        return Err(Error::numerical("ground state", "bottom eigenvector has zero cell average"));
    }
    let phase = average.conj() / average.norm();
    coefficients.iter_mut().for_each(|c| *c *= phase);

    let grid = *v.grid();
    let n = grid.n();
    let mut bins = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (g, c) in basis.modes().iter().zip(&coefficients) {
        let b0 = g[0].rem_euclid(n as i64) as usize;
        let idx = if grid.dim() == 1 { b0 } else { b0 * n + g[1].rem_euclid(n as i64) as usize };
        bins[idx] += c;
    }
    let raw = spectral::synthesize(&grid, &bins, "Omega")?;
    if raw.min() <= 0.0 {
        return Err(Error::numerical(
            "ground state",
            format!("Ω has a nonpositive sample (min {:.3e}) at cutoff {cutoff}", raw.min()),
        ));
    }
    let peak = raw.max();
    let omega = raw.map("Omega", |w| w / peak)?;
    coefficients.iter_mut().for_each(|c| *c /= peak);

    let shifted = v.shifted(e0)?;
    let residual = operator_residual(&shifted, &omega)?;
    let ground = GroundState {
        a: omega.min(),
        b: omega.max(),
        omega,
        e0,
        residual: Some(residual),
        coefficients: basis.modes().iter().copied().zip(coefficients).collect(),
        reciprocal: grid.reciprocal(),
    };
    Ok(ShiftedGroundState {
        ground,
        potential: shifted,
        cutoff,
    })
}

/// `max |(-½Δ + V)f|` on the grid.
pub fn operator_residual(v: &Potential, f: &Field) -> Result<f64> {
    let lap = spectral::laplacian(f)?;
    Ok(lap
        .values()
        .iter()
        .zip(f.values())
        .zip(v.field().values())
        .map(|((l, w), p)| (-0.5 * l + p * w).abs())
        .fold(0.0, f64::max))
}

/// Shifts `v` so the bottom of the k = 0 fiber sits at zero and returns the
/// positive ground state. If positivity or the residual check fails at
/// `cutoff`, the cutoff is doubled once (capped at `n/2`).
pub fn ground_state(v: &Potential, cutoff: usize) -> Result<ShiftedGroundState> {
    let attempt = try_ground_state(v, cutoff).and_then(|gs| {
        match gs.ground.residual {
            Some(r) if r > GROUND_STATE_RESIDUAL_TOL => Err(Error::numerical(
                "ground state",
                format!("residual {r:.3e} exceeds {GROUND_STATE_RESIDUAL_TOL:e} at cutoff {cutoff}"),
            )),
            _ => Ok(gs),
        }
    });
    let cap = v.grid().n() / 2;
    match attempt {
        Ok(gs) => Ok(gs),
        Err(first) if 2 * cutoff <= cap => {
            let gs = try_ground_state(v, 2 * cutoff).map_err(|_| first)?;
            match gs.ground.residual {
                Some(r) if r > GROUND_STATE_RESIDUAL_TOL => Err(Error::numerical(
                    "ground state",
                    format!("residual {r:.3e} exceeds tolerance even at cutoff {}", 2 * cutoff),
                )),
                _ => Ok(gs),
            }
        }
        Err(e) => Err(e),
    }
}

/// `E_band(k)` for each 1-D quasimomentum in `ks`, in input order.
pub fn band(v: &Potential, band_index: usize, ks: &[f64], cutoff: usize) -> Result<Vec<(f64, f64)>> {
    let points: Vec<[f64; 2]> = ks.iter().map(|&k| [k, 0.0]).collect();
    let fibers = assemble_fibers(v, &points, cutoff)?;
    fibers
        .iter()
        .zip(ks)
        .map(|(f, &k)| {
            f.energies()
                .get(band_index)
                .map(|&e| (k, e))
                .ok_or_else(|| Error::argument(format!("band {band_index} exceeds fiber size {}", f.band_count())))
        })
        .collect()
}

/// Quadratic coefficient of the bottom band at k = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveMass {
    /// `c` in `E(k) - E(0) ≈ c k²`.
    pub curvature: f64,
    /// `max |ΔE - c k²| / max |ΔE|` over the fit window.
    pub residual: f64,
    pub k_fit: f64,
}

/// Least-squares fit of `E(k) - E(0) ≈ c k²` over `|k| <= k_fit`.
pub fn effective_mass(band0: &[(f64, f64)], k_fit: f64) -> Result<EffectiveMass> {
    let e_origin = band0
        .iter()
        .find(|(k, _)| *k == 0.0)
        .map(|&(_, e)| e)
        .ok_or_else(|| Error::argument("band samples must include k = 0"))?;
    let window: Vec<(f64, f64)> = band0
        .iter()
        .filter(|(k, _)| *k != 0.0 && k.abs() <= k_fit)
        .map(|&(k, e)| (k * k, e - e_origin))
        .collect();
    if window.len() < 2 {
        return Err(Error::argument(format!("fewer than two nonzero k samples within |k| <= {k_fit}")));
    }
    let curvature = window.iter().map(|(k2, de)| k2 * de).sum::<f64>() / window.iter().map(|(k2, _)| k2 * k2).sum::<f64>();
    let scale = window.iter().fold(0.0f64, |m, (_, de)| m.max(de.abs()));
    let misfit = window.iter().fold(0.0f64, |m, (k2, de)| m.max((de - curvature * k2).abs()));
    let residual = if scale > 0.0 { misfit / scale } else { f64::INFINITY };
    let fit = EffectiveMass {
        curvature,
        residual,
        k_fit,
    };
    if curvature <= 0.0 || residual > 0.05 {
        return Err(Error::PropertyViolation(format!(
            "bottom band minimum is not strictly quadratic: c = {curvature:.6e}, residual = {residual:.3e}"
        )));
    }
    Ok(fit)
}

/// Gap above the bottom of the spectrum: `E_1(0) - E_0(0)`, lowered by
/// `E_0(k) - E_0(0)` for each extra quasimomentum supplied.
pub fn spectral_gap(v: &Potential, cutoff: usize, extra_k: &[f64]) -> Result<f64> {
    let origin = assemble_fiber(v, [0.0, 0.0], cutoff)?;
    let e = origin.energies();
    let mut gap = e[1] - e[0];
    for (_, ek) in band(v, 0, extra_k, cutoff)? {
        gap = gap.min(ek - e[0]);
    }
    Ok(gap)
}
