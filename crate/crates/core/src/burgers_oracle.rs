//! Direct pseudo-spectral solver for `∂u/∂t + ∇(|u|²/2) = ½Δu + ∇V` on the
//! torus. Diffusion is integrated exactly through an integrating factor;
//! the gradient nonlinearity and the forcing advance with the explicit
//! midpoint rule, dealiased by the two-thirds rule.
//!
//! The solver never touches the linear semigroup of [`crate::cole_hopf`]; the
//! two paths share only the initial velocity `u⁰ = -∇φ₀/φ₀`.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::cole_hopf::{self, InitialData, Propagator, VelocityField};
use crate::error::{Error, Result};
use crate::schrodinger::{self, Potential};
use crate::spectral::{Field, TorusGrid};
use crate::text::number;

pub const SCHEME: &str = "imex-integrating-factor";

/// Advective CFL factor: every step must satisfy `dt ≤ CFL · h / max|u|`.
pub const CFL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub dt: f64,
    pub t_end: f64,
    pub grid: TorusGrid,
}

impl OracleConfig {
    pub fn new(dt: f64, t_end: f64, grid: TorusGrid) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::argument(format!("oracle dt must be positive, got {dt}")));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::argument(format!("oracle end time must be nonnegative, got {t_end}")));
        }
        Ok(Self { dt, t_end, grid })
    }

    pub fn scheme(&self) -> &'static str {
        SCHEME
    }

    /// Number of steps; the step is shortened to `t_end / steps` so the run
    /// lands exactly on `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

struct Transforms {
    grid: TorusGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `iκ` per axis with the Nyquist bin zeroed.
    ikappa: Vec<Vec<Complex64>>,
    /// `-½|κ|²`.
    diffusion: Vec<f64>,
    /// 1 inside the retained two-thirds band, 0 outside.
    dealias: Vec<f64>,
}

impl Transforms {
    fn new(grid: TorusGrid) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let dim = grid.dim();
        let bins = |idx: usize| -> [usize; 2] {
            if dim == 1 {
                [idx, 0]
            } else {
                [idx / n, idx % n]
            }
        };
        let cutoff = n as i64 / 3;
        let len = grid.len();
        let ikappa = (0..dim)
            .map(|axis| {
                (0..len)
                    .map(|idx| {
                        let q = bins(idx)[axis];
                        if grid.is_nyquist(q) {
                            Complex64::new(0.0, 0.0)
                        } else {
                            Complex64::new(0.0, grid.wavenumber(q))
                        }
                    })
                    .collect()
            })
            .collect();
        let diffusion = (0..len)
            .map(|idx| {
                let q = bins(idx);
                let k0 = grid.wavenumber(q[0]);
                let k1 = if dim == 2 { grid.wavenumber(q[1]) } else { 0.0 };
                -0.5 * (k0 * k0 + k1 * k1)
            })
            .collect();
        let dealias = (0..len)
            .map(|idx| {
                let q = bins(idx);
                let keep = (0..dim).all(|axis| grid.signed_mode(q[axis]).abs() <= cutoff);
                if keep {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            ikappa,
            diffusion,
            dealias,
        }
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        if self.grid.dim() == 1 {
            fft.process(data);
            return;
        }
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

    fn to_spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut data, &self.forward);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    fn to_values(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut data = spectrum.to_vec();
        self.run(&mut data, &self.inverse);
        data.iter().map(|c| c.re).collect()
    }
}

struct Stepper<'a> {
    tf: &'a Transforms,
    forcing: Vec<f64>,
}

impl Stepper<'_> {
    /// Spectrum of `∇(V - |u|²/2)` per axis, dealiased.
    fn nonlinear(&self, u_hat: &[Vec<Complex64>]) -> (Vec<Vec<Complex64>>, f64) {
        let u: Vec<Vec<f64>> = u_hat.iter().map(|c| self.tf.to_values(c)).collect();
        let len = self.forcing.len();
        let mut speed = 0.0f64;
        let q: Vec<f64> = (0..len)
            .map(|i| {
                let sq: f64 = u.iter().map(|c| c[i] * c[i]).sum();
                speed = speed.max(sq.sqrt());
                self.forcing[i] - 0.5 * sq
            })
            .collect();
        let q_hat = self.tf.to_spectrum(&q);
        let grad = self
            .tf
            .ikappa
            .iter()
            .map(|ik| {
                q_hat
                    .iter()
                    .zip(ik)
                    .zip(&self.tf.dealias)
                    .map(|((q, k), d)| q * k * *d)
                    .collect()
            })
            .collect();
        (grad, speed)
    }
}

fn check_cfl(speed: f64, dt: f64, h: f64, step: usize) -> Result<()> {
    if !speed.is_finite() {
        return Err(Error::numerical("burgers_oracle", format!("non-finite velocity at step {step}")));
    }
    if speed > 0.0 && dt > CFL * h / speed {
        return Err(Error::numerical(
            "burgers_oracle",
            format!(
                "CFL violated at step {step}: dt = {dt:.3e} exceeds {CFL}·h/max|u| = {:.3e}",
                CFL * h / speed
            ),
        ));
    }
    Ok(())
}

/// Velocity at `cfg.t_end` from `u⁰ = -∇φ₀/φ₀`, `φ₀ = e^{-ψ₀}`.
pub fn solve_direct(psi0: &InitialData, v: &Potential, cfg: &OracleConfig) -> Result<VelocityField> {
    Ok(solve_direct_snapshots(psi0, v, cfg, &[cfg.t_end])?.pop().expect("one snapshot requested"))
}

/// Velocity snapshots at each time in `times` (nondecreasing, within `[0, t_end]`).
pub fn solve_direct_snapshots(
    psi0: &InitialData,
    v: &Potential,
    cfg: &OracleConfig,
    times: &[f64],
) -> Result<Vec<VelocityField>> {
    let grid = cfg.grid;
    if *psi0.grid() != grid || *v.grid() != grid {
        return Err(Error::argument("initial data, potential and oracle config must share one grid"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < 0.0 || t > cfg.t_end) {
        return Err(Error::argument("snapshot times must be nondecreasing within [0, t_end]"));
    }
    let u0 = cole_hopf::velocity(&cole_hopf::lift(psi0)?)?;
    let steps = cfg.steps();
    let dt = if steps == 0 { 0.0 } else { cfg.t_end / steps as f64 };
    let tf = Transforms::new(grid);
    let stepper = Stepper {
        tf: &tf,
        forcing: v.field().values().to_vec(),
    };
    let half: Vec<f64> = tf.diffusion.iter().map(|&s| (0.5 * dt * s).exp()).collect();
    let full: Vec<f64> = tf.diffusion.iter().map(|&s| (dt * s).exp()).collect();
    let h = grid.spacing();

    let mut u_hat: Vec<Vec<Complex64>> = u0.components().iter().map(|c| tf.to_spectrum(c.values())).collect();
    let mut out = Vec::with_capacity(times.len());
    let mut pending = times.iter().peekable();
    let emit = |u_hat: &[Vec<Complex64>], t: f64| -> Result<VelocityField> {
        let components = u_hat
            .iter()
            .enumerate()
            .map(|(axis, c)| Field::new(grid, tf.to_values(c), format!("u{}", axis + 1)))
            .collect::<Result<Vec<_>>>()?;
        VelocityField::new(components, t)
    };
    while let Some(&&t) = pending.peek() {
        if t == 0.0 {
            out.push(u0.clone());
            pending.next();
        } else {
            break;
        }
    }
    for step in 0..steps {
        let (k1, speed) = stepper.nonlinear(&u_hat);
        check_cfl(speed, dt, h, step)?;
        let mid: Vec<Vec<Complex64>> = u_hat
            .iter()
            .zip(&k1)
            .map(|(u, k)| {
                u.iter()
                    .zip(k)
                    .zip(&half)
                    .map(|((u, k), e)| (u + 0.5 * dt * k) * *e)
                    .collect()
            })
            .collect();
        let (k2, _) = stepper.nonlinear(&mid);
        for (u, k) in u_hat.iter_mut().zip(&k2) {
            for ((u, k), (eh, ef)) in u.iter_mut().zip(k).zip(half.iter().zip(&full)) {
                *u = *u * *ef + dt * *eh * k;
            }
        }
        if u_hat.iter().flatten().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::numerical("burgers_oracle", format!("NaN detected after step {step}")));
        }
        let now = (step + 1) as f64 * dt;
        while let Some(&&t) = pending.peek() {
            if t <= now + 1e-12 * cfg.t_end.max(1.0) {
                out.push(emit(&u_hat, t)?);
                pending.next();
            } else {
                break;
            }
        }
    }
    for &t in pending {
        out.push(emit(&u_hat, t)?);
    }
    Ok(out)
}

/// Writes snapshots as CSV with columns `x[,y],u1[,u2],t`.
pub fn write_snapshots_csv(mut w: impl Write, snapshots: &[VelocityField]) -> std::io::Result<()> {
    let Some(first) = snapshots.first() else {
        return Ok(());
    };
    let dim = first.grid().dim();
    if dim == 1 {
        writeln!(w, "x,u1,t")?;
    } else {
        writeln!(w, "x,y,u1,u2,t")?;
    }
    for u in snapshots {
        let grid = u.grid();
        for idx in 0..grid.len() {
            let p = grid.point(idx);
            let c = u.components();
            if dim == 1 {
                writeln!(w, "{},{},{}", number(p[0]), number(c[0].values()[idx]), number(u.t()))?;
            } else {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    number(p[0]),
                    number(p[1]),
                    number(c[0].values()[idx]),
                    number(c[1].values()[idx]),
                    number(u.t())
                )?;
            }
        }
    }
    Ok(())
}

/// One refinement level of [`convergence_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub dt: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub t_end: f64,
    pub rows: Vec<ConvergenceRow>,
}

/// Gaps below this are treated as converged and exempt from the monotonicity check.
pub const GAP_FLOOR: f64 = 1e-10;

/// Relative increase tolerated between successive refinement levels.
pub const MONOTONE_ALLOWANCE: f64 = 0.2;

impl ConvergenceTable {
    /// Property violation if a gap grows by more than 20 % over the previous
    /// level while still above [`GAP_FLOOR`].
    pub fn check_monotone(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if w[1].gap > GAP_FLOOR && w[1].gap > (1.0 + MONOTONE_ALLOWANCE) * w[0].gap {
                return Err(Error::PropertyViolation(format!(
                    "gap grew from {:.3e} (n = {}, dt = {}) to {:.3e} (n = {}, dt = {})",
                    w[0].gap, w[0].n, w[0].dt, w[1].gap, w[1].n, w[1].dt
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "n,dt,t,gap")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.n, number(r.dt), number(self.t_end), number(r.gap))?;
        }
        Ok(())
    }
}

/// Sup-norm gap between the direct solver and the Cole–Hopf path at `t_end`
/// for each `(grids[i], dts[i])`, followed by [`ConvergenceTable::check_monotone`].
/// Data are rebuilt on every grid by the supplied constructors.
pub fn convergence_study(
    psi0: &dyn Fn(TorusGrid) -> Result<InitialData>,
    potential: &dyn Fn(TorusGrid) -> Result<Potential>,
    grids: &[TorusGrid],
    dts: &[f64],
    t_end: f64,
) -> Result<ConvergenceTable> {
    let table = convergence_table(psi0, potential, grids, dts, t_end)?;
    table.check_monotone()?;
    Ok(table)
}

/// As [`convergence_study`] without the monotonicity check.
pub fn convergence_table(
    psi0: &dyn Fn(TorusGrid) -> Result<InitialData>,
    potential: &dyn Fn(TorusGrid) -> Result<Potential>,
    grids: &[TorusGrid],
    dts: &[f64],
    t_end: f64,
) -> Result<ConvergenceTable> {
    if grids.is_empty() || grids.len() != dts.len() {
        return Err(Error::argument("grids and dts must be nonempty and of equal length"));
    }
    let mut rows = Vec::with_capacity(grids.len());
    for (&grid, &dt) in grids.iter().zip(dts) {
        let data = psi0(grid)?;
        let v = potential(grid)?;
        let shifted = schrodinger::ground_state(&v, schrodinger::default_cutoff(grid.dim()).min(grid.n() / 2))?;
        let direct = solve_direct(&data, &shifted.potential, &OracleConfig::new(dt, t_end, grid)?)?;
        let reference = cole_hopf_velocity(&data, &shifted.potential, t_end)?;
        rows.push(ConvergenceRow {
            n: grid.n(),
            dt,
            gap: cole_hopf::sup_distance(&direct, &reference)?,
        });
    }
    Ok(ConvergenceTable { t_end, rows })
}

/// Cole–Hopf velocity at `t` for the shifted potential.
pub fn cole_hopf_velocity(data: &InitialData, shifted: &Potential, t: f64) -> Result<VelocityField> {
    let propagator = Propagator::new(shifted)?;
    let phi = cole_hopf::evolve(&cole_hopf::lift(data)?, t, &propagator)?;
    cole_hopf::velocity(&phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> TorusGrid {
        TorusGrid::line(n).unwrap()
    }

    #[test]
    fn config_validation_and_steps() {
        assert!(OracleConfig::new(0.0, 1.0, line(64)).is_err());
        assert!(OracleConfig::new(1e-3, -1.0, line(64)).is_err());
        let cfg = OracleConfig::new(1e-3, 1.0, line(64)).unwrap();
        assert_eq!(cfg.steps(), 1000);
        assert_eq!(cfg.scheme(), "imex-integrating-factor");
        assert_eq!(OracleConfig::new(0.3, 1.0, line(64)).unwrap().steps(), 4);
    }

    #[test]
    fn rest_state_stays_at_rest() {
        let g = line(64);
        let data = InitialData::builtin("zero", 0.0, g, None).unwrap();
        let v = Potential::zero(g).unwrap();
        let u = solve_direct(&data, &v, &OracleConfig::new(1e-2, 3.0, g).unwrap()).unwrap();
        assert_eq!(u.components()[0].max_abs(), 0.0);
    }

    #[test]
    fn single_mode_free_decay_matches_heat_flow_at_small_amplitude() {
        // u = ε cos x solves the linearized problem; the quadratic term is O(ε²).
        let g = line(64);
        let eps = 1e-6;
        let data = InitialData::new(Field::from_fn(g, "psi0", |p| eps * p[0].sin()).unwrap()).unwrap();
        let v = Potential::zero(g).unwrap();
        let u = solve_direct(&data, &v, &OracleConfig::new(1e-3, 1.0, g).unwrap()).unwrap();
        let decay = (-0.5f64).exp();
        let err = (0..64)
            .map(|j| (u.components()[0].values()[j] - eps * decay * g.coordinate(j).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-11, "err {err:e}");
    }

    #[test]
    fn cfl_violation_aborts() {
        let g = line(64);
        let data = InitialData::builtin("sine", 20.0, g, None).unwrap();
        let v = Potential::zero(g).unwrap();
        let err = solve_direct(&data, &v, &OracleConfig::new(0.1, 1.0, g).unwrap()).unwrap_err();
        assert!(err.to_string().contains("CFL violated at step 0"), "{err}");
    }

    #[test]
    fn zero_time_gap_is_exactly_zero() {
        let g = line(64);
        let data = InitialData::builtin("sine", 1.0, g, None).unwrap();
        let v = Potential::cosine(g, 1.0).unwrap();
        let shifted = schrodinger::ground_state(&v, 16).unwrap();
        let direct = solve_direct(&data, &shifted.potential, &OracleConfig::new(1e-3, 0.0, g).unwrap()).unwrap();
        let reference = cole_hopf_velocity(&data, &shifted.potential, 0.0).unwrap();
        assert_eq!(cole_hopf::sup_distance(&direct, &reference).unwrap(), 0.0);
    }

    #[test]
    fn snapshots_in_order_and_csv_header() {
        let g = line(16);
        let data = InitialData::builtin("sine", 0.5, g, None).unwrap();
        let v = Potential::zero(g).unwrap();
        let cfg = OracleConfig::new(1e-2, 0.5, g).unwrap();
        let snaps = solve_direct_snapshots(&data, &v, &cfg, &[0.0, 0.25, 0.5]).unwrap();
        assert_eq!(snaps.iter().map(|s| s.t()).collect::<Vec<_>>(), vec![0.0, 0.25, 0.5]);
        let mut buf = Vec::new();
        write_snapshots_csv(&mut buf, &snaps).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,u1,t\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 16);
        assert!(solve_direct_snapshots(&data, &v, &cfg, &[0.3, 0.2]).is_err());
    }

    #[test]
    fn monotone_check_honours_allowance_and_floor() {
        let row = |gap| ConvergenceRow { n: 8, dt: 0.1, gap };
        let ok = ConvergenceTable {
            t_end: 1.0,
            rows: vec![row(1e-3), row(1.1e-3), row(1e-5)],
        };
        assert!(ok.check_monotone().is_ok());
        let bad = ConvergenceTable {
            t_end: 1.0,
            rows: vec![row(1e-3), row(2e-3)],
        };
        assert!(matches!(bad.check_monotone(), Err(Error::PropertyViolation(_))));
        let floor = ConvergenceTable {
            t_end: 1.0,
            rows: vec![row(1e-14), row(5e-14)],
        };
        assert!(floor.check_monotone().is_ok());
    }
}
