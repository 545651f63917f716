//! Cole–Hopf solution pipeline: `ψ₀ → φ₀ = e^{-ψ₀} → φ(t) = e^{-tH}φ₀ → u = -∇φ/φ`.
//!
//! `H` is the shifted operator returned by
//! [`ground_state`](crate::schrodinger::ground_state), discretized on the
//! torus grid with the spectral Laplacian. The semigroup is applied exactly
//! in the eigenbasis of that matrix, so no time-integration error enters.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::schrodinger::{GroundState, Potential};
use crate::spectral::{self, Field, TorusGrid};

/// Bounded potential `ψ₀` of the initial velocity `u⁰ = ∇ψ₀`.
#[derive(Debug, Clone)]
pub struct InitialData {
    psi0: Field,
    c1: f64,
    c2: f64,
}

impl InitialData {
    pub fn new(psi0: Field) -> Result<Self> {
        let c1 = (-psi0.max()).exp();
        let c2 = (-psi0.min()).exp();
        if !(c1 > 0.0 && c2.is_finite()) {
            return Err(Error::argument("exp(-ψ₀) must stay within (0, ∞)"));
        }
        Ok(Self { psi0, c1, c2 })
    }

    /// Named built-in data: `zero`, `sine` (A sin x), `log-shift`
    /// (−log(2 + cos x)), `product` (A sin x cos y, 2-D) and `ground`
    /// (−log Ω, the stationary datum; needs `ground`).
    pub fn builtin(name: &str, amplitude: f64, grid: TorusGrid, ground: Option<&GroundState>) -> Result<Self> {
        let r = grid.reciprocal();
        let psi0 = match name {
            "zero" => Field::constant(grid, 0.0, "psi0")?,
            "sine" => Field::from_fn(grid, "psi0", |p| amplitude * (r * p[0]).sin())?,
            "log-shift" => Field::from_fn(grid, "psi0", |p| -(2.0 + (r * p[0]).cos()).ln())?,
            "product" => {
                if grid.dim() != 2 {
                    return Err(Error::argument("initial data 'product' needs a two-dimensional grid"));
                }
                Field::from_fn(grid, "psi0", |p| amplitude * (r * p[0]).sin() * (r * p[1]).cos())?
            }
            "ground" => {
                let gs = ground.ok_or_else(|| Error::argument("initial data 'ground' needs a ground state"))?;
                gs.omega().require_same_grid(&Field::constant(grid, 0.0, "psi0")?)?;
                gs.omega().map("psi0", |w| -w.ln())?
            }
            other => return Err(Error::argument(format!("unknown initial data '{other}'"))),
        };
        Self::new(psi0)
    }

    pub const BUILTIN_NAMES: [&'static str; 5] = ["zero", "sine", "log-shift", "product", "ground"];

    pub fn psi0(&self) -> &Field {
        &self.psi0
    }

    /// `min e^{-ψ₀}`.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// `max e^{-ψ₀}`.
    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn grid(&self) -> &TorusGrid {
        self.psi0.grid()
    }
}

/// Positive solution `φ(·, t)` of `∂φ/∂t = -Hφ`.
#[derive(Debug, Clone)]
pub struct ColeHopfState {
    phi: Field,
    t: f64,
}

impl ColeHopfState {
    pub fn new(phi: Field, t: f64) -> Result<Self> {
        if phi.min() <= 0.0 {
            return Err(Error::argument("φ must be strictly positive"));
        }
        if !(t >= 0.0) {
            return Err(Error::argument(format!("time must be nonnegative, got {t}")));
        }
        Ok(Self { phi, t })
    }

    pub fn phi(&self) -> &Field {
        &self.phi
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// One field per axis.
#[derive(Debug, Clone)]
pub struct VelocityField {
    components: Vec<Field>,
    t: f64,
}

impl VelocityField {
    pub fn new(components: Vec<Field>, t: f64) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::argument("velocity needs at least one component"))?;
        if components.len() != first.grid().dim() {
            return Err(Error::argument("velocity needs one component per axis"));
        }
        for c in &components[1..] {
            first.require_same_grid(c)?;
        }
        Ok(Self { components, t })
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &TorusGrid {
        self.components[0].grid()
    }
}

/// `φ₀ = e^{-ψ₀}` at `t = 0`.
pub fn lift(data: &InitialData) -> Result<ColeHopfState> {
    ColeHopfState::new(data.psi0.map("phi", |p| (-p).exp())?, 0.0)
}

/// Spectral second-difference matrix on `n` periodic nodes (circulant,
/// Nyquist symbol kept).
fn second_derivative_matrix(grid: &TorusGrid) -> Mat<f64> {
    let n = grid.n();
    let column: Vec<f64> = (0..n)
        .map(|d| {
            (0..n)
                .map(|q| {
                    let k = grid.wavenumber(q);
                    -k * k * (2.0 * std::f64::consts::PI * (q * d) as f64 / n as f64).cos()
                })
                .sum::<f64>()
                / n as f64
        })
        .collect();
    Mat::from_fn(n, n, |i, j| column[(i + n - j) % n])
}

/// Eigendecomposition of the discretized operator `-½Δ + V` on the torus.
/// Shared read-only by every propagation on the same grid.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: TorusGrid,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
}

impl Propagator {
    pub fn new(shifted: &Potential) -> Result<Self> {
        let grid = *shifted.grid();
        let n = grid.n();
        let size = grid.len();
        let d2 = second_derivative_matrix(&grid);
        let v = shifted.field().values();
        let h = match grid.dim() {
            1 => Mat::from_fn(size, size, |i, j| -0.5 * d2[(i, j)] + if i == j { v[i] } else { 0.0 }),
            _ => Mat::from_fn(size, size, |i, j| {
                let (i0, i1) = (i / n, i % n);
                let (j0, j1) = (j / n, j % n);
                let mut h = 0.0;
                if i1 == j1 {
                    h -= 0.5 * d2[(i0, j0)];
                }
                if i0 == j0 {
                    h -= 0.5 * d2[(i1, j1)];
                }
                if i == j {
                    h += v[i];
                }
                h
            }),
        };
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::numerical("propagator", format!("eigensolver failed (size {size}): {e:?}")))?;
        Ok(Self {
            grid,
            eigenvalues: eig.S().column_vector().iter().copied().collect(),
            eigenvectors: eig.U().to_owned(),
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Eigenvalues in ascending order.
    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut e = self.eigenvalues.clone();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Distance from the bottom eigenvalue to the next one.
    pub fn spectral_gap(&self) -> f64 {
        let e = self.sorted_eigenvalues();
        e[1] - e[0]
    }

    /// `e^{-t H} f` for an arbitrary sampled `f`.
    pub fn apply(&self, f: &Field, t: f64) -> Result<Field> {
        if *f.grid() != self.grid {
            return Err(Error::argument("field and propagator live on different grids"));
        }
        let values = f.values();
        let x = Mat::from_fn(values.len(), 1, |i, _| values[i]);
        let mut coeffs = self.eigenvectors.transpose() * &x;
        for (i, &lambda) in self.eigenvalues.iter().enumerate() {
            coeffs[(i, 0)] *= (-t * lambda).exp();
        }
        let y = &self.eigenvectors * &coeffs;
        Field::new(self.grid, (0..values.len()).map(|i| y[(i, 0)]).collect(), f.label().to_string())
    }
}

/// Advances `state` by `dt > 0`.
pub fn propagate(state: &ColeHopfState, dt: f64, propagator: &Propagator) -> Result<ColeHopfState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::argument(format!("time step must be positive, got {dt}")));
    }
    let phi = propagator.apply(&state.phi, dt)?;
    let min = phi.min();
    if min <= 0.0 {
        return Err(Error::numerical(
            "cole_hopf::propagate",
            format!("φ lost positivity (min {min:.3e}) at t = {}; grid under-resolved", state.t + dt),
        ));
    }
    Ok(ColeHopfState {
        phi: phi.relabel("phi"),
        t: state.t + dt,
    })
}

/// `φ(t)` for `t >= 0` from the initial state; `t = 0` returns the state itself.
pub fn evolve(initial: &ColeHopfState, t: f64, propagator: &Propagator) -> Result<ColeHopfState> {
    if t == 0.0 {
        return Ok(initial.clone());
    }
    propagate(initial, t, propagator)
}

/// `u = -∇φ/φ`.
pub fn velocity(state: &ColeHopfState) -> Result<VelocityField> {
    log_gradient(&state.phi, state.t)
}

fn log_gradient(f: &Field, t: f64) -> Result<VelocityField> {
    let components = spectral::gradient(f)?
        .iter()
        .enumerate()
        .map(|(axis, d)| d.zip_with(f, format!("u{}", axis + 1), |df, v| -df / v))
        .collect::<Result<Vec<_>>>()?;
    VelocityField::new(components, t)
}

/// Stationary field `u∞ = -∇Ω/Ω`.
pub fn stationary(gs: &GroundState) -> Result<VelocityField> {
    log_gradient(gs.omega(), f64::INFINITY)
}

/// `max_x |u(x) - v(x)|` (Euclidean norm over components).
pub fn sup_distance(u: &VelocityField, v: &VelocityField) -> Result<f64> {
    if u.grid() != v.grid() {
        return Err(Error::argument("velocity fields live on different grids"));
    }
    let len = u.grid().len();
    Ok((0..len)
        .map(|i| {
            u.components
                .iter()
                .zip(&v.components)
                .map(|(a, b)| (a.values()[i] - b.values()[i]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}

/// `∂₂u₁ - ∂₁u₂` on a 2-D grid.
pub fn curl(u: &VelocityField) -> Result<Field> {
    if u.grid().dim() != 2 {
        return Err(Error::argument("curl needs a two-dimensional velocity field"));
    }
    let d2u1 = spectral::derivative(&u.components[0], 1)?;
    let d1u2 = spectral::derivative(&u.components[1], 0)?;
    d2u1.zip_with(&d1u2, "curl", |a, b| a - b)
}

/// Two-sided bound `c₁a/b ≤ φ ≤ c₂b/a` implied by positivity preservation.
pub fn sandwich_bounds(data: &InitialData, gs: &GroundState) -> (f64, f64) {
    (data.c1 * gs.a() / gs.b(), data.c2 * gs.b() / gs.a())
}

/// `-[∇(φ/Ω)]·[Ω/φ]`, which equals `u - u∞`.
pub fn equilibrium_gap_field(state: &ColeHopfState, gs: &GroundState) -> Result<VelocityField> {
    let ratio = state.phi.zip_with(gs.omega(), "phi/Omega", |p, w| p / w)?;
    let components = spectral::gradient(&ratio)?
        .iter()
        .enumerate()
        .map(|(axis, d)| {
            let scaled = d.zip_with(gs.omega(), "tmp", |g, w| g * w)?;
            scaled.zip_with(&state.phi, format!("du{}", axis + 1), |g, p| -g / p)
        })
        .collect::<Result<Vec<_>>>()?;
    VelocityField::new(components, state.t)
}

/// Ground-state-transformed operator `Mf = -Δf - 2(∇Ω/Ω)·∇f`.
pub fn intrinsic_operator(f: &Field, gs: &GroundState) -> Result<Field> {
    let omega = gs.omega();
    f.require_same_grid(omega)?;
    let grad_f = spectral::gradient(f)?;
    let grad_w = spectral::gradient(omega)?;
    let lap = spectral::laplacian(f)?;
    let values = (0..f.grid().len())
        .map(|i| {
            let drift: f64 = grad_f.iter().zip(&grad_w).map(|(a, b)| a.values()[i] * b.values()[i]).sum();
            -lap.values()[i] - 2.0 * drift / omega.values()[i]
        })
        .collect();
    Field::new(*f.grid(), values, "Mf")
}

/// Divergence form `-Ω⁻² ∇·(Ω² ∇f)` of the same operator.
pub fn intrinsic_operator_divergence_form(f: &Field, gs: &GroundState) -> Result<Field> {
    let omega = gs.omega();
    f.require_same_grid(omega)?;
    let mut divergence = vec![0.0; f.grid().len()];
    for (axis, df) in spectral::gradient(f)?.iter().enumerate() {
        let flux = df.zip_with(omega, "flux", |g, w| g * w * w)?;
        let dflux = spectral::derivative(&flux, axis)?;
        divergence.iter_mut().zip(dflux.values()).for_each(|(d, v)| *d += v);
    }
    let values = divergence
        .iter()
        .zip(omega.values())
        .map(|(d, w)| -d / (w * w))
        .collect();
    Field::new(*f.grid(), values, "Mf")
}

/// `∫ |∇f|² Ω² dx`.
pub fn dirichlet_form(f: &Field, gs: &GroundState) -> Result<f64> {
    let omega = gs.omega();
    let mut density = vec![0.0; f.grid().len()];
    for df in spectral::gradient(f)? {
        density.iter_mut().zip(df.values()).for_each(|(d, g)| *d += g * g);
    }
    density.iter_mut().zip(omega.values()).for_each(|(d, w)| *d *= w * w);
    Ok(spectral::quadrature(&Field::new(*f.grid(), density, "density")?))
}

/// `(f, g)` in `L²(Ω² dx)`.
pub fn weighted_inner(f: &Field, g: &Field, gs: &GroundState) -> Result<f64> {
    let fg = f.zip_with(g, "fg", |a, b| a * b)?;
    let weighted = fg.zip_with(gs.omega(), "fgw", |p, w| p * w * w)?;
    Ok(spectral::quadrature(&weighted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schrodinger::ground_state;

    fn line(n: usize) -> TorusGrid {
        TorusGrid::line(n).unwrap()
    }

    #[test]
    fn lift_examples() {
        let g = line(64);
        let zero = lift(&InitialData::builtin("zero", 1.0, g, None).unwrap()).unwrap();
        assert!(zero.phi().values().iter().all(|&p| p == 1.0));

        let sine = InitialData::builtin("sine", 1.0, g, None).unwrap();
        assert!((sine.c1() - (-1.0f64).exp()).abs() <= 1e-15);
        assert!((sine.c2() - 1.0f64.exp()).abs() <= 1e-15);
        let phi = lift(&sine).unwrap();
        for i in 0..64 {
            let x = g.coordinate(i);
            assert!((phi.phi().values()[i] - (-x.sin()).exp()).abs() <= 1e-15);
        }

        let ls = lift(&InitialData::builtin("log-shift", 1.0, g, None).unwrap()).unwrap();
        for i in 0..64 {
            let x = g.coordinate(i);
            assert!((ls.phi().values()[i] - (2.0 + x.cos())).abs() <= 1e-14);
        }
    }

    #[test]
    fn unknown_initial_data() {
        assert!(InitialData::builtin("tanh", 1.0, line(16), None).is_err());
        assert!(InitialData::builtin("ground", 1.0, line(16), None).is_err());
        assert!(InitialData::builtin("product", 1.0, line(16), None).is_err());
    }

    #[test]
    fn free_heat_decay_of_single_mode() {
        let g = line(64);
        let v = Potential::zero(g).unwrap();
        let p = Propagator::new(&v).unwrap();
        let s0 = lift(&InitialData::builtin("log-shift", 1.0, g, None).unwrap()).unwrap();
        for &t in &[0.5, 1.0, 3.0] {
            let s = propagate(&s0, t, &p).unwrap();
            let err = (0..64)
                .map(|i| (s.phi().values()[i] - (2.0 + (-t / 2.0).exp() * g.coordinate(i).cos())).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-10, "t = {t}: {err}");
        }
    }

    #[test]
    fn propagate_rejects_bad_step() {
        let g = line(16);
        let p = Propagator::new(&Potential::zero(g).unwrap()).unwrap();
        let s0 = lift(&InitialData::builtin("zero", 1.0, g, None).unwrap()).unwrap();
        assert!(propagate(&s0, 0.0, &p).is_err());
        assert!(propagate(&s0, -1.0, &p).is_err());
    }

    #[test]
    fn velocity_examples() {
        let g = line(64);
        let constant = ColeHopfState::new(Field::constant(g, 3.0, "phi").unwrap(), 0.0).unwrap();
        assert!(velocity(&constant).unwrap().components()[0].max_abs() <= 1e-15);

        let phi = Field::from_fn(g, "phi", |p| 2.0 + p[0].cos()).unwrap();
        let u = velocity(&ColeHopfState::new(phi, 0.0).unwrap()).unwrap();
        for i in 0..64 {
            let x = g.coordinate(i);
            assert!((u.components()[0].values()[i] - x.sin() / (2.0 + x.cos())).abs() <= 1e-13);
        }
    }

    #[test]
    fn stationary_examples() {
        let g = line(64);
        let one = GroundState::from_samples(&Field::constant(g, 1.0, "w").unwrap()).unwrap();
        assert!(stationary(&one).unwrap().components()[0].max_abs() <= 1e-15);

        let w = Field::from_fn(g, "w", |p| 2.0 + p[0].cos()).unwrap();
        let u = stationary(&GroundState::from_samples(&w).unwrap()).unwrap();
        for i in 0..64 {
            let x = g.coordinate(i);
            assert!((u.components()[0].values()[i] - x.sin() / (2.0 + x.cos())).abs() <= 1e-13);
        }
    }

    #[test]
    fn stationary_is_scale_invariant() {
        let g = line(128);
        let w = Field::from_fn(g, "w", |p| (0.7 * p[0].cos()).exp() + 0.3).unwrap();
        let base = stationary(&GroundState::from_samples(&w).unwrap()).unwrap();
        // power-of-two rescaling is exact in floating point
        let w4 = w.map("w", |v| 4.0 * v).unwrap();
        let u4 = stationary(&GroundState::from_samples(&w4).unwrap()).unwrap();
        assert_eq!(base.components()[0].values(), u4.components()[0].values());
        let w5 = w.map("w", |v| 5.0 * v).unwrap();
        let u5 = stationary(&GroundState::from_samples(&w5).unwrap()).unwrap();
        assert!(sup_distance(&base, &u5).unwrap() <= 1e-13);
    }

    #[test]
    fn sup_distance_examples() {
        let g = line(64);
        let zero = VelocityField::new(vec![Field::constant(g, 0.0, "u").unwrap()], 0.0).unwrap();
        let sine = VelocityField::new(vec![Field::from_fn(g, "u", |p| p[0].sin()).unwrap()], 0.0).unwrap();
        assert_eq!(sup_distance(&sine, &sine).unwrap(), 0.0);
        assert!((sup_distance(&sine, &zero).unwrap() - 1.0).abs() <= 1e-12);
        let other = VelocityField::new(vec![Field::constant(line(32), 0.0, "u").unwrap()], 0.0).unwrap();
        assert!(matches!(sup_distance(&sine, &other), Err(Error::Argument(_))));
    }

    #[test]
    fn ground_state_is_stationary_under_semigroup() {
        let g = line(128);
        let gs = ground_state(&Potential::cosine(g, 1.0).unwrap(), 32).unwrap();
        let p = Propagator::new(&gs.potential).unwrap();
        let s0 = ColeHopfState::new(gs.ground.omega().clone(), 0.0).unwrap();
        for &t in &[1.0, 10.0] {
            let s = propagate(&s0, t, &p).unwrap();
            let err = s.phi().values().iter().zip(gs.ground.omega().values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-8, "t = {t}: {err}");
        }
        let u = velocity(&s0).unwrap();
        assert!(sup_distance(&u, &stationary(&gs.ground).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn curl_needs_two_dimensions() {
        let u = VelocityField::new(vec![Field::constant(line(16), 0.0, "u").unwrap()], 0.0).unwrap();
        assert!(curl(&u).is_err());
    }
}
