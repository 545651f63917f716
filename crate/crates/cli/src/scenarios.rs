//! Scenario runners. Each one computes everything in memory, fills a
//! [`RunReport`] and returns the files to write.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use burgers_core::burgers_oracle::{convergence_table, solve_direct_snapshots, write_snapshots_csv, OracleConfig};
use burgers_core::cole_hopf::{
    self, curl, dirichlet_form, intrinsic_operator, intrinsic_operator_divergence_form, lift, sandwich_bounds,
    stationary, sup_distance, velocity, weighted_inner, ColeHopfState, InitialData, Propagator, VelocityField,
};
use burgers_core::fit;
use burgers_core::intrinsic_kernel::{
    fit_gaussian_bound, integral_diagnostic, line_heat_grad_sup, line_heat_phi, pointwise_diagnostic, BlochKernel,
    BoundScan, KernelSamples, LineHeatProfile,
};
use burgers_core::schrodinger::{
    band, default_cutoff, effective_mass, ground_state, Potential, ShiftedGroundState, GROUND_STATE_RESIDUAL_TOL,
};
use burgers_core::spectral::{Field, TorusGrid};
use burgers_core::text::number as number_text;
use burgers_core::Error as CoreError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{Scenario, ScenarioConfig};
use crate::fit::fit_exponent_reader;
use crate::output::Outputs;
use crate::report::{number, numbers, RunReport};

/// A failure that prevents the scenario from finishing.
#[derive(Debug)]
pub struct RunError {
    pub scenario: Scenario,
    pub message: String,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "scenario {}: {}", self.scenario, self.message)
    }
}

impl std::error::Error for RunError {}

type Run<T> = Result<T, RunError>;

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    report: RunReport,
    out: Outputs,
}

impl Ctx<'_> {
    fn fail(&self, step: &str, e: impl std::fmt::Display) -> RunError {
        RunError {
            scenario: self.cfg.scenario,
            message: format!("{step}: {e}"),
        }
    }

    fn file(&mut self, suffix: &str, contents: Vec<u8>) -> String {
        let name = format!("{}_{suffix}.csv", self.cfg.scenario);
        self.out.add(name.clone(), contents);
        name
    }
}

/// Runs the configured scenario.
pub fn run(cfg: &ScenarioConfig) -> Run<(RunReport, Outputs)> {
    let start = Instant::now();
    let mut ctx = Ctx {
        cfg,
        report: RunReport::new(cfg.clone()),
        out: Outputs::default(),
    };
    match cfg.scenario {
        Scenario::Groundstate => groundstate(&mut ctx)?,
        Scenario::Solve => solve(&mut ctx)?,
        Scenario::Compare => compare(&mut ctx)?,
        Scenario::KernelDecay => kernel_decay(&mut ctx)?,
        Scenario::Band => band_scan(&mut ctx)?,
        Scenario::Counterexample => counterexample(&mut ctx)?,
    }
    ctx.report.files = ctx.out.names();
    ctx.report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok((ctx.report, ctx.out))
}

fn potential(ctx: &Ctx, grid: TorusGrid) -> Run<Potential> {
    Potential::builtin(&ctx.cfg.potential.name, ctx.cfg.potential.amplitude, grid).map_err(|e| ctx.fail("potential", e))
}

fn shifted_ground(ctx: &Ctx) -> Run<ShiftedGroundState> {
    let v = potential(ctx, ctx.cfg.grid.torus())?;
    ground_state(&v, ctx.cfg.grid.cutoff).map_err(|e| ctx.fail("ground state", e))
}

fn initial_data(ctx: &Ctx, grid: TorusGrid, gs: &ShiftedGroundState) -> Run<InitialData> {
    InitialData::builtin(&ctx.cfg.psi0.name, ctx.cfg.psi0.amplitude, grid, Some(&gs.ground))
        .map_err(|e| ctx.fail("initial data", e))
}

fn header(dim: usize, columns: &str) -> String {
    if dim == 1 {
        format!("x,{columns}\n")
    } else {
        format!("x,y,{columns}\n")
    }
}

fn coords(grid: &TorusGrid, idx: usize) -> String {
    let p = grid.point(idx);
    if grid.dim() == 1 {
        number_text(p[0])
    } else {
        row(&[p[0], p[1]])
    }
}

/// Comma-joined CSV fields.
fn row(values: &[f64]) -> String {
    values.iter().map(|&v| number_text(v)).collect::<Vec<_>>().join(",")
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn groundstate(ctx: &mut Ctx) -> Run<()> {
    let gs = shifted_ground(ctx)?;
    let grid = *gs.ground.omega().grid();
    let prop = Propagator::new(&gs.potential).map_err(|e| ctx.fail("propagator", e))?;
    let u_inf = stationary(&gs.ground).map_err(|e| ctx.fail("stationary field", e))?;

    let mut csv = header(grid.dim(), if grid.dim() == 1 { "omega,u1" } else { "omega,u1,u2" });
    let omega = gs.ground.omega().values();
    for idx in 0..grid.len() {
        let mut fields = vec![omega[idx]];
        fields.extend(u_inf.components().iter().map(|c| c.values()[idx]));
        writeln!(csv, "{},{}", coords(&grid, idx), row(&fields)).unwrap();
    }
    let name = ctx.file("omega", csv.into_bytes());

    let state = ColeHopfState::new(gs.ground.omega().clone(), 0.0).map_err(|e| ctx.fail("Ω state", e))?;
    let mut drift = Vec::new();
    for &t in &ctx.cfg.times {
        let moved = cole_hopf::evolve(&state, t, &prop).map_err(|e| ctx.fail("e^{-tH}Ω", e))?;
        let d = moved
            .phi()
            .values()
            .iter()
            .zip(omega)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        drift.push(d);
    }
    let residual = gs.ground.residual().unwrap_or(f64::NAN);
    let r = &mut ctx.report;
    r.metric("omega_csv", name);
    r.metric("e0", number(gs.ground.e0()));
    r.metric("a", number(gs.ground.a()));
    r.metric("b", number(gs.ground.b()));
    r.metric("residual", number(residual));
    r.metric("spectral_gap", number(prop.spectral_gap()));
    r.metric("cutoff", gs.cutoff);
    r.metric("stationarity_drift", numbers(&drift));
    r.assert(
        "ground-state residual",
        None,
        residual <= GROUND_STATE_RESIDUAL_TOL,
        format!("max |HΩ| = {residual:.3e} (tol {GROUND_STATE_RESIDUAL_TOL:e})"),
    );
    r.assert(
        "ground-state positivity",
        None,
        gs.ground.a() > 0.0,
        format!("a = {:.6e}, b = {:.6e}", gs.ground.a(), gs.ground.b()),
    );
    let worst = drift.iter().copied().fold(0.0, f64::max);
    r.assert(
        "stationarity of Ω",
        Some(7),
        worst <= 1e-8,
        format!("sup|e^(-tH)Ω - Ω| at t = {:?}: {} (tol 1e-8)", ctx.cfg.times, sci(&drift)),
    );
    Ok(())
}

/// Band-limited test function with seeded random Fourier coefficients.
fn random_band_limited(grid: TorusGrid, rng: &mut ChaCha8Rng) -> Field {
    let m = 8.min(grid.n() / 4) as i64;
    let r = grid.reciprocal();
    let mut modes = Vec::new();
    let second = if grid.dim() == 1 { 0..=0 } else { -m..=m };
    for m1 in 0..=m {
        for m2 in second.clone() {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            modes.push((m1 as f64 * r, m2 as f64 * r, a, b));
        }
    }
    Field::from_fn(grid, "f", |p| {
        modes
            .iter()
            .map(|&(k1, k2, a, b)| {
                let phase = k1 * p[0] + k2 * p[1];
                a * phase.cos() + b * phase.sin()
            })
            .sum()
    })
    .expect("finite test function")
}

fn solve(ctx: &mut Ctx) -> Run<()> {
    let gs = shifted_ground(ctx)?;
    let grid = *gs.ground.omega().grid();
    let data = initial_data(ctx, grid, &gs)?;
    let prop = Propagator::new(&gs.potential).map_err(|e| ctx.fail("propagator", e))?;
    let phi0 = lift(&data).map_err(|e| ctx.fail("lift", e))?;
    let u_inf = stationary(&gs.ground).map_err(|e| ctx.fail("stationary field", e))?;
    let (lo, hi) = sandwich_bounds(&data, &gs.ground);

    let times = ctx.cfg.times.clone();
    let mut snapshots: Vec<VelocityField> = Vec::new();
    let mut dist = Vec::new();
    let mut curls = Vec::new();
    let mut margin = f64::INFINITY;
    let mut table = String::from("t,sup_distance,phi_min,phi_max,sandwich_lower,sandwich_upper\n");
    for &t in &times {
        let phi = cole_hopf::evolve(&phi0, t, &prop).map_err(|e| ctx.fail("propagate", e))?;
        let u = velocity(&phi).map_err(|e| ctx.fail("velocity", e))?;
        let d = sup_distance(&u, &u_inf).map_err(|e| ctx.fail("distance", e))?;
        let (pmin, pmax) = (phi.phi().min(), phi.phi().max());
        margin = margin.min(pmin - lo).min(hi - pmax);
        writeln!(table, "{}", row(&[t, d, pmin, pmax, lo, hi])).unwrap();
        if grid.dim() == 2 {
            curls.push(curl(&u).map_err(|e| ctx.fail("curl", e))?.max_abs());
        }
        dist.push(d);
        snapshots.push(u);
    }
    let mut velocity_csv = Vec::new();
    write_snapshots_csv(&mut velocity_csv, &snapshots).expect("writing to memory");
    let velocity_name = ctx.file("velocity", velocity_csv);
    let distance_name = ctx.file("distance", table.into_bytes());

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let mut worst_form: f64 = 0.0;
    let mut worst_div: f64 = 0.0;
    for _ in 0..20 {
        let f = random_band_limited(grid, &mut rng);
        let identities = (|| -> Result<(f64, f64), CoreError> {
            let mf = intrinsic_operator(&f, &gs.ground)?;
            let md = intrinsic_operator_divergence_form(&f, &gs.ground)?;
            let form = weighted_inner(&f, &mf, &gs.ground)?;
            let energy = dirichlet_form(&f, &gs.ground)?;
            let scale = mf.max_abs().max(1.0);
            let div = mf.values().iter().zip(md.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok(((form - energy).abs() / energy.max(1.0), div / scale))
        })()
        .map_err(|e| ctx.fail("operator identities", e))?;
        worst_form = worst_form.max(identities.0);
        worst_div = worst_div.max(identities.1);
    }

    let gap = prop.spectral_gap();
    let r = &mut ctx.report;
    r.metric("velocity_csv", velocity_name);
    r.metric("distance_csv", distance_name);
    r.metric("spectral_gap", number(gap));
    r.metric("sup_distance", numbers(&dist));
    r.metric("sandwich", json!({ "lower": number(lo), "upper": number(hi), "margin": number(margin) }));
    r.metric("quadratic_form_error", number(worst_form));
    r.metric("divergence_form_error", number(worst_div));
    r.assert(
        "sandwich bound",
        Some(7),
        margin >= -1e-10,
        format!("smallest margin {margin:.3e} to [{lo:.6}, {hi:.6}] (slack 1e-10)"),
    );
    if times.len() >= 2 {
        let monotone = dist.windows(2).all(|w| w[1] < w[0]);
        match fit::exponential(&times, &dist) {
            Ok(line) => {
                let rate = -line.slope;
                r.metric("fitted_rate", number(rate));
                r.assert(
                    "exponential convergence at the spectral gap",
                    Some(6),
                    monotone && (rate / gap - 1.0).abs() <= 0.05,
                    format!("distances {}, fitted rate {rate:.5}, gap {gap:.5}, monotone {monotone}", sci(&dist)),
                );
            }
            Err(e) => r.assert(
                "exponential convergence at the spectral gap",
                Some(6),
                false,
                format!("no exponential fit: {e}"),
            ),
        }
    }
    r.assert(
        "quadratic-form identity",
        Some(9),
        worst_form <= 1e-8,
        format!("max relative error {worst_form:.3e} over 20 seeded test functions (tol 1e-8)"),
    );
    r.assert(
        "divergence-form identity",
        Some(9),
        worst_div <= 1e-8,
        format!("max relative error {worst_div:.3e} over 20 seeded test functions (tol 1e-8)"),
    );
    if grid.dim() == 2 {
        let worst = curls.iter().copied().fold(0.0, f64::max);
        r.metric("curl", numbers(&curls));
        r.assert("curl-free velocity", Some(9), worst <= 1e-8, format!("max |curl u| = {worst:.3e} (tol 1e-8)"));
    }
    Ok(())
}

fn compare(ctx: &mut Ctx) -> Run<()> {
    let cfg = ctx.cfg;
    let base = cfg.grid.torus();
    let levels = cfg.compare.levels;
    let grids: Vec<TorusGrid> = (0..levels)
        .map(|j| TorusGrid::new(base.dim(), base.n() << j, base.period()).expect("validated grid"))
        .collect();
    let dts: Vec<f64> = (0..levels).map(|j| cfg.compare.dt / (1u64 << j) as f64).collect();
    let t_end = *cfg.times.last().expect("validated nonempty");

    let make_potential = |g: TorusGrid| Potential::builtin(&cfg.potential.name, cfg.potential.amplitude, g);
    let make_data = |g: TorusGrid| {
        let gs = ground_state(&make_potential(g)?, default_cutoff(g.dim()).min(g.n() / 2))?;
        InitialData::builtin(&cfg.psi0.name, cfg.psi0.amplitude, g, Some(&gs.ground))
    };
    let table = convergence_table(&make_data, &make_potential, &grids, &dts, t_end)
        .map_err(|e| ctx.fail("convergence study", e))?;

    let gs = ground_state(&potential(ctx, base)?, default_cutoff(base.dim()).min(base.n() / 2))
        .map_err(|e| ctx.fail("ground state", e))?;
    let data = initial_data(ctx, base, &gs)?;
    let oracle_cfg = OracleConfig::new(dts[0], t_end, base).map_err(|e| ctx.fail("oracle config", e))?;
    let snaps = solve_direct_snapshots(&data, &gs.potential, &oracle_cfg, &cfg.times)
        .map_err(|e| ctx.fail("direct solver", e))?;
    let prop = Propagator::new(&gs.potential).map_err(|e| ctx.fail("propagator", e))?;
    let phi0 = lift(&data).map_err(|e| ctx.fail("lift", e))?;
    let mut gaps_csv = String::from("t,gap\n");
    let mut gaps = Vec::new();
    for u in &snaps {
        let ch = cole_hopf::evolve(&phi0, u.t(), &prop)
            .and_then(|phi| velocity(&phi))
            .and_then(|v| sup_distance(u, &v))
            .map_err(|e| ctx.fail("Cole–Hopf comparator", e))?;
        writeln!(gaps_csv, "{}", row(&[u.t(), ch])).unwrap();
        gaps.push(ch);
    }
    let curls: Vec<f64> = if base.dim() == 2 {
        snaps
            .iter()
            .map(|u| curl(u).map(|c| c.max_abs()))
            .collect::<Result<_, _>>()
            .map_err(|e| ctx.fail("curl", e))?
    } else {
        Vec::new()
    };

    let mut conv = Vec::new();
    table.write_csv(&mut conv).expect("writing to memory");
    let conv_name = ctx.file("convergence", conv);
    let mut oracle = Vec::new();
    write_snapshots_csv(&mut oracle, &snaps).expect("writing to memory");
    let oracle_name = ctx.file("oracle", oracle);
    let gaps_name = ctx.file("gaps", gaps_csv.into_bytes());

    let level_gaps: Vec<f64> = table.rows.iter().map(|r| r.gap).collect();
    let r = &mut ctx.report;
    r.metric("convergence_csv", conv_name);
    r.metric("oracle_csv", oracle_name);
    r.metric("gaps_csv", gaps_name);
    r.metric("scheme", oracle_cfg.scheme());
    r.metric("level_gaps", numbers(&level_gaps));
    r.metric("gaps_at_times", numbers(&gaps));
    r.assert(
        "agreement with Cole–Hopf",
        Some(5),
        level_gaps[0] <= 1e-4,
        format!("gap {:.3e} at n = {}, dt = {:e}, T = {t_end} (tol 1e-4)", level_gaps[0], grids[0].n(), dts[0]),
    );
    if levels >= 2 {
        let decreasing = level_gaps.windows(2).all(|w| w[1] < w[0]);
        r.assert(
            "gap decreases under refinement",
            Some(5),
            decreasing,
            format!("gaps {} over n ×2, dt /2", sci(&level_gaps)),
        );
        let monotone = table.check_monotone();
        r.assert(
            "monotone within noise allowance",
            None,
            monotone.is_ok(),
            monotone.err().map_or_else(|| "no level grew by more than 20 %".to_string(), |e| e.to_string()),
        );
    }
    if base.dim() == 2 {
        let worst = curls.iter().copied().fold(0.0, f64::max);
        r.metric("curl", numbers(&curls));
        r.assert("curl-free direct solution", None, worst <= 1e-6, format!("max |curl u| = {worst:.3e} (tol 1e-6)"));
    }
    Ok(())
}

fn kernel_decay(ctx: &mut Ctx) -> Run<()> {
    let cfg = ctx.cfg;
    let k = &cfg.kernel;
    let gs = shifted_ground(ctx)?;
    let period = cfg.grid.period;
    let kernel = BlochKernel::new(&gs.potential, &gs.ground, k.n_bands, k.n_k, k.cutoff)
        .map_err(|e| ctx.fail("Bloch kernel", e))?;

    let mut slices = Vec::new();
    let mut diag = String::from("t,integral,pointwise,tail_fraction,stochasticity_defect,truncation_bound\n");
    let mut slice_csv = String::from("t,x,y,L,dLdx\n");
    let mut integral = Vec::new();
    let mut pointwise = Vec::new();
    let mut warnings = Vec::new();
    for &t in &cfg.times {
        let samples = KernelSamples::cell_scan(period, k.x_per_cell, t, k.tail_sigmas, k.panel_order)
            .map_err(|e| ctx.fail("kernel samples", e))?;
        let slice = kernel.slice(t, &samples).map_err(|e| ctx.fail("kernel slice", e))?;
        let int = integral_diagnostic(&slice).map_err(|e| ctx.fail("integral diagnostic", e))?;
        let pt = pointwise_diagnostic(&slice);
        let stoch = slice.stochasticity_defect().map_err(|e| ctx.fail("stochasticity", e))?;
        writeln!(diag, "{}", row(&[t, int.value, pt, int.tail_fraction, stoch, slice.truncation_bound()])).unwrap();
        if int.tail_warning {
            warnings.push(format!("t = {t}: tail estimate {:.2e} exceeds 1 %", int.tail_fraction));
        }
        if k.write_slices {
            for (i, x) in slice.x_samples().iter().enumerate() {
                for (j, y) in slice.y_samples().iter().enumerate() {
                    writeln!(slice_csv, "{}", row(&[t, *x, *y, slice.l()[(i, j)], slice.dldx()[(i, j)]])).unwrap();
                }
            }
        }
        integral.push(int.value);
        pointwise.push(pt);
        slices.push(slice);
    }
    let diag = diag.into_bytes();
    let int_fit = fit_exponent_reader(diag.as_slice(), "t", "integral").map_err(|e| ctx.fail("integral fit", e))?;
    let pt_fit = fit_exponent_reader(diag.as_slice(), "t", "pointwise").map_err(|e| ctx.fail("pointwise fit", e))?;
    let diag_name = ctx.file("diagnostics", diag);
    let slice_name = k.write_slices.then(|| ctx.file("slices", slice_csv.into_bytes()));
    let envelope = fit_gaussian_bound(&slices, &BoundScan::default());

    let times = &cfg.times;
    let r = &mut ctx.report;
    r.metric("diagnostics_csv", diag_name);
    if let Some(name) = slice_name {
        r.metric("slices_csv", name);
    }
    r.metric("integral", numbers(&integral));
    r.metric("pointwise", numbers(&pointwise));
    r.metric("integral_slope", number(int_fit.slope));
    r.metric("integral_fit_residual", number(int_fit.residual));
    r.metric("pointwise_slope", number(pt_fit.slope));
    r.metric("pointwise_fit_residual", number(pt_fit.residual));
    r.metric("tail_warnings", warnings);

    if cfg.potential.name == "zero" {
        let int_err = times
            .iter()
            .zip(&integral)
            .map(|(t, v)| (v / (2.0 / (PI * t)).sqrt() - 1.0).abs())
            .fold(0.0, f64::max);
        let pt_err = times
            .iter()
            .zip(&pointwise)
            .map(|(t, v)| (v / ((-0.5f64).exp() / (2.0 * PI).sqrt() / t) - 1.0).abs())
            .fold(0.0, f64::max);
        r.assert(
            "free integral diagnostic",
            Some(1),
            int_err <= 1e-6,
            format!("max relative error to √(2/(πt)) {int_err:.3e} (tol 1e-6)"),
        );
        r.assert(
            "free pointwise diagnostic",
            Some(1),
            pt_err <= 1e-6,
            format!("max relative error to e^(-1/2)(2π)^(-1/2)/t {pt_err:.3e} (tol 1e-6)"),
        );
    }
    r.assert(
        "integral decay exponent",
        Some(2),
        (int_fit.slope + 0.5).abs() <= 0.05,
        format!("slope {:.4} (target -0.5 ± 0.05)", int_fit.slope),
    );
    r.assert(
        "pointwise decay exponent",
        Some(3),
        (pt_fit.slope + 1.0).abs() <= 0.1,
        format!("slope {:.4} (target -1.0 ± 0.1)", pt_fit.slope),
    );
    r.assert(
        "pointwise exponent margin",
        Some(3),
        -pt_fit.slope - 0.5 >= 0.3,
        format!("alpha - 1/2 = {:.4} (need ≥ 0.3)", -pt_fit.slope - 0.5),
    );
    match envelope {
        Ok(fit) => {
            let (d, e) = (fit.d.unwrap_or(f64::NAN), fit.e.unwrap_or(f64::NAN));
            r.metric(
                "envelope",
                json!({
                    "C": number(fit.c),
                    "D": number(d),
                    "E": number(e),
                    "active_fraction": number(fit.active_fraction.unwrap_or(f64::NAN)),
                    "samples": fit.sample_count,
                }),
            );
            r.assert(
                "Gaussian envelope feasibility",
                Some(4),
                fit.c.is_finite() && d >= 0.05 && e >= 0.05,
                format!("C = {:.4}, D = {d:.3}, E = {e:.3}", fit.c),
            );
        }
        Err(CoreError::PropertyViolation(m)) => {
            r.assert("Gaussian envelope feasibility", Some(4), false, m);
        }
        Err(e) => return Err(ctx.fail("envelope fit", e)),
    }
    Ok(())
}

fn band_scan(ctx: &mut Ctx) -> Run<()> {
    let cfg = ctx.cfg;
    let b = &cfg.band;
    let grid = cfg.grid.torus();
    let v = potential(ctx, grid)?;
    let r = grid.reciprocal();
    let ks: Vec<f64> = (0..b.k_points)
        .map(|j| r * (-0.5 + j as f64 / (b.k_points - 1) as f64))
        .collect();
    let mut bands = Vec::new();
    for index in 0..b.count {
        bands.push(band(&v, index, &ks, b.cutoff).map_err(|e| ctx.fail("band", e))?);
    }
    let mut csv = String::from("k,band,energy\n");
    for (index, samples) in bands.iter().enumerate() {
        for (k, e) in samples {
            writeln!(csv, "{},{index},{}", number_text(*k), number_text(*e)).unwrap();
        }
    }
    let name = ctx.file("bands", csv.into_bytes());

    let bottom = &bands[0];
    let min_e = bottom.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let argmins: Vec<f64> = bottom.iter().filter(|p| p.1 == min_e).map(|p| p.0).collect();
    let wide = effective_mass(bottom, b.k_fit);
    let narrow = effective_mass(bottom, 0.5 * b.k_fit);
    let rep = &mut ctx.report;
    rep.metric("bands_csv", name);
    rep.metric("bottom_energy", number(min_e));
    rep.metric("bandwidth", number(bottom.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) - min_e));
    rep.assert(
        "unique band minimum at k = 0",
        Some(10),
        argmins == [0.0],
        format!("minimizers {argmins:?} on a {}-point scan", b.k_points),
    );
    match wide {
        Ok(m) => {
            rep.metric("curvature", number(m.curvature));
            rep.metric("effective_mass", number(0.5 / m.curvature));
            rep.metric("quadratic_residual", number(m.residual));
            if let Ok(n) = narrow {
                rep.metric("curvature_half_window", number(n.curvature));
            }
            rep.assert(
                "quadratic band minimum",
                Some(10),
                m.residual <= 1e-3,
                format!("residual {:.3e} on |k| ≤ {} (tol 1e-3)", m.residual, b.k_fit),
            );
            rep.assert("positive curvature", Some(10), m.curvature > 0.0, format!("curvature {:.6}", m.curvature));
        }
        Err(CoreError::PropertyViolation(msg)) => {
            rep.assert("quadratic band minimum", Some(10), false, msg.clone());
            rep.assert("positive curvature", Some(10), false, msg);
        }
        Err(e) => return Err(ctx.fail("effective mass", e)),
    }
    Ok(())
}

fn counterexample(ctx: &mut Ctx) -> Run<()> {
    let c = &ctx.cfg.counterexample;
    let profile = LineHeatProfile::new(c.radii.clone(), c.values.clone(), c.background)
        .map_err(|e| ctx.fail("profile", e))?;
    let x = c.x;
    let mut csv = String::from("t,phi,grad_sup,gradient_ceiling\n");
    let mut sups = Vec::new();
    let mut ceiling_ok = true;
    for &t in &ctx.cfg.times {
        let phi = line_heat_phi(&profile, t, x);
        let sup = line_heat_grad_sup(&profile, t);
        let ceiling = profile.gradient_ceiling(t);
        ceiling_ok &= sup <= ceiling;
        writeln!(csv, "{}", row(&[t, phi, sup, ceiling])).unwrap();
        sups.push(sup);
    }
    let mut checkpoints = String::from("shell,t,phi,expected\n");
    let mut rows = Vec::new();
    for (n, w) in profile.radii().windows(2).enumerate() {
        let shell = n + 1;
        let t = w[0] * w[1];
        let phi = line_heat_phi(&profile, t, x);
        let expected = profile.region_value(shell);
        writeln!(checkpoints, "{shell},{}", row(&[t, phi, expected])).unwrap();
        rows.push((shell, t, phi, expected));
    }
    let name = ctx.file("phi", csv.into_bytes());
    let checkpoint_name = ctx.file("checkpoints", checkpoints.into_bytes());

    let r = &mut ctx.report;
    r.metric("phi_csv", name);
    r.metric("checkpoints_csv", checkpoint_name);
    r.metric("grad_sup", numbers(&sups));
    for (shell, t, phi, expected) in rows {
        r.metric(&format!("phi_at_shell_{shell}"), number(phi));
        r.assert(
            &format!("φ({x}, R{shell}·R{}) near shell value", shell + 1),
            Some(8),
            (phi / expected - 1.0).abs() <= 0.1,
            format!("φ = {phi:.4} at t = {t:e}, shell value {expected} (tol 10 %)"),
        );
    }
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    r.assert(
        "gradient sup strictly decreasing",
        Some(8),
        decreasing,
        format!("sup|∂ₓφ| = {}", sci(&sups)),
    );
    r.assert(
        "gradient ceiling",
        None,
        ceiling_ok,
        "sup|∂ₓφ| ≤ (value spread)·(2πt)^(-1/2)·(boundaries) at every time",
    );
    Ok(())
}
