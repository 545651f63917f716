//! Scenario configuration: TOML parsing, defaults and validation.
//!
//! Every key is optional. Missing keys take their value from [`DEFAULTS`] or,
//! for the few keys whose default depends on the scenario, from
//! [`scenario_defaults`].

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use burgers_core::cole_hopf::InitialData;
use burgers_core::schrodinger::{default_cutoff, Potential};
use burgers_core::spectral::{TorusGrid, DEFAULT_PERIOD};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Groundstate,
    Solve,
    Compare,
    KernelDecay,
    Band,
    Counterexample,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Groundstate,
        Scenario::Solve,
        Scenario::Compare,
        Scenario::KernelDecay,
        Scenario::Band,
        Scenario::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Groundstate => "groundstate",
            Scenario::Solve => "solve",
            Scenario::Compare => "compare",
            Scenario::KernelDecay => "kernel-decay",
            Scenario::Band => "band",
            Scenario::Counterexample => "counterexample",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|sc| sc.name() == s)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scenario-independent defaults.
pub struct Defaults {
    pub potential: &'static str,
    pub potential_amplitude: f64,
    pub psi0_1d: &'static str,
    pub psi0_2d: &'static str,
    pub psi0_amplitude: f64,
    pub dim: usize,
    pub period: f64,
    pub seed: u64,
    pub output_dir: &'static str,
    pub kernel_n_bands: usize,
    pub kernel_n_k: usize,
    pub kernel_cutoff: usize,
    pub kernel_x_per_cell: usize,
    pub kernel_tail_sigmas: f64,
    pub kernel_panel_order: usize,
    pub kernel_write_slices: bool,
    pub compare_dt: f64,
    pub compare_levels: usize,
    pub band_k_points: usize,
    pub band_k_fit: f64,
    pub band_count: usize,
    pub band_cutoff: usize,
    pub counter_radii: [f64; 3],
    pub counter_values: [f64; 2],
    pub counter_background: f64,
    pub counter_x: f64,
}

pub const DEFAULTS: Defaults = Defaults {
    potential: "cosine",
    potential_amplitude: 1.0,
    psi0_1d: "sine",
    psi0_2d: "product",
    psi0_amplitude: 1.0,
    dim: 1,
    period: DEFAULT_PERIOD,
    seed: 20240607,
    output_dir: "out",
    kernel_n_bands: 16,
    kernel_n_k: 256,
    kernel_cutoff: 16,
    kernel_x_per_cell: 8,
    kernel_tail_sigmas: 10.0,
    kernel_panel_order: 16,
    kernel_write_slices: true,
    compare_dt: 1e-3,
    compare_levels: 2,
    band_k_points: 65,
    band_k_fit: 0.1,
    band_count: 4,
    band_cutoff: 32,
    counter_radii: [1e2, 1e4, 1e8],
    counter_values: [3.0, 1.0],
    counter_background: 3.0,
    counter_x: 0.0,
};

/// Defaults that vary with the scenario: `(times, grid.n)`.
pub fn scenario_defaults(s: Scenario) -> (Vec<f64>, usize) {
    match s {
        Scenario::Groundstate => (vec![1.0, 10.0], 64),
        Scenario::Solve => (vec![2.0, 4.0, 8.0], 64),
        Scenario::Compare => (vec![1.0], 256),
        Scenario::KernelDecay => (vec![4.0, 8.0, 16.0, 32.0, 64.0], 64),
        Scenario::Band => (vec![], 64),
        Scenario::Counterexample => ((4..=12).map(|p| 10f64.powi(p)).collect(), 64),
    }
}

/// The defaults as a plain-text table, for `--help`.
pub fn defaults_table() -> String {
    let d = &DEFAULTS;
    let rows: Vec<(&str, String)> = vec![
        ("scenario", "taken from the command line".into()),
        ("seed", d.seed.to_string()),
        ("output_dir", d.output_dir.into()),
        ("times", "per scenario, see below".into()),
        ("potential.name", d.potential.into()),
        ("potential.amplitude", d.potential_amplitude.to_string()),
        ("psi0.name", format!("{} (dim 1), {} (dim 2)", d.psi0_1d, d.psi0_2d)),
        ("psi0.amplitude", d.psi0_amplitude.to_string()),
        ("grid.n", "per scenario, see below".into()),
        ("grid.dim", d.dim.to_string()),
        ("grid.period", "2π".into()),
        ("grid.cutoff", "min(32 in 1-D or 16 in 2-D, n/2)".into()),
        ("kernel.n_bands", d.kernel_n_bands.to_string()),
        ("kernel.n_k", d.kernel_n_k.to_string()),
        ("kernel.cutoff", d.kernel_cutoff.to_string()),
        ("kernel.x_per_cell", d.kernel_x_per_cell.to_string()),
        ("kernel.tail_sigmas", d.kernel_tail_sigmas.to_string()),
        ("kernel.panel_order", d.kernel_panel_order.to_string()),
        ("kernel.write_slices", d.kernel_write_slices.to_string()),
        ("compare.dt", d.compare_dt.to_string()),
        ("compare.levels", d.compare_levels.to_string()),
        ("band.k_points", d.band_k_points.to_string()),
        ("band.k_fit", d.band_k_fit.to_string()),
        ("band.count", d.band_count.to_string()),
        ("band.cutoff", format!("min({}, n/2)", d.band_cutoff)),
        ("counterexample.radii", format!("{:?}", d.counter_radii)),
        ("counterexample.values", format!("{:?}", d.counter_values)),
        ("counterexample.background", d.counter_background.to_string()),
        ("counterexample.x", d.counter_x.to_string()),
    ];
    let mut out = String::from("DEFAULTS\n");
    for (k, v) in rows {
        out.push_str(&format!("  {k:<27} {v}\n"));
    }
    out.push_str("\n  scenario         grid.n  times\n");
    for s in Scenario::ALL {
        let (times, n) = scenario_defaults(s);
        let times = if times.is_empty() {
            "unused".to_string()
        } else {
            times.iter().map(|t| format!("{t:e}")).collect::<Vec<_>>().join(", ")
        };
        let n = if s == Scenario::Counterexample { "unused".into() } else { n.to_string() };
        out.push_str(&format!("  {:<16} {n:<7} {times}\n", s.name()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Named {
    pub name: String,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub n: usize,
    pub dim: usize,
    pub period: f64,
    pub cutoff: usize,
}

impl GridSpec {
    pub fn torus(&self) -> TorusGrid {
        TorusGrid::new(self.dim, self.n, self.period).expect("validated grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    pub n_bands: usize,
    pub n_k: usize,
    pub cutoff: usize,
    pub x_per_cell: usize,
    pub tail_sigmas: f64,
    pub panel_order: usize,
    pub write_slices: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSpec {
    pub dt: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSpec {
    pub k_points: usize,
    pub k_fit: f64,
    pub count: usize,
    pub cutoff: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleSpec {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub background: f64,
    pub x: f64,
}

/// A fully resolved, validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub times: Vec<f64>,
    pub potential: Named,
    pub psi0: Named,
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    pub compare: CompareSpec,
    pub band: BandSpec,
    pub counterexample: CounterexampleSpec,
}

/// A validation failure pinned to a line of the config file (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.path.display(), self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawNamed {
    name: Option<Spanned<String>>,
    amplitude: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Option<Spanned<i64>>,
    dim: Option<Spanned<i64>>,
    period: Option<Spanned<f64>>,
    cutoff: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    n_bands: Option<Spanned<i64>>,
    n_k: Option<Spanned<i64>>,
    cutoff: Option<Spanned<i64>>,
    x_per_cell: Option<Spanned<i64>>,
    tail_sigmas: Option<Spanned<f64>>,
    panel_order: Option<Spanned<i64>>,
    write_slices: Option<Spanned<bool>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    dt: Option<Spanned<f64>>,
    levels: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBand {
    k_points: Option<Spanned<i64>>,
    k_fit: Option<Spanned<f64>>,
    count: Option<Spanned<i64>>,
    cutoff: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCounterexample {
    radii: Option<Spanned<Vec<f64>>>,
    values: Option<Spanned<Vec<f64>>>,
    background: Option<Spanned<f64>>,
    x: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<Spanned<String>>,
    seed: Option<Spanned<i64>>,
    output_dir: Option<Spanned<String>>,
    times: Option<Spanned<Vec<f64>>>,
    #[serde(default)]
    potential: RawNamed,
    #[serde(default)]
    psi0: RawNamed,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    kernel: RawKernel,
    #[serde(default)]
    compare: RawCompare,
    #[serde(default)]
    band: RawBand,
    #[serde(default)]
    counterexample: RawCounterexample,
}

struct Ctx<'a> {
    path: &'a Path,
    source: &'a str,
}

impl Ctx<'_> {
    fn line_of(&self, span: Option<Range<usize>>) -> usize {
        span.map_or(1, |s| self.source[..s.start.min(self.source.len())].matches('\n').count() + 1)
    }

    fn err(&self, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: self.path.to_path_buf(),
            line: self.line_of(span),
            message: message.into(),
        }
    }

    fn count(&self, raw: &Option<Spanned<i64>>, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        match raw {
            None => Ok(default),
            Some(v) if *v.get_ref() >= min as i64 => Ok(*v.get_ref() as usize),
            Some(v) => Err(self.err(Some(v.span()), format!("{key} must be an integer >= {min}, got {}", v.get_ref()))),
        }
    }

    fn positive(&self, raw: &Option<Spanned<f64>>, key: &str, default: f64) -> Result<f64, ConfigError> {
        match raw {
            None => Ok(default),
            Some(v) if v.get_ref().is_finite() && *v.get_ref() > 0.0 => Ok(*v.get_ref()),
            Some(v) => Err(self.err(Some(v.span()), format!("{key} must be a positive finite number, got {}", v.get_ref()))),
        }
    }
}

fn span_of<T>(v: &Option<Spanned<T>>) -> Option<Range<usize>> {
    v.as_ref().map(|s| s.span())
}

/// Reads and validates a config file. `scenario` comes from the command
/// line; a `scenario` key in the file must agree with it.
pub fn load(path: &Path, scenario: Scenario, output_override: Option<&Path>) -> Result<ScenarioConfig, ConfigError> {
    let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: 1,
        message: format!("cannot read config: {e}"),
    })?;
    parse(&source, path, scenario, output_override)
}

/// Validates config text; `path` is used only in messages.
pub fn parse(
    source: &str,
    path: &Path,
    scenario: Scenario,
    output_override: Option<&Path>,
) -> Result<ScenarioConfig, ConfigError> {
    let ctx = Ctx { path, source };
    let raw: RawConfig = toml::from_str(source).map_err(|e| ctx.err(e.span(), e.message().trim().to_string()))?;
    let d = &DEFAULTS;

    if let Some(s) = &raw.scenario {
        match Scenario::parse(s.get_ref()) {
            None => return Err(ctx.err(Some(s.span()), format!("unknown scenario '{}'", s.get_ref()))),
            Some(parsed) if parsed != scenario => {
                return Err(ctx.err(
                    Some(s.span()),
                    format!("config is for scenario '{parsed}' but '{scenario}' was requested"),
                ))
            }
            Some(_) => {}
        }
    }
    let (default_times, default_n) = scenario_defaults(scenario);

    let seed = match &raw.seed {
        None => d.seed,
        Some(v) if *v.get_ref() >= 0 => *v.get_ref() as u64,
        Some(v) => return Err(ctx.err(Some(v.span()), format!("seed must be nonnegative, got {}", v.get_ref()))),
    };
    let output_dir = match (output_override, &raw.output_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(v)) if !v.get_ref().is_empty() => PathBuf::from(v.get_ref()),
        (None, Some(v)) => return Err(ctx.err(Some(v.span()), "output_dir must not be empty")),
        (None, None) => PathBuf::from(d.output_dir),
    };

    let times = raw.times.as_ref().map_or(default_times, |t| t.get_ref().clone());
    let times_span = span_of(&raw.times);
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(ctx.err(times_span, format!("times must be finite and nonnegative, got {t}")));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(ctx.err(times_span, format!("times must be strictly increasing, got {} then {}", w[0], w[1])));
    }

    let dim = ctx.count(&raw.grid.dim, "grid.dim", d.dim, 1)?;
    if dim > 2 {
        return Err(ctx.err(span_of(&raw.grid.dim), format!("grid.dim must be 1 or 2, got {dim}")));
    }
    let n = ctx.count(&raw.grid.n, "grid.n", default_n, 8)?;
    if !n.is_power_of_two() {
        return Err(ctx.err(span_of(&raw.grid.n), format!("grid.n must be a power of two, got {n}")));
    }
    let period = ctx.positive(&raw.grid.period, "grid.period", d.period)?;
    let grid_cutoff = ctx.count(&raw.grid.cutoff, "grid.cutoff", default_cutoff(dim).min(n / 2), 1)?;
    if grid_cutoff > n / 2 {
        return Err(ctx.err(span_of(&raw.grid.cutoff), format!("grid.cutoff must be at most n/2 = {}", n / 2)));
    }
    let grid = GridSpec {
        n,
        dim,
        period,
        cutoff: grid_cutoff,
    };
    let torus = TorusGrid::new(dim, n, period).map_err(|e| ctx.err(span_of(&raw.grid.n), e.to_string()))?;

    let potential = Named {
        name: raw.potential.name.as_ref().map_or(d.potential.to_string(), |s| s.get_ref().clone()),
        amplitude: raw.potential.amplitude.as_ref().map_or(d.potential_amplitude, |a| *a.get_ref()),
    };
    if !potential.amplitude.is_finite() {
        return Err(ctx.err(span_of(&raw.potential.amplitude), "potential.amplitude must be finite"));
    }
    if let Err(e) = Potential::builtin(&potential.name, potential.amplitude, torus) {
        let span = span_of(&raw.potential.name).or(span_of(&raw.grid.dim));
        return Err(ctx.err(span, format!("potential: {e}")));
    }

    let default_psi0 = if dim == 1 { d.psi0_1d } else { d.psi0_2d };
    let psi0 = Named {
        name: raw.psi0.name.as_ref().map_or(default_psi0.to_string(), |s| s.get_ref().clone()),
        amplitude: raw.psi0.amplitude.as_ref().map_or(d.psi0_amplitude, |a| *a.get_ref()),
    };
    if !psi0.amplitude.is_finite() {
        return Err(ctx.err(span_of(&raw.psi0.amplitude), "psi0.amplitude must be finite"));
    }
    if !InitialData::BUILTIN_NAMES.contains(&psi0.name.as_str()) {
        return Err(ctx.err(
            span_of(&raw.psi0.name),
            format!("unknown initial data '{}'; expected one of {}", psi0.name, InitialData::BUILTIN_NAMES.join(", ")),
        ));
    }
    if psi0.name == "product" && dim != 2 {
        let span = span_of(&raw.psi0.name).or(span_of(&raw.grid.dim));
        return Err(ctx.err(span, "initial data 'product' needs grid.dim = 2"));
    }

    let k = &raw.kernel;
    let kernel = KernelSpec {
        n_bands: ctx.count(&k.n_bands, "kernel.n_bands", d.kernel_n_bands, 2)?,
        n_k: ctx.count(&k.n_k, "kernel.n_k", d.kernel_n_k, 64)?,
        cutoff: ctx.count(&k.cutoff, "kernel.cutoff", d.kernel_cutoff, 1)?,
        x_per_cell: ctx.count(&k.x_per_cell, "kernel.x_per_cell", d.kernel_x_per_cell, 1)?,
        tail_sigmas: ctx.positive(&k.tail_sigmas, "kernel.tail_sigmas", d.kernel_tail_sigmas)?,
        panel_order: ctx.count(&k.panel_order, "kernel.panel_order", d.kernel_panel_order, 2)?,
        write_slices: k.write_slices.as_ref().map_or(d.kernel_write_slices, |b| *b.get_ref()),
    };
    if kernel.n_bands > 2 * kernel.cutoff {
        return Err(ctx.err(
            span_of(&k.n_bands),
            format!("kernel.n_bands = {} exceeds the 2·cutoff = {} available bands", kernel.n_bands, 2 * kernel.cutoff),
        ));
    }

    let compare = CompareSpec {
        dt: ctx.positive(&raw.compare.dt, "compare.dt", d.compare_dt)?,
        levels: ctx.count(&raw.compare.levels, "compare.levels", d.compare_levels, 1)?,
    };
    if compare.levels > 6 {
        return Err(ctx.err(span_of(&raw.compare.levels), "compare.levels must be at most 6"));
    }

    let b = &raw.band;
    let band = BandSpec {
        k_points: ctx.count(&b.k_points, "band.k_points", d.band_k_points, 5)?,
        k_fit: ctx.positive(&b.k_fit, "band.k_fit", d.band_k_fit)?,
        count: ctx.count(&b.count, "band.count", d.band_count, 1)?,
        cutoff: ctx.count(&b.cutoff, "band.cutoff", d.band_cutoff.min(n / 2), 1)?,
    };
    if band.k_points % 2 == 0 {
        return Err(ctx.err(span_of(&b.k_points), "band.k_points must be odd so that the scan contains k = 0"));
    }
    if band.k_fit >= 0.5 {
        return Err(ctx.err(span_of(&b.k_fit), "band.k_fit must lie inside the half zone (< 0.5)"));
    }
    if band.cutoff > n / 2 {
        return Err(ctx.err(span_of(&b.cutoff), format!("band.cutoff must be at most n/2 = {}", n / 2)));
    }

    let c = &raw.counterexample;
    let counterexample = CounterexampleSpec {
        radii: c.radii.as_ref().map_or(d.counter_radii.to_vec(), |v| v.get_ref().clone()),
        values: c.values.as_ref().map_or(d.counter_values.to_vec(), |v| v.get_ref().clone()),
        background: c.background.as_ref().map_or(d.counter_background, |v| *v.get_ref()),
        x: c.x.as_ref().map_or(d.counter_x, |v| *v.get_ref()),
    };
    if let Err(e) = burgers_core::intrinsic_kernel::LineHeatProfile::new(
        counterexample.radii.clone(),
        counterexample.values.clone(),
        counterexample.background,
    ) {
        let span = span_of(&c.radii).or(span_of(&c.values)).or(span_of(&c.background));
        return Err(ctx.err(span, format!("counterexample: {e}")));
    }
    if !counterexample.x.is_finite() {
        return Err(ctx.err(span_of(&c.x), "counterexample.x must be finite"));
    }

    let scenario_span = span_of(&raw.scenario);
    match scenario {
        Scenario::KernelDecay => {
            if dim != 1 {
                return Err(ctx.err(span_of(&raw.grid.dim).or(scenario_span), "kernel-decay runs on the line (grid.dim = 1)"));
            }
            if times.len() < 4 {
                return Err(ctx.err(times_span, "kernel-decay needs at least 4 times for the exponent fits"));
            }
            if times[0] < 1.0 {
                return Err(ctx.err(times_span, "kernel slices need every time >= 1"));
            }
        }
        Scenario::Band => {
            if dim != 1 {
                return Err(ctx.err(span_of(&raw.grid.dim).or(scenario_span), "band runs on the line (grid.dim = 1)"));
            }
        }
        Scenario::Counterexample => {
            if times.len() < 2 || times[0] <= 0.0 {
                return Err(ctx.err(times_span, "counterexample needs at least 2 positive times"));
            }
        }
        Scenario::Compare => {
            if times.is_empty() {
                return Err(ctx.err(times_span, "compare needs at least one time"));
            }
            let finest = n << (compare.levels - 1);
            if finest > 1 << 14 {
                return Err(ctx.err(span_of(&raw.compare.levels), format!("finest compare grid {finest} is too large")));
            }
        }
        Scenario::Groundstate | Scenario::Solve => {
            if times.is_empty() {
                return Err(ctx.err(times_span, format!("{scenario} needs at least one time")));
            }
        }
    }

    Ok(ScenarioConfig {
        scenario,
        seed,
        output_dir,
        times,
        potential,
        psi0,
        grid,
        kernel,
        compare,
        band,
        counterexample,
    })
}
