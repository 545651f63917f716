//! Scenario runner for the Burgers laboratory: TOML configs in, CSV data and
//! a JSON report out.

pub mod config;
pub mod fit;
pub mod output;
pub mod report;
pub mod scenarios;

pub use config::{Scenario, ScenarioConfig};
pub use fit::fit_exponent;
pub use report::RunReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Output files per scenario; every CSV has a header row.
pub const CSV_SCHEMAS: &str = "\
OUTPUT FILES (written to the output directory)
  <scenario>.json              report: config, files, metrics, assertions, runtime_seconds
  groundstate_omega.csv        x[,y],omega,u1[,u2]            Ω and u∞ = -∇Ω/Ω on the grid
  solve_velocity.csv           x[,y],u1[,u2],t                Cole-Hopf velocity at each time
  solve_distance.csv           t,sup_distance,phi_min,phi_max,sandwich_lower,sandwich_upper
  compare_convergence.csv      n,dt,t,gap                     direct solver vs Cole-Hopf per level
  compare_oracle.csv           x[,y],u1[,u2],t                direct solver at each time (base level)
  compare_gaps.csv             t,gap                          base-level gap at each time
  kernel-decay_diagnostics.csv t,integral,pointwise,tail_fraction,stochasticity_defect,truncation_bound
  kernel-decay_slices.csv      t,x,y,L,dLdx                   kernel samples (kernel.write_slices)
  band_bands.csv               k,band,energy
  counterexample_phi.csv       t,phi,grad_sup,gradient_ceiling
  counterexample_checkpoints.csv shell,t,phi,expected         φ at t = R_n·R_(n+1)
";

pub const EXIT_CODES: &str = "\
EXIT CODES
  0  every assertion passed
  1  at least one assertion failed (files and report are still written)
  2  invalid command line or config; nothing is written
  3  numerical or output failure; nothing is written
";

/// Runs a validated config and writes its files. Returns the exit code.
pub fn execute(cfg: &ScenarioConfig) -> i32 {
    let (report, outputs) = match scenarios::run(cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: numerical failure in {e}");
            return EXIT_NUMERICAL;
        }
    };
    let mut outputs = outputs;
    let report_name = format!("{}.json", cfg.scenario);
    outputs.add(report_name.clone(), report.to_json().into_bytes());
    if let Err(e) = outputs.write_all(&cfg.output_dir) {
        eprintln!("error: cannot write to {}: {e}", cfg.output_dir.display());
        return EXIT_NUMERICAL;
    }
    for a in &report.assertions {
        let tag = if a.passed { "PASS" } else { "FAIL" };
        let criterion = a.criterion.map_or(String::new(), |c| format!(" [criterion {c}]"));
        println!("{tag}  {}{criterion}: {}", a.name, a.detail);
    }
    println!(
        "{}: {} of {} assertions passed in {:.2}s; report {}",
        cfg.scenario,
        report.assertions.iter().filter(|a| a.passed).count(),
        report.assertions.len(),
        report.runtime_seconds,
        cfg.output_dir.join(report_name).display()
    );
    if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_ASSERTION
    }
}
