use burgers_core::burgers_oracle::{
    cole_hopf_velocity, convergence_study, solve_direct, solve_direct_snapshots, write_snapshots_csv, OracleConfig,
};
use burgers_core::cole_hopf::{curl, stationary, sup_distance, InitialData};
use burgers_core::schrodinger::{ground_state, Potential};
use burgers_core::spectral::TorusGrid;

fn line(n: usize) -> TorusGrid {
    TorusGrid::line(n).unwrap()
}

#[test]
fn rest_state_stays_at_rest() {
    let g = line(64);
    let u = solve_direct(
        &InitialData::builtin("zero", 0.0, g, None).unwrap(),
        &Potential::zero(g).unwrap(),
        &OracleConfig::new(1e-2, 3.0, g).unwrap(),
    )
    .unwrap();
    assert!(u.components()[0].max_abs() == 0.0);
}

#[test]
fn ground_state_datum_is_stationary() {
    let g = line(128);
    let gs = ground_state(&Potential::cosine(g, 1.0).unwrap(), 32).unwrap();
    let data = InitialData::builtin("ground", 0.0, g, Some(&gs.ground)).unwrap();
    let u = solve_direct(&data, &gs.potential, &OracleConfig::new(1e-3, 1.0, g).unwrap()).unwrap();
    let d = sup_distance(&u, &stationary(&gs.ground).unwrap()).unwrap();
    assert!(d <= 1e-6, "distance {d:e}");
}

#[test]
fn free_refinement_study_decreases() {
    let table = convergence_study(
        &|g| InitialData::builtin("sine", 1.0, g, None),
        &Potential::zero,
        &[line(64), line(128), line(256)],
        &[4e-3, 2e-3, 1e-3],
        1.0,
    )
    .unwrap();
    let gaps: Vec<f64> = table.rows.iter().map(|r| r.gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] <= 1e-4);
}

#[test]
fn stationary_study_has_tiny_gaps() {
    let table = convergence_study(
        &|g| {
            let gs = ground_state(&Potential::cosine(g, 1.0)?, 32.min(g.n() / 2))?;
            InitialData::builtin("ground", 0.0, g, Some(&gs.ground))
        },
        &|g| Potential::cosine(g, 1.0),
        &[line(128), line(256)],
        &[1e-3, 5e-4],
        1.0,
    )
    .unwrap();
    assert!(table.rows.iter().all(|r| r.gap <= 1e-6), "{:?}", table.rows);
}

#[test]
fn zero_end_time_gap_is_exactly_zero() {
    let g = line(128);
    let gs = ground_state(&Potential::cosine(g, 1.0).unwrap(), 32).unwrap();
    let data = InitialData::builtin("sine", 1.0, g, None).unwrap();
    let direct = solve_direct(&data, &gs.potential, &OracleConfig::new(1e-3, 0.0, g).unwrap()).unwrap();
    let ch = cole_hopf_velocity(&data, &gs.potential, 0.0).unwrap();
    assert_eq!(sup_distance(&direct, &ch).unwrap(), 0.0);
}

#[test]
fn two_dimensional_flow_keeps_gradient_form() {
    let sq = TorusGrid::square(32).unwrap();
    let gs = ground_state(&Potential::separable_2d(sq, 0.5).unwrap(), 16).unwrap();
    let data = InitialData::builtin("product", 0.5, sq, None).unwrap();
    let cfg = OracleConfig::new(2e-3, 1.0, sq).unwrap();
    let snaps = solve_direct_snapshots(&data, &gs.potential, &cfg, &[0.5, 1.0]).unwrap();
    for u in &snaps {
        let c = curl(u).unwrap().max_abs();
        assert!(c <= 1e-6, "t = {}: curl {c:e}", u.t());
    }
}

#[test]
fn long_time_approach_to_stationary_field() {
    let g = line(128);
    let gs = ground_state(&Potential::cosine(g, 1.0).unwrap(), 32).unwrap();
    let data = InitialData::builtin("sine", 1.0, g, None).unwrap();
    let cfg = OracleConfig::new(2e-3, 8.0, g).unwrap();
    let snaps = solve_direct_snapshots(&data, &gs.potential, &cfg, &[4.0, 8.0]).unwrap();
    let u_inf = stationary(&gs.ground).unwrap();
    let d4 = sup_distance(&snaps[0], &u_inf).unwrap();
    let d8 = sup_distance(&snaps[1], &u_inf).unwrap();
    assert!(d8 < d4, "{d8} !< {d4}");
}

#[test]
fn snapshot_runs_are_bit_reproducible() {
    let g = line(64);
    let gs = ground_state(&Potential::cosine(g, 1.0).unwrap(), 32).unwrap();
    let data = InitialData::builtin("sine", 1.0, g, None).unwrap();
    let cfg = OracleConfig::new(2e-3, 0.5, g).unwrap();
    let run = || {
        let snaps = solve_direct_snapshots(&data, &gs.potential, &cfg, &[0.0, 0.25, 0.5]).unwrap();
        let mut buf = Vec::new();
        write_snapshots_csv(&mut buf, &snaps).unwrap();
        buf
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.starts_with(b"x,u1,t\n"));
    assert_eq!(a.iter().filter(|&&b| b == b'\n').count(), 1 + 3 * 64);
}
