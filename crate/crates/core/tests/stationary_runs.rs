//! Long-time behaviour, critical-value estimates and their shift laws.

use std::sync::Arc;

use hj_core::contactflow::oracle_on_grid;
use hj_core::model::{legendre_transform, DEFAULT_VELOCITIES};
use hj_core::stationary::{
    compute_aubry_set, compute_u_max, default_aubry_tol, estimate_c0, estimate_c0_infsup,
    forward_conjugate, stationary_limit, RelaxOptions,
};
use hj_core::{
    evolve, evolve_with, sup_diff, Builtin, Direction, EvolveStatus, GridFunction, Model, PeriodicGrid,
    SemigroupParams,
};

fn setup(model: Model, grid: PeriodicGrid) -> (Model, SemigroupParams) {
    let table = Arc::new(legendre_transform(&model, &grid, DEFAULT_VELOCITIES, false).unwrap());
    let params = SemigroupParams::auto(&model, table);
    (model, params)
}

fn builtin(which: Builtin, c: f64, n: usize) -> (Model, SemigroupParams) {
    let grid = PeriodicGrid::circle(n).unwrap();
    setup(Model::builtin(which, c, &grid).unwrap(), grid)
}

#[test]
fn zero_rises_monotonically_to_a_fixed_point() {
    let (model, params) = builtin(Builtin::E3, 0.0, 256);
    let u0 = GridFunction::constant(*params.grid(), 0.0).unwrap();
    let mut prev = u0.values().to_vec();
    let mut worst_drop = 0.0_f64;
    let report = evolve_with(&u0, &model, &params, Direction::Backward, |_, u| {
        for (a, b) in u.iter().zip(&prev) {
            worst_drop = worst_drop.max(b - a);
        }
        prev.copy_from_slice(u);
    })
    .unwrap();
    assert_eq!(report.status, EvolveStatus::Converged);
    assert_eq!(worst_drop, 0.0, "an iterate decreased somewhere");
    assert!(report.final_u.min() >= 0.0);
}

#[test]
fn below_critical_value_runs_to_minus_infinity() {
    let (model, params) = builtin(Builtin::E1, -1.0, 128);
    let u0 = GridFunction::constant(*params.grid(), 0.0).unwrap();
    let report = evolve(&u0, &model, &params, Direction::Backward).unwrap();
    assert_eq!(report.status, EvolveStatus::DivergedDown);
    assert!(report.final_u.min() < params.divergence_floor);
}

#[test]
fn limit_from_two_matches_oracle() {
    let (model, params) = builtin(Builtin::E3, 0.0, 1024);
    let u0 = GridFunction::constant(*params.grid(), 2.0).unwrap();
    let limit = stationary_limit(&u0, &model, &params, Direction::Backward, &RelaxOptions::default()).unwrap();
    let oracle = oracle_on_grid(params.grid()).unwrap();
    let d = sup_diff(&limit.u, &oracle).unwrap();
    assert!(d <= 5e-2, "distance to oracle {d}");
}

#[test]
fn e1_critical_maximal_solution_is_nonnegative() {
    let (model, params) = builtin(Builtin::E1, 0.0, 256);
    let sol = compute_u_max(&model, &params).unwrap();
    assert!(sol.u().min() >= -params.tol_fix);
    assert!(sol.solution.residual <= params.tol_fix);
}

#[test]
fn c0_estimate_follows_hamiltonian_shift() {
    let grid = PeriodicGrid::circle(128).unwrap();
    let base = Model::builtin(Builtin::E1, 0.0, &grid).unwrap();
    let (base, params) = setup(base, grid);
    let est = estimate_c0(&base, (-1.0, 1.0), 12, &params).unwrap();
    let (shifted, sparams) = setup(base.with_hamiltonian_shift(1.0), grid);
    let moved = estimate_c0(&shifted, (0.0, 2.0), 12, &sparams).unwrap();
    assert!((moved.lo - est.lo - 1.0).abs() <= 1e-12, "{} vs {}", moved.lo, est.lo);
    assert!((moved.hi - est.hi - 1.0).abs() <= 1e-12, "{} vs {}", moved.hi, est.hi);
    assert!(est.midpoint().abs() <= 0.05);
}

#[test]
fn infsup_bounds_c0_and_shifts() {
    let grid = PeriodicGrid::circle(128).unwrap();
    let (model, params) = builtin(Builtin::E1, 0.0, 128);
    let est = estimate_c0(&model, (-1.0, 1.0), 12, &params).unwrap();
    let v = estimate_c0_infsup(&model, &grid).unwrap();
    assert!(v.value <= 0.05, "inf-sup value {}", v.value);
    assert!(v.value >= est.lo - params.tol_fix, "{} below bracket {}", v.value, est.lo);
    let shifted = estimate_c0_infsup(&model.with_hamiltonian_shift(0.5), &grid).unwrap();
    assert!((shifted.value - v.value - 0.5).abs() <= 1e-9, "{} vs {}", shifted.value, v.value);
}

#[test]
fn e3_aubry_set_holds_both_degenerate_points() {
    let (model, params) = builtin(Builtin::E3, 0.0, 256);
    let u_minus = compute_u_max(&model, &params).unwrap();
    let u_plus = forward_conjugate(u_minus.u(), &model, &params).unwrap();
    assert!(u_plus.u.values().iter().zip(u_minus.u().values()).all(|(p, m)| *p <= m + params.tol_fix));
    let set = compute_aubry_set(u_minus.u(), &u_plus.u, default_aubry_tol(&params)).unwrap();
    assert!(set.contains(0) && set.contains(128), "{:?}", set.indices);
}
