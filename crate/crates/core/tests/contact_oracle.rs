//! The shooting construction for the e3 example checked against the
//! stationary equation, the discrete residual, and the contact flow.

use std::f64::consts::PI;

use hj_core::contactflow::{integrate, oracle_on_grid, oracle_slope, shooting_oracle, shooting_oracle_with, Branch, ContactState};
use hj_core::model::subsolution_residual;
use hj_core::{Builtin, DifferentiableModel, Direction, Model, PeriodicGrid};

/// `v(π/2)` on the left branch, from RK4 with 8 and 16 substeps per cell
/// agreeing to 1e-12.
const V_HALF_PI: f64 = 1.453_668_107_152;

fn stationary_lhs(x: f64, v: f64, dv: f64) -> f64 {
    0.5 * dv * dv + x.sin() * v + (2.0 * x).cos() - 1.0
}

#[test]
fn value_at_half_pi_is_step_converged() {
    let coarse = shooting_oracle_with(Branch::Left, 1024, 8).unwrap();
    let fine = shooting_oracle_with(Branch::Left, 1024, 16).unwrap();
    assert!((coarse.xs[512] - PI / 2.0).abs() < 1e-14);
    let (a, b) = (coarse.values[512], fine.values[512]);
    assert!((a - b).abs() <= 1e-6, "step halving moved v(π/2) by {:e}", (a - b).abs());
    assert!((b - V_HALF_PI).abs() <= 1e-9, "v(π/2) = {b}");
}

#[test]
fn oracle_solves_the_equation_between_kinks() {
    for branch in [Branch::Left, Branch::Right] {
        let prof = shooting_oracle(branch, 1024).unwrap();
        assert!(!prof.radicand_flag);
        let h = prof.xs[1] - prof.xs[0];
        let mut worst = 0.0_f64;
        for k in 1..prof.values.len() - 1 {
            if k + 1 >= prof.kink && k <= prof.kink {
                continue;
            }
            let dv = (prof.values[k + 1] - prof.values[k - 1]) / (2.0 * h);
            worst = worst.max(stationary_lhs(prof.xs[k], prof.values[k], dv).abs());
        }
        assert!(worst <= 1e-4, "{branch:?}: residual {worst:e}");
    }
}

#[test]
fn oracle_is_a_discrete_subsolution() {
    let grid = PeriodicGrid::circle(1024).unwrap();
    let model = Model::builtin(Builtin::E3, 0.0, &grid).unwrap();
    let v = oracle_on_grid(&grid).unwrap();
    let r = subsolution_residual(&v, &model).unwrap();
    assert!(r.max() <= 5e-2, "max residual {}", r.max());
    // zero at both degenerate points
    assert_eq!(v.values()[0], 0.0);
    assert_eq!(v.values()[512], 0.0);
}

#[test]
fn calibrated_curve_runs_back_to_origin() {
    let prof = shooting_oracle(Branch::Left, 4096).unwrap();
    let k = (0.1 / PI * 4096.0).round() as usize;
    let (x, v) = (prof.xs[k], prof.values[k]);
    let grid = PeriodicGrid::circle(64).unwrap();
    let model = DifferentiableModel::builtin(Builtin::E3, 0.0, &grid).unwrap();
    let s0 = ContactState::new(x, v, oracle_slope(x, v, true));
    assert!(model.contact_hamiltonian(s0.x, s0.u, s0.p).abs() < 1e-10);
    let tr = integrate(s0, &model, 30.0, 1e-3, Direction::Backward).unwrap();
    let dist = |x: f64| grid.circle_distance(x, 0.0);
    let hit = tr
        .samples
        .iter()
        .position(|(_, s)| dist(s.x) <= 1e-3)
        .expect("backward curve never came within 1e-3 of x = 0");
    // the approach is monotone: the curve slides down the unstable branch
    for w in tr.samples[..=hit].windows(2) {
        assert!(w[1].1.x < w[0].1.x);
    }
    assert!(tr.samples[hit].0 >= -30.0);
}
