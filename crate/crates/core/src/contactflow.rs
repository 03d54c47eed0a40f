//! Contact Hamiltonian dynamics of `H(x, u, p) = H₀(x, p) + λ(x) u − c`:
//!
//! ```text
//! ẋ = ∂H/∂p,   ṗ = −∂H/∂x − p ∂H/∂u,   u̇ = p ∂H/∂p − H
//! ```
//!
//! plus fixed-point search and linear classification in the `(x, p)` plane,
//! and a shooting construction of the stationary solution of `e3` at `c = 0`
//! used as an independent reference for the PDE solver.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{GridFunction, PeriodicGrid};
use crate::error::{Error, Result};
use crate::model::DifferentiableModel;
use crate::semigroup::Direction;

/// A point `(x, u, p)` of the contact phase space; `x` lives on `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub x: f64,
    pub u: f64,
    pub p: f64,
}

impl ContactState {
    pub fn new(x: f64, u: f64, p: f64) -> Self {
        Self { x: x.rem_euclid(TAU), u, p }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.u.is_finite() && self.p.is_finite()
    }
}

/// Time derivatives `(ẋ, ṗ, u̇)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactRhs {
    pub dx: f64,
    pub dp: f64,
    pub du: f64,
}

pub fn contact_rhs(s: &ContactState, model: &DifferentiableModel) -> ContactRhs {
    let m = model.model();
    let hp = model.dh_dp(s.x, s.p);
    let hx = model.dh_dx(s.x, s.p) + model.dlambda_dx(s.x) * s.u;
    let hu = m.discount(s.x);
    let h = model.contact_hamiltonian(s.x, s.u, s.p);
    ContactRhs { dx: hp, dp: -hx - s.p * hu, du: s.p * hp - h }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(t, state)` samples; consecutive times differ by `±h`.
    pub samples: Vec<(f64, ContactState)>,
    /// `H` at each sample.
    pub energy: Vec<f64>,
    pub h: f64,
    pub direction: Direction,
    /// Set when `|u|` or `|p|` exceeded [`BLOW_UP`] and integration stopped early.
    pub blew_up: bool,
}

pub const BLOW_UP: f64 = 1e6;

impl Trajectory {
    pub fn to_csv(&self) -> String {
        use crate::domain::fmt_sig;
        let mut out = String::from("t,x,u,p,H\n");
        for ((t, s), e) in self.samples.iter().zip(&self.energy) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_sig(*t),
                fmt_sig(s.x),
                fmt_sig(s.u),
                fmt_sig(s.p),
                fmt_sig(*e)
            ));
        }
        out
    }

    pub fn last(&self) -> &ContactState {
        &self.samples.last().expect("trajectory holds its initial state").1
    }
}

fn rk4(s: &ContactState, model: &DifferentiableModel, h: f64) -> ContactState {
    let f = |st: &ContactState| contact_rhs(st, model);
    let add = |st: &ContactState, k: &ContactRhs, a: f64| ContactState {
        x: st.x + a * k.dx,
        u: st.u + a * k.du,
        p: st.p + a * k.dp,
    };
    let k1 = f(s);
    let k2 = f(&add(s, &k1, 0.5 * h));
    let k3 = f(&add(s, &k2, 0.5 * h));
    let k4 = f(&add(s, &k3, h));
    ContactState::new(
        s.x + h / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx),
        s.u + h / 6.0 * (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du),
        s.p + h / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp),
    )
}

/// Classical fourth-order Runge-Kutta over `t_span` with step `h`, forward or
/// backward in time.
pub fn integrate(
    s0: ContactState,
    model: &DifferentiableModel,
    t_span: f64,
    h: f64,
    direction: Direction,
) -> Result<Trajectory> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
    }
    if !(t_span > 0.0 && t_span.is_finite()) {
        return Err(Error::InvalidInput(format!("t_span must be positive, got {t_span}")));
    }
    if !s0.is_finite() {
        return Err(Error::NonFinite(format!("initial state {s0:?}")));
    }
    let signed = match direction {
        Direction::Forward => h,
        Direction::Backward => -h,
    };
    let steps = (t_span / h).round() as usize;
    let energy_of = |s: &ContactState| model.contact_hamiltonian(s.x, s.u, s.p);
    let mut s = ContactState::new(s0.x, s0.u, s0.p);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut energy = Vec::with_capacity(steps + 1);
    samples.push((0.0, s));
    energy.push(energy_of(&s));
    let mut blew_up = false;
    for k in 1..=steps {
        s = rk4(&s, model, signed);
        if !s.is_finite() || s.u.abs() > BLOW_UP || s.p.abs() > BLOW_UP {
            blew_up = true;
            break;
        }
        samples.push((k as f64 * signed, s));
        energy.push(energy_of(&s));
    }
    Ok(Trajectory { samples, energy, h, direction, blew_up })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointClass {
    Saddle,
    StableFocus,
    UnstableFocus,
    StableNode,
    UnstableNode,
    Center,
    Degenerate,
}

/// Determinant below which a linearization counts as degenerate.
pub const DEGENERATE_DET: f64 = 1e-10;

/// Eigenvalues and class of a real 2×2 linearization.
pub fn classify(j: [[f64; 2]; 2]) -> ([Complex64; 2], FixedPointClass) {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    let eig = if disc >= 0.0 {
        // roots of s² − tr s + det without cancellation
        let r = disc.sqrt();
        let q = 0.5 * (tr + if tr >= 0.0 { r } else { -r });
        let other = if q != 0.0 { det / q } else { 0.0 };
        let (a, b) = if q >= other { (q, other) } else { (other, q) };
        [Complex64::new(a, 0.0), Complex64::new(b, 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(0.5 * tr, im), Complex64::new(0.5 * tr, -im)]
    };
    let scale = j.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
    let class = if det.abs() < DEGENERATE_DET {
        FixedPointClass::Degenerate
    } else if det < 0.0 {
        FixedPointClass::Saddle
    } else if tr.abs() <= 1e-12 * scale {
        FixedPointClass::Center
    } else if disc < 0.0 {
        if tr < 0.0 {
            FixedPointClass::StableFocus
        } else {
            FixedPointClass::UnstableFocus
        }
    } else if tr < 0.0 {
        FixedPointClass::StableNode
    } else {
        FixedPointClass::UnstableNode
    };
    (eig, class)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub state: ContactState,
    /// Linearization of `(ẋ, ṗ)` in `(x, p)` with `u` frozen.
    pub jacobian: [[f64; 2]; 2],
    /// Linearization of the full `(ẋ, u̇, ṗ)` system in `(x, u, p)`.
    pub full_jacobian: [[f64; 3]; 3],
    pub eigenvalues: [Complex64; 2],
    pub class: FixedPointClass,
    /// False when the point lies on a continuum of fixed points.
    pub isolated: bool,
}

/// Fourth-order central difference.
fn derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3 * (1.0 + x.abs());
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

fn reduced_jacobian(s: &ContactState, model: &DifferentiableModel) -> [[f64; 2]; 2] {
    let at = |x: f64, p: f64| contact_rhs(&ContactState { x, u: s.u, p }, model);
    [
        [derivative(|x| at(x, s.p).dx, s.x), derivative(|p| at(s.x, p).dx, s.p)],
        [derivative(|x| at(x, s.p).dp, s.x), derivative(|p| at(s.x, p).dp, s.p)],
    ]
}

fn full_jacobian(s: &ContactState, model: &DifferentiableModel) -> [[f64; 3]; 3] {
    let at = |x: f64, u: f64, p: f64| {
        let r = contact_rhs(&ContactState { x, u, p }, model);
        [r.dx, r.du, r.dp]
    };
    let mut j = [[0.0; 3]; 3];
    for (row, out) in j.iter_mut().enumerate() {
        out[0] = derivative(|x| at(x, s.u, s.p)[row], s.x);
        out[1] = derivative(|u| at(s.x, u, s.p)[row], s.u);
        out[2] = derivative(|p| at(s.x, s.u, p)[row], s.p);
    }
    j
}

/// Damped Gauss-Newton on a 2×2 system; returns the root when the residual
/// and step both vanish.
fn newton2(
    f: impl Fn(f64, f64) -> [f64; 2],
    jac: impl Fn(f64, f64) -> [[f64; 2]; 2],
    mut z: [f64; 2],
) -> Option<[f64; 2]> {
    for _ in 0..200 {
        let r = f(z[0], z[1]);
        let j = jac(z[0], z[1]);
        // (JᵀJ + μI) δ = −Jᵀr with a tiny μ picks the least-norm step when J is singular
        let jtj = [
            [j[0][0] * j[0][0] + j[1][0] * j[1][0], j[0][0] * j[0][1] + j[1][0] * j[1][1]],
            [j[0][1] * j[0][0] + j[1][1] * j[1][0], j[0][1] * j[0][1] + j[1][1] * j[1][1]],
        ];
        let g = [j[0][0] * r[0] + j[1][0] * r[1], j[0][1] * r[0] + j[1][1] * r[1]];
        let mu = 1e-14 * (jtj[0][0] + jtj[1][1]).max(1e-300);
        let a = jtj[0][0] + mu;
        let d = jtj[1][1] + mu;
        let det = a * d - jtj[0][1] * jtj[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dz = [-(d * g[0] - jtj[0][1] * g[1]) / det, -(a * g[1] - jtj[1][0] * g[0]) / det];
        z = [z[0] + dz[0], z[1] + dz[1]];
        if !(z[0].is_finite() && z[1].is_finite()) || z[1].abs() > BLOW_UP {
            return None;
        }
        let step = dz[0].abs().max(dz[1].abs());
        if step <= 1e-14 * (1.0 + z[0].abs().max(z[1].abs())) {
            let r = f(z[0], z[1]);
            return (r[0].abs().max(r[1].abs()) <= 1e-10).then_some(z);
        }
    }
    let r = f(z[0], z[1]);
    (r[0].abs().max(r[1].abs()) <= 1e-12).then_some(z)
}

/// Rest points with `p = 0`: solves `H₀(x, 0) + λ(x) u − c = 0` together with
/// `∂ₓH₀(x, 0) + λ'(x) u = 0` by Newton from a lattice of `(x, u)` seeds.
/// Roots where `λ` vanishes are polished on the nondegenerate system
/// `(∂ₓH₀ + λ' u, λ) = 0`. Duplicates within `1e-6` are merged.
pub fn find_fixed_points(model: &DifferentiableModel, n_seeds: usize) -> Result<Vec<FixedPointReport>> {
    if n_seeds == 0 {
        return Err(Error::InvalidInput("need at least one seed".into()));
    }
    let m = model.model();
    let c = m.c();
    let energy = |x: f64, u: f64| m.hamiltonian(x, 0.0) + m.discount(x) * u - c;
    let slope = |x: f64, u: f64| model.dh_dx(x, 0.0) + model.dlambda_dx(x) * u;
    let system = |x: f64, u: f64| [energy(x, u), slope(x, u)];
    let system_jac = |x: f64, u: f64| {
        [
            [slope(x, u), m.discount(x)],
            [derivative(|y| slope(y, u), x), model.dlambda_dx(x)],
        ]
    };
    let critical = |x: f64, u: f64| [slope(x, u), m.discount(x)];
    let critical_jac = |x: f64, u: f64| {
        [
            [derivative(|y| slope(y, u), x), model.dlambda_dx(x)],
            [model.dlambda_dx(x), 0.0],
        ]
    };

    let lam_scale = m.lambda_max().max(0.1);
    let u_span = 2.0 * (0..64)
        .map(|k| m.hamiltonian(TAU * k as f64 / 64.0, 0.0).abs())
        .fold(0.0_f64, f64::max)
        .max(1.0)
        / lam_scale
        + c.abs();
    let per_axis = (n_seeds as f64).sqrt().ceil() as usize;
    let mut seeds = Vec::with_capacity(per_axis * per_axis);
    for a in 0..per_axis {
        for b in 0..per_axis {
            if seeds.len() == n_seeds {
                break;
            }
            let x = TAU * (a as f64 + 0.5) / per_axis as f64;
            let u = -u_span + 2.0 * u_span * (b as f64 + 0.5) / per_axis as f64;
            seeds.push((x, u));
        }
    }

    let on_shell = |z: [f64; 2]| {
        let r = system(z[0], z[1]);
        r[0].abs().max(r[1].abs()) <= 1e-10
    };
    let mut roots = Vec::new();
    for (x0, u0) in seeds {
        if let Some(mut z) = newton2(system, system_jac, [x0, u0]) {
            if m.discount(z[0]).abs() < 1e-6 {
                if let Some(zp) = newton2(critical, critical_jac, z).filter(|&zp| on_shell(zp)) {
                    z = zp;
                }
            }
            roots.push(z);
        }
        // rest points on the zero set of λ, reached directly
        if let Some(z) = newton2(critical, critical_jac, [x0, u0]).filter(|&z| on_shell(z)) {
            roots.push(z);
        }
    }
    let mut found: Vec<(f64, f64)> = Vec::new();
    for [x, u] in roots {
        let x = x.rem_euclid(TAU);
        let x = if TAU - x < 1e-12 { 0.0 } else { x };
        let dup = found.iter().any(|&(fx, fu)| {
            let dx = (fx - x).abs();
            dx.min(TAU - dx).max((fu - u).abs()) < 1e-6
        });
        if !dup {
            found.push((x, u));
        }
    }
    if found.is_empty() {
        log::warn!("find_fixed_points: no seed converged");
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(found
        .into_iter()
        .map(|(x, u)| {
            let state = ContactState { x, u, p: 0.0 };
            let jacobian = reduced_jacobian(&state, model);
            let (eigenvalues, class) = classify(jacobian);
            let sj = system_jac(x, u);
            let sdet = sj[0][0] * sj[1][1] - sj[0][1] * sj[1][0];
            let cj = critical_jac(x, u);
            let cdet = cj[0][0] * cj[1][1] - cj[0][1] * cj[1][0];
            // a rest point is isolated when one of the two defining systems is regular there
            let isolated = sdet.abs() > 1e-8 || (m.discount(x).abs() < 1e-6 && cdet.abs() > 1e-8);
            FixedPointReport {
                state,
                jacobian,
                full_jacobian: full_jacobian(&state, model),
                eigenvalues,
                class,
                isolated,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `[0, π]`, where `sin x ≥ 0`.
    Left,
    /// `[π, 2π]`, where `sin x ≤ 0`.
    Right,
}

impl Branch {
    pub fn start(self) -> f64 {
        match self {
            Branch::Left => 0.0,
            Branch::Right => PI,
        }
    }
}

/// Start offset for the series `v(ε) = ε²` at the degenerate endpoints.
pub const SERIES_START: f64 = 1e-4;
/// Negative radicands beyond this (before clamping) raise the diagnostics flag.
pub const RADICAND_TOL: f64 = 1e-8;
pub const DEFAULT_SUBSTEPS: usize = 8;

/// One branch of the shooting construction, sampled at `n + 1` equispaced
/// points from the branch start to its end.
#[derive(Debug, Clone)]
pub struct ShootingProfile {
    pub branch: Branch,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    /// Integral launched from the left endpoint (rightward).
    pub from_left: Vec<f64>,
    /// Integral launched from the right endpoint (leftward).
    pub from_right: Vec<f64>,
    /// Index of the first point where the right-launched integral is selected.
    pub kink: usize,
    /// A selected sample saw a radicand below `−RADICAND_TOL`.
    pub radicand_flag: bool,
}

fn radicand(x: f64, v: f64) -> f64 {
    2.0 * (1.0 - (2.0 * x).cos() - x.sin() * v)
}

/// Integrates `dv/dy = √(max(0, R(x₀ + dir·y, v)))` from the series start at
/// `y = ε` to each of the `n` nodes `y_k = k L / n`. Returns node values and
/// the smallest raw radicand seen in each segment.
fn one_sided(x0: f64, dir: f64, len: f64, n: usize, substeps: usize) -> (Vec<f64>, Vec<f64>) {
    let mut worst = vec![0.0; n + 1];
    let mut values = vec![0.0; n + 1];
    let rhs = |y: f64, v: f64, worst: &mut f64| {
        let r = radicand(x0 + dir * y, v);
        *worst = worst.min(r);
        r.max(0.0).sqrt()
    };
    let mut y = SERIES_START;
    let mut v = SERIES_START * SERIES_START;
    for k in 1..=n {
        let target = len * k as f64 / n as f64;
        let h = (target - y) / substeps as f64;
        let mut w = 0.0_f64;
        for _ in 0..substeps {
            let k1 = rhs(y, v, &mut w);
            let k2 = rhs(y + 0.5 * h, v + 0.5 * h * k1, &mut w);
            let k3 = rhs(y + 0.5 * h, v + 0.5 * h * k2, &mut w);
            let k4 = rhs(y + h, v + h * k3, &mut w);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            y += h;
        }
        y = target;
        values[k] = v;
        worst[k] = w;
    }
    (values, worst)
}

/// Fewest cells per half circle the shooting construction accepts.
pub const MIN_SHOOTING_CELLS: usize = 128;

/// Stationary solution of `½|v'|² + sin x · v + cos 2x − 1 = 0` on one branch:
/// the pointwise minimum of the solutions launched from either endpoint with
/// `v = v' = 0`.
pub fn shooting_oracle(branch: Branch, n: usize) -> Result<ShootingProfile> {
    shooting_oracle_with(branch, n, DEFAULT_SUBSTEPS)
}

pub fn shooting_oracle_with(branch: Branch, n: usize, substeps: usize) -> Result<ShootingProfile> {
    if n < MIN_SHOOTING_CELLS {
        return Err(Error::InvalidInput(format!("shooting oracle needs n >= {MIN_SHOOTING_CELLS}, got {n}")));
    }
    if substeps == 0 {
        return Err(Error::InvalidInput("substeps must be positive".into()));
    }
    let a = branch.start();
    let b = a + PI;
    let (left, wl) = one_sided(a, 1.0, PI, n, substeps);
    let (mut right, mut wr) = one_sided(b, -1.0, PI, n, substeps);
    right.reverse();
    wr.reverse();
    let xs: Vec<f64> = (0..=n).map(|k| a + PI * k as f64 / n as f64).collect();
    let mut values = Vec::with_capacity(n + 1);
    let mut kink = n + 1;
    let mut radicand_flag = false;
    for k in 0..=n {
        if right[k] < left[k] {
            kink = kink.min(k);
            values.push(right[k]);
            // segment k..k+1 of the leftward integral ends at node k
            radicand_flag |= wr[k] < -RADICAND_TOL;
        } else {
            values.push(left[k]);
            radicand_flag |= wl[k] < -RADICAND_TOL;
        }
    }
    values[0] = 0.0;
    values[n] = 0.0;
    Ok(ShootingProfile {
        branch,
        xs,
        values,
        from_left: left,
        from_right: right,
        kink: kink.min(n),
        radicand_flag,
    })
}

/// Both branches sampled on an even grid over `[0, 2π)`.
pub fn oracle_on_grid(grid: &PeriodicGrid) -> Result<GridFunction> {
    oracle_on_grid_with(grid, DEFAULT_SUBSTEPS)
}

pub fn oracle_on_grid_with(grid: &PeriodicGrid, substeps: usize) -> Result<GridFunction> {
    if grid.n() % 2 != 0 || (grid.period() - TAU).abs() > 1e-12 {
        return Err(Error::InvalidInput("oracle needs an even grid on [0, 2π)".into()));
    }
    let half = grid.n() / 2;
    let left = shooting_oracle_with(Branch::Left, half, substeps)?;
    let right = shooting_oracle_with(Branch::Right, half, substeps)?;
    let mut values = left.values[..half].to_vec();
    values.extend_from_slice(&right.values[..half]);
    GridFunction::new(*grid, values)
}

/// `v'` of the selected one-sided integral at a point of the oracle branch,
/// from the ODE right-hand side.
pub fn oracle_slope(x: f64, v: f64, rising: bool) -> f64 {
    let s = radicand(x, v).max(0.0).sqrt();
    if rising {
        s
    } else {
        -s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Builtin;

    fn e3() -> DifferentiableModel {
        DifferentiableModel::builtin(Builtin::E3, 0.0, &PeriodicGrid::circle(64).unwrap()).unwrap()
    }

    #[test]
    fn rhs_at_rest_points_and_direct_substitution() {
        let m = e3();
        let r = contact_rhs(&ContactState::new(0.0, 0.0, 0.0), &m);
        assert_eq!((r.dx, r.dp, r.du), (0.0, 0.0, 0.0));
        let r = contact_rhs(&ContactState::new(PI / 2.0, 2.0, 0.0), &m);
        assert!(r.dx.abs() < 1e-15 && r.dp.abs() < 1e-15 && r.du.abs() < 1e-15);
        let r = contact_rhs(&ContactState::new(0.0, 0.0, 1.0), &m);
        assert_eq!(r.dx, 1.0);
        assert_eq!(r.dp, 0.0);
        assert!((r.du - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rhs_reduces_to_shell_equations() {
        let m = e3();
        for k in 0..20 {
            let x = 0.3 * k as f64;
            let p = (k as f64 * 0.7).sin();
            // put the state on H = 0 by solving for u where sin x is not small
            if x.sin().abs() < 0.2 {
                continue;
            }
            let u = -(0.5 * p * p + (2.0 * x).cos() - 1.0) / x.sin();
            let r = contact_rhs(&ContactState::new(x, u, p), &m);
            assert!((r.dx - p).abs() < 1e-14);
            let dp = -(x.cos() * u - 2.0 * (2.0 * x).sin()) - x.sin() * p;
            assert!((r.dp - dp).abs() < 1e-12);
            assert!((r.du - p * p).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_e3_linearizations() {
        let (e, c) = classify([[0.0, 1.0], [4.0, 0.0]]);
        assert_eq!(c, FixedPointClass::Saddle);
        assert!((e[0] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!((e[1] - Complex64::new(-2.0, 0.0)).norm() < 1e-14);

        let s7 = 7.0_f64.sqrt() / 2.0;
        let (e, c) = classify([[0.0, 1.0], [-2.0, -1.0]]);
        assert_eq!(c, FixedPointClass::StableFocus);
        assert!((e[0] - Complex64::new(-0.5, s7)).norm() < 1e-14);
        assert!((e[1] - Complex64::new(-0.5, -s7)).norm() < 1e-14);

        let (e, c) = classify([[0.0, 1.0], [-2.0, 1.0]]);
        assert_eq!(c, FixedPointClass::UnstableFocus);
        assert!((e[0] - Complex64::new(0.5, s7)).norm() < 1e-14);
    }

    #[test]
    fn classify_other_classes() {
        assert_eq!(classify([[-1.0, 0.0], [0.0, -3.0]]).1, FixedPointClass::StableNode);
        assert_eq!(classify([[1.0, 0.0], [0.0, 3.0]]).1, FixedPointClass::UnstableNode);
        assert_eq!(classify([[0.0, 1.0], [-1.0, 0.0]]).1, FixedPointClass::Center);
        assert_eq!(classify([[0.0, 1.0], [0.0, 0.0]]).1, FixedPointClass::Degenerate);
        let (e, _) = classify([[1e-9, 0.0], [0.0, 5.0]]);
        assert!((e[1].re - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn e3_has_exactly_four_rest_points() {
        let pts = find_fixed_points(&e3(), 64).unwrap();
        let expect = [
            (0.0, 0.0, FixedPointClass::Saddle),
            (PI / 2.0, 2.0, FixedPointClass::StableFocus),
            (PI, 0.0, FixedPointClass::Saddle),
            (3.0 * PI / 2.0, -2.0, FixedPointClass::UnstableFocus),
        ];
        assert_eq!(pts.len(), 4, "{pts:?}");
        for (p, (x, u, class)) in pts.iter().zip(expect) {
            assert!((p.state.x - x).abs() < 1e-8, "{p:?}");
            assert!((p.state.u - u).abs() < 1e-8, "{p:?}");
            assert_eq!(p.state.p, 0.0);
            assert_eq!(p.class, class);
            assert!(p.isolated);
        }
    }

    #[test]
    fn e1_rest_points_form_a_circle() {
        let g = PeriodicGrid::circle(64).unwrap();
        let m = DifferentiableModel::builtin(Builtin::E1, 0.0, &g).unwrap();
        let pts = find_fixed_points(&m, 64).unwrap();
        // oracle: sin x · u = 0 and cos x · u = 0 force u = 0 for every x
        assert!(pts.len() >= 2);
        for p in &pts {
            assert!(p.state.u.abs() < 1e-8, "{p:?}");
        }
        for x in [0.0, PI] {
            assert!(pts.iter().any(|p| (p.state.x - x).abs() < 1e-8), "missing x = {x}");
        }
        assert!(pts.iter().filter(|p| p.state.x.sin().abs() > 0.1).all(|p| !p.isolated));
    }

    #[test]
    fn integrate_conserves_shell() {
        let m = e3();
        let x: f64 = 2.0;
        let p: f64 = 0.4;
        let u = -(0.5 * p * p + (2.0 * x).cos() - 1.0) / x.sin();
        let traj = integrate(ContactState::new(x, u, p), &m, 20.0, 1e-3, Direction::Forward).unwrap();
        assert!(!traj.blew_up);
        assert_eq!(traj.samples.len(), 20_001);
        let worst = traj.energy.iter().fold(0.0_f64, |a, e| a.max(e.abs()));
        assert!(worst <= 1e-8 * 21.0, "{worst:e}");
        // u̇ = p² ≥ 0 on the shell
        assert!(traj.samples.windows(2).all(|w| w[1].1.u >= w[0].1.u - 1e-12));
        let back = integrate(ContactState::new(x, u, p), &m, 1.0, 1e-3, Direction::Backward).unwrap();
        assert!((back.samples[1].0 + 1e-3).abs() < 1e-15);
    }

    #[test]
    fn integrate_rejects_bad_steps_and_reports_blow_up() {
        let m = e3();
        let s = ContactState::new(1.0, 0.0, 0.0);
        assert!(integrate(s, &m, 1.0, 0.0, Direction::Forward).is_err());
        assert!(integrate(s, &m, -1.0, 1e-3, Direction::Forward).is_err());
        let wild = ContactState::new(4.5, 1e5, 5e5);
        let traj = integrate(wild, &m, 10.0, 1e-2, Direction::Forward).unwrap();
        assert!(traj.blew_up);
        assert!(traj.samples.len() < 1001);
    }

    #[test]
    fn oracle_endpoints_and_flat_start() {
        for branch in [Branch::Left, Branch::Right] {
            let prof = shooting_oracle(branch, 512).unwrap();
            assert_eq!(prof.values[0], 0.0);
            assert_eq!(*prof.values.last().unwrap(), 0.0);
            assert!(!prof.radicand_flag);
            let h = prof.xs[1] - prof.xs[0];
            assert!((prof.values[1] - prof.values[0]).abs() / h < 1e-2);
            assert!(oracle_slope(prof.xs[0], 0.0, true).abs() < 1e-3);
        }
        assert!(shooting_oracle(Branch::Left, 64).is_err());
    }
}
