//! Monotone semi-Lagrangian discretizations of the backward and forward
//! Lax-Oleinik semigroups, and their long-time iteration.
//!
//! One backward step over `dt` is the implicit-Euler relaxation
//!
//! ```text
//! u'(x_i) = [ min_v ( u(x_i − v dt) + dt L(x_i, v) ) + dt c ] / (1 + dt λ(x_i))
//! ```
//!
//! and the forward step is its mirror image
//!
//! ```text
//! u'(x_i) = [ max_v ( u(x_i + v dt) − dt L(x_i, v) ) − dt c ] / (1 − dt λ(x_i)).
//! ```
//!
//! `u` is evaluated with periodic linear interpolation, so both maps are
//! monotone as long as `dt · max|λ| < 1`.

use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::domain::{GridFunction, PeriodicGrid};
use crate::error::{Error, Result};
use crate::model::{LagrangianTable, Model};

/// Default convergence threshold on `sup|u_{k+1} − u_k| / dt`.
pub const DEFAULT_TOL_FIX: f64 = 1e-6;
pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_DIVERGENCE_FLOOR: f64 = -1e3;
pub const DEFAULT_T_MAX: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Backward,
    Forward,
}

#[derive(Debug, Clone)]
pub struct SemigroupParams {
    pub dt: f64,
    pub table: Arc<LagrangianTable>,
    pub tol_fix: f64,
    pub window: usize,
    pub divergence_floor: f64,
    pub t_max: f64,
    /// Turn range-boundary warnings into errors.
    pub strict: bool,
    /// Record min/max history every this many steps.
    pub history_stride: usize,
}

impl SemigroupParams {
    /// Defaults with `dt = 0.5 · spacing / v_max`, capped by `0.5 / λ_max`.
    pub fn auto(model: &Model, table: Arc<LagrangianTable>) -> Self {
        let dt = default_dt(table.grid(), table.v_max(), model.lambda_max());
        Self {
            dt,
            table,
            tol_fix: DEFAULT_TOL_FIX,
            window: DEFAULT_WINDOW,
            divergence_floor: DEFAULT_DIVERGENCE_FLOOR,
            t_max: DEFAULT_T_MAX,
            strict: false,
            history_stride: 1,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_tol_fix(mut self, tol_fix: f64) -> Self {
        self.tol_fix = tol_fix;
        self
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.table.grid()
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if self.dt * model.lambda_max() >= 1.0 {
            return Err(Error::StepSize { dt: self.dt, lambda_max: model.lambda_max() });
        }
        if !(self.tol_fix > 0.0) {
            return Err(Error::InvalidInput(format!("tol_fix must be positive, got {}", self.tol_fix)));
        }
        if !(self.divergence_floor < -1.0) {
            return Err(Error::InvalidInput(format!(
                "divergence_floor must be below -1, got {}",
                self.divergence_floor
            )));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidInput(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.window == 0 || self.history_stride == 0 {
            return Err(Error::InvalidInput("window and history_stride must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn default_dt(grid: &PeriodicGrid, v_max: f64, lambda_max: f64) -> f64 {
    let cfl = 0.5 * grid.spacing() / v_max;
    if lambda_max > 0.0 {
        cfl.min(0.5 / lambda_max)
    } else {
        cfl
    }
}

/// A step result together with the number of nodes whose optimal velocity
/// sat on the edge of the velocity table.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub u: GridFunction,
    pub boundary_hits: usize,
}

/// Precomputed per-`(model, params)` data shared by every step.
pub struct Stepper {
    grid: PeriodicGrid,
    direction: Direction,
    dt: f64,
    c: f64,
    /// `1 / (1 ± dt λ_i)`
    inv_denominator: Vec<f64>,
    /// Per velocity: integer node offset of the foot and its fractional weight.
    offsets: Vec<(isize, f64)>,
    /// `dt · L(x_i, v_j)` laid out velocity-major.
    scaled_table: Vec<f64>,
    table: Arc<LagrangianTable>,
    ghost: usize,
    strict: bool,
}

impl Stepper {
    pub fn new(model: &Model, params: &SemigroupParams, direction: Direction) -> Result<Self> {
        params.validate(model)?;
        let table = params.table.clone();
        let grid = *table.grid();
        let n = grid.n();
        let m = table.m();
        let dt = params.dt;
        let sign = match direction {
            Direction::Backward => 1.0,
            Direction::Forward => -1.0,
        };
        let inv_denominator = grid
            .nodes()
            .map(|x| 1.0 / (1.0 + sign * dt * model.discount(x)))
            .collect();
        // the foot of v_j sits at node index i + shift_j
        let offsets: Vec<(isize, f64)> = table
            .velocities()
            .iter()
            .map(|&v| {
                let shift = -sign * (v * dt / grid.spacing());
                let k = shift.floor();
                (k as isize, shift - k)
            })
            .collect();
        let ghost = offsets.iter().map(|&(k, _)| k.unsigned_abs() + 2).max().unwrap_or(2);
        let mut scaled_table = vec![0.0; n * m];
        for i in 0..n {
            for (j, l) in table.row(i).iter().enumerate() {
                scaled_table[j * n + i] = dt * l;
            }
        }
        Ok(Self {
            grid,
            direction,
            dt,
            c: model.c(),
            inv_denominator,
            offsets,
            scaled_table,
            table,
            ghost,
            strict: params.strict,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step; writes into `out` and returns the boundary-hit count.
    pub fn apply_into(&self, u: &[f64], out: &mut Vec<f64>) -> Result<usize> {
        let n = self.grid.n();
        let m = self.offsets.len();
        if u.len() != n {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", u.len(), n)));
        }
        let g = self.ghost;
        let extended: Vec<f64> =
            (0..n + 2 * g).map(|k| u[(k + n * (g / n + 1) - g) % n]).collect();

        // minimize (backward) or maximize (forward); the forward pass works on
        // negated objectives so the same min-scan serves both
        let flip = match self.direction {
            Direction::Backward => 1.0,
            Direction::Forward => -1.0,
        };
        let mut best = vec![f64::INFINITY; n];
        // argmin kept as f64 so the compare-and-select vectorizes
        let mut arg = vec![0.0f64; n];
        for (j, &(k, theta)) in self.offsets.iter().enumerate() {
            let start = (g as isize + k) as usize;
            let left = &extended[start..start + n];
            let right = &extended[start + 1..start + 1 + n];
            let lcol = &self.scaled_table[j * n..(j + 1) * n];
            let wl = flip * (1.0 - theta);
            let wr = flip * theta;
            let jf = j as f64;
            for ((((b, a), l), r), lc) in
                best.iter_mut().zip(arg.iter_mut()).zip(left).zip(right).zip(lcol)
            {
                let val = wl * l + wr * r + lc;
                let better = val < *b;
                *b = if better { val } else { *b };
                *a = if better { jf } else { *a };
            }
        }

        let mut boundary_hits = 0;
        let mut first_hit = None;
        for i in 0..n {
            let j = arg[i] as usize;
            if j == 0 || j == m - 1 {
                boundary_hits += 1;
                first_hit.get_or_insert(i);
            }
            best[i] = best[i].min(self.refine(&extended, i, j));
        }
        if let Some(node) = first_hit {
            if self.strict {
                return Err(Error::RangeBoundary { what: "velocity", node });
            }
        }

        out.clear();
        match self.direction {
            Direction::Backward => out.extend(
                best.iter().zip(&self.inv_denominator).map(|(b, inv)| (b + self.dt * self.c) * inv),
            ),
            // best holds −max, so this is (max − dt c) / (1 − dt λ)
            Direction::Forward => out.extend(
                best.iter().zip(&self.inv_denominator).map(|(b, inv)| (-b - self.dt * self.c) * inv),
            ),
        }
        Ok(boundary_hits)
    }

    /// Between neighbouring table velocities the objective is linear except
    /// where the foot crosses a grid node. Evaluates those crossings next to
    /// the discrete optimum `j` and returns the best (sign-adjusted) value.
    fn refine(&self, extended: &[f64], i: usize, j: usize) -> f64 {
        let m = self.offsets.len();
        let mut best = f64::INFINITY;
        let lo = j.saturating_sub(1);
        let hi = (j + 1).min(m - 1);
        let flip = match self.direction {
            Direction::Backward => 1.0,
            Direction::Forward => -1.0,
        };
        for (a, b) in [(lo, j), (j, hi)] {
            if a == b {
                continue;
            }
            let sa = self.offsets[a].0 as f64 + self.offsets[a].1;
            let sb = self.offsets[b].0 as f64 + self.offsets[b].1;
            let (s_lo, s_hi) = if sa < sb { (sa, sb) } else { (sb, sa) };
            let mut k = s_lo.floor() + 1.0;
            while k < s_hi {
                // shift = −flip · v dt / h  ⇒  v = −flip · k h / dt
                let v = -flip * k * self.grid.spacing() / self.dt;
                let idx = (self.ghost as isize + i as isize + k as isize) as usize;
                let val = flip * extended[idx] + self.dt * self.table.interpolate_velocity(i, v);
                best = best.min(val);
                k += 1.0;
            }
        }
        best
    }

    pub fn apply(&self, u: &GridFunction) -> Result<StepOutput> {
        if u.grid().n() != self.grid.n() || u.grid().period() != self.grid.period() {
            return Err(Error::GridMismatch("step input is not on the table's grid".into()));
        }
        let mut out = Vec::with_capacity(self.grid.n());
        let boundary_hits = self.apply_into(u.values(), &mut out)?;
        if boundary_hits > 0 {
            warn!("{boundary_hits} optimal velocities on the velocity range boundary; widen v_max");
        }
        Ok(StepOutput { u: GridFunction::new(self.grid, out)?, boundary_hits })
    }
}

/// One backward (inf) step of the discrete semigroup.
pub fn backward_step(u: &GridFunction, model: &Model, params: &SemigroupParams) -> Result<GridFunction> {
    Ok(Stepper::new(model, params, Direction::Backward)?.apply(u)?.u)
}

/// One forward (sup) step of the discrete semigroup.
pub fn forward_step(u: &GridFunction, model: &Model, params: &SemigroupParams) -> Result<GridFunction> {
    Ok(Stepper::new(model, params, Direction::Forward)?.apply(u)?.u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvolveStatus {
    Converged,
    DivergedDown,
    /// Forward runs blow up towards `+∞` instead.
    DivergedUp,
    TimeCapped,
}

#[derive(Debug, Clone)]
pub struct EvolveReport {
    pub final_u: GridFunction,
    pub status: EvolveStatus,
    pub t_elapsed: f64,
    pub steps: usize,
    pub min_history: Vec<(f64, f64)>,
    pub max_history: Vec<(f64, f64)>,
    /// `sup|u_{k+1} − u_k| / dt` of the last step.
    pub last_rate: f64,
    pub boundary_hits: usize,
}

/// Iterates the backward or forward step from `u0` until the per-unit-time
/// change stays below `tol_fix` for `window` consecutive steps, the minimum
/// drops below the divergence floor, or `t_max` is reached.
pub fn evolve(
    u0: &GridFunction,
    model: &Model,
    params: &SemigroupParams,
    direction: Direction,
) -> Result<EvolveReport> {
    evolve_with(u0, model, params, direction, |_, _| {})
}

/// As [`evolve`], calling `observe(t, u)` after every step.
pub fn evolve_with(
    u0: &GridFunction,
    model: &Model,
    params: &SemigroupParams,
    direction: Direction,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<EvolveReport> {
    let stepper = Stepper::new(model, params, direction)?;
    u0.check_grid(&GridFunction::constant(*params.grid(), 0.0)?)?;
    let dt = params.dt;
    let mut u = u0.values().to_vec();
    let mut next = Vec::with_capacity(u.len());
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut streak = 0usize;
    let mut min_history = vec![(0.0, u0.min())];
    let mut max_history = vec![(0.0, u0.max())];
    let mut boundary_hits = 0;
    let mut last_rate = f64::INFINITY;
    let ceiling = -params.divergence_floor;
    // guard against accumulating `t += dt` landing just short of t_max
    let t_stop = params.t_max - 1e-9 * dt;
    let status = loop {
        if t >= t_stop {
            break EvolveStatus::TimeCapped;
        }
        boundary_hits += stepper.apply_into(&u, &mut next)?;
        steps += 1;
        t = steps as f64 * dt;
        let mut change = 0.0_f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in u.iter().zip(&next) {
            change = change.max((a - b).abs());
            lo = lo.min(*b);
            hi = hi.max(*b);
        }
        std::mem::swap(&mut u, &mut next);
        observe(t, &u);
        if steps % params.history_stride == 0 {
            min_history.push((t, lo));
            max_history.push((t, hi));
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NonFinite(format!("iterate at t = {t}")));
        }
        last_rate = change / dt;
        if direction == Direction::Backward && lo < params.divergence_floor {
            break EvolveStatus::DivergedDown;
        }
        if direction == Direction::Forward && hi > ceiling {
            break EvolveStatus::DivergedUp;
        }
        if last_rate <= params.tol_fix {
            streak += 1;
            if streak >= params.window {
                break EvolveStatus::Converged;
            }
        } else {
            streak = 0;
        }
    };
    if min_history.last().map(|h| h.0) != Some(t) {
        min_history.push((t, u.iter().copied().fold(f64::INFINITY, f64::min)));
        max_history.push((t, u.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
    }
    if boundary_hits > 0 {
        warn!("evolve: {boundary_hits} node-steps with optimal velocity on the range boundary");
    }
    Ok(EvolveReport {
        final_u: GridFunction::new(*params.grid(), u)?,
        status,
        t_elapsed: t,
        steps,
        min_history,
        max_history,
        last_rate,
        boundary_hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::sup_diff;
    use crate::model::{legendre_transform, Builtin};

    fn setup(which: Builtin, c: f64, n: usize) -> (Model, SemigroupParams) {
        let grid = PeriodicGrid::circle(n).unwrap();
        let model = Model::builtin(which, c, &grid).unwrap();
        let table = Arc::new(legendre_transform(&model, &grid, 65, true).unwrap());
        let params = SemigroupParams::auto(&model, table);
        (model, params)
    }

    #[test]
    fn zero_is_fixed_for_e1_at_c0() {
        let (model, params) = setup(Builtin::E1, 0.0, 64);
        let zero = GridFunction::constant(*params.grid(), 0.0).unwrap();
        let next = backward_step(&zero, &model, &params).unwrap();
        assert!(next.values().iter().all(|v| v.abs() < 1e-15));
        let next = forward_step(&zero, &model, &params).unwrap();
        assert!(next.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn constants_fixed_without_discount() {
        let grid = PeriodicGrid::circle(32).unwrap();
        let model = Model::custom(
            "flat",
            Arc::new(|_x, p| 0.5 * p * p),
            Arc::new(|_x| 0.0),
            0.0,
            10.0,
            8.0,
            &grid,
        )
        .unwrap();
        let table = Arc::new(legendre_transform(&model, &grid, 65, true).unwrap());
        let params = SemigroupParams::auto(&model, table);
        let k = GridFunction::constant(grid, 3.25).unwrap();
        let next = backward_step(&k, &model, &params).unwrap();
        assert!(sup_diff(&k, &next).unwrap() < 1e-14);
    }

    #[test]
    fn step_size_violation() {
        let (model, params) = setup(Builtin::E1, 0.0, 32);
        let bad = params.with_dt(1.0);
        let zero = GridFunction::constant(*bad.grid(), 0.0).unwrap();
        assert!(matches!(backward_step(&zero, &model, &bad), Err(Error::StepSize { .. })));
        assert!(matches!(forward_step(&zero, &model, &bad), Err(Error::StepSize { .. })));
    }

    #[test]
    fn strict_mode_rejects_boundary_velocity() {
        let grid = PeriodicGrid::circle(32).unwrap();
        let model = Model::builtin(Builtin::E1, 0.0, &grid).unwrap().with_ranges(10.0, 0.5).unwrap();
        let table = Arc::new(legendre_transform(&model, &grid, 65, true).unwrap());
        let mut params = SemigroupParams::auto(&model, table);
        let steep = GridFunction::from_fn(grid, |x| 5.0 * x.sin()).unwrap();
        let out = Stepper::new(&model, &params, Direction::Backward).unwrap().apply(&steep).unwrap();
        assert!(out.boundary_hits > 0);
        params.strict = true;
        assert!(matches!(
            backward_step(&steep, &model, &params),
            Err(Error::RangeBoundary { what: "velocity", .. })
        ));
    }

    #[test]
    fn evolve_reports_divergence_and_time_cap() {
        let (model, params) = setup(Builtin::E1, -1.0, 32);
        let zero = GridFunction::constant(*params.grid(), 0.0).unwrap();
        let rep = evolve(&zero, &model, &params, Direction::Backward).unwrap();
        assert_eq!(rep.status, EvolveStatus::DivergedDown);
        assert!(rep.final_u.min() < params.divergence_floor);

        let (model, params) = setup(Builtin::E3, 0.0, 32);
        let short = params.with_t_max(0.05);
        let rep = evolve(&GridFunction::constant(*short.grid(), 5.0).unwrap(), &model, &short, Direction::Backward)
            .unwrap();
        assert_eq!(rep.status, EvolveStatus::TimeCapped);
        assert!(rep.t_elapsed >= 0.05 - 1e-12);
        assert_eq!(rep.min_history.len(), rep.steps + 1);
    }

    #[test]
    fn composition_is_stateless() {
        let (model, params) = setup(Builtin::E3, 0.0, 64);
        let u0 = GridFunction::from_fn(*params.grid(), |x| x.cos() + 0.3 * (2.0 * x).sin()).unwrap();
        let stepper = Stepper::new(&model, &params, Direction::Backward).unwrap();
        let mut a = u0.clone();
        for _ in 0..20 {
            a = stepper.apply(&a).unwrap().u;
        }
        let mut b = u0;
        for _ in 0..2 {
            for _ in 0..10 {
                b = backward_step(&b, &model, &params).unwrap();
            }
        }
        assert_eq!(a.values(), b.values());
    }
}
