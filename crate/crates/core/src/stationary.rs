//! Stationary solutions: the maximal and minimal solutions, the critical
//! value `c₀`, and the projected Aubry set.
//!
//! Long-time limits are reached in two stages. A relaxation with a local
//! pseudo-time step per node first drives the iterate onto the stationary
//! grid equation
//!
//! ```text
//! G_i(u) = max_j [ v_j · D_j u − L(x_i, v_j) ] + λ(x_i) u_i − c = 0,
//! ```
//!
//! where `D_j u` is the upwind difference for velocity `v_j`. Whenever
//! `dt · V ≤ spacing`, a fixed point of the semi-Lagrangian step is exactly a
//! root of `G`, so the relaxation shares the step's fixed points. The result is
//! then handed to [`evolve`], which confirms the fixed-point residual with the
//! real step. Both stages are monotone, so the limit from a given start does
//! not depend on the path: from above it is the largest fixed point below the
//! start, from below the smallest one above it.
//!
//! The local step matters near points where `λ` and the optimal velocity both
//! vanish. There the time-dependent iteration relaxes only algebraically and
//! would need thousands of time units to settle.

use std::borrow::Cow;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::domain::{sup_diff, GridFunction, PeriodicGrid};
use crate::error::{Error, Result};
use crate::model::{LagrangianTable, Model};
use crate::semigroup::{evolve, Direction, EvolveStatus, SemigroupParams};

/// Slack added to `‖H(·,0)‖∞ + |c|` when choosing the start level.
pub const START_MARGIN: f64 = 10.0;
/// Lower bound on the positive part of `λ` used by the start level.
pub const LAMBDA_FLOOR: f64 = 0.1;
/// Offset of the second start used by the maximality probe.
pub const PROBE_OFFSET: f64 = 10.0;
/// The Aubry tolerance is this multiple of `tol_fix`.
pub const AUBRY_TOL_FACTOR: f64 = 10.0;
/// Restarts allowed when tracking the minimal solution.
pub const EDGE_ROUNDS: usize = 12;
/// Distance at which two bracketing runs count as separated.
pub const EDGE_SEPARATION: f64 = 1e-2;

pub const INFSUP_STAGES: usize = 30;
pub const INFSUP_STEPS: usize = 200;
pub const INFSUP_T_START: f64 = 1.0;
pub const INFSUP_T_END: f64 = 1e-3;

/// Knobs of the local pseudo-time relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxOptions {
    /// Fraction of the local stability limit used as pseudo-time step.
    pub courant: f64,
    /// Cap on the local pseudo-time step where the optimal velocity vanishes.
    pub max_pseudo_step: f64,
    /// Sweep budget per grid node.
    pub sweeps_per_node: usize,
    /// The relaxation stops at `residual ≤ tol_factor · tol_fix`.
    pub tol_factor: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self { courant: 0.5, max_pseudo_step: 10.0, sweeps_per_node: 20, tol_factor: 1e-3 }
    }
}

impl RelaxOptions {
    fn validate(&self) -> Result<()> {
        if !(self.courant > 0.0 && self.courant < 1.0) {
            return Err(Error::InvalidInput(format!("courant must lie in (0, 1), got {}", self.courant)));
        }
        if !(self.max_pseudo_step > 0.0) || self.sweeps_per_node == 0 || !(self.tol_factor > 0.0) {
            return Err(Error::InvalidInput("relaxation options must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxStatus {
    Converged,
    /// Backward runs went to `−∞`, forward runs to `+∞`.
    Diverged,
    SweepCapped,
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    pub u: GridFunction,
    pub status: RelaxStatus,
    pub sweeps: usize,
    /// `max_i |G_i(u)|` after the last sweep.
    pub residual: f64,
    pub boundary_hits: usize,
}

/// Backward relaxation kernel. Forward runs use the reflected data on `−u`.
///
/// Each velocity gets its own pseudo-time step `τ_j = min(dx/|v_j|, τ_max)`,
/// further capped by `courant/|λ|` where `λ < 0`. The foot of every candidate
/// then stays within the adjacent cell, so each candidate
///
/// ```text
/// [ (1 − a) u_i + a u_upwind + τ (L_ij + c) ] / (1 + τ λ_i),   a = τ |v_j| / dx,
/// ```
///
/// is a monotone function of `u`, and so is their minimum. A candidate equals
/// `u_i` exactly when its affine piece of `G_i` vanishes, which gives the sweep
/// the same fixed points as `G`.
struct Relaxer<'a> {
    table: Cow<'a, LagrangianTable>,
    lambda: Vec<f64>,
    c: f64,
    /// First index with a non-negative velocity.
    split: usize,
    /// Row-major `n × m` coefficients of `u_i`, of the upwind value, and the
    /// constant term of each candidate.
    own: Vec<f64>,
    upwind: Vec<f64>,
    constant: Vec<f64>,
    opts: RelaxOptions,
}

impl<'a> Relaxer<'a> {
    fn new(model: &Model, table: &'a LagrangianTable, direction: Direction, opts: RelaxOptions) -> Self {
        let mut lambda = model.discount_on(table.grid());
        let table = match direction {
            Direction::Backward => Cow::Borrowed(table),
            Direction::Forward => {
                lambda.iter_mut().for_each(|l| *l = -*l);
                Cow::Owned(table.reflected())
            }
        };
        let vel = table.velocities();
        let split = vel.partition_point(|v| *v < 0.0);
        let dx = table.grid().spacing();
        let c = model.c();
        let size = lambda.len() * vel.len();
        let (mut own, mut upwind, mut constant) =
            (Vec::with_capacity(size), Vec::with_capacity(size), Vec::with_capacity(size));
        for (i, lam) in lambda.iter().enumerate() {
            let cap = if *lam < 0.0 { opts.courant / -lam } else { f64::INFINITY };
            for (v, l) in vel.iter().zip(table.row(i)) {
                let tau = if *v == 0.0 { opts.max_pseudo_step } else { (dx / v.abs()).min(opts.max_pseudo_step) };
                let tau = tau.min(cap);
                let a = (tau * v.abs() / dx).min(1.0);
                let inv = 1.0 / (1.0 + tau * lam);
                own.push((1.0 - a) * inv);
                upwind.push(a * inv);
                constant.push(tau * (l + c) * inv);
            }
        }
        Self { table, lambda, c, split, own, upwind, constant, opts }
    }

    /// One Jacobi sweep; returns `(max |G|, boundary hits)`.
    fn sweep(&self, u: &[f64], out: &mut [f64]) -> (f64, usize) {
        let grid = self.table.grid();
        let n = grid.n();
        let dx = grid.spacing();
        let vel = self.table.velocities();
        let m = vel.len();
        let (v_neg, v_pos) = vel.split_at(self.split);
        let mut residual = 0.0_f64;
        let mut hits = 0;
        for i in 0..n {
            let ui = u[i];
            let prev = u[(i + n - 1) % n];
            let next = u[(i + 1) % n];
            let back = (ui - prev) / dx;
            let fwd = (next - ui) / dx;
            let row = self.table.row(i);
            let (l_neg, l_pos) = row.split_at(self.split);
            let best = v_neg
                .iter()
                .zip(l_neg)
                .map(|(v, l)| v * fwd - l)
                .chain(v_pos.iter().zip(l_pos).map(|(v, l)| v * back - l))
                .fold(f64::NEG_INFINITY, f64::max);
            if best == vel[0] * fwd - row[0] || best == vel[m - 1] * back - row[m - 1] {
                hits += 1;
            }
            residual = residual.max((best + self.lambda[i] * ui - self.c).abs());
            let span = i * m..(i + 1) * m;
            let (own, up, cst) = (&self.own[span.clone()], &self.upwind[span.clone()], &self.constant[span]);
            let low_neg = own[..self.split]
                .iter()
                .zip(&up[..self.split])
                .zip(&cst[..self.split])
                .map(|((a, b), k)| a * ui + b * next + k)
                .fold(f64::INFINITY, f64::min);
            let low_pos = own[self.split..]
                .iter()
                .zip(&up[self.split..])
                .zip(&cst[self.split..])
                .map(|((a, b), k)| a * ui + b * prev + k)
                .fold(f64::INFINITY, f64::min);
            out[i] = low_neg.min(low_pos);
        }
        (residual, hits)
    }

    /// Iterates on the backward-oriented values `w`.
    fn run(&self, mut w: Vec<f64>, tol: f64, floor: f64) -> Result<(Vec<f64>, RelaxStatus, usize, f64, usize)> {
        let max_sweeps = self.opts.sweeps_per_node * self.table.grid().n();
        let mut next = vec![0.0; w.len()];
        let mut hits = 0;
        let mut residual = f64::INFINITY;
        for sweep in 1..=max_sweeps {
            let (r, h) = self.sweep(&w, &mut next);
            hits += h;
            std::mem::swap(&mut w, &mut next);
            // `r` is the residual of the input; stop on the iterate it certifies
            if r <= tol {
                std::mem::swap(&mut w, &mut next);
                return Ok((w, RelaxStatus::Converged, sweep, r, hits));
            }
            residual = r;
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            if !lo.is_finite() {
                return Err(Error::NonFinite(format!("relaxation sweep {sweep}")));
            }
            if lo < floor {
                return Ok((w, RelaxStatus::Diverged, sweep, residual, hits));
            }
        }
        Ok((w, RelaxStatus::SweepCapped, max_sweeps, residual, hits))
    }

    /// Whether relaxation from `w` runs off below `floor`. An iterate that the
    /// sweep raises at every node can only keep rising, which settles the
    /// question early.
    fn falls(&self, mut w: Vec<f64>, tol: f64, floor: f64) -> bool {
        let max_sweeps = self.opts.sweeps_per_node * self.table.grid().n();
        let mut next = vec![0.0; w.len()];
        for _ in 0..max_sweeps {
            let (r, _) = self.sweep(&w, &mut next);
            if r <= tol || next.iter().zip(&w).all(|(a, b)| a >= b) {
                return false;
            }
            std::mem::swap(&mut w, &mut next);
            if w.iter().any(|v| *v < floor) {
                return true;
            }
        }
        false
    }

    /// Edge tracking for a repelling fixed point: bisect on a constant shift
    /// of `base` between runs that fall and runs that do not, follow the two
    /// bracketing runs while they stay together, and restart from the best
    /// iterate seen. Returns the state, its residual and the rounds used.
    fn edge_state(&self, mut base: Vec<f64>, tol: f64, floor: f64) -> Result<(Vec<f64>, f64, usize)> {
        let max_sweeps = self.opts.sweeps_per_node * self.table.grid().n();
        let mut residual = f64::INFINITY;
        for round in 1..=EDGE_ROUNDS {
            let shifted = |s: f64| base.iter().map(|v| v + s).collect::<Vec<_>>();
            let falls = |s: f64| self.falls(shifted(s), tol, floor);
            let (mut lo, mut hi) = if falls(0.0) { (0.0, 1.0) } else { (-1.0, 0.0) };
            while !falls(lo) {
                hi = lo;
                lo *= 2.0;
                if lo < floor {
                    return Err(Error::Stalled { sweeps: 0, residual });
                }
            }
            while falls(hi) {
                lo = hi;
                hi *= 2.0;
                if hi > -floor {
                    return Err(Error::Stalled { sweeps: 0, residual });
                }
            }
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if falls(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (mut a, mut b) = (shifted(lo), shifted(hi));
            let (mut na, mut nb) = (vec![0.0; a.len()], vec![0.0; b.len()]);
            let mut best = (f64::INFINITY, b.clone());
            for _ in 0..max_sweeps {
                self.sweep(&a, &mut na);
                let (r, _) = self.sweep(&b, &mut nb);
                if r < best.0 {
                    best = (r, b.clone());
                }
                if r <= tol {
                    break;
                }
                std::mem::swap(&mut a, &mut na);
                std::mem::swap(&mut b, &mut nb);
                let spread = a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
                if spread > EDGE_SEPARATION {
                    break;
                }
            }
            debug!("edge round {round}: shift {hi:e}, residual {:e}", best.0);
            residual = best.0;
            if residual <= tol {
                return Ok((best.1, residual, round));
            }
            base = best.1;
        }
        Err(Error::Stalled { sweeps: 0, residual })
    }
}

/// Local pseudo-time relaxation of `u0` towards a fixed point of the backward
/// or forward step.
pub fn relax(
    u0: &GridFunction,
    model: &Model,
    params: &SemigroupParams,
    direction: Direction,
    opts: &RelaxOptions,
) -> Result<Relaxation> {
    params.validate(model)?;
    opts.validate()?;
    let grid = *params.grid();
    if *u0.grid() != grid {
        return Err(Error::GridMismatch("initial data is not on the table's grid".into()));
    }
    let relaxer = Relaxer::new(model, &params.table, direction, *opts);
    let sign = match direction {
        Direction::Backward => 1.0,
        Direction::Forward => -1.0,
    };
    let w0 = u0.values().iter().map(|v| sign * v).collect();
    let tol = opts.tol_factor * params.tol_fix;
    let (w, status, sweeps, residual, boundary_hits) = relaxer.run(w0, tol, params.divergence_floor)?;
    if boundary_hits > 0 {
        warn!("relax: {boundary_hits} node-sweeps with optimal velocity on the range boundary");
        if params.strict {
            return Err(Error::RangeBoundary { what: "velocity", node: 0 });
        }
    }
    debug!("relax {direction:?}: {status:?} after {sweeps} sweeps, residual {residual:e}");
    let u = GridFunction::new(grid, w.into_iter().map(|v| sign * v).collect())?;
    Ok(Relaxation { u, status, sweeps, residual, boundary_hits })
}

/// A converged stationary limit.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub u: GridFunction,
    /// Relaxation sweeps spent.
    pub sweeps: usize,
    /// Time spent by the confirming step iteration.
    pub t_confirm: f64,
    /// `sup|step(u) − u| / dt` of the last confirming step.
    pub residual: f64,
}

/// Relaxes from `u0`, then confirms with the true step iteration.
pub fn stationary_limit(
    u0: &GridFunction,
    model: &Model,
    params: &SemigroupParams,
    direction: Direction,
    opts: &RelaxOptions,
) -> Result<FixedPoint> {
    let relaxed = relax(u0, model, params, direction, opts)?;
    match relaxed.status {
        RelaxStatus::Converged => {}
        RelaxStatus::Diverged => {
            let extreme = match direction {
                Direction::Backward => relaxed.u.min(),
                Direction::Forward => relaxed.u.max(),
            };
            return Err(Error::NoSolution { min: extreme, sweeps: relaxed.sweeps });
        }
        RelaxStatus::SweepCapped => {
            return Err(Error::Stalled { sweeps: relaxed.sweeps, residual: relaxed.residual })
        }
    }
    let report = evolve(&relaxed.u, model, params, direction)?;
    match report.status {
        EvolveStatus::Converged => Ok(FixedPoint {
            u: report.final_u,
            sweeps: relaxed.sweeps,
            t_confirm: report.t_elapsed,
            residual: report.last_rate,
        }),
        EvolveStatus::DivergedDown | EvolveStatus::DivergedUp => {
            Err(Error::Diverged { min: report.final_u.min(), t: report.t_elapsed })
        }
        EvolveStatus::TimeCapped => Err(Error::TimeCapped { t_max: params.t_max }),
    }
}

/// `(‖H(·,0)‖∞ + |c| + 10) / max(min λ⁺, 0.1)`: a level above every solution
/// of the builtin models.
pub fn start_level(model: &Model, grid: &PeriodicGrid) -> f64 {
    let lambda_pos = model
        .discount_on(grid)
        .into_iter()
        .filter(|l| *l > 0.0)
        .fold(f64::INFINITY, f64::min);
    let denom = if lambda_pos.is_finite() { lambda_pos.max(LAMBDA_FLOOR) } else { LAMBDA_FLOOR };
    (model.h0_sup(grid) + model.c().abs() + START_MARGIN) / denom
}

#[derive(Debug, Clone)]
pub struct MaximalSolution {
    pub solution: FixedPoint,
    pub start: f64,
    /// `sup_diff` between the limits from `start` and `start + 10`.
    pub probe_gap: f64,
}

impl MaximalSolution {
    pub fn u(&self) -> &GridFunction {
        &self.solution.u
    }
}

/// The maximal solution: the backward limit from a large constant.
pub fn compute_u_max(model: &Model, params: &SemigroupParams) -> Result<MaximalSolution> {
    compute_u_max_with(model, params, &RelaxOptions::default())
}

pub fn compute_u_max_with(model: &Model, params: &SemigroupParams, opts: &RelaxOptions) -> Result<MaximalSolution> {
    let grid = *params.grid();
    let start = start_level(model, &grid);
    let solution = stationary_limit(&GridFunction::constant(grid, start)?, model, params, Direction::Backward, opts)?;
    let probe = stationary_limit(
        &GridFunction::constant(grid, start + PROBE_OFFSET)?,
        model,
        params,
        Direction::Backward,
        opts,
    )?;
    let probe_gap = sup_diff(&solution.u, &probe.u)?;
    if probe_gap > params.tol_fix {
        warn!("maximality probe moved the limit by {probe_gap:e} (> tol_fix {:e})", params.tol_fix);
    }
    Ok(MaximalSolution { solution, start, probe_gap })
}

#[derive(Debug, Clone)]
pub struct StationaryPair {
    pub u_max: MaximalSolution,
    pub u_min: FixedPoint,
    /// Forward limit from a very negative constant.
    pub u_min_plus: FixedPoint,
    pub gap: f64,
    /// `u_min ≤ u_max + tol_fix` at every node.
    pub ordered: bool,
}

/// The minimal solution: forward limit from a very negative constant, then
/// the backward limit from there. The maximal solution comes along.
pub fn compute_u_min(model: &Model, params: &SemigroupParams) -> Result<StationaryPair> {
    compute_u_min_with(model, params, &RelaxOptions::default())
}

pub fn compute_u_min_with(model: &Model, params: &SemigroupParams, opts: &RelaxOptions) -> Result<StationaryPair> {
    let grid = *params.grid();
    let u_max = compute_u_max_with(model, params, opts)?;
    let low = GridFunction::constant(grid, -start_level(model, &grid))?;
    let u_min_plus = stationary_limit(&low, model, params, Direction::Forward, opts)?;
    let u_min = minimal_from(&u_min_plus.u, model, params, opts)?;
    let gap = sup_diff(u_max.u(), &u_min.u)?;
    let ordered = u_min.u.values().iter().zip(u_max.u().values()).all(|(lo, hi)| *lo <= hi + params.tol_fix);
    if !ordered {
        warn!("u_min exceeds u_max somewhere");
    }
    Ok(StationaryPair { u_max, u_min, u_min_plus, gap, ordered })
}

/// Backward limit from the forward solution `u_plus`. On the grid `u_plus` is
/// a subsolution only up to truncation error, and where `λ < 0` that error
/// can push the iteration past the minimal solution, which repels from below.
/// In that case the minimal solution is recovered as the edge state between
/// shifts of `u_plus` that fall to `−∞` and shifts that do not.
pub fn minimal_from(
    u_plus: &GridFunction,
    model: &Model,
    params: &SemigroupParams,
    opts: &RelaxOptions,
) -> Result<FixedPoint> {
    limit_or_edge(u_plus, model, params, Direction::Backward, opts)
}

/// Limit of the `direction` iteration from `start`, falling back on edge
/// tracking when the iteration escapes past a repelling fixed point.
fn limit_or_edge(
    start: &GridFunction,
    model: &Model,
    params: &SemigroupParams,
    direction: Direction,
    opts: &RelaxOptions,
) -> Result<FixedPoint> {
    let direct = relax(start, model, params, direction, opts)?;
    let begin = match direct.status {
        RelaxStatus::Converged => direct.u,
        RelaxStatus::SweepCapped => {
            return Err(Error::Stalled { sweeps: direct.sweeps, residual: direct.residual })
        }
        RelaxStatus::Diverged => {
            let sign = match direction {
                Direction::Backward => 1.0,
                Direction::Forward => -1.0,
            };
            let relaxer = Relaxer::new(model, &params.table, direction, *opts);
            let tol = opts.tol_factor * params.tol_fix;
            let w = start.values().iter().map(|v| sign * v).collect();
            let (state, residual, rounds) = relaxer.edge_state(w, tol, params.divergence_floor)?;
            debug!("{direction:?} limit by edge tracking: {rounds} rounds, residual {residual:e}");
            GridFunction::new(*params.grid(), state.into_iter().map(|v| sign * v).collect())?
        }
    };
    stationary_limit(&begin, model, params, direction, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeOutcome {
    Solvable,
    Unsolvable,
    /// Neither settled nor diverged within the sweep budget.
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub c: f64,
    pub outcome: ProbeOutcome,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct C0Estimate {
    /// Largest tested `c` classified unsolvable.
    pub lo: f64,
    /// Smallest tested `c` not classified unsolvable.
    pub hi: f64,
    pub iterations: usize,
    pub probes: Vec<Probe>,
    /// Classification is monotone in `c` over all probes.
    pub monotone: bool,
}

impl C0Estimate {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn ambiguous(&self) -> usize {
        self.probes.iter().filter(|p| p.outcome == ProbeOutcome::Ambiguous).count()
    }
}

/// Solvability of `model.with_c(c)`, judged by relaxing from the start level.
pub fn probe(model: &Model, c: f64, params: &SemigroupParams, opts: &RelaxOptions) -> Result<Probe> {
    let model = model.with_c(c);
    let grid = *params.grid();
    let u0 = GridFunction::constant(grid, start_level(&model, &grid))?;
    let r = relax(&u0, &model, params, Direction::Backward, opts)?;
    let outcome = match r.status {
        RelaxStatus::Converged => ProbeOutcome::Solvable,
        RelaxStatus::Diverged => ProbeOutcome::Unsolvable,
        RelaxStatus::SweepCapped => ProbeOutcome::Ambiguous,
    };
    debug!("probe c = {c}: {outcome:?} after {} sweeps", r.sweeps);
    Ok(Probe { c, outcome, sweeps: r.sweeps })
}

/// Bisection on solvability. Ambiguous probes count as solvable: the
/// iteration stayed bounded, so divergence was not shown.
pub fn estimate_c0(model: &Model, bracket: (f64, f64), iterations: usize, params: &SemigroupParams) -> Result<C0Estimate> {
    estimate_c0_with(model, bracket, iterations, params, &RelaxOptions::default())
}

pub fn estimate_c0_with(
    model: &Model,
    bracket: (f64, f64),
    iterations: usize,
    params: &SemigroupParams,
    opts: &RelaxOptions,
) -> Result<C0Estimate> {
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidBracket(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let mut probes = Vec::with_capacity(iterations + 2);
    let first = probe(model, lo, params, opts)?;
    probes.push(first);
    if first.outcome != ProbeOutcome::Unsolvable {
        return Err(Error::InvalidBracket(format!("c = {lo} is not unsolvable ({:?})", first.outcome)));
    }
    let last = probe(model, hi, params, opts)?;
    probes.push(last);
    if last.outcome != ProbeOutcome::Solvable {
        return Err(Error::InvalidBracket(format!("c = {hi} is not solvable ({:?})", last.outcome)));
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let p = probe(model, mid, params, opts)?;
        probes.push(p);
        match p.outcome {
            ProbeOutcome::Unsolvable => lo = mid,
            ProbeOutcome::Solvable | ProbeOutcome::Ambiguous => hi = mid,
        }
    }
    let mut sorted = probes.clone();
    sorted.sort_by(|a, b| a.c.total_cmp(&b.c));
    let first_solvable = sorted.iter().position(|p| p.outcome != ProbeOutcome::Unsolvable).unwrap_or(sorted.len());
    let monotone = sorted[first_solvable..].iter().all(|p| p.outcome != ProbeOutcome::Unsolvable);
    if !monotone {
        warn!("solvability is not monotone in c across the probes; the grid is too coarse to resolve c0");
    }
    Ok(C0Estimate { lo, hi, iterations, probes, monotone })
}

#[derive(Debug, Clone)]
pub struct InfSup {
    /// `max_x [H(x, Du) + λ u]` at the best iterate; an upper bound for `c₀`.
    pub value: f64,
    pub u: GridFunction,
}

/// Terms `z_{i,±} = H(x_i, D^± u) + λ_i u_i` and their momentum slopes.
fn infsup_terms(u: &[f64], grid: &PeriodicGrid, model: &Model, lambda: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n();
    let dx = grid.spacing();
    let mut z = Vec::with_capacity(2 * n);
    let mut slope = Vec::with_capacity(2 * n);
    for i in 0..n {
        let x = grid.node(i);
        for p in [(u[i] - u[(i + n - 1) % n]) / dx, (u[(i + 1) % n] - u[i]) / dx] {
            let h = 1e-6 * (1.0 + p.abs());
            z.push(model.hamiltonian(x, p) + lambda[i] * u[i]);
            slope.push((model.hamiltonian(x, p + h) - model.hamiltonian(x, p - h)) / (2.0 * h));
        }
    }
    (z, slope)
}

fn log_sum_exp(z: &[f64], temp: f64) -> (f64, Vec<f64>) {
    let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = z.iter().map(|v| ((v - top) / temp).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (top + temp * total.ln(), w)
}

/// Upper bound on `c₀` from `inf_u max_x [H(x, Du) + λ u]`, minimized by
/// gradient descent on a log-sum-exp smoothing of the max with a geometric
/// temperature schedule. Step sizes adapt by backtracking.
pub fn estimate_c0_infsup(model: &Model, grid: &PeriodicGrid) -> Result<InfSup> {
    let n = grid.n();
    let dx = grid.spacing();
    let lambda = model.discount_on(grid);
    let mut u = vec![0.0; n];
    let exact = |z: &[f64]| z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (z0, _) = infsup_terms(&u, grid, model, &lambda);
    let mut best = (exact(&z0), u.clone());
    let mut eta = dx;
    let ratio = (INFSUP_T_END / INFSUP_T_START).powf(1.0 / (INFSUP_STAGES - 1) as f64);
    for stage in 0..INFSUP_STAGES {
        let temp = INFSUP_T_START * ratio.powi(stage as i32);
        for _ in 0..INFSUP_STEPS {
            let (z, slope) = infsup_terms(&u, grid, model, &lambda);
            let (f, w) = log_sum_exp(&z, temp);
            let mut grad = vec![0.0; n];
            for i in 0..n {
                let (wb, wf) = (w[2 * i], w[2 * i + 1]);
                let (sb, sf) = (slope[2 * i] / dx, slope[2 * i + 1] / dx);
                grad[i] += (wb + wf) * lambda[i] + wb * sb - wf * sf;
                grad[(i + n - 1) % n] -= wb * sb;
                grad[(i + 1) % n] += wf * sf;
            }
            let norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
            if norm == 0.0 {
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = u.iter().zip(&grad).map(|(a, g)| a - eta * g / norm).collect();
                let (zt, _) = infsup_terms(&trial, grid, model, &lambda);
                let (ft, _) = log_sum_exp(&zt, temp);
                if ft < f {
                    u = trial;
                    let value = exact(&zt);
                    if value < best.0 {
                        best = (value, u.clone());
                    }
                    eta *= 2.0;
                    accepted = true;
                    break;
                }
                eta *= 0.5;
            }
            if !accepted {
                eta = dx;
                break;
            }
        }
    }
    Ok(InfSup { value: best.0, u: GridFunction::new(*grid, best.1)? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AubrySet {
    pub indices: Vec<usize>,
    pub tol: f64,
}

impl AubrySet {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

pub fn default_aubry_tol(params: &SemigroupParams) -> f64 {
    AUBRY_TOL_FACTOR * params.tol_fix
}

/// Nodes where `|u₋ − u₊| ≤ tol`. An empty result is logged: the projected
/// Aubry set of a conjugate pair is never empty.
pub fn compute_aubry_set(u_minus: &GridFunction, u_plus: &GridFunction, tol: f64) -> Result<AubrySet> {
    u_minus.check_grid(u_plus)?;
    let indices: Vec<usize> = u_minus
        .values()
        .iter()
        .zip(u_plus.values())
        .enumerate()
        .filter(|(_, (a, b))| (*a - *b).abs() <= tol)
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        warn!("empty Aubry set at tolerance {tol:e}");
    }
    Ok(AubrySet { indices, tol })
}

/// Forward limit `u₊` of a backward solution `u₋`: the largest forward
/// solution below `u₋`. As with [`minimal_from`], the grid version of `u₋` can
/// overshoot a fixed point that repels from above, so edge tracking takes
/// over when the forward iteration escapes upwards.
pub fn forward_conjugate(u_minus: &GridFunction, model: &Model, params: &SemigroupParams) -> Result<FixedPoint> {
    limit_or_edge(u_minus, model, params, Direction::Forward, &RelaxOptions::default())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{legendre_transform, Builtin};
    use crate::semigroup::backward_step;

    fn setup(which: Builtin, c: f64, n: usize) -> (Model, SemigroupParams) {
        let grid = PeriodicGrid::circle(n).unwrap();
        let model = Model::builtin(which, c, &grid).unwrap();
        let table = Arc::new(legendre_transform(&model, &grid, 65, true).unwrap());
        let params = SemigroupParams::auto(&model, table);
        (model, params)
    }

    #[test]
    fn start_level_uses_lambda_floor() {
        let grid = PeriodicGrid::circle(64).unwrap();
        let e3 = Model::builtin(Builtin::E3, 0.5, &grid).unwrap();
        assert!((start_level(&e3, &grid) - 125.0).abs() < 1e-12);
    }

    #[test]
    fn u_max_is_a_fixed_point_of_the_step() {
        let (model, params) = setup(Builtin::E3, 0.0, 128);
        let out = compute_u_max(&model, &params).unwrap();
        let stepped = backward_step(out.u(), &model, &params).unwrap();
        assert!(sup_diff(&stepped, out.u()).unwrap() / params.dt <= params.tol_fix);
        assert!(out.probe_gap <= params.tol_fix, "probe gap {}", out.probe_gap);
    }

    #[test]
    fn relaxation_matches_time_stepping_from_above() {
        let (model, params) = setup(Builtin::E3, 0.0, 64);
        let params = params.with_tol_fix(1e-9).with_t_max(5000.0);
        let u0 = GridFunction::constant(*params.grid(), 3.0).unwrap();
        let slow = evolve(&u0, &model, &params, Direction::Backward).unwrap();
        assert_eq!(slow.status, EvolveStatus::Converged);
        let fast = stationary_limit(&u0, &model, &params, Direction::Backward, &RelaxOptions::default()).unwrap();
        let d = sup_diff(&slow.final_u, &fast.u).unwrap();
        assert!(d < 1e-5, "distance {d}");
    }

    #[test]
    fn below_critical_value_has_no_solution() {
        let (model, params) = setup(Builtin::E1, -0.5, 128);
        assert!(matches!(compute_u_max(&model, &params), Err(Error::NoSolution { .. })));
    }

    #[test]
    fn pair_is_ordered() {
        let (model, params) = setup(Builtin::E1, 0.0, 128);
        let pair = compute_u_min(&model, &params).unwrap();
        assert!(pair.ordered);
        assert!(pair.u_max.u().min() >= -params.tol_fix);
    }

    #[test]
    fn bisection_rejects_bad_brackets() {
        let (model, params) = setup(Builtin::E1, 0.0, 64);
        assert!(matches!(estimate_c0(&model, (0.5, 1.0), 3, &params), Err(Error::InvalidBracket(_))));
        assert!(matches!(estimate_c0(&model, (1.0, -1.0), 3, &params), Err(Error::InvalidBracket(_))));
    }

    #[test]
    fn bisection_halves_the_bracket() {
        let (model, params) = setup(Builtin::E1, 0.0, 64);
        let est = estimate_c0(&model, (-1.0, 1.0), 6, &params).unwrap();
        assert!((est.hi - est.lo - 2.0 / 64.0).abs() < 1e-15);
        assert!(est.monotone);
        assert_eq!(est.probes.len(), 8);
    }

    #[test]
    fn aubry_set_of_identical_inputs_is_everything() {
        let grid = PeriodicGrid::circle(16).unwrap();
        let u = GridFunction::from_fn(grid, f64::sin).unwrap();
        let set = compute_aubry_set(&u, &u, 0.0).unwrap();
        assert_eq!(set.indices, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn infsup_bounds_from_above() {
        let grid = PeriodicGrid::circle(64).unwrap();
        let model = Model::builtin(Builtin::E3, 0.0, &grid).unwrap();
        let v = estimate_c0_infsup(&model, &grid).unwrap().value;
        assert!((0.0..=0.05).contains(&v), "{v}");
    }
}
