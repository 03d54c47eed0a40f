//! The acceptance suite: eleven criteria, each reduced to one pass/fail line.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;
use std::time::Instant;

use hj_core::contactflow::{find_fixed_points, oracle_on_grid};
use hj_core::stationary::{
    compute_aubry_set, compute_u_max, compute_u_min, default_aubry_tol, estimate_c0, estimate_c0_infsup,
    forward_conjugate, StationaryPair,
};
use hj_core::{sup_diff, Builtin, DifferentiableModel, Direction, Error, Model, ModelSpec, PeriodicGrid, Result, SemigroupParams};
use serde::Serialize;

use crate::config::build_params;
use crate::experiments::{
    between, blow_down_check, c0_checks, check_e3_fixed_points, evolve_tracked, C0Run, Check, AGREEMENT_TOL,
};
use crate::properties::{run_suites, DEFAULT_CASES};

/// Grid size for every criterion that does not name its own.
pub const N: usize = 512;
/// Lower bound on `sup|u_max − u_min|` for e1 at `c = 5`. The n = 512
/// pipeline measured 20.12; half of that was frozen.
pub const E1_C5_MARGIN: f64 = 10.0;
/// Wall-clock budget of each critical-value bisection, in seconds.
pub const C0_BUDGET: f64 = 120.0;
pub const C0_ITERATIONS: usize = 20;
/// Horizon of the convergence-from-above run.
pub const ABOVE_T_MAX: f64 = 100.0;
/// Criteria that fail for reasons recorded with the project rather than bugs.
pub const KNOWN_RED: &[u32] = &[7];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Wall-clock seconds; left out of reports so they stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {:<44} {} ({:.1} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds
        )
    }
}

struct Context {
    model: Model,
    params: SemigroupParams,
}

/// Setups and stationary pairs shared between criteria.
#[derive(Default)]
struct Cache {
    setups: HashMap<(Builtin, u64, usize), Rc<Context>>,
    pairs: HashMap<(Builtin, u64, usize), Rc<StationaryPair>>,
}

impl Cache {
    fn setup(&mut self, b: Builtin, c: f64, n: usize) -> Result<Rc<Context>> {
        if let Some(ctx) = self.setups.get(&(b, c.to_bits(), n)) {
            return Ok(ctx.clone());
        }
        let grid = PeriodicGrid::circle(n)?;
        let spec = ModelSpec::builtin(b, c);
        let model = spec.build(&grid)?;
        let params = build_params(&model, &grid, spec.n_velocities, None, None, None)?;
        let ctx = Rc::new(Context { model, params });
        self.setups.insert((b, c.to_bits(), n), ctx.clone());
        Ok(ctx)
    }

    fn pair(&mut self, b: Builtin, c: f64, n: usize) -> Result<(Rc<Context>, Rc<StationaryPair>)> {
        let ctx = self.setup(b, c, n)?;
        if let Some(p) = self.pairs.get(&(b, c.to_bits(), n)) {
            return Ok((ctx, p.clone()));
        }
        let pair = Rc::new(compute_u_min(&ctx.model, &ctx.params)?);
        self.pairs.insert((b, c.to_bits(), n), pair.clone());
        Ok((ctx, pair))
    }
}

type Outcome = (bool, String);

fn from_checks(checks: &[Check]) -> Outcome {
    let passed = checks.iter().all(|c| c.passed);
    let detail = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>().join("; ");
    (passed, detail)
}

fn critical_value(cache: &mut Cache, b: Builtin) -> Result<Outcome> {
    let start = Instant::now();
    let ctx = cache.setup(b, 0.0, N)?;
    let bracket = (-1.0, 1.0);
    let estimate = estimate_c0(&ctx.model, bracket, C0_ITERATIONS, &ctx.params)?;
    let infsup = estimate_c0_infsup(&ctx.model, ctx.params.grid())?.value;
    let elapsed = start.elapsed().as_secs_f64();
    let mut checks = c0_checks(&C0Run { estimate, infsup }, bracket, C0_ITERATIONS, Some(0.0), ctx.params.tol_fix);
    checks.push(Check::new("budget", elapsed < C0_BUDGET, format!("{elapsed:.1} s")));
    Ok(from_checks(&checks))
}

fn uniqueness(cache: &mut Cache) -> Result<Outcome> {
    let (_, pair) = cache.pair(Builtin::E3, 0.0, 1024)?;
    let u = pair.u_max.u();
    let (at0, at_pi) = (u.values()[0], u.interpolate(PI));
    let checks = [
        Check::new("gap", pair.gap <= AGREEMENT_TOL, format!("sup|u_max - u_min| = {:.4}", pair.gap)),
        Check::new(
            "nonnegative",
            u.min() >= -1e-6,
            format!("min u_max = {:.3e} (u_min dips to {:.3e})", u.min(), pair.u_min.u.min()),
        ),
        Check::new(
            "endpoints",
            at0.abs() <= 2e-2 && at_pi.abs() <= 2e-2,
            format!("u(0) = {at0:.4}, u(pi) = {at_pi:.4}"),
        ),
    ];
    Ok(from_checks(&checks))
}

fn oracle_agreement(cache: &mut Cache) -> Result<Outcome> {
    let mut checks = Vec::new();
    for (n, limit) in [(1024, AGREEMENT_TOL), (2048, AGREEMENT_TOL / 2.0)] {
        let u_max = if let Some(p) = cache.pairs.get(&(Builtin::E3, 0f64.to_bits(), n)) {
            p.u_max.u().clone()
        } else {
            let ctx = cache.setup(Builtin::E3, 0.0, n)?;
            compute_u_max(&ctx.model, &ctx.params)?.solution.u
        };
        let d = sup_diff(&u_max, &oracle_on_grid(u_max.grid())?)?;
        checks.push(Check::new(format!("n={n}"), d <= limit, format!("distance {d:.4} (limit {limit})")));
    }
    Ok(from_checks(&checks))
}

fn fixed_points() -> Result<Outcome> {
    let grid = PeriodicGrid::circle(N)?;
    let dm = DifferentiableModel::builtin(Builtin::E3, 0.0, &grid)?;
    let found = find_fixed_points(&dm, 64)?;
    let checks = check_e3_fixed_points(&found);
    let passed = checks.iter().all(|c| c.passed);
    let names: Vec<_> = checks.iter().skip(1).map(|c| format!("{} {}", c.name, c.detail)).collect();
    Ok((passed, format!("{} found; {}", found.len(), names.join("; "))))
}

fn multiplicity(cache: &mut Cache) -> Result<Outcome> {
    let (_, pair) = cache.pair(Builtin::E1, 5.0, N)?;
    Ok((
        pair.gap > E1_C5_MARGIN,
        format!("sup|u_max - u_min| = {:.4} (margin {E1_C5_MARGIN})", pair.gap),
    ))
}

fn from_above(cache: &mut Cache) -> Result<Outcome> {
    let (ctx, pair) = cache.pair(Builtin::E3, 0.0, N)?;
    let u_max = pair.u_max.u();
    let params = ctx.params.clone().with_t_max(ABOVE_T_MAX);
    let phi = u_max.shifted(1.0)?;
    let (report, distances) = evolve_tracked(&phi, &ctx.model, &params, Direction::Backward, Some(u_max))?;
    let first = distances.iter().find(|d| d.1 <= AGREEMENT_TOL);
    let last = distances.last().map_or(f64::INFINITY, |d| d.1);
    let detail = match first {
        Some((t, _)) => format!("within {AGREEMENT_TOL} at t = {t:.2}"),
        None => format!("distance {last:.4} at t = {:.1}, limit {AGREEMENT_TOL}", report.t_elapsed),
    };
    Ok((first.is_some(), detail))
}

fn blow_down(cache: &mut Cache) -> Result<Outcome> {
    let (ctx, pair) = cache.pair(Builtin::E3, 0.0, N)?;
    let phi = pair.u_min.u.shifted(-0.5)?;
    let report = hj_core::evolve(&phi, &ctx.model, &ctx.params, Direction::Backward)?;
    let check = blow_down_check(&report, ctx.params.t_max);
    Ok((check.passed, check.detail))
}

fn basin(cache: &mut Cache) -> Result<Outcome> {
    let (ctx, pair) = cache.pair(Builtin::E1, 5.0, N)?;
    let u_max = pair.u_max.u();
    let phi = between(&pair.u_min.u, u_max, 0.01)?;
    let (report, distances) = evolve_tracked(&phi, &ctx.model, &ctx.params, Direction::Backward, Some(u_max))?;
    let d = distances.last().map_or(f64::INFINITY, |d| d.1);
    Ok((
        report.status == hj_core::EvolveStatus::Converged && d <= AGREEMENT_TOL,
        format!("{:?} at t = {:.2}, distance to u_max {d:.2e}", report.status, report.t_elapsed),
    ))
}

fn properties(seed: u64) -> Result<Outcome> {
    let suites = run_suites(seed, DEFAULT_CASES)?;
    let passed = suites.iter().all(|s| s.passed && s.cases >= 100);
    let detail = suites
        .iter()
        .map(|s| format!("{} {:.1e}/{:.0e}", s.name, s.worst, s.bound))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((passed, format!("{DEFAULT_CASES} cases each: {detail}")))
}

fn aubry(cache: &mut Cache) -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut passed = true;
    for (b, c) in [(Builtin::E3, 0.0), (Builtin::E1, 5.0)] {
        let (ctx, pair) = cache.pair(b, c, N)?;
        let u_minus = pair.u_max.u();
        let u_plus = forward_conjugate(u_minus, &ctx.model, &ctx.params)?;
        let set = compute_aubry_set(u_minus, &u_plus.u, default_aubry_tol(&ctx.params))?;
        passed &= !set.is_empty();
        if b == Builtin::E3 {
            passed &= set.contains(0) && set.contains(N / 2);
        }
        parts.push(format!("{} c={c}: {:?}", b.name(), set.indices));
    }
    Ok((passed, parts.join("; ")))
}

const TITLES: [&str; 11] = [
    "critical value of e1",
    "critical value of e3",
    "uniqueness at criticality (e3)",
    "shooting oracle agreement (e3)",
    "rest points of the contact flow (e3)",
    "two solutions above criticality (e1, c=5)",
    "convergence from above by t=100 (e3)",
    "blow-down below u_min (e3)",
    "basin between solutions (e1, c=5)",
    "property suites",
    "nonempty Aubry sets",
];

/// Runs one criterion, turning a numerical error into a failure.
pub fn run_criterion(id: u32, seed: u64) -> CriterionResult {
    run_with(id, seed, &mut Cache::default())
}

fn run_with(id: u32, seed: u64, cache: &mut Cache) -> CriterionResult {
    let start = Instant::now();
    let outcome = match id {
        1 => critical_value(cache, Builtin::E1),
        2 => critical_value(cache, Builtin::E3),
        3 => uniqueness(cache),
        4 => oracle_agreement(cache),
        5 => fixed_points(),
        6 => multiplicity(cache),
        7 => from_above(cache),
        8 => blow_down(cache),
        9 => basin(cache),
        10 => properties(seed),
        11 => aubry(cache),
        _ => Err(Error::InvalidInput(format!("no criterion {id}"))),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    let title = TITLES.get(id.wrapping_sub(1) as usize).copied().unwrap_or("unknown");
    CriterionResult { id, title, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Runs criteria 1 to 11 in order, calling `each` as every one finishes.
pub fn run_all(seed: u64, mut each: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut cache = Cache::default();
    (1..=11)
        .map(|id| {
            let r = run_with(id, seed, &mut cache);
            each(&r);
            r
        })
        .collect()
}
