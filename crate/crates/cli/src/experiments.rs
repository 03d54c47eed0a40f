//! One function per subcommand. Each writes `report.json` plus its CSV (and
//! optionally SVG) artifacts into the output directory and returns the
//! report together with the assertions `--check` acts on.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::{Path, PathBuf};

use hj_core::contactflow::{
    find_fixed_points, integrate, MIN_SHOOTING_CELLS, oracle_on_grid, shooting_oracle, Branch, ContactState, FixedPointClass,
    FixedPointReport,
};
use hj_core::model::subsolution_residual;
use hj_core::report::{svg_line_plot, write_file, Report, Series};
use hj_core::stationary::{
    compute_aubry_set, compute_u_max, compute_u_min, default_aubry_tol, estimate_c0, estimate_c0_infsup,
    forward_conjugate, StationaryPair,
};
use hj_core::{
    evolve_with, sup_diff, Builtin, DifferentiableModel, Direction, Error, EvolveReport, EvolveStatus,
    GridFunction, Model, Result, SemigroupParams,
};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::acceptance;
use crate::config::{ExperimentConfig, ExperimentKind, Init};
use crate::properties::{run_suites, simpson};

/// Distance to the oracle (and between solutions) accepted as agreement.
pub const AGREEMENT_TOL: f64 = 5e-2;
/// Level the minimum must cross for a run to count as blowing down.
pub const BLOW_DOWN_LEVEL: f64 = -50.0;
/// Fraction of the minimum history, at its end, that must be non-increasing.
pub const TAIL_FRACTION: f64 = 0.2;
/// Histories in reports are thinned to about this many samples.
const HISTORY_SAMPLES: usize = 2000;
const FIXED_POINT_SEEDS: usize = 64;
const FIXED_POINT_TOL: f64 = 1e-8;

/// One named assertion of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub checks: Vec<Check>,
    /// Files written, report last.
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs `cfg.experiment` and writes its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Artifacts::new(&cfg.out, cfg.experiment.name());
    out.report.insert("model", &cfg.model)?;
    out.report.insert("n", cfg.n)?;
    let checks = match cfg.experiment {
        ExperimentKind::Solve => solve(cfg, &mut out)?,
        ExperimentKind::C0 => c0(cfg, &mut out)?,
        ExperimentKind::Evolve => evolve_experiment(cfg, &mut out)?,
        ExperimentKind::Flow => flow(cfg, &mut out)?,
        ExperimentKind::Oracle => oracle(cfg, &mut out)?,
        ExperimentKind::Properties => properties(cfg, &mut out)?,
        ExperimentKind::All => all(cfg, &mut out)?,
    };
    out.finish(checks)
}

struct Artifacts {
    dir: PathBuf,
    report: Report,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path, name: &str) -> Self {
        Self { dir: dir.to_path_buf(), report: Report::new(name), files: Vec::new() }
    }

    /// Writes `name` and records it in the report under `key`.
    fn file(&mut self, key: &str, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_file(&path, contents)?;
        self.files.push(path);
        self.report.insert(key, name)
    }

    fn finish(mut self, checks: Vec<Check>) -> Result<Outcome> {
        self.report.insert("checks", &checks)?;
        self.report.insert("passed", checks.iter().all(|c| c.passed))?;
        let path = self.report.write(&self.dir)?;
        self.files.push(path);
        Ok(Outcome { report: self.report, checks, files: self.files })
    }
}

fn points(u: &GridFunction) -> Vec<(f64, f64)> {
    u.grid().nodes().zip(u.values().iter().copied()).collect()
}

fn residual_of(u: &GridFunction, model: &Model, params: &SemigroupParams) -> Result<f64> {
    let stepped = hj_core::backward_step(u, model, params)?;
    Ok(sup_diff(&stepped, u)? / params.dt)
}

/// Whether the builtin's critical value is known to be zero.
fn known_c0(model: &hj_core::ModelSpec) -> Option<f64> {
    match model.builtin {
        Builtin::E1 | Builtin::E3 => Some(0.0),
    }
}

/// The oracle applies to e3 at `c = 0` on an even grid fine enough for
/// the shooting construction.
fn oracle_applies(cfg: &ExperimentConfig) -> bool {
    cfg.model.builtin == Builtin::E3 && cfg.model.c == 0.0 && cfg.n % 2 == 0 && cfg.n >= 2 * MIN_SHOOTING_CELLS
}

fn solve(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let (model, params) = cfg.build()?;
    let grid = *params.grid();
    let pair = compute_u_min(&model, &params)?;
    let u_max = pair.u_max.u();
    let u_plus = forward_conjugate(u_max, &model, &params)?;
    let aubry = compute_aubry_set(u_max, &u_plus.u, default_aubry_tol(&params))?;

    out.file("u_max_csv", "u_max.csv", &u_max.to_csv())?;
    out.file("u_min_csv", "u_min.csv", &pair.u_min.u.to_csv())?;
    out.file("u_min_plus_csv", "u_min_plus.csv", &pair.u_min_plus.u.to_csv())?;
    out.file("u_plus_csv", "u_plus.csv", &u_plus.u.to_csv())?;
    let r = &mut out.report;
    r.insert("dt", params.dt)?;
    r.insert("tol_fix", params.tol_fix)?;
    r.insert("gap", pair.gap)?;
    r.insert("ordered", pair.ordered)?;
    r.insert("start_level", pair.u_max.start)?;
    r.insert("probe_gap", pair.u_max.probe_gap)?;
    r.insert("u_max_residual", residual_of(u_max, &model, &params)?)?;
    r.insert("u_min_residual", residual_of(&pair.u_min.u, &model, &params)?)?;
    r.insert("u_max_min", u_max.min())?;
    r.insert("u_max_at_0", u_max.values()[0])?;
    r.insert("u_max_at_pi", u_max.interpolate(PI))?;
    r.insert("aubry_indices", &aubry.indices)?;
    r.insert("aubry_tol", aubry.tol)?;

    let mut checks = vec![
        Check::new("ordered", pair.ordered, format!("u_min <= u_max + {:e}", params.tol_fix)),
        Check::new("aubry-nonempty", !aubry.is_empty(), format!("{} nodes", aubry.indices.len())),
    ];
    let mut series = vec![Series::new("u_max", points(u_max))];
    if pair.gap > params.tol_fix {
        series.push(Series::new("u_min", points(&pair.u_min.u)));
    }
    if oracle_applies(cfg) {
        let oracle = oracle_on_grid(&grid)?;
        let d = sup_diff(u_max, &oracle)?;
        out.file("oracle_csv", "oracle.csv", &oracle.to_csv())?;
        out.report.insert("oracle_distance", d)?;
        checks.push(Check::new("oracle-agreement", d <= AGREEMENT_TOL, format!("sup distance {d:.6} (limit {AGREEMENT_TOL})")));
        series.push(Series::new("shooting oracle", points(&oracle)));
    }
    if cfg.emit_svg {
        let title = format!("{} at c = {}, n = {}", cfg.model.builtin.name(), cfg.model.c, cfg.n);
        let svg = svg_line_plot(&title, "x", "u(x)", &series)?;
        out.file("svg", "solution.svg", &svg)?;
    }
    Ok(checks)
}

/// Bisection bracket plus the inf-sup bound, with the shared assertions.
pub struct C0Run {
    pub estimate: hj_core::stationary::C0Estimate,
    pub infsup: f64,
}

pub fn c0_checks(run: &C0Run, bracket: (f64, f64), iterations: usize, known: Option<f64>, tol_fix: f64) -> Vec<Check> {
    let est = &run.estimate;
    let width = est.hi - est.lo;
    let expected = (bracket.1 - bracket.0) / 2f64.powi(iterations as i32);
    let mut checks = vec![
        Check::new("monotone", est.monotone, format!("{} probes, {} ambiguous", est.probes.len(), est.ambiguous())),
        Check::new("width", width <= expected * (1.0 + 1e-12), format!("width {width:e} (expected {expected:e})")),
        Check::new(
            "infsup-above-lo",
            run.infsup >= est.lo - tol_fix,
            format!("inf-sup {:.6e} vs lo {:.6e}", run.infsup, est.lo),
        ),
    ];
    if let Some(c0) = known {
        let mid = est.midpoint();
        checks.push(Check::new(
            "near-known-c0",
            (mid - c0).abs() <= AGREEMENT_TOL,
            format!("midpoint {mid:.6e}, known {c0}"),
        ));
        checks.push(Check::new(
            "infsup-near-known-c0",
            run.infsup <= c0 + AGREEMENT_TOL,
            format!("inf-sup {:.6e}", run.infsup),
        ));
    }
    checks
}

fn c0(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let (model, params) = cfg.build()?;
    let estimate = estimate_c0(&model, cfg.bracket, cfg.iterations, &params)?;
    let infsup = estimate_c0_infsup(&model, params.grid())?.value;
    let run = C0Run { estimate, infsup };
    let est = &run.estimate;
    let r = &mut out.report;
    r.insert("c0_lo", est.lo)?;
    r.insert("c0_hi", est.hi)?;
    r.insert("width", est.hi - est.lo)?;
    r.insert("iterations", est.iterations)?;
    r.insert("monotone", est.monotone)?;
    r.insert("ambiguous", est.ambiguous())?;
    r.insert("probes", &est.probes)?;
    r.insert("infsup", infsup)?;
    r.insert("bracket", [cfg.bracket.0, cfg.bracket.1])?;
    Ok(c0_checks(&run, cfg.bracket, cfg.iterations, known_c0(&cfg.model), params.tol_fix))
}

/// `(φ, reference)`: the initial data and, when it is defined relative to
/// them, the solutions the run is compared with.
pub fn initial_data(
    init: Init,
    model: &Model,
    params: &SemigroupParams,
) -> Result<(GridFunction, Option<StationaryPair>, Option<GridFunction>)> {
    let grid = *params.grid();
    Ok(match init {
        Init::Constant(a) => (GridFunction::constant(grid, a)?, None, None),
        Init::AboveMax(a) => {
            let u_max = compute_u_max(model, params)?;
            (u_max.u().shifted(a)?, None, Some(u_max.solution.u))
        }
        Init::BelowMin(a) => {
            let pair = compute_u_min(model, params)?;
            let u_max = pair.u_max.u().clone();
            (pair.u_min.u.shifted(-a)?, Some(pair), Some(u_max))
        }
        Init::Between(a) => {
            let pair = compute_u_min(model, params)?;
            let u_max = pair.u_max.u().clone();
            let phi = between(&pair.u_min.u, &u_max, a)?;
            (phi, Some(pair), Some(u_max))
        }
    })
}

/// The midpoint of `lo` and `hi` raised by `a`, clipped at `hi`.
pub fn between(lo: &GridFunction, hi: &GridFunction, a: f64) -> Result<GridFunction> {
    lo.zip_with(hi, |l, h| (0.5 * (l + h) + a).min(h))
}

/// Minimum history crosses [`BLOW_DOWN_LEVEL`] and its tail never rises.
pub fn blow_down_check(report: &EvolveReport, t_max: f64) -> Check {
    let crossing = report.min_history.iter().find(|(_, v)| *v < BLOW_DOWN_LEVEL).map(|p| p.0);
    let h = &report.min_history;
    let start = ((1.0 - TAIL_FRACTION) * h.len() as f64) as usize;
    let tail_ok = h[start.min(h.len().saturating_sub(1))..].windows(2).all(|w| w[1].1 <= w[0].1);
    let passed = crossing.is_some_and(|t| t < t_max) && tail_ok;
    let detail = match crossing {
        Some(t) => format!("min < {BLOW_DOWN_LEVEL} at t = {t:.3}, tail non-increasing: {tail_ok}"),
        None => format!("min only reached {:.4} by t = {:.3}", report.final_u.min(), report.t_elapsed),
    };
    Check::new("blow-down", passed, detail)
}

fn thin(history: &[(f64, f64)]) -> Vec<[f64; 2]> {
    let stride = history.len().div_ceil(HISTORY_SAMPLES).max(1);
    let mut v: Vec<[f64; 2]> = history.iter().step_by(stride).map(|&(t, x)| [t, x]).collect();
    if let Some(&(t, x)) = history.last() {
        if v.last() != Some(&[t, x]) {
            v.push([t, x]);
        }
    }
    v
}

fn history_csv(report: &EvolveReport) -> String {
    let mut s = String::from("t,min,max\n");
    for ((t, lo), (_, hi)) in report.min_history.iter().zip(&report.max_history) {
        s.push_str(&format!(
            "{},{},{}\n",
            hj_core::domain::fmt_sig(*t),
            hj_core::domain::fmt_sig(*lo),
            hj_core::domain::fmt_sig(*hi)
        ));
    }
    s
}

/// Evolves `phi` and tracks the sup distance to `target` after every step.
pub fn evolve_tracked(
    phi: &GridFunction,
    model: &Model,
    params: &SemigroupParams,
    direction: Direction,
    target: Option<&GridFunction>,
) -> Result<(EvolveReport, Vec<(f64, f64)>)> {
    let mut distances = Vec::new();
    let report = evolve_with(phi, model, params, direction, |t, u| {
        if let Some(target) = target {
            let d = u.iter().zip(target.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            distances.push((t, d));
        }
    })?;
    Ok((report, distances))
}

fn evolve_experiment(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let (model, params) = cfg.build()?;
    let (phi, _, target) = initial_data(cfg.init, &model, &params)?;
    let direction = if cfg.forward { Direction::Forward } else { Direction::Backward };
    let (report, distances) = evolve_tracked(&phi, &model, &params, direction, target.as_ref())?;

    out.file("initial_csv", "initial.csv", &phi.to_csv())?;
    out.file("final_csv_path", "final.csv", &report.final_u.to_csv())?;
    out.file("history_csv", "history.csv", &history_csv(&report))?;
    let r = &mut out.report;
    r.insert("init", cfg.init.to_string())?;
    r.insert("direction", direction)?;
    r.insert("dt", params.dt)?;
    r.insert("t_max", params.t_max)?;
    r.insert("status", report.status)?;
    r.insert("t_elapsed", report.t_elapsed)?;
    r.insert("steps", report.steps)?;
    r.insert("last_rate", report.last_rate)?;
    r.insert("min_history", thin(&report.min_history))?;
    r.insert("max_history", thin(&report.max_history))?;
    let final_distance = distances.last().map(|d| d.1);
    if let Some(d) = final_distance {
        r.insert("distance_to_u_max", d)?;
        let first = distances.iter().find(|p| p.1 <= AGREEMENT_TOL).map(|p| p.0);
        r.insert("first_within_tol", first)?;
    }
    if cfg.emit_svg {
        let mut series = vec![Series::new("initial", points(&phi)), Series::new("final", points(&report.final_u))];
        if let Some(t) = &target {
            series.push(Series::new("u_max", points(t)));
        }
        let svg = svg_line_plot(&format!("evolve from {}", cfg.init), "x", "u(x)", &series)?;
        out.file("svg", "evolve.svg", &svg)?;
    }

    let diverged = matches!(report.status, EvolveStatus::DivergedDown | EvolveStatus::DivergedUp);
    let checks = match cfg.init {
        Init::Constant(_) => Vec::new(),
        Init::BelowMin(_) => vec![blow_down_check(&report, params.t_max)],
        Init::AboveMax(_) | Init::Between(_) => {
            if diverged {
                return Err(Error::Diverged { min: report.final_u.min(), t: report.t_elapsed });
            }
            let d = final_distance.unwrap_or(f64::INFINITY);
            let mut checks = vec![Check::new(
                "reaches-u-max",
                d <= AGREEMENT_TOL,
                format!("distance {d:.6} at t = {:.3} (limit {AGREEMENT_TOL})", report.t_elapsed),
            )];
            if matches!(cfg.init, Init::Between(_)) {
                checks.push(Check::new(
                    "converged",
                    report.status == EvolveStatus::Converged,
                    format!("{:?} at t = {:.3}", report.status, report.t_elapsed),
                ));
            }
            checks
        }
    };
    Ok(checks)
}

/// A fixed point as the flat JSON row of the report.
pub fn fixed_point_row(f: &FixedPointReport) -> serde_json::Value {
    json!({
        "x": f.state.x,
        "u": f.state.u,
        "p": f.state.p,
        "eigen_re1": f.eigenvalues[0].re,
        "eigen_im1": f.eigenvalues[0].im,
        "eigen_re2": f.eigenvalues[1].re,
        "eigen_im2": f.eigenvalues[1].im,
        "class": f.class,
        "isolated": f.isolated,
    })
}

fn sorted_pair(e: [Complex64; 2]) -> [Complex64; 2] {
    let mut e = e;
    e.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    e
}

/// The four rest points of e3 with their linearizations.
pub fn check_e3_fixed_points(found: &[FixedPointReport]) -> Vec<Check> {
    let s7 = 7f64.sqrt() / 2.0;
    let expected = [
        ("P1", 0.0, 0.0, FixedPointClass::Saddle, [Complex64::new(-2.0, 0.0), Complex64::new(2.0, 0.0)]),
        ("P2", PI, 0.0, FixedPointClass::Saddle, [Complex64::new(-2.0, 0.0), Complex64::new(2.0, 0.0)]),
        ("P3", FRAC_PI_2, 2.0, FixedPointClass::StableFocus, [Complex64::new(-0.5, -s7), Complex64::new(-0.5, s7)]),
        ("P4", 3.0 * FRAC_PI_2, -2.0, FixedPointClass::UnstableFocus, [Complex64::new(0.5, -s7), Complex64::new(0.5, s7)]),
    ];
    let mut checks = vec![Check::new("count", found.len() == 4, format!("{} rest points", found.len()))];
    for (name, x, u, class, eig) in expected {
        let hit = found.iter().find(|f| {
            let dx = (f.state.x - x).rem_euclid(TAU);
            dx.min(TAU - dx) <= FIXED_POINT_TOL && (f.state.u - u).abs() <= FIXED_POINT_TOL && f.state.p.abs() <= FIXED_POINT_TOL
        });
        let check = match hit {
            None => Check::new(name, false, format!("no rest point within {FIXED_POINT_TOL:e} of ({x:.6}, {u}, 0)")),
            Some(f) => {
                let got = sorted_pair(f.eigenvalues);
                let err = got.iter().zip(sorted_pair(eig).iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                Check::new(
                    name,
                    f.class == class && err <= FIXED_POINT_TOL,
                    format!("{:?}, eigenvalue error {err:.2e}", f.class),
                )
            }
        };
        checks.push(check);
    }
    checks
}

fn flow(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let grid = cfg.grid()?;
    let dm = DifferentiableModel::builtin(cfg.model.builtin, cfg.model.c, &grid)?;
    if cfg.fixed_points {
        let found = find_fixed_points(&dm, FIXED_POINT_SEEDS)?;
        let rows: Vec<_> = found.iter().map(fixed_point_row).collect();
        out.report.insert("fixed_points", rows)?;
        let applies = cfg.model.builtin == Builtin::E3 && cfg.model.c == 0.0;
        return Ok(if applies { check_e3_fixed_points(&found) } else { Vec::new() });
    }
    let [x, u, p] = cfg.state.unwrap_or([1.0, 0.0, 0.5]);
    let s0 = ContactState::new(x, u, p);
    let t_span = cfg.t_max.unwrap_or(20.0);
    let h = cfg.dt.unwrap_or(1e-3);
    let direction = Direction::Forward;
    let tr = integrate(s0, &dm, t_span, h, direction)?;
    out.file("trajectory_csv", "trajectory.csv", &tr.to_csv())?;
    let h0 = tr.energy[0];
    let r = &mut out.report;
    r.insert("state", [x, u, p])?;
    r.insert("h", h)?;
    r.insert("t_span", t_span)?;
    r.insert("direction", direction)?;
    r.insert("samples", tr.samples.len())?;
    r.insert("blew_up", tr.blew_up)?;
    r.insert("energy_start", h0)?;
    r.insert("energy_end", *tr.energy.last().unwrap_or(&h0))?;
    let check = if h0.abs() <= 1e-12 {
        let drift = tr.energy.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        out.report.insert("max_energy", drift)?;
        let bound = 1e-8 * (1.0 + t_span);
        Check::new("shell-conservation", drift <= bound, format!("max |H| {drift:.3e} (limit {bound:.1e})"))
    } else {
        let lam: Vec<f64> = tr.samples.iter().map(|(_, s)| dm.model().discount(s.x)).collect();
        let mut worst = 0.0_f64;
        for k in 1..lam.len() {
            let integral = simpson(&lam[..=k], tr.h);
            worst = worst.max((tr.energy[k] / (h0 * (-integral).exp()) - 1.0).abs());
        }
        out.report.insert("decay_law_error", worst)?;
        Check::new("energy-decay", worst <= 1e-5, format!("relative error {worst:.3e} (limit 1e-5)"))
    };
    Ok(vec![check])
}

fn oracle(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    if !oracle_applies(cfg) {
        return Err(Error::InvalidInput(format!(
            "the shooting oracle describes e3 at c = 0 on an even grid with n >= {}",
            2 * MIN_SHOOTING_CELLS
        )));
    }
    let grid = cfg.grid()?;
    let v = oracle_on_grid(&grid)?;
    let left = shooting_oracle(Branch::Left, cfg.n / 2)?;
    let right = shooting_oracle(Branch::Right, cfg.n / 2)?;
    let model = Model::builtin(Builtin::E3, 0.0, &grid)?;
    let residual = subsolution_residual(&v, &model)?.max();
    out.file("oracle_csv", "oracle.csv", &v.to_csv())?;
    let flag = left.radicand_flag || right.radicand_flag;
    let r = &mut out.report;
    r.insert("v_half_pi", v.interpolate(FRAC_PI_2))?;
    r.insert("v_at_0", v.values()[0])?;
    r.insert("v_at_pi", v.interpolate(PI))?;
    r.insert("kink_left_x", left.xs[left.kink])?;
    r.insert("kink_right_x", right.xs[right.kink])?;
    r.insert("radicand_flag", flag)?;
    r.insert("max_residual", residual)?;
    if cfg.emit_svg {
        let svg = svg_line_plot("shooting solution of e3", "x", "v(x)", &[Series::new("v", points(&v))])?;
        out.file("svg", "oracle.svg", &svg)?;
    }
    Ok(vec![
        Check::new("radicand", !flag, "no negative radicand beyond tolerance"),
        Check::new("endpoints", v.values()[0] == 0.0 && v.interpolate(PI) == 0.0, "v(0) = v(π) = 0"),
        Check::new("residual", residual <= AGREEMENT_TOL, format!("max residual {residual:.3e}")),
    ])
}

fn properties(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let suites = run_suites(cfg.seed, cfg.cases)?;
    out.report.insert("seed", cfg.seed)?;
    out.report.insert("suites", &suites)?;
    Ok(suites
        .iter()
        .map(|s| Check::new(s.name, s.passed, format!("{} cases, worst {:.3e}, bound {:.1e}", s.cases, s.worst, s.bound)))
        .collect())
}

fn all(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let results = acceptance::run_all(cfg.seed, |r| println!("{}", r.line()));
    out.report.insert("seed", cfg.seed)?;
    out.report.insert("criteria", &results)?;
    Ok(results
        .iter()
        .map(|r| Check::new(format!("criterion-{}", r.id), r.passed, r.detail.clone()))
        .collect())
}
