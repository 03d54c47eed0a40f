//! Hamiltonian data `H(x, p) + λ(x) u = c`, its tabulated Lagrangian, and
//! discrete subsolution residuals.

use std::fmt;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::domain::{GridFunction, PeriodicGrid};
use crate::error::{Error, Result};

pub type Sampler2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Sampler1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative allowance for negative second differences in the convexity checks.
pub const TOL_CONVEX: f64 = 1e-9;
/// Absolute allowance in the Fenchel-Young inequality.
pub const TOL_FY: f64 = 1e-6;
/// Default half-width of the momentum range.
pub const DEFAULT_P_MAX: f64 = 10.0;
/// Default half-width of the velocity range.
pub const DEFAULT_V_MAX: f64 = 8.0;
/// Default number of momentum samples used by the Legendre transform.
pub const DEFAULT_P_SAMPLES: usize = 2048;
/// Default number of tabulated velocities.
pub const DEFAULT_VELOCITIES: usize = 129;
/// Smallest accepted velocity table.
pub const MIN_VELOCITIES: usize = 64;

/// The two worked examples on the circle. Both use `λ(x) = sin x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    /// `½|p|² + sin x · u = c`
    E1,
    /// `½|p|² + sin x · u + cos 2x − 1 = c`
    E3,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::E1 => "e1",
            Builtin::E3 => "e3",
        }
    }
}

impl std::str::FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "e1" => Ok(Builtin::E1),
            "e3" => Ok(Builtin::E3),
            other => Err(Error::InvalidInput(format!("unknown builtin model {other:?}"))),
        }
    }
}

/// Serializable model description: a builtin plus numerical ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub builtin: Builtin,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default = "default_velocities")]
    pub n_velocities: usize,
}

fn default_p_max() -> f64 {
    DEFAULT_P_MAX
}
fn default_v_max() -> f64 {
    DEFAULT_V_MAX
}
fn default_velocities() -> usize {
    DEFAULT_VELOCITIES
}

impl ModelSpec {
    pub fn builtin(builtin: Builtin, c: f64) -> Self {
        Self {
            builtin,
            c,
            p_max: DEFAULT_P_MAX,
            v_max: DEFAULT_V_MAX,
            n_velocities: DEFAULT_VELOCITIES,
        }
    }

    pub fn build(&self, grid: &PeriodicGrid) -> Result<Model> {
        let mut model = Model::builtin(self.builtin, self.c, grid)?;
        model.p_max = positive("p_max", self.p_max)?;
        model.v_max = positive("v_max", self.v_max)?;
        model.check_convex(grid)?;
        Ok(model)
    }
}

fn positive(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!("{what} must be positive, got {v}")))
    }
}

/// Hamiltonian data for `H(x, Du) + λ(x) u = c`.
#[derive(Clone)]
pub struct Model {
    name: String,
    hamiltonian: Sampler2,
    discount: Sampler1,
    c: f64,
    p_max: f64,
    v_max: f64,
    lambda_max: f64,
    sign_change: bool,
    builtin: Option<Builtin>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("c", &self.c)
            .field("p_max", &self.p_max)
            .field("v_max", &self.v_max)
            .field("lambda_max", &self.lambda_max)
            .field("sign_change", &self.sign_change)
            .finish_non_exhaustive()
    }
}

impl Model {
    /// Builds a model from samplers. `lambda_max` and the sign-change
    /// diagnostic are evaluated on `grid`.
    pub fn custom(
        name: impl Into<String>,
        hamiltonian: Sampler2,
        discount: Sampler1,
        c: f64,
        p_max: f64,
        v_max: f64,
        grid: &PeriodicGrid,
    ) -> Result<Self> {
        let p_max = positive("p_max", p_max)?;
        let v_max = positive("v_max", v_max)?;
        if !c.is_finite() {
            return Err(Error::InvalidInput(format!("c must be finite, got {c}")));
        }
        let mut model = Self {
            name: name.into(),
            hamiltonian,
            discount,
            c,
            p_max,
            v_max,
            lambda_max: 0.0,
            sign_change: false,
            builtin: None,
        };
        model.refresh_discount_stats(grid);
        model.check_convex(grid)?;
        Ok(model)
    }

    pub fn builtin(which: Builtin, c: f64, grid: &PeriodicGrid) -> Result<Self> {
        let hamiltonian: Sampler2 = match which {
            Builtin::E1 => Arc::new(|_x, p| 0.5 * p * p),
            Builtin::E3 => Arc::new(|x: f64, p| 0.5 * p * p + (2.0 * x).cos() - 1.0),
        };
        let mut model = Self::custom(
            which.name(),
            hamiltonian,
            Arc::new(f64::sin),
            c,
            DEFAULT_P_MAX,
            DEFAULT_V_MAX,
            grid,
        )?;
        model.builtin = Some(which);
        Ok(model)
    }

    fn refresh_discount_stats(&mut self, grid: &PeriodicGrid) {
        let lam: Vec<f64> = grid.nodes().map(|x| (self.discount)(x)).collect();
        self.lambda_max = lam.iter().fold(0.0, |m, l| m.max(l.abs()));
        self.sign_change = lam.iter().any(|&l| l > 0.0) && lam.iter().any(|&l| l < 0.0);
    }

    /// Checks discrete convexity of `H(x_i, ·)` on the momentum grid at every node.
    pub fn check_convex(&self, grid: &PeriodicGrid) -> Result<()> {
        let ps = momentum_grid(self.p_max, DEFAULT_P_SAMPLES);
        let mut h = vec![0.0; ps.len()];
        for x in grid.nodes() {
            for (hk, &p) in h.iter_mut().zip(&ps) {
                *hk = self.hamiltonian(x, p);
            }
            if let Some(i) = h.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("H({x}, {}) = {}", ps[i], h[i])));
            }
            let scale = h.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for w in h.windows(3) {
                let d2 = w[0] - 2.0 * w[1] + w[2];
                if d2 < -TOL_CONVEX * scale {
                    return Err(Error::NotConvex { x, second_difference: d2 });
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn builtin_kind(&self) -> Option<Builtin> {
        self.builtin
    }

    pub fn hamiltonian(&self, x: f64, p: f64) -> f64 {
        (self.hamiltonian)(x, p)
    }

    pub fn discount(&self, x: f64) -> f64 {
        (self.discount)(x)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// `max |λ|` over the grid the model was built on.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Whether `λ` takes both signs on the grid.
    pub fn sign_change(&self) -> bool {
        self.sign_change
    }

    /// Same data with a different right-hand side.
    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    pub fn with_ranges(&self, p_max: f64, v_max: f64) -> Result<Self> {
        Ok(Self { p_max: positive("p_max", p_max)?, v_max: positive("v_max", v_max)?, ..self.clone() })
    }

    /// The model with `H + a` in place of `H`.
    pub fn with_hamiltonian_shift(&self, a: f64) -> Self {
        let h = self.hamiltonian.clone();
        Self {
            name: format!("{}+({a})", self.name),
            hamiltonian: Arc::new(move |x, p| h(x, p) + a),
            builtin: None,
            ..self.clone()
        }
    }

    /// The model `(H(x, −p), −λ, c)`, whose Lagrangian is `L(x, −v)`.
    pub fn reflected(&self) -> Self {
        let h = self.hamiltonian.clone();
        let l = self.discount.clone();
        Self {
            name: format!("reflected({})", self.name),
            hamiltonian: Arc::new(move |x, p| h(x, -p)),
            discount: Arc::new(move |x| -l(x)),
            builtin: None,
            ..self.clone()
        }
    }

    /// `λ` sampled at the grid nodes.
    pub fn discount_on(&self, grid: &PeriodicGrid) -> Vec<f64> {
        grid.nodes().map(|x| self.discount(x)).collect()
    }

    /// `max_x H(x, 0)` in absolute value, over the grid.
    pub fn h0_sup(&self, grid: &PeriodicGrid) -> f64 {
        grid.nodes().fold(0.0, |m, x| m.max(self.hamiltonian(x, 0.0).abs()))
    }
}

/// Symmetric sample points `−max, …, max`; the middle sample is exactly zero
/// when `count` is odd, and `v[count − 1 − j] == −v[j]` bit for bit.
pub fn symmetric_samples(max: f64, count: usize) -> Vec<f64> {
    let denom = (count - 1) as f64;
    (0..count).map(|j| max * ((2 * j) as f64 - denom) / denom).collect()
}

fn momentum_grid(p_max: f64, count: usize) -> Vec<f64> {
    symmetric_samples(p_max, count)
}

/// `L(x_i, v_j)` on a grid and velocity table.
#[derive(Debug, Clone)]
pub struct LagrangianTable {
    grid: PeriodicGrid,
    velocities: Vec<f64>,
    /// Row-major `n × m`.
    values: Vec<f64>,
    boundary_hits: usize,
}

impl LagrangianTable {
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn m(&self) -> usize {
        self.velocities.len()
    }

    pub fn v_max(&self) -> f64 {
        *self.velocities.last().expect("velocity table is never empty")
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.velocities.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.velocities.len();
        &self.values[i * m..(i + 1) * m]
    }

    /// Number of `(node, velocity)` entries whose maximizing momentum sat on
    /// the edge of the momentum range.
    pub fn boundary_hits(&self) -> usize {
        self.boundary_hits
    }

    /// Piecewise-linear interpolation along the velocity axis at node `i`.
    /// Clamped to the table's range.
    pub fn interpolate_velocity(&self, i: usize, v: f64) -> f64 {
        let row = self.row(i);
        let m = row.len();
        let vmax = self.v_max();
        let s = ((v + vmax) / (2.0 * vmax) * (m - 1) as f64).clamp(0.0, (m - 1) as f64);
        let k = (s.floor() as usize).min(m - 2);
        let t = s - k as f64;
        (1.0 - t) * row[k] + t * row[k + 1]
    }

    /// The table of `L(x, −v)`.
    pub fn reflected(&self) -> Self {
        let m = self.velocities.len();
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.grid.n() {
            values.extend(self.row(i).iter().rev());
        }
        debug_assert_eq!(values.len(), self.grid.n() * m);
        Self { values, ..self.clone() }
    }

    /// Maximum violation of discrete convexity along the velocity axis,
    /// relative to the row scale (zero when convex).
    pub fn convexity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.grid.n() {
            let row = self.row(i);
            let scale = row.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for w in row.windows(3) {
                worst = worst.max(-(w[0] - 2.0 * w[1] + w[2]) / scale);
            }
        }
        worst
    }

    /// Debugging export: header `x,v_0,…,v_{m-1}` then one row per node.
    pub fn to_csv(&self) -> String {
        use crate::domain::fmt_sig;
        let mut out = String::from("x");
        for v in &self.velocities {
            out.push(',');
            out.push_str(&fmt_sig(*v));
        }
        out.push('\n');
        for i in 0..self.grid.n() {
            out.push_str(&fmt_sig(self.grid.node(i)));
            for v in self.row(i) {
                out.push(',');
                out.push_str(&fmt_sig(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Discrete Legendre transform `L(x_i, v_j) = max_p [v_j p − H(x_i, p)]`
/// over a dense momentum grid, sharpened by a parabolic fit around the
/// discrete maximizer.
///
/// Maximizers on the edge of the momentum range are counted, logged, and
/// rejected when `strict` is set.
pub fn legendre_transform(
    model: &Model,
    grid: &PeriodicGrid,
    m: usize,
    strict: bool,
) -> Result<LagrangianTable> {
    legendre_transform_with(model, grid, m, DEFAULT_P_SAMPLES, strict)
}

pub fn legendre_transform_with(
    model: &Model,
    grid: &PeriodicGrid,
    m: usize,
    p_samples: usize,
    strict: bool,
) -> Result<LagrangianTable> {
    if m < MIN_VELOCITIES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_VELOCITIES} velocities, got {m}"
        )));
    }
    if p_samples < 3 {
        return Err(Error::InvalidInput("need at least 3 momentum samples".into()));
    }
    let velocities = symmetric_samples(model.v_max(), m);
    let ps = momentum_grid(model.p_max(), p_samples);
    let dp = ps[1] - ps[0];
    let mut h = vec![0.0; ps.len()];
    let mut values = Vec::with_capacity(grid.n() * m);
    let mut boundary_hits = 0;
    let mut first_hit = None;
    for (i, x) in grid.nodes().enumerate() {
        for (hk, &p) in h.iter_mut().zip(&ps) {
            *hk = model.hamiltonian(x, p);
        }
        for &v in &velocities {
            let (k, best) = ps
                .iter()
                .zip(&h)
                .map(|(&p, &hp)| v * p - hp)
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, g)| if g > acc.1 { (k, g) } else { acc });
            if k == 0 || k == ps.len() - 1 {
                boundary_hits += 1;
                first_hit.get_or_insert(i);
                values.push(best);
                continue;
            }
            let gm = v * ps[k - 1] - h[k - 1];
            let gp = v * ps[k + 1] - h[k + 1];
            let curv = 2.0 * best - gm - gp;
            let refined = if curv > 0.0 {
                best + (gm - gp) * (gm - gp) / (8.0 * curv)
            } else {
                best
            };
            // the fitted vertex must stay inside the bracketing cell
            let shift = if curv > 0.0 { 0.5 * (gp - gm) / curv * dp } else { 0.0 };
            values.push(if shift.abs() <= dp { refined } else { best });
        }
    }
    if let Some(node) = first_hit {
        warn!(
            "legendre transform: {boundary_hits} maximizers on the momentum range boundary \
             (first at node {node}); widen p_max"
        );
        if strict {
            return Err(Error::RangeBoundary { what: "momentum", node });
        }
    }
    Ok(LagrangianTable { grid: *grid, velocities, values, boundary_hits })
}

/// Number of convex combinations sampled between the one-sided gradients.
const RESIDUAL_INTERIOR_SAMPLES: usize = 9;

/// Per-node residual `max_q H(x_i, q) + λ(x_i) u_i − c` over the one-sided
/// difference gradients and nine convex combinations of them.
pub fn subsolution_residual(u: &GridFunction, model: &Model) -> Result<GridFunction> {
    let grid = *u.grid();
    let h = grid.spacing();
    let values = (0..grid.n())
        .map(|i| {
            let x = grid.node(i);
            let ui = u.values()[i];
            let back = (ui - u.at(i as isize - 1)) / h;
            let fwd = (u.at(i as isize + 1) - ui) / h;
            let n = RESIDUAL_INTERIOR_SAMPLES + 1;
            let hmax = (0..=n)
                .map(|k| {
                    let t = k as f64 / n as f64;
                    model.hamiltonian(x, (1.0 - t) * back + t * fwd)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            hmax + model.discount(x) * ui - model.c()
        })
        .collect();
    GridFunction::new(grid, values)
}

/// Analytic partial derivatives that go with a [`Model`].
#[derive(Clone)]
pub struct Partials {
    pub dh_dx: Sampler2,
    pub dh_dp: Sampler2,
    pub dlambda_dx: Sampler1,
}

/// A model with analytic partials, as needed by the contact flow.
#[derive(Clone)]
pub struct DifferentiableModel {
    model: Model,
    partials: Partials,
}

impl fmt::Debug for DifferentiableModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DifferentiableModel").field("model", &self.model).finish_non_exhaustive()
    }
}

impl DifferentiableModel {
    pub fn new(model: Model, partials: Partials) -> Self {
        Self { model, partials }
    }

    pub fn builtin(which: Builtin, c: f64, grid: &PeriodicGrid) -> Result<Self> {
        let model = Model::builtin(which, c, grid)?;
        let dh_dx: Sampler2 = match which {
            Builtin::E1 => Arc::new(|_x, _p| 0.0),
            Builtin::E3 => Arc::new(|x: f64, _p| -2.0 * (2.0 * x).sin()),
        };
        Ok(Self::new(
            model,
            Partials { dh_dx, dh_dp: Arc::new(|_x, p| p), dlambda_dx: Arc::new(f64::cos) },
        ))
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// `H(x, p) + λ(x) u − c`.
    pub fn contact_hamiltonian(&self, x: f64, u: f64, p: f64) -> f64 {
        self.model.hamiltonian(x, p) + self.model.discount(x) * u - self.model.c()
    }

    pub fn dh_dx(&self, x: f64, p: f64) -> f64 {
        (self.partials.dh_dx)(x, p)
    }

    pub fn dh_dp(&self, x: f64, p: f64) -> f64 {
        (self.partials.dh_dp)(x, p)
    }

    pub fn dlambda_dx(&self, x: f64) -> f64 {
        (self.partials.dlambda_dx)(x)
    }
}
