//! Experiment configuration: an optional TOML file, overridden by flags,
//! with `HJ_OUT_DIR` as the output fallback.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use hj_core::model::legendre_transform;
use hj_core::report::read_file;
use hj_core::{Builtin, Error, Model, ModelSpec, PeriodicGrid, Result, SemigroupParams};
use serde::{Deserialize, Serialize};

pub const OUT_DIR_ENV: &str = "HJ_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "hj-out";
pub const DEFAULT_N: usize = 512;
pub const DEFAULT_SEED: u64 = 20240917;
pub const DEFAULT_ITERATIONS: usize = 20;
pub const DEFAULT_BRACKET: (f64, f64) = (-1.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Solve,
    C0,
    Evolve,
    Flow,
    Oracle,
    Properties,
    All,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::C0 => "c0",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Flow => "flow",
            ExperimentKind::Oracle => "oracle",
            ExperimentKind::Properties => "properties",
            ExperimentKind::All => "all",
        }
    }
}

/// Initial data for `evolve`, relative to the stationary solutions where
/// that is how the experiment is phrased.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// `const:<a>` or a bare number.
    Constant(f64),
    /// `umax+<a>`
    AboveMax(f64),
    /// `umin-<a>`
    BelowMin(f64),
    /// `mid+<a>`: the midpoint of `u_min` and `u_max` plus `a`, clipped at `u_max`.
    Between(f64),
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("bad number {t:?} in init {s:?}")))
        };
        if let Some(rest) = s.strip_prefix("const:") {
            Ok(Init::Constant(num(rest)?))
        } else if let Some(rest) = s.strip_prefix("umax+") {
            Ok(Init::AboveMax(num(rest)?))
        } else if let Some(rest) = s.strip_prefix("umin-") {
            Ok(Init::BelowMin(num(rest)?))
        } else if let Some(rest) = s.strip_prefix("mid+") {
            Ok(Init::Between(num(rest)?))
        } else if let Ok(v) = num(s) {
            Ok(Init::Constant(v))
        } else {
            Err(Error::InvalidInput(format!(
                "unknown init {s:?}; expected const:<a>, umax+<a>, umin-<a> or mid+<a>"
            )))
        }
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Init::Constant(a) => write!(f, "const:{a}"),
            Init::AboveMax(a) => write!(f, "umax+{a}"),
            Init::BelowMin(a) => write!(f, "umin-{a}"),
            Init::Between(a) => write!(f, "mid+{a}"),
        }
    }
}

/// Contents of a config file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentKind>,
    pub model: Option<ModelSpec>,
    pub n: Option<usize>,
    pub period: Option<f64>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub tol_fix: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub emit_svg: Option<bool>,
    pub init: Option<String>,
    pub forward: Option<bool>,
    pub bracket: Option<[f64; 2]>,
    pub iterations: Option<usize>,
    pub fixed_points: Option<bool>,
    pub state: Option<[f64; 3]>,
    pub cases: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub model: Option<Builtin>,
    pub c: Option<f64>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub out: Option<PathBuf>,
    pub emit_svg: bool,
    pub check: bool,
    pub seed: Option<u64>,
    pub init: Option<Init>,
    pub forward: bool,
    pub bracket: Option<(f64, f64)>,
    pub iterations: Option<usize>,
    pub fixed_points: bool,
    pub state: Option<[f64; 3]>,
    pub cases: Option<usize>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelSpec,
    pub n: usize,
    pub period: f64,
    /// `None` picks the automatic step.
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub tol_fix: Option<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub emit_svg: bool,
    pub check: bool,
    pub init: Init,
    pub forward: bool,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub fixed_points: bool,
    pub state: Option<[f64; 3]>,
    /// Cases per property suite.
    pub cases: usize,
}

impl ExperimentConfig {
    /// Defaults for `experiment` on the e3 model at `c = 0`.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            model: ModelSpec::builtin(Builtin::E3, 0.0),
            n: DEFAULT_N,
            period: TAU,
            dt: None,
            t_max: None,
            tol_fix: None,
            out: PathBuf::from(DEFAULT_OUT_DIR),
            seed: DEFAULT_SEED,
            emit_svg: false,
            check: false,
            init: Init::Constant(0.0),
            forward: false,
            bracket: DEFAULT_BRACKET,
            iterations: DEFAULT_ITERATIONS,
            fixed_points: false,
            state: None,
            cases: crate::properties::DEFAULT_CASES,
        }
    }

    /// Layers flags over the file over the defaults. The output directory
    /// falls back to `env_out` (the value of `HJ_OUT_DIR`) when neither the
    /// flags nor the file set it.
    pub fn resolve(
        experiment: ExperimentKind,
        file: Option<ConfigFile>,
        flags: &Overrides,
        env_out: Option<PathBuf>,
    ) -> Result<Self> {
        let file = file.unwrap_or_default();
        if let Some(kind) = file.experiment {
            if kind != experiment {
                return Err(Error::InvalidInput(format!(
                    "config file is for experiment {:?}, not {:?}",
                    kind.name(),
                    experiment.name()
                )));
            }
        }
        let mut cfg = Self::new(experiment);
        if let Some(model) = file.model {
            cfg.model = model;
        }
        if let Some(b) = flags.model {
            cfg.model.builtin = b;
        }
        if let Some(c) = flags.c {
            cfg.model.c = c;
        }
        cfg.n = flags.n.or(file.n).unwrap_or(cfg.n);
        cfg.period = file.period.unwrap_or(cfg.period);
        cfg.dt = flags.dt.or(file.dt);
        cfg.t_max = flags.t_max.or(file.t_max);
        cfg.tol_fix = file.tol_fix;
        cfg.out = flags.out.clone().or(file.out).or(env_out).unwrap_or(cfg.out);
        cfg.seed = flags.seed.or(file.seed).unwrap_or(cfg.seed);
        cfg.emit_svg = flags.emit_svg || file.emit_svg.unwrap_or(false);
        cfg.check = flags.check;
        cfg.init = match (flags.init, file.init) {
            (Some(i), _) => i,
            (None, Some(s)) => s.parse()?,
            (None, None) => cfg.init,
        };
        cfg.forward = flags.forward || file.forward.unwrap_or(false);
        cfg.bracket = flags.bracket.or(file.bracket.map(|[a, b]| (a, b))).unwrap_or(cfg.bracket);
        cfg.iterations = flags.iterations.or(file.iterations).unwrap_or(cfg.iterations);
        cfg.fixed_points = flags.fixed_points || file.fixed_points.unwrap_or(false);
        cfg.state = flags.state.or(file.state);
        cfg.cases = flags.cases.or(file.cases).unwrap_or(cfg.cases);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.period - TAU).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "the builtin models live on a circle of length 2π, got period {}",
                self.period
            )));
        }
        if !self.model.c.is_finite() {
            return Err(Error::InvalidInput(format!("c must be finite, got {}", self.model.c)));
        }
        let positive = |what: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                Err(Error::InvalidInput(format!("{what} must be positive, got {x}")))
            }
            _ => Ok(()),
        };
        positive("dt", self.dt)?;
        positive("t_max", self.t_max)?;
        positive("tol_fix", self.tol_fix)?;
        if !(self.bracket.0 < self.bracket.1) {
            return Err(Error::InvalidBracket(format!(
                "need lo < hi, got [{}, {}]",
                self.bracket.0, self.bracket.1
            )));
        }
        if self.cases == 0 {
            return Err(Error::InvalidInput("cases must be at least 1".into()));
        }
        PeriodicGrid::new(self.n, self.period)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.n, self.period)
    }

    /// The model, its Lagrangian table and the step parameters.
    pub fn build(&self) -> Result<(Model, SemigroupParams)> {
        let grid = self.grid()?;
        let model = self.model.build(&grid)?;
        build_params(&model, &grid, self.model.n_velocities, self.dt, self.t_max, self.tol_fix)
            .map(|p| (model, p))
    }
}

/// Tabulates the Lagrangian and applies the optional overrides.
pub fn build_params(
    model: &Model,
    grid: &PeriodicGrid,
    n_velocities: usize,
    dt: Option<f64>,
    t_max: Option<f64>,
    tol_fix: Option<f64>,
) -> Result<SemigroupParams> {
    let table = Arc::new(legendre_transform(model, grid, n_velocities, false)?);
    let mut params = SemigroupParams::auto(model, table);
    if let Some(dt) = dt {
        params = params.with_dt(dt);
    }
    if let Some(t) = t_max {
        params = params.with_t_max(t);
    }
    if let Some(t) = tol_fix {
        params = params.with_tol_fix(t);
    }
    params.validate(model)?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_parsing() {
        assert_eq!("2".parse::<Init>().unwrap(), Init::Constant(2.0));
        assert_eq!("const:-1.5".parse::<Init>().unwrap(), Init::Constant(-1.5));
        assert_eq!("umax+1".parse::<Init>().unwrap(), Init::AboveMax(1.0));
        assert_eq!("umin-0.5".parse::<Init>().unwrap(), Init::BelowMin(0.5));
        assert_eq!("mid+0.01".parse::<Init>().unwrap(), Init::Between(0.01));
        assert!("umax+x".parse::<Init>().is_err());
        assert!("sideways".parse::<Init>().is_err());
        let i = Init::Between(0.01);
        assert_eq!(i.to_string().parse::<Init>().unwrap(), i);
    }

    #[test]
    fn flags_beat_file_beat_env() {
        let file: ConfigFile = toml::from_str(
            "n = 128\nout = \"from-file\"\n[model]\nbuiltin = \"e1\"\nc = 5.0\n",
        )
        .unwrap();
        let flags = Overrides { n: Some(64), ..Overrides::default() };
        let cfg = ExperimentConfig::resolve(ExperimentKind::Solve, Some(file.clone()), &flags, Some("env".into()))
            .unwrap();
        assert_eq!(cfg.n, 64);
        assert_eq!(cfg.model.builtin, Builtin::E1);
        assert_eq!(cfg.model.c, 5.0);
        assert_eq!(cfg.out, PathBuf::from("from-file"));

        let bare = ExperimentConfig::resolve(ExperimentKind::Solve, None, &Overrides::default(), Some("env".into()))
            .unwrap();
        assert_eq!(bare.out, PathBuf::from("env"));
        let none = ExperimentConfig::resolve(ExperimentKind::Solve, None, &Overrides::default(), None).unwrap();
        assert_eq!(none.out, PathBuf::from(DEFAULT_OUT_DIR));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |flags: Overrides| ExperimentConfig::resolve(ExperimentKind::C0, None, &flags, None).is_err();
        assert!(bad(Overrides { n: Some(2), ..Overrides::default() }));
        assert!(bad(Overrides { dt: Some(-1.0), ..Overrides::default() }));
        assert!(bad(Overrides { bracket: Some((1.0, -1.0)), ..Overrides::default() }));
        let wrong_kind = ConfigFile { experiment: Some(ExperimentKind::Flow), ..ConfigFile::default() };
        assert!(ExperimentConfig::resolve(ExperimentKind::C0, Some(wrong_kind), &Overrides::default(), None).is_err());
        assert!(toml::from_str::<ConfigFile>("bogus = 1").is_err());
        let odd_period = ConfigFile { period: Some(1.0), ..ConfigFile::default() };
        assert!(ExperimentConfig::resolve(ExperimentKind::C0, Some(odd_period), &Overrides::default(), None).is_err());
    }
}
