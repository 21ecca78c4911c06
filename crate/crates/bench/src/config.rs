//! Experiment and grid configuration.
//!
//! Configs are flat `key = value` files; `#` starts a comment. The same
//! assignments can be given on the command line and are applied afterwards,
//! so they override the file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use lowrank_core::manifold::{CgBeta, ManifoldStep};
use lowrank_core::Scenario;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("unknown solver id `{0}`")]
    UnknownSolver(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{0}")]
    Invalid(String),
}

type CResult<T> = Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverId {
    Svt,
    Fbs,
    Admm,
    Pgd,
    Wf,
    Iht,
    Niht,
    Rgrad,
    Rcg,
    RgradPhase,
}

impl SolverId {
    pub const ALL: [SolverId; 10] = [
        SolverId::Svt,
        SolverId::Fbs,
        SolverId::Admm,
        SolverId::Pgd,
        SolverId::Wf,
        SolverId::Iht,
        SolverId::Niht,
        SolverId::Rgrad,
        SolverId::Rcg,
        SolverId::RgradPhase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverId::Svt => "svt",
            SolverId::Fbs => "fbs",
            SolverId::Admm => "admm",
            SolverId::Pgd => "pgd",
            SolverId::Wf => "wf",
            SolverId::Iht => "iht",
            SolverId::Niht => "niht",
            SolverId::Rgrad => "rgrad",
            SolverId::Rcg => "rcg",
            SolverId::RgradPhase => "rgrad-phase",
        }
    }

    /// Whether the solver handles the given measurement model.
    pub fn supports(self, model: Scenario) -> bool {
        let phase = model == Scenario::PhaseRetrieval;
        matches!(self, SolverId::Wf | SolverId::RgradPhase) == phase
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverId {
    type Err = ConfigError;

    fn from_str(s: &str) -> CResult<Self> {
        SolverId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ConfigError::UnknownSolver(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgdPreset {
    /// Plain gradient descent on the factors.
    Bench,
    /// Balance regularizer and row trimming on.
    Faithful,
}

/// Options forwarded to the individual solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// SVT threshold weight; `5n` when absent.
    pub svt_tau: Option<f64>,
    /// Nuclear-norm weight for forward-backward splitting and ADMM.
    pub lambda: f64,
    pub admm_mu: f64,
    pub pgd_preset: PgdPreset,
    /// IHT iterations used as a warm start for pgd, rgrad and rcg (0: none).
    pub warm_start: usize,
    pub cg_beta: CgBeta,
    /// Wirtinger-flow normalized stepsize constant.
    pub wf_step: f64,
    /// Step rule for iht, niht, rgrad and rcg; each solver's own rule when
    /// absent (constant spectral scale, NIHT, exact line search).
    pub stepsize: Option<ManifoldStep>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            svt_tau: None,
            lambda: 1e-4,
            admm_mu: 1.0,
            pgd_preset: PgdPreset::Bench,
            warm_start: 0,
            cg_beta: CgBeta::PolakRibierePlus,
            wf_step: 0.2,
            stepsize: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Scenario,
    pub n: usize,
    pub r: usize,
    /// Oversampling `ρ`; `m = ⌈ρ(2n − r)r⌉` unless `m` is set.
    pub rho: f64,
    pub m: Option<usize>,
    pub solvers: Vec<SolverId>,
    pub seeds: Vec<u64>,
    pub tol: f64,
    pub max_iters: usize,
    /// Success means final relative error at most this value.
    pub success_threshold: f64,
    pub out_dir: Option<PathBuf>,
    pub settings: SolverSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: Scenario::Completion,
            n: 200,
            r: 5,
            rho: 3.0,
            m: None,
            solvers: vec![SolverId::Pgd, SolverId::Rgrad, SolverId::Rcg],
            seeds: (0..10).collect(),
            tol: 1e-6,
            max_iters: 5000,
            success_threshold: 1e-4,
            out_dir: None,
            settings: SolverSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Named problem scales: `desk` (n=200, r=5, ρ=3 completion) and
    /// `full` (n=8000, r=100; hours-scale).
    pub fn scale(name: &str) -> CResult<Self> {
        match name {
            "desk" => Ok(ExperimentConfig::default()),
            "full" => Ok(ExperimentConfig {
                n: 8000,
                r: 100,
                ..ExperimentConfig::default()
            }),
            _ => Err(ConfigError::UnknownPreset(name.to_string())),
        }
    }

    /// Number of measurements (for completion, sampled entries).
    pub fn measurements(&self) -> usize {
        if let Some(m) = self.m {
            return m;
        }
        if self.model == Scenario::FullCompletion {
            return self.n * self.n;
        }
        let dof = ((2 * self.n - self.r) * self.r) as f64;
        (self.rho * dof).ceil() as usize
    }

    pub fn set(&mut self, key: &str, value: &str) -> CResult<()> {
        match key {
            "scale" => {
                let keep_out = self.out_dir.take();
                let settings = core::mem::take(&mut self.settings);
                *self = ExperimentConfig::scale(value)?;
                self.out_dir = keep_out;
                self.settings = settings;
            }
            "model" => self.model = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "m" => self.m = Some(parse(key, value)?),
            "solvers" => self.solvers = parse_list(key, value)?,
            "seeds" => self.seeds = parse_seeds(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "success_threshold" => self.success_threshold = parse(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "svt_tau" => self.settings.svt_tau = Some(parse(key, value)?),
            "lambda" => self.settings.lambda = parse(key, value)?,
            "admm_mu" => self.settings.admm_mu = parse(key, value)?,
            "preset" | "pgd_preset" => {
                self.settings.pgd_preset = match value {
                    "bench" => PgdPreset::Bench,
                    "faithful" => PgdPreset::Faithful,
                    _ => return Err(bad(key, "expected `bench` or `faithful`")),
                }
            }
            "warm_start" => self.settings.warm_start = parse(key, value)?,
            "cg_beta" => {
                self.settings.cg_beta = match value {
                    "pr" => CgBeta::PolakRibierePlus,
                    "fr" => CgBeta::FletcherReeves,
                    _ => return Err(bad(key, "expected `pr` or `fr`")),
                }
            }
            "wf_step" => self.settings.wf_step = parse(key, value)?,
            "stepsize" => self.settings.stepsize = Some(parse_stepsize(key, value)?),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> CResult<()> {
        if self.n == 0 || self.r == 0 || self.r > self.n {
            return Err(ConfigError::Invalid("need 1 ≤ r ≤ n".into()));
        }
        if self.m.is_none() && !(self.rho > 0.0) {
            return Err(ConfigError::Invalid("rho must be positive".into()));
        }
        if self.seeds.is_empty() || self.solvers.is_empty() {
            return Err(ConfigError::Invalid("seeds and solvers must be nonempty".into()));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 || !(self.success_threshold > 0.0) {
            return Err(ConfigError::Invalid("tol, max_iters and success_threshold must be positive".into()));
        }
        if let Some(s) = self.solvers.iter().find(|s| !s.supports(self.model)) {
            return Err(ConfigError::Invalid(format!("solver `{s}` does not handle model `{}`", self.model)));
        }
        Ok(())
    }
}

/// A success-rate grid over `(r, m)` for one solver.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub model: Scenario,
    pub n: usize,
    pub ranks: Vec<usize>,
    pub measurements: Vec<usize>,
    pub trials: usize,
    pub threshold: f64,
    pub solver: SolverId,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
    pub out_dir: Option<PathBuf>,
    pub settings: SolverSettings,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            model: Scenario::Sensing,
            n: 30,
            ranks: vec![2],
            measurements: vec![60, 120, 240, 480, 900],
            trials: 10,
            threshold: 1e-3,
            solver: SolverId::Rgrad,
            seed: 0,
            tol: 1e-6,
            max_iters: 1000,
            out_dir: None,
            settings: SolverSettings::default(),
        }
    }
}

impl GridSpec {
    pub fn set(&mut self, key: &str, value: &str) -> CResult<()> {
        match key {
            "model" => self.model = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "r" | "ranks" => self.ranks = parse_range_list(key, value)?,
            "m" | "measurements" => self.measurements = parse_range_list(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "threshold" | "success_threshold" => self.threshold = parse(key, value)?,
            "solver" => self.solver = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            _ => {
                // Solver options share the experiment keys.
                let mut cfg = ExperimentConfig {
                    settings: self.settings.clone(),
                    ..ExperimentConfig::default()
                };
                match key {
                    "svt_tau" | "lambda" | "admm_mu" | "preset" | "pgd_preset" | "warm_start" | "cg_beta"
                    | "wf_step" | "stepsize" => {
                        cfg.set(key, value)?;
                        self.settings = cfg.settings;
                    }
                    _ => return Err(ConfigError::UnknownKey(key.to_string())),
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> CResult<()> {
        if self.n == 0 || self.trials == 0 || self.ranks.is_empty() || self.measurements.is_empty() {
            return Err(ConfigError::Invalid("n, trials and both axes must be nonempty".into()));
        }
        if self.ranks.iter().any(|&r| r == 0 || r > self.n) || self.measurements.contains(&0) {
            return Err(ConfigError::Invalid("ranks must lie in 1..=n and counts be positive".into()));
        }
        if !(self.threshold > 0.0) || !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(ConfigError::Invalid("threshold, tol and max_iters must be positive".into()));
        }
        if !self.solver.supports(self.model) {
            return Err(ConfigError::Invalid(format!(
                "solver `{}` does not handle model `{}`",
                self.solver, self.model
            )));
        }
        Ok(())
    }
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CResult<T> {
    value.trim().parse().map_err(|_| bad(key, format!("cannot parse `{value}`")))
}

fn parse_list<T: FromStr<Err = ConfigError>>(key: &str, value: &str) -> CResult<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(bad(key, "empty list"));
    }
    items.into_iter().map(str::parse).collect()
}

/// `const:VAL`, `niht` or `exact`.
pub fn parse_stepsize(key: &str, value: &str) -> CResult<ManifoldStep> {
    match value.trim() {
        "niht" => Ok(ManifoldStep::Niht),
        "exact" => Ok(ManifoldStep::ExactLine),
        v => match v.strip_prefix("const:") {
            Some(a) => {
                let a: f64 = parse(key, a)?;
                if a.is_finite() && a > 0.0 {
                    Ok(ManifoldStep::Constant(a))
                } else {
                    Err(bad(key, "constant step must be positive"))
                }
            }
            None => Err(bad(key, "expected `const:VAL`, `niht` or `exact`")),
        },
    }
}

/// `a,b,c` or the half-open range `a..b`.
fn parse_seeds(key: &str, value: &str) -> CResult<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..") {
        let (a, b): (u64, u64) = (parse(key, a)?, parse(key, b)?);
        if a >= b {
            return Err(bad(key, "empty range"));
        }
        return Ok((a..b).collect());
    }
    value.split(',').map(|s| parse(key, s)).collect()
}

/// `a,b,c` or the inclusive stepped range `start:step:end`.
fn parse_range_list(key: &str, value: &str) -> CResult<Vec<usize>> {
    let parts: Vec<&str> = value.split(':').collect();
    if let [a, s, b] = parts[..] {
        let (a, s, b): (usize, usize, usize) = (parse(key, a)?, parse(key, s)?, parse(key, b)?);
        if s == 0 || a > b {
            return Err(bad(key, "range needs step > 0 and start ≤ end"));
        }
        return Ok((a..=b).step_by(s).collect());
    }
    value.split(',').map(|s| parse(key, s)).collect()
}

/// Split `key = value` lines, skipping blanks and `#` comments.
pub fn parse_assignments(text: &str) -> CResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Parse `key=value` override strings from the command line.
pub fn parse_override(s: &str) -> CResult<(String, String)> {
    let mut v = parse_assignments(s)?;
    match v.len() {
        1 => Ok(v.remove(0)),
        _ => Err(ConfigError::Syntax { line: 1 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments_and_overrides() {
        let text = "# desk run\nmodel = sensing\nn = 30 # small\n\nsolvers = niht, rgrad\nseeds = 0..3\n";
        let mut cfg = ExperimentConfig::default();
        for (k, v) in parse_assignments(text).unwrap() {
            cfg.set(&k, &v).unwrap();
        }
        let (k, v) = parse_override("r=2").unwrap();
        cfg.set(&k, &v).unwrap();
        assert_eq!(cfg.model, Scenario::Sensing);
        assert_eq!((cfg.n, cfg.r), (30, 2));
        assert_eq!(cfg.solvers, vec![SolverId::Niht, SolverId::Rgrad]);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        cfg.validate().unwrap();
    }

    #[test]
    fn measurement_count() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.measurements(), 3 * (2 * 200 - 5) * 5);
        cfg.rho = 2.5;
        assert_eq!(cfg.measurements(), (2.5f64 * 395.0 * 5.0).ceil() as usize);
        cfg.model = Scenario::FullCompletion;
        assert_eq!(cfg.measurements(), 200 * 200);
        cfg.m = Some(7);
        assert_eq!(cfg.measurements(), 7);
    }

    #[test]
    fn errors() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.set("colour", "red"), Err(ConfigError::UnknownKey("colour".into())));
        assert_eq!(cfg.set("solvers", "pgd,magic"), Err(ConfigError::UnknownSolver("magic".into())));
        assert!(matches!(cfg.set("n", "ten"), Err(ConfigError::BadValue { .. })));
        assert!(parse_assignments("just words").is_err());
        cfg.set("solvers", "wf").unwrap();
        assert!(cfg.validate().is_err());
        cfg.set("seeds", "").unwrap_err();
    }

    #[test]
    fn presets() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("out_dir", "x").unwrap();
        cfg.set("stepsize", "const:0.5").unwrap();
        cfg.set("scale", "full").unwrap();
        assert_eq!((cfg.n, cfg.r), (8000, 100));
        assert_eq!(cfg.out_dir, Some(PathBuf::from("x")));
        assert_eq!(cfg.settings.stepsize, Some(ManifoldStep::Constant(0.5)));
        assert!(cfg.set("scale", "huge").is_err());
        cfg.set("preset", "faithful").unwrap();
        assert_eq!(cfg.settings.pgd_preset, PgdPreset::Faithful);
        assert!(cfg.set("preset", "huge").is_err());
    }

    #[test]
    fn stepsize_specs() {
        assert_eq!(parse_stepsize("s", "niht"), Ok(ManifoldStep::Niht));
        assert_eq!(parse_stepsize("s", "exact"), Ok(ManifoldStep::ExactLine));
        assert_eq!(parse_stepsize("s", "const:2e-1"), Ok(ManifoldStep::Constant(0.2)));
        for v in ["const:", "const:-1", "const:nan", "armijo"] {
            assert!(parse_stepsize("s", v).is_err(), "{v}");
        }
    }

    #[test]
    fn grid_ranges() {
        let mut g = GridSpec::default();
        g.set("m", "100:50:300").unwrap();
        assert_eq!(g.measurements, vec![100, 150, 200, 250, 300]);
        g.set("r", "1,2").unwrap();
        assert_eq!(g.ranks, vec![1, 2]);
        g.set("cg_beta", "fr").unwrap();
        assert_eq!(g.settings.cg_beta, CgBeta::FletcherReeves);
        assert!(g.set("m", "5:0:9").is_err());
        assert!(g.set("volume", "3").is_err());
        g.validate().unwrap();
    }

    #[test]
    fn solver_ids_round_trip() {
        for id in SolverId::ALL {
            assert_eq!(id.as_str().parse::<SolverId>().unwrap(), id);
        }
    }
}
