//! JSON experiment configuration.
//!
//! Unset keys take experiment-dependent defaults (see [`Experiment`]); the
//! noise window defaults to the smallest integer-padded window the experiment
//! needs.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::model::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config: {0}")]
    Syntax(String),
    #[error("config key `{key}`: {constraint}")]
    Key { key: String, constraint: String },
    #[error(
        "config key `noise.t_min`/`noise.t_max`: window [{t_min}, {t_max}] does not cover the required [{required_min}, {required_max}]"
    )]
    Window {
        t_min: f64,
        t_max: f64,
        required_min: f64,
        required_max: f64,
    },
}

fn key_error(key: &str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Key {
        key: key.to_owned(),
        constraint: constraint.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    CheckAssumptions,
    OuDiagnostics,
    CocycleCheck,
    Crossval,
    Absorb,
    Tail,
    Pullback,
    Entropy,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Self::CheckAssumptions,
        Self::OuDiagnostics,
        Self::CocycleCheck,
        Self::Crossval,
        Self::Absorb,
        Self::Tail,
        Self::Pullback,
        Self::Entropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CheckAssumptions => "check-assumptions",
            Self::OuDiagnostics => "ou-diagnostics",
            Self::CocycleCheck => "cocycle-check",
            Self::Crossval => "crossval",
            Self::Absorb => "absorb",
            Self::Tail => "tail",
            Self::Pullback => "pullback",
            Self::Entropy => "entropy",
        }
    }

    /// Horizon `T`: OU averaging length, cocycle legs `t = s = T`, cross
    /// validation length, forward envelope length.
    fn default_horizon(self) -> f64 {
        match self {
            Self::OuDiagnostics => 2000.0,
            Self::Absorb => 10.0,
            _ => 1.0,
        }
    }

    fn default_ensemble(self) -> usize {
        match self {
            Self::OuDiagnostics => 20,
            Self::Crossval => 10,
            Self::CocycleCheck | Self::CheckAssumptions => 1,
            _ => 64,
        }
    }

    /// Main PASS/FAIL tolerance of the experiment.
    fn default_tol(self) -> f64 {
        match self {
            Self::OuDiagnostics => 0.03,
            Self::CocycleCheck | Self::Absorb => 1e-6,
            Self::Crossval => 1e-2,
            _ => 1e-3,
        }
    }

    fn default_step(self) -> f64 {
        match self {
            Self::Crossval => 1e-4,
            _ => 1e-3,
        }
    }

    fn default_epsilons(self) -> Vec<f64> {
        match self {
            Self::Entropy => vec![0.5, 0.25, 0.1],
            _ => (1..=20).map(|k| 0.5f64.powi(k)).collect(),
        }
    }

    fn uses_pullback(self) -> bool {
        matches!(self, Self::Absorb | Self::Tail | Self::Pullback | Self::Entropy)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|e| e.name()).collect();
            key_error("run.experiment", format!("unknown experiment {s:?}, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: Option<String>,
    nu0: Option<f64>,
    nu_amp: Option<f64>,
    lambda_base: Option<f64>,
    lambda_amp: Option<f64>,
    beta: Option<f64>,
    forcing_scale: Option<f64>,
    truncation_radius: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    dt: Option<f64>,
    seed: Option<u64>,
    t_min: Option<f64>,
    t_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    experiment: String,
    tau: Option<f64>,
    t_list: Option<Vec<f64>>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    dt_ode: Option<f64>,
    ensemble_size: Option<usize>,
    epsilons: Option<Vec<f64>>,
    tol: Option<f64>,
    #[serde(rename = "S")]
    truncation: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    noise: RawNoise,
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Builtin name, if the model was selected by name.
    pub name: Option<String>,
    pub params: ModelParams,
    pub truncation_radius: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub dt: f64,
    pub seed: u64,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub tau: f64,
    pub t_list: Vec<f64>,
    /// `T`.
    pub horizon: f64,
    pub dt_ode: f64,
    pub ensemble_size: usize,
    pub epsilons: Vec<f64>,
    pub tol: f64,
    /// `S`, truncation of the absorbing-radius integral.
    pub truncation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub noise: NoiseConfig,
    pub run: RunConfig,
    pub output_dir: PathBuf,
}

pub const DEFAULT_TRUNCATION_RADIUS: usize = 64;
pub const DEFAULT_NOISE_DT: f64 = 1e-3;
pub const DEFAULT_S: f64 = 60.0;
pub const DEFAULT_T_LIST: [f64; 4] = [5.0, 10.0, 20.0, 40.0];
pub const DEFAULT_OUTPUT_DIR: &str = "out";
/// Time step of the forward-invariance surrogate.
pub const INVARIANCE_DELTA: f64 = 1.0;

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(key_error(key, format!("must be positive and finite, got {x}")))
    }
}

fn finite(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(key_error(key, format!("must be finite, got {x}")))
    }
}

fn model_config(raw: RawModel) -> Result<ModelConfig, ConfigError> {
    let explicit = [
        ("nu0", raw.nu0),
        ("nu_amp", raw.nu_amp),
        ("lambda_base", raw.lambda_base),
        ("lambda_amp", raw.lambda_amp),
        ("beta", raw.beta),
        ("forcing_scale", raw.forcing_scale),
    ];
    let truncation_radius = raw.truncation_radius.unwrap_or(DEFAULT_TRUNCATION_RADIUS);
    if let Some(name) = raw.name {
        if let Some((key, _)) = explicit.iter().find(|(_, v)| v.is_some()) {
            return Err(key_error(
                &format!("model.{key}"),
                "cannot be combined with `model.name`; give either a builtin name or the coefficients",
            ));
        }
        let params = ModelParams::builtin(&name).ok_or_else(|| {
            key_error("model.name", format!("unknown builtin model {name:?}, expected \"canonical\" or \"zero-forcing\""))
        })?;
        return Ok(ModelConfig {
            name: Some(name),
            params,
            truncation_radius,
        });
    }
    for (key, value) in explicit {
        if let Some(v) = value {
            finite(&format!("model.{key}"), v)?;
        }
    }
    let c = ModelParams::CANONICAL;
    let params = ModelParams {
        nu0: raw.nu0.unwrap_or(c.nu0),
        nu_amp: raw.nu_amp.unwrap_or(c.nu_amp),
        lambda_base: raw.lambda_base.unwrap_or(c.lambda_base),
        lambda_amp: raw.lambda_amp.unwrap_or(c.lambda_amp),
        beta: raw.beta.unwrap_or(c.beta),
        forcing_scale: raw.forcing_scale.unwrap_or(c.forcing_scale),
    };
    let all_default = explicit.iter().all(|(_, v)| v.is_none());
    Ok(ModelConfig {
        name: all_default.then(|| "canonical".to_owned()),
        params,
        truncation_radius,
    })
}

fn run_config(raw: RawRun) -> Result<RunConfig, ConfigError> {
    let experiment: Experiment = raw.experiment.parse()?;
    let tau = finite("run.tau", raw.tau.unwrap_or(0.0))?;
    let t_list = raw.t_list.unwrap_or_else(|| DEFAULT_T_LIST.to_vec());
    if t_list.is_empty() {
        return Err(key_error("run.t_list", "must not be empty"));
    }
    if t_list.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(key_error("run.t_list", "entries must be finite and non-negative"));
    }
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(key_error("run.t_list", "must be strictly increasing"));
    }
    let horizon = positive("run.T", raw.horizon.unwrap_or(experiment.default_horizon()))?;
    let dt_ode = positive("run.dt_ode", raw.dt_ode.unwrap_or(experiment.default_step()))?;
    let ensemble_size = raw.ensemble_size.unwrap_or(experiment.default_ensemble());
    if ensemble_size == 0 {
        return Err(key_error("run.ensemble_size", "must be at least 1"));
    }
    let epsilons = raw.epsilons.unwrap_or_else(|| experiment.default_epsilons());
    if epsilons.is_empty() {
        return Err(key_error("run.epsilons", "must not be empty"));
    }
    for &e in &epsilons {
        positive("run.epsilons", e)?;
    }
    let tol = positive("run.tol", raw.tol.unwrap_or(experiment.default_tol()))?;
    let truncation = positive("run.S", raw.truncation.unwrap_or(DEFAULT_S))?;
    Ok(RunConfig {
        experiment,
        tau,
        t_list,
        horizon,
        dt_ode,
        ensemble_size,
        epsilons,
        tol,
        truncation,
    })
}

impl RunConfig {
    pub fn max_pullback_time(&self) -> f64 {
        self.t_list.last().copied().unwrap_or(0.0)
    }

    /// Noise times `[lo, hi]` the experiment reads.
    pub fn required_window(&self) -> (f64, f64) {
        let t = self.horizon;
        let pull = self.max_pullback_time() + self.truncation;
        match self.experiment {
            Experiment::CheckAssumptions => (0.0, 0.0),
            Experiment::OuDiagnostics => (-t, t),
            Experiment::CocycleCheck => (0.0, 2.0 * t),
            Experiment::Crossval => (self.tau.min(0.0), (self.tau + t).max(0.0)),
            // The radius is also evaluated at 4S/3 to check its stability in S.
            Experiment::Absorb => (-pull.max(4.0 * self.truncation / 3.0), t),
            Experiment::Pullback => (-pull, INVARIANCE_DELTA),
            Experiment::Tail | Experiment::Entropy => (-pull, 0.0),
        }
    }
}

/// Smallest grid multiple of `dt` at least `x` in magnitude, padded by one.
fn padded(x: f64, dt: f64) -> f64 {
    ((x.abs() + 1.0) / dt).ceil() * dt * x.signum()
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            ConfigError::Syntax(e.inner().to_string())
        } else {
            key_error(&path, e.inner().to_string())
        }
    })?;

    let model = model_config(raw.model)?;
    let run = run_config(raw.run)?;
    let default_dt = if run.experiment == Experiment::Crossval { run.dt_ode.min(DEFAULT_NOISE_DT) } else { DEFAULT_NOISE_DT };
    let dt = positive("noise.dt", raw.noise.dt.unwrap_or(default_dt))?;
    let seed = raw.noise.seed.unwrap_or(0);
    if run.experiment != Experiment::CheckAssumptions {
        let ratio = run.dt_ode / dt;
        let k = ratio.round().max(1.0);
        let multiple = (ratio - k).abs() <= 1e-9 * k;
        let divisor = ((1.0 / ratio) - (1.0 / ratio).round()).abs() <= 1e-9 / ratio;
        if !(multiple || divisor) {
            return Err(key_error(
                "run.dt_ode",
                format!("must be a multiple or an integer fraction of noise.dt = {dt}, got {}", run.dt_ode),
            ));
        }
        if run.experiment == Experiment::Crossval && !multiple {
            return Err(key_error(
                "run.dt_ode",
                format!("crossval steps on the Wiener grid; must be a multiple of noise.dt = {dt}"),
            ));
        }
    }

    let (required_min, required_max) = run.required_window();
    let t_min = finite("noise.t_min", raw.noise.t_min.unwrap_or(padded(required_min.min(-1.0), dt)))?;
    let t_max = finite("noise.t_max", raw.noise.t_max.unwrap_or(padded(required_max.max(0.0), dt)))?;
    if !(t_min < 0.0 && t_max >= 0.0) {
        return Err(key_error("noise.t_min", format!("window must satisfy t_min < 0 <= t_max, got [{t_min}, {t_max}]")));
    }
    let slack = 1e-9 * (1.0 + required_min.abs().max(required_max.abs()));
    if t_min > required_min + slack || t_max < required_max - slack {
        return Err(ConfigError::Window {
            t_min,
            t_max,
            required_min,
            required_max,
        });
    }
    if run.experiment.uses_pullback() && model.truncation_radius == 0 {
        return Err(key_error("model.truncation_radius", "must be at least 1 for lattice experiments"));
    }

    Ok(ExperimentConfig {
        model,
        noise: NoiseConfig { dt, seed, t_min, t_max },
        run,
        output_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(r#"{"model": {"name": "canonical"}, "run": {"experiment": "absorb"}}"#).unwrap();
        assert_eq!(c.model.params, ModelParams::CANONICAL);
        assert_eq!(c.model.truncation_radius, 64);
        assert_eq!(c.noise.dt, 1e-3);
        assert_eq!(c.noise.seed, 0);
        assert_eq!(c.run.t_list, vec![5.0, 10.0, 20.0, 40.0]);
        assert_eq!(c.run.dt_ode, 1e-3);
        assert_eq!(c.run.ensemble_size, 64);
        assert_eq!(c.run.truncation, 60.0);
        assert_eq!(c.run.horizon, 10.0);
        assert!(c.noise.t_min <= -100.0 && c.noise.t_max >= 10.0);
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn negative_step_names_the_key() {
        let err = parse_config(r#"{"run": {"experiment": "absorb", "dt_ode": -1}}"#).unwrap_err();
        assert!(err.to_string().contains("run.dt_ode"), "{err}");
    }

    #[test]
    fn short_window_reports_requirement() {
        let err = parse_config(
            r#"{"noise": {"t_min": -50, "t_max": 20}, "run": {"experiment": "tail", "t_list": [5, 10, 20, 40], "S": 60}}"#,
        )
        .unwrap_err();
        assert_eq!(
            err,
            ConfigError::Window {
                t_min: -50.0,
                t_max: 20.0,
                required_min: -100.0,
                required_max: 0.0
            }
        );
        assert!(err.to_string().contains("-100"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(r#"{"run": {"experiment": "absorb", "dt": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
        let err = parse_config(r#"{"run": {"experiment": "absorb"}, "extra": {}}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
        let err = parse_config(r#"{"model": {"name": "canonical", "beta": 0}, "run": {"experiment": "absorb"}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("model.beta"), "{err}");
        let err = parse_config(r#"{"run": {"experiment": "bogus"}}"#).unwrap_err();
        assert!(err.to_string().contains("run.experiment"), "{err}");
    }

    #[test]
    fn wrong_types_name_the_key() {
        let err = parse_config(r#"{"run": {"experiment": "absorb", "tol": "small"}}"#).unwrap_err();
        assert!(err.to_string().contains("run.tol"), "{err}");
    }

    #[test]
    fn explicit_coefficients() {
        let c = parse_config(r#"{"model": {"beta": 0, "forcing_scale": 0}, "run": {"experiment": "pullback"}}"#).unwrap();
        assert_eq!(c.model.params, ModelParams::ZERO_FORCING);
        assert_eq!(c.model.name, None);
    }

    #[test]
    fn crossval_defaults_to_fine_grid() {
        let c = parse_config(r#"{"run": {"experiment": "crossval"}}"#).unwrap();
        assert_eq!((c.noise.dt, c.run.dt_ode), (1e-4, 1e-4));
    }
}
