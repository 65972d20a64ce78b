//! Run configuration: parsing, defaults, validation and hashing.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use koopman_core::dynamics::{builtin_system, FnField};
use koopman_core::prediction::PredictorConfig;
use koopman_core::training::TrainingConfig;
use koopman_core::{
    AxisBox, Dictionary, Integrator, Mode, MultiIndex, ParamSampling, ParametricSystem, Schedule,
    StateSampling, TriggerMeasure, VectorField,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub system: SystemSpec,
    pub dictionary: DictionarySpec,
    pub t: f64,
    pub training: TrainingSpec,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub prediction: Option<PredictionSpec>,
    #[serde(default)]
    pub bifurcation: Option<BifurcationSpec>,
    #[serde(default)]
    pub newton_bench: Option<NewtonBenchSpec>,
    #[serde(default)]
    pub multistep: Option<MultistepSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A benchmark name or a polynomial vector field given term by term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Builtin(String),
    Polynomial(PolynomialSystem),
}

/// `x' = f(x) + sum_i p_i g_i(x)` with every component a sum of monomial terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSystem {
    pub name: String,
    pub drift: Vec<Vec<Term>>,
    #[serde(default)]
    pub inputs: Vec<Vec<Vec<Term>>>,
    pub state_domain: AxisBox,
    pub param_domain: AxisBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionarySpec {
    pub degree: u32,
    #[serde(default)]
    pub excluded: Vec<MultiIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default = "uniform_params")]
    pub param_sampling: ParamSampling,
    #[serde(default = "uniform_states")]
    pub state_sampling: StateSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSpec {
    pub params: Vec<Vec<f64>>,
    pub initial_states: Vec<Vec<f64>>,
    pub n_steps: usize,
    #[serde(default = "default_predictors")]
    pub predictors: Vec<PredictorConfig>,
    /// Also write the lifted state of every step.
    #[serde(default)]
    pub include_lifted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcationSpec {
    pub params: Vec<Vec<f64>>,
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    /// State interval of the grid; defaults to the state domain.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    #[serde(default = "default_predictors")]
    pub predictors: Vec<PredictorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonBenchSpec {
    pub param: Vec<f64>,
    pub x0: Vec<f64>,
    pub n_steps: usize,
    #[serde(default = "checkpoint_every")]
    pub every: usize,
    /// Initial guess of the cold-start solves; defaults to the lower domain corner.
    #[serde(default)]
    pub cold_start: Option<Vec<f64>>,
    #[serde(default = "ml_predictor")]
    pub predictor: PredictorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultistepSpec {
    pub param: Vec<f64>,
    pub x0: Vec<f64>,
    pub n_steps: usize,
    pub factors: Vec<f64>,
    #[serde(default = "ml_mode")]
    pub mode: Mode,
    #[serde(default = "trace_measure")]
    pub measure: TriggerMeasure,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn uniform_params() -> ParamSampling {
    ParamSampling::Uniform
}

fn uniform_states() -> StateSampling {
    StateSampling::Uniform
}

fn grid_points() -> usize {
    401
}

fn checkpoint_every() -> usize {
    20
}

fn ml_mode() -> Mode {
    Mode::MaxLikelihood
}

fn trace_measure() -> TriggerMeasure {
    TriggerMeasure::Trace
}

fn ml_predictor() -> PredictorConfig {
    PredictorConfig::new(Mode::MaxLikelihood)
}

pub fn default_predictors() -> Vec<PredictorConfig> {
    [Mode::Standard, Mode::Coordinate, Mode::MaxLikelihood]
        .into_iter()
        .map(PredictorConfig::new)
        .collect()
}

/// A validated configuration with its system resolved and all defaults filled in.
pub struct Resolved {
    pub config: RunConfig,
    pub system: ParametricSystem,
    pub dict: Dictionary,
    pub hash: String,
}

impl std::fmt::Debug for Resolved {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Resolved")
            .field("system", &self.system.name)
            .field("hash", &self.hash)
            .finish()
    }
}

impl Resolved {
    pub fn training(&self) -> TrainingConfig {
        let c = &self.config;
        TrainingConfig {
            degree: c.dictionary.degree,
            excluded: c.dictionary.excluded.clone(),
            t: c.t,
            n_samples: c.training.n_samples,
            seed: c.training.seed,
            ridge: c.training.ridge,
            param_sampling: c.training.param_sampling.clone(),
            state_sampling: c.training.state_sampling.clone(),
            integrator: c.integrator,
        }
    }

    pub fn output_dir(&self) -> &Path {
        self.config
            .output_dir
            .as_deref()
            .unwrap_or(Path::new(DEFAULT_OUTPUT_DIR))
    }
}

/// Reads a config file. An echoed config (with `config_hash` and `config`
/// fields) is accepted as well.
pub fn read(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| format!("{}: invalid JSON: {e}", path.display()))?;
    if value.get("config_hash").is_some() {
        if let Some(inner) = value.get_mut("config").map(Value::take) {
            value = inner;
        }
    }
    serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))
}

/// Applies overrides, validates and fills defaults.
pub fn resolve(
    mut config: RunConfig,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<Resolved, String> {
    if let Some(s) = seed {
        config.training.seed = s;
    }
    if let Some(o) = out {
        config.output_dir = Some(o);
    }
    if config.output_dir.is_none() {
        config.output_dir = Some(PathBuf::from(DEFAULT_OUTPUT_DIR));
    }
    if config.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            config.schema_version
        ));
    }
    let system = build_system(&config.system)?;
    let dict = Dictionary::new(
        system.dim(),
        config.dictionary.degree,
        config.dictionary.excluded.clone(),
    )
    .map_err(|e| format!("dictionary: {e}"))?;
    if !(config.t > 0.0 && config.t.is_finite()) {
        return Err(format!("t: must be positive, got {}", config.t));
    }
    if config.training.n_samples == 0 {
        return Err("training.n_samples: must be positive".into());
    }
    if let Some(r) = config.training.ridge {
        if !(r >= 0.0) {
            return Err(format!("training.ridge: must be >= 0, got {r}"));
        }
    }
    Integrator::new(config.integrator.rel_tol, config.integrator.abs_tol)
        .map_err(|e| format!("integrator: {e}"))?;
    if let ParamSampling::Grid(values) = &config.training.param_sampling {
        for (i, v) in values.iter().enumerate() {
            check_len(
                &format!("training.param_sampling.values[{i}]"),
                system.n_params(),
                v,
            )?;
        }
    }

    let n = dict.len();
    let d = system.dim();
    let m = system.n_params();
    if let Some(spec) = &config.prediction {
        check_points("prediction.params", m, &spec.params)?;
        check_points("prediction.initial_states", d, &spec.initial_states)?;
        check_predictors("prediction.predictors", n, &spec.predictors)?;
    }
    if let Some(spec) = &mut config.bifurcation {
        if d != 1 {
            return Err(format!(
                "bifurcation: needs a scalar system, `{}` has dimension {d}",
                system.name
            ));
        }
        check_points("bifurcation.params", m, &spec.params)?;
        if spec.grid_points < 2 {
            return Err("bifurcation.grid_points: must be >= 2".into());
        }
        let range = *spec
            .range
            .get_or_insert([system.state_domain.lo[0], system.state_domain.hi[0]]);
        if !(range[0] < range[1]) {
            return Err(format!("bifurcation.range: empty interval {range:?}"));
        }
        check_predictors("bifurcation.predictors", n, &spec.predictors)?;
    }
    if let Some(spec) = &mut config.newton_bench {
        check_len("newton_bench.param", m, &spec.param)?;
        check_len("newton_bench.x0", d, &spec.x0)?;
        let cold = spec
            .cold_start
            .get_or_insert_with(|| system.state_domain.lo.clone());
        check_len("newton_bench.cold_start", d, cold)?;
        if spec.every == 0 {
            return Err("newton_bench.every: must be positive".into());
        }
        if spec.predictor.mode != Mode::MaxLikelihood
            || spec.predictor.schedule != Schedule::EveryStep
        {
            return Err(
                "newton_bench.predictor: needs max_likelihood mode with every_step schedule".into(),
            );
        }
        check_predictors(
            "newton_bench.predictor",
            n,
            std::slice::from_ref(&spec.predictor),
        )?;
    }
    if let Some(spec) = &config.multistep {
        check_len("multistep.param", m, &spec.param)?;
        check_len("multistep.x0", d, &spec.x0)?;
        if spec.mode == Mode::Standard {
            return Err("multistep.mode: needs a reprojecting mode".into());
        }
        if spec.factors.is_empty() {
            return Err("multistep.factors: must not be empty".into());
        }
        for f in &spec.factors {
            let p = PredictorConfig::adaptive(spec.mode, spec.measure, *f);
            p.validate(n, true)
                .map_err(|e| format!("multistep.factors: {e}"))?;
        }
    }

    let hash = config_hash(&config)?;
    Ok(Resolved {
        config,
        system,
        dict,
        hash,
    })
}

/// SHA-256 of the compact config document with the output directory removed,
/// so identical runs written to different places share a hash.
pub fn config_hash(config: &RunConfig) -> Result<String, String> {
    let mut c = config.clone();
    c.output_dir = None;
    let text = serde_json::to_string(&c).map_err(|e| e.to_string())?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

fn check_len(what: &str, expected: usize, v: &[f64]) -> Result<(), String> {
    if v.len() != expected {
        return Err(format!(
            "{what}: expected {expected} entries, found {}",
            v.len()
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(format!("{what}: entries must be finite"));
    }
    Ok(())
}

fn check_points(what: &str, expected: usize, points: &[Vec<f64>]) -> Result<(), String> {
    if points.is_empty() {
        return Err(format!("{what}: must not be empty"));
    }
    for (i, v) in points.iter().enumerate() {
        check_len(&format!("{what}[{i}]"), expected, v)?;
    }
    Ok(())
}

fn check_predictors(what: &str, n: usize, predictors: &[PredictorConfig]) -> Result<(), String> {
    if predictors.is_empty() {
        return Err(format!("{what}: must not be empty"));
    }
    for (i, p) in predictors.iter().enumerate() {
        p.validate(n, true)
            .map_err(|e| format!("{what}[{i}]: {e}"))?;
    }
    Ok(())
}

pub fn build_system(spec: &SystemSpec) -> Result<ParametricSystem, String> {
    match spec {
        SystemSpec::Builtin(name) => builtin_system(name).map_err(|e| format!("system: {e}")),
        SystemSpec::Polynomial(p) => {
            let d = p.drift.len();
            let drift = polynomial_field("system.drift", d, &p.drift)?;
            let inputs = p
                .inputs
                .iter()
                .enumerate()
                .map(|(i, g)| polynomial_field(&format!("system.inputs[{i}]"), d, g))
                .collect::<Result<Vec<_>, _>>()?;
            ParametricSystem::new(
                p.name.clone(),
                drift,
                inputs,
                p.state_domain.clone(),
                p.param_domain.clone(),
            )
            .map_err(|e| format!("system: {e}"))
        }
    }
}

fn polynomial_field(
    what: &str,
    d: usize,
    components: &[Vec<Term>],
) -> Result<Arc<dyn VectorField>, String> {
    if d == 0 || components.len() != d {
        return Err(format!(
            "{what}: expected {d} components, found {}",
            components.len()
        ));
    }
    for (i, terms) in components.iter().enumerate() {
        for t in terms {
            if t.powers.len() != d {
                return Err(format!(
                    "{what}[{i}]: term powers must have {d} entries, found {}",
                    t.powers.len()
                ));
            }
            if !t.coef.is_finite() {
                return Err(format!("{what}[{i}]: coefficients must be finite"));
            }
        }
    }
    let components = components.to_vec();
    Ok(Arc::new(FnField::new(d, move |x, dx| {
        for (out, terms) in dx.iter_mut().zip(&components) {
            *out = terms
                .iter()
                .map(|t| {
                    t.powers
                        .iter()
                        .zip(x)
                        .fold(t.coef, |acc, (&k, &xi)| acc * xi.powi(k as i32))
                })
                .sum();
        }
    })))
}
