//! End-to-end fitting: sample snapshots, fit the block model and the covariance surrogate.

use serde::{Deserialize, Serialize};

use crate::covariance::{fit_q, residuals, CovarianceSurrogate};
use crate::dictionary::{Dictionary, MultiIndex};
use crate::dynamics::{Integrator, ParametricSystem};
use crate::edmd::{
    fit_regression, generate_snapshots, FitReport, KoopmanModel, ParamSampling, Regularization,
    SnapshotSet, StateSampling,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub degree: u32,
    #[serde(default)]
    pub excluded: Vec<MultiIndex>,
    pub t: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// `None` selects plain least squares with the automatic ridge fallback.
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default = "uniform_params")]
    pub param_sampling: ParamSampling,
    #[serde(default = "uniform_states")]
    pub state_sampling: StateSampling,
    #[serde(default)]
    pub integrator: Integrator,
}

fn uniform_params() -> ParamSampling {
    ParamSampling::Uniform
}

fn uniform_states() -> StateSampling {
    StateSampling::Uniform
}

impl TrainingConfig {
    pub fn new(degree: u32, t: f64, n_samples: usize, seed: u64) -> Self {
        Self {
            degree,
            excluded: Vec::new(),
            t,
            n_samples,
            seed,
            ridge: None,
            param_sampling: ParamSampling::Uniform,
            state_sampling: StateSampling::Uniform,
            integrator: Integrator::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: KoopmanModel,
    pub q: CovarianceSurrogate,
    pub report: FitReport,
    pub data: SnapshotSet,
}

pub fn train(sys: &ParametricSystem, cfg: &TrainingConfig) -> Result<Trained> {
    let dict = Dictionary::new(sys.dim(), cfg.degree, cfg.excluded.clone())?;
    let data = generate_snapshots(
        sys,
        cfg.n_samples,
        cfg.t,
        cfg.seed,
        &cfg.param_sampling,
        &cfg.state_sampling,
        &cfg.integrator,
    )?;
    let reg = match cfg.ridge {
        Some(r) => Regularization::Ridge(r),
        None => Regularization::Auto,
    };
    let (mut model, report) = fit_regression(&dict, &data, reg)?;
    model.system = Some(sys.name.clone());
    model.state_domain = Some(sys.state_domain.clone());
    model.param_domain = Some(sys.param_domain.clone());
    model.param_sampling = Some(cfg.param_sampling.clone());
    let q = fit_q(&residuals(&model, &data)?, model.m())?;
    Ok(Trained {
        model,
        q,
        report,
        data,
    })
}
