//! Parametric Koopman surrogates with covariance-aware reprojection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod dictionary;
pub mod dynamics;
pub mod edmd;
pub mod error;
pub mod linalg;
pub mod model_io;
pub mod prediction;
pub mod reprojection;
pub mod training;

pub use covariance::{CovarianceSurrogate, ResidualSample};
pub use dictionary::{Dictionary, MultiIndex, Witness};
pub use dynamics::{AxisBox, BuiltinSystem, Integrator, ParametricSystem, VectorField};
pub use edmd::{KoopmanModel, ParamSampling, SnapshotSet, StateSampling};
pub use error::{Error, Result};
pub use model_io::{load_model, save_model};
pub use prediction::{Mode, PredictionTrace, PredictorConfig, Schedule, TriggerMeasure};
pub use reprojection::{NewtonOptions, ProjectionResult, WeightMatrix};
