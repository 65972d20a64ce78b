//! Multistep prediction with the lifted linear model, optionally reprojecting
//! onto the state manifold every step or when the propagated covariance grows.

use std::fmt::Write as _;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{propagate_with, CovarianceSurrogate};
use crate::dynamics::{Integrator, ParametricSystem};
use crate::edmd::KoopmanModel;
use crate::error::{check_dim, Error, Result};
use crate::reprojection::{
    coordinate_project, ml_weight_from_covariance, newton_project, scaled_covariance,
    NewtonOptions, ProjectionResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Standard,
    Coordinate,
    MaxLikelihood,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Standard => "standard",
            Mode::Coordinate => "coordinate",
            Mode::MaxLikelihood => "max_likelihood",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    EveryStep,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMeasure {
    Trace,
    DiagEntry(usize),
}

/// Initial guess for each Newton reprojection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Previous reprojected state (the initial state before the first one).
    Previous,
    /// Witness readout of the current lifted state.
    Readout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub mode: Mode,
    pub schedule: Schedule,
    pub trigger_measure: TriggerMeasure,
    pub trigger_factor: f64,
    /// Relative eigenvalue floor of the scaled covariance before inversion.
    pub ridge: f64,
    pub newton_tol: f64,
    pub newton_k_max: usize,
    pub warm_start: WarmStart,
    /// Newton iterates are clamped to the state domain with half-widths scaled
    /// by this factor; `None` disables clamping.
    pub domain_inflation: Option<f64>,
    /// Keep the propagated covariance of every step in the trace.
    pub record_covariance: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Standard,
            schedule: Schedule::EveryStep,
            trigger_measure: TriggerMeasure::Trace,
            trigger_factor: 10.0,
            ridge: 1e-10,
            newton_tol: 1e-8,
            newton_k_max: 50,
            warm_start: WarmStart::Previous,
            domain_inflation: Some(1.1),
            record_covariance: false,
        }
    }
}

impl PredictorConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn adaptive(mode: Mode, measure: TriggerMeasure, factor: f64) -> Self {
        Self {
            mode,
            schedule: Schedule::Adaptive,
            trigger_measure: measure,
            trigger_factor: factor,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_features: usize, has_q: bool) -> Result<()> {
        if self.mode == Mode::MaxLikelihood && !has_q {
            return Err(Error::InvalidArgument(
                "max_likelihood prediction needs a covariance surrogate".into(),
            ));
        }
        if self.schedule == Schedule::Adaptive {
            if self.mode == Mode::Standard {
                return Err(Error::InvalidArgument(
                    "adaptive schedule needs a reprojecting mode".into(),
                ));
            }
            if !has_q {
                return Err(Error::InvalidArgument(
                    "adaptive schedule needs a covariance surrogate".into(),
                ));
            }
            if !(self.trigger_factor > 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "trigger factor must exceed 1, got {}",
                    self.trigger_factor
                )));
            }
        }
        if let TriggerMeasure::DiagEntry(i) = self.trigger_measure {
            if i >= n_features {
                return Err(Error::InvalidArgument(format!(
                    "trigger diagonal entry {i} out of range for {n_features} features"
                )));
            }
        }
        if !(self.newton_tol > 0.0) || self.newton_k_max == 0 {
            return Err(Error::InvalidArgument(
                "Newton tolerance and iteration cap must be positive".into(),
            ));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::InvalidArgument("ridge must be >= 0".into()));
        }
        if let Some(f) = self.domain_inflation {
            if !(f >= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "domain inflation must be >= 1, got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// `trace(sigma)` or `sigma[i, i]`.
pub fn trigger_measure_value(sigma: &DMatrix<f64>, measure: TriggerMeasure) -> Result<f64> {
    if !sigma.is_square() {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    match measure {
        TriggerMeasure::Trace => Ok(sigma.trace()),
        TriggerMeasure::DiagEntry(i) if i < sigma.nrows() => Ok(sigma[(i, i)]),
        TriggerMeasure::DiagEntry(i) => Err(Error::InvalidArgument(format!(
            "diagonal entry {i} out of range for size {}",
            sigma.nrows()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub z: Vec<f64>,
    /// `None` when the dictionary has no witness entries.
    pub x: Option<Vec<f64>>,
    /// Trigger measure of the propagated covariance in scaled features (NaN without Q).
    pub mu: f64,
    pub reprojected: bool,
    pub newton_iterations: usize,
    pub newton_converged: bool,
    pub step_norms: Vec<f64>,
    /// Propagated covariance before any reset, when recording is enabled.
    #[serde(skip)]
    pub covariance: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionTrace {
    pub config: PredictorConfig,
    pub p: Vec<f64>,
    pub x0: Vec<f64>,
    pub t: f64,
    pub n_steps: usize,
    pub steps: Vec<StepRecord>,
}

impl PredictionTrace {
    /// Steps `k >= 1` at which a reprojection happened.
    pub fn reprojection_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| s.reprojected)
            .map(|s| s.k)
            .collect()
    }

    /// Gaps between consecutive reprojections, counting from `k = 0`.
    pub fn reprojection_intervals(&self) -> Vec<usize> {
        let mut prev = 0;
        self.reprojection_steps()
            .into_iter()
            .map(|k| {
                let gap = k - prev;
                prev = k;
                gap
            })
            .collect()
    }

    pub fn final_state(&self) -> Option<DVector<f64>> {
        self.steps
            .last()
            .and_then(|s| s.x.as_ref())
            .map(|x| DVector::from_column_slice(x))
    }

    /// One row per step: `k,time,x_0..,[z_0..,]mu,reprojected,newton_iters,newton_converged[,error]`.
    pub fn to_csv(&self, include_z: bool, errors: Option<&[f64]>) -> String {
        let d = self.x0.len();
        let m = self.steps.first().map_or(0, |s| s.z.len());
        let mut out = String::from("k,time");
        for i in 0..d {
            let _ = write!(out, ",x{i}");
        }
        if include_z {
            for i in 0..m {
                let _ = write!(out, ",z{i}");
            }
        }
        out.push_str(",mu,reprojected,newton_iters,newton_converged");
        out.push_str(if errors.is_some() { ",error\n" } else { "\n" });
        for (i, s) in self.steps.iter().enumerate() {
            let _ = write!(out, "{},{}", s.k, s.k as f64 * self.t);
            match &s.x {
                Some(x) => x.iter().for_each(|v| {
                    let _ = write!(out, ",{v}");
                }),
                None => (0..d).for_each(|_| out.push(',')),
            }
            if include_z {
                s.z.iter().for_each(|v| {
                    let _ = write!(out, ",{v}");
                });
            }
            let _ = write!(
                out,
                ",{},{},{},{}",
                s.mu, s.reprojected as u8, s.newton_iterations, s.newton_converged as u8
            );
            if let Some(e) = errors {
                match e.get(i) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Runs `n_steps` of the lifted recurrence `z <- (K_0 + sum p_i K_i) z` from `Psi(x0)`.
///
/// The adaptive schedule reprojects at step `k` when one more unprojected step
/// would push the scaled covariance measure above `trigger_factor` times the
/// one-step baseline `measure(Q(pbar, pbar))`; the covariance then restarts at 0.
/// The ML weight is the inverse of the covariance accumulated since the last
/// reprojection, which equals `Q(pbar, pbar)` under the every-step schedule.
pub fn predict(
    model: &KoopmanModel,
    q: Option<&CovarianceSurrogate>,
    config: &PredictorConfig,
    x0: &DVector<f64>,
    p: &[f64],
    n_steps: usize,
) -> Result<PredictionTrace> {
    let dict = &model.dict;
    let n_feat = model.n_features();
    check_dim("initial state", dict.dim(), x0.len())?;
    check_dim("parameter vector", model.m(), p.len())?;
    config.validate(n_feat, q.is_some())?;
    if let Some(q) = q {
        check_dim("covariance size", n_feat, q.n_features())?;
        check_dim("covariance parameter count", model.m(), q.m())?;
    }

    let k_mat = model.matrix_at(p)?;
    let q_p = q.map(|q| q.eval(p)).transpose()?;
    let scale = &model.feature_scale;
    let measure = |s: &DMatrix<f64>| {
        trigger_measure_value(&scaled_covariance(s, scale), config.trigger_measure)
    };
    let baseline = q_p.as_ref().map(&measure).transpose()?;
    let witnesses = dict.witnesses().ok();
    let readout = |z: &DVector<f64>| {
        witnesses
            .as_ref()
            .map(|w| crate::dictionary::read_witnesses(w, z))
    };
    let mut newton_opts = NewtonOptions::new(config.newton_tol, config.newton_k_max);
    if let (Some(domain), Some(f)) = (&model.state_domain, config.domain_inflation) {
        newton_opts.bounds = Some(domain.scaled(f));
    }

    let mut z = dict.lift(x0)?;
    let mut sigma = DMatrix::<f64>::zeros(n_feat, n_feat);
    let mut warm = x0.clone();
    let mut steps = Vec::with_capacity(n_steps + 1);
    steps.push(StepRecord {
        k: 0,
        z: z.as_slice().to_vec(),
        x: Some(x0.as_slice().to_vec()),
        mu: if q_p.is_some() { 0.0 } else { f64::NAN },
        reprojected: false,
        newton_iterations: 0,
        newton_converged: true,
        step_norms: Vec::new(),
        covariance: config.record_covariance.then(|| sigma.clone()),
    });

    for k in 1..=n_steps {
        z = &k_mat * &z;
        let mut mu = f64::NAN;
        if let Some(qp) = &q_p {
            sigma = propagate_with(&k_mat, qp, &sigma);
            mu = measure(&sigma)?;
        }
        let reproject = match (config.mode, config.schedule) {
            (Mode::Standard, _) => false,
            (_, Schedule::EveryStep) => true,
            (_, Schedule::Adaptive) => {
                let qp = q_p.as_ref().expect("validated");
                let ahead = propagate_with(&k_mat, qp, &sigma);
                measure(&ahead)? > config.trigger_factor * baseline.expect("validated")
            }
        };

        let mut record = StepRecord {
            k,
            z: Vec::new(),
            x: None,
            mu,
            reprojected: reproject,
            newton_iterations: 0,
            newton_converged: true,
            step_norms: Vec::new(),
            covariance: config.record_covariance.then(|| sigma.clone()),
        };
        if reproject {
            let result = match config.mode {
                Mode::Coordinate => coordinate_project(dict, &z)?,
                Mode::MaxLikelihood => {
                    let w = ml_weight_from_covariance(&sigma, scale, config.ridge)?;
                    let start = match config.warm_start {
                        WarmStart::Previous => warm.clone(),
                        WarmStart::Readout => readout(&z).unwrap_or_else(|| warm.clone()),
                    };
                    let r = newton_project(dict, &w, &z, &start, &newton_opts)?;
                    record.newton_iterations = r.iterations;
                    record.newton_converged = r.converged;
                    record.step_norms = r.step_norms.clone();
                    if r.converged {
                        r
                    } else {
                        debug!("Newton did not converge at step {k}; using coordinate readout");
                        coordinate_fallback(dict, &z, r)?
                    }
                }
                Mode::Standard => unreachable!(),
            };
            z = result.z;
            warm = result.x.clone();
            record.x = Some(result.x.as_slice().to_vec());
            sigma.fill(0.0);
        } else {
            record.x = readout(&z).map(|x| x.as_slice().to_vec());
        }
        record.z = z.as_slice().to_vec();
        steps.push(record);
    }

    Ok(PredictionTrace {
        config: config.clone(),
        p: p.to_vec(),
        x0: x0.as_slice().to_vec(),
        t: model.t,
        n_steps,
        steps,
    })
}

fn coordinate_fallback(
    dict: &crate::dictionary::Dictionary,
    z: &DVector<f64>,
    newton: ProjectionResult,
) -> Result<ProjectionResult> {
    match coordinate_project(dict, z) {
        Ok(c) => Ok(c),
        Err(Error::UnsupportedDictionary { .. }) => Ok(newton),
        Err(e) => Err(e),
    }
}

/// State after one prediction step from each `x` in `xs`.
pub fn one_step_map(
    model: &KoopmanModel,
    q: Option<&CovarianceSurrogate>,
    config: &PredictorConfig,
    xs: &[DVector<f64>],
    p: &[f64],
) -> Result<Vec<Option<DVector<f64>>>> {
    xs.iter()
        .map(|x| Ok(predict(model, q, config, x, p, 1)?.final_state()))
        .collect()
}

/// Points where the scalar map `x -> fx` meets the diagonal, by sign changes of
/// `fx - x` with linear interpolation between neighbouring grid points.
pub fn diagonal_crossings(xs: &[f64], fx: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = xs.iter().zip(fx).map(|(x, f)| f - x).collect();
    let mut out = Vec::new();
    for i in 0..g.len() {
        if g[i] == 0.0 {
            out.push(xs[i]);
            continue;
        }
        if i + 1 < g.len() && g[i] * g[i + 1] < 0.0 {
            let s = g[i] / (g[i] - g[i + 1]);
            out.push(xs[i] + s * (xs[i + 1] - xs[i]));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSeries {
    /// `|x(k) - x_true(k)|`, or the lifted error when states are unavailable.
    pub errors: Vec<f64>,
    pub truth: Vec<Vec<f64>>,
    pub lifted: bool,
    /// First step whose ground truth could not be integrated, with the reason.
    pub truncated: Option<(usize, String)>,
}

/// Per-step errors against the integrated flow of `sys` at the trace's parameter.
pub fn compare_to_truth(
    trace: &PredictionTrace,
    sys: &ParametricSystem,
    model: &KoopmanModel,
    integrator: &Integrator,
) -> Result<ErrorSeries> {
    let field = sys.combined_field(&trace.p)?;
    let mut x = DVector::from_column_slice(&trace.x0);
    check_dim("initial state", sys.dim(), x.len())?;
    let lifted = trace.steps.iter().any(|s| s.x.is_none());
    let mut errors = Vec::with_capacity(trace.steps.len());
    let mut truth = Vec::with_capacity(trace.steps.len());
    let mut truncated = None;
    for s in &trace.steps {
        if s.k > 0 {
            match integrator.integrate(&field, &x, trace.t) {
                Ok(y) => x = y,
                Err(e) => {
                    truncated = Some((s.k, e.to_string()));
                    break;
                }
            }
        }
        let err = if lifted {
            (DVector::from_column_slice(&s.z) - model.dict.lift(&x)?).norm()
        } else {
            (DVector::from_column_slice(s.x.as_ref().expect("checked")) - &x).norm()
        };
        errors.push(err);
        truth.push(x.as_slice().to_vec());
    }
    Ok(ErrorSeries {
        errors,
        truth,
        lifted,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::Dictionary;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    fn toy() -> (KoopmanModel, CovarianceSurrogate) {
        let dict = Dictionary::full(1, 3).unwrap();
        let mut b0 = DMatrix::identity(4, 4) * 0.995;
        b0[(0, 2)] = 0.02;
        b0[(1, 1)] = 1.0;
        let b1 = DMatrix::identity(4, 4) * 0.01;
        let model = KoopmanModel::from_blocks(dict, vec![b0, b1], 0.1).unwrap();
        let mut blocks = vec![DMatrix::zeros(4, 4); 4];
        blocks[0] = DMatrix::from_diagonal(&v(&[1e-4, 1e-12, 2e-4, 3e-4]));
        let q = CovarianceSurrogate::from_blocks(1, blocks).unwrap();
        (model, q)
    }

    #[test]
    fn zero_steps() {
        let (model, q) = toy();
        let t = predict(
            &model,
            Some(&q),
            &PredictorConfig::new(Mode::MaxLikelihood),
            &v(&[0.5]),
            &[1.0],
            0,
        )
        .unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].x, Some(vec![0.5]));
        assert_eq!(t.steps[0].z, vec![0.5, 1.0, 0.25, 0.125]);
    }

    #[test]
    fn measures() {
        let s = DMatrix::from_diagonal(&v(&[1.0, 2.0, 3.0]));
        assert_eq!(
            trigger_measure_value(&s, TriggerMeasure::Trace).unwrap(),
            6.0
        );
        assert_eq!(
            trigger_measure_value(&s, TriggerMeasure::DiagEntry(0)).unwrap(),
            1.0
        );
        assert!(trigger_measure_value(&s, TriggerMeasure::DiagEntry(3)).is_err());
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 4.0, -2.0, 3.0]);
        let sym = crate::linalg::symmetrize(&a);
        for m in [TriggerMeasure::Trace, TriggerMeasure::DiagEntry(1)] {
            assert_eq!(
                trigger_measure_value(&a, m).unwrap(),
                trigger_measure_value(&sym, m).unwrap()
            );
        }
    }

    #[test]
    fn reprojected_steps_lie_on_manifold() {
        let (model, q) = toy();
        for mode in [Mode::Coordinate, Mode::MaxLikelihood] {
            let t = predict(
                &model,
                Some(&q),
                &PredictorConfig::new(mode),
                &v(&[0.5]),
                &[1.0],
                20,
            )
            .unwrap();
            for s in &t.steps[1..] {
                assert!(s.reprojected);
                let x = DVector::from_column_slice(s.x.as_ref().unwrap());
                assert_eq!(model.dict.lift(&x).unwrap().as_slice(), s.z.as_slice());
            }
        }
    }

    #[test]
    fn standard_mode_never_reprojects() {
        let (model, q) = toy();
        let t = predict(
            &model,
            Some(&q),
            &PredictorConfig::new(Mode::Standard),
            &v(&[0.5]),
            &[1.0],
            10,
        )
        .unwrap();
        assert!(t.reprojection_steps().is_empty());
        let mut z = model.dict.lift(&v(&[0.5])).unwrap();
        let k = model.matrix_at(&[1.0]).unwrap();
        for _ in 0..10 {
            z = &k * z;
        }
        assert_eq!(t.steps[10].z, z.as_slice());
    }

    #[test]
    fn every_step_equals_adaptive_limit() {
        let (model, q) = toy();
        let every = predict(
            &model,
            Some(&q),
            &PredictorConfig::new(Mode::MaxLikelihood),
            &v(&[0.5]),
            &[1.0],
            30,
        )
        .unwrap();
        let adaptive = predict(
            &model,
            Some(&q),
            &PredictorConfig::adaptive(Mode::MaxLikelihood, TriggerMeasure::Trace, 1.0 + 1e-12),
            &v(&[0.5]),
            &[1.0],
            30,
        )
        .unwrap();
        assert_eq!(every.steps, adaptive.steps);
    }

    #[test]
    fn covariance_recurrence_between_reprojections() {
        let (model, q) = toy();
        let mut cfg = PredictorConfig::adaptive(Mode::Coordinate, TriggerMeasure::Trace, 5.0);
        cfg.record_covariance = true;
        let t = predict(&model, Some(&q), &cfg, &v(&[0.5]), &[1.0], 40).unwrap();
        let k = model.matrix_at(&[1.0]).unwrap();
        let qp = q.eval(&[1.0]).unwrap();
        for w in t.steps.windows(2) {
            let prev = if w[0].reprojected {
                DMatrix::zeros(4, 4)
            } else {
                w[0].covariance.clone().unwrap()
            };
            let next = w[1].covariance.as_ref().unwrap();
            let diff = next - &k * prev * k.transpose() - &qp;
            assert!(diff.amax() <= 1e-15 * next.amax().max(1e-300) * 10.0);
        }
        assert!(!t.reprojection_steps().is_empty());
    }

    #[test]
    fn adaptive_intervals_grow_with_factor() {
        let (model, q) = toy();
        let mut prev = 0.0;
        for factor in [2.0, 5.0, 20.0] {
            let cfg = PredictorConfig::adaptive(Mode::Coordinate, TriggerMeasure::Trace, factor);
            let t = predict(&model, Some(&q), &cfg, &v(&[0.5]), &[1.0], 200).unwrap();
            let iv = t.reprojection_intervals();
            let mean = iv.iter().sum::<usize>() as f64 / iv.len() as f64;
            assert!(mean >= prev, "{factor}: {mean} < {prev}");
            prev = mean;
        }
    }

    #[test]
    fn config_validation() {
        let (model, q) = toy();
        let x0 = v(&[0.5]);
        assert!(predict(
            &model,
            None,
            &PredictorConfig::new(Mode::MaxLikelihood),
            &x0,
            &[1.0],
            1
        )
        .is_err());
        let bad = PredictorConfig::adaptive(Mode::Coordinate, TriggerMeasure::DiagEntry(9), 10.0);
        assert!(predict(&model, Some(&q), &bad, &x0, &[1.0], 1).is_err());
        let bad = PredictorConfig::adaptive(Mode::Coordinate, TriggerMeasure::Trace, 1.0);
        assert!(predict(&model, Some(&q), &bad, &x0, &[1.0], 1).is_err());
        let bad = PredictorConfig::adaptive(Mode::Standard, TriggerMeasure::Trace, 10.0);
        assert!(predict(&model, Some(&q), &bad, &x0, &[1.0], 1).is_err());
        assert!(predict(&model, Some(&q), &PredictorConfig::default(), &x0, &[], 1).is_err());
    }

    #[test]
    fn crossings_of_cubic_map() {
        let xs: Vec<f64> = (0..401).map(|i| -2.0 + 0.01 * i as f64).collect();
        let fx: Vec<f64> = xs.iter().map(|x| x + 0.1 * (x - x * x * x)).collect();
        let c = diagonal_crossings(&xs, &fx);
        assert_eq!(c.len(), 3);
        for (a, b) in c.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-9, "{c:?}");
        }
        let fx: Vec<f64> = xs.iter().map(|x| 0.5 * x).collect();
        assert_eq!(diagonal_crossings(&xs, &fx).len(), 1);
    }

    #[test]
    fn csv_layout() {
        let (model, q) = toy();
        let t = predict(
            &model,
            Some(&q),
            &PredictorConfig::new(Mode::Coordinate),
            &v(&[0.5]),
            &[1.0],
            2,
        )
        .unwrap();
        let csv = t.to_csv(true, None);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "k,time,x0,z0,z1,z2,z3,mu,reprojected,newton_iters,newton_converged"
        );
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0,0.5,0.5,1,0.25,0.125,0,0,0,1"));
    }
}
