//! Snapshot data and the (parametric) EDMD regression.
//!
//! The parametric model regresses `Psi(x+)` on `pbar ⊗ Psi(x)` with
//! `pbar = (1, p)`, giving `K = [K_0 K_1 ... K_m]` and the prediction
//! `(K_0 + sum_i p_i K_i) Psi(x)`.
//!
//! Regression columns are scaled by their maximum absolute value over the
//! training set before solving; the stored blocks are in unscaled coordinates.

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::dynamics::{sample_point, AxisBox, Integrator, ParametricSystem};
use crate::error::{check_dim, Error, Result};

type Snapshot = (DVector<f64>, DVector<f64>, DVector<f64>);

/// Pairs `(x_j, p_j) -> x_j+ = Fl^t_p(x_j)`.
///
/// An empty `params` list marks autonomous data.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub states: Vec<DVector<f64>>,
    pub params: Vec<DVector<f64>>,
    pub successors: Vec<DVector<f64>>,
    pub t: f64,
}

impl SnapshotSet {
    pub fn new(
        states: Vec<DVector<f64>>,
        params: Vec<DVector<f64>>,
        successors: Vec<DVector<f64>>,
        t: f64,
    ) -> Result<Self> {
        let set = Self {
            states,
            params,
            successors,
            t,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_autonomous(&self) -> bool {
        self.params.is_empty()
    }

    /// Number of parameters `m` (0 for autonomous data).
    pub fn n_params(&self) -> usize {
        self.params.first().map_or(0, |p| p.len())
    }

    /// `pbar_j = (1, p_j)`.
    pub fn augmented_param(&self, j: usize) -> DVector<f64> {
        augment(self.params.get(j).map(|p| p.as_slice()).unwrap_or(&[]))
    }

    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sampling time must be positive, got {}",
                self.t
            )));
        }
        check_dim("successor count", self.states.len(), self.successors.len())?;
        if !self.params.is_empty() {
            check_dim("parameter count", self.states.len(), self.params.len())?;
            let m = self.params[0].len();
            for p in &self.params {
                check_dim("parameter length", m, p.len())?;
            }
        }
        if let Some(d) = self.states.first().map(|x| x.len()) {
            for (x, y) in self.states.iter().zip(&self.successors) {
                check_dim("state length", d, x.len())?;
                check_dim("successor length", d, y.len())?;
            }
        }
        Ok(())
    }

    /// Concatenation of `self` with `other` (same `t`).
    pub fn concat(&self, other: &SnapshotSet) -> Result<SnapshotSet> {
        let mut s = self.clone();
        s.states.extend(other.states.iter().cloned());
        s.params.extend(other.params.iter().cloned());
        s.successors.extend(other.successors.iter().cloned());
        s.validate()?;
        Ok(s)
    }
}

/// `(1, p)`.
pub fn augment(p: &[f64]) -> DVector<f64> {
    let mut v = DVector::zeros(p.len() + 1);
    v[0] = 1.0;
    v.rows_mut(1, p.len()).copy_from_slice(p);
    v
}

/// Distribution of training parameters over the parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum ParamSampling {
    /// i.i.d. uniform on the parameter box, fresh per snapshot.
    Uniform,
    /// Uniform choice from a finite list of parameter vectors.
    Grid(Vec<Vec<f64>>),
}

/// How training states are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StateSampling {
    /// i.i.d. uniform on the state box.
    Uniform,
    /// Consecutive snapshots along trajectories of `length` steps, started
    /// uniformly in the state box with one parameter per trajectory.
    Trajectory { length: usize },
}

const PARAM_STREAM_SALT: u64 = 0x5041_5241_4d53_0001;

/// Samples `n` snapshot pairs of `sys` with sampling time `t`.
///
/// Snapshot `j` depends only on `(seed, j)`; successors are computed in parallel.
pub fn generate_snapshots(
    sys: &ParametricSystem,
    n: usize,
    t: f64,
    seed: u64,
    params: &ParamSampling,
    states: &StateSampling,
    integrator: &Integrator,
) -> Result<SnapshotSet> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be positive".into(),
        ));
    }
    let draw_param = |index: u64| -> Result<DVector<f64>> {
        match params {
            ParamSampling::Uniform => Ok(sample_point(
                &sys.param_domain,
                seed ^ PARAM_STREAM_SALT,
                index,
            )),
            ParamSampling::Grid(values) => {
                if values.is_empty() {
                    return Err(Error::InvalidArgument("empty parameter grid".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PARAM_STREAM_SALT);
                rng.set_stream(index);
                let v = &values[rng.random_range(0..values.len())];
                check_dim("grid parameter", sys.n_params(), v.len())?;
                Ok(DVector::from_column_slice(v))
            }
        }
    };

    let (xs, ps, ys): (Vec<_>, Vec<_>, Vec<_>) = match states {
        StateSampling::Uniform => {
            let rows: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let x = sample_point(&sys.state_domain, seed, j as u64);
                    let p = draw_param(j as u64)?;
                    let field = sys.combined_field(p.as_slice())?;
                    let y = integrator.integrate(&field, &x, t)?;
                    Ok((x, p, y))
                })
                .collect::<Result<_>>()?;
            unzip3(rows)
        }
        StateSampling::Trajectory { length } => {
            let length = (*length).max(1);
            let n_traj = n.div_ceil(length);
            let trajs: Vec<Vec<Snapshot>> = (0..n_traj)
                .into_par_iter()
                .map(|i| {
                    let mut x = sample_point(&sys.state_domain, seed, i as u64);
                    let p = draw_param(i as u64)?;
                    let field = sys.combined_field(p.as_slice())?;
                    let mut out = Vec::with_capacity(length);
                    for _ in 0..length {
                        let y = integrator.integrate(&field, &x, t)?;
                        out.push((x, p.clone(), y.clone()));
                        x = y;
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            unzip3(trajs.into_iter().flatten().take(n).collect())
        }
    };
    SnapshotSet::new(xs, ps, ys, t)
}

fn unzip3<A, B, C>(v: Vec<(A, B, C)>) -> (Vec<A>, Vec<B>, Vec<C>) {
    let mut a = Vec::with_capacity(v.len());
    let mut b = Vec::with_capacity(v.len());
    let mut c = Vec::with_capacity(v.len());
    for (x, y, z) in v {
        a.push(x);
        b.push(y);
        c.push(z);
    }
    (a, b, c)
}

/// Fitted Koopman compression `K = [K_0 ... K_m]` with its dictionary metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub blocks: Vec<DMatrix<f64>>,
    pub dict: Dictionary,
    pub t: f64,
    /// Per-observable scale (max |Psi_k| over the training states).
    pub feature_scale: DVector<f64>,
    pub system: Option<String>,
    pub state_domain: Option<AxisBox>,
    pub param_domain: Option<AxisBox>,
    pub param_sampling: Option<ParamSampling>,
}

impl KoopmanModel {
    /// Number of parameters.
    pub fn m(&self) -> usize {
        self.blocks.len() - 1
    }

    /// Number of observables.
    pub fn n_features(&self) -> usize {
        self.dict.len()
    }

    /// `K_0 + sum_i p_i K_i`.
    pub fn matrix_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("parameter vector", self.m(), p.len())?;
        let mut k = self.blocks[0].clone();
        for (b, &pi) in self.blocks[1..].iter().zip(p) {
            k += b * pi;
        }
        Ok(k)
    }

    /// `(K_0 + sum_i p_i K_i) z`.
    pub fn apply(&self, p: &[f64], z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("parameter vector", self.m(), p.len())?;
        check_dim("lifted state", self.n_features(), z.len())?;
        let mut out = &self.blocks[0] * z;
        for (b, &pi) in self.blocks[1..].iter().zip(p) {
            out += (b * z) * pi;
        }
        Ok(out)
    }

    /// Model with the given blocks and no training metadata.
    pub fn from_blocks(dict: Dictionary, blocks: Vec<DMatrix<f64>>, t: f64) -> Result<Self> {
        let m_feat = dict.len();
        if blocks.is_empty() {
            return Err(Error::InvalidArgument(
                "model needs at least one block".into(),
            ));
        }
        for b in &blocks {
            check_dim("block rows", m_feat, b.nrows())?;
            check_dim("block columns", m_feat, b.ncols())?;
        }
        Ok(Self {
            blocks,
            feature_scale: DVector::from_element(m_feat, 1.0),
            dict,
            t,
            system: None,
            state_domain: None,
            param_domain: None,
            param_sampling: None,
        })
    }
}

/// Free-function form of [`KoopmanModel::apply`].
pub fn apply(model: &KoopmanModel, p: &[f64], z: &DVector<f64>) -> Result<DVector<f64>> {
    model.apply(p, z)
}

/// Regularization applied in the regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// Adds `ridge * ||K||_F^2` to the objective (in unscaled coordinates).
    Ridge(f64),
    /// Plain least squares; on singularity retries with
    /// `1e-10 * trace(G) / rows` on the scaled Gram matrix `G`.
    Auto,
}

/// Diagnostics reported by a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub n_samples: usize,
    pub n_columns: usize,
    /// Condition number of the column-scaled regression matrix.
    pub condition_number: f64,
    /// Penalty applied in scaled coordinates (0 for plain least squares).
    pub scaled_ridge: f64,
    pub fallback_used: bool,
    /// Root mean square of the lifted training residual.
    pub residual_rms: f64,
}

/// Relative singular-value cutoff for the unregularized solve.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Autonomous EDMD: `K = argmin sum_j |Psi(x_j+) - K Psi(x_j)|^2 + ridge |K|_F^2`.
pub fn fit_autonomous(dict: &Dictionary, data: &SnapshotSet, ridge: f64) -> Result<KoopmanModel> {
    if !data.is_autonomous() {
        return Err(Error::InvalidArgument(
            "fit_autonomous expects data without parameters".into(),
        ));
    }
    fit_regression(dict, data, Regularization::Ridge(ridge)).map(|(m, _)| m)
}

/// Parametric EDMD on `pbar ⊗ Psi(x)`.
pub fn fit_parametric(dict: &Dictionary, data: &SnapshotSet, ridge: f64) -> Result<KoopmanModel> {
    if data.is_autonomous() {
        return Err(Error::InvalidArgument(
            "fit_parametric expects a parameter per snapshot".into(),
        ));
    }
    fit_regression(dict, data, Regularization::Ridge(ridge)).map(|(m, _)| m)
}

/// Shared regression for autonomous and parametric data.
pub fn fit_regression(
    dict: &Dictionary,
    data: &SnapshotSet,
    reg: Regularization,
) -> Result<(KoopmanModel, FitReport)> {
    data.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("no snapshots".into()));
    }
    check_dim("snapshot state dimension", dict.dim(), data.states[0].len())?;
    if let Regularization::Ridge(r) = reg {
        if !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ridge must be >= 0, got {r}"
            )));
        }
    }
    let n = data.len();
    let m_feat = dict.len();
    let m_par = data.n_params();
    let cols = m_feat * (m_par + 1);

    let lifted_x: Vec<DVector<f64>> = data
        .states
        .par_iter()
        .map(|x| dict.lift_slice(x.as_slice()))
        .collect();
    let lifted_y: Vec<DVector<f64>> = data
        .successors
        .par_iter()
        .map(|x| dict.lift_slice(x.as_slice()))
        .collect();

    let mut design = DMatrix::zeros(n, cols);
    for (j, psi) in lifted_x.iter().enumerate() {
        let pbar = data.augmented_param(j);
        for (i, pb) in pbar.iter().enumerate() {
            for (k, v) in psi.iter().enumerate() {
                design[(j, i * m_feat + k)] = pb * v;
            }
        }
    }
    let mut target = DMatrix::zeros(n, m_feat);
    for (j, psi) in lifted_y.iter().enumerate() {
        target.row_mut(j).copy_from(&psi.transpose());
    }

    let col_scale: Vec<f64> = (0..cols)
        .map(|c| {
            let s = design.column(c).amax();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for (c, s) in col_scale.iter().enumerate() {
        design.column_mut(c).unscale_mut(*s);
    }

    let (solution, condition_number, scaled_ridge, fallback_used) = match reg {
        Regularization::Ridge(r) if r > 0.0 => {
            let penalty: Vec<f64> = col_scale.iter().map(|s| r / (s * s)).collect();
            let (x, cond) = solve_ridge(&design, &target, &penalty)?;
            (x, cond, r, false)
        }
        Regularization::Ridge(_) => {
            let (x, cond) = solve_least_squares(&design, &target)?;
            (x, cond, 0.0, false)
        }
        Regularization::Auto => match solve_least_squares(&design, &target) {
            Ok((x, cond)) => (x, cond, 0.0, false),
            Err(Error::Singular {
                smallest_singular_value,
                ..
            }) => {
                let gram = design.transpose() * &design;
                let lambda = 1e-10 * gram.trace() / cols as f64;
                warn!(
                    "regression matrix singular (sigma_min = {smallest_singular_value:e}); \
                     retrying with scaled ridge {lambda:e}"
                );
                let (x, cond) = solve_ridge(&design, &target, &vec![lambda; cols])?;
                (x, cond, lambda, true)
            }
            Err(e) => return Err(e),
        },
    };

    // solution is cols x M with design * solution ≈ target; unscale rows.
    let mut k_full = solution.transpose();
    for (c, s) in col_scale.iter().enumerate() {
        k_full.column_mut(c).unscale_mut(*s);
    }
    let blocks: Vec<DMatrix<f64>> = (0..=m_par)
        .map(|i| k_full.columns(i * m_feat, m_feat).into_owned())
        .collect();

    let feature_scale = DVector::from_iterator(
        m_feat,
        (0..m_feat).map(|k| {
            let s = lifted_x.iter().fold(0.0f64, |acc, z| acc.max(z[k].abs()));
            if s > 0.0 {
                s
            } else {
                1.0
            }
        }),
    );

    let model = KoopmanModel {
        blocks,
        dict: dict.clone(),
        t: data.t,
        feature_scale,
        system: None,
        state_domain: None,
        param_domain: None,
        param_sampling: None,
    };

    let mut sq = 0.0;
    for j in 0..n {
        let p = data.params.get(j).map(|p| p.as_slice()).unwrap_or(&[]);
        let r = &lifted_y[j] - model.apply(p, &lifted_x[j])?;
        sq += r.norm_squared();
    }
    let report = FitReport {
        n_samples: n,
        n_columns: cols,
        condition_number,
        scaled_ridge,
        fallback_used,
        residual_rms: (sq / (n * m_feat) as f64).sqrt(),
    };
    info!(
        "fitted {} block(s) of size {m_feat} from {n} snapshots (cond {:.3e}, residual rms {:.3e})",
        m_par + 1,
        report.condition_number,
        report.residual_rms
    );
    Ok((model, report))
}

/// Least squares via Householder QR followed by an SVD of the triangular factor.
fn solve_least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::Singular {
            smallest_singular_value: 0.0,
            largest_singular_value: a.norm(),
        });
    }
    let qr = a.clone().qr();
    let mut qtb = b.clone();
    qr.q_tr_mul(&mut qtb);
    let r = qr.r();
    let svd = r.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > SINGULAR_RCOND * smax) {
        return Err(Error::Singular {
            smallest_singular_value: smin,
            largest_singular_value: smax,
        });
    }
    let top = qtb.rows(0, cols).into_owned();
    let x = svd
        .solve(&top, 0.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((x, smax / smin))
}

/// Normal equations `(A^T A + diag(penalty)) X = A^T B` solved by Cholesky.
fn solve_ridge(a: &DMatrix<f64>, b: &DMatrix<f64>, penalty: &[f64]) -> Result<(DMatrix<f64>, f64)> {
    let mut gram = a.transpose() * a;
    for (i, p) in penalty.iter().enumerate() {
        gram[(i, i)] += p;
    }
    let rhs = a.transpose() * b;
    let ev = gram.clone().symmetric_eigenvalues();
    let (emin, emax) = (ev.min(), ev.max());
    let chol = gram.cholesky().ok_or(Error::Singular {
        smallest_singular_value: emin.max(0.0).sqrt(),
        largest_singular_value: emax.max(0.0).sqrt(),
    })?;
    Ok((chol.solve(&rhs), (emax / emin).sqrt()))
}
