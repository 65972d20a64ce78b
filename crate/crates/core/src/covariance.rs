//! Residual statistics of a fitted model and the parameter-quadratic
//! covariance surrogate `Sigma(p) = sum_ij pbar_i pbar_j Q_ij`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dynamics::AxisBox;
use crate::edmd::{augment, KoopmanModel, SnapshotSet};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{pinv, symmetrize};

/// Lifted residual `r = Psi(x+) - (K_0 + sum p_i K_i) Psi(x)` with its `pbar = (1, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    pub r: DVector<f64>,
    pub pbar: DVector<f64>,
}

/// Residuals of `model` on every snapshot of `data`, in snapshot order.
pub fn residuals(model: &KoopmanModel, data: &SnapshotSet) -> Result<Vec<ResidualSample>> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    check_dim(
        "snapshot state dimension",
        model.dict.dim(),
        data.states[0].len(),
    )?;
    check_dim("parameter count", model.m(), data.n_params())?;
    (0..data.len())
        .into_par_iter()
        .map(|j| {
            let p = data.params.get(j).map(|p| p.as_slice()).unwrap_or(&[]);
            let z = model.dict.lift(&data.states[j])?;
            let r = model.dict.lift(&data.successors[j])? - model.apply(p, &z)?;
            Ok(ResidualSample {
                r,
                pbar: augment(p),
            })
        })
        .collect()
}

/// Blocks `Q_ij`, `i, j = 0..=m`, each `M x M`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSurrogate {
    m: usize,
    n_features: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl CovarianceSurrogate {
    /// Validates shapes and enforces `Q_ij = Q_ji^T`.
    pub fn from_blocks(m: usize, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let s = m + 1;
        check_dim("covariance block count", s * s, blocks.len())?;
        let n = blocks[0].nrows();
        for b in &blocks {
            check_dim("covariance block rows", n, b.nrows())?;
            check_dim("covariance block columns", n, b.ncols())?;
        }
        let mut sym = blocks.clone();
        for i in 0..s {
            for j in 0..s {
                sym[i * s + j] = (&blocks[i * s + j] + blocks[j * s + i].transpose()) * 0.5;
            }
        }
        Ok(Self {
            m,
            n_features: n,
            blocks: sym,
        })
    }

    pub fn zeros(m: usize, n_features: usize) -> Self {
        Self {
            m,
            n_features,
            blocks: vec![DMatrix::zeros(n_features, n_features); (m + 1) * (m + 1)],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn block(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.blocks[i * (self.m + 1) + j]
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// `Q(pbar, pbar) = sum_ij pbar_i pbar_j Q_ij`, symmetric, without any clipping.
    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("parameter vector", self.m, p.len())?;
        let pbar = augment(p);
        let s = self.m + 1;
        let mut out = DMatrix::zeros(self.n_features, self.n_features);
        for i in 0..s {
            for j in 0..s {
                let w = pbar[i] * pbar[j];
                if w != 0.0 {
                    out += self.block(i, j) * w;
                }
            }
        }
        Ok(symmetrize(&out))
    }
}

/// Relative cutoff of the pseudoinverse of the parameter moment matrix.
pub const MOMENT_RCOND: f64 = 1e-12;

const CHUNK: usize = 1024;

/// `X = (1/N) sum_j (pbar_j ⊗ pbar_j)(pbar_j ⊗ pbar_j)^T`.
pub fn moment_matrix(samples: &[ResidualSample]) -> DMatrix<f64> {
    let s = samples.first().map_or(1, |r| r.pbar.len());
    let partial: Vec<DMatrix<f64>> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = DMatrix::zeros(s * s, s * s);
            for smp in chunk {
                let u = crate::linalg::kron_vec(&smp.pbar, &smp.pbar);
                acc.ger(1.0, &u, &u, 1.0);
            }
            acc
        })
        .collect();
    let mut x = DMatrix::zeros(s * s, s * s);
    for p in partial {
        x += p;
    }
    x / samples.len().max(1) as f64
}

/// Exact `X` for `p` uniform on `domain`.
pub fn analytic_moment_matrix(domain: &AxisBox) -> DMatrix<f64> {
    let m = domain.dim();
    let s = m + 1;
    // raw[c][k] = E[p_c^k] for k = 0..=4
    let raw: Vec<[f64; 5]> = (0..m)
        .map(|c| {
            let (l, h) = (domain.lo[c], domain.hi[c]);
            std::array::from_fn(|k| {
                if h == l {
                    l.powi(k as i32)
                } else {
                    (h.powi(k as i32 + 1) - l.powi(k as i32 + 1)) / ((k as f64 + 1.0) * (h - l))
                }
            })
        })
        .collect();
    let expect = |idx: [usize; 4]| -> f64 {
        let mut counts = vec![0usize; s];
        for i in idx {
            counts[i] += 1;
        }
        (1..s).map(|c| raw[c - 1][counts[c]]).product()
    };
    DMatrix::from_fn(s * s, s * s, |r, c| expect([r / s, r % s, c / s, c % s]))
}

/// Monte-Carlo fit of the covariance surrogate.
///
/// Blocks are read off the fitted map `pbar ⊗ pbar -> vec(Q(pbar, pbar))` on
/// the symmetric basis `(e_i ⊗ e_j + e_j ⊗ e_i) / 2`.
pub fn fit_q(samples: &[ResidualSample], m: usize) -> Result<CovarianceSurrogate> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no residual samples".into()));
    }
    let s = m + 1;
    let n = samples[0].r.len();
    for smp in samples {
        check_dim("augmented parameter", s, smp.pbar.len())?;
        check_dim("residual length", n, smp.r.len())?;
    }
    let partial: Vec<DMatrix<f64>> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = DMatrix::zeros(n * n, s * s);
            for smp in chunk {
                let rr = crate::linalg::kron_vec(&smp.r, &smp.r);
                let u = crate::linalg::kron_vec(&smp.pbar, &smp.pbar);
                acc.ger(1.0, &rr, &u, 1.0);
            }
            acc
        })
        .collect();
    let mut y = DMatrix::zeros(n * n, s * s);
    for p in partial {
        y += p;
    }
    y /= samples.len() as f64;

    let x = moment_matrix(samples);
    let (x_pinv, rank) = pinv(&x, MOMENT_RCOND);
    let required = s * (s + 1) / 2;
    if rank < required {
        return Err(Error::NotIdentifiable { rank, required });
    }
    let map = y * x_pinv;

    let mut blocks = Vec::with_capacity(s * s);
    for i in 0..s {
        for j in 0..s {
            let mut basis = DVector::zeros(s * s);
            basis[i * s + j] += 0.5;
            basis[j * s + i] += 0.5;
            let v = &map * basis;
            // vec is column-major with the second factor fastest; r r^T is symmetric.
            blocks.push(DMatrix::from_column_slice(n, n, v.as_slice()));
        }
    }
    CovarianceSurrogate::from_blocks(m, blocks)
}

/// `1e-10 * trace(sigma) / M`.
pub fn default_ridge(sigma: &DMatrix<f64>) -> f64 {
    1e-10 * sigma.trace().max(0.0) / sigma.nrows().max(1) as f64
}

/// `Sigma(p) + ridge * I` with negative eigenvalues clipped to `ridge`.
pub fn sigma_at(q: &CovarianceSurrogate, p: &[f64], ridge: f64) -> Result<DMatrix<f64>> {
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    Ok(regularize(&q.eval(p)?, ridge))
}

/// Eigenvalues `lambda -> max(lambda, 0) + ridge`; already-PSD input is only shifted.
pub(crate) fn regularize(sigma: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let eig = sigma.clone().symmetric_eigen();
    let n = sigma.nrows();
    if eig.eigenvalues.min() >= 0.0 {
        return sigma + DMatrix::identity(n, n) * ridge;
    }
    crate::linalg::eigen_apply(&eig, |l| l.max(0.0) + ridge)
}

/// `Sigma_{k+1} = Q(pbar, pbar) + K Sigma_k K^T` with `K = K_0 + sum p_i K_i`.
pub fn propagate_covariance(
    model: &KoopmanModel,
    q: &CovarianceSurrogate,
    p: &[f64],
    sigma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_dim("covariance size", model.n_features(), q.n_features())?;
    check_dim("covariance rows", model.n_features(), sigma.nrows())?;
    check_dim("covariance columns", model.n_features(), sigma.ncols())?;
    let k = model.matrix_at(p)?;
    Ok(propagate_with(&k, &q.eval(p)?, sigma))
}

pub(crate) fn propagate_with(
    k: &DMatrix<f64>,
    q_p: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
) -> DMatrix<f64> {
    q_p + symmetrize(&(k * sigma * k.transpose()))
}
