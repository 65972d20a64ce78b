//! Weighted closest-point reprojection onto the lifted state manifold `Psi(X)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::covariance::{sigma_at, CovarianceSurrogate};
use crate::dictionary::Dictionary;
use crate::dynamics::AxisBox;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{eigen_apply, pinv, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Coordinate,
    InverseCovariance,
    Custom,
}

/// Symmetric positive semidefinite weight defining `|q|_W^2 = q^T W q`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: DMatrix<f64>,
    kind: WeightKind,
}

impl WeightMatrix {
    /// Accepts any square matrix that is symmetric and PSD up to rounding.
    pub fn custom(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::InvalidArgument(
                "weight matrix must be square".into(),
            ));
        }
        let scale = w.amax().max(f64::MIN_POSITIVE);
        if (&w - w.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidArgument(
                "weight matrix is not symmetric".into(),
            ));
        }
        let w = symmetrize(&w);
        if w.nrows() > 0 && w.clone().symmetric_eigenvalues().min() < -1e-12 * scale {
            return Err(Error::InvalidArgument(
                "weight matrix has negative eigenvalues".into(),
            ));
        }
        Ok(Self {
            w,
            kind: WeightKind::Custom,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            w: DMatrix::identity(n, n),
            kind: WeightKind::Custom,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    /// `(q - z)^T W (q - z)`.
    pub fn objective(&self, q: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let r = q - z;
        r.dot(&(&self.w * &r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub x: DVector<f64>,
    /// `lift(x)`, recomputed.
    pub z: DVector<f64>,
    pub iterations: usize,
    pub step_norms: Vec<f64>,
    pub converged: bool,
    /// `|z - z_in|_W^2` at the returned point.
    pub objective: f64,
}

/// Diagonal 0/1 weight on the injectivity-witness entries.
pub fn coordinate_weight(dict: &Dictionary) -> Result<WeightMatrix> {
    let mut w = DMatrix::zeros(dict.len(), dict.len());
    for wit in dict.witnesses()? {
        w[(wit.index, wit.index)] = 1.0;
    }
    Ok(WeightMatrix {
        w,
        kind: WeightKind::Coordinate,
    })
}

/// Reads the state from the witness entries of `z`.
pub fn coordinate_project(dict: &Dictionary, z: &DVector<f64>) -> Result<ProjectionResult> {
    let x = dict.invert_on_manifold(z)?;
    let z_out = dict.lift(&x)?;
    let objective = coordinate_weight(dict)?.objective(&z_out, z);
    Ok(ProjectionResult {
        x,
        z: z_out,
        iterations: 0,
        step_norms: Vec::new(),
        converged: true,
        objective,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub k_max: usize,
    /// Iterates are clamped into this box when set.
    pub bounds: Option<AxisBox>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            k_max: 50,
            bounds: None,
        }
    }
}

impl NewtonOptions {
    pub fn new(tol: f64, k_max: usize) -> Self {
        Self {
            tol,
            k_max,
            bounds: None,
        }
    }

    /// Clamp iterates to `domain` with half-widths inflated by 10%.
    pub fn within(mut self, domain: &AxisBox) -> Self {
        self.bounds = Some(domain.scaled(1.1));
        self
    }
}

/// Relative singular-value cutoff in the Newton solve.
pub const NEWTON_RCOND: f64 = 1e-12;
const MAX_HALVINGS: usize = 20;
/// Relative objective increase tolerated as rounding noise when accepting a step.
const OBJECTIVE_SLACK: f64 = 1e-13;

/// `-(G^+ g)`, restricted to the free variables when some sit on a bound and the
/// full step would leave the box there.
fn newton_direction(
    gram: &DMatrix<f64>,
    grad: &DVector<f64>,
    x: &DVector<f64>,
    bounds: Option<&AxisBox>,
) -> DVector<f64> {
    let (gram_pinv, _) = pinv(gram, NEWTON_RCOND);
    let v = -(gram_pinv * grad);
    let Some(b) = bounds else { return v };
    let free: Vec<usize> = (0..x.len())
        .filter(|&i| !((x[i] <= b.lo[i] && v[i] < 0.0) || (x[i] >= b.hi[i] && v[i] > 0.0)))
        .collect();
    if free.len() == x.len() {
        return v;
    }
    let mut out = DVector::zeros(x.len());
    if free.is_empty() {
        return out;
    }
    let g_ff = DMatrix::from_fn(free.len(), free.len(), |i, j| gram[(free[i], free[j])]);
    let g_f = DVector::from_fn(free.len(), |i, _| grad[free[i]]);
    let (inv, _) = pinv(&g_ff, NEWTON_RCOND);
    let v_f = -(inv * g_f);
    for (k, &i) in free.iter().enumerate() {
        out[i] = v_f[k];
    }
    out
}

/// Newton iteration for `min_x |Psi(x) - z|_W^2` with step
/// `v = -(J^T W J)^+ J^T W (Psi(x) - z)` and update `x <- x + v`.
///
/// With bounds, variables pinned at the box are held fixed, trial points are
/// clamped and `v` is the step to the clamped Newton point. A step that
/// increases the objective is halved up to 20 times. `step_norms` records the
/// full (unhalved) step lengths.
pub fn newton_project(
    dict: &Dictionary,
    w: &WeightMatrix,
    z: &DVector<f64>,
    x0: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<ProjectionResult> {
    check_dim("lifted point", dict.len(), z.len())?;
    check_dim("weight size", dict.len(), w.w.nrows())?;
    check_dim("initial guess", dict.dim(), x0.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Newton tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let clamp = |x: &mut DVector<f64>| {
        if let Some(b) = &opts.bounds {
            b.clamp(x.as_mut_slice());
        }
    };
    let mut x = x0.clone();
    clamp(&mut x);
    let mut psi = dict.lift(&x)?;
    let mut obj = w.objective(&psi, z);
    let mut step_norms = Vec::new();
    let mut converged = false;

    for _ in 0..opts.k_max {
        let jac = dict.jacobian(&x)?;
        let wj = &w.w * &jac;
        let gram = symmetrize(&(jac.transpose() * &wj));
        let grad = wj.transpose() * (&psi - z);
        let dir = newton_direction(&gram, &grad, &x, opts.bounds.as_ref());
        let along = |alpha: f64| {
            let mut t = &x + &dir * alpha;
            clamp(&mut t);
            t
        };
        let norm = (along(1.0) - &x).norm();
        step_norms.push(norm);
        if !norm.is_finite() {
            break;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = along(alpha);
            let trial_psi = dict.lift(&trial)?;
            let trial_obj = w.objective(&trial_psi, z);
            if trial_obj <= obj + OBJECTIVE_SLACK * obj {
                accepted = Some((trial, trial_psi, trial_obj));
                break;
            }
            alpha *= 0.5;
        }
        let stalled = accepted.is_none();
        if let Some((nx, npsi, nobj)) = accepted {
            x = nx;
            psi = npsi;
            obj = nobj;
        }
        if norm <= opts.tol {
            converged = true;
            break;
        }
        if stalled {
            // No descent along v at any tested length: a stationary point up to rounding.
            break;
        }
    }
    Ok(ProjectionResult {
        iterations: step_norms.len(),
        z: psi,
        x,
        step_norms,
        converged,
        objective: obj,
    })
}

/// Grid-size guard for [`brute_force_project`].
pub const GRID_LIMIT: u128 = 100_000_000;

/// Exhaustive minimization of `|Psi(x_g) - z|_W^2` over a regular grid on `domain`.
///
/// Ties resolve to the lowest lexicographic grid index (first axis slowest).
pub fn brute_force_project(
    dict: &Dictionary,
    w: &WeightMatrix,
    z: &DVector<f64>,
    domain: &AxisBox,
    points_per_axis: usize,
) -> Result<ProjectionResult> {
    let d = dict.dim();
    check_dim("lifted point", dict.len(), z.len())?;
    check_dim("weight size", dict.len(), w.w.nrows())?;
    check_dim("grid domain", d, domain.dim())?;
    if points_per_axis < 2 {
        return Err(Error::InvalidArgument(
            "points_per_axis must be >= 2".into(),
        ));
    }
    let requested = (points_per_axis as u128).saturating_pow(d as u32);
    if requested > GRID_LIMIT {
        return Err(Error::GridTooLarge {
            requested,
            limit: GRID_LIMIT,
        });
    }
    let n = points_per_axis;
    let coord = |axis: usize, i: usize| -> f64 {
        let (lo, hi) = (domain.lo[axis], domain.hi[axis]);
        if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };

    // W = L L^T with L = V sqrt(Lambda); the objective is |L^T (Psi - z)|^2.
    let eig = w.w.clone().symmetric_eigen();
    let lt = {
        let sq = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let mut lt = eig.eigenvectors.transpose();
        for (r, s) in sq.iter().enumerate() {
            lt.row_mut(r).scale_mut(*s);
        }
        lt
    };
    let rank = lt.nrows();
    let y = &lt * z;

    // Psi(x) = A(prefix) c(x_last) with c the powers of the last coordinate.
    let last = d - 1;
    let deg = dict.max_degree() as usize;
    let last_powers: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let v = coord(last, i);
            let mut pw = vec![1.0; deg + 1];
            for k in 1..=deg {
                pw[k] = pw[k - 1] * v;
            }
            pw
        })
        .collect();
    let n_prefix = n.pow(last as u32);

    let best = (0..n_prefix)
        .into_par_iter()
        .map(|prefix| {
            let mut idx = vec![0usize; last];
            let mut rem = prefix;
            for axis in (0..last).rev() {
                idx[axis] = rem % n;
                rem /= n;
            }
            let xs: Vec<f64> = (0..last).map(|a| coord(a, idx[a])).collect();
            // B = L^T A, rank x (deg + 1)
            let mut b = DMatrix::zeros(rank, deg + 1);
            for (k, alpha) in dict.basis().iter().enumerate() {
                let mut v = 1.0;
                for (a, &e) in alpha[..last].iter().enumerate() {
                    v *= xs[a].powi(e as i32);
                }
                if v != 0.0 {
                    let col = alpha[last] as usize;
                    let mut bc = b.column_mut(col);
                    bc.axpy(v, &lt.column(k), 1.0);
                }
            }
            let mut best = (f64::INFINITY, usize::MAX);
            for (i, pw) in last_powers.iter().enumerate() {
                let mut acc = 0.0;
                for r in 0..rank {
                    let mut s = -y[r];
                    for (c, p) in pw.iter().enumerate() {
                        s += b[(r, c)] * p;
                    }
                    acc += s * s;
                }
                if acc < best.0 {
                    best = (acc, prefix * n + i);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );

    let flat = if best.1 == usize::MAX { 0 } else { best.1 };
    let mut x = DVector::zeros(d);
    let mut rem = flat;
    for axis in (0..d).rev() {
        x[axis] = coord(axis, rem % n);
        rem /= n;
    }
    let z_out = dict.lift(&x)?;
    let objective = w.objective(&z_out, z);
    Ok(ProjectionResult {
        x,
        z: z_out,
        iterations: 0,
        step_norms: Vec::new(),
        converged: true,
        objective,
    })
}

/// `W = Sigma(p)^-1` with `Sigma(p)` from [`sigma_at`], inverted through its eigendecomposition.
pub fn ml_weight(q: &CovarianceSurrogate, p: &[f64], ridge: f64) -> Result<WeightMatrix> {
    let sigma = sigma_at(q, p, ridge)?;
    Ok(inverse_weight(&sigma))
}

/// ML weight for `Sigma(p)` computed in scaled features; see [`ml_weight_from_covariance`].
pub fn ml_weight_scaled(
    q: &CovarianceSurrogate,
    p: &[f64],
    scale: &DVector<f64>,
    ridge_rel: f64,
) -> Result<WeightMatrix> {
    ml_weight_from_covariance(&q.eval(p)?, scale, ridge_rel)
}

/// `W = D^-1 W_s D^-1` with `W_s` the inverse of `Sigma_s = D^-1 Sigma D^-1`
/// after clipping its eigenvalues at `ridge_rel * trace(Sigma_s) / M`.
pub fn ml_weight_from_covariance(
    sigma: &DMatrix<f64>,
    scale: &DVector<f64>,
    ridge_rel: f64,
) -> Result<WeightMatrix> {
    check_dim("feature scale", sigma.nrows(), scale.len())?;
    if !(ridge_rel >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "relative ridge must be >= 0, got {ridge_rel}"
        )));
    }
    let sigma_s = scaled_covariance(sigma, scale);
    let ridge = ridge_rel * sigma_s.trace().max(0.0) / sigma_s.nrows().max(1) as f64;
    let w_s = inverse_weight(&crate::covariance::regularize(&sigma_s, ridge));
    Ok(WeightMatrix {
        w: symmetrize(&scaled_covariance(&w_s.w, scale)),
        kind: WeightKind::InverseCovariance,
    })
}

/// `D^-1 Sigma D^-1`.
pub fn scaled_covariance(sigma: &DMatrix<f64>, scale: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |i, j| {
        sigma[(i, j)] / (scale[i] * scale[j])
    })
}

/// Inverse of a positive definite covariance as a weight; the zero matrix maps to zero.
pub(crate) fn inverse_weight(sigma: &DMatrix<f64>) -> WeightMatrix {
    let eig = symmetrize(sigma).symmetric_eigen();
    let w = eigen_apply(&eig, |l| if l > 0.0 { 1.0 / l } else { 0.0 });
    WeightMatrix {
        w,
        kind: WeightKind::InverseCovariance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn coordinate_weight_full_2d() {
        let d = Dictionary::full(2, 2).unwrap();
        let w = coordinate_weight(&d).unwrap();
        assert_eq!(
            w.matrix().diagonal().as_slice(),
            &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(w.kind(), WeightKind::Coordinate);
    }

    #[test]
    fn coordinate_weight_lorenz_without_x1() {
        let d = Dictionary::new(3, 3, vec![vec![1, 0, 0]]).unwrap();
        let w = coordinate_weight(&d).unwrap();
        let ones: Vec<usize> = (0..d.len())
            .filter(|&i| w.matrix()[(i, i)] == 1.0)
            .collect();
        let mut expected = vec![
            d.position(&[0, 1, 0]).unwrap(),
            d.position(&[0, 0, 1]).unwrap(),
            d.position(&[3, 0, 0]).unwrap(),
        ];
        expected.sort();
        assert_eq!(ones, expected);
        assert_eq!(w.matrix().iter().filter(|&&x| x != 0.0).count(), 3);
    }

    #[test]
    fn coordinate_readout_ignores_other_entries() {
        let d = Dictionary::full(1, 3).unwrap();
        let r = coordinate_project(&d, &v(&[0.5, 9.0, 9.0, 9.0])).unwrap();
        assert_eq!(r.x, v(&[0.5]));
        assert_eq!(r.z, v(&[0.5, 1.0, 0.25, 0.125]));
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn newton_fixed_point() {
        let d = Dictionary::full(2, 3).unwrap();
        let xs = v(&[0.3, -1.2]);
        let z = d.lift(&xs).unwrap();
        let r = newton_project(
            &d,
            &WeightMatrix::identity(d.len()),
            &z,
            &xs,
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
        assert!((r.x - xs).norm() <= 1e-12);
    }

    #[test]
    fn newton_with_coordinate_weight_matches_readout() {
        let d = Dictionary::full(2, 3).unwrap();
        let w = coordinate_weight(&d).unwrap();
        let z =
            d.lift(&v(&[0.4, 0.7])).unwrap() + DVector::from_fn(d.len(), |i, _| 0.01 * i as f64);
        let c = coordinate_project(&d, &z).unwrap();
        let n = newton_project(&d, &w, &z, &c.x, &NewtonOptions::default()).unwrap();
        assert!((n.x - c.x).norm() <= 1e-10);
    }

    #[test]
    fn newton_matches_grid_on_cubic() {
        let d = Dictionary::full(1, 3).unwrap();
        let w = WeightMatrix::identity(4);
        let z = d.lift(&v(&[0.8])).unwrap() + v(&[0.0, 0.05, -0.03, 0.02]);
        let n = newton_project(&d, &w, &z, &v(&[0.8]), &NewtonOptions::default()).unwrap();
        let g = brute_force_project(&d, &w, &z, &AxisBox::cube(1, -2.0, 2.0), 40_001).unwrap();
        assert!(n.converged);
        assert!((n.x[0] - g.x[0]).abs() <= 1e-4, "{} vs {}", n.x[0], g.x[0]);
        assert!(n.objective <= g.objective + 1e-12);
    }

    #[test]
    fn newton_descends_from_poor_start() {
        let d = Dictionary::full(1, 5).unwrap();
        let w = WeightMatrix::identity(d.len());
        let z = d.lift(&v(&[1.1])).unwrap() + DVector::from_element(d.len(), 0.05);
        let x0 = v(&[-1.7]);
        let start = w.objective(&d.lift(&x0).unwrap(), &z);
        let opts = NewtonOptions::default().within(&AxisBox::cube(1, -2.0, 2.0));
        let r = newton_project(&d, &w, &z, &x0, &opts).unwrap();
        assert!(r.objective <= start + 1e-12);
        assert!(r.x[0].abs() <= 2.2);
        assert_eq!(r.z, d.lift(&r.x).unwrap());
    }

    #[test]
    fn newton_reports_non_convergence() {
        let d = Dictionary::full(1, 3).unwrap();
        let w = WeightMatrix::identity(4);
        let z = d.lift(&v(&[1.5])).unwrap();
        let r = newton_project(&d, &w, &z, &v(&[-1.0]), &NewtonOptions::new(1e-8, 1)).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
        assert!(newton_project(&d, &w, &z, &v(&[0.0]), &NewtonOptions::new(0.0, 5)).is_err());
    }

    #[test]
    fn grid_returns_grid_point_exactly() {
        let d = Dictionary::full(2, 3).unwrap();
        let domain = AxisBox::cube(2, -2.0, 2.0);
        let x = v(&[-1.0, 0.5]);
        let r = brute_force_project(
            &d,
            &WeightMatrix::identity(d.len()),
            &d.lift(&x).unwrap(),
            &domain,
            17,
        )
        .unwrap();
        assert_eq!(r.x, x);
    }

    #[test]
    fn grid_zero_weight_returns_first_point() {
        let d = Dictionary::full(2, 2).unwrap();
        let w = WeightMatrix::custom(DMatrix::zeros(6, 6)).unwrap();
        let domain = AxisBox::new(vec![-1.0, 3.0], vec![1.0, 4.0]).unwrap();
        let r = brute_force_project(&d, &w, &DVector::from_element(6, 0.3), &domain, 5).unwrap();
        assert_eq!(r.x, v(&[-1.0, 3.0]));
    }

    #[test]
    fn grid_refinement_never_worse() {
        let d = Dictionary::full(2, 3).unwrap();
        let w = WeightMatrix::identity(d.len());
        let z = d.lift(&v(&[0.37, -0.81])).unwrap() + DVector::from_element(d.len(), 0.02);
        let domain = AxisBox::cube(2, -2.0, 2.0);
        let mut prev = f64::INFINITY;
        // n -> 2n - 1 keeps the coarse grid nested in the fine one.
        for n in [5, 9, 17, 33, 65] {
            let r = brute_force_project(&d, &w, &z, &domain, n).unwrap();
            assert!(r.objective <= prev + 1e-15);
            prev = r.objective;
        }
    }

    #[test]
    fn grid_guard() {
        let d = Dictionary::full(3, 2).unwrap();
        let z = DVector::zeros(d.len());
        let r = brute_force_project(
            &d,
            &WeightMatrix::identity(d.len()),
            &z,
            &AxisBox::cube(3, 0.0, 1.0),
            1000,
        );
        assert!(matches!(r, Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn ml_weight_inverts_diagonal() {
        let mut blocks = vec![DMatrix::zeros(3, 3); 1];
        blocks[0] = DMatrix::from_diagonal(&v(&[4.0, 1.0, 2.0]));
        let q = CovarianceSurrogate::from_blocks(0, blocks).unwrap();
        let w = ml_weight(&q, &[], 0.0).unwrap();
        let expected = DMatrix::from_diagonal(&v(&[0.25, 1.0, 0.5]));
        assert!((w.matrix() - &expected).amax() <= 1e-15);
        let sigma = sigma_at(&q, &[], 1e-3).unwrap();
        let w = ml_weight(&q, &[], 1e-3).unwrap();
        assert!((w.matrix() * sigma - DMatrix::identity(3, 3)).amax() <= 1e-10);
        assert_eq!(w.kind(), WeightKind::InverseCovariance);
    }

    #[test]
    fn scaled_weight_matches_unscaled_when_scale_is_one() {
        let q = CovarianceSurrogate::from_blocks(
            0,
            vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])],
        )
        .unwrap();
        let a = ml_weight_scaled(&q, &[], &DVector::from_element(2, 1.0), 1e-10).unwrap();
        let ridge = crate::covariance::default_ridge(&q.eval(&[]).unwrap());
        let b = ml_weight(&q, &[], ridge).unwrap();
        assert!((a.matrix() - b.matrix()).amax() <= 1e-12);
    }

    #[test]
    fn custom_weight_validation() {
        assert!(
            WeightMatrix::custom(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).is_err()
        );
        assert!(WeightMatrix::custom(DMatrix::from_diagonal(&v(&[1.0, -1.0]))).is_err());
        assert!(WeightMatrix::custom(DMatrix::zeros(2, 3)).is_err());
    }
}
