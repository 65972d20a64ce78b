//! Small dense linear-algebra helpers shared by the fitting and projection code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `(a + a^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Moore-Penrose pseudoinverse with singular values below `rcond * sigma_max` treated as zero.
/// Returns the inverse together with the number of retained singular values.
pub fn pinv(a: &DMatrix<f64>, rcond: f64) -> (DMatrix<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rcond * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            // out += v_k u_k^T / s
            let vk = vt.row(k).transpose();
            let uk = u.column(k);
            out.ger(1.0 / s, &vk, &uk, 1.0);
        }
    }
    (out, rank)
}

/// Symmetric eigendecomposition with eigenvalues clipped from below at `floor`.
pub fn clip_eigen(a: &DMatrix<f64>, floor: f64) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let mut eig = SymmetricEigen::new(symmetrize(a));
    for l in eig.eigenvalues.iter_mut() {
        if *l < floor {
            *l = floor;
        }
    }
    eig
}

/// Reassembles `V diag(f(lambda)) V^T`, symmetrized.
pub fn eigen_apply(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        let s = f(*l);
        scaled.column_mut(j).scale_mut(s);
    }
    symmetrize(&(scaled * v.transpose()))
}

/// Kronecker product of two vectors, `a ⊗ b` with `b` varying fastest.
pub fn kron_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
