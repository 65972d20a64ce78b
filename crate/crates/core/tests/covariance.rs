use koopman_core::covariance::{propagate_covariance, sigma_at};
use koopman_core::{CovarianceSurrogate, Dictionary, KoopmanModel};
use nalgebra::DMatrix;
use proptest::prelude::*;

const M: usize = 3;

/// Blocks `Q_ij = (L_i L_j^T + L_j L_i^T) / 2`, so `Q(pbar, pbar) = L(pbar) L(pbar)^T`.
fn gram_surrogate(factors: &[f64]) -> CovarianceSurrogate {
    let l: Vec<DMatrix<f64>> = factors
        .chunks(M * M)
        .map(|c| DMatrix::from_column_slice(M, M, c))
        .collect();
    let mut blocks = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            blocks.push((&l[i] * l[j].transpose() + &l[j] * l[i].transpose()) * 0.5);
        }
    }
    CovarianceSurrogate::from_blocks(1, blocks).unwrap()
}

fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}

proptest! {
    #[test]
    fn sigma_at_is_symmetric_with_floor(
        entries in prop::collection::vec(-1.0f64..1.0, 4 * M * M),
        p in -3.0f64..3.0,
        ridge in 0.0f64..0.5,
    ) {
        let blocks = entries
            .chunks(M * M)
            .map(|c| DMatrix::from_column_slice(M, M, c))
            .collect();
        let q = CovarianceSurrogate::from_blocks(1, blocks).unwrap();
        let s = sigma_at(&q, &[p], ridge).unwrap();
        prop_assert_eq!(&s, &s.transpose());
        prop_assert!(min_eigenvalue(&s) >= ridge - 1e-10 * (1.0 + s.norm()));
    }

    #[test]
    fn propagation_keeps_covariances_positive(
        factors in prop::collection::vec(-1.0f64..1.0, 2 * M * M),
        k in prop::collection::vec(-1.5f64..1.5, 2 * M * M),
        p in -2.0f64..2.0,
    ) {
        let q = gram_surrogate(&factors);
        let blocks = k.chunks(M * M).map(|c| DMatrix::from_column_slice(M, M, c)).collect();
        let model = KoopmanModel::from_blocks(Dictionary::full(2, 1).unwrap(), blocks, 0.1).unwrap();
        let mut sigma = DMatrix::zeros(M, M);
        for _ in 0..4 {
            sigma = propagate_covariance(&model, &q, &[p], &sigma).unwrap();
            prop_assert_eq!(&sigma, &sigma.transpose());
            prop_assert!(min_eigenvalue(&sigma) >= -1e-10 * (1.0 + sigma.norm()));
        }
    }
}
