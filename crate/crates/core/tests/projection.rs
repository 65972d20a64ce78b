use koopman_core::dictionary::Dictionary;
use koopman_core::reprojection::{
    brute_force_project, coordinate_project, newton_project, NewtonOptions, WeightMatrix,
};
use koopman_core::AxisBox;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd_weight(m: usize, entries: &[f64]) -> WeightMatrix {
    let b = DMatrix::from_column_slice(m, m, &entries[..m * m]);
    WeightMatrix::custom(&b * b.transpose() + DMatrix::identity(m, m) * 0.1).unwrap()
}

fn gradient(
    dict: &Dictionary,
    w: &WeightMatrix,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> DVector<f64> {
    let j = dict.jacobian(x).unwrap();
    j.transpose() * w.matrix() * (dict.lift(x).unwrap() - z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn newton_stays_on_manifold_and_descends(
        x in -1.5f64..1.5,
        noise in prop::collection::vec(-0.05f64..0.05, 4),
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        shift in -0.3f64..0.3,
    ) {
        let dict = Dictionary::full(1, 3).unwrap();
        let w = spd_weight(4, &entries);
        let z = dict.lift(&DVector::from_element(1, x)).unwrap() + DVector::from_vec(noise);
        let x0 = DVector::from_element(1, x + shift);
        let r = newton_project(&dict, &w, &z, &x0, &NewtonOptions::default()).unwrap();
        prop_assert_eq!(&r.z, &dict.lift(&r.x).unwrap());
        let start = w.objective(&dict.lift(&x0).unwrap(), &z);
        prop_assert!(r.objective <= start * (1.0 + 1e-12));
        if r.converged {
            let g = gradient(&dict, &w, &r.x, &z);
            let wn = w.matrix().norm();
            prop_assert!(g.norm() <= 10.0 * 1e-8 * wn, "gradient {:e}", g.norm());
        }
    }

    #[test]
    fn newton_is_no_worse_than_a_grid_in_two_dimensions(
        x in prop::collection::vec(-1.0f64..1.0, 2),
        noise in prop::collection::vec(-0.02f64..0.02, 10),
    ) {
        let dict = Dictionary::full(2, 3).unwrap();
        let w = WeightMatrix::identity(10);
        let x = DVector::from_vec(x);
        let z = dict.lift(&x).unwrap() + DVector::from_vec(noise);
        let r = newton_project(&dict, &w, &z, &x, &NewtonOptions::default()).unwrap();
        let local = AxisBox::new(
            x.iter().map(|v| v - 0.2).collect(),
            x.iter().map(|v| v + 0.2).collect(),
        ).unwrap();
        let g = brute_force_project(&dict, &w, &z, &local, 81).unwrap();
        prop_assert!(r.objective <= g.objective + 1e-12);
    }

    #[test]
    fn coordinate_projection_reads_the_coordinates(
        z in prop::collection::vec(-2.0f64..2.0, 10),
    ) {
        let dict = Dictionary::full(2, 3).unwrap();
        let z = DVector::from_vec(z);
        let r = coordinate_project(&dict, &z).unwrap();
        prop_assert_eq!(r.x.as_slice(), &z.as_slice()[..2]);
        prop_assert_eq!(&r.z, &dict.lift(&r.x).unwrap());
    }

    #[test]
    fn grid_points_lie_on_the_manifold(
        z in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let dict = Dictionary::full(1, 5).unwrap();
        let z = DVector::from_vec(z);
        let r = brute_force_project(
            &dict,
            &WeightMatrix::identity(6),
            &z,
            &AxisBox::cube(1, -2.0, 2.0),
            401,
        ).unwrap();
        prop_assert_eq!(&r.z, &dict.lift(&r.x).unwrap());
        prop_assert!(r.x[0] >= -2.0 && r.x[0] <= 2.0);
    }
}

#[test]
fn cold_start_takes_at_least_as_many_iterations_as_warm_start() {
    let dict = Dictionary::full(2, 5).unwrap();
    let w = WeightMatrix::identity(dict.len());
    let x = DVector::from_vec(vec![0.7, -0.4]);
    let mut z = dict.lift(&x).unwrap();
    z[3] += 0.01;
    let opts = NewtonOptions::default().within(&AxisBox::cube(2, -2.0, 2.0));
    let warm = newton_project(&dict, &w, &z, &x, &opts).unwrap();
    let cold = newton_project(&dict, &w, &z, &DVector::from_vec(vec![-1.9, 1.9]), &opts).unwrap();
    assert!(warm.converged);
    assert!(cold.iterations >= warm.iterations);
}
