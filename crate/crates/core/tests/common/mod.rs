#![allow(dead_code)]

use std::sync::Arc;

use koopman_core::dynamics::FnField;
use koopman_core::{AxisBox, ParametricSystem};
use nalgebra::{DVector, Matrix2, Vector2};

pub const DECAY: f64 = 0.5;
pub const ROTATION: f64 = 1.0;

/// Damped rotation `x' = A x` with no parameter inputs.
pub fn linear_system() -> ParametricSystem {
    let drift = FnField::new(2, |x, dx| {
        dx[0] = -DECAY * x[0] + ROTATION * x[1];
        dx[1] = -ROTATION * x[0] - DECAY * x[1];
    });
    ParametricSystem::new(
        "linear",
        Arc::new(drift),
        Vec::new(),
        AxisBox::cube(2, -2.0, 2.0),
        AxisBox::new(Vec::new(), Vec::new()).unwrap(),
    )
    .unwrap()
}

/// Closed-form `exp(A t) x` for [`linear_system`].
pub fn linear_flow(x: &[f64], t: f64) -> DVector<f64> {
    let (s, c) = (ROTATION * t).sin_cos();
    let e = (-DECAY * t).exp();
    let m = Matrix2::new(c, s, -s, c) * e;
    let y = m * Vector2::new(x[0], x[1]);
    DVector::from_column_slice(y.as_slice())
}
