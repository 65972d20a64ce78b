//! Parameter-affine vector fields `x' = f(x) + sum_i p_i g_i(x)`, a Dormand-Prince
//! integrator used for ground truth and data generation, and uniform samplers.
//!
//! Sampling is reproducible: point `j` of `sample_states(domain, n, seed)` is
//! drawn from a ChaCha8 generator keyed by `seed` on stream `j`, so the points
//! do not depend on generation order or thread count.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A time-invariant vector field on `R^dim`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes the derivative at `x` into `dx`. Both slices have length `dim()`.
    fn eval_into(&self, x: &[f64], dx: &mut [f64]);

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut dx = DVector::zeros(self.dim());
        self.eval_into(x.as_slice(), dx.as_mut_slice());
        dx
    }
}

type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Vector field backed by a closure.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    f: Arc<FieldFn>,
}

impl FnField {
    pub fn new(dim: usize, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self {
            dim,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("dim", &self.dim).finish()
    }
}

impl VectorField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], dx: &mut [f64]) {
        (self.f)(x, dx)
    }
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim("box bounds", lo.len(), hi.len())?;
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i])) {
            return Err(Error::InvalidArgument(format!(
                "box axis {i} has lo {} > hi {}",
                lo[i], hi[i]
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Same interval `[lo, hi]` on every one of `dim` axes.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)),
        )
    }

    /// Box with the same center and every half-width multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let c = 0.5 * (l + h);
                let r = 0.5 * (h - l) * factor;
                (c - r, c + r)
            })
            .unzip();
        Self { lo, hi }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }
}

/// `x' = f(x) + sum_i p_i g_i(x)` together with its state and parameter domains.
#[derive(Clone)]
pub struct ParametricSystem {
    pub name: String,
    pub drift: Arc<dyn VectorField>,
    pub inputs: Vec<Arc<dyn VectorField>>,
    pub state_domain: AxisBox,
    pub param_domain: AxisBox,
}

impl fmt::Debug for ParametricSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricSystem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("params", &self.n_params())
            .field("state_domain", &self.state_domain)
            .field("param_domain", &self.param_domain)
            .finish()
    }
}

impl ParametricSystem {
    pub fn new(
        name: impl Into<String>,
        drift: Arc<dyn VectorField>,
        inputs: Vec<Arc<dyn VectorField>>,
        state_domain: AxisBox,
        param_domain: AxisBox,
    ) -> Result<Self> {
        let d = drift.dim();
        for g in &inputs {
            check_dim("input vector field", d, g.dim())?;
        }
        check_dim("state domain", d, state_domain.dim())?;
        check_dim("parameter domain", inputs.len(), param_domain.dim())?;
        Ok(Self {
            name: name.into(),
            drift,
            inputs,
            state_domain,
            param_domain,
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn n_params(&self) -> usize {
        self.inputs.len()
    }

    /// The field `x -> f(x) + sum_i p_i g_i(x)` for a fixed parameter.
    pub fn combined_field(&self, p: &[f64]) -> Result<CombinedField> {
        check_dim("parameter vector", self.n_params(), p.len())?;
        Ok(CombinedField {
            drift: self.drift.clone(),
            inputs: self.inputs.clone(),
            p: p.to_vec(),
        })
    }
}

/// A [`ParametricSystem`] frozen at one parameter value.
#[derive(Clone)]
pub struct CombinedField {
    drift: Arc<dyn VectorField>,
    inputs: Vec<Arc<dyn VectorField>>,
    p: Vec<f64>,
}

impl VectorField for CombinedField {
    fn dim(&self) -> usize {
        self.drift.dim()
    }

    fn eval_into(&self, x: &[f64], dx: &mut [f64]) {
        self.drift.eval_into(x, dx);
        if self.inputs.is_empty() {
            return;
        }
        let mut buf = vec![0.0; dx.len()];
        for (g, &pi) in self.inputs.iter().zip(&self.p) {
            g.eval_into(x, &mut buf);
            for (d, b) in dx.iter_mut().zip(&buf) {
                *d += pi * b;
            }
        }
    }
}

/// The benchmark systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinSystem {
    /// `x' = p x - x^3` on `[-2, 2]`, `p in [-2, 2]`.
    Pitchfork,
    /// Undamped Duffing oscillator with stiffness `alpha` as parameter.
    Duffing,
    /// Lorenz system with `rho` as parameter.
    Lorenz,
}

impl FromStr for BuiltinSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pitchfork" => Ok(Self::Pitchfork),
            "duffing" => Ok(Self::Duffing),
            "lorenz" => Ok(Self::Lorenz),
            _ => Err(Error::UnknownSystem(s.to_string())),
        }
    }
}

impl fmt::Display for BuiltinSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pitchfork => "pitchfork",
            Self::Duffing => "duffing",
            Self::Lorenz => "lorenz",
        })
    }
}

pub const LORENZ_SIGMA: f64 = 10.0;
pub const LORENZ_BETA: f64 = 8.0 / 3.0;
pub const DUFFING_BETA: f64 = 1.0;

impl BuiltinSystem {
    pub fn system(self) -> ParametricSystem {
        let (drift, input, state_domain, param_domain): (FnField, FnField, AxisBox, AxisBox) =
            match self {
                Self::Pitchfork => (
                    FnField::new(1, |x, dx| dx[0] = -x[0] * x[0] * x[0]),
                    FnField::new(1, |x, dx| dx[0] = x[0]),
                    AxisBox::cube(1, -2.0, 2.0),
                    AxisBox::cube(1, -2.0, 2.0),
                ),
                // delta = 0, beta = 1; alpha enters as -alpha x1 in the second component.
                Self::Duffing => (
                    FnField::new(2, |x, dx| {
                        dx[0] = x[1];
                        dx[1] = -DUFFING_BETA * x[0] * x[0] * x[0];
                    }),
                    FnField::new(2, |x, dx| {
                        dx[0] = 0.0;
                        dx[1] = -x[0];
                    }),
                    AxisBox::cube(2, -2.0, 2.0),
                    AxisBox::cube(1, -2.0, 2.0),
                ),
                // x1 (rho - x3) - x2 = (-x1 x3 - x2) + rho x1
                Self::Lorenz => (
                    FnField::new(3, |x, dx| {
                        dx[0] = LORENZ_SIGMA * (x[1] - x[0]);
                        dx[1] = -x[0] * x[2] - x[1];
                        dx[2] = x[0] * x[1] - LORENZ_BETA * x[2];
                    }),
                    FnField::new(3, |x, dx| {
                        dx[0] = 0.0;
                        dx[1] = x[0];
                        dx[2] = 0.0;
                    }),
                    AxisBox::new(vec![-20.0, -20.0, 10.0], vec![20.0, 20.0, 50.0])
                        .expect("static box"),
                    AxisBox::new(vec![10.0], vec![30.0]).expect("static box"),
                ),
            };
        ParametricSystem::new(
            self.to_string(),
            Arc::new(drift),
            vec![Arc::new(input)],
            state_domain,
            param_domain,
        )
        .expect("builtin systems are consistent")
    }
}

/// Looks up a benchmark system by name.
pub fn builtin_system(name: &str) -> Result<ParametricSystem> {
    Ok(name.parse::<BuiltinSystem>()?.system())
}

/// `n` points drawn i.i.d. uniformly from `domain`, deterministic in `seed`.
pub fn sample_states(domain: &AxisBox, n: usize, seed: u64) -> Vec<DVector<f64>> {
    (0..n)
        .map(|j| sample_point(domain, seed, j as u64))
        .collect()
}

/// Point `index` of the stream keyed by `seed`.
pub fn sample_point(domain: &AxisBox, seed: u64, index: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    DVector::from_iterator(
        domain.dim(),
        domain.lo.iter().zip(&domain.hi).map(|(l, h)| {
            let u: f64 = rng.random();
            l + (h - l) * u
        }),
    )
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive embedded Runge-Kutta 4(5) integrator (Dormand-Prince).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Integrator {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl Stages {
    fn new(d: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; d]),
            tmp: vec![0.0; d],
        }
    }

    /// One Dormand-Prince step of size `h` from `y` (with `k[0] = f(y)` already set).
    /// Writes the fifth-order solution into `y_new`; `k[6]` ends up as `f(y_new)`.
    fn step(&mut self, field: &dyn VectorField, y: &[f64], h: f64, y_new: &mut [f64]) {
        let d = y.len();
        for s in 1..7 {
            for i in 0..d {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            field.eval_into(&self.tmp, &mut self.k[s]);
        }
        // Stage 7 is evaluated at the fifth-order solution (FSAL).
        y_new.copy_from_slice(&self.tmp);
    }

    fn error_norm(&self, y: &[f64], y_new: &[f64], h: f64, rel: f64, abs: f64) -> f64 {
        let d = y.len();
        let mut acc = 0.0;
        for i in 0..d {
            let mut e = 0.0;
            for (s, es) in E.iter().enumerate() {
                e += es * self.k[s][i];
            }
            let sc = abs + rel * y[i].abs().max(y_new[i].abs());
            acc += (h * e / sc).powi(2);
        }
        (acc / d.max(1) as f64).sqrt()
    }
}

impl Integrator {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0 && abs_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "integrator tolerances must be positive (rel {rel_tol}, abs {abs_tol})"
            )));
        }
        Ok(Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        })
    }

    /// Flow map `Fl^t(x0)` with adaptive step-size control. `t = 0` returns `x0` unchanged.
    pub fn integrate(
        &self,
        field: &dyn VectorField,
        x0: &DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        check_dim("initial state", field.dim(), x0.len())?;
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "integration time must be nonnegative, got {t}"
            )));
        }
        if t == 0.0 {
            return Ok(x0.clone());
        }
        let d = x0.len();
        let mut y = x0.as_slice().to_vec();
        let mut y_new = vec![0.0; d];
        let mut st = Stages::new(d);
        field.eval_into(&y, &mut st.k[0]);

        let mut h = self.initial_step(field, &y, &st.k[0], t);
        let mut time = 0.0;
        let mut steps = 0;
        while time < t {
            if steps >= self.max_steps {
                return Err(Error::IntegrationFailed { t_reached: time });
            }
            steps += 1;
            let last = time + h >= t;
            if last {
                h = t - time;
            }
            st.step(field, &y, h, &mut y_new);
            let err = st.error_norm(&y, &y_new, h, self.rel_tol, self.abs_tol);
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                h *= 0.2;
            } else if err <= 1.0 {
                time = if last { t } else { time + h };
                y.copy_from_slice(&y_new);
                let (first, rest) = st.k.split_at_mut(6);
                first[0].copy_from_slice(&rest[0]);
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h *= fac;
                continue;
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            if h <= 1e-14 * time.abs().max(t) {
                return Err(Error::IntegrationFailed { t_reached: time });
            }
        }
        Ok(DVector::from_vec(y))
    }

    fn initial_step(&self, field: &dyn VectorField, y: &[f64], f0: &[f64], t: f64) -> f64 {
        // Hairer-Wanner starting step heuristic.
        let d = y.len();
        let sc: Vec<f64> = y
            .iter()
            .map(|v| self.abs_tol + self.rel_tol * v.abs())
            .collect();
        let rms = |v: &[f64]| {
            (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / d as f64).sqrt()
        };
        let d0 = rms(y);
        let d1 = rms(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
        let mut f1 = vec![0.0; d];
        field.eval_into(&y1, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(t)
    }

    /// Fixed-step Dormand-Prince integration with `n_steps` equal steps.
    pub fn integrate_fixed(
        field: &dyn VectorField,
        x0: &DVector<f64>,
        t: f64,
        n_steps: usize,
    ) -> Result<DVector<f64>> {
        check_dim("initial state", field.dim(), x0.len())?;
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be positive".into()));
        }
        let d = x0.len();
        let h = t / n_steps as f64;
        let mut y = x0.as_slice().to_vec();
        let mut y_new = vec![0.0; d];
        let mut st = Stages::new(d);
        for _ in 0..n_steps {
            field.eval_into(&y, &mut st.k[0]);
            st.step(field, &y, h, &mut y_new);
            y.copy_from_slice(&y_new);
        }
        Ok(DVector::from_vec(y))
    }
}

/// `Fl^t(x0)` with the default tolerances (rel 1e-8, abs 1e-10).
pub fn integrate(
    field: &dyn VectorField,
    x0: &DVector<f64>,
    t: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<DVector<f64>> {
    Integrator::new(rel_tol, abs_tol)?.integrate(field, x0, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> FnField {
        FnField::new(1, |x, dx| dx[0] = -x[0])
    }

    /// Classical fixed-step RK4, independent of the Dormand-Prince code path.
    fn rk4(field: &dyn VectorField, x0: &DVector<f64>, t: f64, n: usize) -> DVector<f64> {
        let h = t / n as f64;
        let mut x = x0.clone();
        for _ in 0..n {
            let k1 = field.eval(&x);
            let k2 = field.eval(&(&x + &k1 * (h / 2.0)));
            let k3 = field.eval(&(&x + &k2 * (h / 2.0)));
            let k4 = field.eval(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        x
    }

    #[test]
    fn combined_field_examples() {
        let pf = BuiltinSystem::Pitchfork.system();
        let x = DVector::from_vec(vec![2.0]);
        assert_eq!(pf.combined_field(&[0.0]).unwrap().eval(&x)[0], -8.0);
        let x = DVector::from_vec(vec![1.0]);
        assert_eq!(pf.combined_field(&[1.0]).unwrap().eval(&x)[0], 0.0);

        let lz = BuiltinSystem::Lorenz.system();
        let v = lz
            .combined_field(&[28.0])
            .unwrap()
            .eval(&DVector::from_vec(vec![1.0, 1.0, 1.0]));
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 26.0);
        assert!((v[2] - (1.0 - 8.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn combined_field_rejects_wrong_param_len() {
        let pf = BuiltinSystem::Pitchfork.system();
        assert!(matches!(
            pf.combined_field(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duffing_alpha_decomposition() {
        let sys = BuiltinSystem::Duffing.system();
        for alpha in [-2.0, -0.5, 1.3] {
            let v = sys
                .combined_field(&[alpha])
                .unwrap()
                .eval(&DVector::from_vec(vec![1.0, 0.0]));
            assert_eq!(v[0], 0.0);
            assert_eq!(v[1], -alpha - 1.0);
        }
    }

    #[test]
    fn lorenz_domain() {
        let sys = BuiltinSystem::Lorenz.system();
        assert_eq!(sys.state_domain.lo, vec![-20.0, -20.0, 10.0]);
        assert_eq!(sys.state_domain.hi, vec![20.0, 20.0, 50.0]);
        assert_eq!(sys.param_domain.lo, vec![10.0]);
    }

    #[test]
    fn unknown_system() {
        assert!(matches!(
            builtin_system("vanderpol"),
            Err(Error::UnknownSystem(_))
        ));
    }

    #[test]
    fn lorenz_fixed_points_are_stationary() {
        let sys = BuiltinSystem::Lorenz.system();
        for rho in [12.0, 28.0] {
            let f = sys.combined_field(&[rho]).unwrap();
            let c = (LORENZ_BETA * (rho - 1.0)).sqrt();
            for s in [1.0, -1.0] {
                let x = DVector::from_vec(vec![s * c, s * c, rho - 1.0]);
                assert!(f.eval(&x).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn exponential_decay() {
        let x = Integrator::default()
            .integrate(&decay(), &DVector::from_vec(vec![1.0]), 1.0)
            .unwrap();
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_time_is_identity() {
        let sys = BuiltinSystem::Lorenz.system();
        let f = sys.combined_field(&[28.0]).unwrap();
        let x0 = DVector::from_vec(vec![1.5, -2.25, 30.125]);
        assert_eq!(Integrator::default().integrate(&f, &x0, 0.0).unwrap(), x0);
    }

    #[test]
    fn pitchfork_long_time_limit_matches_rk4_oracle() {
        let f = BuiltinSystem::Pitchfork
            .system()
            .combined_field(&[1.0])
            .unwrap();
        let x0 = DVector::from_vec(vec![0.5]);
        let x = Integrator::default().integrate(&f, &x0, 10.0).unwrap();
        let oracle = rk4(&f, &x0, 10.0, 20_000);
        assert!((x[0] - 1.0).abs() < 1e-6);
        assert!((x[0] - oracle[0]).abs() < 1e-8);
    }

    #[test]
    fn pitchfork_converges_to_signed_root() {
        let sys = BuiltinSystem::Pitchfork.system();
        for p in [0.5, 1.0, 2.0] {
            let f = sys.combined_field(&[p]).unwrap();
            for x0 in [-2.0, -0.3, 0.3, 2.0] {
                let x = Integrator::default()
                    .integrate(&f, &DVector::from_vec(vec![x0]), 20.0)
                    .unwrap();
                let target = f64::signum(x0) * p.sqrt();
                assert!((x[0] - target).abs() < 1e-6, "p={p} x0={x0} -> {}", x[0]);
            }
        }
    }

    #[test]
    fn fixed_step_order() {
        let f = decay();
        let x0 = DVector::from_vec(vec![1.0]);
        let exact = (-2.0f64).exp();
        let e1 = (Integrator::integrate_fixed(&f, &x0, 2.0, 10).unwrap()[0] - exact).abs();
        let e2 = (Integrator::integrate_fixed(&f, &x0, 2.0, 20).unwrap()[0] - exact).abs();
        assert!(e1 / e2 >= 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn blow_up_reports_time_reached() {
        // x' = x^2 from 1 blows up at t = 1.
        let f = FnField::new(1, |x, dx| dx[0] = x[0] * x[0]);
        match Integrator::default().integrate(&f, &DVector::from_vec(vec![1.0]), 2.0) {
            Err(Error::IntegrationFailed { t_reached }) => {
                assert!(t_reached > 0.9 && t_reached <= 1.0 + 1e-6, "{t_reached}")
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn sampling_is_reproducible_and_in_range() {
        let b = AxisBox::cube(1, 0.0, 1.0);
        let a = sample_states(&b, 3, 7);
        assert_eq!(a, sample_states(&b, 3, 7));
        assert!(a.iter().all(|x| (0.0..=1.0).contains(&x[0])));
        assert_ne!(a, sample_states(&b, 3, 8));
    }

    #[test]
    fn sampling_mean() {
        let b = AxisBox::cube(1, -2.0, 2.0);
        let pts = sample_states(&b, 10_000, 1);
        let mean = pts.iter().map(|x| x[0]).sum::<f64>() / pts.len() as f64;
        assert!(mean.abs() < 0.1);
    }

    #[test]
    fn degenerate_box() {
        let b = AxisBox::new(vec![0.5], vec![0.5]).unwrap();
        assert_eq!(sample_states(&b, 1, 3)[0][0], 0.5);
    }

    #[test]
    fn inverted_box_rejected() {
        assert!(AxisBox::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn prefix_stable_sampling() {
        let b = AxisBox::cube(2, -1.0, 1.0);
        let short = sample_states(&b, 5, 11);
        let long = sample_states(&b, 50, 11);
        assert_eq!(&long[..5], &short[..]);
    }
}
