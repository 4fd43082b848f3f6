//! Concrete control-affine agent models.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};

/// Control-affine dynamics `ẋ = f(x) + g(x) u`.
pub trait AgentModel: Debug + Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Drift `f(x)`.
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Control effectiveness `g(x)`, `n × m`.
    fn effectiveness(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Input gain of a scalar agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarGain {
    Constant(f64),
    /// `g(x) = cos(2x) + 2`.
    CosineBias,
}

impl ScalarGain {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarGain::Constant(c) => c,
            ScalarGain::CosineBias => (2.0 * x).cos() + 2.0,
        }
    }
}

/// Scalar agent with polynomial drift `f(x) = Σ_p coeffs[p-1] x^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPolyAgent {
    pub coeffs: Vec<f64>,
    pub gain: ScalarGain,
}

impl ScalarPolyAgent {
    pub fn new(coeffs: Vec<f64>, gain: ScalarGain) -> Self {
        Self { coeffs, gain }
    }

    pub fn drift_scalar(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = x;
        for c in &self.coeffs {
            acc += c * pow;
            pow *= x;
        }
        acc
    }
}

impl AgentModel for ScalarPolyAgent {
    fn state_dim(&self) -> usize {
        1
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, self.drift_scalar(x[0]))
    }
    fn effectiveness(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.gain.eval(x[0]))
    }
}

/// Unicycle kinematics, state `(x, y, heading)`, input `(speed, turn rate)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KinematicWheel;

impl AgentModel for KinematicWheel {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn drift(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(3)
    }
    fn effectiveness(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (s, c) = x[2].sin_cos();
        DMatrix::from_row_slice(3, 2, &[c, 0.0, s, 0.0, 0.0, 1.0])
    }
}

/// Linear time-invariant agent `ẋ = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAgent {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl AgentModel for LinearAgent {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x
    }
    fn effectiveness(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.b.clone()
    }
}
