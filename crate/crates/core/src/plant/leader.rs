use nalgebra::{DMatrix, DVector};

/// Autonomous leader `ẋ_0 = f_0(x_0)` with a closed-form trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderModel {
    Static { state: DVector<f64> },
    /// `x_0(t) = x_0(0) e^{-rate t}`.
    ExponentialDecay { initial: DVector<f64>, rate: f64 },
    /// `ẋ_0 = A x_0`.
    Linear { a: DMatrix<f64>, initial: DVector<f64> },
}

impl LeaderModel {
    pub fn dim(&self) -> usize {
        match self {
            LeaderModel::Static { state } => state.len(),
            LeaderModel::ExponentialDecay { initial, .. } => initial.len(),
            LeaderModel::Linear { initial, .. } => initial.len(),
        }
    }

    pub fn state(&self, t: f64) -> DVector<f64> {
        match self {
            LeaderModel::Static { state } => state.clone(),
            LeaderModel::ExponentialDecay { initial, rate } => initial * (-rate * t).exp(),
            LeaderModel::Linear { a, initial } => (a * t).exp() * initial,
        }
    }

    /// `f_0(x)`.
    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            LeaderModel::Static { state } => DVector::zeros(state.len()),
            LeaderModel::ExponentialDecay { rate, .. } => x * (-rate),
            LeaderModel::Linear { a, .. } => a * x,
        }
    }

    /// Samples the trajectory on `[0, horizon]` and checks `‖x_0(t)‖ ≤ bound`.
    pub fn bounded_on(&self, horizon: f64, bound: f64) -> bool {
        let samples = 1000;
        (0..=samples).all(|k| {
            let t = horizon * k as f64 / samples as f64;
            let norm = self.state(t).norm();
            norm.is_finite() && norm <= bound
        })
    }
}
