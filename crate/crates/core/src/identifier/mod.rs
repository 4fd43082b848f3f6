//! Concurrent-learning identification of the agents' drift dynamics.

mod savgol;
mod stack;

use std::collections::VecDeque;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use savgol::{SG_DEGREE, SG_MIN_WINDOW, SavitzkyGolay, sg_derivative, sg_derivative_timed};
pub use stack::{HistoryStack, StackEntry};

use crate::plant::{AgentModel, DriftSource};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentifierError {
    #[error("window of {len} samples is too short (need at least {min})")]
    WindowTooShort { len: usize, min: usize },
    #[error("window length {0} must be odd")]
    EvenWindow(usize),
    #[error("samples are not uniformly spaced")]
    NonUniform,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Regressor `σ_θ: Rⁿ → R^{P+1}` of a drift approximation `f(x) ≈ θᵀσ_θ(x)`.
pub trait DriftBasis: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// Monomials `σ_k(x) = Π_c x_c^{e_kc}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    pub exponents: Vec<Vec<u32>>,
}

impl MonomialBasis {
    /// Scalar powers, e.g. `[1, 2]` for `σ(x) = (x, x²)`.
    pub fn scalar_powers(powers: &[u32]) -> Self {
        Self { exponents: powers.iter().map(|&p| vec![p]).collect() }
    }
}

impl DriftBasis for MonomialBasis {
    fn dim(&self) -> usize {
        self.exponents.len()
    }
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.exponents.len(),
            self.exponents
                .iter()
                .map(|e| e.iter().zip(x.iter()).map(|(&p, &v)| v.powi(p as i32)).product::<f64>()),
        )
    }
}

/// Identifier weights `θ̂ ∈ R^{(P+1)×n}` with the diagonal gain `Γ_θ` and CL gain `k_θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    pub weights: DMatrix<f64>,
    pub gain: DVector<f64>,
    pub cl_gain: f64,
}

impl DriftEstimate {
    pub fn predict(&self, basis: &dyn DriftBasis, x: &DVector<f64>) -> DVector<f64> {
        self.weights.tr_mul(&basis.eval(x))
    }
}

/// Drift values `θ̂_jᵀ σ_θj(x)` from identifier weights.
#[derive(Debug, Clone, Copy)]
pub struct EstimatedDrift<'a> {
    pub weights: &'a [DMatrix<f64>],
    pub bases: &'a [Arc<dyn DriftBasis>],
}

impl DriftSource for EstimatedDrift<'_> {
    fn drift(&self, agent: usize, x: &DVector<f64>) -> DVector<f64> {
        self.weights[agent].tr_mul(&self.bases[agent].eval(x))
    }
}

/// Observer state `x̂` with gain `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateObserver {
    pub estimate: DVector<f64>,
    pub gain: f64,
}

/// `dx̂/dt = θ̂ᵀσ_θ(x) + g(x) u + k (x - x̂)`.
pub fn observer_flow(
    obs: &StateObserver,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta_hat: &DMatrix<f64>,
    basis: &dyn DriftBasis,
    model: &dyn AgentModel,
) -> DVector<f64> {
    theta_hat.tr_mul(&basis.eval(x)) + model.effectiveness(x) * u + obs.gain * (x - &obs.estimate)
}

/// `dθ̂/dt = k_θ Γ_θ Σ_k σ^k (ẋ̄^k - g^k u^k - θ̂ᵀσ^k)ᵀ + Γ_θ σ_θ(x) x̃ᵀ`.
///
/// `stack = None` drops the recorded-data term (used while the rank gate is closed).
pub fn cl_update_flow(
    est: &DriftEstimate,
    stack: Option<&HistoryStack>,
    x: &DVector<f64>,
    x_tilde: &DVector<f64>,
    basis: &dyn DriftBasis,
) -> DMatrix<f64> {
    let mut flow = basis.eval(x) * x_tilde.transpose();
    if let Some(stack) = stack.filter(|s| !s.is_empty()) {
        let residual = stack.cross() - stack.gram() * &est.weights;
        flow += est.cl_gain * residual;
    }
    for (r, g) in est.gain.iter().enumerate() {
        flow.row_mut(r).scale_mut(*g);
    }
    flow
}

/// Exact solution over `h` of the recorded-data part alone,
/// `dθ̂/dt = k_θ Γ_θ (Σ σ(ẋ̄ - gu)ᵀ - Σ σσᵀ θ̂)`, with the stack held fixed.
///
/// Uses the exponential of the augmented matrix `[[A, B], [0, 0]]` with
/// `A = -k_θ Γ_θ Σσσᵀ` and `B = k_θ Γ_θ Σσ(ẋ̄ - gu)ᵀ`.
pub fn propagate_recorded_term(est: &DriftEstimate, stack: &HistoryStack, h: f64) -> DMatrix<f64> {
    if stack.is_empty() {
        return est.weights.clone();
    }
    let (p, n) = est.weights.shape();
    let mut aug = DMatrix::zeros(p + n, p + n);
    for r in 0..p {
        let scale = -est.cl_gain * est.gain[r] * h;
        for c in 0..p {
            aug[(r, c)] = scale * stack.gram()[(r, c)];
        }
        for c in 0..n {
            aug[(r, p + c)] = -scale * stack.cross()[(r, c)];
        }
    }
    let e = aug.exp();
    e.view((0, 0), (p, p)) * &est.weights + e.view((0, p), (p, n))
}

/// Builds a stack entry, caching `σ_θ(x)` and `g(x) u`.
pub fn stack_entry(
    t: f64,
    x: DVector<f64>,
    u: DVector<f64>,
    xdot: DVector<f64>,
    basis: &dyn DriftBasis,
    model: &dyn AgentModel,
) -> StackEntry {
    let sigma = basis.eval(&x);
    let gu = model.effectiveness(&x) * &u;
    StackEntry { t, x, u, xdot, sigma, gu }
}

/// Trailing window of `(t, x, u)` samples feeding the derivative filter.
#[derive(Debug, Clone)]
pub struct DerivativeWindow {
    filter: SavitzkyGolay,
    dt: f64,
    samples: VecDeque<(f64, DVector<f64>, DVector<f64>)>,
}

impl DerivativeWindow {
    pub fn new(window: usize, dt: f64) -> Result<Self, IdentifierError> {
        if window < SG_MIN_WINDOW {
            return Err(IdentifierError::WindowTooShort { len: window, min: SG_MIN_WINDOW });
        }
        Ok(Self { filter: SavitzkyGolay::new(window, SG_DEGREE)?, dt, samples: VecDeque::with_capacity(window) })
    }

    /// Pushes a sample; once the window is full returns the center sample
    /// `(t, x, u)` together with its derivative estimate.
    pub fn push(
        &mut self,
        t: f64,
        x: DVector<f64>,
        u: DVector<f64>,
    ) -> Option<(f64, DVector<f64>, DVector<f64>, DVector<f64>)> {
        if self.samples.len() == self.filter.window() {
            self.samples.pop_front();
        }
        self.samples.push_back((t, x, u));
        if self.samples.len() < self.filter.window() {
            return None;
        }
        let n = self.samples[0].1.len();
        let mut column = vec![0.0; self.filter.window()];
        let xdot = DVector::from_iterator(
            n,
            (0..n).map(|c| {
                for (slot, s) in self.samples.iter().enumerate() {
                    column[slot] = s.1[c];
                }
                self.filter.derivative(&column, self.dt).expect("window length matches filter")
            }),
        );
        let (tc, xc, uc) = self.samples[self.filter.window() / 2].clone();
        Some((tc, xc, uc, xdot))
    }
}
