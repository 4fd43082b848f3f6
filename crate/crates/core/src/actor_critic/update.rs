use nalgebra::{DMatrix, DVector};

use crate::linalg;

/// Critic weights `Ŵ_c` with the least-squares gain `Γ` and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticState {
    pub weights: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub gamma_bar: f64,
    pub nu: f64,
    pub eta_c1: f64,
    pub eta_c2: f64,
    pub beta: f64,
}

/// Actor weights `Ŵ_a` and rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorState {
    pub weights: DVector<f64>,
    pub eta_a1: f64,
    pub eta_a2: f64,
}

/// Regressor, normalization and Bellman error at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanSample {
    pub omega: DVector<f64>,
    pub rho: f64,
    pub delta: f64,
}

impl BellmanSample {
    pub fn new(omega: DVector<f64>, delta: f64, gamma: &DMatrix<f64>, nu: f64) -> Self {
        let rho = normalization(&omega, gamma, nu);
        Self { omega, rho, delta }
    }
}

/// `ρ = 1 + ν ωᵀ Γ ω`.
pub fn normalization(omega: &DVector<f64>, gamma: &DMatrix<f64>, nu: f64) -> f64 {
    1.0 + nu * omega.dot(&(gamma * omega))
}

/// Critic flow given the grid sum `Σ_k ω^k δ^k / ρ^k` over `m` points.
///
/// `dŴ_c/dt = -η_c1 Γ ω δ/ρ - (η_c2/M) Γ Σ_k ω^k δ^k/ρ^k` and
/// `dΓ/dt = (βΓ - η_c1 Γ ωωᵀ Γ / ρ²) 1{‖Γ‖_F ≤ Γ̄}`.
pub fn critic_flow_aggregated(
    critic: &CriticState,
    current: &BellmanSample,
    grid_sum: &DVector<f64>,
    m: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let g_omega = &critic.gamma * &current.omega;
    let mut d_w = &g_omega * (-critic.eta_c1 * current.delta / current.rho);
    if m > 0 {
        d_w -= &critic.gamma * grid_sum * (critic.eta_c2 / m as f64);
    }
    let d_gamma = if critic.gamma.norm() <= critic.gamma_bar {
        let mut d = &critic.gamma * critic.beta;
        d.ger(-critic.eta_c1 / (current.rho * current.rho), &g_omega, &g_omega, 1.0);
        d
    } else {
        DMatrix::zeros(critic.gamma.nrows(), critic.gamma.ncols())
    };
    (d_w, d_gamma)
}

/// Critic flow from explicit grid samples.
pub fn critic_flow(
    critic: &CriticState,
    current: &BellmanSample,
    grid: &[BellmanSample],
) -> (DVector<f64>, DMatrix<f64>) {
    let mut sum = DVector::zeros(critic.weights.len());
    for s in grid {
        sum.axpy(s.delta / s.rho, &s.omega, 1.0);
    }
    critic_flow_aggregated(critic, current, &sum, grid.len())
}

/// Actor flow given `H = G_σᵀR⁻¹G_σ` at the state and the grid matrix
/// `Σ_k (ω^kᵀŴ_c/ρ^k) G_σ^kᵀR⁻¹G_σ^k` over `m` points.
pub fn actor_flow_aggregated(
    actor: &ActorState,
    critic: &CriticState,
    current_h: &DMatrix<f64>,
    current: &BellmanSample,
    grid_matrix: &DMatrix<f64>,
    m: usize,
) -> DVector<f64> {
    let wa = &actor.weights;
    let wc = &critic.weights;
    let mut d = wa * -actor.eta_a2;
    d += current_h * wa * (0.25 * critic.eta_c1 * current.omega.dot(wc) / current.rho);
    if m > 0 {
        d += grid_matrix * wa * (0.25 * critic.eta_c2 / m as f64);
    }
    d -= (wa - wc) * actor.eta_a1;
    d
}

/// Actor flow from explicit grid samples `(G_σ^k, sample)`.
pub fn actor_flow(
    actor: &ActorState,
    critic: &CriticState,
    r_inv: &DMatrix<f64>,
    g_sigma: &DMatrix<f64>,
    current: &BellmanSample,
    grid: &[(DMatrix<f64>, BellmanSample)],
) -> DVector<f64> {
    let h = |g: &DMatrix<f64>| g.transpose() * r_inv * g;
    let l = actor.weights.len();
    let mut grid_matrix = DMatrix::zeros(l, l);
    for (g, s) in grid {
        grid_matrix += h(g) * (s.omega.dot(&critic.weights) / s.rho);
    }
    actor_flow_aggregated(actor, critic, &h(g_sigma), current, &grid_matrix, grid.len())
}

/// `λ_min(Σ_k ω^k ω^kᵀ / ρ^k)` at one instant.
pub fn omega_gram_metric(samples: &[BellmanSample]) -> f64 {
    let Some(first) = samples.first() else { return 0.0 };
    let l = first.omega.len();
    let mut gram = DMatrix::zeros(l, l);
    for s in samples {
        gram.ger(1.0 / s.rho, &s.omega, &s.omega, 1.0);
    }
    linalg::min_sym_eigenvalue(&gram).max(0.0)
}

/// `(1/M) inf_t λ_min(Σ_k ω^k ω^kᵀ / ρ^k)` over recorded grid evaluations.
pub fn grid_rank_metric(history: &[Vec<BellmanSample>]) -> f64 {
    let m = history.iter().map(|h| h.len()).max().unwrap_or(0);
    if m == 0 {
        return 0.0;
    }
    let inf = history.iter().map(|h| omega_gram_metric(h)).fold(f64::INFINITY, f64::min);
    inf / m as f64
}
