//! Value and policy approximation, Bellman errors at the state and at
//! extrapolation points, and the critic and actor update laws.

mod basis;
mod bellman;
mod grid;
mod update;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use basis::{BasisError, Monomial, ValueBasis};
pub use bellman::{
    BellmanEval, SubgraphTerms, bellman_error, evaluate_bellman, g_sigma, hj_residual_exact, policy,
    regressor, value,
};
pub use grid::{ExtrapolationGrid, GridEvaluation, PreparedGrid};
pub use update::{
    ActorState, BellmanSample, CriticState, actor_flow, actor_flow_aggregated, critic_flow,
    critic_flow_aggregated, grid_rank_metric, normalization, omega_gram_metric,
};

use crate::plant::{Plant, PlantError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("agent {agent}: {reason}")]
    Invalid { agent: usize, reason: String },
}

/// Local cost `Q_i(e) + μᵀ R_i μ` with a quadratic state cost `Q_i(e) = eᵀ Q e`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
}

impl CostSpec {
    /// Requires `Q` and `R` symmetric positive definite.
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self, String> {
        for (name, m) in [("Q", &q), ("R", &r)] {
            if !m.is_square() || (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) {
                return Err(format!("{name} must be square and symmetric"));
            }
            if m.clone().cholesky().is_none() {
                return Err(format!("{name} must be positive definite"));
            }
        }
        let r_inv = r.clone().cholesky().expect("checked above").inverse();
        Ok(Self { q, r, r_inv })
    }

    pub fn scalar(q: f64, r: f64) -> Result<Self, String> {
        Self::new(DMatrix::from_element(1, 1, q), DMatrix::from_element(1, 1, r))
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    pub fn state_cost(&self, e: &DVector<f64>) -> f64 {
        e.dot(&(&self.q * e))
    }

    pub fn control_cost(&self, mu: &DVector<f64>) -> f64 {
        mu.dot(&(&self.r * mu))
    }
}

/// The plant together with every agent's value basis and cost.
#[derive(Debug, Clone)]
pub struct Game {
    pub plant: Plant,
    pub bases: Vec<ValueBasis>,
    pub costs: Vec<CostSpec>,
}

impl Game {
    pub fn new(plant: Plant, bases: Vec<ValueBasis>, costs: Vec<CostSpec>) -> Result<Self, GameError> {
        let n = plant.state_dim();
        for i in 0..plant.n_agents() {
            let basis = bases.get(i).ok_or(GameError::Invalid { agent: i, reason: "missing value basis".into() })?;
            let want = n * (plant.subgraph(i).size() + 1);
            if basis.input_dim() != want {
                return Err(GameError::Invalid {
                    agent: i,
                    reason: format!("value basis takes {} inputs, subgraph state has {want}", basis.input_dim()),
                });
            }
            let cost = costs.get(i).ok_or(GameError::Invalid { agent: i, reason: "missing cost".into() })?;
            if cost.q.nrows() != n || cost.r.nrows() != plant.input_dim(i) {
                return Err(GameError::Invalid { agent: i, reason: "cost dimensions do not match".into() });
            }
        }
        Ok(Self { plant, bases, costs })
    }

    pub fn n_agents(&self) -> usize {
        self.plant.n_agents()
    }
}
