use nalgebra::{DMatrix, DVector};

use super::Game;
use crate::identifier::{DriftBasis, EstimatedDrift};
use crate::linalg;
use crate::plant::{
    DriftSource, FlowTerms, PlantError, StateSnapshot, SubgraphState, TrueDrift, recover_states,
};
use std::sync::Arc;

/// Everything the policies and Bellman errors of a set of agents need at one
/// configuration of states: flow terms, `∇σ_k(𝓔_k)` and `G_σk(𝓔_k)`.
///
/// Entries are `Some` exactly for the evaluated agents. The evaluated set must
/// be closed under taking subgraphs (all agents, or some `S_i`).
#[derive(Debug, Clone)]
pub struct SubgraphTerms {
    pub states: StateSnapshot,
    pub sub_states: Vec<Option<SubgraphState>>,
    pub flows: Vec<Option<FlowTerms>>,
    pub jacobians: Vec<Option<DMatrix<f64>>>,
    pub g_sigma: Vec<Option<DMatrix<f64>>>,
}

impl SubgraphTerms {
    pub fn evaluate(
        game: &Game,
        states: &StateSnapshot,
        agents: &[usize],
        drift: &dyn DriftSource,
    ) -> Result<Self, PlantError> {
        let plant = &game.plant;
        let n_agents = plant.n_agents();
        let mut sub_states = vec![None; n_agents];
        let mut flows = vec![None; n_agents];
        let mut jacobians = vec![None; n_agents];
        for &k in agents {
            let sub = SubgraphState::observe(plant, k, states)?;
            jacobians[k] = Some(game.bases[k].jacobian(&sub.to_vector()));
            sub_states[k] = Some(sub);
            flows[k] = Some(FlowTerms::assemble(plant, k, states, drift)?);
        }
        let mut terms = Self { states: states.clone(), sub_states, flows, jacobians, g_sigma: vec![None; n_agents] };
        for &k in agents {
            terms.g_sigma[k] = Some(g_sigma(game, &terms, k)?);
        }
        Ok(terms)
    }

    fn flow(&self, k: usize) -> Result<&FlowTerms, PlantError> {
        self.flows[k].as_ref().ok_or(PlantError::MissingState(k))
    }

    fn jacobian(&self, k: usize) -> Result<&DMatrix<f64>, PlantError> {
        self.jacobians[k].as_ref().ok_or(PlantError::MissingState(k))
    }

    pub fn g_sigma_of(&self, k: usize) -> Result<&DMatrix<f64>, PlantError> {
        self.g_sigma[k].as_ref().ok_or(PlantError::MissingState(k))
    }

    pub fn own_error(&self, k: usize) -> Result<&DVector<f64>, PlantError> {
        self.sub_states[k].as_ref().map(|s| s.own_error()).ok_or(PlantError::MissingState(k))
    }
}

/// `G_σi = Σ_{j∈S_i} (𝓖ˢ_j^i)ᵀ (∇_{e_j}σ_i)ᵀ + (𝓖_i^i)ᵀ (∇_{x_i}σ_i)ᵀ`, `m_i × L_i`.
///
/// `𝓖ˢ_j^i` are the columns of `𝓖ˢ_j` multiplying `μ_i` inside `μ_{S_j}`, and
/// vanish when `i ∉ S_j`.
pub fn g_sigma(game: &Game, terms: &SubgraphTerms, i: usize) -> Result<DMatrix<f64>, PlantError> {
    let plant = &game.plant;
    let n = plant.state_dim();
    let mi = plant.input_dim(i);
    let jac = terms.jacobian(i)?;
    let sub = plant.subgraph(i);
    let mut g = DMatrix::zeros(mi, jac.nrows());
    for (slot, &j) in sub.ordering.iter().enumerate() {
        let Some(pos) = plant.subgraph(j).position(i) else { continue };
        let (offsets, _) = plant.block_offsets(j);
        let cols = terms.flow(j)?.err_gain.columns(offsets[pos], mi);
        g += cols.transpose() * jac.columns(slot * n, n).transpose();
    }
    let own = terms.flow(i)?.state_gain.columns(0, mi);
    g += own.transpose() * jac.columns(sub.size() * n, n).transpose();
    Ok(g)
}

/// `μ̂_i = -½ R_i⁻¹ G_σi Ŵ_ai`.
pub fn policy(game: &Game, i: usize, g_sigma: &DMatrix<f64>, wa: &DVector<f64>) -> DVector<f64> {
    game.costs[i].r_inv() * (g_sigma * wa) * -0.5
}

/// `V̂_i = Ŵ_ciᵀ σ_i(𝓔_i)`.
pub fn value(game: &Game, sub_state: &SubgraphState, wc: &DVector<f64>) -> f64 {
    wc.dot(&game.bases[sub_state.agent].eval(&sub_state.to_vector()))
}

fn mu_stack(game: &Game, j: usize, mu_hat: &[Option<DVector<f64>>]) -> Result<DVector<f64>, PlantError> {
    let parts = game
        .plant
        .subgraph(j)
        .ordering
        .iter()
        .map(|&k| mu_hat[k].as_ref().ok_or(PlantError::MissingState(k)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(linalg::stack(&parts))
}

/// `ω_i = Σ_{j∈S_i} ∇_{e_j}σ_i (𝓕ˢ_j + 𝓖ˢ_j μ̂_{S_j}) + ∇_{x_i}σ_i (𝓕_i + 𝓖_i μ̂_{S_i})`,
/// i.e. `∇σ_i` applied to the time derivative of `𝓔_i`.
pub fn regressor(
    game: &Game,
    terms: &SubgraphTerms,
    i: usize,
    mu_hat: &[Option<DVector<f64>>],
) -> Result<DVector<f64>, PlantError> {
    let plant = &game.plant;
    let n = plant.state_dim();
    let sub = plant.subgraph(i);
    let mut rate = DVector::zeros(n * (sub.size() + 1));
    for (slot, &j) in sub.ordering.iter().enumerate() {
        let e_dot = terms.flow(j)?.error_flow(&mu_stack(game, j, mu_hat)?);
        rate.rows_mut(slot * n, n).copy_from(&e_dot);
    }
    let x_dot = terms.flow(i)?.state_flow(&mu_stack(game, i, mu_hat)?);
    rate.rows_mut(sub.size() * n, n).copy_from(&x_dot);
    Ok(terms.jacobian(i)? * rate)
}

/// Regressor, policy and Bellman error of one agent at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanEval {
    pub omega: DVector<f64>,
    pub mu_hat: DVector<f64>,
    pub g_sigma: DMatrix<f64>,
    pub delta: f64,
}

/// Evaluates `δ = Ŵ_ciᵀ ω_i + Q_i(e_i) + μ̂_iᵀ R_i μ̂_i` at `𝓔_i`, recovering the
/// subgraph states first. `wa` is indexed by agent and must cover `S_i`.
pub fn evaluate_bellman(
    game: &Game,
    sub_state: &SubgraphState,
    wc: &DVector<f64>,
    wa: &[DVector<f64>],
    drift: &dyn DriftSource,
) -> Result<BellmanEval, PlantError> {
    let i = sub_state.agent;
    let states = recover_states(&game.plant, sub_state)?;
    let members = game.plant.subgraph(i).ordering.clone();
    let terms = SubgraphTerms::evaluate(game, &states, &members, drift)?;
    evaluate_bellman_with(game, &terms, i, wc, wa)
}

pub(crate) fn evaluate_bellman_with(
    game: &Game,
    terms: &SubgraphTerms,
    i: usize,
    wc: &DVector<f64>,
    wa: &[DVector<f64>],
) -> Result<BellmanEval, PlantError> {
    let mut mu_hat = vec![None; game.n_agents()];
    for &k in &game.plant.subgraph(i).ordering {
        mu_hat[k] = Some(policy(game, k, terms.g_sigma_of(k)?, &wa[k]));
    }
    let omega = regressor(game, terms, i, &mu_hat)?;
    let mu_i = mu_hat[i].take().expect("owner belongs to its subgraph");
    let cost = &game.costs[i];
    let delta = wc.dot(&omega) + cost.state_cost(terms.own_error(i)?) + cost.control_cost(&mu_i);
    Ok(BellmanEval { omega, mu_hat: mu_i, g_sigma: terms.g_sigma_of(i)?.clone(), delta })
}

/// Approximate Bellman error with identifier-based drift `θ̂_jᵀσ_θj`.
pub fn bellman_error(
    game: &Game,
    sub_state: &SubgraphState,
    wc: &DVector<f64>,
    wa: &[DVector<f64>],
    theta_hat: &[DMatrix<f64>],
    drift_bases: &[Arc<dyn DriftBasis>],
) -> Result<f64, PlantError> {
    let drift = EstimatedDrift { weights: theta_hat, bases: drift_bases };
    Ok(evaluate_bellman(game, sub_state, wc, wa, &drift)?.delta)
}

/// Bellman error with the true drift of every agent.
pub fn hj_residual_exact(
    game: &Game,
    sub_state: &SubgraphState,
    wc: &DVector<f64>,
    wa: &[DVector<f64>],
) -> Result<f64, PlantError> {
    Ok(evaluate_bellman(game, sub_state, wc, wa, &TrueDrift(&game.plant))?.delta)
}
