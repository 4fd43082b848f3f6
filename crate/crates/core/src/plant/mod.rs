//! Agent and leader models, formation algebra, the relative control error
//! transform `μ ↔ u` and the closed-loop error and state flows.

mod leader;
mod models;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use leader::LeaderModel;
pub use models::{AgentModel, KinematicWheel, LinearAgent, ScalarGain, ScalarPolyAgent};

use crate::linalg;
use crate::netgraph::{DirectedNetwork, GraphError, Node, SubgraphIndex};

/// Relative rank tolerance of [`pseudo_inverse`].
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("state of agent {0} is not available")]
    MissingState(usize),
    #[error("effectiveness of agent {agent} is rank deficient (relative singular value {ratio:.3e})")]
    RankDeficient { agent: usize, ratio: f64 },
    #[error("matrix is rank deficient (relative singular value {ratio:.3e})")]
    RankDeficientMatrix { ratio: f64 },
    #[error("block gain of agent {0} is singular (invertibility of the control transform fails)")]
    SingularBlockGain(usize),
    #[error("subgraph error map of agent {0} is singular, states cannot be recovered")]
    SingularRecovery(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Leader-relative formation offsets `x_di0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpec {
    pub offsets: Vec<DVector<f64>>,
}

impl FormationSpec {
    pub fn new(offsets: Vec<DVector<f64>>) -> Self {
        Self { offsets }
    }

    /// `x_di0`.
    pub fn offset(&self, i: usize) -> &DVector<f64> {
        &self.offsets[i]
    }

    /// `x_dij = x_di0 - x_dj0`, with `x_d00 = 0`.
    pub fn relative(&self, i: usize, j: Node) -> DVector<f64> {
        match j {
            Node::Leader => self.offsets[i].clone(),
            Node::Agent(j) => &self.offsets[i] - &self.offsets[j],
        }
    }
}

/// States of (some of) the agents and of the leader at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub leader: DVector<f64>,
    pub agents: Vec<Option<DVector<f64>>>,
}

impl StateSnapshot {
    pub fn full(leader: DVector<f64>, agents: Vec<DVector<f64>>) -> Self {
        Self { leader, agents: agents.into_iter().map(Some).collect() }
    }

    pub fn agent(&self, j: usize) -> Result<&DVector<f64>, PlantError> {
        self.agents.get(j).and_then(|x| x.as_ref()).ok_or(PlantError::MissingState(j))
    }

    pub fn node(&self, j: Node) -> Result<&DVector<f64>, PlantError> {
        match j {
            Node::Leader => Ok(&self.leader),
            Node::Agent(j) => self.agent(j),
        }
    }
}

/// Source of drift values `f_j(x)`: the true models or identifier estimates.
pub trait DriftSource {
    fn drift(&self, agent: usize, x: &DVector<f64>) -> DVector<f64>;
}

/// The exact drift of the plant's agent models.
#[derive(Debug, Clone, Copy)]
pub struct TrueDrift<'a>(pub &'a Plant);

impl DriftSource for TrueDrift<'_> {
    fn drift(&self, agent: usize, x: &DVector<f64>) -> DVector<f64> {
        self.0.models[agent].drift(x)
    }
}

/// The networked plant: topology, agent models, leader and formation.
#[derive(Debug, Clone)]
pub struct Plant {
    net: DirectedNetwork,
    subgraphs: Vec<SubgraphIndex>,
    models: Vec<Arc<dyn AgentModel>>,
    leader: LeaderModel,
    formation: FormationSpec,
    state_dim: usize,
}

impl Plant {
    pub fn new(
        net: DirectedNetwork,
        models: Vec<Arc<dyn AgentModel>>,
        leader: LeaderModel,
        formation: FormationSpec,
    ) -> Result<Self, PlantError> {
        let n_agents = net.n_agents();
        if models.len() != n_agents {
            return Err(PlantError::Dimension(format!(
                "{} agent models for {n_agents} agents",
                models.len()
            )));
        }
        if formation.offsets.len() != n_agents {
            return Err(PlantError::Dimension(format!(
                "{} formation offsets for {n_agents} agents",
                formation.offsets.len()
            )));
        }
        let state_dim = leader.dim();
        for (i, m) in models.iter().enumerate() {
            if m.state_dim() != state_dim || formation.offsets[i].len() != state_dim {
                return Err(PlantError::Dimension(format!(
                    "agent {i} does not share the leader state dimension {state_dim}"
                )));
            }
            if m.input_dim() == 0 {
                return Err(PlantError::Dimension(format!("agent {i} has no inputs")));
            }
        }
        let subgraphs = net.subgraphs();
        Ok(Self { net, subgraphs, models, leader, formation, state_dim })
    }

    pub fn network(&self) -> &DirectedNetwork {
        &self.net
    }
    pub fn n_agents(&self) -> usize {
        self.net.n_agents()
    }
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }
    pub fn input_dim(&self, i: usize) -> usize {
        self.models[i].input_dim()
    }
    pub fn model(&self, i: usize) -> &Arc<dyn AgentModel> {
        &self.models[i]
    }
    pub fn leader(&self) -> &LeaderModel {
        &self.leader
    }
    pub fn formation(&self) -> &FormationSpec {
        &self.formation
    }
    pub fn subgraph(&self, i: usize) -> &SubgraphIndex {
        &self.subgraphs[i]
    }

    /// Row offsets of each member's block in `μ_{S_i}` / `u_{S_i}`, plus the total size.
    pub fn block_offsets(&self, i: usize) -> (Vec<usize>, usize) {
        let mut offsets = Vec::with_capacity(self.subgraphs[i].size());
        let mut at = 0;
        for &k in &self.subgraphs[i].ordering {
            offsets.push(at);
            at += self.input_dim(k);
        }
        (offsets, at)
    }

    /// Drift of node `j` at `x`; the leader uses its own model.
    fn node_drift(&self, j: Node, x: &DVector<f64>, drift: &dyn DriftSource) -> DVector<f64> {
        match j {
            Node::Leader => self.leader.drift(x),
            Node::Agent(j) => drift.drift(j, x),
        }
    }
}

/// Left inverse `(MᵀM)⁻¹Mᵀ` of a full-column-rank matrix.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, PlantError> {
    if m.shape() == (1, 1) {
        let g = m[(0, 0)];
        return if g != 0.0 && g.is_finite() {
            Ok(DMatrix::from_element(1, 1, 1.0 / g))
        } else {
            Err(PlantError::RankDeficientMatrix { ratio: 0.0 })
        };
    }
    let gram = m.transpose() * m;
    let eig = gram.clone().symmetric_eigenvalues();
    let hi = eig.max();
    let lo = eig.min();
    let ratio = if hi > 0.0 { (lo.max(0.0) / hi).sqrt() } else { 0.0 };
    if !(ratio > RANK_TOL) {
        return Err(PlantError::RankDeficientMatrix { ratio });
    }
    let chol = gram.cholesky().ok_or(PlantError::RankDeficientMatrix { ratio })?;
    Ok(chol.solve(&m.transpose()))
}

fn agent_pseudo_inverse(plant: &Plant, i: usize, at: &DVector<f64>) -> Result<DMatrix<f64>, PlantError> {
    pseudo_inverse(&plant.models[i].effectiveness(at)).map_err(|e| match e {
        PlantError::RankDeficientMatrix { ratio } => PlantError::RankDeficient { agent: i, ratio },
        other => other,
    })
}

/// `e_i = Σ_{j ∈ {0} ∪ N_{-i}} a_ij ((x_i - x_j) - x_dij)`.
pub fn neighborhood_error(plant: &Plant, i: usize, states: &StateSnapshot) -> Result<DVector<f64>, PlantError> {
    let xi = states.agent(i)?;
    let mut e = DVector::zeros(plant.state_dim);
    for j in plant.net.in_nodes(i) {
        let a = plant.net.weight(i, j);
        let xj = states.node(j)?;
        e += a * (xi - xj - plant.formation.relative(i, j));
    }
    Ok(e)
}

/// `𝓔 = ((L + A_0) ⊗ I_n)(𝓧 - 𝓧_d - 𝓧_0)` for the whole network.
pub fn stacked_error(plant: &Plant, states: &StateSnapshot) -> Result<DVector<f64>, PlantError> {
    let n = plant.state_dim;
    let n_agents = plant.n_agents();
    let mut dev = DVector::zeros(n * n_agents);
    for i in 0..n_agents {
        let d = states.agent(i)? - plant.formation.offset(i) - &states.leader;
        dev.rows_mut(i * n, n).copy_from(&d);
    }
    Ok(linalg::kron_identity(&plant.net.pinned_laplacian(), n) * dev)
}

/// The relative steady-state control terms `(f_ij, g_ij)` evaluated at `x_j`.
///
/// For the leader `g_i0` has zero columns since the leader takes no input.
pub fn relative_control_terms(
    plant: &Plant,
    i: usize,
    j: Node,
    x_j: &DVector<f64>,
    drift: &dyn DriftSource,
) -> Result<(DVector<f64>, DMatrix<f64>), PlantError> {
    let shifted = x_j + plant.formation.relative(i, j);
    let gi_pinv = agent_pseudo_inverse(plant, i, &shifted)?;
    let f_ij = &gi_pinv * (plant.node_drift(j, x_j, drift) - drift.drift(i, &shifted));
    let g_ij = match j {
        Node::Leader => DMatrix::zeros(plant.input_dim(i), 0),
        Node::Agent(j) => &gi_pinv * plant.models[j].effectiveness(x_j),
    };
    Ok((f_ij, g_ij))
}

/// `L_gi`: block matrix mapping `u_{S_i}` to `μ_{S_i} + F_i`.
pub fn build_block_gain(plant: &Plant, i: usize, states: &StateSnapshot) -> Result<DMatrix<f64>, PlantError> {
    let sub = &plant.subgraphs[i];
    let (offsets, total) = plant.block_offsets(i);
    let mut lg = DMatrix::zeros(total, total);
    for (slot_k, &k) in sub.ordering.iter().enumerate() {
        let mk = plant.input_dim(k);
        let rk = offsets[slot_k];
        let diag = plant.net.in_weight(k);
        for d in 0..mk {
            lg[(rk + d, rk + d)] = diag;
        }
        for (slot_l, &l) in sub.ordering.iter().enumerate() {
            let a = plant.net.weight(k, Node::Agent(l));
            if l == k || a == 0.0 {
                continue;
            }
            let shifted = states.agent(l)? + plant.formation.relative(k, Node::Agent(l));
            let g_kl = agent_pseudo_inverse(plant, k, &shifted)? * plant.models[l].effectiveness(states.agent(l)?);
            let ml = plant.input_dim(l);
            let mut block = lg.view_mut((rk, offsets[slot_l]), (mk, ml));
            block -= a * g_kl;
        }
    }
    Ok(lg)
}

/// `Σ_{j ∈ {0} ∪ N_{-k}} a_kj f_kj(x_j)`: the block of `F_i` owned by agent `k`.
pub fn relative_drift_block(
    plant: &Plant,
    k: usize,
    states: &StateSnapshot,
    drift: &dyn DriftSource,
) -> Result<DVector<f64>, PlantError> {
    let mut acc = DVector::zeros(plant.input_dim(k));
    for j in plant.net.in_nodes(k) {
        let (f_kj, _) = relative_control_terms(plant, k, j, states.node(j)?, drift)?;
        acc += plant.net.weight(k, j) * f_kj;
    }
    Ok(acc)
}

/// `F_i`: the stacked relative drift terms over `S_i` in `λ_i` order.
pub fn build_relative_drift_stack(
    plant: &Plant,
    i: usize,
    states: &StateSnapshot,
    drift: &dyn DriftSource,
) -> Result<DVector<f64>, PlantError> {
    let blocks = plant.subgraphs[i]
        .ordering
        .iter()
        .map(|&k| relative_drift_block(plant, k, states, drift))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(linalg::stack(&blocks.iter().collect::<Vec<_>>()))
}

/// `u_{S_i} = L_gi⁻¹ (μ_{S_i} + F_i)`; agent `i`'s own input is the first block.
pub fn controls_from_mu(
    plant: &Plant,
    i: usize,
    mu: &DVector<f64>,
    states: &StateSnapshot,
    drift: &dyn DriftSource,
) -> Result<DVector<f64>, PlantError> {
    let lg = build_block_gain(plant, i, states)?;
    check_len(mu, lg.nrows(), "μ stack")?;
    let f = build_relative_drift_stack(plant, i, states, drift)?;
    let lu = lg.lu();
    lu.solve(&(mu + f)).ok_or(PlantError::SingularBlockGain(i))
}

/// `μ_{S_i} = L_gi u_{S_i} - F_i`.
pub fn mu_from_controls(
    plant: &Plant,
    i: usize,
    u: &DVector<f64>,
    states: &StateSnapshot,
    drift: &dyn DriftSource,
) -> Result<DVector<f64>, PlantError> {
    let lg = build_block_gain(plant, i, states)?;
    check_len(u, lg.nrows(), "u stack")?;
    Ok(lg * u - build_relative_drift_stack(plant, i, states, drift)?)
}

fn check_len(v: &DVector<f64>, want: usize, what: &str) -> Result<(), PlantError> {
    if v.len() == want {
        Ok(())
    } else {
        Err(PlantError::Dimension(format!("{what} has length {}, expected {want}", v.len())))
    }
}

/// The drift and gain terms of agent `i`'s error and state dynamics in `μ` coordinates:
/// `ė_i = 𝓕ˢ_i + 𝓖ˢ_i μ_{S_i}` and `ẋ_i = 𝓕_i + 𝓖_i μ_{S_i}`.
#[derive(Debug, Clone)]
pub struct FlowTerms {
    pub agent: usize,
    pub lg_inv: DMatrix<f64>,
    /// `F_i`.
    pub f_stack: DVector<f64>,
    /// `𝓕ˢ_i`.
    pub err_drift: DVector<f64>,
    /// `𝓖ˢ_i`, `n × Σ m_k`.
    pub err_gain: DMatrix<f64>,
    /// `𝓕_i`.
    pub state_drift: DVector<f64>,
    /// `𝓖_i`, `n × Σ m_k`.
    pub state_gain: DMatrix<f64>,
}

impl FlowTerms {
    pub fn assemble(
        plant: &Plant,
        i: usize,
        states: &StateSnapshot,
        drift: &dyn DriftSource,
    ) -> Result<Self, PlantError> {
        let sub = &plant.subgraphs[i];
        let (offsets, _) = plant.block_offsets(i);
        let lg = build_block_gain(plant, i, states)?;
        let lg_inv = linalg::lu_inverse(&lg).ok_or(PlantError::SingularBlockGain(i))?;
        let f_stack = build_relative_drift_stack(plant, i, states, drift)?;

        // g_k(x_k) L^k, with L^k the block row of L_gi⁻¹ belonging to agent k
        let gain_row = |k: usize| -> Result<DMatrix<f64>, PlantError> {
            let slot = sub.position(k).expect("in-neighbors belong to the subgraph");
            let rows = lg_inv.rows(offsets[slot], plant.input_dim(k));
            Ok(plant.models[k].effectiveness(states.agent(k)?) * rows)
        };

        let xi = states.agent(i)?;
        let fi = drift.drift(i, xi);
        let state_gain = gain_row(i)?;
        let mut err_gain = state_gain.clone() * plant.net.in_weight(i);
        let mut err_drift = DVector::zeros(plant.state_dim);
        for j in plant.net.in_nodes(i) {
            let a = plant.net.weight(i, j);
            let xj = states.node(j)?;
            err_drift += a * (&fi - plant.node_drift(j, xj, drift));
            if let Node::Agent(j) = j {
                err_gain -= a * gain_row(j)?;
            }
        }
        err_drift += &err_gain * &f_stack;
        let state_drift = fi + &state_gain * &f_stack;
        Ok(Self { agent: i, lg_inv, f_stack, err_drift, err_gain, state_drift, state_gain })
    }

    pub fn error_flow(&self, mu: &DVector<f64>) -> DVector<f64> {
        &self.err_drift + &self.err_gain * mu
    }

    pub fn state_flow(&self, mu: &DVector<f64>) -> DVector<f64> {
        &self.state_drift + &self.state_gain * mu
    }

    /// `u_{S_i} = L_gi⁻¹ (μ_{S_i} + F_i)`.
    pub fn controls(&self, mu: &DVector<f64>) -> DVector<f64> {
        &self.lg_inv * (mu + &self.f_stack)
    }
}

/// `ė_i` under the relative control errors `μ_{S_i}`.
pub fn error_flow(
    plant: &Plant,
    i: usize,
    states: &StateSnapshot,
    mu: &DVector<f64>,
    drift: &dyn DriftSource,
) -> Result<DVector<f64>, PlantError> {
    let terms = FlowTerms::assemble(plant, i, states, drift)?;
    check_len(mu, terms.lg_inv.nrows(), "μ stack")?;
    Ok(terms.error_flow(mu))
}

/// `ẋ_i` under the relative control errors `μ_{S_i}`.
pub fn state_flow(
    plant: &Plant,
    i: usize,
    states: &StateSnapshot,
    mu: &DVector<f64>,
    drift: &dyn DriftSource,
) -> Result<DVector<f64>, PlantError> {
    let terms = FlowTerms::assemble(plant, i, states, drift)?;
    check_len(mu, terms.lg_inv.nrows(), "μ stack")?;
    Ok(terms.state_flow(mu))
}

/// `𝓔_i = [e_{S_i}; x_i]`, errors in `λ_i` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphState {
    pub agent: usize,
    pub errors: Vec<DVector<f64>>,
    pub own_state: DVector<f64>,
}

impl SubgraphState {
    /// Reads `𝓔_i` off a snapshot holding every member of `S_i`.
    pub fn observe(plant: &Plant, i: usize, states: &StateSnapshot) -> Result<Self, PlantError> {
        let errors = plant.subgraphs[i]
            .ordering
            .iter()
            .map(|&k| neighborhood_error(plant, k, states))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { agent: i, errors, own_state: states.agent(i)?.clone() })
    }

    /// Splits a flat `𝓔_i` vector.
    pub fn from_vector(plant: &Plant, i: usize, v: &DVector<f64>) -> Result<Self, PlantError> {
        let n = plant.state_dim;
        let s = plant.subgraphs[i].size();
        check_len(v, n * (s + 1), "subgraph state")?;
        let errors = (0..s).map(|k| v.rows(k * n, n).into_owned()).collect();
        Ok(Self { agent: i, errors, own_state: v.rows(s * n, n).into_owned() })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut parts: Vec<&DVector<f64>> = self.errors.iter().collect();
        parts.push(&self.own_state);
        linalg::stack(&parts)
    }

    /// `𝓔_{-i} = [e_{S_{-i}}; x_i]`.
    pub fn extended_vector(&self) -> DVector<f64> {
        let mut parts: Vec<&DVector<f64>> = self.errors[1..].iter().collect();
        parts.push(&self.own_state);
        linalg::stack(&parts)
    }

    pub fn own_error(&self) -> &DVector<f64> {
        &self.errors[0]
    }
}

/// Reconstructs the states of every member of `S_i`, and the leader state,
/// from `𝓔_i` alone.
///
/// With `y_k = x_k - x_dk0 - x_0` the errors satisfy `e_{S_i} = ((L + A_0)|_{S_i} ⊗ I_n) y_{S_i}`,
/// the restriction being closed under in-edges. Solving for `y` gives
/// `x_k = x_i + y_k - y_i + x_dki` and `x_0 = x_i - x_di0 - y_i`.
pub fn recover_states(plant: &Plant, sub_state: &SubgraphState) -> Result<StateSnapshot, PlantError> {
    let i = sub_state.agent;
    let sub = &plant.subgraphs[i];
    let n = plant.state_dim;
    let s = sub.size();
    if sub_state.errors.len() != s {
        return Err(PlantError::Dimension(format!(
            "{} errors for a subgraph of size {s}",
            sub_state.errors.len()
        )));
    }
    let full = plant.net.pinned_laplacian();
    let restricted = DMatrix::from_fn(s, s, |r, c| full[(sub.ordering[r], sub.ordering[c])]);
    let inv = linalg::lu_inverse(&restricted).ok_or(PlantError::SingularRecovery(i))?;
    let xi = &sub_state.own_state;
    let mut y = vec![DVector::zeros(n); s];
    for (r, yr) in y.iter_mut().enumerate() {
        for (c, ec) in sub_state.errors.iter().enumerate() {
            *yr += inv[(r, c)] * ec;
        }
    }
    let mut agents = vec![None; plant.n_agents()];
    for (slot, &k) in sub.ordering.iter().enumerate() {
        let xk = xi + &y[slot] - &y[0] + plant.formation.relative(k, Node::Agent(i));
        agents[k] = Some(xk);
    }
    let leader = xi - plant.formation.offset(i) - &y[0];
    Ok(StateSnapshot { leader, agents })
}
