//! The coupled network ODE on a flat state vector.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::SimError;
use super::config::SimConfig;
use super::scenario::build_extrapolation_grids;
use crate::actor_critic::{
    ActorState, BellmanSample, CriticState, ExtrapolationGrid, Game, GridEvaluation, PreparedGrid, SubgraphTerms,
    actor_flow_aggregated, critic_flow_aggregated, policy, regressor,
};
use crate::identifier::{
    DerivativeWindow, DriftBasis, DriftEstimate, EstimatedDrift, HistoryStack, StateObserver, cl_update_flow,
    observer_flow,
};
use crate::linalg;
use crate::plant::StateSnapshot;

/// Offsets of one agent's blocks inside the flat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentLayout {
    pub x: usize,
    pub xhat: usize,
    /// `θ̂`, column-major `P × n`.
    pub theta: usize,
    pub wc: usize,
    pub wa: usize,
    /// `Γ`, column-major `L × L`.
    pub gamma: usize,
    pub n: usize,
    pub p: usize,
    pub l: usize,
}

impl AgentLayout {
    pub fn theta_len(&self) -> usize {
        self.p * self.n
    }

    pub fn end(&self) -> usize {
        self.gamma + self.l * self.l
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    pub agents: Vec<AgentLayout>,
    pub len: usize,
}

impl StateLayout {
    fn new(n: usize, dims: &[(usize, usize)]) -> Self {
        let mut at = 0;
        let agents = dims
            .iter()
            .map(|&(p, l)| {
                let a = AgentLayout {
                    x: at,
                    xhat: at + n,
                    theta: at + 2 * n,
                    wc: at + 2 * n + p * n,
                    wa: at + 2 * n + p * n + l,
                    gamma: at + 2 * n + p * n + 2 * l,
                    n,
                    p,
                    l,
                };
                at = a.end();
                a
            })
            .collect();
        Self { agents, len: at }
    }

    pub fn x<'a>(&self, y: &'a DVector<f64>, i: usize) -> &'a [f64] {
        let a = &self.agents[i];
        &y.as_slice()[a.x..a.x + a.n]
    }

    pub fn xhat<'a>(&self, y: &'a DVector<f64>, i: usize) -> &'a [f64] {
        let a = &self.agents[i];
        &y.as_slice()[a.xhat..a.xhat + a.n]
    }

    pub fn theta<'a>(&self, y: &'a DVector<f64>, i: usize) -> &'a [f64] {
        let a = &self.agents[i];
        &y.as_slice()[a.theta..a.theta + a.theta_len()]
    }

    pub fn wc<'a>(&self, y: &'a DVector<f64>, i: usize) -> &'a [f64] {
        let a = &self.agents[i];
        &y.as_slice()[a.wc..a.wc + a.l]
    }

    pub fn wa<'a>(&self, y: &'a DVector<f64>, i: usize) -> &'a [f64] {
        let a = &self.agents[i];
        &y.as_slice()[a.wa..a.wa + a.l]
    }

    pub fn gamma<'a>(&self, y: &'a DVector<f64>, i: usize) -> &'a [f64] {
        let a = &self.agents[i];
        &y.as_slice()[a.gamma..a.end()]
    }

    pub fn theta_matrix(&self, y: &DVector<f64>, i: usize) -> DMatrix<f64> {
        let a = &self.agents[i];
        DMatrix::from_column_slice(a.p, a.n, self.theta(y, i))
    }

    pub fn gamma_matrix(&self, y: &DVector<f64>, i: usize) -> DMatrix<f64> {
        let a = &self.agents[i];
        DMatrix::from_column_slice(a.l, a.l, self.gamma(y, i))
    }
}

/// Per-agent learning gains.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGains {
    pub eta_c1: f64,
    pub eta_c2: f64,
    pub eta_a1: f64,
    pub eta_a2: f64,
    pub nu: f64,
    pub beta: f64,
    pub gamma_bar: f64,
    /// Frobenius radius `Γ` is projected onto after each step: `max(‖Γ(0)‖, Γ̄)`.
    pub gamma_limit: f64,
    pub k_obs: f64,
    pub k_theta: f64,
    pub gamma_theta: DVector<f64>,
}

/// Discrete state carried between steps: history stacks, derivative windows
/// and the rank gates of the recorded-data term.
#[derive(Debug, Clone)]
pub struct DiscreteState {
    pub stacks: Vec<HistoryStack>,
    pub windows: Vec<DerivativeWindow>,
    pub cl_active: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub y: DVector<f64>,
    pub discrete: DiscreteState,
}

/// Signals produced by one flow evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDiagnostics {
    pub leader: DVector<f64>,
    pub errors: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub mu_hat: Vec<DVector<f64>>,
    pub deltas: Vec<f64>,
    /// `λ_min(Σ_k ω^k ω^kᵀ / ρ^k)` over each grid, when requested.
    pub grid_gram_min: Option<Vec<f64>>,
}

/// Everything fixed for a run.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub config: SimConfig,
    pub game: Game,
    pub drift_bases: Vec<Arc<dyn DriftBasis>>,
    pub true_theta: Vec<Option<DMatrix<f64>>>,
    pub grids: Vec<ExtrapolationGrid>,
    pub prepared: Vec<PreparedGrid>,
    pub layout: StateLayout,
    pub gains: Vec<AgentGains>,
}

impl NetworkModel {
    pub fn new(config: &SimConfig) -> Result<Self, SimError> {
        let built = config.build()?;
        let game = built.game;
        let n = config.state_dim;
        let grids = build_extrapolation_grids(config, &game);
        let prepared = grids
            .iter()
            .map(|g| PreparedGrid::prepare(&game, g, &built.drift_bases))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| SimError::Plant { t: 0.0, source })?;
        let dims: Vec<(usize, usize)> =
            (0..game.n_agents()).map(|i| (built.drift_bases[i].dim(), game.bases[i].len())).collect();
        let layout = StateLayout::new(n, &dims);
        let mut gains = Vec::new();
        for (i, a) in config.agents.iter().enumerate() {
            let gamma0 = a.gamma0.resolve(dims[i].1, "gamma0")?;
            gains.push(AgentGains {
                eta_c1: a.eta_c1,
                eta_c2: a.eta_c2,
                eta_a1: a.eta_a1,
                eta_a2: a.eta_a2,
                nu: a.nu,
                beta: a.beta,
                gamma_bar: a.gamma_bar,
                gamma_limit: gamma0.norm().max(a.gamma_bar),
                k_obs: a.k_obs,
                k_theta: a.k_theta,
                gamma_theta: a.gamma_theta.resolve(dims[i].0, "gamma_theta")?,
            });
        }
        Ok(Self {
            config: config.clone(),
            game,
            drift_bases: built.drift_bases,
            true_theta: built.true_theta,
            grids,
            prepared,
            layout,
            gains,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.game.n_agents()
    }

    pub fn initial_state(&self) -> Result<SimState, SimError> {
        let n = self.config.state_dim;
        let mut y = DVector::zeros(self.layout.len);
        let mut stacks = Vec::new();
        let mut windows = Vec::new();
        for (i, a) in self.config.agents.iter().enumerate() {
            let lay = self.layout.agents[i];
            y.rows_mut(lay.x, n).copy_from(&a.x0.resolve(n, "x0")?);
            y.rows_mut(lay.xhat, n).copy_from(&a.xhat0.resolve(n, "xhat0")?);
            let theta = match (&self.true_theta[i], self.config.exact_model) {
                (Some(theta), true) => DVector::from_column_slice(theta.as_slice()),
                _ => a.theta_hat0.resolve(lay.theta_len(), "theta_hat0")?,
            };
            y.rows_mut(lay.theta, lay.theta_len()).copy_from(&theta);
            y.rows_mut(lay.wc, lay.l).copy_from(&a.wc0.resolve(lay.l, "wc0")?);
            y.rows_mut(lay.wa, lay.l).copy_from(&a.wa0.resolve(lay.l, "wa0")?);
            let gamma0 = a.gamma0.resolve(lay.l, "gamma0")?;
            y.rows_mut(lay.gamma, lay.l * lay.l).copy_from_slice(gamma0.as_slice());
            stacks.push(HistoryStack::new(a.stack_size, lay.p, n));
            windows.push(
                DerivativeWindow::new(self.config.sg_window, self.config.dt)
                    .map_err(|e| SimError::Config(super::ConfigError::Invariant(e.to_string())))?,
            );
        }
        let n_agents = self.n_agents();
        Ok(SimState { t: 0.0, y, discrete: DiscreteState { stacks, windows, cl_active: vec![false; n_agents] } })
    }

    /// Bellman errors and regressors of agent `i` over its extrapolation grid at `y`.
    pub fn grid_evaluation(&self, i: usize, y: &DVector<f64>) -> GridEvaluation {
        let lay = &self.layout;
        let n_agents = self.n_agents();
        let grid = &self.prepared[i];
        let mut params = DVector::zeros(grid.parameter_len());
        let thetas: Vec<&[f64]> = (0..n_agents).map(|k| lay.theta(y, k)).collect();
        let was: Vec<&[f64]> = (0..n_agents).map(|k| lay.wa(y, k)).collect();
        grid.pack_parameters(&thetas, &was, &mut params);
        let wc = DVector::from_column_slice(lay.wc(y, i));
        let wa = DVector::from_column_slice(lay.wa(y, i));
        grid.evaluate(&params, &wc, &wa, &lay.gamma_matrix(y, i), self.gains[i].nu)
    }

    /// Agent states and the leader at `t`.
    pub fn snapshot(&self, t: f64, y: &DVector<f64>) -> StateSnapshot {
        let agents = (0..self.n_agents()).map(|i| DVector::from_column_slice(self.layout.x(y, i))).collect();
        StateSnapshot::full(self.game.plant.leader().state(t), agents)
    }
}

/// What a flow evaluation includes beyond the derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowOptions {
    /// Compute the grid Gram metric for the diagnostics.
    pub grid_metric: bool,
    /// Include the recorded-data term of the identifiers; the stepper integrates it separately.
    pub recorded_term: bool,
}

/// Full time derivative of the flat state, with the signals computed on the way.
pub fn network_flow(
    model: &NetworkModel,
    t: f64,
    y: &DVector<f64>,
    discrete: &DiscreteState,
) -> Result<(DVector<f64>, FlowDiagnostics), SimError> {
    network_flow_with(model, t, y, discrete, FlowOptions { grid_metric: true, recorded_term: true })
}

/// Time derivative of the flat state.
///
/// Order: leader, errors and subgraph states, `μ̂` from the actors, the
/// implementable controls, plant, observer and identifier flows, Bellman
/// errors at the state and over the grids, then critic and actor flows.
pub fn network_flow_with(
    model: &NetworkModel,
    t: f64,
    y: &DVector<f64>,
    discrete: &DiscreteState,
    options: FlowOptions,
) -> Result<(DVector<f64>, FlowDiagnostics), SimError> {
    let game = &model.game;
    let plant = &game.plant;
    let lay = &model.layout;
    let n_agents = model.n_agents();
    let plant_err = |source| SimError::Plant { t, source };

    let states = model.snapshot(t, y);
    let thetas: Vec<DMatrix<f64>> = (0..n_agents).map(|i| lay.theta_matrix(y, i)).collect();
    let drift = EstimatedDrift { weights: &thetas, bases: &model.drift_bases };
    let all: Vec<usize> = (0..n_agents).collect();
    let terms = SubgraphTerms::evaluate(game, &states, &all, &drift).map_err(plant_err)?;

    let wc: Vec<DVector<f64>> = (0..n_agents).map(|i| DVector::from_column_slice(lay.wc(y, i))).collect();
    let wa: Vec<DVector<f64>> = (0..n_agents).map(|i| DVector::from_column_slice(lay.wa(y, i))).collect();
    let mut mu_hat = Vec::with_capacity(n_agents);
    for i in 0..n_agents {
        mu_hat.push(Some(policy(game, i, terms.g_sigma_of(i).map_err(plant_err)?, &wa[i])));
    }

    let mut dy = DVector::zeros(lay.len);
    let mut diag = FlowDiagnostics {
        leader: states.leader.clone(),
        errors: Vec::with_capacity(n_agents),
        controls: Vec::with_capacity(n_agents),
        mu_hat: mu_hat.iter().map(|m| m.clone().expect("all agents evaluated")).collect(),
        deltas: Vec::with_capacity(n_agents),
        grid_gram_min: options.grid_metric.then(Vec::new),
    };
    let mut params = DVector::zeros(0);
    for i in 0..n_agents {
        let a = lay.agents[i];
        let gains = &model.gains[i];
        let model_i = plant.model(i);
        let sub = plant.subgraph(i);
        let flow = terms.flows[i].as_ref().expect("all agents evaluated");
        let mu_parts: Vec<&DVector<f64>> =
            sub.ordering.iter().map(|&k| mu_hat[k].as_ref().expect("all agents evaluated")).collect();
        let u_all = flow.controls(&linalg::stack(&mu_parts));
        let u = u_all.rows(0, plant.input_dim(i)).into_owned();
        let x = states.agent(i).map_err(plant_err)?;

        let x_dot = model_i.drift(x) + model_i.effectiveness(x) * &u;
        dy.rows_mut(a.x, a.n).copy_from(&x_dot);

        let obs = StateObserver { estimate: DVector::from_column_slice(lay.xhat(y, i)), gain: gains.k_obs };
        let basis = model.drift_bases[i].as_ref();
        let xhat_dot = observer_flow(&obs, x, &u, &thetas[i], basis, model_i.as_ref());
        dy.rows_mut(a.xhat, a.n).copy_from(&xhat_dot);

        if !model.config.exact_model {
            let est = DriftEstimate { weights: thetas[i].clone(), gain: gains.gamma_theta.clone(), cl_gain: gains.k_theta };
            let stack = (options.recorded_term && discrete.cl_active[i]).then(|| &discrete.stacks[i]);
            let x_tilde = x - &obs.estimate;
            let theta_dot = cl_update_flow(&est, stack, x, &x_tilde, basis);
            dy.rows_mut(a.theta, a.theta_len()).copy_from_slice(theta_dot.as_slice());
        }

        let omega = regressor(game, &terms, i, &mu_hat).map_err(plant_err)?;
        let cost = &game.costs[i];
        let own_error = terms.own_error(i).map_err(plant_err)?;
        let mu_i = mu_hat[i].as_ref().expect("all agents evaluated");
        let delta = omega.dot(&wc[i]) + cost.state_cost(own_error) + cost.control_cost(mu_i);
        let gamma = lay.gamma_matrix(y, i);
        let current = BellmanSample::new(omega, delta, &gamma, gains.nu);

        let grid = &model.prepared[i];
        if params.len() != grid.parameter_len() {
            params = DVector::zeros(grid.parameter_len());
        }
        let theta_slices: Vec<&[f64]> = (0..n_agents).map(|k| lay.theta(y, k)).collect();
        let wa_slices: Vec<&[f64]> = (0..n_agents).map(|k| lay.wa(y, k)).collect();
        grid.pack_parameters(&theta_slices, &wa_slices, &mut params);
        let eval = grid.evaluate(&params, &wc[i], &wa[i], &gamma, gains.nu);
        if let Some(metric) = diag.grid_gram_min.as_mut() {
            let mut gram = DMatrix::zeros(a.l, a.l);
            for k in 0..grid.len() {
                gram.ger(1.0 / eval.rhos[k], &eval.omegas.column(k), &eval.omegas.column(k), 1.0);
            }
            metric.push(if grid.is_empty() { 0.0 } else { linalg::min_sym_eigenvalue(&gram).max(0.0) });
        }

        let critic = CriticState {
            weights: wc[i].clone(),
            gamma,
            gamma_bar: gains.gamma_bar,
            nu: gains.nu,
            eta_c1: gains.eta_c1,
            eta_c2: gains.eta_c2,
            beta: gains.beta,
        };
        let (wc_dot, gamma_dot) = critic_flow_aggregated(&critic, &current, &eval.critic_sum, grid.len());
        let actor = ActorState { weights: wa[i].clone(), eta_a1: gains.eta_a1, eta_a2: gains.eta_a2 };
        let g_sigma = terms.g_sigma_of(i).map_err(plant_err)?;
        let h = g_sigma.transpose() * cost.r_inv() * g_sigma;
        let wa_dot = actor_flow_aggregated(&actor, &critic, &h, &current, &eval.actor_matrix, grid.len());
        dy.rows_mut(a.wc, a.l).copy_from(&wc_dot);
        dy.rows_mut(a.wa, a.l).copy_from(&wa_dot);
        dy.rows_mut(a.gamma, a.l * a.l).copy_from_slice(gamma_dot.as_slice());

        diag.errors.push(own_error.clone());
        diag.controls.push(u);
        diag.deltas.push(delta);
    }
    Ok((dy, diag))
}
