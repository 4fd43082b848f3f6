//! The stepping loop.

use nalgebra::DVector;

use super::flow::{FlowDiagnostics, FlowOptions, NetworkModel, SimState, network_flow_with};
use super::integrate::rk4_step_from;
use super::trace::{TraceLog, TraceMeta, TraceRow};
use super::{SimConfig, SimError};
use crate::identifier::{DriftEstimate, propagate_recorded_term, stack_entry};

/// Result of a run. On abort `error` is set and `log` holds the rows up to it.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: TraceLog,
    pub final_state: SimState,
    pub error: Option<SimError>,
}

/// Builds the model and integrates it; configuration errors are returned directly.
pub fn run(config: &SimConfig) -> Result<RunOutcome, SimError> {
    let model = NetworkModel::new(config)?;
    run_model(&model)
}

pub fn run_model(model: &NetworkModel) -> Result<RunOutcome, SimError> {
    let cfg = &model.config;
    let steps = cfg.steps();
    let mut state = model.initial_state()?;
    let mut log = TraceLog { meta: meta(model), rows: Vec::with_capacity(steps / cfg.decimate + 1) };

    let mut error = None;
    for step in 0..steps {
        let t = step as f64 * cfg.dt;
        match step_once(model, &mut state, t, step % cfg.decimate == 0) {
            Ok(Some(row)) => log.rows.push(row),
            Ok(None) => {}
            Err(e) => {
                log::warn!("run aborted: {e}");
                error = Some(e);
                break;
            }
        }
    }
    if error.is_none() && steps > 0 && steps % cfg.decimate == 0 {
        match network_flow_with(model, state.t, &state.y, &state.discrete, LOG_ONLY) {
            Ok((_, diag)) => log.rows.push(row(model, &state, &diag)),
            Err(e) => error = Some(e),
        }
    }
    Ok(RunOutcome { log, final_state: state, error })
}

const LOG_ONLY: FlowOptions = FlowOptions { grid_metric: true, recorded_term: false };
const STAGE: FlowOptions = FlowOptions { grid_metric: false, recorded_term: false };

/// One step from `t`, followed by the discrete updates: derivative windows,
/// stack insertion, rank gates and the projection of `Γ`.
///
/// The recorded-data term of the identifiers is linear in `θ̂` with constant
/// coefficients over a step and typically far stiffer than the rest, so it is
/// solved exactly in two half steps around an RK4 step of the remaining flow.
fn step_once(model: &NetworkModel, state: &mut SimState, t: f64, log_now: bool) -> Result<Option<TraceRow>, SimError> {
    let cfg = &model.config;
    let lay = &model.layout;
    let options = FlowOptions { grid_metric: log_now, recorded_term: false };
    let (k1, diag) = network_flow_with(model, t, &state.y, &state.discrete, options)?;
    let logged = log_now.then(|| row(model, state, &diag));

    let discrete = &state.discrete;
    let stage = |s, ys: &DVector<f64>| network_flow_with(model, s, ys, discrete, STAGE).map(|r| r.0);
    let split = !cfg.exact_model && discrete.cl_active.iter().any(|a| *a);
    let y_next = if split {
        let half = recorded_half_step(model, &state.y, discrete, 0.5 * cfg.dt);
        let k1 = stage(t, &half)?;
        let full = rk4_step_from(stage, t, &half, &k1, cfg.dt)?;
        recorded_half_step(model, &full, discrete, 0.5 * cfg.dt)
    } else {
        rk4_step_from(stage, t, &state.y, &k1, cfg.dt)?
    };
    let t_next = t + cfg.dt;
    if let Some(bad) = y_next.iter().position(|v| !v.is_finite()) {
        return Err(SimError::NonFinite { t: t_next, what: describe_slot(model, bad) });
    }

    if !cfg.exact_model {
        for i in 0..model.n_agents() {
            let x = DVector::from_column_slice(lay.x(&state.y, i));
            let d = &mut state.discrete;
            if let Some((tc, xc, uc, xdot)) = d.windows[i].push(t, x, diag.controls[i].clone()) {
                let entry = stack_entry(tc, xc, uc, xdot, model.drift_bases[i].as_ref(), model.game.plant.model(i).as_ref());
                d.stacks[i].try_insert_svmax(entry);
                if !d.cl_active[i] && d.stacks[i].rank_metric() > cfg.rank_threshold {
                    d.cl_active[i] = true;
                    log::debug!("agent {}: recorded-data term enabled at t = {tc:.3}", i + 1);
                }
            }
        }
    }

    state.y = y_next;
    state.t = t_next;
    for (i, gains) in model.gains.iter().enumerate() {
        let a = lay.agents[i];
        let mut gamma = state.y.rows_mut(a.gamma, a.l * a.l);
        let norm = gamma.norm();
        if norm > gains.gamma_limit {
            gamma *= gains.gamma_limit / norm;
        }
    }
    Ok(logged)
}

fn recorded_half_step(model: &NetworkModel, y: &DVector<f64>, discrete: &super::DiscreteState, h: f64) -> DVector<f64> {
    let lay = &model.layout;
    let mut out = y.clone();
    for (i, gains) in model.gains.iter().enumerate() {
        if !discrete.cl_active[i] {
            continue;
        }
        let est = DriftEstimate { weights: lay.theta_matrix(y, i), gain: gains.gamma_theta.clone(), cl_gain: gains.k_theta };
        let theta = propagate_recorded_term(&est, &discrete.stacks[i], h);
        let a = lay.agents[i];
        out.rows_mut(a.theta, a.theta_len()).copy_from_slice(theta.as_slice());
    }
    out
}

fn describe_slot(model: &NetworkModel, index: usize) -> String {
    for (i, a) in model.layout.agents.iter().enumerate() {
        if index < a.end() {
            let what = if index < a.xhat {
                "state"
            } else if index < a.theta {
                "observer state"
            } else if index < a.wc {
                "identifier weight"
            } else if index < a.wa {
                "critic weight"
            } else if index < a.gamma {
                "actor weight"
            } else {
                "critic gain"
            };
            return format!("{what} of agent {}", i + 1);
        }
    }
    "state entry".into()
}

fn meta(model: &NetworkModel) -> TraceMeta {
    let plant = &model.game.plant;
    let n_agents = model.n_agents();
    TraceMeta {
        n_agents,
        state_dim: plant.state_dim(),
        input_dims: (0..n_agents).map(|i| plant.input_dim(i)).collect(),
        basis_lens: model.layout.agents.iter().map(|a| a.l).collect(),
        theta_lens: model.layout.agents.iter().map(|a| a.theta_len()).collect(),
        true_theta: model.true_theta.clone(),
        offsets: plant.formation().offsets.clone(),
        grid_sizes: model.prepared.iter().map(|g| g.len()).collect(),
        dt: model.config.dt,
        decimate: model.config.decimate,
        t_final: model.config.t_final,
    }
}

fn row(model: &NetworkModel, state: &SimState, diag: &FlowDiagnostics) -> TraceRow {
    let lay = &model.layout;
    let y = &state.y;
    let n_agents = model.n_agents();
    let per_agent = |f: fn(&super::StateLayout, &DVector<f64>, usize) -> DVector<f64>| {
        (0..n_agents).map(|i| f(lay, y, i)).collect::<Vec<_>>()
    };
    let grid_metric = match &diag.grid_gram_min {
        Some(m) => m.iter().zip(&model.prepared).map(|(v, g)| if g.is_empty() { 0.0 } else { v / g.len() as f64 }).collect(),
        None => vec![f64::NAN; n_agents],
    };
    TraceRow {
        t: state.t,
        leader: diag.leader.clone(),
        x: per_agent(|l, y, i| DVector::from_column_slice(l.x(y, i))),
        e: diag.errors.clone(),
        u: diag.controls.clone(),
        mu: diag.mu_hat.clone(),
        wc: per_agent(|l, y, i| DVector::from_column_slice(l.wc(y, i))),
        wa: per_agent(|l, y, i| DVector::from_column_slice(l.wa(y, i))),
        theta: per_agent(|l, y, i| DVector::from_column_slice(l.theta(y, i))),
        delta: diag.deltas.clone(),
        gamma_norm: (0..n_agents).map(|i| DVector::from_column_slice(lay.gamma(y, i)).norm()).collect(),
        stack_metric: state.discrete.stacks.iter().map(|s| s.rank_metric()).collect(),
        grid_metric,
    }
}
