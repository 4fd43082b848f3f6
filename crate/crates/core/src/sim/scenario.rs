//! Named presets and extrapolation-grid construction.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{
    AgentConfig, ConfigError, FillSpec, GridMode, LeaderKind, LeaderSpec, MatrixSpec, ModelSpec, SimConfig,
};
use crate::actor_critic::{ExtrapolationGrid, Game};
use crate::plant::ScalarGain;

pub const SCENARIOS: &[&str] = &["example_1d", "lqr_scalar"];

pub fn preset(name: &str) -> Result<SimConfig, ConfigError> {
    match name {
        "example_1d" => Ok(example_1d()),
        "lqr_scalar" => Ok(lqr_scalar()),
        other => Err(ConfigError::UnknownScenario(other.to_string())),
    }
}

/// Parses a config file; a top-level `scenario = "<name>"` starts from that preset.
pub fn load(text: &str) -> Result<SimConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut config = match table.get("scenario") {
        Some(v) => preset(v.as_str().ok_or_else(|| ConfigError::BadValue {
            key: "scenario".into(),
            reason: "expected a name".into(),
        })?)?,
        None => SimConfig::default(),
    };
    config.apply_text(text)?;
    Ok(config)
}

/// Five scalar agents following an exponentially decaying leader.
pub fn example_1d() -> SimConfig {
    let theta1 = [0.0, 0.0, 0.1, 0.5, 0.2];
    let theta2 = [1.0, 0.5, 1.0, 1.0, 1.0];
    let offsets = [0.75, 0.25, 1.0, 0.5, 0.5];
    let k_theta = [30.0, 30.0, 25.0, 20.0, 30.0];
    let gamma_theta = [1.0, 0.8, 1.0, 1.0, 1.0];
    let bases: [&[&str]; 5] = [
        &["0.5*e1^2", "0.25*e1^4", "0.5*e1^2*x1^2", "0.5*e2^2"],
        &["0.5*e2^2", "0.25*e2^4", "0.5*e2^2*x2^2", "0.5*e1^2"],
        &["0.5*e3^2", "0.25*e3^4", "0.5*e3^2*x3^2", "0.25*e3^4*x3^2"],
        &["0.5*e4^2", "0.25*e4^4", "0.5*e3^2*e4^2", "0.5*e4^2*x4^2", "0.5*e3^2"],
        &[
            "0.5*e5^2",
            "0.25*e5^4",
            "0.5*e4^2*e5^2",
            "0.5*e3^2*e5^2",
            "0.5*e5^2*x5^2",
            "0.5*e3^2*e4^2",
            "0.5*e3^2",
            "0.5*e4^2",
        ],
    ];
    let agents = (0..5)
        .map(|k| AgentConfig {
            model: ModelSpec::ScalarPoly { coeffs: vec![theta1[k], theta2[k]], gain: ScalarGain::CosineBias },
            drift_basis: vec![vec![1], vec![2]],
            offset: FillSpec::Fill(offsets[k]),
            x0: FillSpec::Fill(2.0),
            xhat0: FillSpec::Fill(0.0),
            theta_hat0: FillSpec::Fill(0.0),
            basis: bases[k].iter().map(|s| s.to_string()).collect(),
            wc0: FillSpec::Fill(if k == 4 { 3.0 } else { 1.0 }),
            wa0: FillSpec::Fill(if k == 4 { 3.0 } else { 1.0 }),
            k_theta: k_theta[k],
            gamma_theta: FillSpec::Fill(gamma_theta[k]),
            theta_bound: Some(2.0),
            ..AgentConfig::default()
        })
        .collect();
    SimConfig {
        edges: vec![(0, 1, 1.0), (0, 3, 1.0), (1, 2, 1.0), (2, 1, 1.0), (3, 4, 1.0), (3, 5, 1.0), (4, 5, 1.0)],
        leader: LeaderSpec { kind: LeaderKind::ExponentialDecay, initial: vec![1.0], rate: 0.1, a: None, bound: 10.0 },
        agents,
        ..SimConfig::default()
    }
}

/// One pinned agent `ẋ = x + u` with a quadratic value basis and the exact model.
///
/// The optimal critic weight solves `p²/R - 2p - Q = 0`.
pub fn lqr_scalar() -> SimConfig {
    SimConfig {
        t_final: 20.0,
        exact_model: true,
        edges: vec![(0, 1, 1.0)],
        leader: LeaderSpec { kind: LeaderKind::Static, initial: vec![0.0], rate: 0.0, a: None, bound: 1.0 },
        agents: vec![AgentConfig {
            model: ModelSpec::ScalarPoly { coeffs: vec![1.0], gain: ScalarGain::Constant(1.0) },
            drift_basis: vec![vec![1]],
            x0: FillSpec::Fill(1.0),
            xhat0: FillSpec::Fill(1.0),
            basis: vec!["e1^2".into()],
            q: MatrixSpec::Scaled(10.0),
            r: MatrixSpec::Scaled(0.1),
            wc0: FillSpec::Fill(0.5),
            wa0: FillSpec::Fill(0.5),
            gamma0: MatrixSpec::Scaled(1e3),
            eta_a2: 0.01,
            // x = e with the leader parked at the origin
            grid_points: Some([-1.0, -0.5, 0.5, 1.0].iter().map(|&e| vec![e, e]).collect()),
            ..AgentConfig::default()
        }],
        ..SimConfig::default()
    }
}

/// Extrapolation points for every agent.
///
/// Coordinates of `𝓔_i` are the own error, the other subgraph errors and
/// `x_i`, each scalar component spanning its value list. Cartesian mode takes
/// the product; random mode draws `count` points uniformly from the bounding box.
pub fn build_extrapolation_grids(config: &SimConfig, game: &Game) -> Vec<ExtrapolationGrid> {
    let n = config.state_dim;
    let g = &config.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..game.n_agents())
        .map(|i| {
            if let Some(points) = &config.agents[i].grid_points {
                let points = points.iter().map(|p| nalgebra::DVector::from_column_slice(p)).collect();
                return ExtrapolationGrid { agent: i, points };
            }
            let size = game.plant.subgraph(i).size();
            let mut axes = Vec::with_capacity(n * (size + 1));
            for slot in 0..size {
                let values = if slot == 0 { &g.own_error } else { &g.neighbor_error };
                axes.extend(std::iter::repeat_n(values.clone(), n));
            }
            axes.extend(std::iter::repeat_n(g.own_state.clone(), n));
            match g.mode {
                GridMode::Cartesian => ExtrapolationGrid::cartesian(i, &axes),
                GridMode::Random { count } => {
                    let bounds: Vec<(f64, f64)> = axes
                        .iter()
                        .map(|a| a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v))))
                        .collect();
                    let points = (0..count)
                        .map(|_| {
                            nalgebra::DVector::from_iterator(
                                bounds.len(),
                                bounds.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..hi) } else { lo }),
                            )
                        })
                        .collect();
                    ExtrapolationGrid { agent: i, points }
                }
            }
        })
        .collect()
}
