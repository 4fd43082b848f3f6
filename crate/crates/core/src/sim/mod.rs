//! Deterministic fixed-step simulation of the full learning network.

mod config;
mod flow;
mod integrate;
mod run;
mod scenario;
mod trace;

use thiserror::Error;

use crate::plant::PlantError;

pub use config::{
    AgentConfig, BuiltScenario, ConfigError, FillSpec, GridMode, GridSpec, LeaderKind, LeaderSpec, MatrixSpec, ModelSpec,
    SimConfig,
};
pub use flow::{
    AgentGains, AgentLayout, DiscreteState, FlowDiagnostics, FlowOptions, NetworkModel, SimState, StateLayout, network_flow,
    network_flow_with,
};
pub use integrate::{rk4_step, rk4_step_from};
pub use run::{RunOutcome, run, run_model};
pub use scenario::{SCENARIOS, build_extrapolation_grids, example_1d, load, lqr_scalar, preset};
pub use trace::{TraceLog, TraceMeta, TraceRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("at t = {t}: {source}")]
    Plant { t: f64, source: PlantError },
    #[error("at t = {t}: non-finite {what}")]
    NonFinite { t: f64, what: String },
}

impl SimError {
    /// True for failures that happen while integrating rather than while configuring.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, SimError::Config(_))
    }
}
