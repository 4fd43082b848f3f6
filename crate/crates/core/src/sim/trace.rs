//! Recorded signals of a run.

use nalgebra::{DMatrix, DVector};

/// Sizes and fixed reference data of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub n_agents: usize,
    pub state_dim: usize,
    pub input_dims: Vec<usize>,
    pub basis_lens: Vec<usize>,
    /// Entries of each `θ̂_i` (column-major `P × n`).
    pub theta_lens: Vec<usize>,
    pub true_theta: Vec<Option<DMatrix<f64>>>,
    pub offsets: Vec<DVector<f64>>,
    pub grid_sizes: Vec<usize>,
    pub dt: f64,
    pub decimate: usize,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub leader: DVector<f64>,
    pub x: Vec<DVector<f64>>,
    pub e: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub mu: Vec<DVector<f64>>,
    pub wc: Vec<DVector<f64>>,
    pub wa: Vec<DVector<f64>>,
    pub theta: Vec<DVector<f64>>,
    pub delta: Vec<f64>,
    pub gamma_norm: Vec<f64>,
    /// Stack rank metric `λ_min(Σ σσᵀ)`.
    pub stack_metric: Vec<f64>,
    /// `λ_min(Σ_k ω^k ω^kᵀ / ρ^k) / M_i`.
    pub grid_metric: Vec<f64>,
}

impl TraceRow {
    /// `x_i - x_di0 - x_0`.
    pub fn formation_error(&self, meta: &TraceMeta, i: usize) -> DVector<f64> {
        &self.x[i] - &meta.offsets[i] - &self.leader
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

impl TraceLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Rows with `t >= from`.
    pub fn since(&self, from: f64) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.t >= from - 1e-9)
    }

    /// `inf_t` of the grid metric per agent.
    pub fn grid_metric_inf(&self) -> Vec<f64> {
        (0..self.meta.n_agents)
            .map(|i| self.rows.iter().map(|r| r.grid_metric[i]).fold(f64::INFINITY, f64::min))
            .collect()
    }
}
