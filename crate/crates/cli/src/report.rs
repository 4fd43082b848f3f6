//! Run summary.

use std::fmt::Write as _;
use std::time::Duration;

use graphgame::sim::TraceLog;

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// `‖x_i - x_di0 - x_0‖` at the last logged time.
    pub final_formation_errors: Vec<f64>,
    /// `max ‖e_i‖` over the last quarter of the horizon.
    pub tail_max_errors: Vec<f64>,
    pub final_theta: Vec<Vec<f64>>,
    /// `(1/M_i) inf_t λ_min(Σ_k ω^k ω^kᵀ / ρ^k)` over logged times.
    pub grid_metric: Vec<f64>,
    /// Final `λ_min` of each history stack Gram matrix.
    pub stack_metric: Vec<f64>,
    pub wall_clock: Duration,
    pub rows: usize,
    pub final_time: f64,
    pub error: Option<String>,
}

impl RunReport {
    pub fn from_log(log: &TraceLog, wall_clock: Duration, error: Option<String>) -> Self {
        let n_agents = log.meta.n_agents;
        let last = log.last();
        let final_time = last.map_or(0.0, |r| r.t);
        let tail_start = 0.75 * final_time;
        let tail_max_errors = (0..n_agents)
            .map(|i| log.since(tail_start).map(|r| r.e[i].norm()).fold(0.0, f64::max))
            .collect();
        Self {
            final_formation_errors: (0..n_agents)
                .map(|i| last.map_or(f64::NAN, |r| r.formation_error(&log.meta, i).norm()))
                .collect(),
            tail_max_errors,
            final_theta: (0..n_agents).map(|i| last.map_or(Vec::new(), |r| r.theta[i].as_slice().to_vec())).collect(),
            grid_metric: log.grid_metric_inf(),
            stack_metric: (0..n_agents).map(|i| last.map_or(f64::NAN, |r| r.stack_metric[i])).collect(),
            wall_clock,
            rows: log.len(),
            final_time,
            error,
        }
    }

    pub fn all_finite(&self) -> bool {
        let scalars = self
            .final_formation_errors
            .iter()
            .chain(&self.tail_max_errors)
            .chain(&self.grid_metric)
            .chain(&self.stack_metric)
            .chain(self.final_theta.iter().flatten());
        scalars.into_iter().all(|v| v.is_finite())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "status: {}", self.error.as_deref().unwrap_or("ok"));
        let _ = writeln!(s, "final_time: {}", self.final_time);
        let _ = writeln!(s, "rows: {}", self.rows);
        let _ = writeln!(s, "wall_clock_s: {:.3}", self.wall_clock.as_secs_f64());
        let _ = writeln!(s, "final_formation_error: {}", list(&self.final_formation_errors));
        let _ = writeln!(s, "tail_max_error: {}", list(&self.tail_max_errors));
        for (i, theta) in self.final_theta.iter().enumerate() {
            let _ = writeln!(s, "theta_{}: {}", i + 1, list(theta));
        }
        let _ = writeln!(s, "grid_metric: {}", list(&self.grid_metric));
        let _ = writeln!(s, "stack_metric: {}", list(&self.stack_metric));
        s
    }
}
