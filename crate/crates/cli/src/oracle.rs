//! Built-in self checks against closed-form answers.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use graphgame::identifier::{
    DriftBasis, DriftEstimate, HistoryStack, MonomialBasis, cl_update_flow, sg_derivative, stack_entry,
};
use graphgame::plant::{ScalarGain, ScalarPolyAgent};
use graphgame::sim::{ModelSpec, NetworkModel, lqr_scalar, rk4_step, run_model};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl OracleCheck {
    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn run_all() -> Vec<OracleCheck> {
    vec![riccati(), identifier(), savitzky_golay()]
}

/// Scalar LQR preset: the critic weight against `p = Rθ + sqrt(R²θ² + QR)` and
/// the Bellman error over the grid at the end of the run.
pub fn riccati() -> OracleCheck {
    let name = "riccati";
    let start = Instant::now();
    let config = lqr_scalar();
    let fail = |detail: String| OracleCheck { name, passed: false, detail };
    let (theta, q, r) = match (&config.agents[0].model, &config.agents[0].q, &config.agents[0].r) {
        (ModelSpec::ScalarPoly { coeffs, .. }, q, r) => {
            let q = q.resolve(1, "q").map(|m| m[(0, 0)]);
            let r = r.resolve(1, "r").map(|m| m[(0, 0)]);
            match (q, r) {
                (Ok(q), Ok(r)) => (coeffs[0], q, r),
                _ => return fail("preset costs are not scalar".into()),
            }
        }
        _ => return fail("preset is not a scalar polynomial agent".into()),
    };
    let p = r * theta + (r * r * theta * theta + q * r).sqrt();
    let model = match NetworkModel::new(&config) {
        Ok(m) => m,
        Err(e) => return fail(e.to_string()),
    };
    let outcome = match run_model(&model) {
        Ok(o) => o,
        Err(e) => return fail(e.to_string()),
    };
    if let Some(e) = outcome.error {
        return fail(e.to_string());
    }
    let wc = model.layout.wc(&outcome.final_state.y, 0)[0];
    let eval = model.grid_evaluation(0, &outcome.final_state.y);
    let max_delta = eval.deltas.amax();
    let rel = (wc - p).abs() / p;
    let elapsed = start.elapsed().as_secs_f64();
    OracleCheck {
        name,
        passed: rel < 0.05 && max_delta < 1e-4,
        detail: format!("Wc = {wc:.6}, p = {p:.6}, rel err {rel:.2e}, max |delta| on grid {max_delta:.2e}, {elapsed:.2}s"),
    }
}

/// Recorded-data flow alone on a synthetic stack for `f(x) = 0.5x + x²`.
pub fn identifier() -> OracleCheck {
    let name = "identifier";
    let basis = MonomialBasis::scalar_powers(&[1, 2]);
    let truth = DMatrix::from_column_slice(2, 1, &[0.5, 1.0]);
    let plant = ScalarPolyAgent::new(vec![0.5, 1.0], ScalarGain::Constant(1.0));
    let samples = [-1.0, -0.5, 0.5, 1.0, 1.5, 2.0];
    let mut stack = HistoryStack::new(samples.len(), basis.dim(), 1);
    for (k, &x) in samples.iter().enumerate() {
        let x = DVector::from_element(1, x);
        let u = DVector::from_element(1, 0.3 * k as f64);
        let xdot = DVector::from_element(1, plant.drift_scalar(x[0]) + u[0]);
        stack.try_insert_svmax(stack_entry(k as f64, x, u, xdot, &basis, &plant));
    }
    let sigma_min = stack.rank_metric();
    let k_theta = 30.0;
    let horizon = 10.0 / (k_theta * sigma_min);
    let dt = 1e-3;
    let steps = (horizon / dt).ceil() as usize;
    let x = DVector::zeros(1);
    let mut est = DriftEstimate { weights: DMatrix::zeros(2, 1), gain: DVector::from_element(2, 1.0), cl_gain: k_theta };
    for step in 0..steps {
        let y = DVector::from_column_slice(est.weights.as_slice());
        let next = rk4_step(
            |_, y: &DVector<f64>| {
                let e = DriftEstimate { weights: DMatrix::from_column_slice(2, 1, y.as_slice()), ..est.clone() };
                Ok::<_, std::convert::Infallible>(DVector::from_column_slice(
                    cl_update_flow(&e, Some(&stack), &x, &x, &basis).as_slice(),
                ))
            },
            step as f64 * dt,
            &y,
            dt,
        )
        .expect("infallible");
        est.weights = DMatrix::from_column_slice(2, 1, next.as_slice());
    }
    let err = (&est.weights - &truth).norm();
    OracleCheck {
        name,
        passed: sigma_min > 0.1 && err < 1e-3,
        detail: format!("stack metric {sigma_min:.3}, horizon {horizon:.3}s, |theta error| {err:.2e}"),
    }
}

/// Degree-5 polynomials are differentiated exactly at the window center.
pub fn savitzky_golay() -> OracleCheck {
    let name = "savitzky-golay";
    let mut worst: f64 = 0.0;
    for (window, dt, center) in [(7usize, 0.1, 0.7), (9, 0.01, 1.3), (11, 0.05, -0.4)] {
        let half = (window / 2) as f64;
        let samples: Vec<f64> = (0..window).map(|k| (center + (k as f64 - half) * dt).powi(5)).collect();
        match sg_derivative(&samples, dt) {
            Ok(d) => {
                let exact = 5.0 * center.powi(4);
                worst = worst.max((d - exact).abs() / exact.abs());
            }
            Err(e) => return OracleCheck { name, passed: false, detail: e.to_string() },
        }
    }
    OracleCheck { name, passed: worst <= 1e-8, detail: format!("max relative error {worst:.2e} on t^5") }
}
