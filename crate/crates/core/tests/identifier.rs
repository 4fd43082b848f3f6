use graphgame::identifier::{
    DriftBasis, DriftEstimate, HistoryStack, IdentifierError, MonomialBasis, StackEntry, StateObserver,
    cl_update_flow, observer_flow, propagate_recorded_term, sg_derivative, sg_derivative_timed, stack_entry,
};
use graphgame::plant::{ScalarGain, ScalarPolyAgent};
use graphgame::sim::rk4_step;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::convert::Infallible;

fn v(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn entry_with_sigma(sigma: &[f64]) -> StackEntry {
    StackEntry {
        t: 0.0,
        x: v(0.0),
        u: v(0.0),
        xdot: v(0.0),
        sigma: DVector::from_column_slice(sigma),
        gu: v(0.0),
    }
}

#[test]
fn sg_constant_signal_has_zero_derivative() {
    assert!(sg_derivative(&[3.5; 9], 0.01).unwrap().abs() < 1e-12);
}

#[test]
fn sg_reproduces_quintic_derivative() {
    for &(center, dt) in &[(0.0, 0.1), (2.0, 0.001), (-1.3, 0.05)] {
        let samples: Vec<f64> = (0..9).map(|k| (center + (k as f64 - 4.0) * dt).powi(5)).collect();
        let d = sg_derivative(&samples, dt).unwrap();
        let exact: f64 = 5.0 * center.powi(4);
        assert!((d - exact).abs() <= 1e-8 * exact.abs().max(1e-300) || (exact == 0.0 && d.abs() < 1e-12));
    }
}

#[test]
fn sg_sine_derivative() {
    let dt = 0.01;
    let tc: f64 = 0.7;
    let samples: Vec<f64> = (0..9).map(|k| (tc + (k as f64 - 4.0) * dt).sin()).collect();
    assert!((sg_derivative(&samples, dt).unwrap() - tc.cos()).abs() < 1e-6);
}

#[test]
fn sg_rejects_bad_windows() {
    assert!(matches!(sg_derivative(&[0.0; 5], 0.1), Err(IdentifierError::WindowTooShort { .. })));
    assert!(matches!(sg_derivative(&[0.0; 8], 0.1), Err(IdentifierError::EvenWindow(_))));
    let times = [0.0, 0.1, 0.2, 0.35, 0.4, 0.5, 0.6];
    assert!(matches!(sg_derivative_timed(&times, &[0.0; 7]), Err(IdentifierError::NonUniform)));
}

#[test]
fn empty_stack_accepts_anything() {
    let mut stack = HistoryStack::new(3, 2, 1);
    assert!(stack.try_insert_svmax(entry_with_sigma(&[0.0, 0.0])));
    assert_eq!(stack.len(), 1);
}

#[test]
fn full_stack_rejects_duplicate() {
    let mut stack = HistoryStack::new(2, 2, 1);
    stack.try_insert_svmax(entry_with_sigma(&[1.0, 0.0]));
    stack.try_insert_svmax(entry_with_sigma(&[0.0, 1.0]));
    let before = stack.rank_metric();
    assert!(!stack.try_insert_svmax(entry_with_sigma(&[1.0, 0.0])));
    assert_eq!(stack.rank_metric(), before);
}

#[test]
fn orthogonal_candidate_replaces_best_slot() {
    let sigmas = [[1.0, 0.01], [1.0, 0.02], [1.0, -0.01]];
    let mut stack = HistoryStack::new(3, 2, 1);
    for s in &sigmas {
        stack.try_insert_svmax(entry_with_sigma(s));
    }
    let before = stack.rank_metric();
    let candidate = [0.0, 1.0];
    // brute force over all single swaps
    let mut best = before;
    for slot in 0..3 {
        let mut gram = DMatrix::zeros(2, 2);
        for (k, s) in sigmas.iter().enumerate() {
            let s = if k == slot { &candidate } else { s };
            let s = DVector::from_column_slice(s);
            gram += &s * s.transpose();
        }
        best = best.max(gram.symmetric_eigenvalues().min());
    }
    assert!(stack.try_insert_svmax(entry_with_sigma(&candidate)));
    assert!(stack.rank_metric() > before);
    assert!((stack.rank_metric() - best).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rank_metric_never_decreases(points in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..60)) {
        let mut stack = HistoryStack::new(5, 2, 1);
        let mut last = 0.0;
        for (a, b) in points {
            stack.try_insert_svmax(entry_with_sigma(&[a, b]));
            prop_assert!(stack.rank_metric() >= last);
            last = stack.rank_metric();
        }
    }
}

fn synthetic_stack(basis: &MonomialBasis, plant: &ScalarPolyAgent) -> HistoryStack {
    let samples = [-1.0, -0.5, 0.5, 1.0, 1.5, 2.0];
    let mut stack = HistoryStack::new(samples.len(), basis.dim(), 1);
    for (k, &x) in samples.iter().enumerate() {
        let u = v((k as f64).sin());
        let xdot = v(plant.drift_scalar(x) + plant.gain.eval(x) * u[0]);
        stack.try_insert_svmax(stack_entry(k as f64, v(x), u, xdot, basis, plant));
    }
    stack
}

#[test]
fn recorded_data_flow_converges() {
    let basis = MonomialBasis::scalar_powers(&[1, 2]);
    let plant = ScalarPolyAgent::new(vec![0.5, 1.0], ScalarGain::CosineBias);
    let stack = synthetic_stack(&basis, &plant);
    let sigma_min = stack.rank_metric();
    assert!(sigma_min > 0.1);
    let k_theta = 30.0;
    let horizon = 10.0 / (k_theta * sigma_min);
    let dt = 1e-3;
    let template = DriftEstimate { weights: DMatrix::zeros(2, 1), gain: DVector::from_element(2, 1.0), cl_gain: k_theta };
    let flow = |_: f64, y: &DVector<f64>| {
        let est = DriftEstimate { weights: DMatrix::from_column_slice(2, 1, y.as_slice()), ..template.clone() };
        let zero = v(0.0);
        Ok::<_, Infallible>(DVector::from_column_slice(cl_update_flow(&est, Some(&stack), &zero, &zero, &basis).as_slice()))
    };
    let mut y = DVector::zeros(2);
    for k in 0..(horizon / dt).ceil() as usize {
        y = rk4_step(flow, k as f64 * dt, &y, dt).unwrap();
    }
    assert!((y - DVector::from_column_slice(&[0.5, 1.0])).norm() < 1e-3);
}

#[test]
fn exact_recorded_step_matches_fine_integration() {
    let basis = MonomialBasis::scalar_powers(&[1, 2]);
    let plant = ScalarPolyAgent::new(vec![0.5, 1.0], ScalarGain::CosineBias);
    let stack = synthetic_stack(&basis, &plant);
    let est = DriftEstimate {
        weights: DMatrix::from_column_slice(2, 1, &[-0.3, 2.0]),
        gain: DVector::from_column_slice(&[1.0, 0.8]),
        cl_gain: 25.0,
    };
    let h = 0.01;
    let exact = propagate_recorded_term(&est, &stack, h);
    let flow = |_: f64, y: &DVector<f64>| {
        let e = DriftEstimate { weights: DMatrix::from_column_slice(2, 1, y.as_slice()), ..est.clone() };
        let zero = v(0.0);
        Ok::<_, Infallible>(DVector::from_column_slice(cl_update_flow(&e, Some(&stack), &zero, &zero, &basis).as_slice()))
    };
    let mut y = DVector::from_column_slice(est.weights.as_slice());
    let n = 2000;
    for k in 0..n {
        y = rk4_step(flow, k as f64 * h / n as f64, &y, h / n as f64).unwrap();
    }
    assert!((DVector::from_column_slice(exact.as_slice()) - y).norm() < 1e-10);
}

#[test]
fn observer_error_decays_with_exact_weights() {
    let basis = MonomialBasis::scalar_powers(&[1, 2]);
    let plant = ScalarPolyAgent::new(vec![-1.0, 0.2], ScalarGain::CosineBias);
    let theta = DMatrix::from_column_slice(2, 1, &[-1.0, 0.2]);
    let k = 50.0;
    let flow = |t: f64, y: &DVector<f64>| {
        let x = v(y[0]);
        let u = v(t.sin());
        let obs = StateObserver { estimate: v(y[1]), gain: k };
        let x_dot = graphgame::plant::AgentModel::drift(&plant, &x) + graphgame::plant::AgentModel::effectiveness(&plant, &x) * &u;
        let xhat_dot = observer_flow(&obs, &x, &u, &theta, &basis, &plant);
        Ok::<_, Infallible>(DVector::from_column_slice(&[x_dot[0], xhat_dot[0]]))
    };
    let dt = 1e-3;
    let mut y = DVector::from_column_slice(&[1.0, 0.0]);
    for step in 0..500 {
        y = rk4_step(flow, step as f64 * dt, &y, dt).unwrap();
        let t = (step + 1) as f64 * dt;
        assert!((y[0] - y[1]).abs() <= (-k * t).exp() + 1e-6);
    }
}

#[test]
fn stack_csv_columns() {
    let basis = MonomialBasis::scalar_powers(&[1, 2]);
    let plant = ScalarPolyAgent::new(vec![0.5, 1.0], ScalarGain::Constant(1.0));
    let stack = synthetic_stack(&basis, &plant);
    let mut buf = Vec::new();
    stack.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,u,xdot_est"));
    assert_eq!(lines.count(), 6);
}
