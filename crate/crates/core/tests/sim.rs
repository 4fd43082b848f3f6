use graphgame::sim::{
    ConfigError, NetworkModel, SimConfig, SimError, build_extrapolation_grids, example_1d, load, lqr_scalar,
    network_flow, preset, rk4_step, run,
};
use nalgebra::DVector;
use std::convert::Infallible;

const RICCATI_P: f64 = 1.104987562112089;

fn short(mut config: SimConfig, t_final: f64) -> SimConfig {
    config.t_final = t_final;
    config
}

#[test]
fn leader_trajectory() {
    let plant = example_1d().build().unwrap().game.plant;
    assert_eq!(plant.leader().state(0.0)[0], 1.0);
    assert!((plant.leader().state(10.0)[0] - 0.36787944117144233).abs() < 1e-15);
}

#[test]
fn default_grid_sizes() {
    let config = example_1d();
    let game = config.build().unwrap().game;
    let sizes: Vec<usize> = build_extrapolation_grids(&config, &game).iter().map(|g| g.len()).collect();
    assert_eq!(sizes, vec![45, 45, 15, 45, 135]);
}

#[test]
fn single_value_axes_give_one_point() {
    let mut config = example_1d();
    config.grid.own_error = vec![0.0];
    config.grid.neighbor_error = vec![0.0];
    config.grid.own_state = vec![1.0];
    let game = config.build().unwrap().game;
    for grid in build_extrapolation_grids(&config, &game) {
        assert_eq!(grid.len(), 1);
        let p = &grid.points[0];
        assert_eq!(p[p.len() - 1], 1.0);
        assert!(p.rows(0, p.len() - 1).iter().all(|v| *v == 0.0));
    }
}

#[test]
fn random_grids_are_seeded() {
    let text = "scenario = \"example_1d\"\n[grid]\nmode = \"random\"\ncount = 7\n";
    let a = load(text).unwrap();
    let game = a.build().unwrap().game;
    let first = build_extrapolation_grids(&a, &game);
    let second = build_extrapolation_grids(&a, &game);
    assert_eq!(first, second);
    assert!(first.iter().all(|g| g.len() == 7));
    let mut other = a.clone();
    other.seed = 1;
    assert_ne!(first, build_extrapolation_grids(&other, &game));
}

#[test]
fn config_overrides() {
    let text = r#"
scenario = "example_1d"
[sim]
dt = 0.002
t_final = 1.0
[agent.default]
q = 4.0
[agent.3]
x0 = -1.0
"#;
    let config = load(text).unwrap();
    assert_eq!(config.dt, 0.002);
    assert_eq!(config.steps(), 500);
    assert_eq!(config.n_agents(), 5);
    let built = config.build().unwrap();
    assert_eq!(built.game.costs[0].q()[(0, 0)], 4.0);
    let model = NetworkModel::new(&config).unwrap();
    let state = model.initial_state().unwrap();
    assert_eq!(model.layout.x(&state.y, 2), &[-1.0]);
    assert_eq!(model.layout.x(&state.y, 1), &[2.0]);
}

#[test]
fn config_errors() {
    assert!(matches!(load("[sim]\nbogus = 1\n"), Err(ConfigError::UnknownKey(_))));
    assert!(matches!(load("scenario = \"nope\"\n"), Err(ConfigError::UnknownScenario(_))));
    assert!(matches!(load("[sim\n"), Err(ConfigError::Syntax(_))));
    assert!(matches!(preset("missing"), Err(ConfigError::UnknownScenario(_))));

    let mut config = example_1d();
    config.dt = 0.0;
    let err = config.build().unwrap_err();
    assert!(err.to_string().contains("dt must be positive"), "{err}");

    let mut config = example_1d();
    config.t_final = 0.5 * config.dt;
    assert!(config.build().unwrap_err().to_string().contains("t_final"));

    let mut config = example_1d();
    config.edges.retain(|e| e.0 != 0);
    assert_eq!(config.build().unwrap_err(), ConfigError::NoSpanningTree);

    let mut config = example_1d();
    config.agents[1].basis = vec!["e5^2".into()];
    assert!(matches!(config.build(), Err(ConfigError::Basis { agent: 2, .. })));
}

#[test]
fn zero_horizon_logs_initial_conditions() {
    let mut config = example_1d();
    config.t_final = config.dt;
    let outcome = run(&config).unwrap();
    assert!(outcome.error.is_none());
    assert_eq!(outcome.log.len(), 1);
    let row = &outcome.log.rows[0];
    assert_eq!(row.t, 0.0);
    assert!(row.x.iter().all(|x| x[0] == 2.0));
    let expected = [-0.25, 0.5, 0.0, 0.5, 0.5];
    for (e, want) in row.e.iter().zip(expected) {
        assert!((e[0] - want).abs() < 1e-12);
    }
    assert!(row.theta.iter().all(|t| t.iter().all(|v| *v == 0.0)));
}

#[test]
fn row_count_follows_decimation() {
    for (t_final, decimate, rows) in [(0.1, 10, 11), (0.105, 10, 11), (0.1, 7, 15), (0.1, 1, 101)] {
        let mut config = short(lqr_scalar(), t_final);
        config.dt = 1e-3;
        config.decimate = decimate;
        let log = run(&config).unwrap().log;
        assert_eq!(log.len(), rows, "t_final {t_final}, decimate {decimate}");
    }
}

fn lqr_model_at_riccati() -> (NetworkModel, graphgame::sim::SimState) {
    let model = NetworkModel::new(&lqr_scalar()).unwrap();
    let mut state = model.initial_state().unwrap();
    let a = model.layout.agents[0];
    state.y[a.wc] = RICCATI_P;
    state.y[a.wa] = RICCATI_P;
    (model, state)
}

#[test]
fn lqr_closed_loop_rate() {
    let (model, mut state) = lqr_model_at_riccati();
    let x = model.layout.agents[0].x;
    for x0 in [-1.5, 0.3, 2.0] {
        state.y[x] = x0;
        let (dy, diag) = network_flow(&model, 0.0, &state.y, &state.discrete).unwrap();
        let want = (1.0 - RICCATI_P / 0.1) * x0;
        assert!((dy[x] - want).abs() < 1e-8 * want.abs().max(1.0));
        assert!(diag.deltas[0].abs() < 1e-10);
    }
}

#[test]
fn rk4_converges_at_fourth_order_on_closed_loop() {
    let (model, state) = lqr_model_at_riccati();
    let x = model.layout.agents[0].x;
    let flow = |t: f64, z: &DVector<f64>| {
        let mut y = state.y.clone();
        y[x] = z[0];
        let (dy, _) = network_flow(&model, t, &y, &state.discrete).unwrap();
        Ok::<_, Infallible>(DVector::from_element(1, dy[x]))
    };
    let horizon = 0.4;
    let rate = 1.0 - RICCATI_P / 0.1;
    let exact = (rate * horizon).exp();
    let err = |dt: f64| {
        let mut z = DVector::from_element(1, 1.0);
        let steps = (horizon / dt).round() as usize;
        for k in 0..steps {
            z = rk4_step(flow, k as f64 * dt, &z, dt).unwrap();
        }
        (z[0] - exact).abs()
    };
    let ratio = err(0.02) / err(0.01);
    assert!(ratio >= 14.0, "ratio {ratio}");
}

#[test]
fn first_step_of_example_is_finite() {
    let model = NetworkModel::new(&example_1d()).unwrap();
    let state = model.initial_state().unwrap();
    let (dy, diag) = network_flow(&model, 0.0, &state.y, &state.discrete).unwrap();
    assert_eq!(dy.len(), model.layout.len);
    assert!(dy.iter().all(|v| v.is_finite()));
    assert!(diag.controls.iter().all(|u| u.iter().all(|v| v.is_finite())));
    assert_eq!(diag.grid_gram_min.as_ref().map(|g| g.len()), Some(5));
}

#[test]
fn runs_are_deterministic() {
    let config = short(example_1d(), 0.3);
    let a = run(&config).unwrap();
    let b = run(&config).unwrap();
    assert!(a.error.is_none());
    assert_eq!(a.log, b.log);
    assert_eq!(a.final_state.y, b.final_state.y);
}

#[test]
fn critic_gain_stays_within_its_limit() {
    let mut config = short(example_1d(), 2.0);
    for a in &mut config.agents {
        a.gamma_bar = 600.0;
    }
    let model = NetworkModel::new(&config).unwrap();
    let log = graphgame::sim::run_model(&model).unwrap().log;
    for row in &log.rows {
        for (i, g) in row.gamma_norm.iter().enumerate() {
            assert!(*g <= model.gains[i].gamma_limit * (1.0 + 1e-12), "agent {}: {g}", i + 1);
        }
    }
}

#[test]
fn non_finite_initial_state_is_reported() {
    let mut config = short(lqr_scalar(), 0.01);
    config.agents[0].x0 = graphgame::sim::FillSpec::Fill(f64::NAN);
    let outcome = run(&config).unwrap();
    match outcome.error {
        Some(e @ SimError::NonFinite { .. }) => assert!(e.is_numerical()),
        other => panic!("expected a non-finite error, got {other:?}"),
    }
}
