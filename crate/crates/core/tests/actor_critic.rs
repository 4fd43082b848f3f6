use graphgame::actor_critic::{
    BasisError, BellmanSample, CriticState, Game, PreparedGrid, SubgraphTerms, ValueBasis, bellman_error,
    critic_flow, evaluate_bellman, grid_rank_metric, hj_residual_exact, omega_gram_metric, regressor,
};
use graphgame::netgraph::SubgraphIndex;
use graphgame::plant::{SubgraphState, TrueDrift, recover_states};
use graphgame::sim::{BuiltScenario, build_extrapolation_grids, example_1d, lqr_scalar};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn built() -> BuiltScenario {
    example_1d().build().unwrap()
}

fn point(game: &Game, i: usize, raw: &[f64]) -> DVector<f64> {
    let len = game.bases[i].input_dim();
    DVector::from_iterator(len, raw.iter().cycle().copied().take(len))
}

fn true_thetas(b: &BuiltScenario) -> Vec<DMatrix<f64>> {
    b.true_theta.iter().map(|t| t.clone().unwrap()).collect()
}

fn weights(game: &Game, value: f64) -> Vec<DVector<f64>> {
    game.bases.iter().map(|b| DVector::from_element(b.len(), value)).collect()
}

#[test]
fn basis_grammar_errors() {
    let sub = SubgraphIndex { agent: 1, ordering: vec![1, 0] };
    assert!(matches!(ValueBasis::parse::<&str>(&[], &sub, 1), Err(BasisError::Empty)));
    assert!(matches!(ValueBasis::parse(&["e4^2"], &sub, 1), Err(BasisError::UnknownVariable { .. })));
    assert!(matches!(ValueBasis::parse(&["x1"], &sub, 1), Err(BasisError::UnknownVariable { .. })));
    assert!(matches!(ValueBasis::parse(&["e0^2"], &sub, 1), Err(BasisError::UnknownVariable { .. })));
    assert!(matches!(ValueBasis::parse(&["e2^x"], &sub, 1), Err(BasisError::Parse { .. })));
    assert!(matches!(ValueBasis::parse(&["e2[2]"], &sub, 1), Err(BasisError::Parse { .. })));
    assert!(matches!(ValueBasis::parse(&["e2**e1"], &sub, 1), Err(BasisError::Parse { .. })));
    let ok = ValueBasis::parse(&["e2*e1", "3*x2^2", "e2^0"], &sub, 1).unwrap();
    assert_eq!(ok.len(), 3);
    let z = DVector::from_column_slice(&[2.0, -1.0, 0.5]);
    assert_eq!(ok.eval(&z).as_slice(), &[-2.0, 0.75, 1.0]);
}

#[test]
fn basis_jacobian_matches_finite_differences() {
    let b = built();
    let raw = [0.3, -0.7, 1.1, 0.45, -0.2, 0.9];
    for i in 0..b.game.n_agents() {
        let basis = &b.game.bases[i];
        let z = point(&b.game, i, &raw);
        let jac = basis.jacobian(&z);
        let h = 1e-6;
        let mut fd = DMatrix::zeros(basis.len(), z.len());
        for c in 0..z.len() {
            let mut up = z.clone();
            let mut down = z.clone();
            up[c] += h;
            down[c] -= h;
            fd.set_column(c, &((basis.eval(&up) - basis.eval(&down)) / (2.0 * h)));
        }
        let rel = (&jac - &fd).norm() / jac.norm();
        assert!(rel < 1e-6, "agent {}: relative error {rel}", i + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_identifier_gives_exact_bellman_error(
        agent in 0usize..5,
        raw in proptest::collection::vec(-1.5f64..1.5, 6),
        wc in -2.0f64..2.0,
        wa in -2.0f64..2.0,
    ) {
        let b = built();
        let game = &b.game;
        let sub = SubgraphState::from_vector(&game.plant, agent, &point(game, agent, &raw)).unwrap();
        let wc = DVector::from_element(game.bases[agent].len(), wc);
        let was = weights(game, wa);
        let est = bellman_error(game, &sub, &wc, &was, &true_thetas(&b), &b.drift_bases).unwrap();
        let exact = hj_residual_exact(game, &sub, &wc, &was).unwrap();
        prop_assert!((est - exact).abs() <= 1e-12 * exact.abs().max(1.0));
    }
}

#[test]
fn prepared_grid_matches_direct_evaluation() {
    let b = built();
    let config = example_1d();
    let grids = build_extrapolation_grids(&config, &b.game);
    let thetas: Vec<DMatrix<f64>> =
        true_thetas(&b).iter().map(|t| t.map(|v| 0.7 * v - 0.1)).collect();
    let was: Vec<DVector<f64>> =
        b.game.bases.iter().map(|basis| DVector::from_fn(basis.len(), |k, _| 0.4 + 0.3 * k as f64)).collect();
    let theta_slices: Vec<&[f64]> = thetas.iter().map(|t| t.as_slice()).collect();
    let wa_slices: Vec<&[f64]> = was.iter().map(|w| w.as_slice()).collect();
    let drift = graphgame::identifier::EstimatedDrift { weights: &thetas, bases: &b.drift_bases };
    for grid in &grids {
        let i = grid.agent;
        let prepared = PreparedGrid::prepare(&b.game, grid, &b.drift_bases).unwrap();
        assert_eq!(prepared.len(), grid.len());
        let mut params = DVector::zeros(prepared.parameter_len());
        prepared.pack_parameters(&theta_slices, &wa_slices, &mut params);
        let wc = DVector::from_element(b.game.bases[i].len(), 1.3);
        let gamma = DMatrix::identity(wc.len(), wc.len()) * 5.0;
        let eval = prepared.evaluate(&params, &wc, &was[i], &gamma, 0.005);
        for (k, p) in grid.points.iter().enumerate() {
            let sub = SubgraphState::from_vector(&b.game.plant, i, p).unwrap();
            let direct = evaluate_bellman(&b.game, &sub, &wc, &was, &drift).unwrap();
            let scale = direct.omega.norm().max(1.0);
            assert!((eval.omegas.column(k) - &direct.omega).norm() < 1e-10 * scale, "agent {} point {k}", i + 1);
            assert!((eval.deltas[k] - direct.delta).abs() < 1e-10 * direct.delta.abs().max(1.0));
        }
    }
}

#[test]
fn g_sigma_is_the_sensitivity_of_the_regressor_to_own_policy() {
    let b = built();
    let game = &b.game;
    let raw = [0.4, -0.3, 0.8, 1.2, -0.6, 0.25];
    let was = weights(game, 0.6);
    for i in 0..game.n_agents() {
        let sub = SubgraphState::from_vector(&game.plant, i, &point(game, i, &raw)).unwrap();
        let states = recover_states(&game.plant, &sub).unwrap();
        let members = game.plant.subgraph(i).ordering.clone();
        let terms = SubgraphTerms::evaluate(game, &states, &members, &TrueDrift(&game.plant)).unwrap();
        let mut mu: Vec<Option<DVector<f64>>> = vec![None; game.n_agents()];
        for &k in &members {
            mu[k] = Some(graphgame::actor_critic::policy(game, k, terms.g_sigma_of(k).unwrap(), &was[k]));
        }
        let base = regressor(game, &terms, i, &mu).unwrap();
        let mut bumped = mu.clone();
        let eps = 0.25;
        bumped[i].as_mut().unwrap()[0] += eps;
        let moved = regressor(game, &terms, i, &bumped).unwrap();
        let g = terms.g_sigma_of(i).unwrap();
        let expected = g.row(0).transpose() * eps;
        assert!((moved - base - &expected).norm() < 1e-12 * expected.norm().max(1.0), "agent {}", i + 1);
    }
}

#[test]
fn scalar_riccati_weights_zero_the_bellman_error() {
    let b = lqr_scalar().build().unwrap();
    let p = 1.104987562112089;
    let wc = DVector::from_element(1, p);
    let wa = vec![wc.clone()];
    for e in [-2.0, -0.3, 0.1, 0.7, 1.9] {
        let sub = SubgraphState::from_vector(&b.game.plant, 0, &DVector::from_column_slice(&[e, e])).unwrap();
        let delta = hj_residual_exact(&b.game, &sub, &wc, &wa).unwrap();
        assert!(delta.abs() < 1e-12 * (1.0 + e * e), "e = {e}: delta = {delta}");
    }
}

#[test]
fn critic_is_stationary_at_zero_bellman_error() {
    let omega = DVector::from_column_slice(&[0.3, -1.2]);
    let critic = CriticState {
        weights: DVector::from_column_slice(&[1.0, 2.0]),
        gamma: DMatrix::identity(2, 2) * 10.0,
        gamma_bar: 1e4,
        nu: 0.005,
        eta_c1: 0.1,
        eta_c2: 10.0,
        beta: 0.5,
    };
    let current = BellmanSample::new(omega.clone(), 0.0, &critic.gamma, critic.nu);
    let grid: Vec<BellmanSample> = (0..4)
        .map(|k| BellmanSample::new(DVector::from_column_slice(&[k as f64, 1.0]), 0.0, &critic.gamma, critic.nu))
        .collect();
    let (dw, _) = critic_flow(&critic, &current, &grid);
    assert_eq!(dw.norm(), 0.0);
}

#[test]
fn grid_metric_of_orthonormal_samples() {
    let sample = |w: [f64; 2]| BellmanSample { omega: DVector::from_column_slice(&w), rho: 1.0, delta: 0.0 };
    let instant = vec![sample([1.0, 0.0]), sample([0.0, 2.0])];
    assert!((omega_gram_metric(&instant) - 1.0).abs() < 1e-12);
    let degenerate = vec![sample([1.0, 1.0]), sample([2.0, 2.0])];
    let history = vec![instant, degenerate];
    assert!(grid_rank_metric(&history).abs() < 1e-12);
    let single = vec![vec![sample([3.0, 0.0]), sample([0.0, 3.0])]];
    assert!((grid_rank_metric(&single) - 4.5).abs() < 1e-12);
}
