//! Acceptance suite: one line per criterion, then a single verdict.

use std::fs;
use std::process::Command;
use std::time::Instant;

use graphgame::actor_critic::{bellman_error, hj_residual_exact};
use graphgame::netgraph::DirectedNetwork;
use graphgame::plant::{
    StateSnapshot, SubgraphState, TrueDrift, build_block_gain, controls_from_mu, mu_from_controls,
    neighborhood_error, stacked_error,
};
use graphgame::sim::{NetworkModel, example_1d, lqr_scalar, network_flow, rk4_step, run_model};
use graphgame_cli::oracle;
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

impl Outcome {
    fn print(&self) {
        println!("[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail);
    }
}

/// Criteria 1 and 2 share the full example run.
fn example_run() -> Vec<Outcome> {
    let config = example_1d();
    let start = Instant::now();
    let model = NetworkModel::new(&config).expect("example builds");
    let outcome = run_model(&model).expect("example runs");
    let wall = start.elapsed().as_secs_f64();
    let log = &outcome.log;
    let n = log.meta.n_agents;

    let mut worst_e: f64 = 0.0;
    let mut worst_formation: f64 = 0.0;
    let mut tail_rows = 0;
    for row in log.since(30.0) {
        tail_rows += 1;
        for i in 0..n {
            worst_e = worst_e.max(row.e[i].amax());
            worst_formation = worst_formation.max(row.formation_error(&log.meta, i).amax());
        }
    }
    let reached_end = outcome.error.is_none() && log.last().is_some_and(|r| (r.t - config.t_final).abs() < 1e-9);
    let tracking = Outcome {
        name: "C1 example reproduction",
        passed: reached_end && tail_rows > 0 && worst_e <= 0.2 && worst_formation <= 0.2 && wall < 60.0,
        detail: format!(
            "max |e| for t >= 30: {worst_e:.3e}, max formation error: {worst_formation:.3e}, {tail_rows} rows, wall-clock {wall:.1}s{}",
            outcome.error.as_ref().map(|e| format!(", aborted: {e}")).unwrap_or_default()
        ),
    };

    let limits: Vec<f64> = model.gains.iter().map(|g| g.gamma_limit).collect();
    let mut finite = reached_end;
    let mut gamma_ok = true;
    let mut peak = vec![0.0f64; 4];
    for row in &log.rows {
        for i in 0..n {
            let norms = [row.wc[i].norm(), row.wa[i].norm(), row.theta[i].norm(), row.gamma_norm[i]];
            finite &= norms.iter().all(|v| v.is_finite());
            for (p, v) in peak.iter_mut().zip(norms) {
                *p = p.max(v);
            }
            gamma_ok &= row.gamma_norm[i] <= limits[i] * (1.0 + 1e-12);
        }
    }
    let bounded = Outcome {
        name: "C2 boundedness",
        passed: finite && gamma_ok,
        detail: format!(
            "peak |Wc| {:.3e}, |Wa| {:.3e}, |theta| {:.3e}, |Gamma| {:.3e} (limit {:.3e}), all finite: {finite}",
            peak[0],
            peak[1],
            peak[2],
            peak[3],
            limits.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
    };
    vec![tracking, bounded]
}

fn riccati() -> Outcome {
    let start = Instant::now();
    let check = oracle::riccati();
    let wall = start.elapsed().as_secs_f64();
    Outcome { name: "C3 Riccati oracle", passed: check.passed && wall < 10.0, detail: check.detail }
}

fn identifier() -> Outcome {
    let start = Instant::now();
    let check = oracle::identifier();
    let wall = start.elapsed().as_secs_f64();
    Outcome {
        name: "C4 identifier oracle",
        passed: check.passed && wall < 5.0,
        detail: format!("{}, {wall:.3}s", check.detail),
    }
}

fn random_snapshot(rng: &mut ChaCha8Rng) -> StateSnapshot {
    StateSnapshot::full(
        DVector::from_element(1, rng.random_range(-1.0..1.0)),
        (0..5).map(|_| DVector::from_element(1, rng.random_range(-2.0..2.0))).collect(),
    )
}

fn random_network(rng: &mut ChaCha8Rng) -> DirectedNetwork {
    let n = rng.random_range(1..=8usize);
    let weight = |rng: &mut ChaCha8Rng| if rng.random_bool(0.25) { rng.random_range(0.1..2.0) } else { 0.0 };
    let mut a = DMatrix::from_fn(n, n, |_, _| weight(rng));
    a.fill_diagonal(0.0);
    let pins = DVector::from_fn(n, |_, _| weight(rng));
    DirectedNetwork::new(a, pins).expect("non-negative weights")
}

fn structural() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let built = example_1d().build().expect("example builds");
    let plant = &built.game.plant;
    let drift = TrueDrift(plant);

    let mut round_trip: f64 = 0.0;
    let mut worst_cond: f64 = 0.0;
    for _ in 0..1000 {
        let states = random_snapshot(&mut rng);
        let agent = rng.random_range(0..5usize);
        let size = plant.subgraph(agent).size();
        let mu = DVector::from_fn(size, |_, _| rng.random_range(-3.0..3.0));
        let sv = build_block_gain(plant, agent, &states).expect("block gain").singular_values();
        worst_cond = worst_cond.max(sv.max() / sv.min());
        let u = controls_from_mu(plant, agent, &mu, &states, &drift).expect("invertible gain");
        let back = mu_from_controls(plant, agent, &u, &states, &drift).expect("consistent sizes");
        round_trip = round_trip.max((back - mu).amax());
    }

    let mut stacked: f64 = 0.0;
    for _ in 0..1000 {
        let states = random_snapshot(&mut rng);
        let e = stacked_error(plant, &states).expect("stacked error");
        for i in 0..5 {
            stacked = stacked.max((e[i] - neighborhood_error(plant, i, &states).expect("error")[0]).abs());
        }
    }

    let thetas: Vec<DMatrix<f64>> = built.true_theta.iter().map(|t| t.clone().expect("known drift")).collect();
    let mut bellman: f64 = 0.0;
    for _ in 0..1000 {
        let agent = rng.random_range(0..5usize);
        let len = built.game.bases[agent].input_dim();
        let point = DVector::from_fn(len, |_, _| rng.random_range(-1.5..1.5));
        let sub = SubgraphState::from_vector(plant, agent, &point).expect("subgraph state");
        let wc = DVector::from_fn(built.game.bases[agent].len(), |_, _| rng.random_range(-2.0..2.0));
        let wa: Vec<DVector<f64>> =
            built.game.bases.iter().map(|b| DVector::from_fn(b.len(), |_, _| rng.random_range(-2.0..2.0))).collect();
        let est = bellman_error(&built.game, &sub, &wc, &wa, &thetas, &built.drift_bases).expect("bellman error");
        let exact = hj_residual_exact(&built.game, &sub, &wc, &wa).expect("exact residual");
        bellman = bellman.max((est - exact).abs());
    }

    let mut mismatches = 0;
    let mut spanning = 0;
    for _ in 0..1000 {
        let net = random_network(&mut rng);
        let tree = net.verify_spanning_tree();
        spanning += tree as usize;
        mismatches += (tree != net.formation_matrix_nonsingular()) as usize;
    }

    Outcome {
        name: "C5 structural identities",
        passed: round_trip <= 1e-10 && stacked <= 1e-12 && bellman <= 1e-12 && mismatches == 0,
        detail: format!(
            "mu/u round trip {round_trip:.2e} (worst gain condition {worst_cond:.1e}), stacked error {stacked:.2e}, \
             bellman identity {bellman:.2e}, spanning-tree mismatches {mismatches}/1000 ({spanning} spanning)"
        ),
    }
}

fn gradient_error() -> f64 {
    let built = example_1d().build().expect("example builds");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for basis in &built.game.bases {
        for _ in 0..20 {
            let z = DVector::from_fn(basis.input_dim(), |_, _| rng.random_range(-1.5..1.5));
            let jac = basis.jacobian(&z);
            let h = 1e-6;
            let fd = DMatrix::from_fn(basis.len(), z.len(), |r, c| {
                let mut up = z.clone();
                let mut down = z.clone();
                up[c] += h;
                down[c] -= h;
                (basis.eval(&up)[r] - basis.eval(&down)[r]) / (2.0 * h)
            });
            worst = worst.max((&jac - fd).norm() / jac.norm().max(1e-300));
        }
    }
    worst
}

fn rk4_ratio() -> f64 {
    let p = 1.104987562112089;
    let model = NetworkModel::new(&lqr_scalar()).expect("preset builds");
    let mut state = model.initial_state().expect("initial state");
    let a = model.layout.agents[0];
    state.y[a.wc] = p;
    state.y[a.wa] = p;
    let flow = |t: f64, z: &DVector<f64>| {
        let mut y = state.y.clone();
        y[a.x] = z[0];
        network_flow(&model, t, &y, &state.discrete).map(|(dy, _)| DVector::from_element(1, dy[a.x]))
    };
    let horizon = 0.4;
    let exact = ((1.0 - p / 0.1) * horizon).exp();
    let err = |dt: f64| {
        let mut z = DVector::from_element(1, 1.0);
        for k in 0..(horizon / dt).round() as usize {
            z = rk4_step(flow, k as f64 * dt, &z, dt).expect("finite flow");
        }
        (z[0] - exact).abs()
    };
    err(0.02) / err(0.01)
}

fn numerics() -> Outcome {
    let grad = gradient_error();
    let sg = oracle::savitzky_golay();
    let ratio = rk4_ratio();
    Outcome {
        name: "C6 numerics",
        passed: grad < 1e-6 && sg.passed && ratio >= 14.0,
        detail: format!("gradient vs finite differences {grad:.2e}, {}, RK4 halving ratio {ratio:.2}", sg.detail),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut traces = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_graphgame"))
            .args(["run", "--out-dir", out.to_str().expect("utf-8 path")])
            .status()
            .expect("binary starts");
        traces.push((status.success(), fs::read(out.join("trace.csv")).unwrap_or_default()));
    }
    let identical = traces[0].1 == traces[1].1;
    Outcome {
        name: "C7 determinism",
        passed: traces.iter().all(|(ok, bytes)| *ok && !bytes.is_empty()) && identical,
        detail: format!("{} bytes per trace, identical: {identical}", traces[0].1.len()),
    }
}

fn main() {
    let mut outcomes = example_run();
    outcomes.push(riccati());
    outcomes.push(identifier());
    outcomes.push(structural());
    outcomes.push(numerics());
    outcomes.push(determinism());
    for o in &outcomes {
        o.print();
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
