//! Simulation configuration and its flat dotted-key text format.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;
use toml::Value;

use crate::actor_critic::{BasisError, CostSpec, Game, GameError, ValueBasis};
use crate::identifier::{DriftBasis, MonomialBasis, SG_MIN_WINDOW};
use crate::netgraph::{DirectedNetwork, Edge, Node};
use crate::plant::{AgentModel, FormationSpec, LeaderModel, LinearAgent, Plant, ScalarGain, ScalarPolyAgent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid config: {0}")]
    Invariant(String),
    #[error("no spanning tree: some agent is not reachable from the leader")]
    NoSpanningTree,
    #[error("agent {agent}: {source}")]
    Basis { agent: usize, source: BasisError },
}

/// A vector given either as one repeated value or explicitly.
#[derive(Debug, Clone, PartialEq)]
pub enum FillSpec {
    Fill(f64),
    Values(Vec<f64>),
}

impl FillSpec {
    pub fn resolve(&self, len: usize, what: &str) -> Result<DVector<f64>, ConfigError> {
        match self {
            FillSpec::Fill(v) => Ok(DVector::from_element(len, *v)),
            FillSpec::Values(v) if v.len() == len => Ok(DVector::from_column_slice(v)),
            FillSpec::Values(v) => {
                Err(ConfigError::Invariant(format!("{what} has {} entries, expected {len}", v.len())))
            }
        }
    }
}

/// A square matrix given as `s·I`, a diagonal, or row by row.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSpec {
    Scaled(f64),
    Diagonal(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn resolve(&self, size: usize, what: &str) -> Result<DMatrix<f64>, ConfigError> {
        let bad = |got: String| ConfigError::Invariant(format!("{what} is {got}, expected size {size}"));
        match self {
            MatrixSpec::Scaled(s) => Ok(DMatrix::identity(size, size) * *s),
            MatrixSpec::Diagonal(d) if d.len() == size => Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d))),
            MatrixSpec::Diagonal(d) => Err(bad(format!("a diagonal of length {}", d.len()))),
            MatrixSpec::Rows(rows) => rows_to_matrix(rows)
                .filter(|m| m.shape() == (size, size))
                .ok_or_else(|| bad("a matrix of the wrong shape".into())),
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return None;
    }
    Some(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// `f(x) = Σ_p coeffs[p-1] x^p`, scalar input gain.
    ScalarPoly { coeffs: Vec<f64>, gain: ScalarGain },
    /// `ẋ = A x + B u`.
    Linear { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

impl ModelSpec {
    fn build(&self, n: usize) -> Result<Arc<dyn AgentModel>, String> {
        match self {
            ModelSpec::ScalarPoly { coeffs, gain } => {
                if n != 1 {
                    return Err("scalar_poly agents need state_dim = 1".into());
                }
                Ok(Arc::new(ScalarPolyAgent::new(coeffs.clone(), *gain)))
            }
            ModelSpec::Linear { a, b } => {
                let a = rows_to_matrix(a).ok_or("A is not a matrix")?;
                let b = rows_to_matrix(b).ok_or("B is not a matrix")?;
                if a.shape() != (n, n) || b.nrows() != n {
                    return Err("A must be n×n and B must have n rows".into());
                }
                Ok(Arc::new(LinearAgent { a, b }))
            }
        }
    }

    /// Weights of the model's drift in a monomial basis, when the drift lies in its span.
    pub fn true_theta(&self, basis: &[Vec<u32>], n: usize) -> Option<DMatrix<f64>> {
        match self {
            ModelSpec::ScalarPoly { coeffs, .. } => {
                let mut theta = DMatrix::zeros(basis.len(), 1);
                for (p, &c) in coeffs.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let row = basis.iter().position(|e| e.len() == 1 && e[0] as usize == p + 1)?;
                    theta[(row, 0)] = c;
                }
                Some(theta)
            }
            ModelSpec::Linear { a, .. } => {
                let a = rows_to_matrix(a)?;
                let mut theta = DMatrix::zeros(basis.len(), n);
                for c in 0..n {
                    let row = basis.iter().position(|e| {
                        e.len() == n && e.iter().enumerate().all(|(k, &p)| p == u32::from(k == c))
                    });
                    match row {
                        Some(r) => theta.row_mut(r).copy_from(&a.column(c).transpose()),
                        None if a.column(c).iter().all(|v| *v == 0.0) => {}
                        None => return None,
                    }
                }
                Some(theta)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeaderKind {
    Static,
    ExponentialDecay,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderSpec {
    pub kind: LeaderKind,
    pub initial: Vec<f64>,
    pub rate: f64,
    pub a: Option<Vec<Vec<f64>>>,
    /// Bound the trajectory must respect over the horizon.
    pub bound: f64,
}

impl LeaderSpec {
    pub fn build(&self) -> Result<LeaderModel, ConfigError> {
        let initial = DVector::from_column_slice(&self.initial);
        Ok(match self.kind {
            LeaderKind::Static => LeaderModel::Static { state: initial },
            LeaderKind::ExponentialDecay => LeaderModel::ExponentialDecay { initial, rate: self.rate },
            LeaderKind::Linear => {
                let a = self
                    .a
                    .as_deref()
                    .and_then(rows_to_matrix)
                    .filter(|a| a.shape() == (initial.len(), initial.len()))
                    .ok_or_else(|| ConfigError::Invariant("leader.a must be a square matrix matching leader.initial".into()))?;
                LeaderModel::Linear { a, initial }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    Cartesian,
    Random { count: usize },
}

/// Values spanned by the extrapolation points along each coordinate of `𝓔_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub mode: GridMode,
    pub own_error: Vec<f64>,
    pub own_state: Vec<f64>,
    pub neighbor_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub model: ModelSpec,
    /// Exponents of the identifier's monomial regressor.
    pub drift_basis: Vec<Vec<u32>>,
    /// Leader-relative formation offset `x_di0`.
    pub offset: FillSpec,
    pub x0: FillSpec,
    pub xhat0: FillSpec,
    /// Initial `θ̂`, column-major.
    pub theta_hat0: FillSpec,
    pub q: MatrixSpec,
    pub r: MatrixSpec,
    pub basis: Vec<String>,
    pub wc0: FillSpec,
    pub wa0: FillSpec,
    pub gamma0: MatrixSpec,
    pub eta_c1: f64,
    pub eta_c2: f64,
    pub eta_a1: f64,
    pub eta_a2: f64,
    pub nu: f64,
    pub beta: f64,
    pub gamma_bar: f64,
    pub k_obs: f64,
    pub k_theta: f64,
    pub gamma_theta: FillSpec,
    pub stack_size: usize,
    /// Explicit extrapolation points `𝓔_i`, replacing the shared grid.
    pub grid_points: Option<Vec<Vec<f64>>>,
    /// Known bound on the ideal identifier weights; recorded only.
    pub theta_bound: Option<f64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::ScalarPoly { coeffs: vec![0.0], gain: ScalarGain::Constant(1.0) },
            drift_basis: vec![vec![1]],
            offset: FillSpec::Fill(0.0),
            x0: FillSpec::Fill(0.0),
            xhat0: FillSpec::Fill(0.0),
            theta_hat0: FillSpec::Fill(0.0),
            q: MatrixSpec::Scaled(10.0),
            r: MatrixSpec::Scaled(0.1),
            basis: Vec::new(),
            wc0: FillSpec::Fill(1.0),
            wa0: FillSpec::Fill(1.0),
            gamma0: MatrixSpec::Scaled(500.0),
            eta_c1: 0.1,
            eta_c2: 10.0,
            eta_a1: 5.0,
            eta_a2: 0.1,
            nu: 0.005,
            beta: 0.5,
            gamma_bar: 1e4,
            k_obs: 500.0,
            k_theta: 30.0,
            gamma_theta: FillSpec::Fill(1.0),
            stack_size: 30,
            grid_points: None,
            theta_bound: None,
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Log every `decimate`-th step.
    pub decimate: usize,
    pub sg_window: usize,
    /// The recorded-data term is used once the stack rank metric exceeds this.
    pub rank_threshold: f64,
    pub seed: u64,
    /// Freeze `θ̂` at the true weights and switch the identifier off.
    pub exact_model: bool,
    pub state_dim: usize,
    /// `(from, to, weight)` with agents numbered from 1 and 0 for the leader.
    pub edges: Vec<(usize, usize, f64)>,
    pub normalize_weights: bool,
    pub leader: LeaderSpec,
    pub grid: GridSpec,
    pub agents: Vec<AgentConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 40.0,
            decimate: 10,
            sg_window: 9,
            rank_threshold: 0.01,
            seed: 0,
            exact_model: false,
            state_dim: 1,
            edges: Vec::new(),
            normalize_weights: false,
            leader: LeaderSpec { kind: LeaderKind::Static, initial: vec![0.0], rate: 0.0, a: None, bound: 1e6 },
            grid: GridSpec {
                mode: GridMode::Cartesian,
                own_error: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
                own_state: vec![0.0, 1.0, 2.0],
                neighbor_error: vec![-0.5, 0.0, 0.5],
            },
            agents: Vec::new(),
        }
    }
}

/// A validated configuration turned into runtime objects.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub game: Game,
    pub drift_bases: Vec<Arc<dyn DriftBasis>>,
    pub true_theta: Vec<Option<DMatrix<f64>>>,
}

impl SimConfig {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn network(&self) -> Result<DirectedNetwork, ConfigError> {
        let n = self.n_agents();
        let mut edges = Vec::with_capacity(self.edges.len());
        for &(from, to, weight) in &self.edges {
            if to == 0 || to > n || from > n {
                return Err(ConfigError::Invariant(format!("edge ({from}, {to}) refers to a missing agent")));
            }
            let from = if from == 0 { Node::Leader } else { Node::Agent(from - 1) };
            edges.push(Edge { from, to: to - 1, weight });
        }
        let net = DirectedNetwork::from_edges(n, &edges).map_err(|e| ConfigError::Invariant(e.to_string()))?;
        if self.normalize_weights {
            net.normalized().map_err(|e| ConfigError::Invariant(e.to_string()))
        } else {
            Ok(net)
        }
    }

    /// Checks the invariants and topology, then builds the plant and game.
    pub fn build(&self) -> Result<BuiltScenario, ConfigError> {
        let inv = |msg: String| Err(ConfigError::Invariant(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return inv(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt * (1.0 - 1e-12)) {
            return inv(format!("t_final must be at least dt, got {}", self.t_final));
        }
        if self.decimate == 0 {
            return inv("decimate must be at least 1".into());
        }
        if self.sg_window < SG_MIN_WINDOW || self.sg_window % 2 == 0 {
            return inv(format!("sg_window must be odd and at least {SG_MIN_WINDOW}"));
        }
        if !(self.rank_threshold >= 0.0) {
            return inv("rank_threshold must be nonnegative".into());
        }
        if self.agents.is_empty() {
            return inv("at least one agent is required".into());
        }
        let n = self.state_dim;
        if n == 0 || self.leader.initial.len() != n {
            return inv(format!("leader.initial must have state_dim = {n} entries"));
        }
        let net = self.network()?;
        if !net.verify_spanning_tree() {
            return Err(ConfigError::NoSpanningTree);
        }
        if !net.formation_matrix_nonsingular() {
            return inv("L + A0 is numerically singular".into());
        }
        let leader = self.leader.build()?;
        if !leader.bounded_on(self.t_final, self.leader.bound) {
            return inv(format!("leader trajectory leaves the bound {} on the horizon", self.leader.bound));
        }
        self.check_grid()?;

        let mut models = Vec::new();
        let mut offsets = Vec::new();
        for (k, a) in self.agents.iter().enumerate() {
            let id = k + 1;
            let positive = [
                ("eta_c1", a.eta_c1),
                ("eta_c2", a.eta_c2),
                ("eta_a1", a.eta_a1),
                ("eta_a2", a.eta_a2),
                ("k", a.k_obs),
                ("k_theta", a.k_theta),
                ("gamma_bar", a.gamma_bar),
            ];
            for (name, v) in positive {
                if !(v > 0.0 && v.is_finite()) {
                    return inv(format!("agent {id}: {name} must be positive, got {v}"));
                }
            }
            if !(a.nu >= 0.0 && a.beta >= 0.0) {
                return inv(format!("agent {id}: nu and beta must be nonnegative"));
            }
            if a.stack_size == 0 {
                return inv(format!("agent {id}: stack_size must be at least 1"));
            }
            if a.drift_basis.is_empty() || a.drift_basis.iter().any(|e| e.len() != n) {
                return inv(format!("agent {id}: drift_basis entries need {n} exponents each"));
            }
            let gt = a.gamma_theta.resolve(a.drift_basis.len(), &format!("agent {id} gamma_theta"))?;
            if gt.iter().any(|g| !(*g > 0.0)) {
                return inv(format!("agent {id}: gamma_theta must be positive"));
            }
            models.push(a.model.build(n).map_err(|e| ConfigError::Invariant(format!("agent {id}: {e}")))?);
            offsets.push(a.offset.resolve(n, &format!("agent {id} offset"))?);
        }
        let plant = Plant::new(net, models, leader, FormationSpec::new(offsets))
            .map_err(|e| ConfigError::Invariant(e.to_string()))?;

        let mut bases = Vec::new();
        let mut costs = Vec::new();
        let mut drift_bases: Vec<Arc<dyn DriftBasis>> = Vec::new();
        let mut true_theta = Vec::new();
        for (k, a) in self.agents.iter().enumerate() {
            let id = k + 1;
            let basis = ValueBasis::parse(&a.basis, plant.subgraph(k), n)
                .map_err(|source| ConfigError::Basis { agent: id, source })?;
            let l = basis.len();
            let m = plant.input_dim(k);
            let q = a.q.resolve(n, &format!("agent {id} q"))?;
            let r = a.r.resolve(m, &format!("agent {id} r"))?;
            costs.push(CostSpec::new(q, r).map_err(|e| ConfigError::Invariant(format!("agent {id}: {e}")))?);
            a.wc0.resolve(l, &format!("agent {id} wc0"))?;
            a.wa0.resolve(l, &format!("agent {id} wa0"))?;
            a.x0.resolve(n, &format!("agent {id} x0"))?;
            a.xhat0.resolve(n, &format!("agent {id} xhat0"))?;
            a.theta_hat0.resolve(a.drift_basis.len() * n, &format!("agent {id} theta_hat0"))?;
            if let Some(points) = &a.grid_points {
                let len = n * (plant.subgraph(k).size() + 1);
                if points.is_empty() || points.iter().any(|p| p.len() != len) {
                    return inv(format!("agent {id}: grid_points need {len} coordinates each"));
                }
            }
            let gamma0 = a.gamma0.resolve(l, &format!("agent {id} gamma0"))?;
            if (&gamma0 - gamma0.transpose()).norm() > 1e-12 * gamma0.norm() || gamma0.clone().cholesky().is_none() {
                return inv(format!("agent {id}: gamma0 must be symmetric positive definite"));
            }
            bases.push(basis);
            drift_bases.push(Arc::new(MonomialBasis { exponents: a.drift_basis.clone() }) as Arc<dyn DriftBasis>);
            let theta = a.model.true_theta(&a.drift_basis, n);
            if self.exact_model && theta.is_none() {
                return inv(format!("agent {id}: exact_model needs a drift basis spanning the model drift"));
            }
            true_theta.push(theta);
        }
        let game = Game::new(plant, bases, costs).map_err(|e| match e {
            GameError::Basis(source) => ConfigError::Basis { agent: 0, source },
            other => ConfigError::Invariant(other.to_string()),
        })?;
        Ok(BuiltScenario { game, drift_bases, true_theta })
    }

    fn check_grid(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if g.own_error.is_empty() || g.own_state.is_empty() || g.neighbor_error.is_empty() {
            return Err(ConfigError::Invariant("grid value lists must be nonempty".into()));
        }
        if let GridMode::Random { count: 0 } = g.mode {
            return Err(ConfigError::Invariant("grid.count must be at least 1".into()));
        }
        Ok(())
    }

    /// Parses the dotted-key text format on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut flat = BTreeMap::new();
        flatten("", &Value::Table(table), &mut flat);
        flat.remove("scenario");
        // sizing keys first, then shared agent defaults, then the rest
        let rank = |k: &str| {
            if k == "network.agents" {
                0
            } else if k.starts_with("agent.default.") {
                1
            } else {
                2
            }
        };
        let mut keys: Vec<&String> = flat.keys().collect();
        keys.sort_by_key(|k| rank(k));
        for key in keys {
            self.apply(key, &flat[key])?;
        }
        Ok(())
    }

    /// Applies one dotted key.
    pub fn apply(&mut self, key: &str, value: &Value) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue { key: key.to_string(), reason: reason.to_string() };
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["sim", field] => match *field {
                "dt" => self.dt = num(value).ok_or_else(|| bad("expected a number"))?,
                "t_final" => self.t_final = num(value).ok_or_else(|| bad("expected a number"))?,
                "decimate" => self.decimate = count(value).ok_or_else(|| bad("expected a positive integer"))?,
                "sg_window" => self.sg_window = count(value).ok_or_else(|| bad("expected a positive integer"))?,
                "rank_threshold" => self.rank_threshold = num(value).ok_or_else(|| bad("expected a number"))?,
                "seed" => self.seed = count(value).ok_or_else(|| bad("expected an integer"))? as u64,
                "exact_model" => self.exact_model = value.as_bool().ok_or_else(|| bad("expected true or false"))?,
                "state_dim" => self.state_dim = count(value).ok_or_else(|| bad("expected a positive integer"))?,
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            },
            ["network", "agents"] => {
                let n = count(value).filter(|n| *n > 0).ok_or_else(|| bad("expected a positive integer"))?;
                self.agents.resize(n, AgentConfig::default());
            }
            ["network", "edges"] => self.edges = edges(value).ok_or_else(|| bad("expected [[from, to], ...] or [[from, to, weight], ...]"))?,
            ["network", "normalize"] => self.normalize_weights = value.as_bool().ok_or_else(|| bad("expected true or false"))?,
            ["leader", field] => match *field {
                "kind" => {
                    self.leader.kind = match value.as_str() {
                        Some("static") => LeaderKind::Static,
                        Some("exp_decay") => LeaderKind::ExponentialDecay,
                        Some("linear") => LeaderKind::Linear,
                        _ => return Err(bad("expected \"static\", \"exp_decay\" or \"linear\"")),
                    }
                }
                "initial" => self.leader.initial = vector(value).ok_or_else(|| bad("expected a number or a list"))?,
                "rate" => self.leader.rate = num(value).ok_or_else(|| bad("expected a number"))?,
                "a" => self.leader.a = Some(rows(value).ok_or_else(|| bad("expected a matrix"))?),
                "bound" => self.leader.bound = num(value).ok_or_else(|| bad("expected a number"))?,
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            },
            ["grid", field] => match *field {
                "mode" => {
                    self.grid.mode = match value.as_str() {
                        Some("cartesian") => GridMode::Cartesian,
                        Some("random") => GridMode::Random {
                            count: match self.grid.mode {
                                GridMode::Random { count } => count,
                                GridMode::Cartesian => 50,
                            },
                        },
                        _ => return Err(bad("expected \"cartesian\" or \"random\"")),
                    }
                }
                "count" => {
                    let c = count(value).ok_or_else(|| bad("expected a positive integer"))?;
                    if let GridMode::Random { count } = &mut self.grid.mode {
                        *count = c;
                    } else {
                        self.grid.mode = GridMode::Random { count: c };
                    }
                }
                "own_error" => self.grid.own_error = vector(value).ok_or_else(|| bad("expected a list"))?,
                "own_state" => self.grid.own_state = vector(value).ok_or_else(|| bad("expected a list"))?,
                "neighbor_error" => self.grid.neighbor_error = vector(value).ok_or_else(|| bad("expected a list"))?,
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            },
            ["agent", which, field] => {
                if *which == "default" {
                    for a in &mut self.agents {
                        apply_agent(a, key, field, value)?;
                    }
                    if self.agents.is_empty() {
                        return Err(bad("set network.agents before agent defaults"));
                    }
                } else {
                    let id: usize = which.parse().map_err(|_| ConfigError::UnknownKey(key.to_string()))?;
                    if id == 0 || id > self.agents.len() {
                        return Err(bad(&format!("agent {id} does not exist (network.agents = {})", self.agents.len())));
                    }
                    apply_agent(&mut self.agents[id - 1], key, field, value)?;
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

fn apply_agent(a: &mut AgentConfig, key: &str, field: &str, value: &Value) -> Result<(), ConfigError> {
    let bad = |reason: &str| ConfigError::BadValue { key: key.to_string(), reason: reason.to_string() };
    let number = || num(value).ok_or_else(|| bad("expected a number"));
    let fill = || fill_spec(value).ok_or_else(|| bad("expected a number or a list of numbers"));
    let matrix = || matrix_spec(value).ok_or_else(|| bad("expected a number, a diagonal list or a list of rows"));
    match field {
        "model" => {
            a.model = match value.as_str() {
                Some("scalar_poly") => match &a.model {
                    m @ ModelSpec::ScalarPoly { .. } => m.clone(),
                    _ => ModelSpec::ScalarPoly { coeffs: vec![0.0], gain: ScalarGain::Constant(1.0) },
                },
                Some("linear") => match &a.model {
                    m @ ModelSpec::Linear { .. } => m.clone(),
                    _ => ModelSpec::Linear { a: vec![vec![0.0]], b: vec![vec![1.0]] },
                },
                _ => return Err(bad("expected \"scalar_poly\" or \"linear\"")),
            }
        }
        "drift" => match &mut a.model {
            ModelSpec::ScalarPoly { coeffs, .. } => *coeffs = vector(value).ok_or_else(|| bad("expected a list"))?,
            _ => return Err(bad("only scalar_poly models take drift coefficients")),
        },
        "gain" => match &mut a.model {
            ModelSpec::ScalarPoly { gain, .. } => {
                *gain = match (value.as_str(), num(value)) {
                    (Some("cos2x_plus_2"), _) => ScalarGain::CosineBias,
                    (_, Some(c)) => ScalarGain::Constant(c),
                    _ => return Err(bad("expected a number or \"cos2x_plus_2\"")),
                }
            }
            _ => return Err(bad("only scalar_poly models take a scalar gain")),
        },
        "a" | "b" => match &mut a.model {
            ModelSpec::Linear { a: ma, b: mb } => {
                let m = rows(value).ok_or_else(|| bad("expected a list of rows"))?;
                if field == "a" { *ma = m } else { *mb = m }
            }
            _ => return Err(bad("only linear models take a and b")),
        },
        "drift_basis" => {
            let list = value.as_array().ok_or_else(|| bad("expected a list of exponents"))?;
            a.drift_basis = list
                .iter()
                .map(|v| match v {
                    Value::Array(inner) => inner.iter().map(exponent).collect::<Option<Vec<_>>>(),
                    other => exponent(other).map(|p| vec![p]),
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad("exponents must be nonnegative integers"))?;
        }
        "offset" => a.offset = fill()?,
        "x0" => a.x0 = fill()?,
        "xhat0" => a.xhat0 = fill()?,
        "theta_hat0" => a.theta_hat0 = fill()?,
        "q" => a.q = matrix()?,
        "r" => a.r = matrix()?,
        "basis" => {
            a.basis = value
                .as_array()
                .and_then(|l| l.iter().map(|v| v.as_str().map(str::to_string)).collect::<Option<Vec<_>>>())
                .ok_or_else(|| bad("expected a list of strings"))?
        }
        "wc0" => a.wc0 = fill()?,
        "wa0" => a.wa0 = fill()?,
        "gamma0" => a.gamma0 = matrix()?,
        "eta_c1" => a.eta_c1 = number()?,
        "eta_c2" => a.eta_c2 = number()?,
        "eta_a1" => a.eta_a1 = number()?,
        "eta_a2" => a.eta_a2 = number()?,
        "nu" => a.nu = number()?,
        "beta" => a.beta = number()?,
        "gamma_bar" => a.gamma_bar = number()?,
        "k" => a.k_obs = number()?,
        "k_theta" => a.k_theta = number()?,
        "gamma_theta" => a.gamma_theta = fill()?,
        "stack_size" => a.stack_size = count(value).ok_or_else(|| bad("expected a positive integer"))?,
        "theta_bound" => a.theta_bound = Some(number()?),
        "grid_points" => a.grid_points = Some(rows(value).ok_or_else(|| bad("expected a list of points"))?),
        _ => return Err(ConfigError::UnknownKey(key.to_string())),
    }
    Ok(())
}

fn flatten(prefix: &str, value: &Value, out: &mut BTreeMap<String, Value>) {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn count(v: &Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}

fn exponent(v: &Value) -> Option<u32> {
    v.as_integer().and_then(|i| u32::try_from(i).ok())
}

fn vector(v: &Value) -> Option<Vec<f64>> {
    match v {
        Value::Array(items) => items.iter().map(num).collect(),
        other => num(other).map(|x| vec![x]),
    }
}

fn rows(v: &Value) -> Option<Vec<Vec<f64>>> {
    v.as_array()?.iter().map(vector).collect()
}

fn fill_spec(v: &Value) -> Option<FillSpec> {
    match v {
        Value::Array(_) => vector(v).map(FillSpec::Values),
        other => num(other).map(FillSpec::Fill),
    }
}

fn matrix_spec(v: &Value) -> Option<MatrixSpec> {
    match v {
        Value::Array(items) if items.iter().all(|i| i.is_array()) && !items.is_empty() => rows(v).map(MatrixSpec::Rows),
        Value::Array(_) => vector(v).map(MatrixSpec::Diagonal),
        other => num(other).map(MatrixSpec::Scaled),
    }
}

fn edges(v: &Value) -> Option<Vec<(usize, usize, f64)>> {
    v.as_array()?
        .iter()
        .map(|e| {
            let e = e.as_array()?;
            let from = count(e.first()?)?;
            let to = count(e.get(1)?)?;
            let w = match e.get(2) {
                Some(w) => num(w)?,
                None => 1.0,
            };
            (e.len() <= 3).then_some((from, to, w))
        })
        .collect()
}
