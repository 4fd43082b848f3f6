use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::Game;
use super::bellman::{SubgraphTerms, evaluate_bellman_with};
use crate::identifier::{DriftBasis, EstimatedDrift};
use crate::plant::{PlantError, SubgraphState, recover_states};

/// Fixed extrapolation points `𝓔_i^k` of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationGrid {
    pub agent: usize,
    pub points: Vec<DVector<f64>>,
}

impl ExtrapolationGrid {
    /// Cartesian product of per-coordinate value lists; the last axis varies fastest.
    pub fn cartesian(agent: usize, axes: &[Vec<f64>]) -> Self {
        let mut points = vec![Vec::with_capacity(axes.len())];
        for axis in axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        Self { agent, points: points.into_iter().map(DVector::from_vec).collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// An extrapolation grid with its state-only geometry precomputed.
///
/// At fixed points the regressor is affine in the identifier weights `θ̂_l`
/// and actor weights `Ŵ_al` of the subgraph members:
/// `ω^k = c^k + J^k p` with `p = [vec θ̂_l ...; Ŵ_al ...]` in `λ_i` order.
/// `c` and `J` are found by probing the direct evaluation once.
#[derive(Debug, Clone)]
pub struct PreparedGrid {
    agent: usize,
    points: usize,
    basis_len: usize,
    input_dim: usize,
    members: Vec<usize>,
    theta_lens: Vec<usize>,
    wa_lens: Vec<usize>,
    constant: DVector<f64>,
    jacobian: DMatrix<f64>,
    /// Rows `k m .. (k+1) m` hold `-½ R⁻¹ G_σ^k`.
    policy_map: DMatrix<f64>,
    /// Column `k` holds `vec(G_σ^kᵀ R⁻¹ G_σ^k)`.
    hessians: DMatrix<f64>,
    state_costs: DVector<f64>,
    r: DMatrix<f64>,
}

/// Grid quantities at one parameter value.
#[derive(Debug, Clone)]
pub struct GridEvaluation {
    /// Column `k` is `ω^k`.
    pub omegas: DMatrix<f64>,
    pub rhos: DVector<f64>,
    pub deltas: DVector<f64>,
    /// `Σ_k ω^k δ^k / ρ^k`.
    pub critic_sum: DVector<f64>,
    /// `Σ_k (ω^kᵀŴ_c / ρ^k) G_σ^kᵀ R⁻¹ G_σ^k`.
    pub actor_matrix: DMatrix<f64>,
}

impl GridEvaluation {
    pub fn samples(&self) -> Vec<super::BellmanSample> {
        (0..self.rhos.len())
            .map(|k| super::BellmanSample {
                omega: self.omegas.column(k).into_owned(),
                rho: self.rhos[k],
                delta: self.deltas[k],
            })
            .collect()
    }
}

impl PreparedGrid {
    pub fn prepare(
        game: &Game,
        grid: &ExtrapolationGrid,
        drift_bases: &[Arc<dyn DriftBasis>],
    ) -> Result<Self, PlantError> {
        let plant = &game.plant;
        let i = grid.agent;
        let n = plant.state_dim();
        let members = plant.subgraph(i).ordering.clone();
        let basis_len = game.bases[i].len();
        let input_dim = plant.input_dim(i);
        let theta_lens: Vec<usize> = members.iter().map(|&l| drift_bases[l].dim() * n).collect();
        let wa_lens: Vec<usize> = members.iter().map(|&l| game.bases[l].len()).collect();
        let n_params: usize = theta_lens.iter().sum::<usize>() + wa_lens.iter().sum::<usize>();
        let m = grid.len();

        let zero_theta: Vec<DMatrix<f64>> = (0..plant.n_agents()).map(|l| DMatrix::zeros(drift_bases[l].dim(), n)).collect();
        let zero_wa: Vec<DVector<f64>> = (0..plant.n_agents()).map(|l| DVector::zeros(game.bases[l].len())).collect();
        let wc = DVector::zeros(basis_len);

        let mut constant = DVector::zeros(m * basis_len);
        let mut jacobian = DMatrix::zeros(m * basis_len, n_params);
        let mut policy_map = DMatrix::zeros(m * input_dim, basis_len);
        let mut hessians = DMatrix::zeros(basis_len * basis_len, m);
        let mut state_costs = DVector::zeros(m);
        let cost = &game.costs[i];

        for (k, point) in grid.points.iter().enumerate() {
            let sub_state = SubgraphState::from_vector(plant, i, point)?;
            let states = recover_states(plant, &sub_state)?;
            let omega_at = |theta: &[DMatrix<f64>], wa: &[DVector<f64>], terms: Option<&SubgraphTerms>| {
                let owned;
                let terms = match terms {
                    Some(t) => t,
                    None => {
                        let drift = EstimatedDrift { weights: theta, bases: drift_bases };
                        owned = SubgraphTerms::evaluate(game, &states, &members, &drift)?;
                        &owned
                    }
                };
                evaluate_bellman_with(game, terms, i, &wc, wa).map(|e| e.omega)
            };
            let base_drift = EstimatedDrift { weights: &zero_theta, bases: drift_bases };
            let base = SubgraphTerms::evaluate(game, &states, &members, &base_drift)?;
            let c = omega_at(&zero_theta, &zero_wa, Some(&base))?;
            let rows = k * basis_len;
            constant.rows_mut(rows, basis_len).copy_from(&c);

            let mut col = 0;
            for (slot, &l) in members.iter().enumerate() {
                for q in 0..theta_lens[slot] {
                    let mut theta = zero_theta.clone();
                    theta[l].as_mut_slice()[q] = 1.0;
                    let probe = omega_at(&theta, &zero_wa, None)? - &c;
                    jacobian.view_mut((rows, col), (basis_len, 1)).copy_from(&probe);
                    col += 1;
                }
            }
            for (slot, &l) in members.iter().enumerate() {
                for q in 0..wa_lens[slot] {
                    let mut wa = zero_wa.clone();
                    wa[l][q] = 1.0;
                    let probe = omega_at(&zero_theta, &wa, Some(&base))? - &c;
                    jacobian.view_mut((rows, col), (basis_len, 1)).copy_from(&probe);
                    col += 1;
                }
            }

            let g = base.g_sigma_of(i)?;
            policy_map.view_mut((k * input_dim, 0), (input_dim, basis_len)).copy_from(&(cost.r_inv() * g * -0.5));
            let h = g.transpose() * cost.r_inv() * g;
            hessians.column_mut(k).copy_from_slice(h.as_slice());
            state_costs[k] = cost.state_cost(sub_state.own_error());
        }

        Ok(Self {
            agent: i,
            points: m,
            basis_len,
            input_dim,
            members,
            theta_lens,
            wa_lens,
            constant,
            jacobian,
            policy_map,
            hessians,
            state_costs,
            r: cost.r().clone(),
        })
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    /// Number of points `M_i`.
    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn parameter_len(&self) -> usize {
        self.jacobian.ncols()
    }

    /// Packs `θ̂_l` (column-major) and `Ŵ_al` for `l ∈ S_i`; both slices are indexed by agent.
    pub fn pack_parameters(&self, theta_hat: &[&[f64]], wa: &[&[f64]], out: &mut DVector<f64>) {
        let mut at = 0;
        for (slot, &l) in self.members.iter().enumerate() {
            out.rows_mut(at, self.theta_lens[slot]).copy_from_slice(theta_hat[l]);
            at += self.theta_lens[slot];
        }
        for (slot, &l) in self.members.iter().enumerate() {
            out.rows_mut(at, self.wa_lens[slot]).copy_from_slice(wa[l]);
            at += self.wa_lens[slot];
        }
    }

    /// `[ω^1 ... ω^M]` at the packed parameters.
    pub fn omegas(&self, params: &DVector<f64>) -> DMatrix<f64> {
        let mut flat = self.constant.clone();
        flat.gemv(1.0, &self.jacobian, params, 1.0);
        DMatrix::from_vec(self.basis_len, self.points, flat.data.into())
    }

    pub fn evaluate(
        &self,
        params: &DVector<f64>,
        wc: &DVector<f64>,
        wa_own: &DVector<f64>,
        gamma: &DMatrix<f64>,
        nu: f64,
    ) -> GridEvaluation {
        let omegas = self.omegas(params);
        let g_omegas = gamma * &omegas;
        let mu = &self.policy_map * wa_own;
        let m = self.input_dim;
        let mut rhos = DVector::zeros(self.points);
        let mut deltas = DVector::zeros(self.points);
        let mut weights = DVector::zeros(self.points);
        let mut coefs = DVector::zeros(self.points);
        for k in 0..self.points {
            let omega = omegas.column(k);
            let rho = 1.0 + nu * omega.dot(&g_omegas.column(k));
            let mu_k = mu.rows(k * m, m);
            let critic_term = omega.dot(wc);
            let delta = critic_term + self.state_costs[k] + mu_k.dot(&(&self.r * mu_k));
            rhos[k] = rho;
            deltas[k] = delta;
            weights[k] = delta / rho;
            coefs[k] = critic_term / rho;
        }
        let critic_sum = &omegas * weights;
        let flat = &self.hessians * coefs;
        let actor_matrix = DMatrix::from_vec(self.basis_len, self.basis_len, flat.data.into());
        GridEvaluation { omegas, rhos, deltas, critic_sum, actor_matrix }
    }
}
