//! Directed communication topology with leader pinning.
//!
//! Agents are indexed `0..N`; the leader is addressed through [`Node::Leader`].
//! `a_ij = adjacency[(i, j)]` is the weight on the edge from `j` to `i`, so
//! row `i` lists the agents that `i` listens to.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;

/// Tolerance on the Hadamard ratio used by [`DirectedNetwork::formation_matrix_nonsingular`].
pub const NONSINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("network must contain at least one agent")]
    Empty,
    #[error("adjacency must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("pinning list has {got} entries for {n} agents")]
    PinningLength { got: usize, n: usize },
    #[error("self edge on agent {0}")]
    SelfEdge(usize),
    #[error("invalid weight {weight} on edge into agent {to}")]
    InvalidWeight { to: usize, weight: f64 },
    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("agent {0} has no incoming weight, cannot normalize")]
    NothingToNormalize(usize),
}

/// Either the leader (node 0 in the usual notation) or a follower agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Leader,
    Agent(usize),
}

/// A weighted edge `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: Node,
    pub to: usize,
    pub weight: f64,
}

impl Edge {
    pub fn unit(from: Node, to: usize) -> Self {
        Self { from, to, weight: 1.0 }
    }
}

/// Weighted digraph over the followers plus pinning gains to the leader.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedNetwork {
    adjacency: DMatrix<f64>,
    pinning: DVector<f64>,
}

/// Ordering `λ_i` of the subgraph `S_i = {i} ∪ S_{-i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphIndex {
    pub agent: usize,
    /// `ordering[0] == agent`, the rest ascending.
    pub ordering: Vec<usize>,
}

impl SubgraphIndex {
    pub fn size(&self) -> usize {
        self.ordering.len()
    }

    /// Slot of agent `j` in this ordering (the inverse map `λ_i⁻¹`).
    pub fn position(&self, j: usize) -> Option<usize> {
        self.ordering.iter().position(|&k| k == j)
    }

    pub fn contains(&self, j: usize) -> bool {
        self.ordering.contains(&j)
    }

    /// `S_{-i}`: the members other than the owner.
    pub fn extended(&self) -> &[usize] {
        &self.ordering[1..]
    }
}

impl DirectedNetwork {
    pub fn new(adjacency: DMatrix<f64>, pinning: DVector<f64>) -> Result<Self, GraphError> {
        let (rows, cols) = adjacency.shape();
        if rows == 0 {
            return Err(GraphError::Empty);
        }
        if rows != cols {
            return Err(GraphError::NotSquare { rows, cols });
        }
        if pinning.len() != rows {
            return Err(GraphError::PinningLength { got: pinning.len(), n: rows });
        }
        for i in 0..rows {
            if adjacency[(i, i)] != 0.0 {
                return Err(GraphError::SelfEdge(i));
            }
            for j in 0..cols {
                let w = adjacency[(i, j)];
                if !(w.is_finite() && w >= 0.0) {
                    return Err(GraphError::InvalidWeight { to: i, weight: w });
                }
            }
            let p = pinning[i];
            if !(p.is_finite() && p >= 0.0) {
                return Err(GraphError::InvalidWeight { to: i, weight: p });
            }
        }
        Ok(Self { adjacency, pinning })
    }

    /// Builds a network from an edge list; repeated edges accumulate weight.
    pub fn from_edges(n_agents: usize, edges: &[Edge]) -> Result<Self, GraphError> {
        if n_agents == 0 {
            return Err(GraphError::Empty);
        }
        let mut adjacency = DMatrix::zeros(n_agents, n_agents);
        let mut pinning = DVector::zeros(n_agents);
        let check = |k: usize| {
            if k >= n_agents {
                Err(GraphError::IndexOutOfRange { index: k, n: n_agents })
            } else {
                Ok(())
            }
        };
        for e in edges {
            check(e.to)?;
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(GraphError::InvalidWeight { to: e.to, weight: e.weight });
            }
            match e.from {
                Node::Leader => pinning[e.to] += e.weight,
                Node::Agent(j) => {
                    check(j)?;
                    if j == e.to {
                        return Err(GraphError::SelfEdge(j));
                    }
                    adjacency[(e.to, j)] += e.weight;
                }
            }
        }
        Self::new(adjacency, pinning)
    }

    /// Copy with every row of `[a_i0, a_i1, ..., a_iN]` scaled to sum to one.
    pub fn normalized(&self) -> Result<Self, GraphError> {
        let mut adjacency = self.adjacency.clone();
        let mut pinning = self.pinning.clone();
        for i in 0..self.n_agents() {
            let total = self.in_weight(i);
            if total <= 0.0 {
                return Err(GraphError::NothingToNormalize(i));
            }
            adjacency.row_mut(i).scale_mut(1.0 / total);
            pinning[i] /= total;
        }
        Ok(Self { adjacency, pinning })
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn pinning(&self) -> &DVector<f64> {
        &self.pinning
    }

    /// `a_ij` for `j` an agent or the leader.
    pub fn weight(&self, i: usize, j: Node) -> f64 {
        match j {
            Node::Leader => self.pinning[i],
            Node::Agent(j) => self.adjacency[(i, j)],
        }
    }

    /// In-degree `d_i = Σ_j a_ij` over follower neighbors.
    pub fn in_degree(&self, i: usize) -> f64 {
        self.adjacency.row(i).sum()
    }

    /// `d_i + a_i0`, the total weight agent `i` listens with.
    pub fn in_weight(&self, i: usize) -> f64 {
        self.in_degree(i) + self.pinning[i]
    }

    /// Follower in-neighbors `N_{-i}` in ascending order.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n_agents()).filter(|&j| self.adjacency[(i, j)] > 0.0).collect()
    }

    /// In-neighbors including the leader when pinned; the leader comes first.
    pub fn in_nodes(&self, i: usize) -> Vec<Node> {
        let mut nodes = Vec::new();
        if self.pinning[i] > 0.0 {
            nodes.push(Node::Leader);
        }
        nodes.extend(self.in_neighbors(i).into_iter().map(Node::Agent));
        nodes
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinning[i] > 0.0
    }

    fn check_index(&self, i: usize) -> Result<(), GraphError> {
        if i >= self.n_agents() {
            Err(GraphError::IndexOutOfRange { index: i, n: self.n_agents() })
        } else {
            Ok(())
        }
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.adjacency.clone();
        for i in 0..self.n_agents() {
            l[(i, i)] = self.in_degree(i);
        }
        l
    }

    /// `L + A_0`.
    pub fn pinned_laplacian(&self) -> DMatrix<f64> {
        let mut m = self.laplacian();
        for i in 0..self.n_agents() {
            m[(i, i)] += self.pinning[i];
        }
        m
    }

    /// `S_{-i}`: every `j != i` with a directed path `j -> ... -> i`, ascending.
    pub fn extended_neighborhood(&self, i: usize) -> Result<Vec<usize>, GraphError> {
        self.check_index(i)?;
        let n = self.n_agents();
        let mut seen = vec![false; n];
        seen[i] = true;
        let mut queue = VecDeque::from([i]);
        while let Some(k) = queue.pop_front() {
            for j in 0..n {
                if self.adjacency[(k, j)] > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen[i] = false;
        Ok((0..n).filter(|&j| seen[j]).collect())
    }

    pub fn subgraph_index(&self, i: usize) -> Result<SubgraphIndex, GraphError> {
        let mut ordering = vec![i];
        ordering.extend(self.extended_neighborhood(i)?);
        Ok(SubgraphIndex { agent: i, ordering })
    }

    pub fn subgraphs(&self) -> Vec<SubgraphIndex> {
        (0..self.n_agents())
            .map(|i| self.subgraph_index(i).expect("index in range"))
            .collect()
    }

    /// True iff every agent is reachable from the leader.
    pub fn verify_spanning_tree(&self) -> bool {
        let n = self.n_agents();
        let mut seen: Vec<bool> = (0..n).map(|i| self.is_pinned(i)).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| seen[i]).collect();
        while let Some(j) = queue.pop_front() {
            for k in 0..n {
                if self.adjacency[(k, j)] > 0.0 && !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Numerical nonsingularity of `L + A_0` via the Hadamard ratio.
    pub fn formation_matrix_nonsingular(&self) -> bool {
        linalg::hadamard_ratio(&self.pinned_laplacian()) > NONSINGULAR_TOL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> DirectedNetwork {
        let mut edges = vec![Edge::unit(Node::Leader, 0)];
        edges.extend((1..n).map(|k| Edge::unit(Node::Agent(k - 1), k)));
        DirectedNetwork::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn single_node_laplacian_is_zero() {
        let net = DirectedNetwork::from_edges(1, &[]).unwrap();
        assert_eq!(net.laplacian(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn two_node_laplacian() {
        let net = DirectedNetwork::from_edges(2, &[Edge::unit(Node::Agent(0), 1)]).unwrap();
        assert_eq!(net.laplacian(), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 1.0]));
    }

    #[test]
    fn chain_reachability() {
        let net = chain(3);
        assert_eq!(net.extended_neighborhood(2).unwrap(), vec![0, 1]);
        assert!(net.verify_spanning_tree());
        assert!(net.formation_matrix_nonsingular());
    }

    #[test]
    fn no_edges_means_empty_neighborhoods() {
        let net = DirectedNetwork::from_edges(4, &[]).unwrap();
        for i in 0..4 {
            assert!(net.extended_neighborhood(i).unwrap().is_empty());
            assert_eq!(net.subgraph_index(i).unwrap().ordering, vec![i]);
        }
        assert!(!net.verify_spanning_tree());
    }

    #[test]
    fn unpinned_mutual_pair_is_singular() {
        let net = DirectedNetwork::from_edges(
            2,
            &[Edge::unit(Node::Agent(0), 1), Edge::unit(Node::Agent(1), 0)],
        )
        .unwrap();
        assert!(!net.formation_matrix_nonsingular());
        assert!(!net.verify_spanning_tree());
    }

    #[test]
    fn index_out_of_range() {
        let net = chain(2);
        assert_eq!(
            net.extended_neighborhood(5),
            Err(GraphError::IndexOutOfRange { index: 5, n: 2 })
        );
    }

    #[test]
    fn rejects_self_edges_and_bad_weights() {
        assert_eq!(
            DirectedNetwork::from_edges(2, &[Edge::unit(Node::Agent(1), 1)]),
            Err(GraphError::SelfEdge(1))
        );
        let bad = Edge { from: Node::Agent(0), to: 1, weight: -1.0 };
        assert!(DirectedNetwork::from_edges(2, &[bad]).is_err());
    }

    #[test]
    fn normalization_scales_rows() {
        let net = DirectedNetwork::from_edges(
            2,
            &[
                Edge { from: Node::Leader, to: 0, weight: 2.0 },
                Edge::unit(Node::Leader, 1),
                Edge { from: Node::Agent(0), to: 1, weight: 3.0 },
            ],
        )
        .unwrap()
        .normalized()
        .unwrap();
        assert!((net.in_weight(0) - 1.0).abs() < 1e-15);
        assert!((net.in_weight(1) - 1.0).abs() < 1e-15);
        assert!((net.weight(1, Node::Agent(0)) - 0.75).abs() < 1e-15);
    }
}
