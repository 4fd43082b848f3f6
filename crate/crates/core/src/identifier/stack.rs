use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::linalg;

/// One recorded `(x, u, ẋ̄)` triple with cached `σ_θ(x)` and `g(x) u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackEntry {
    pub t: f64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub xdot: DVector<f64>,
    pub sigma: DVector<f64>,
    pub gu: DVector<f64>,
}

/// Bounded buffer of recorded data driving the concurrent-learning term.
///
/// Keeps `Σ σσᵀ` and `Σ σ (ẋ̄ - g u)ᵀ` up to date so the update law costs
/// `O(P² n)` regardless of the stack size.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryStack {
    capacity: usize,
    entries: Vec<StackEntry>,
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    metric: f64,
}

impl HistoryStack {
    pub fn new(capacity: usize, basis_dim: usize, state_dim: usize) -> Self {
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
            gram: DMatrix::zeros(basis_dim, basis_dim),
            cross: DMatrix::zeros(basis_dim, state_dim),
            metric: 0.0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }
    pub fn entries(&self) -> &[StackEntry] {
        &self.entries
    }

    /// `Σ_k σ^k σ^kᵀ`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `Σ_k σ^k (ẋ̄^k - g^k u^k)ᵀ`.
    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    /// `λ_min(Σ_k σ^k σ^kᵀ)`; zero for an empty stack.
    pub fn rank_metric(&self) -> f64 {
        self.metric
    }

    fn refresh(&mut self) {
        self.gram.fill(0.0);
        self.cross.fill(0.0);
        for e in &self.entries {
            self.gram.ger(1.0, &e.sigma, &e.sigma, 1.0);
            self.cross.ger(1.0, &e.sigma, &(&e.xdot - &e.gu), 1.0);
        }
        self.metric = if self.entries.is_empty() { 0.0 } else { linalg::min_sym_eigenvalue(&self.gram).max(0.0) };
    }

    /// Appends while there is room; once full, performs the single-slot swap that
    /// maximizes the rank metric, but only if it strictly increases it.
    pub fn try_insert_svmax(&mut self, candidate: StackEntry) -> bool {
        if !self.is_full() {
            self.entries.push(candidate);
            self.refresh();
            return true;
        }
        let base = self.metric;
        let with_candidate = {
            let mut g = self.gram.clone();
            g.ger(1.0, &candidate.sigma, &candidate.sigma, 1.0);
            g
        };
        let mut best: Option<(usize, f64)> = None;
        let mut trial = with_candidate.clone();
        for (slot, e) in self.entries.iter().enumerate() {
            trial.copy_from(&with_candidate);
            trial.ger(-1.0, &e.sigma, &e.sigma, 1.0);
            let metric = linalg::min_sym_eigenvalue(&trial);
            if best.is_none_or(|(_, m)| metric > m) {
                best = Some((slot, metric));
            }
        }
        match best {
            Some((slot, metric)) if metric > base => {
                self.entries[slot] = candidate;
                self.refresh();
                true
            }
            _ => false,
        }
    }

    /// Writes the stack as CSV with columns `t, x, u, xdot_est`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let cols = |name: &str, len: usize| -> Vec<String> {
            if len == 1 { vec![name.to_string()] } else { (1..=len).map(|c| format!("{name}_{c}")).collect() }
        };
        let (n, m) = self.entries.first().map_or((1, 1), |e| (e.x.len(), e.u.len()));
        let mut header = vec!["t".to_string()];
        header.extend(cols("x", n));
        header.extend(cols("u", m));
        header.extend(cols("xdot_est", n));
        writeln!(w, "{}", header.join(","))?;
        for e in &self.entries {
            let row: Vec<String> = std::iter::once(e.t)
                .chain(e.x.iter().copied())
                .chain(e.u.iter().copied())
                .chain(e.xdot.iter().copied())
                .map(|v| format!("{v:.8e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
