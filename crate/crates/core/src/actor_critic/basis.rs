//! Polynomial value-function dictionaries over `𝓔_i = [e_{S_i}; x_i]`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::netgraph::SubgraphIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("empty basis")]
    Empty,
    #[error("cannot parse term `{term}`: {reason}")]
    Parse { term: String, reason: String },
    #[error("term `{term}` uses {var}, which is not available to agent {agent}")]
    UnknownVariable { term: String, var: String, agent: usize },
}

/// `coeff · Π_v z_v^{p_v}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub factors: Vec<(usize, u32)>,
}

impl Monomial {
    fn eval(&self, z: &[f64]) -> f64 {
        self.factors.iter().fold(self.coeff, |acc, &(v, p)| acc * z[v].powi(p as i32))
    }

    fn partial(&self, z: &[f64], var: usize) -> f64 {
        let mut acc = self.coeff;
        let mut hit = false;
        for &(v, p) in &self.factors {
            if v == var {
                hit = true;
                acc *= p as f64 * z[v].powi(p as i32 - 1);
            } else {
                acc *= z[v].powi(p as i32);
            }
        }
        if hit { acc } else { 0.0 }
    }
}

/// `σ_i: R^{n(s_i+1)} → R^{L_i}`, a list of monomials in the entries of `𝓔_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueBasis {
    input_dim: usize,
    state_dim: usize,
    terms: Vec<Monomial>,
}

impl ValueBasis {
    pub fn new(input_dim: usize, state_dim: usize, terms: Vec<Monomial>) -> Result<Self, BasisError> {
        if terms.is_empty() {
            return Err(BasisError::Empty);
        }
        Ok(Self { input_dim, state_dim, terms })
    }

    /// Parses terms such as `0.5*e1^2*x1^2` for the owner of `sub`.
    ///
    /// `e<j>` is the neighborhood error of agent `j` (1-based, must lie in `S_i`),
    /// `x<i>` the owner's own state; vector components are selected with `[c]`
    /// (1-based) and default to the first.
    pub fn parse<S: AsRef<str>>(terms: &[S], sub: &SubgraphIndex, state_dim: usize) -> Result<Self, BasisError> {
        let parsed = terms
            .iter()
            .map(|t| parse_term(t.as_ref(), sub, state_dim))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(state_dim * (sub.size() + 1), state_dim, parsed)
    }

    /// `L_i`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.terms.len(), self.terms.iter().map(|t| t.eval(z.as_slice())))
    }

    /// `∇σ_i`, `L_i × n(s_i+1)`.
    pub fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.terms.len(), self.input_dim);
        for (r, t) in self.terms.iter().enumerate() {
            for &(v, _) in &t.factors {
                jac[(r, v)] = t.partial(z.as_slice(), v);
            }
        }
        jac
    }

    /// Columns `∇_{e_j}σ_i` for the member in slot `slot` of `λ_i`.
    pub fn error_block(&self, jac: &DMatrix<f64>, slot: usize) -> DMatrix<f64> {
        jac.columns(slot * self.state_dim, self.state_dim).into_owned()
    }

    /// Columns `∇_{x_i}σ_i`.
    pub fn state_block(&self, jac: &DMatrix<f64>) -> DMatrix<f64> {
        jac.columns(self.input_dim - self.state_dim, self.state_dim).into_owned()
    }
}

fn parse_term(term: &str, sub: &SubgraphIndex, n: usize) -> Result<Monomial, BasisError> {
    let err = |reason: &str| BasisError::Parse { term: term.to_string(), reason: reason.to_string() };
    let compact: String = term.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(err("empty term"));
    }
    let mut coeff = 1.0;
    let mut factors: Vec<(usize, u32)> = Vec::new();
    for factor in compact.split('*') {
        if factor.is_empty() {
            return Err(err("empty factor"));
        }
        let first = factor.chars().next().unwrap();
        if first != 'e' && first != 'x' {
            coeff *= factor.parse::<f64>().map_err(|_| err("expected a number or a variable"))?;
            continue;
        }
        let (var, power) = match factor.split_once('^') {
            Some((v, p)) => (v, p.parse::<u32>().map_err(|_| err("bad exponent"))?),
            None => (factor, 1),
        };
        let (name, comp) = match var.split_once('[') {
            Some((name, rest)) => {
                let c = rest.strip_suffix(']').ok_or_else(|| err("unclosed component"))?;
                (name, c.parse::<usize>().map_err(|_| err("bad component"))?)
            }
            None => (var, 1),
        };
        if comp == 0 || comp > n {
            return Err(err("component out of range"));
        }
        let agent: usize = name[1..].parse().map_err(|_| err("bad agent index"))?;
        let unknown = || BasisError::UnknownVariable {
            term: term.to_string(),
            var: name.to_string(),
            agent: sub.agent + 1,
        };
        if agent == 0 {
            return Err(unknown());
        }
        let slot = match first {
            'e' => sub.position(agent - 1).ok_or_else(unknown)?,
            _ if agent - 1 == sub.agent => sub.size(),
            _ => return Err(unknown()),
        };
        let v = slot * n + comp - 1;
        if power == 0 {
            continue;
        }
        match factors.iter_mut().find(|(w, _)| *w == v) {
            Some(f) => f.1 += power,
            None => factors.push((v, power)),
        }
    }
    Ok(Monomial { coeff, factors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub5() -> SubgraphIndex {
        SubgraphIndex { agent: 4, ordering: vec![4, 2, 3] }
    }

    #[test]
    fn parses_products_and_powers() {
        let b = ValueBasis::parse(&["0.5*e3^2*e5^2", "0.5*e5^2*x5^2", "2"], &sub5(), 1).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.input_dim(), 4);
        let z = DVector::from_vec(vec![0.5, 2.0, -1.0, 3.0]);
        let v = b.eval(&z);
        assert!((v[0] - 0.5 * 4.0 * 0.25).abs() < 1e-15);
        assert!((v[1] - 0.5 * 0.25 * 9.0).abs() < 1e-15);
        assert_eq!(v[2], 2.0);
    }

    #[test]
    fn rejects_foreign_variables() {
        assert!(matches!(
            ValueBasis::parse(&["e1^2"], &sub5(), 1),
            Err(BasisError::UnknownVariable { .. })
        ));
        assert!(matches!(
            ValueBasis::parse(&["x3^2"], &sub5(), 1),
            Err(BasisError::UnknownVariable { .. })
        ));
        assert!(matches!(ValueBasis::parse(&["e5^^2"], &sub5(), 1), Err(BasisError::Parse { .. })));
    }

    #[test]
    fn components_address_vector_states() {
        let sub = SubgraphIndex { agent: 0, ordering: vec![0] };
        let b = ValueBasis::parse(&["e1[2]*x1[1]"], &sub, 2).unwrap();
        let z = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        assert_eq!(b.eval(&z)[0], 15.0);
        let j = b.jacobian(&z);
        assert_eq!(j.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 5.0, 3.0, 0.0]);
    }
}
