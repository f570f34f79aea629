//! Finite scalar Laurent polynomials and exact univariate polynomials.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::scalar::{q_int, Scalar, C64, Q};

/// `Σ cₙ uⁿ` with finitely many nonzero terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Laurent<S> {
    terms: BTreeMap<i64, S>,
}

impl<S: Scalar> Default for Laurent<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Scalar> Laurent<S> {
    pub fn zero() -> Self {
        Laurent { terms: BTreeMap::new() }
    }

    pub fn monomial(n: i64, c: S) -> Self {
        let mut l = Self::zero();
        l.add_term(n, c);
        l
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (i64, S)>) -> Self {
        let mut l = Self::zero();
        for (n, c) in terms {
            l.add_term(n, c);
        }
        l
    }

    pub fn add_term(&mut self, n: i64, c: S) {
        if c.is_zero() {
            return;
        }
        let v = match self.terms.remove(&n) {
            Some(old) => old.add_ref(&c),
            None => c,
        };
        if !v.is_zero() {
            self.terms.insert(n, v);
        }
    }

    pub fn coeff(&self, n: i64) -> S {
        self.terms.get(&n).cloned().unwrap_or_else(S::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &S)> {
        self.terms.iter().map(|(n, c)| (*n, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn min_exp(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (n, c) in other.terms() {
            out.add_term(n, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::from_terms(self.terms().map(|(n, v)| (n, v.mul_ref(c))))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                out.add_term(a + b, ca.mul_ref(cb));
            }
        }
        out
    }

    /// Evaluates at `u`; `None` at `u = 0` when negative powers are present.
    pub fn eval_c64(&self, u: C64) -> Option<C64> {
        if u == C64::zero() && self.min_exp().is_some_and(|m| m < 0) {
            return None;
        }
        Some(self.terms().map(|(n, c)| c.to_c64() * u.powi(n as i32)).sum())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Laurent<T> {
        Laurent::from_terms(self.terms().map(|(n, c)| (n, f(c))))
    }
}

/// Exact polynomial `Σ cᵢ xⁱ`, coefficients in ascending degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    coeffs: Vec<Q>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Q) -> Self {
        Poly::new(vec![c])
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.coeffs.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_int(&self, x: i64) -> Q {
        self.eval(&q_int(x))
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Poly, i: usize| p.coeffs.get(i).cloned().unwrap_or_else(Q::zero);
        Poly::new((0..n).map(|i| get(self, i) + get(other, i)).collect())
    }

    pub fn scale(&self, c: &Q) -> Poly {
        Poly::new(self.coeffs.iter().map(|v| v * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![Q::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// `p(x + 1)`.
    pub fn shift_by_one(&self) -> Poly {
        // Horner in the basis (x + 1).
        let x_plus_one = Poly::new(vec![Q::one(), Q::one()]);
        self.coeffs
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, c| acc.mul(&x_plus_one).add(&Poly::constant(c.clone())))
    }

    /// `(Δ₊p)(x) = p(x+1) − p(x)`.
    pub fn forward_difference(&self) -> Poly {
        self.shift_by_one().add(&self.scale(&-Q::one()))
    }

    pub fn forward_difference_n(&self, k: usize) -> Poly {
        (0..k).fold(self.clone(), |p, _| p.forward_difference())
    }

    /// Unique interpolant of degree `< points.len()` through `(xᵢ, yᵢ)`.
    /// The abscissae must be distinct.
    pub fn lagrange(points: &[(Q, Q)]) -> Poly {
        let mut out = Poly::zero();
        for (i, (xi, yi)) in points.iter().enumerate() {
            let mut basis = Poly::constant(yi.clone());
            for (j, (xj, _)) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let denom = xi - xj;
                basis = basis.mul(&Poly::new(vec![-xj / &denom, Q::one() / &denom]));
            }
            out = out.add(&basis);
        }
        out
    }
}
