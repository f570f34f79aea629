//! Truncated Verma modules over sl(2) and the graded operator calculus on
//! them.
//!
//! The module `V_h` is realized on polynomials `z⁰ … z^D`. Operators are
//! stored as full `(D+1)×(D+1)` matrices whose column `j` is the image of
//! `z^j`. Every operator carries a degree-shift envelope (`raise`, `lower`)
//! and `exact_below`: the largest input degree on which the truncated matrix
//! agrees with the untruncated operator.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{DroemError, Result};
use crate::scalar::{format_q, q_int, Scalar, C64, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarMode {
    ExactRational,
    ComplexDouble,
}

/// Extremal weight `h` of the module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weight(Q);

impl Weight {
    pub fn new(h: Q) -> Self {
        Weight(h)
    }

    pub fn value(&self) -> &Q {
        &self.0
    }

    /// `ħ = h − 1/2`.
    pub fn hbar(&self) -> Q {
        &self.0 - Q::new(1.into(), 2.into())
    }

    pub fn to_f64(&self) -> f64 {
        crate::scalar::q_to_f64(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedVermaModule {
    h: Weight,
    degree: usize,
    mode: ScalarMode,
}

/// Builds the module with basis `z⁰ … z^D`. Requires `D ≥ 2` and
/// `2h + i ≠ 0` for `i ∈ [0, D+2]`.
pub fn make_module(h: Q, degree: usize, mode: ScalarMode) -> Result<TruncatedVermaModule> {
    if degree < 2 {
        return Err(DroemError::Domain(format!("truncation degree {degree} < 2")));
    }
    let two_h = &h * q_int(2);
    for i in 0..=(degree as i64 + 2) {
        if (&two_h + q_int(i)).is_zero() {
            return Err(DroemError::Pole { h: format_q(&h), index: i });
        }
    }
    Ok(TruncatedVermaModule { h: Weight(h), degree, mode })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolyState<S> {
    pub coeffs: Vec<S>,
}

impl<S: Scalar> PolyState<S> {
    pub fn new(coeffs: Vec<S>) -> Self {
        PolyState { coeffs }
    }

    pub fn monomial(dim: usize, n: usize) -> Self {
        let mut coeffs = vec![S::zero(); dim];
        coeffs[n] = S::one();
        PolyState { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Highest degree with a nonzero coefficient.
    pub fn top_degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }
}

/// Diagonal symbol: `Q(z∂_z) zⁱ = qᵢ zⁱ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagSymbol<S> {
    pub values: Vec<S>,
}

impl<S: Scalar> DiagSymbol<S> {
    pub fn from_fn(dim: usize, f: impl Fn(usize) -> S) -> Self {
        DiagSymbol { values: (0..dim).map(f).collect() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinOp<S> {
    dim: usize,
    data: Vec<S>,
    raise: usize,
    lower: usize,
    exact_below: i64,
}

impl<S: Scalar> LinOp<S> {
    pub fn zeros(dim: usize) -> Self {
        LinOp { dim, data: vec![S::zero(); dim * dim], raise: 0, lower: 0, exact_below: dim as i64 - 1 }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.data[i * dim + i] = S::one();
        }
        op
    }

    /// Builds an operator from its matrix entries and bookkeeping.
    pub fn from_fn(dim: usize, raise: usize, lower: usize, exact_below: i64, f: impl Fn(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        LinOp { dim, data, raise, lower, exact_below }
    }

    /// Homogeneous operator `zʲ ↦ cⱼ z^{j+shift}` with constructor bookkeeping.
    pub fn shift_op(dim: usize, shift: i64, coeff: impl Fn(usize) -> S) -> Self {
        let degree = dim as i64 - 1;
        let mut op = Self::zeros(dim);
        for j in 0..dim {
            let target = j as i64 + shift;
            if (0..dim as i64).contains(&target) {
                op.data[target as usize * dim + j] = coeff(j);
            }
        }
        op.raise = shift.max(0) as usize;
        op.lower = (-shift).max(0) as usize;
        op.exact_below = degree - op.raise as i64;
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.dim - 1
    }

    pub fn raise(&self) -> usize {
        self.raise
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn exact_below(&self) -> i64 {
        self.exact_below
    }

    /// Largest degree `d` such that inputs supported on `≤ d` are exact.
    pub fn valid_degrees(&self) -> Option<usize> {
        (self.exact_below >= 0).then(|| (self.exact_below as usize).min(self.degree()))
    }

    pub fn with_bookkeeping(mut self, raise: usize, lower: usize, exact_below: i64) -> Self {
        self.raise = raise.min(self.degree());
        self.lower = lower.min(self.degree());
        self.exact_below = exact_below;
        self
    }

    pub fn with_exact_below(mut self, exact_below: i64) -> Self {
        self.exact_below = exact_below;
        self
    }

    pub fn get(&self, row: usize, col: usize) -> &S {
        &self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: S) {
        self.data[row * self.dim + col] = value;
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    fn check_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.dim != other.dim {
            return Err(DroemError::Shape(format!("{what}: {} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_shape(other, "compose")?;
        let n = self.dim;
        let mut data = vec![S::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &other.data[k * n + j];
                    if !b.is_zero() {
                        data[i * n + j] = data[i * n + j].add_ref(&a.mul_ref(b));
                    }
                }
            }
        }
        let d = self.degree();
        Ok(LinOp {
            dim: n,
            data,
            raise: (self.raise + other.raise).min(d),
            lower: (self.lower + other.lower).min(d),
            exact_below: other.exact_below.min(self.exact_below - other.raise as i64),
        })
    }

    fn combine(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Self {
        LinOp {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
            raise: self.raise.max(other.raise),
            lower: self.lower.max(other.lower),
            exact_below: self.exact_below.min(other.exact_below),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other, "add")?;
        Ok(self.combine(other, |a, b| a.add_ref(b)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other, "sub")?;
        Ok(self.combine(other, |a, b| a.sub_ref(b)))
    }

    pub fn scale(&self, c: &S) -> Self {
        LinOp {
            data: self.data.iter().map(|a| a.mul_ref(c)).collect(),
            ..self.clone()
        }
    }

    /// Adds `c · other` in place.
    pub fn axpy(&mut self, c: &S, other: &Self) -> Result<()> {
        self.check_shape(other, "axpy")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            if !b.is_zero() {
                *a = a.add_ref(&c.mul_ref(b));
            }
        }
        self.raise = self.raise.max(other.raise);
        self.lower = self.lower.max(other.lower);
        self.exact_below = self.exact_below.min(other.exact_below);
        Ok(())
    }

    pub fn apply(&self, state: &PolyState<S>) -> Result<PolyState<S>> {
        if state.dim() != self.dim {
            return Err(DroemError::Shape(format!("apply: operator {} vs state {}", self.dim, state.dim())));
        }
        let n = self.dim;
        let coeffs = (0..n)
            .map(|i| {
                let mut acc = S::zero();
                for (j, c) in state.coeffs.iter().enumerate() {
                    let a = &self.data[i * n + j];
                    if !a.is_zero() && !c.is_zero() {
                        acc = acc.add_ref(&a.mul_ref(c));
                    }
                }
                acc
            })
            .collect();
        Ok(PolyState { coeffs })
    }

    /// Exact (or bitwise) agreement on the columns `0..=upto`.
    pub fn agrees_on(&self, other: &Self, upto: usize) -> bool {
        let n = self.dim;
        self.dim == other.dim
            && (0..n).all(|i| (0..=upto.min(n - 1)).all(|j| self.data[i * n + j] == other.data[i * n + j]))
    }

    pub fn is_zero_on(&self, upto: usize) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..=upto.min(n - 1)).all(|j| self.data[i * n + j].is_zero()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    /// Largest entry modulus on the columns `0..=upto`.
    pub fn max_abs_on(&self, upto: usize) -> f64 {
        let n = self.dim;
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..=upto.min(n - 1) {
                m = m.max(self.data[i * n + j].abs_f64());
            }
        }
        m
    }

    /// Frobenius norm of the leading `(upto+1)×(upto+1)` block.
    pub fn window_frobenius(&self, upto: usize) -> f64 {
        let n = self.dim;
        let w = upto.min(n - 1);
        let mut s = 0.0;
        for i in 0..=w {
            for j in 0..=w {
                s += self.data[i * n + j].to_c64().norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn frobenius(&self) -> f64 {
        self.window_frobenius(self.dim - 1)
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> LinOp<T> {
        LinOp {
            dim: self.dim,
            data: self.data.iter().map(f).collect(),
            raise: self.raise,
            lower: self.lower,
            exact_below: self.exact_below,
        }
    }

    pub fn to_c64(&self) -> LinOp<C64> {
        self.map(|v| v.to_c64())
    }

    pub fn conj_transpose(&self) -> Self {
        let n = self.dim;
        LinOp::from_fn(n, self.lower, self.raise, self.exact_below, |i, j| self.data[j * n + i].conj())
    }
}

/// `[A, B] = AB − BA`, annotated with the composition rule on both orders.
pub fn commutator<S: Scalar>(a: &LinOp<S>, b: &LinOp<S>) -> Result<LinOp<S>> {
    let ab = a.compose(b)?;
    let ba = b.compose(a)?;
    ab.sub(&ba)
}

impl LinOp<Q> {
    /// Debug dump: rows of `"num/den"` strings.
    pub fn to_debug_json(&self) -> serde_json::Value {
        let n = self.dim;
        serde_json::Value::Array(
            (0..n)
                .map(|i| {
                    serde_json::Value::Array(
                        (0..n).map(|j| serde_json::Value::String(format_q(&self.data[i * n + j]))).collect(),
                    )
                })
                .collect(),
        )
    }
}

fn falling_factorial(j: usize, k: usize) -> Q {
    let mut acc = Q::one();
    for i in 0..k {
        acc *= q_int(j as i64 - i as i64);
    }
    acc
}

impl TruncatedVermaModule {
    pub fn weight(&self) -> &Weight {
        &self.h
    }

    pub fn h(&self) -> &Q {
        &self.h.0
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn mode(&self) -> ScalarMode {
        self.mode
    }

    /// `L_k = z∂^{k+1} + (k+1)h∂^k` for any `k ≥ −1`; `L₋₁ = z`, `L₀ = z∂ + h`,
    /// `L₁ = z∂² + 2h∂`.
    fn vector_field<S: Scalar>(&self, k: i64) -> LinOp<S> {
        let dim = self.dim();
        if k == -1 {
            return LinOp::shift_op(dim, 1, |_| S::one());
        }
        let k_us = k as usize;
        let h = self.h();
        LinOp::shift_op(dim, -k, |j| {
            if j < k_us {
                return S::zero();
            }
            let c = falling_factorial(j, k_us) * (q_int((j - k_us) as i64) + q_int(k + 1) * h);
            S::from_q(&c)
        })
    }

    pub fn sl2_generator<S: Scalar>(&self, k: i64) -> Result<LinOp<S>> {
        if !(-1..=1).contains(&k) {
            return Err(DroemError::Domain(format!("sl2 generator index {k} not in {{-1,0,1}}")));
        }
        Ok(self.vector_field(k))
    }

    pub fn w1_generator<S: Scalar>(&self, k: i64) -> Result<LinOp<S>> {
        if k < 2 {
            return Err(DroemError::Domain(format!("W1 generator index {k} < 2")));
        }
        Ok(self.vector_field(k))
    }

    /// Any `L_k` with `k ≥ −1`.
    pub fn generator<S: Scalar>(&self, k: i64) -> Result<LinOp<S>> {
        if k < -1 {
            return Err(DroemError::Domain(format!("vector-field generator index {k} < -1")));
        }
        Ok(self.vector_field(k))
    }

    /// `∂_z^k`.
    pub fn derivative<S: Scalar>(&self, k: usize) -> LinOp<S> {
        LinOp::shift_op(self.dim(), -(k as i64), |j| {
            if j < k {
                S::zero()
            } else {
                S::from_q(&falling_factorial(j, k))
            }
        })
    }

    /// Multiplication by `z^k`.
    pub fn multiplication<S: Scalar>(&self, k: usize) -> LinOp<S> {
        LinOp::shift_op(self.dim(), k as i64, |_| S::one())
    }

    pub fn diag_operator<S: Scalar>(&self, symbol: &DiagSymbol<S>) -> Result<LinOp<S>> {
        if symbol.values.len() != self.dim() {
            return Err(DroemError::Shape(format!(
                "symbol has {} values for a module of dimension {}",
                symbol.values.len(),
                self.dim()
            )));
        }
        Ok(LinOp::shift_op(self.dim(), 0, |j| symbol.values[j].clone()))
    }

    /// Diagonal Gram matrix of the contravariant form: `G₀ = 1`,
    /// `Gₙ = n(n−1+2h)Gₙ₋₁`. Positive definite for `h > 0`.
    pub fn shapovalov_form(&self) -> Result<Vec<Q>> {
        if !self.h().is_positive() {
            return Err(DroemError::Domain(format!(
                "contravariant form is not positive definite for h = {}",
                format_q(self.h())
            )));
        }
        Ok(self.gram_unchecked())
    }

    pub(crate) fn gram_unchecked(&self) -> Vec<Q> {
        let two_h = self.h() * q_int(2);
        let mut g = vec![Q::one()];
        for n in 1..self.dim() {
            let next = &g[n - 1] * q_int(n as i64) * (q_int(n as i64 - 1) + &two_h);
            g.push(next);
        }
        g
    }

    pub fn basis_state<S: Scalar>(&self, n: usize) -> PolyState<S> {
        PolyState::monomial(self.dim(), n)
    }
}

/// Adjoint under a positive diagonal Gram form:
/// `A*ᵢⱼ = (Gⱼ/Gᵢ)·conj(Aⱼᵢ)`.
pub fn adjoint<S: Scalar>(a: &LinOp<S>, gram: &[Q]) -> Result<LinOp<S>> {
    if gram.len() != a.dim() {
        return Err(DroemError::Shape(format!("gram of length {} for dimension {}", gram.len(), a.dim())));
    }
    if gram.iter().any(|g| !g.is_positive()) {
        return Err(DroemError::Domain("Gram form is not positive".into()));
    }
    let n = a.dim();
    let degree = n as i64 - 1;
    let exact_below = a.exact_below().min(degree) - a.lower() as i64;
    Ok(LinOp::from_fn(n, a.lower(), a.raise(), exact_below, |i, j| {
        let src = a.get(j, i);
        if src.is_zero() {
            S::zero()
        } else {
            S::from_q(&(&gram[j] / &gram[i])).mul_ref(&src.conj())
        }
    }))
}
