//! Untruncated polynomial arithmetic for checking truncated matrices.

use std::collections::BTreeMap;

use droem_core::scalar::q_int;
use droem_core::{LinOp, Q};
use num_traits::Zero;

/// `Σ cₙ zⁿ`, sparse, no degree cap.
pub type Poly = BTreeMap<usize, Q>;

pub fn monomial(n: usize) -> Poly {
    BTreeMap::from([(n, q_int(1))])
}

fn add_into(acc: &mut Poly, n: usize, c: Q) {
    let e = acc.entry(n).or_insert_with(Q::zero);
    *e += c;
    if e.is_zero() {
        acc.remove(&n);
    }
}

pub fn d(p: &Poly) -> Poly {
    let mut out = Poly::new();
    for (n, c) in p {
        if *n > 0 {
            add_into(&mut out, n - 1, c * q_int(*n as i64));
        }
    }
    out
}

pub fn times_z(p: &Poly) -> Poly {
    p.iter().map(|(n, c)| (n + 1, c.clone())).collect()
}

pub fn scale(p: &Poly, c: &Q) -> Poly {
    let mut out = Poly::new();
    for (n, v) in p {
        add_into(&mut out, *n, v * c);
    }
    out
}

pub fn sum(a: &Poly, b: &Poly) -> Poly {
    let mut out = a.clone();
    for (n, c) in b {
        add_into(&mut out, *n, c.clone());
    }
    out
}

/// Differential operators built from `z` and `∂` only.
#[derive(Clone, Debug)]
pub enum Op {
    /// `L_{-1} = z`, `L_k = z∂^{k+1} + (k+1)h∂^k` for `k ≥ 0`.
    VectorField(i64),
    Derivative(usize),
    Multiply(usize),
}

pub fn apply(op: &Op, h: &Q, p: &Poly) -> Poly {
    match op {
        Op::VectorField(-1) => times_z(p),
        Op::VectorField(k) => {
            let k = *k as usize;
            let mut dk = p.clone();
            for _ in 0..k {
                dk = d(&dk);
            }
            sum(&times_z(&d(&dk)), &scale(&dk, &(q_int(k as i64 + 1) * h)))
        }
        Op::Derivative(k) => (0..*k).fold(p.clone(), |acc, _| d(&acc)),
        Op::Multiply(k) => (0..*k).fold(p.clone(), |acc, _| times_z(&acc)),
    }
}

/// Applies `word[0] ∘ word[1] ∘ …` to `p`.
pub fn apply_word(word: &[Op], h: &Q, p: &Poly) -> Poly {
    word.iter().rev().fold(p.clone(), |acc, op| apply(op, h, &acc))
}

/// Compares columns `0..=upto` of `op` with the untruncated image of `zʲ`.
/// Returns the first bad column.
pub fn first_bad_column(op: &LinOp<Q>, image: impl Fn(usize) -> Poly, upto: usize) -> Option<usize> {
    let dim = op.dim();
    (0..=upto.min(dim - 1)).find(|&j| {
        let want = image(j);
        if want.keys().any(|n| *n >= dim) {
            return true;
        }
        (0..dim).any(|i| *op.get(i, j) != want.get(&i).cloned().unwrap_or_else(Q::zero))
    })
}
