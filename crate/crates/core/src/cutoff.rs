//! The cutting-off procedure: interpolating polynomial `P`, cut-off
//! currents, the cut-off dilatation and the nonlinear sl₂ probe.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{DroemError, Result};
use crate::laurent::Poly;
use crate::scalar::{format_q, q_int, q_to_f64, Q};
use crate::verma::{commutator, DiagSymbol, LinOp, TruncatedVermaModule};

/// Lagrange interpolant of degree `≤ N` through `(i, 1/(2h+i))`, `0 ≤ i ≤ N`.
pub fn interp_poly(h: &Q, n: usize) -> Result<Poly> {
    let two_h = h * q_int(2);
    let mut points = Vec::with_capacity(n + 1);
    for i in 0..=n as i64 {
        let d = &two_h + q_int(i);
        if d.is_zero() {
            return Err(DroemError::Pole { h: format_q(h), index: i });
        }
        points.push((q_int(i), Q::one() / d));
    }
    Ok(Poly::lagrange(&points))
}

#[derive(Clone, Debug)]
pub struct CutoffSpec {
    module: TruncatedVermaModule,
    n: usize,
    p: Poly,
}

impl CutoffSpec {
    pub fn new(module: &TruncatedVermaModule, n: usize) -> Result<Self> {
        let p = interp_poly(module.h(), n)?;
        Ok(CutoffSpec { module: module.clone(), n, p })
    }

    pub fn module(&self) -> &TruncatedVermaModule {
        &self.module
    }

    pub fn cutoff_degree(&self) -> usize {
        self.n
    }

    pub fn poly(&self) -> &Poly {
        &self.p
    }

    /// `(Δ₊P)(i)`.
    pub fn difference(&self, i: usize) -> Q {
        self.p.eval_int(i as i64 + 1) - self.p.eval_int(i as i64)
    }
}

/// `J_k = ∂ᵏ` for `k > 0`, `J_{−k} = zᵏ (Δ₊ᵏP)(z∂)` for `k > 0`.
pub fn cutoff_current(spec: &CutoffSpec, k: i64) -> Result<LinOp<Q>> {
    let module = &spec.module;
    let d = module.degree() as i64;
    if k == 0 || k.abs() > d {
        return Err(DroemError::Domain(format!("current index {k} outside 0 < |k| ≤ {d}")));
    }
    if k > 0 {
        return Ok(module.derivative(k as usize));
    }
    let kk = (-k) as usize;
    let diff = spec.p.forward_difference_n(kk);
    let symbol = DiagSymbol::from_fn(module.dim(), |i| diff.eval_int(i as i64));
    module.multiplication::<Q>(kk).compose(&module.diag_operator(&symbol)?)
}

/// Solved dilatation `L₁ᶜᵘᵗ zⁱ = i/(Δ₊P)(i−1) zⁱ⁻¹`, the unique
/// `Q(z∂)∂` with `[L₁ᶜᵘᵗ, J₋₁ᶜᵘᵗ] = Id` on degrees `≤ D−1`.
pub fn solve_cutoff_dilatation(spec: &CutoffSpec) -> Result<LinOp<Q>> {
    let dim = spec.module.dim();
    let mut coeffs = vec![Q::zero(); dim];
    for (i, c) in coeffs.iter_mut().enumerate().skip(1) {
        let d = spec.difference(i - 1);
        if d.is_zero() {
            return Err(DroemError::DegenerateDifference(i - 1));
        }
        *c = q_int(i as i64) / d;
    }
    Ok(LinOp::shift_op(dim, -1, |j| coeffs[j].clone()))
}

/// The printed candidate `z P⁻¹(z∂)`; it raises degree.
pub fn literal_dilatation(spec: &CutoffSpec) -> Result<LinOp<Q>> {
    let dim = spec.module.dim();
    let mut values = Vec::with_capacity(dim);
    for i in 0..dim {
        let v = spec.p.eval_int(i as i64);
        if v.is_zero() {
            return Err(DroemError::Domain(format!("P({i}) = 0, P⁻¹ undefined")));
        }
        values.push(Q::one() / v);
    }
    spec.module.multiplication::<Q>(1).compose(&spec.module.diag_operator(&DiagSymbol { values })?)
}

/// One relation evaluated by the probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub h: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub relation: String,
    pub convention: String,
    /// Frobenius norm of the residual on the valid columns; `None` when the
    /// right-hand side is undefined.
    pub residual_frobenius: Option<f64>,
    pub valid_degrees: Option<usize>,
    /// `"exact"`, `"fails"`, `"undefined"` or `"vacuous"`.
    pub verdict: String,
    /// Largest `d` with the residual vanishing on all columns `≤ d`.
    pub holds_through: Option<usize>,
    /// Residual entries as `"num/den"` strings.
    pub residual_matrix: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub entries: Vec<ProbeEntry>,
}

impl ProbeReport {
    pub fn find(&self, relation: &str, convention: &str) -> Option<&ProbeEntry> {
        self.entries.iter().find(|e| e.relation == relation && e.convention == convention)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn exact_frobenius(op: &LinOp<Q>, upto: usize) -> f64 {
    let n = op.dim();
    let mut s = Q::zero();
    for i in 0..n {
        for j in 0..=upto.min(n - 1) {
            let v = op.get(i, j);
            if !v.is_zero() {
                s += v * v;
            }
        }
    }
    q_to_f64(&s).sqrt()
}

fn holds_through(op: &LinOp<Q>) -> Option<usize> {
    let n = op.dim();
    let first_bad = (0..n).find(|&j| (0..n).any(|i| !op.get(i, j).is_zero()));
    match first_bad {
        None => Some(n - 1),
        Some(0) => None,
        Some(j) => Some(j - 1),
    }
}

fn entry(spec: &CutoffSpec, relation: &str, convention: &str, residual: Option<LinOp<Q>>) -> ProbeEntry {
    let (h, n, d) = (format_q(spec.module.h()), spec.n, spec.module.degree());
    let Some(residual) = residual else {
        return ProbeEntry {
            h,
            n,
            d,
            relation: relation.into(),
            convention: convention.into(),
            residual_frobenius: None,
            valid_degrees: None,
            verdict: "undefined".into(),
            holds_through: None,
            residual_matrix: None,
        };
    };
    let valid = residual.valid_degrees();
    let (frob, verdict) = match valid {
        Some(v) => {
            let f = exact_frobenius(&residual, v);
            (Some(f), if residual.is_zero_on(v) { "exact" } else { "fails" })
        }
        None => (None, "vacuous"),
    };
    ProbeEntry {
        h,
        n,
        d,
        relation: relation.into(),
        convention: convention.into(),
        residual_frobenius: frob,
        valid_degrees: valid,
        verdict: verdict.into(),
        holds_through: holds_through(&residual),
        residual_matrix: Some(residual.to_debug_json()),
    }
}

/// `[A, B] − c·C`.
fn bracket_residual(a: &LinOp<Q>, b: &LinOp<Q>, c: i64, rhs: &LinOp<Q>) -> Result<LinOp<Q>> {
    let mut r = commutator(a, b)?;
    r.axpy(&q_int(-c), rhs)?;
    Ok(r)
}

/// `h(x) = 1/P(x+1) − 1/P(x)` on the diagonal, at `x = i + offset`;
/// `None` where `P` vanishes.
fn h_of_l0(spec: &CutoffSpec, offset: &Q) -> Option<LinOp<Q>> {
    let dim = spec.module.dim();
    let mut values = Vec::with_capacity(dim);
    for i in 0..dim {
        let x = q_int(i as i64) + offset;
        let (p0, p1) = (spec.p.eval(&x), spec.p.eval(&(&x + Q::one())));
        if p0.is_zero() || p1.is_zero() {
            return None;
        }
        values.push(Q::one() / p1 - Q::one() / p0);
    }
    spec.module.diag_operator(&DiagSymbol { values }).ok()
}

/// Evaluates every printed relation of the nonlinear sl₂ triple, for the
/// solved and the literal dilatation, under both readings where the text is
/// ambiguous. Never fails on a relation; only on construction.
pub fn nonlinear_sl2_probe(spec: &CutoffSpec) -> Result<ProbeReport> {
    let module = &spec.module;
    let l0 = module.sl2_generator::<Q>(0)?;
    let lm1 = module.sl2_generator::<Q>(-1)?;
    let id = LinOp::<Q>::identity(module.dim());
    let j_m1 = cutoff_current(spec, -1)?;
    let mut entries = vec![entry(spec, "[L0,L-1]=L-1", "weight grading", Some(bracket_residual(&l0, &lm1, 1, &lm1)?))];

    let solved = solve_cutoff_dilatation(spec).ok();
    let literal = literal_dilatation(spec).ok();
    for (name, cand) in [("solved", solved), ("literal", literal)] {
        let tag = |s: &str| format!("{name}; {s}");
        let with = |f: &dyn Fn(&LinOp<Q>) -> Result<LinOp<Q>>| -> Result<Option<LinOp<Q>>> {
            cand.as_ref().map(f).transpose()
        };
        entries.push(entry(
            spec,
            "[L1cut,J-1cut]=1",
            &tag("identity"),
            with(&|x| bracket_residual(x, &j_m1, 1, &id))?,
        ));
        entries.push(entry(spec, "[L1cut,L0]=L1cut", &tag("as printed"), with(&|x| bracket_residual(x, &l0, 1, x))?));
        entries.push(entry(spec, "[L0,L1cut]=L1cut", &tag("reversed"), with(&|x| bracket_residual(&l0, x, 1, x))?));
        for (arg, offset) in [("argument z∂", Q::zero()), ("argument z∂+h", module.h().clone())] {
            let rhs = h_of_l0(spec, &offset);
            let residual = match (&cand, rhs) {
                (Some(x), Some(r)) => Some(bracket_residual(x, &lm1, 1, &r)?),
                _ => None,
            };
            entries.push(entry(spec, "[L1cut,L-1]=h(L0)", &tag(arg), residual));
        }
    }
    Ok(ProbeReport { entries })
}
