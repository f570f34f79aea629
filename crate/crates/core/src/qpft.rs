//! Primary operator fields on a truncated module, smeared fields, operator
//! product expansions and the renormalized local product.
//!
//! A field `φ(u) = Σ lₙ uⁿ` is primary of spin `m` when
//! `[L_k, φ(u)] = (−u)^k (u∂_u + (k+1)m) φ(u)` for `k ∈ {−1, 0, 1}`. In modes:
//!
//! * `[L₋₁, lₙ] = −(n+1) lₙ₊₁`
//! * `[L₀, lₙ] = (n+m) lₙ`, so `lₙ` shifts degree by `n+m`
//! * `[L₁, lₙ] = −(n−1+2m) lₙ₋₁`

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{DroemError, Result};
use crate::laurent::Laurent;
use crate::linalg;
use crate::scalar::{binom, format_q, q_int, Scalar, C64, Q};
use crate::verma::{commutator, LinOp, ScalarMode, TruncatedVermaModule};

/// Finite Laurent series `Σ lₙ uⁿ` with operator coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentOpField<S> {
    dim: usize,
    n_min: i64,
    modes: Vec<LinOp<S>>,
}

impl<S: Scalar> LaurentOpField<S> {
    pub fn new(dim: usize, n_min: i64, modes: Vec<LinOp<S>>) -> Result<Self> {
        if modes.is_empty() {
            return Err(DroemError::Domain("field needs at least one mode".into()));
        }
        if let Some(bad) = modes.iter().find(|m| m.dim() != dim) {
            return Err(DroemError::Shape(format!("mode of dimension {} in a field of dimension {dim}", bad.dim())));
        }
        Ok(LaurentOpField { dim, n_min, modes })
    }

    /// `l_u ≡ Id`, the single mode `n = 0`.
    pub fn identity(dim: usize) -> Self {
        LaurentOpField { dim, n_min: 0, modes: vec![LinOp::identity(dim)] }
    }

    pub fn zero(dim: usize) -> Self {
        LaurentOpField { dim, n_min: 0, modes: vec![LinOp::zeros(dim)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.modes.len() as i64 - 1
    }

    pub fn mode(&self, n: i64) -> Option<&LinOp<S>> {
        if n < self.n_min {
            return None;
        }
        self.modes.get((n - self.n_min) as usize)
    }

    /// Mode `n`, or the zero operator outside the stored range.
    pub fn mode_or_zero(&self, n: i64) -> LinOp<S> {
        self.mode(n).cloned().unwrap_or_else(|| LinOp::zeros(self.dim))
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, &LinOp<S>)> {
        self.modes.iter().enumerate().map(move |(i, m)| (self.n_min + i as i64, m))
    }

    /// Largest input degree on which every mode is exact.
    pub fn valid_degrees(&self) -> Option<usize> {
        self.modes.iter().map(|m| m.valid_degrees()).min().flatten()
    }

    pub fn scale(&self, c: &S) -> Self {
        LaurentOpField { dim: self.dim, n_min: self.n_min, modes: self.modes.iter().map(|m| m.scale(c)).collect() }
    }

    fn needs_nonzero_argument(&self) -> bool {
        self.n_min < 0
    }

    /// `Σ lₙ xⁿ` at a scalar point, in the field's own arithmetic.
    pub fn eval_exact(&self, x: &S) -> Result<LinOp<S>> {
        if x.is_zero() && self.needs_nonzero_argument() {
            return Err(DroemError::EvalDomain("u = 0 with negative modes".into()));
        }
        let mut acc = LinOp::zeros(self.dim);
        let inv = if x.is_zero() { S::zero() } else { S::one() / x.clone() };
        for (n, m) in self.modes() {
            let p = power(x, &inv, n);
            if !p.is_zero() {
                acc.axpy(&p, m)?;
            } else if n == 0 {
                acc.axpy(&S::one(), m)?;
            }
        }
        Ok(acc)
    }

    /// `Σ lₙ uⁿ` in complex doubles.
    pub fn eval(&self, u: C64) -> Result<LinOp<C64>> {
        if u == C64::zero() && self.needs_nonzero_argument() {
            return Err(DroemError::EvalDomain("u = 0 with negative modes".into()));
        }
        let mut acc = LinOp::<C64>::zeros(self.dim);
        for (n, m) in self.modes() {
            let p = if n == 0 { C64::one() } else { u.powi(n as i32) };
            acc.axpy(&p, &m.to_c64())?;
        }
        Ok(acc)
    }

    pub fn to_c64(&self) -> LaurentOpField<C64> {
        LaurentOpField { dim: self.dim, n_min: self.n_min, modes: self.modes.iter().map(|m| m.to_c64()).collect() }
    }
}

fn power<S: Scalar>(x: &S, inv: &S, n: i64) -> S {
    let (base, e) = if n >= 0 { (x, n) } else { (inv, -n) };
    let mut acc = S::one();
    for _ in 0..e {
        acc = acc.mul_ref(base);
    }
    acc
}

/// `φ(f) = res_{u=0} f(u) φ(u) du/u = Σₙ lₙ · [u⁻ⁿ] f`.
pub fn smear<S: Scalar>(field: &LaurentOpField<S>, f: &Laurent<S>) -> LinOp<S> {
    let mut acc = LinOp::zeros(field.dim());
    for (n, m) in field.modes() {
        let c = f.coeff(-n);
        if !c.is_zero() {
            acc.axpy(&c, m).expect("modes share the field dimension");
        }
    }
    acc
}

/// Data for one primary-field solve.
#[derive(Clone, Debug)]
pub struct PrimarySpec<S> {
    pub spin: Q,
    pub n_min: i64,
    pub n_max: i64,
    /// Top mode `l_{n_max}`; defaults to multiplication by `z^{n_max+m}`.
    pub seed: Option<LinOp<S>>,
}

impl<S> PrimarySpec<S> {
    pub fn new(spin: i64, n_min: i64, n_max: i64) -> Self {
        PrimarySpec { spin: q_int(spin), n_min, n_max, seed: None }
    }

    /// Modes `[−D−m, −1]`: from the translation-invariant top mode down to
    /// the last mode that is nonzero at truncation degree `D`.
    pub fn natural(spin: i64, degree: usize) -> Self {
        Self::new(spin, -(degree as i64) - spin, -1)
    }
}

fn integral_spin(spin: &Q) -> Result<i64> {
    if !spin.is_integer() {
        return Err(DroemError::Domain(format!("spin {} does not give integral degree shifts", format_q(spin))));
    }
    spin.to_integer().try_into().map_err(|_| DroemError::Domain("spin out of range".into()))
}

/// Residual of one mode relation, evaluated on the degrees where it is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeResidual {
    pub k: i64,
    pub n: i64,
    pub max_residual: f64,
    pub zero: bool,
    pub valid_degrees: Option<usize>,
}

/// Solves the three defining relations for a field of spin `m` with modes in
/// `[n_min, n_max]`, generating downward from the top mode.
pub fn solve_primary_field<S: Scalar>(
    module: &TruncatedVermaModule,
    spec: &PrimarySpec<S>,
) -> Result<LaurentOpField<S>> {
    if spec.n_min > spec.n_max {
        return Err(DroemError::Domain(format!("empty mode range [{}, {}]", spec.n_min, spec.n_max)));
    }
    let m = integral_spin(&spec.spin)?;
    let dim = module.dim();
    let degree = module.degree() as i64;
    let l1 = module.sl2_generator::<S>(1)?;
    let top_shift = spec.n_max + m;
    let seed = match &spec.seed {
        Some(s) => s.clone(),
        None => {
            if top_shift < 0 || top_shift > degree {
                return Err(DroemError::NoSolution(format!(
                    "no translation-invariant top mode shifting degree by {top_shift}"
                )));
            }
            module.multiplication::<S>(top_shift as usize)
        }
    };
    if seed.dim() != dim {
        return Err(DroemError::Shape(format!("seed of dimension {} for a module of dimension {dim}", seed.dim())));
    }
    let count = (spec.n_max - spec.n_min + 1) as usize;
    let mut modes_desc = Vec::with_capacity(count);
    modes_desc.push(seed);
    for n in ((spec.n_min + 1)..=spec.n_max).rev() {
        let current = modes_desc.last().expect("seeded");
        let coeff = n - 1 + 2 * m;
        let next = if coeff != 0 {
            let c = S::from_i64(-1) / S::from_i64(coeff);
            commutator(&l1, current)?.scale(&c)
        } else {
            translation_preimage(module, current, n, n - 1 + m)?
        };
        modes_desc.push(next);
    }
    modes_desc.reverse();
    let field = LaurentOpField::new(dim, spec.n_min, modes_desc)?;
    if field.modes.iter().all(|m| m.is_zero()) {
        return Err(DroemError::NoSolution("only the zero field satisfies the relations".into()));
    }
    let residuals = primary_residuals(module, &field, &spec.spin)?;
    if let Some(bad) = residuals.iter().find(|r| !r.zero) {
        return Err(DroemError::NoSolution(format!(
            "relation k = {} fails at mode {} (residual {:e})",
            bad.k, bad.n, bad.max_residual
        )));
    }
    Ok(field)
}

/// Solves `[L₋₁, Y] = −n·lₙ` for `Y` shifting degree by `shift`.
fn translation_preimage<S: Scalar>(
    module: &TruncatedVermaModule,
    upper: &LinOp<S>,
    n: i64,
    shift: i64,
) -> Result<LinOp<S>> {
    let dim = module.dim();
    let degree = module.degree() as i64;
    let rhs_op = upper.scale(&S::from_i64(-n));
    let Some(upper_valid) = upper.valid_degrees() else {
        return Err(DroemError::NoSolution("upper mode has no exact degrees".into()));
    };
    // Unknown yⱼ: Y zʲ = yⱼ z^{j+shift}, for the columns whose image is in range.
    let cols: Vec<usize> = (0..dim).filter(|&j| (0..=degree).contains(&(j as i64 + shift))).collect();
    let index = |j: usize| cols.iter().position(|&c| c == j);
    // Column j of [z, Y] is (yⱼ − yⱼ₊₁) z^{j+shift+1}; exact while that degree fits.
    let last_eq = (upper_valid as i64).min(degree - 1 - shift.max(0)).min(degree - 1);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..=last_eq.max(-1) {
        let j = j as usize;
        let target = j as i64 + shift + 1;
        if !(0..=degree).contains(&target) {
            continue;
        }
        let mut row = vec![S::zero(); cols.len()];
        if let Some(p) = index(j) {
            row[p] = S::one();
        }
        if let Some(p) = index(j + 1) {
            row[p] = row[p].sub_ref(&S::one());
        }
        rows.push(row);
        rhs.push(rhs_op.get(target as usize, j).clone());
    }
    let sol = if rows.is_empty() {
        linalg::Solution { x: vec![S::zero(); cols.len()], free_dim: cols.len() }
    } else {
        linalg::solve(&rows, &rhs, cols.len())
            .ok_or_else(|| DroemError::NoSolution(format!("translation relation is inconsistent at mode {}", n - 1)))?
    };
    let y = LinOp::shift_op(dim, shift, |j| index(j).map(|p| sol.x[p].clone()).unwrap_or_else(S::zero));
    let raise = y.raise() as i64;
    Ok(y.with_exact_below((last_eq + 1).min(degree - raise)))
}

/// Residuals of all three mode relations for every mode of the field (modes
/// outside the stored range count as zero).
pub fn primary_residuals<S: Scalar>(
    module: &TruncatedVermaModule,
    field: &LaurentOpField<S>,
    spin: &Q,
) -> Result<Vec<ModeResidual>> {
    let m = integral_spin(spin)?;
    let gens: Vec<LinOp<S>> = (-1..=1).map(|k| module.sl2_generator::<S>(k)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (n, mode) in field.modes() {
        for k in -1..=1i64 {
            let lhs = commutator(&gens[(k + 1) as usize], mode)?;
            let (coeff, other) = match k {
                -1 => (-(n + 1), field.mode_or_zero(n + 1)),
                0 => (n + m, mode.clone()),
                _ => (-(n - 1 + 2 * m), field.mode_or_zero(n - 1)),
            };
            let mut residual = lhs;
            residual.axpy(&S::from_i64(-coeff), &other)?;
            let valid = residual.valid_degrees();
            let (zero, max_residual) = match valid {
                Some(d) => (residual.is_zero_on(d), residual.max_abs_on(d)),
                None => (true, 0.0),
            };
            out.push(ModeResidual { k, n, max_residual, zero, valid_degrees: valid });
        }
    }
    Ok(out)
}

/// Field of the current algebra: `l_u(zᵏ) = (u + ∂)ᵏ`, modes `C(k,n) ∂^{k−n}`.
pub fn current_field<S: Scalar>(module: &TruncatedVermaModule, k: usize) -> LaurentOpField<S> {
    let modes = (0..=k).map(|n| module.derivative::<S>(k - n).scale(&S::from_q(&binom(k as i64, n as u64)))).collect();
    LaurentOpField { dim: module.dim(), n_min: 0, modes }
}

/// Structure data `t^k_ij(x)` of the current algebra on `z⁰ … z^K`:
/// `m_x(zⁱ, zʲ)(z) = (z+x)ⁱ zʲ`, defined when `i + j ≤ K`.
pub fn current_algebra_structure<S: Scalar>(top: usize) -> StructureField<S> {
    let mut s = StructureField::new(top + 1);
    for i in 0..=top {
        for j in 0..=(top - i) {
            let mut t = vec![Laurent::zero(); top + 1];
            for a in 0..=i {
                t[a + j] = Laurent::monomial((i - a) as i64, S::from_q(&binom(i as i64, a as u64)));
            }
            s.set(i, j, t).expect("indices in range");
        }
    }
    s
}

/// `t^k_ij(x)` for the pairs where it is known.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureField<S> {
    dim: usize,
    entries: BTreeMap<(usize, usize), Vec<Laurent<S>>>,
}

impl<S: Scalar> StructureField<S> {
    pub fn new(dim: usize) -> Self {
        StructureField { dim, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&mut self, i: usize, j: usize, t: Vec<Laurent<S>>) -> Result<()> {
        if i >= self.dim || j >= self.dim || t.len() != self.dim {
            return Err(DroemError::Shape(format!("structure entry ({i}, {j}) with {} components", t.len())));
        }
        self.entries.insert((i, j), t);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Result<&[Laurent<S>]> {
        self.entries.get(&(i, j)).map(|v| v.as_slice()).ok_or(DroemError::MissingStructure(i, j))
    }

    pub fn is_defined(&self, i: usize, j: usize) -> bool {
        self.entries.contains_key(&(i, j))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.keys().copied()
    }

    fn has_negative_powers(&self) -> bool {
        self.entries.values().flatten().any(|l| l.min_exp().is_some_and(|m| m < 0))
    }

    /// `m_x(a, b)`; `Ok(None)` when a needed pair is undefined.
    pub fn product(&self, x: C64, a: &[C64], b: &[C64]) -> Result<Option<Vec<C64>>> {
        let mut out = vec![C64::zero(); self.dim];
        for (i, ai) in a.iter().enumerate() {
            if *ai == C64::zero() {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                if *bj == C64::zero() {
                    continue;
                }
                let Some(t) = self.entries.get(&(i, j)) else {
                    return Ok(None);
                };
                for (k, tk) in t.iter().enumerate() {
                    if tk.is_zero() {
                        continue;
                    }
                    let v = tk
                        .eval_c64(x)
                        .ok_or_else(|| DroemError::SingularSample(format!("t^{k}_{i}{j} at x = {x}")))?;
                    out[k] += ai * bj * v;
                }
            }
        }
        Ok(Some(out))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub max_deviation: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Evaluates `m_x(a, m_y(b, c))` against `m_y(m_{x−y}(a, b), c)` on basis
/// triples at every sample. Triples that need an undefined pair are skipped.
pub fn check_qft_axiom<S: Scalar>(structure: &StructureField<S>, samples: &[(C64, C64)]) -> Result<AxiomReport> {
    let singular = structure.has_negative_powers();
    let dim = structure.dim();
    let basis = |i: usize| {
        let mut v = vec![C64::zero(); dim];
        v[i] = C64::one();
        v
    };
    let mut report = AxiomReport { max_deviation: 0.0, checked: 0, skipped: 0 };
    for &(x, y) in samples {
        if singular && (x == C64::zero() || y == C64::zero() || x == y) {
            return Err(DroemError::SingularSample(format!("(x, y) = ({x}, {y})")));
        }
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let (a, b, c) = (basis(i), basis(j), basis(k));
                    let left = match structure.product(y, &b, &c)? {
                        Some(bc) => structure.product(x, &a, &bc)?,
                        None => None,
                    };
                    let right = match structure.product(x - y, &a, &b)? {
                        Some(ab) => structure.product(y, &ab, &c)?,
                        None => None,
                    };
                    match (left, right) {
                        (Some(l), Some(r)) => {
                            report.checked += 1;
                            let dev = l.iter().zip(&r).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
                            report.max_deviation = report.max_deviation.max(dev);
                        }
                        _ => report.skipped += 1,
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Derivation `L` of an algebra with unit, with `L φ = ∂ₓ m_x(φ, 1)|ₓ₌₀`.
#[derive(Clone, Debug)]
pub struct Translation {
    pub unit: usize,
    /// Column `j` is `L eⱼ`.
    pub matrix: LinOp<C64>,
}

/// Finds the unit (`m_x(1, ·) ≡ id`, `m_0(·, 1) = id`) and returns the
/// infinitesimal translation.
pub fn infinitesimal_translation<S: Scalar>(structure: &StructureField<S>) -> Result<Translation> {
    let dim = structure.dim();
    let is_unit = |u: usize| {
        (0..dim).all(|j| {
            let (Ok(left), Ok(right)) = (structure.get(u, j), structure.get(j, u)) else {
                return false;
            };
            let left_ok = left.iter().enumerate().all(|(k, t)| {
                if k == j {
                    t.terms().all(|(n, c)| if n == 0 { c.is_one() } else { c.is_zero() })
                } else {
                    t.is_zero()
                }
            });
            let right_ok = right.iter().enumerate().all(|(k, t)| {
                let at_zero = t.coeff(0);
                let regular = t.min_exp().is_none_or(|m| m >= 0);
                regular && if k == j { at_zero.is_one() } else { at_zero.is_zero() }
            });
            left_ok && right_ok
        })
    };
    let unit = (0..dim).find(|&u| is_unit(u)).ok_or_else(|| DroemError::NoUnit("no element acts as identity".into()))?;
    let mut matrix = LinOp::<C64>::zeros(dim);
    for j in 0..dim {
        for (k, t) in structure.get(j, unit)?.iter().enumerate() {
            matrix.set(k, j, t.coeff(1).to_c64());
        }
    }
    Ok(Translation { unit, matrix })
}

impl Translation {
    /// Max over basis `φ, b` of `|[L, l_x(φ)] b − l_x(Lφ) b|`.
    pub fn derivation_defect<S: Scalar>(&self, structure: &StructureField<S>, x: C64) -> Result<f64> {
        let dim = structure.dim();
        let apply = |v: &[C64]| {
            let mut out = vec![C64::zero(); dim];
            linalg::matvec_c64(dim, self.matrix.data(), v, &mut out);
            out
        };
        let mut worst = 0.0f64;
        for p in 0..dim {
            let mut phi = vec![C64::zero(); dim];
            phi[p] = C64::one();
            let lphi = apply(&phi);
            for b in 0..dim {
                let mut bv = vec![C64::zero(); dim];
                bv[b] = C64::one();
                let (Some(m_pb), Some(m_p_lb), Some(m_lp_b)) = (
                    structure.product(x, &phi, &bv)?,
                    structure.product(x, &phi, &apply(&bv))?,
                    structure.product(x, &lphi, &bv)?,
                ) else {
                    continue;
                };
                let lhs = apply(&m_pb);
                for k in 0..dim {
                    worst = worst.max((lhs[k] - m_p_lb[k] - m_lp_b[k]).norm());
                }
            }
        }
        Ok(worst)
    }
}

/// Fit of `A(x) B(y) ≈ Σₖ tᵏ(x−y) Cₖ(y)` over candidate fields.
#[derive(Clone, Debug)]
pub struct OpeFit<S> {
    pub coefficients: Vec<Laurent<S>>,
    pub residual: f64,
    pub closed: bool,
}

impl<S: Scalar> OpeFit<S> {
    pub fn into_closed(self) -> Result<Vec<Laurent<S>>> {
        if self.closed {
            Ok(self.coefficients)
        } else {
            Err(DroemError::NotClosed { residual: self.residual })
        }
    }
}

/// Sample points with `x ≠ y`, both nonzero.
pub fn default_ope_samples(count: usize) -> Vec<(Q, Q)> {
    (0..count)
        .map(|i| {
            let i = i as i64;
            (Q::new((7 + 3 * i).into(), 5.into()), Q::new((-2 - i).into(), (3 + i).into()))
        })
        .collect()
}

/// Least-squares fit of the structure functions, exponents of `t` in
/// `[p_min, p_max]`, on the degrees where all fields are exact.
pub fn ope_structure<S: Scalar>(
    a: &LaurentOpField<S>,
    b: &LaurentOpField<S>,
    candidates: &[LaurentOpField<S>],
    exponents: (i64, i64),
    samples: &[(S, S)],
) -> Result<OpeFit<S>> {
    let dim = a.dim();
    if b.dim() != dim || candidates.iter().any(|c| c.dim() != dim) {
        return Err(DroemError::Shape("fields live on different modules".into()));
    }
    let (p_min, p_max) = exponents;
    let np = (p_max - p_min + 1).max(0) as usize;
    let ncols = candidates.len() * np;
    let valid = [a.valid_degrees(), b.valid_degrees()]
        .into_iter()
        .chain(candidates.iter().map(|c| c.valid_degrees()))
        .min()
        .flatten()
        .ok_or_else(|| DroemError::Domain("fields have no exact degrees".into()))?;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (x, y) in samples {
        let diff = x.sub_ref(y);
        if diff.is_zero() {
            return Err(DroemError::SingularSample("x = y".into()));
        }
        let product = a.eval_exact(x)?.compose(&b.eval_exact(y)?)?;
        let cand: Vec<LinOp<S>> = candidates.iter().map(|c| c.eval_exact(y)).collect::<Result<_>>()?;
        let inv = S::one() / diff.clone();
        let pows: Vec<S> = (p_min..=p_max).map(|p| power(&diff, &inv, p)).collect();
        for r in 0..dim {
            for c in 0..=valid {
                let mut row = Vec::with_capacity(ncols);
                for op in &cand {
                    for pw in &pows {
                        row.push(op.get(r, c).mul_ref(pw));
                    }
                }
                rows.push(row);
                rhs.push(product.get(r, c).clone());
            }
        }
    }
    let ls = linalg::least_squares(&rows, &rhs, ncols);
    let coefficients = (0..candidates.len())
        .map(|k| Laurent::from_terms((0..np).map(|i| (p_min + i as i64, ls.x[k * np + i].clone()))))
        .collect();
    let residual = ls.residual();
    let closed = if S::EXACT { ls.residual_sq.is_zero() } else { residual <= 1e-9 };
    Ok(OpeFit { coefficients, residual, closed })
}

/// Smeared fields together with the structure data that closes their
/// products.
#[derive(Clone, Debug)]
pub struct LocalFieldAlgebra<S> {
    fields: Vec<LaurentOpField<S>>,
    structure: StructureField<S>,
}

impl<S: Scalar> LocalFieldAlgebra<S> {
    pub fn new(fields: Vec<LaurentOpField<S>>) -> Self {
        let n = fields.len();
        LocalFieldAlgebra { fields, structure: StructureField::new(n) }
    }

    pub fn with_structure(fields: Vec<LaurentOpField<S>>, structure: StructureField<S>) -> Result<Self> {
        if structure.dim() != fields.len() {
            return Err(DroemError::Shape(format!(
                "structure over {} fields for {} fields",
                structure.dim(),
                fields.len()
            )));
        }
        Ok(LocalFieldAlgebra { fields, structure })
    }

    pub fn fields(&self) -> &[LaurentOpField<S>] {
        &self.fields
    }

    pub fn structure(&self) -> &StructureField<S> {
        &self.structure
    }

    pub fn set_structure(&mut self, i: usize, j: usize, t: Vec<Laurent<S>>) -> Result<()> {
        self.structure.set(i, j, t)
    }

    /// Fits `t^k_ij` for a pair with all fields as candidates.
    pub fn fit_pair(&mut self, i: usize, j: usize, exponents: (i64, i64), samples: &[(S, S)]) -> Result<OpeFit<S>> {
        let fit = ope_structure(&self.fields[i], &self.fields[j], &self.fields, exponents, samples)?;
        if fit.closed {
            self.structure.set(i, j, fit.coefficients.clone())?;
        }
        Ok(fit)
    }

    /// `Σ_γ φ_γ(h^γ)` with `h^γ(u) = g(u)·res_v t^γ(v−u) f(v) dv/v`, the
    /// residue taken with `t(v−u)` expanded for `|v| > |u|`.
    pub fn local_product(&self, i: usize, f: &Laurent<S>, j: usize, g: &Laurent<S>) -> Result<LinOp<S>> {
        let t = self.structure.get(i, j)?;
        let dim = self.fields[i].dim();
        let mut acc = LinOp::zeros(dim);
        for (gamma, tg) in t.iter().enumerate() {
            let mut inner = Laurent::zero();
            for (p, tp) in tg.terms() {
                for (q, fq) in f.terms() {
                    let r = p + q;
                    if r < 0 {
                        continue;
                    }
                    let c = binom(p, r as u64);
                    if c.is_zero() {
                        continue;
                    }
                    let sign = if r % 2 == 0 { Q::one() } else { -Q::one() };
                    inner.add_term(r, tp.mul_ref(fq).mul_ref(&S::from_q(&(c * sign))));
                }
            }
            let h = inner.mul(g);
            if !h.is_zero() {
                acc = acc.add(&smear(&self.fields[gamma], &h))?;
            }
        }
        Ok(acc)
    }
}

/// `A(u, u̇) = Σᵢ Mᵢ u̇ⁱ Vᵢ(u)`, `i = 1, 2, …`.
pub fn angular_field<S: Scalar>(primaries: &[LaurentOpField<S>], weights: &[C64], u: C64, du: C64) -> Result<LinOp<C64>> {
    if primaries.len() != weights.len() {
        return Err(DroemError::Shape(format!("{} fields for {} weights", primaries.len(), weights.len())));
    }
    let Some(first) = primaries.first() else {
        return Err(DroemError::Domain("no primary fields".into()));
    };
    let mut acc = LinOp::<C64>::zeros(first.dim());
    let mut dup = C64::one();
    for (field, w) in primaries.iter().zip(weights) {
        dup *= du;
        if *w == C64::zero() {
            if u == C64::zero() && field.needs_nonzero_argument() {
                return Err(DroemError::EvalDomain("u = 0 with negative modes".into()));
            }
            continue;
        }
        acc.axpy(&(w * dup), &field.eval(u)?)?;
    }
    Ok(acc)
}

/// One line of the identity report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub case: String,
    pub relation: String,
    pub max_residual: f64,
    pub valid_degrees: Option<usize>,
    pub scalar_mode: ScalarMode,
    pub exact: bool,
}

fn relation_report<S: Scalar>(
    case: &str,
    relation: String,
    residual: &LinOp<S>,
    upto: Option<usize>,
    mode: ScalarMode,
) -> IdentityReport {
    let (max_residual, exact) = match upto {
        Some(d) => (residual.max_abs_on(d), residual.is_zero_on(d)),
        None => (0.0, true),
    };
    IdentityReport { case: case.to_string(), relation, max_residual, valid_degrees: upto, scalar_mode: mode, exact }
}

/// The sl₂ relations on degrees `≤ D−2`, the W₁ relations for
/// `2 ≤ i, j ≤ 4` and the mixed `[L₁, L_k]` relations.
pub fn lie_identity_suite(module: &TruncatedVermaModule) -> Result<Vec<IdentityReport>> {
    let case = format!("h={} D={}", format_q(module.h()), module.degree());
    let d = module.degree();
    let mode = ScalarMode::ExactRational;
    let mut out = Vec::new();
    let l = |k: i64| module.generator::<Q>(k);
    for i in -1..=1i64 {
        for j in -1..=1i64 {
            let mut r = commutator(&l(i)?, &l(j)?)?;
            if (-1..=1).contains(&(i + j)) {
                r.axpy(&q_int(-(i - j)), &l(i + j)?)?;
            }
            out.push(relation_report(&case, format!("[L{i},L{j}]=({})L{}", i - j, i + j), &r, Some(d - 2), mode));
        }
    }
    for i in 2..=4i64 {
        for j in 2..=4i64 {
            if (i + j) as usize > d {
                continue;
            }
            let mut r = commutator(&l(i)?, &l(j)?)?;
            r.axpy(&q_int(-(i - j)), &l(i + j)?)?;
            out.push(relation_report(&case, format!("[L{i},L{j}]=({})L{}", i - j, i + j), &r, Some(d), mode));
        }
    }
    for k in 2..=4i64 {
        let mut r = commutator(&l(1)?, &l(k)?)?;
        r.axpy(&q_int(-(1 - k)), &l(k + 1)?)?;
        out.push(relation_report(&case, format!("[L1,L{k}]=({})L{}", 1 - k, k + 1), &r, Some(d - 1), mode));
    }
    Ok(out)
}

/// Residual report for a solved primary field.
pub fn primary_identity_reports(
    module: &TruncatedVermaModule,
    spin: i64,
    field: &LaurentOpField<Q>,
) -> Result<Vec<IdentityReport>> {
    let case = format!("h={} D={} spin={spin}", format_q(module.h()), module.degree());
    Ok(primary_residuals(module, field, &q_int(spin))?
        .into_iter()
        .map(|r| IdentityReport {
            case: case.clone(),
            relation: format!("primary k={} n={}", r.k, r.n),
            max_residual: r.max_residual,
            valid_degrees: r.valid_degrees,
            scalar_mode: ScalarMode::ExactRational,
            exact: r.zero,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q_frac;
    use crate::verma::make_module;

    fn module(h: Q, d: usize) -> TruncatedVermaModule {
        make_module(h, d, ScalarMode::ExactRational).unwrap()
    }

    #[test]
    fn identity_field_is_spin_zero() {
        let m = module(q_frac(3, 4), 8);
        let id = LaurentOpField::<Q>::identity(m.dim());
        assert!(primary_residuals(&m, &id, &q_int(0)).unwrap().iter().all(|r| r.zero));
        let solved = solve_primary_field::<Q>(&m, &PrimarySpec::new(0, 0, 0)).unwrap();
        assert_eq!(solved, id);
    }

    #[test]
    fn spin_one_is_the_derivative_current() {
        let m = module(q_frac(3, 4), 10);
        let field = solve_primary_field::<Q>(&m, &PrimarySpec::natural(1, 10)).unwrap();
        assert_eq!((field.n_min(), field.n_max()), (-11, -1));
        for n in -11..=-1i64 {
            let k = (-n - 1) as usize;
            let sign = if k % 2 == 0 { q_int(1) } else { q_int(-1) };
            let expect = m.derivative::<Q>(k).scale(&sign);
            assert!(field.mode(n).unwrap().agrees_on(&expect, 10), "mode {n}");
        }
    }

    #[test]
    fn spin_two_is_the_vector_field_family() {
        let m = module(q_int(1), 12);
        let field = solve_primary_field::<Q>(&m, &PrimarySpec::natural(2, 12)).unwrap();
        for n in -14..=-1i64 {
            let sign = if n % 2 == 0 { q_int(-1) } else { q_int(1) };
            let expect = m.generator::<Q>(-n - 2).unwrap().scale(&sign);
            let valid = field.mode(n).unwrap().valid_degrees().unwrap();
            assert!(field.mode(n).unwrap().agrees_on(&expect, valid), "mode {n}");
        }
    }

    #[test]
    fn spin_two_single_mode_has_no_solution() {
        let m = module(q_int(1), 12);
        assert!(matches!(
            solve_primary_field::<Q>(&m, &PrimarySpec::new(2, 0, 0)),
            Err(DroemError::NoSolution(_))
        ));
    }

    #[test]
    fn smear_extracts_coefficients() {
        let m = module(q_int(1), 6);
        let field = current_field::<Q>(&m, 3);
        let f = Laurent::from_terms([(-1, q_int(2)), (-2, q_int(3))]);
        let mut expect = field.mode(1).unwrap().scale(&q_int(2));
        expect.axpy(&q_int(3), field.mode(2).unwrap()).unwrap();
        assert_eq!(smear(&field, &f), expect);
        assert!(smear(&field, &Laurent::zero()).is_zero());
        assert_eq!(&smear(&field, &Laurent::monomial(-3, q_int(1))), field.mode(3).unwrap());
    }

    #[test]
    fn identity_ope_is_constant_one() {
        let m = module(q_int(1), 5);
        let id = LaurentOpField::<Q>::identity(m.dim());
        let samples = default_ope_samples(3);
        let fit = ope_structure(&id, &id, std::slice::from_ref(&id), (0, 0), &samples).unwrap();
        assert!(fit.closed);
        assert_eq!(fit.coefficients[0], Laurent::monomial(0, q_int(1)));
        let zero = LaurentOpField::<Q>::zero(m.dim());
        let fit = ope_structure(&zero, &zero, std::slice::from_ref(&id), (0, 0), &samples).unwrap();
        assert!(fit.closed && fit.coefficients[0].is_zero());
    }

    #[test]
    fn current_algebra_ope_matches_closed_form() {
        let m = module(q_int(1), 8);
        let fields: Vec<_> = (0..=3).map(|k| current_field::<Q>(&m, k)).collect();
        let mut alg = LocalFieldAlgebra::new(fields);
        let fit = alg.fit_pair(2, 1, (0, 3), &default_ope_samples(6)).unwrap();
        assert!(fit.closed);
        let expect = current_algebra_structure::<Q>(3);
        assert_eq!(fit.coefficients, expect.get(2, 1).unwrap());
    }

    #[test]
    fn matrix_units_are_associative() {
        let mut s = StructureField::<Q>::new(4);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        let mut t = vec![Laurent::zero(); 4];
                        if b == c {
                            t[2 * a + d] = Laurent::monomial(0, q_int(1));
                        }
                        s.set(2 * a + b, 2 * c + d, t).unwrap();
                    }
                }
            }
        }
        let samples = [(C64::new(0.3, 0.1), C64::new(-0.2, 0.4))];
        assert_eq!(check_qft_axiom(&s, &samples).unwrap().max_deviation, 0.0);
        let mut t = s.get(0, 0).unwrap().to_vec();
        t[0] = Laurent::monomial(0, q_frac(3, 2));
        s.set(0, 0, t).unwrap();
        assert!(check_qft_axiom(&s, &samples).unwrap().max_deviation > 0.1);
    }

    #[test]
    fn translation_is_the_derivative() {
        let s = current_algebra_structure::<Q>(4);
        let tr = infinitesimal_translation(&s).unwrap();
        assert_eq!(tr.unit, 0);
        assert_eq!(*tr.matrix.get(2, 3), C64::new(3.0, 0.0));
        assert_eq!(*tr.matrix.get(0, 0), C64::zero());
        assert!(tr.derivation_defect(&s, C64::new(0.4, -0.2)).unwrap() < 1e-12);
        let empty = StructureField::<Q>::new(2);
        assert!(matches!(infinitesimal_translation(&empty), Err(DroemError::NoUnit(_))));
    }

    #[test]
    fn angular_field_sums_terms() {
        let m = module(q_int(1), 6);
        let v1 = solve_primary_field::<Q>(&m, &PrimarySpec::natural(1, 6)).unwrap();
        let u = C64::new(0.3, 0.1);
        assert!(angular_field(std::slice::from_ref(&v1), &[C64::zero()], u, C64::one()).unwrap().is_zero());
        let a = angular_field(std::slice::from_ref(&v1), &[C64::one()], u, C64::one()).unwrap();
        assert_eq!(a, v1.eval(u).unwrap());
        assert!(matches!(
            angular_field(&[v1], &[C64::one()], C64::zero(), C64::one()),
            Err(DroemError::EvalDomain(_))
        ));
    }
}
