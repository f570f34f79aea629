//! Extended symmetry generators on the module, their defects from an honest
//! representation, and one-parameter exponentiation.
//!
//! Vector fields `L_n`, `n ≥ −1`, act directly; `L_n` for `n ≤ −2` is the
//! adjoint of `L_{−n}` under the contravariant form. The abelian currents are
//! `J_n = ∂ⁿ` for `n ≥ 0` and adjoints for `n < 0`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{DroemError, Result};
use crate::linalg::{fit_line, matmul_c64};
use crate::scalar::{format_q, is_positive, q_int, q_to_f64, Scalar, C64, Q};
use crate::verma::{adjoint, commutator, make_module, LinOp, ScalarMode, TruncatedVermaModule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    VectorField,
    AbelianCurrent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construction {
    Direct,
    Adjoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedGenerator {
    pub index: i64,
    pub kind: GeneratorKind,
    pub op: LinOp<Q>,
    pub construction: Construction,
}

fn generator_unchecked(module: &TruncatedVermaModule, n: i64, kind: GeneratorKind) -> Result<ExtendedGenerator> {
    let direct = match kind {
        GeneratorKind::VectorField => n >= -1,
        GeneratorKind::AbelianCurrent => n >= 0,
    };
    let base = |k: i64| -> Result<LinOp<Q>> {
        match kind {
            GeneratorKind::VectorField => module.generator::<Q>(k),
            GeneratorKind::AbelianCurrent => Ok(module.derivative::<Q>(k as usize)),
        }
    };
    let (op, construction) = if direct {
        (base(n)?, Construction::Direct)
    } else {
        if !is_positive(module.h()) {
            return Err(DroemError::Unitarizability(format_q(module.h())));
        }
        (adjoint(&base(-n)?, &module.shapovalov_form()?)?, Construction::Adjoint)
    };
    Ok(ExtendedGenerator { index: n, kind, op, construction })
}

/// `ρ(L_n)` or `ρ(J_n)` for `|n| ≤ D`.
pub fn extended_generator(module: &TruncatedVermaModule, n: i64, kind: GeneratorKind) -> Result<ExtendedGenerator> {
    if n.unsigned_abs() as usize > module.degree() {
        return Err(DroemError::Domain(format!("generator index {n} exceeds D = {}", module.degree())));
    }
    generator_unchecked(module, n, kind)
}

/// Expected bracket of the semidirect product `W ⋉ C[z]`:
/// `[L_m, L_n] = (m−n)L_{m+n}`, `[L_m, J_n] = −n J_{m+n}`,
/// `[J_m, L_n] = m J_{m+n}`, `[J_m, J_n] = 0`.
fn expected_bracket(
    module: &TruncatedVermaModule,
    (m, km): (i64, GeneratorKind),
    (n, kn): (i64, GeneratorKind),
) -> Result<LinOp<Q>> {
    use GeneratorKind::*;
    let (coeff, kind) = match (km, kn) {
        (VectorField, VectorField) => (m - n, VectorField),
        (VectorField, AbelianCurrent) => (-n, AbelianCurrent),
        (AbelianCurrent, VectorField) => (m, AbelianCurrent),
        (AbelianCurrent, AbelianCurrent) => (0, AbelianCurrent),
    };
    if coeff == 0 {
        return Ok(LinOp::zeros(module.dim()));
    }
    Ok(generator_unchecked(module, m + n, kind)?.op.scale(&q_int(coeff)))
}

/// `D(m, n) = [ρ_m, ρ_n] − expected`.
pub fn defect_operator(
    module: &TruncatedVermaModule,
    a: (i64, GeneratorKind),
    b: (i64, GeneratorKind),
) -> Result<LinOp<Q>> {
    let ra = extended_generator(module, a.0, a.1)?;
    let rb = extended_generator(module, b.0, b.1)?;
    let mut d = commutator(&ra.op, &rb.op)?;
    d.axpy(&-Q::one(), &expected_bracket(module, a, b)?)?;
    Ok(d)
}

/// Gram-weighted (orthonormal-frame) Frobenius norm of the block
/// `[lo, hi] × [lo, hi]`: `Σ (G_r/G_c)|D_rc|²`.
pub fn gram_window_norm(op: &LinOp<Q>, gram: &[Q], lo: usize, hi: usize) -> f64 {
    let hi = hi.min(op.dim() - 1);
    let mut s = Q::zero();
    for r in lo..=hi {
        for c in lo..=hi {
            let v = op.get(r, c);
            if !v.is_zero() {
                s += v * v * &gram[r] / &gram[c];
            }
        }
    }
    q_to_f64(&s).sqrt()
}

pub fn raw_window_norm(op: &LinOp<Q>, lo: usize, hi: usize) -> f64 {
    let hi = hi.min(op.dim() - 1);
    let mut s = Q::zero();
    for r in lo..=hi {
        for c in lo..=hi {
            let v = op.get(r, c);
            if !v.is_zero() {
                s += v * v;
            }
        }
    }
    q_to_f64(&s).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub m: i64,
    pub n: i64,
    pub h: String,
    pub hbar: String,
    #[serde(rename = "D")]
    pub degree: usize,
    pub d0: usize,
    /// Gram-weighted norms of the defect on windows `[0, d]`, `d = d0 … D`.
    pub tail_norms: Vec<f64>,
    pub raw_tail_norms: Vec<f64>,
    /// `(‖D‖ − ‖D|_{⌈3D/4⌉}‖) / ‖D‖`, zero for a vanishing defect.
    pub convergence: f64,
}

impl DefectReport {
    pub fn window_norm(&self, d: usize) -> Option<f64> {
        d.checked_sub(self.d0).and_then(|i| self.tail_norms.get(i)).copied()
    }
}

pub fn defect(
    module: &TruncatedVermaModule,
    a: (i64, GeneratorKind),
    b: (i64, GeneratorKind),
    d0: usize,
) -> Result<DefectReport> {
    let op = defect_operator(module, a, b)?;
    let gram = module.gram_unchecked();
    let degree = module.degree();
    let d0 = d0.min(degree);
    let tail_norms: Vec<f64> = (d0..=degree).map(|d| gram_window_norm(&op, &gram, 0, d)).collect();
    let raw_tail_norms = (d0..=degree).map(|d| raw_window_norm(&op, 0, d)).collect();
    let full = *tail_norms.last().expect("nonempty");
    let three_quarters = (3 * degree).div_ceil(4);
    let partial = gram_window_norm(&op, &gram, 0, three_quarters);
    let convergence = if full == 0.0 { 0.0 } else { (full - partial) / full };
    Ok(DefectReport {
        m: a.0,
        n: b.0,
        h: format_q(module.h()),
        hbar: format_q(&module.weight().hbar()),
        degree,
        d0,
        tail_norms,
        raw_tail_norms,
        convergence,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub m: i64,
    pub n: i64,
    pub hbar: Vec<f64>,
    /// `‖D_h − D_{1/2}‖` on the window, Gram-weighted at `h`.
    pub norms: Vec<f64>,
    /// `‖D_h‖` on the window, for comparison.
    pub raw_defect_norms: Vec<f64>,
    /// Fitted exponent `p` in `norm ≈ C ħᵖ`; `None` when the defect is exact.
    pub exponent: Option<f64>,
    pub raw_exponent: Option<f64>,
    pub fit_rms: Option<f64>,
    pub exact: bool,
}

fn log_fit(hbars: &[f64], norms: &[f64]) -> Option<(f64, f64)> {
    if norms.iter().any(|v| *v <= 0.0) {
        return None;
    }
    let xs: Vec<f64> = hbars.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let (_, slope, rms) = fit_line(&xs, &ys);
    Some((slope, rms))
}

/// For each pair, measures the defect on the window `[0, window]` at
/// truncation `D` relative to its value at `ħ = 0`, and fits `C·ħᵖ`.
pub fn asymptotic_scan(
    h_values: &[Q],
    pairs: &[(i64, i64)],
    degree: usize,
    window: usize,
) -> Result<Vec<ScanResult>> {
    if h_values.len() < 3 {
        return Err(DroemError::InsufficientData(format!("{} grid points, need ≥ 3", h_values.len())));
    }
    let half = Q::new(1.into(), 2.into());
    if let Some(bad) = h_values.iter().find(|h| **h <= half) {
        return Err(DroemError::Domain(format!("scan needs h > 1/2, got {}", format_q(bad))));
    }
    let vf = GeneratorKind::VectorField;
    let base = make_module(half.clone(), degree, ScalarMode::ExactRational)?;
    let modules: Vec<TruncatedVermaModule> = h_values
        .iter()
        .map(|h| make_module(h.clone(), degree, ScalarMode::ExactRational))
        .collect::<Result<_>>()?;
    let hbars: Vec<f64> = h_values.iter().map(|h| q_to_f64(&(h - &half))).collect();
    let mut out = Vec::new();
    for &(m, n) in pairs {
        let reference = defect_operator(&base, (m, vf), (n, vf))?;
        let mut norms = Vec::new();
        let mut raw = Vec::new();
        for module in &modules {
            let d = defect_operator(module, (m, vf), (n, vf))?;
            let gram = module.gram_unchecked();
            raw.push(gram_window_norm(&d, &gram, 0, window));
            norms.push(gram_window_norm(&d.sub(&reference)?, &gram, 0, window));
        }
        let exact = raw.iter().all(|v| *v == 0.0);
        let fit = if exact { None } else { log_fit(&hbars, &norms) };
        out.push(ScanResult {
            m,
            n,
            hbar: hbars.clone(),
            norms,
            raw_exponent: if exact { None } else { log_fit(&hbars, &raw).map(|f| f.0) },
            raw_defect_norms: raw,
            exponent: fit.map(|f| f.0),
            fit_rms: fit.map(|f| f.1),
            exact,
        });
    }
    Ok(out)
}

/// `exp(t X)` by scaling and squaring with a Taylor kernel.
pub fn exponentiate(x: &LinOp<C64>, t: f64) -> Result<LinOp<C64>> {
    let dim = x.dim();
    let norm1 = (0..dim)
        .map(|j| (0..dim).map(|i| x.get(i, j).norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * t.abs();
    if !norm1.is_finite() {
        return Err(DroemError::Overflow { t });
    }
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = t / f64::powi(2.0, squarings as i32);
    let a: Vec<C64> = x.data().iter().map(|v| v * scale).collect();
    let mut result = LinOp::<C64>::identity(dim).data().to_vec();
    let mut term = result.clone();
    for k in 1..=30 {
        term = matmul_c64(dim, &term, &a);
        let inv = 1.0 / k as f64;
        let mut biggest = 0.0f64;
        for (r, v) in result.iter_mut().zip(term.iter_mut()) {
            *v *= inv;
            *r += *v;
            biggest = biggest.max(v.norm());
        }
        if biggest < 1e-18 * result.iter().map(|v| v.norm()).fold(0.0, f64::max) {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul_c64(dim, &result, &result);
        if result.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(DroemError::Overflow { t });
        }
    }
    Ok(LinOp::from_fn(dim, 0, 0, dim as i64 - 1, |i, j| result[i * dim + j]))
}

/// `X_ON = (√Gᵢ/√Gⱼ) Xᵢⱼ`, the matrix in the orthonormal frame.
pub fn to_orthonormal_frame<S: Scalar>(op: &LinOp<S>, gram: &[Q]) -> LinOp<C64> {
    let roots: Vec<f64> = gram.iter().map(|g| q_to_f64(g).sqrt()).collect();
    let ratio = |i: usize, j: usize| -> f64 {
        // Ratios of huge Gram entries are taken exactly before the root.
        let r = q_to_f64(&(&gram[i] / &gram[j]));
        if r.is_finite() && r > 0.0 {
            r.sqrt()
        } else {
            roots[i] / roots[j]
        }
    };
    let n = op.dim();
    LinOp::from_fn(n, op.raise(), op.lower(), op.exact_below(), |i, j| {
        let v = op.get(i, j);
        if v.is_zero() {
            C64::zero()
        } else {
            v.to_c64() * ratio(i, j)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupLawReport {
    pub t: f64,
    pub s: f64,
    pub absolute: f64,
    pub relative: f64,
}

/// `‖exp(tX)exp(sX) − exp((t+s)X)‖_F`, absolute and relative to
/// `‖exp((t+s)X)‖_F`.
pub fn group_law_residual(x: &LinOp<C64>, t: f64, s: f64) -> Result<GroupLawReport> {
    let dim = x.dim();
    let et = exponentiate(x, t)?;
    let es = exponentiate(x, s)?;
    let ets = exponentiate(x, t + s)?;
    let prod = matmul_c64(dim, et.data(), es.data());
    let absolute = prod.iter().zip(ets.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let scale = ets.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(GroupLawReport { t, s, absolute, relative: absolute / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q_frac;

    const VF: GeneratorKind = GeneratorKind::VectorField;
    const AB: GeneratorKind = GeneratorKind::AbelianCurrent;

    fn module(h: Q, d: usize) -> TruncatedVermaModule {
        make_module(h, d, ScalarMode::ExactRational).unwrap()
    }

    #[test]
    fn sl2_core_is_defect_free() {
        let m = module(q_int(1), 12);
        for a in -1..=1 {
            for b in -1..=1 {
                let r = defect(&m, (a, VF), (b, VF), 0).unwrap();
                assert!(r.tail_norms[..=10].iter().all(|v| *v == 0.0), "({a},{b})");
            }
        }
    }

    #[test]
    fn adjoint_generators() {
        let m = module(q_int(1), 10);
        let g = extended_generator(&m, -2, VF).unwrap();
        assert_eq!(g.construction, Construction::Adjoint);
        let gram = m.shapovalov_form().unwrap();
        let l2 = m.generator::<Q>(2).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                assert_eq!(*g.op.get(i, j), &gram[j] / &gram[i] * l2.get(j, i));
            }
        }
        assert!(extended_generator(&m, 11, VF).is_err());
        let neg = module(q_frac(-1, 3), 10);
        assert!(matches!(extended_generator(&neg, -2, VF), Err(DroemError::Unitarizability(_))));
        assert!(extended_generator(&neg, 2, VF).is_ok());
    }

    #[test]
    fn mixed_bracket_is_exact() {
        let m = module(q_int(1), 14);
        let d = defect_operator(&m, (1, VF), (-2, VF)).unwrap();
        let valid = d.valid_degrees().unwrap();
        assert!(valid >= 10);
        assert!(d.is_zero_on(valid));
    }

    #[test]
    fn abelian_brackets() {
        let m = module(q_int(1), 12);
        for (a, b) in [((0, VF), (2, AB)), ((-1, VF), (3, AB)), ((2, AB), (1, VF)), ((1, AB), (3, AB))] {
            let d = defect_operator(&m, a, b).unwrap();
            assert!(d.is_zero_on(d.valid_degrees().unwrap()), "{a:?} {b:?}");
        }
    }

    #[test]
    fn exponential_of_l0_is_diagonal() {
        let m = module(q_frac(1, 2), 6);
        let l0 = m.generator::<Q>(0).unwrap().to_c64();
        let e = exponentiate(&l0, 0.3).unwrap();
        for i in 0..7 {
            let want = (0.3 * (i as f64 + 0.5)).exp();
            assert!((e.get(i, i).re - want).abs() < 1e-12 * want);
        }
        assert_eq!(exponentiate(&l0, 0.0).unwrap(), LinOp::identity(7));
    }

    #[test]
    fn scan_needs_three_points() {
        assert!(matches!(
            asymptotic_scan(&[q_frac(3, 5)], &[(2, -2)], 16, 12),
            Err(DroemError::InsufficientData(_))
        ));
        let r = asymptotic_scan(&[q_frac(7, 10), q_frac(6, 10), q_frac(11, 20)], &[(1, -1)], 12, 8).unwrap();
        assert!(r[0].exact && r[0].exponent.is_none());
    }
}
