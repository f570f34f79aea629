//! Exact Gaussian elimination: solving, nullspaces and least squares.

use crate::scalar::{Scalar, C64};

/// Row-reduces `rows` (each of length `ncols`, optionally augmented) in place
/// and returns the pivot columns among the first `ncols`.
fn rref<S: Scalar>(rows: &mut [Vec<S>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = S::one() / rows[r][c].clone();
        for v in rows[r].iter_mut() {
            if !v.is_zero() {
                *v = v.mul_ref(&inv);
            }
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let factor = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = v.sub_ref(&factor.mul_ref(pv));
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution<S> {
    /// Particular solution with every free variable set to zero.
    pub x: Vec<S>,
    /// Dimension of the solution space of the homogeneous system.
    pub free_dim: usize,
}

/// Solves `a x = b`; `None` when the system is inconsistent.
pub fn solve<S: Scalar>(a: &[Vec<S>], b: &[S], ncols: usize) -> Option<Solution<S>> {
    assert_eq!(a.len(), b.len());
    let mut rows: Vec<Vec<S>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            debug_assert_eq!(row.len(), ncols);
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let pivots = rref(&mut rows, ncols);
    if rows[pivots.len()..].iter().any(|row| !row[ncols].is_zero()) {
        return None;
    }
    let mut x = vec![S::zero(); ncols];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = rows[r][ncols].clone();
    }
    Some(Solution { x, free_dim: ncols - pivots.len() })
}

/// Basis of `{x : a x = 0}`.
pub fn nullspace<S: Scalar>(a: &[Vec<S>], ncols: usize) -> Vec<Vec<S>> {
    let mut rows = a.to_vec();
    let pivots = rref(&mut rows, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![S::zero(); ncols];
            v[f] = S::one();
            for (r, &c) in pivots.iter().enumerate() {
                v[c] = -rows[r][f].clone();
            }
            v
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LeastSquares<S> {
    pub x: Vec<S>,
    /// Exact squared residual `Σ |a x − b|²` (real part carried in `S`).
    pub residual_sq: S,
    pub free_dim: usize,
}

impl<S: Scalar> LeastSquares<S> {
    pub fn residual(&self) -> f64 {
        self.residual_sq.to_c64().re.max(0.0).sqrt()
    }
}

/// Least squares through the normal equations `aᴴa x = aᴴb`, solved exactly.
pub fn least_squares<S: Scalar>(a: &[Vec<S>], b: &[S], ncols: usize) -> LeastSquares<S> {
    let mut normal = vec![vec![S::zero(); ncols]; ncols];
    let mut rhs = vec![S::zero(); ncols];
    for (row, bv) in a.iter().zip(b) {
        let conj: Vec<S> = row.iter().map(|v| v.conj()).collect();
        for i in 0..ncols {
            if conj[i].is_zero() {
                continue;
            }
            for j in 0..ncols {
                if !row[j].is_zero() {
                    normal[i][j] = normal[i][j].add_ref(&conj[i].mul_ref(&row[j]));
                }
            }
            rhs[i] = rhs[i].add_ref(&conj[i].mul_ref(bv));
        }
    }
    // Normal equations are always consistent.
    let sol = solve(&normal, &rhs, ncols).expect("normal equations are consistent");
    let mut residual_sq = S::zero();
    for (row, bv) in a.iter().zip(b) {
        let mut r = -bv.clone();
        for (v, x) in row.iter().zip(&sol.x) {
            if !v.is_zero() && !x.is_zero() {
                r = r.add_ref(&v.mul_ref(x));
            }
        }
        residual_sq = residual_sq.add_ref(&r.mul_ref(&r.conj()));
    }
    LeastSquares { x: sol.x, residual_sq, free_dim: sol.free_dim }
}

/// Ordinary least-squares line fit `y ≈ a + b x`; returns `(a, b, rms residual)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (intercept, slope, rms)
}

/// Dense complex matrix–vector product on row-major data.
pub fn matvec_c64(dim: usize, data: &[C64], v: &[C64], out: &mut [C64]) {
    for (i, o) in out.iter_mut().enumerate().take(dim) {
        let row = &data[i * dim..(i + 1) * dim];
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// Dense complex product `a · b` of row-major `dim × dim` matrices.
pub fn matmul_c64(dim: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == C64::new(0.0, 0.0) {
                continue;
            }
            let row = &b[k * dim..(k + 1) * dim];
            for (o, bkj) in out[i * dim..(i + 1) * dim].iter_mut().zip(row) {
                *o += aik * bkj;
            }
        }
    }
    out
}
