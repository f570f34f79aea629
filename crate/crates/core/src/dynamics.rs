//! Time evolution of the image state: Runge–Kutta for `Φ̇ = AΦ`,
//! Euler–Maruyama (Itô) for `dΦ = AΦdt + Σ B_α Φ dω_α`, screening and the
//! exponential-kernel memory model.

use num_traits::Zero;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DroemError, Result};
use crate::linalg::matvec_c64;
use crate::scalar::C64;
use crate::verma::LinOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvolutionMode {
    Deterministic,
    Stochastic,
}

/// `Φ̇ = κM`, `Ṁ = −λM + AΦ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub kernel_rate: f64,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub mode: EvolutionMode,
    pub dt: f64,
    pub seed: u64,
    /// One amplitude per noise channel.
    #[serde(default)]
    pub noise: Vec<f64>,
    #[serde(default)]
    pub memory: Option<MemoryConfig>,
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(DroemError::Domain(format!("dt = {} outside (0, 0.1]", self.dt)));
        }
        if self.noise.iter().any(|a| !(*a >= 0.0)) {
            return Err(DroemError::Domain("noise amplitudes must be ≥ 0".into()));
        }
        if let Some(m) = &self.memory {
            if !(m.kernel_rate > 0.0) {
                return Err(DroemError::Domain("memory kernel rate must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolState {
    pub t: f64,
    pub step: u64,
    pub phi: Vec<C64>,
    pub memory_aux: Option<Vec<C64>>,
}

impl EvolState {
    pub fn new(phi: Vec<C64>) -> Self {
        EvolState { t: 0.0, step: 0, phi, memory_aux: None }
    }

    pub fn with_memory(phi: Vec<C64>) -> Self {
        let aux = vec![C64::zero(); phi.len()];
        EvolState { t: 0.0, step: 0, phi, memory_aux: Some(aux) }
    }

    fn check_finite(&self) -> Result<()> {
        let bad = |v: &[C64]| v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite());
        if bad(&self.phi) || self.memory_aux.as_deref().is_some_and(bad) {
            return Err(DroemError::Stability { t: self.t });
        }
        Ok(())
    }
}

/// Counter-based Wiener increments: channel `c` at step `k` is a function of
/// `(seed, c, k)` only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        NoiseSource { seed }
    }

    pub fn standard_normal(&self, channel: u64, step: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(channel);
        rng.set_word_pos(u128::from(step) * 64);
        StandardNormal.sample(&mut rng)
    }

    /// `√dt · ξ`, `ξ ~ N(0, 1)`.
    pub fn increment(&self, channel: u64, step: u64, dt: f64) -> f64 {
        dt.sqrt() * self.standard_normal(channel, step)
    }
}

fn apply(a: &LinOp<C64>, v: &[C64]) -> Result<Vec<C64>> {
    if a.dim() != v.len() {
        return Err(DroemError::Shape(format!("operator {} vs state {}", a.dim(), v.len())));
    }
    let mut out = vec![C64::zero(); v.len()];
    matvec_c64(a.dim(), a.data(), v, &mut out);
    Ok(out)
}

fn axpy(y: &[C64], c: f64, x: &[C64]) -> Vec<C64> {
    y.iter().zip(x).map(|(a, b)| a + b * c).collect()
}

/// State-dependent scalar multiplying `A`: `Φ̇ = s(Φ) A Φ`.
pub type Nonlinearity<'a> = &'a dyn Fn(&[C64]) -> f64;

/// One classical RK4 step of `Φ̇ = A(t)Φ`.
pub fn step_deterministic(
    state: &EvolState,
    a_of_t: &dyn Fn(f64) -> Result<LinOp<C64>>,
    dt: f64,
) -> Result<EvolState> {
    step_deterministic_with(state, a_of_t, dt, None)
}

pub fn step_deterministic_with(
    state: &EvolState,
    a_of_t: &dyn Fn(f64) -> Result<LinOp<C64>>,
    dt: f64,
    nonlinearity: Option<Nonlinearity<'_>>,
) -> Result<EvolState> {
    let t = state.t;
    let (a0, ah, a1) = (a_of_t(t)?, a_of_t(t + dt / 2.0)?, a_of_t(t + dt)?);
    let f = |a: &LinOp<C64>, v: &[C64]| -> Result<Vec<C64>> {
        let mut out = apply(a, v)?;
        if let Some(s) = nonlinearity {
            let k = s(v);
            out.iter_mut().for_each(|c| *c *= k);
        }
        Ok(out)
    };
    let phi = &state.phi;
    let k1 = f(&a0, phi)?;
    let k2 = f(&ah, &axpy(phi, dt / 2.0, &k1))?;
    let k3 = f(&ah, &axpy(phi, dt / 2.0, &k2))?;
    let k4 = f(&a1, &axpy(phi, dt, &k3))?;
    let next: Vec<C64> = (0..phi.len())
        .map(|i| phi[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
        .collect();
    let out = EvolState { t: t + dt, step: state.step + 1, phi: next, memory_aux: state.memory_aux.clone() };
    out.check_finite()?;
    Ok(out)
}

/// One Itô Euler–Maruyama step; channel `α` draws from stream `α` at the
/// state's step index.
pub fn step_stochastic(
    state: &EvolState,
    a: &LinOp<C64>,
    b_list: &[LinOp<C64>],
    dt: f64,
    noise: &NoiseSource,
) -> Result<EvolState> {
    let mut next = axpy(&state.phi, dt, &apply(a, &state.phi)?);
    for (alpha, b) in b_list.iter().enumerate() {
        let dw = noise.increment(alpha as u64, state.step, dt);
        next = axpy(&next, dw, &apply(b, &state.phi)?);
    }
    let out = EvolState { t: state.t + dt, step: state.step + 1, phi: next, memory_aux: state.memory_aux.clone() };
    out.check_finite()?;
    Ok(out)
}

/// `Ψ = JΦ`.
pub fn apply_screening(j: &LinOp<C64>, phi: &[C64]) -> Result<Vec<C64>> {
    apply(j, phi)
}

/// Coordinate projector onto degrees `lo ..= hi`.
pub fn band_projector(dim: usize, lo: usize, hi: usize) -> LinOp<C64> {
    LinOp::from_fn(dim, 0, 0, dim as i64 - 1, |i, j| {
        if i == j && (lo..=hi).contains(&i) {
            C64::new(1.0, 0.0)
        } else {
            C64::zero()
        }
    })
}

/// RK4 on the augmented pair `(Φ, M)`.
pub fn memory_step(
    state: &EvolState,
    a_of_t: &dyn Fn(f64) -> Result<LinOp<C64>>,
    config: &MemoryConfig,
    dt: f64,
) -> Result<EvolState> {
    if !(config.kernel_rate > 0.0) {
        return Err(DroemError::Domain("memory kernel rate must be > 0".into()));
    }
    let aux = state
        .memory_aux
        .clone()
        .ok_or_else(|| DroemError::Domain("state carries no memory component".into()))?;
    let (kappa, lambda) = (config.strength, config.kernel_rate);
    let t = state.t;
    let (a0, ah, a1) = (a_of_t(t)?, a_of_t(t + dt / 2.0)?, a_of_t(t + dt)?);
    let f = |a: &LinOp<C64>, phi: &[C64], m: &[C64]| -> Result<(Vec<C64>, Vec<C64>)> {
        let dphi: Vec<C64> = m.iter().map(|v| v * kappa).collect();
        let ap = apply(a, phi)?;
        let dm: Vec<C64> = m.iter().zip(&ap).map(|(mv, av)| av - mv * lambda).collect();
        Ok((dphi, dm))
    };
    let phi = &state.phi;
    let (p1, m1) = f(&a0, phi, &aux)?;
    let (p2, m2) = f(&ah, &axpy(phi, dt / 2.0, &p1), &axpy(&aux, dt / 2.0, &m1))?;
    let (p3, m3) = f(&ah, &axpy(phi, dt / 2.0, &p2), &axpy(&aux, dt / 2.0, &m2))?;
    let (p4, m4) = f(&a1, &axpy(phi, dt, &p3), &axpy(&aux, dt, &m3))?;
    let combine = |x: &[C64], k1: &[C64], k2: &[C64], k3: &[C64], k4: &[C64]| -> Vec<C64> {
        (0..x.len()).map(|i| x[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0)).collect()
    };
    let out = EvolState {
        t: t + dt,
        step: state.step + 1,
        phi: combine(phi, &p1, &p2, &p3, &p4),
        memory_aux: Some(combine(&aux, &m1, &m2, &m3, &m4)),
    };
    out.check_finite()?;
    Ok(out)
}

/// Runs independent paths; path `p` gets `NoiseSource::new(seed + p)`.
pub fn ensemble<T, F>(paths: usize, seed: u64, run: F) -> Vec<T>
where
    T: Send,
    F: Fn(NoiseSource) -> T + Sync + Send,
{
    let source = |p: usize| NoiseSource::new(seed.wrapping_add(p as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..paths).into_par_iter().map(|p| run(source(p))).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..paths).map(|p| run(source(p))).collect()
    }
}
