//! Session configuration.

use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolutionMode, MemoryConfig};
use crate::error::{DroemError, Result};
use crate::render::{FiberSpec, Lattice, Mask};
use crate::scalar::{q_int, Rational};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleParams {
    pub h: Rational,
    pub degree: usize,
}

/// `M(t, ξ) = c + a·sin(2πft + φ) + Σ gₖξₖ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub xi_gain: Vec<f64>,
}

impl Schedule {
    pub fn constant(c: f64) -> Self {
        Schedule { constant: c, ..Default::default() }
    }

    pub fn eval(&self, t: f64, xi: &[f64]) -> f64 {
        let wave = self.amplitude * (std::f64::consts::TAU * self.frequency * t + self.phase).sin();
        let control: f64 = self.xi_gain.iter().zip(xi).map(|(g, x)| g * x).sum();
        self.constant + wave + control
    }
}

/// Noise generators, all Hermitian in the orthonormal frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseOperator {
    /// `L₀`.
    Grading,
    /// `Id`, a common amplitude fluctuation.
    Scalar,
    /// `ρ(L_n) + ρ(L_{−n})` for `1 ≤ n ≤ D`.
    Symmetric { order: i64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub operator: NoiseOperator,
    pub amplitude: f64,
}

/// Screening operator `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Screening {
    Identity,
    /// Keeps degrees `lo ..= hi`.
    Band { lo: usize, hi: usize },
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverSpec {
    pub screening: Screening,
    /// Multiplies this observer's angular field.
    #[serde(default = "one")]
    pub gain: f64,
}

fn one() -> f64 {
    1.0
}

fn default_annulus() -> [f64; 2] {
    [0.5, 0.95]
}

fn default_frame_every() -> u64 {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub module: ModuleParams,
    /// Cut-off degree of the spin-1 component's regular part.
    #[serde(default)]
    pub cutoff: Option<usize>,
    /// Highest spin in `A = Σ Mᵢ u̇ⁱ Vᵢ(u)`, 2 or 3.
    pub angular_order: usize,
    /// One schedule per spin `1 ..= angular_order`.
    pub coefficients: Vec<Schedule>,
    pub mode: EvolutionMode,
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    #[serde(default)]
    pub memory: Option<MemoryConfig>,
    pub fibers: Vec<FiberSpec>,
    #[serde(default)]
    pub palette: Option<Vec<[f32; 3]>>,
    pub lattice: Lattice,
    pub dt: f64,
    /// Steps between emitted frames.
    #[serde(default = "default_frame_every")]
    pub frame_every: u64,
    pub seed: u64,
    pub observers: Vec<ObserverSpec>,
    /// Gaze `u` in the unit disk is mapped radially onto this annulus
    /// before the fields are evaluated.
    #[serde(default = "default_annulus")]
    pub field_annulus: [f64; 2],
    /// Divide each `Vᵢ(u)` by its Frobenius norm at the evaluation point.
    #[serde(default = "default_true")]
    pub normalize_fields: bool,
    /// Rescale `Φ` to unit norm after each step.
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Orthonormal-frame coordinates `[re, im]`; defaults to `Φⱼ ∝ 1/(j+1)`.
    #[serde(default)]
    pub initial_state: Option<Vec<[f64; 2]>>,
}

impl SessionConfig {
    pub fn dim(&self) -> usize {
        self.module.degree + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DroemError::Domain(m));
        if !crate::scalar::is_positive(self.module.h.value()) {
            return bad("session needs h > 0 for the orthonormal frame".into());
        }
        if self.module.degree < 4 || self.module.degree > 64 {
            return bad(format!("degree {} outside 4 ..= 64", self.module.degree));
        }
        if !(2..=3).contains(&self.angular_order) {
            return bad(format!("angular order {} not in {{2, 3}}", self.angular_order));
        }
        if self.coefficients.len() != self.angular_order {
            return bad(format!("{} schedules for angular order {}", self.coefficients.len(), self.angular_order));
        }
        if let Some(n) = self.cutoff {
            if n == 0 || n > self.module.degree {
                return bad(format!("cut-off degree {n} outside 1 ..= D"));
            }
        }
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return bad(format!("dt = {} outside (0, 0.1]", self.dt));
        }
        if self.frame_every == 0 {
            return bad("frame_every must be ≥ 1".into());
        }
        for n in &self.noise {
            if !(n.amplitude >= 0.0) {
                return bad("noise amplitudes must be ≥ 0".into());
            }
            if let NoiseOperator::Symmetric { order } = n.operator {
                if order < 1 || order as usize > self.module.degree {
                    return bad(format!("symmetric noise order {order} outside 1 ..= D"));
                }
            }
        }
        if let Some(m) = &self.memory {
            if !(m.kernel_rate > 0.0) {
                return bad("memory kernel rate must be > 0".into());
            }
            if self.mode == EvolutionMode::Stochastic {
                return bad("memory model runs in deterministic mode only".into());
            }
        }
        if self.fibers.is_empty() {
            return bad("at least one fiber".into());
        }
        for f in &self.fibers {
            f.validate()?;
        }
        if let Some(p) = &self.palette {
            if p.len() != self.fibers.len() {
                return Err(DroemError::PaletteSize { palette: p.len(), fibers: self.fibers.len() });
            }
        }
        Lattice::new(self.lattice.delta_i, self.lattice.delta_o, self.lattice.width, self.lattice.height)?;
        if self.observers.is_empty() {
            return Err(DroemError::ObserverCount("at least one observer".into()));
        }
        for o in &self.observers {
            if let Screening::Band { lo, hi } = o.screening {
                if lo > hi || hi > self.module.degree {
                    return bad(format!("band [{lo}, {hi}] outside 0 ..= D"));
                }
            }
            if !o.gain.is_finite() {
                return bad("observer gain must be finite".into());
            }
        }
        let [r0, r1] = self.field_annulus;
        if !(0.0 < r0 && r0 <= r1 && r1 <= 1.0) {
            return bad(format!("field annulus [{r0}, {r1}] must satisfy 0 < r0 ≤ r1 ≤ 1"));
        }
        if let Some(init) = &self.initial_state {
            if init.len() != self.dim() || init.iter().flatten().any(|v| !v.is_finite()) {
                return bad("initial state must have D+1 finite entries".into());
            }
        }
        Ok(())
    }

    /// A small interactive configuration.
    pub fn demo() -> Self {
        SessionConfig {
            module: ModuleParams { h: Rational(q_int(1)), degree: 12 },
            cutoff: Some(3),
            angular_order: 2,
            coefficients: vec![Schedule::constant(0.5), Schedule { constant: 0.2, amplitude: 0.1, frequency: 0.25, ..Default::default() }],
            mode: EvolutionMode::Deterministic,
            noise: Vec::new(),
            memory: None,
            fibers: vec![
                FiberSpec { gamma: 0.3, mask: Mask::Gaussian { width: 0.45 } },
                FiberSpec { gamma: 0.8, mask: Mask::RaisedCosine { width: 0.9 } },
            ],
            palette: None,
            lattice: Lattice { delta_i: 0.08, delta_o: 0.01, width: 128, height: 128 },
            dt: 1.0 / 60.0,
            frame_every: 1,
            seed: 1,
            observers: vec![ObserverSpec { screening: Screening::Identity, gain: 1.0 }],
            field_annulus: default_annulus(),
            normalize_fields: true,
            normalize: true,
            initial_state: None,
        }
    }
}
