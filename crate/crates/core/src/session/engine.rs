//! The evolution loop `Φ̇ = A(t, u, u̇, ξ)Φ` steered by gaze events.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::config::{NoiseOperator, Screening, SessionConfig};
use super::digest::{frame_digest, state_digest, to_hex};
use super::record::{RunFinal, RunHeader, RunRecord, RunStatus, StepRecord, FORMAT_VERSION};
use crate::cutoff::{cutoff_current, CutoffSpec};
use crate::dynamics::{
    band_projector, memory_step, step_deterministic, step_stochastic, EvolState, EvolutionMode, NoiseSource,
};
use crate::error::{DroemError, Result};
use crate::qpft::{solve_primary_field, LaurentOpField, PrimarySpec};
use crate::render::{default_palette, drag_mask, rasterize_state, Frame, Lattice, Sampling};
use crate::scalar::{C64, Q};
use crate::symmetries::{extended_generator, to_orthonormal_frame, GeneratorKind};
use crate::verma::{make_module, LinOp, ScalarMode, TruncatedVermaModule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeEvent {
    pub t: f64,
    pub u: [f64; 2],
    pub du: [f64; 2],
    #[serde(default)]
    pub xi: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero_index")]
    pub observer: usize,
}

fn is_zero_index(v: &usize) -> bool {
    *v == 0
}

impl GazeEvent {
    pub fn at_rest(t: f64) -> Self {
        GazeEvent { t, u: [0.0, 0.0], du: [0.0, 0.0], xi: Vec::new(), observer: 0 }
    }

    pub fn position(&self) -> C64 {
        C64::new(self.u[0], self.u[1])
    }

    pub fn velocity(&self) -> C64 {
        C64::new(self.du[0], self.du[1])
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.t.is_finite()
            && self.u.iter().chain(&self.du).chain(&self.xi).all(|v| v.is_finite());
        if !finite {
            return Err(DroemError::GazeDomain("non-finite gaze field".into()));
        }
        if self.position().norm() > 1.0 {
            return Err(DroemError::GazeDomain(format!("|u| = {} > 1", self.position().norm())));
        }
        Ok(())
    }
}

/// Warnings where the reported `du` differs from `Δu/Δt` by more than 20%.
pub fn check_velocity_consistency(events: &[GazeEvent]) -> Vec<String> {
    let mut out = Vec::new();
    let mut last: std::collections::HashMap<usize, &GazeEvent> = Default::default();
    for e in events {
        if let Some(p) = last.insert(e.observer, e) {
            let dt = e.t - p.t;
            if dt <= 0.0 {
                continue;
            }
            let fd = (e.position() - p.position()) / dt;
            let scale = fd.norm().max(e.velocity().norm());
            if scale > 1e-9 && (fd - e.velocity()).norm() > 0.2 * scale {
                let msg = format!("t = {}: du = {:?} but Δu/Δt = [{}, {}]", e.t, e.du, fd.re, fd.im);
                log::warn!("{msg}");
                out.push(msg);
            }
        }
    }
    out
}

fn spin_field(module: &TruncatedVermaModule, spin: i64, cutoff: Option<usize>) -> Result<LaurentOpField<Q>> {
    let field = solve_primary_field::<Q>(module, &PrimarySpec::natural(spin, module.degree()))?;
    let Some(n) = cutoff.filter(|_| spin == 1) else {
        return Ok(field);
    };
    // Regular part u⁰ … u^{N−1} from the cut-off currents J^cut_{−k}.
    let spec = CutoffSpec::new(module, n)?;
    let mut modes: Vec<LinOp<Q>> = field.modes().map(|(_, m)| m.clone()).collect();
    for p in 0..n as i64 {
        let sign = if p % 2 == 0 { -Q::one() } else { Q::one() };
        modes.push(cutoff_current(&spec, -(p + 1))?.scale(&sign));
    }
    LaurentOpField::new(module.dim(), field.n_min(), modes)
}

fn orthonormal_field(field: &LaurentOpField<Q>, gram: &[Q]) -> Result<LaurentOpField<C64>> {
    let modes = field.modes().map(|(_, m)| to_orthonormal_frame(m, gram)).collect();
    LaurentOpField::new(field.dim(), field.n_min(), modes)
}

fn noise_operator(module: &TruncatedVermaModule, gram: &[Q], op: &NoiseOperator) -> Result<LinOp<C64>> {
    let exact = match op {
        NoiseOperator::Grading => module.sl2_generator::<Q>(0)?,
        NoiseOperator::Scalar => LinOp::identity(module.dim()),
        NoiseOperator::Symmetric { order } => {
            let up = extended_generator(module, *order, GeneratorKind::VectorField)?.op;
            let down = extended_generator(module, -*order, GeneratorKind::VectorField)?.op;
            up.add(&down)?
        }
    };
    Ok(to_orthonormal_frame(&exact, gram))
}

fn screening_operator(dim: usize, s: &Screening) -> LinOp<C64> {
    match s {
        Screening::Identity => LinOp::identity(dim),
        Screening::Band { lo, hi } => band_projector(dim, *lo, *hi),
        Screening::Zero => LinOp::zeros(dim),
    }
}

fn apply(a: &LinOp<C64>, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::zero(); v.len()];
    crate::linalg::matvec_c64(a.dim(), a.data(), v, &mut out);
    out
}

/// The stepper's exclusive state: operators in the orthonormal frame, the
/// current `Φ` and the held gaze of each observer.
pub struct Engine {
    config: SessionConfig,
    lattice: Lattice,
    fields: Vec<LaurentOpField<C64>>,
    noise_ops: Vec<LinOp<C64>>,
    screens: Vec<LinOp<C64>>,
    noise: NoiseSource,
    state: EvolState,
    gazes: Vec<GazeEvent>,
}

impl Engine {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let module = make_module(config.module.h.value().clone(), config.module.degree, ScalarMode::ExactRational)?;
        let gram = module.shapovalov_form()?;
        let fields = (1..=config.angular_order as i64)
            .map(|s| orthonormal_field(&spin_field(&module, s, config.cutoff)?, &gram))
            .collect::<Result<Vec<_>>>()?;
        let noise_ops = config
            .noise
            .iter()
            .map(|n| Ok(noise_operator(&module, &gram, &n.operator)?.scale(&C64::new(n.amplitude, 0.0))))
            .collect::<Result<Vec<_>>>()?;
        let dim = config.dim();
        let screens = config.observers.iter().map(|o| screening_operator(dim, &o.screening)).collect();
        let phi = match &config.initial_state {
            Some(v) => v.iter().map(|[re, im]| C64::new(*re, *im)).collect(),
            None => (0..dim).map(|j| C64::new(1.0 / (j as f64 + 1.0), 0.0)).collect(),
        };
        let mut state = if config.memory.is_some() { EvolState::with_memory(phi) } else { EvolState::new(phi) };
        if config.normalize {
            normalize(&mut state);
        }
        let gazes = (0..config.observers.len()).map(|_| GazeEvent::at_rest(0.0)).collect();
        let lattice = config.lattice;
        let noise = NoiseSource::new(config.seed);
        Ok(Engine { config, lattice, fields, noise_ops, screens, noise, state, gazes })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn state(&self) -> &EvolState {
        &self.state
    }

    pub fn step_index(&self) -> u64 {
        self.state.step
    }

    pub fn time(&self) -> f64 {
        self.state.step as f64 * self.config.dt
    }

    pub fn gaze(&self, observer: usize) -> &GazeEvent {
        &self.gazes[observer]
    }

    /// Zero-order hold: the event replaces the observer's held gaze.
    pub fn apply_event(&mut self, e: &GazeEvent) -> Result<()> {
        e.validate()?;
        if e.observer >= self.gazes.len() {
            return Err(DroemError::ObserverCount(format!("event for observer {} of {}", e.observer, self.gazes.len())));
        }
        self.gazes[e.observer] = e.clone();
        Ok(())
    }

    /// Radial map of the unit disk onto the field annulus.
    pub fn field_point(&self, u: C64) -> C64 {
        let [r0, r1] = self.config.field_annulus;
        let r = r0 + (r1 - r0) * u.norm().min(1.0);
        let dir = if u.norm() > 0.0 { u / u.norm() } else { C64::one() };
        dir * r
    }

    /// `u̇ⁱ Vᵢ(u)` for each observer and spin, with the observer gain and
    /// spin index; zero-velocity and zero-gain terms are omitted.
    fn held_terms(&self) -> Result<Vec<(f64, usize, usize, LinOp<C64>)>> {
        let mut terms = Vec::new();
        for (o, gaze) in self.gazes.iter().enumerate() {
            let gain = self.config.observers[o].gain;
            let du = gaze.velocity();
            if gain == 0.0 || du == C64::zero() {
                continue;
            }
            let p = self.field_point(gaze.position());
            let mut dup = C64::one();
            for (i, field) in self.fields.iter().enumerate() {
                dup *= du;
                let v = field.eval(p)?;
                let norm = if self.config.normalize_fields { v.frobenius() } else { 1.0 };
                if norm > 0.0 {
                    terms.push((gain, o, i, v.scale(&(dup / norm))));
                }
            }
        }
        Ok(terms)
    }

    /// `A(t)` for the held gazes.
    pub fn angular_operator(&self, t: f64) -> Result<LinOp<C64>> {
        self.assemble(&self.held_terms()?, t)
    }

    fn assemble(&self, terms: &[(f64, usize, usize, LinOp<C64>)], t: f64) -> Result<LinOp<C64>> {
        let mut acc = LinOp::<C64>::zeros(self.config.dim());
        for (gain, o, i, w) in terms {
            let m = self.config.coefficients[*i].eval(t, &self.gazes[*o].xi);
            if m != 0.0 {
                acc.axpy(&C64::new(gain * m, 0.0), w)?;
            }
        }
        Ok(acc)
    }

    pub fn step(&mut self) -> Result<()> {
        let terms = self.held_terms()?;
        let dt = self.config.dt;
        let a_of_t = |t: f64| self.assemble(&terms, t);
        let mut next = if let Some(mem) = &self.config.memory {
            memory_step(&self.state, &a_of_t, mem, dt)?
        } else {
            match self.config.mode {
                EvolutionMode::Deterministic => step_deterministic(&self.state, &a_of_t, dt)?,
                EvolutionMode::Stochastic => {
                    step_stochastic(&self.state, &a_of_t(self.time())?, &self.noise_ops, dt, &self.noise)?
                }
            }
        };
        next.t = next.step as f64 * dt;
        if self.config.normalize {
            normalize(&mut next);
        }
        self.state = next;
        Ok(())
    }

    /// `Ψ = JΦ` rasterized, replicated over the fibers and dragged/masked at
    /// the observer's gaze.
    pub fn render(&self, observer: usize) -> Result<Frame> {
        let screen = self
            .screens
            .get(observer)
            .ok_or_else(|| DroemError::ObserverCount(format!("no observer {observer}")))?;
        let psi = apply(screen, &self.state.phi);
        let base = rasterize_state(&psi, &self.lattice)?.replicate(self.config.fibers.len())?;
        let mut frame = drag_mask(&base, &self.lattice, self.gazes[observer].position(), &self.config.fibers, Sampling::Bilinear)?;
        frame.t = self.time();
        Ok(frame)
    }

    pub fn render_all(&self) -> Result<Vec<Frame>> {
        (0..self.screens.len()).map(|o| self.render(o)).collect()
    }

    pub fn palette(&self) -> Vec<[f32; 3]> {
        self.config.palette.clone().unwrap_or_else(|| default_palette(self.config.fibers.len()))
    }

    pub fn state_digest(&self) -> u64 {
        state_digest(&self.state.phi)
    }
}

fn normalize(state: &mut EvolState) {
    let norm = state.phi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        let inv = 1.0 / norm;
        state.phi.iter_mut().for_each(|c| *c *= inv);
        if let Some(m) = state.memory_aux.as_mut() {
            m.iter_mut().for_each(|c| *c *= inv);
        }
    }
}

/// Digest over every observer's frame, in observer order.
pub fn frames_digest(frames: &[Frame]) -> u64 {
    if frames.len() == 1 {
        return frame_digest(&frames[0]);
    }
    let mut bytes = Vec::with_capacity(8 * frames.len());
    for f in frames {
        bytes.extend(frame_digest(f).to_le_bytes());
    }
    let mut h = fnv::FnvHasher::default();
    std::hash::Hasher::write(&mut h, &bytes);
    std::hash::Hasher::finish(&h)
}

/// One step's output: its record line and, on frame steps, the frames.
pub struct Emitted {
    pub line: StepRecord,
    pub frames: Option<Vec<Frame>>,
}

/// Drives an engine from timestamped events and keeps the run record.
pub struct Runner {
    engine: Engine,
    pending: Vec<GazeEvent>,
    last_t: Vec<Option<f64>>,
    record: RunRecord,
    dropped: u64,
}

impl Runner {
    pub fn new(config: SessionConfig) -> Result<Self> {
        let engine = Engine::new(config.clone())?;
        let frames = engine.render_all()?;
        let header = RunHeader {
            version: FORMAT_VERSION,
            config,
            initial_state: to_hex(engine.state_digest()),
            initial_frame: to_hex(frames_digest(&frames)),
        };
        let last_t = vec![None; engine.config().observers.len()];
        Ok(Runner { engine, pending: Vec::new(), last_t, record: RunRecord::new(header), dropped: 0 })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn add_dropped(&mut self, n: u64) {
        self.dropped += n;
    }

    /// Checks domain and per-observer ordering without consuming the event.
    pub fn admit(&mut self, e: &GazeEvent) -> Result<()> {
        e.validate()?;
        let slot = self
            .last_t
            .get_mut(e.observer)
            .ok_or_else(|| DroemError::ObserverCount(format!("event for observer {}", e.observer)))?;
        if let Some(prev) = *slot {
            if e.t <= prev {
                return Err(DroemError::GazeOrder(format!("t = {} after t = {prev}", e.t)));
            }
        }
        *slot = Some(e.t);
        Ok(())
    }

    /// Steps until the clock reaches `e.t`, then holds `e` for the next step.
    pub fn push_event(&mut self, e: GazeEvent) -> Result<Vec<Emitted>> {
        self.admit(&e)?;
        let out = self.advance_to(e.t)?;
        self.pending.push(e);
        Ok(out)
    }

    /// Queues an event for the next step, bypassing the event clock.
    pub fn hold(&mut self, e: GazeEvent) -> Result<()> {
        self.admit(&e)?;
        self.pending.push(e);
        Ok(())
    }

    pub fn advance_to(&mut self, t: f64) -> Result<Vec<Emitted>> {
        let mut out = Vec::new();
        while self.engine.time() < t {
            out.push(self.step_once()?);
        }
        Ok(out)
    }

    pub fn step_once(&mut self) -> Result<Emitted> {
        let events = std::mem::take(&mut self.pending);
        for e in &events {
            self.engine.apply_event(e)?;
        }
        let k = self.engine.step_index();
        self.engine.step()?;
        let frames = if (k + 1) % self.engine.config().frame_every == 0 { Some(self.engine.render_all()?) } else { None };
        let line = StepRecord {
            step: k + 1,
            t: self.engine.time(),
            gaze: events,
            state: to_hex(self.engine.state_digest()),
            frame: frames.as_ref().map(|f| to_hex(frames_digest(f))),
        };
        self.record.steps.push(line.clone());
        Ok(Emitted { line, frames })
    }

    /// Applies any held events with one more step, runs until `duration`
    /// and closes the record.
    pub fn finish(mut self, duration: Option<f64>) -> RunRecord {
        let mut result = Ok(());
        if !self.pending.is_empty() {
            result = self.step_once().map(|_| ());
        }
        if let (Ok(()), Some(d)) = (&result, duration) {
            result = self.advance_to(d).map(|_| ());
        }
        self.close(result.err())
    }

    pub fn close(mut self, error: Option<DroemError>) -> RunRecord {
        let status = if error.is_some() { RunStatus::Aborted } else { RunStatus::Complete };
        self.record.final_line = Some(RunFinal {
            steps: self.engine.step_index(),
            status,
            error: error.map(|e| e.to_string()),
            dropped_events: self.dropped,
            state: self.engine.state().phi.iter().map(|c| [c.re, c.im]).collect(),
        });
        self.record
    }
}

/// Runs `events` under zero-order hold; the run ends one step after the last
/// event or at `duration`, whichever is later. A stability failure ends the
/// run early with an aborted record.
pub fn run_scripted(config: SessionConfig, events: &[GazeEvent], duration: Option<f64>) -> Result<RunRecord> {
    check_velocity_consistency(events);
    let mut runner = Runner::new(config)?;
    for e in events {
        match runner.push_event(e.clone()) {
            Ok(_) => {}
            Err(err @ DroemError::Stability { .. }) => return Ok(runner.close(Some(err))),
            Err(err) => return Err(err),
        }
    }
    Ok(runner.finish(duration))
}

/// Index of the first step whose digests differ, 0 for the header.
pub fn first_divergence(a: &RunRecord, b: &RunRecord) -> Option<usize> {
    if a.header.initial_state != b.header.initial_state || a.header.initial_frame != b.header.initial_frame {
        return Some(0);
    }
    for (i, (x, y)) in a.steps.iter().zip(&b.steps).enumerate() {
        if x.state != y.state || x.frame != y.frame {
            return Some(i + 1);
        }
    }
    (a.steps.len() != b.steps.len()).then(|| a.steps.len().min(b.steps.len()) + 1)
}
