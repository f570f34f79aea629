//! Browser bindings. The plain Rust API (`LiveView`, `defect_curve_json`,
//! `cutoff_probe_json`) is what the wasm exports wrap, so it can be tested
//! natively.

use droem_core::cutoff::{nonlinear_sl2_probe, CutoffSpec};
use droem_core::render::compose_fibers;
use droem_core::session::{Engine, GazeEvent, SessionConfig};
use droem_core::symmetries::asymptotic_scan;
use droem_core::{make_module, DroemError, Rational, Result, ScalarMode, Q};
use wasm_bindgen::prelude::*;

/// Largest gaze radius accepted from the pointer; the engine needs `|u| < 1`.
const MAX_RADIUS: f64 = 0.98;

/// A demo session steered by a single pointer.
pub struct LiveView {
    engine: Engine,
    last: Option<[f64; 2]>,
}

impl LiveView {
    /// Demo session at `size × size` with the two fibers dragged at the given
    /// rates.
    pub fn new(size: usize, gamma_near: f64, gamma_far: f64) -> Result<Self> {
        let mut config = SessionConfig::demo();
        config.lattice.width = size;
        config.lattice.height = size;
        if config.fibers.len() != 2 {
            return Err(DroemError::Shape(format!("demo has {} fibers", config.fibers.len())));
        }
        config.fibers[0].gamma = gamma_near;
        config.fibers[1].gamma = gamma_far;
        Ok(LiveView { engine: Engine::new(config)?, last: None })
    }

    pub fn width(&self) -> usize {
        self.engine.config().lattice.width
    }

    pub fn height(&self) -> usize {
        self.engine.config().lattice.height
    }

    pub fn time(&self) -> f64 {
        self.engine.time()
    }

    pub fn digest(&self) -> String {
        format!("{:016x}", self.engine.state_digest())
    }

    /// Moves the gaze to `(x, y)` in disk coordinates, advances `steps`
    /// integration steps and returns the composed frame as RGBA bytes.
    /// The velocity is the displacement since the previous call over the
    /// elapsed simulated time.
    pub fn advance(&mut self, x: f64, y: f64, steps: usize) -> Result<Vec<u8>> {
        let u = clamp_to_disk([x, y]);
        let span = self.engine.config().dt * steps.max(1) as f64;
        let du = match self.last {
            Some(p) => [(u[0] - p[0]) / span, (u[1] - p[1]) / span],
            None => [0.0, 0.0],
        };
        self.last = Some(u);
        let event = GazeEvent { t: self.engine.time(), u, du, xi: Vec::new(), observer: 0 };
        self.engine.apply_event(&event)?;
        for _ in 0..steps {
            self.engine.step()?;
        }
        self.frame()
    }

    /// The current frame of observer 0 as RGBA bytes.
    pub fn frame(&self) -> Result<Vec<u8>> {
        let frame = self.engine.render(0)?;
        Ok(compose_fibers(&frame, &self.engine.palette())?.to_rgba8())
    }
}

fn clamp_to_disk(u: [f64; 2]) -> [f64; 2] {
    let r = u[0].hypot(u[1]);
    if r <= MAX_RADIUS {
        u
    } else {
        [u[0] * MAX_RADIUS / r, u[1] * MAX_RADIUS / r]
    }
}

fn parse_q(s: &str) -> Result<Q> {
    s.trim()
        .parse::<Rational>()
        .map(|r| r.0)
        .map_err(|e| DroemError::Parse(format!("bad rational {s:?}: {e}")))
}

/// Defect scaling of `[L_m, L_n]` over `h = 1/2 + ħ` for the listed `ħ`
/// (rationals, comma separated), as JSON.
pub fn defect_curve_json(m: i64, n: i64, hbars: &str, degree: usize, window: usize) -> Result<String> {
    let half = Q::new(1.into(), 2.into());
    let hs = hbars
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_q(s).map(|hb| &half + hb))
        .collect::<Result<Vec<_>>>()?;
    let scan = asymptotic_scan(&hs, &[(m, n)], degree, window)?;
    Ok(serde_json::to_string(&scan[0]).expect("scan serializes"))
}

/// The cut-off sl2 probe at weight `h` and interpolation order `order`.
pub fn cutoff_probe_json(h: &str, order: usize, degree: usize) -> Result<String> {
    let module = make_module(parse_q(h)?, degree, ScalarMode::ExactRational)?;
    let spec = CutoffSpec::new(&module, order)?;
    Ok(nonlinear_sl2_probe(&spec)?.to_json_pretty())
}

fn js(e: DroemError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = LiveView)]
pub struct WebLiveView(LiveView);

#[wasm_bindgen(js_class = LiveView)]
impl WebLiveView {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, gamma_near: f64, gamma_far: f64) -> std::result::Result<WebLiveView, JsError> {
        LiveView::new(size, gamma_near, gamma_far).map(WebLiveView).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[wasm_bindgen(getter)]
    pub fn time(&self) -> f64 {
        self.0.time()
    }

    pub fn digest(&self) -> String {
        self.0.digest()
    }

    pub fn advance(&mut self, x: f64, y: f64, steps: usize) -> std::result::Result<Vec<u8>, JsError> {
        self.0.advance(x, y, steps).map_err(js)
    }

    pub fn frame(&self) -> std::result::Result<Vec<u8>, JsError> {
        self.0.frame().map_err(js)
    }
}

#[wasm_bindgen(js_name = defectCurve)]
pub fn defect_curve(m: i64, n: i64, hbars: &str, degree: usize, window: usize) -> std::result::Result<String, JsError> {
    defect_curve_json(m, n, hbars, degree, window).map_err(js)
}

#[wasm_bindgen(js_name = cutoffProbe)]
pub fn cutoff_probe(h: &str, order: usize, degree: usize) -> std::result::Result<String, JsError> {
    cutoff_probe_json(h, order, degree).map_err(js)
}
