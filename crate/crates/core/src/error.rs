use thiserror::Error;

pub type Result<T, E = DroemError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DroemError {
    /// `2h + i` vanishes for some degree the module needs.
    #[error("pole: 2h + {index} = 0 for h = {h}")]
    Pole { h: String, index: i64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no primary field solution: {0}")]
    NoSolution(String),

    #[error("operator product does not close on the candidate basis (residual {residual:e})")]
    NotClosed { residual: f64 },

    #[error("missing structure data for pair ({0}, {1})")]
    MissingStructure(usize, usize),

    #[error("sample hits a pole of the structure field: {0}")]
    SingularSample(String),

    #[error("algebra has no unit: {0}")]
    NoUnit(String),

    #[error("evaluation point outside the field's domain: {0}")]
    EvalDomain(String),

    #[error("forward difference of the interpolant vanishes at degree {0}")]
    DegenerateDifference(usize),

    #[error("module is not unitarizable (h = {0}); adjoint generators need h > 0")]
    Unitarizability(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("matrix exponential overflowed at t = {t}")]
    Overflow { t: f64 },

    #[error("non-finite state at t = {t}")]
    Stability { t: f64 },

    #[error("lattice steps violate delta_I >= 8 delta_O ({delta_i} vs {delta_o})")]
    Ratio { delta_i: f64, delta_o: f64 },

    #[error("palette has {palette} colors for {fibers} fibers")]
    PaletteSize { palette: usize, fibers: usize },

    #[error("observer count: {0}")]
    ObserverCount(String),

    #[error("gaze outside the unit disk: {0}")]
    GazeDomain(String),

    #[error("gaze events out of order: {0}")]
    GazeOrder(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("bind error: {0}")]
    Bind(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
