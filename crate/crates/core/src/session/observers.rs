//! Multi-observer harness: one shared state, per-observer screening and the
//! frame-correlation diagnostic.

use serde::{Deserialize, Serialize};

use super::engine::{Engine, GazeEvent};
use crate::error::{DroemError, Result};
use crate::render::{Frame, Lattice};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Pearson correlation of frame intensities; `None` where a frame has
    /// zero variance.
    pub pairwise: Vec<Vec<Option<f64>>>,
    /// Share of the total frame variance explained by the all-observer mean
    /// frame.
    pub collective_diagnostic: Option<f64>,
}

pub fn pearson(a: &[f32], b: &[f32]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().map(|v| *v as f64).sum::<f64>() / n;
    let mb = b.iter().map(|v| *v as f64).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (*x as f64 - ma, *y as f64 - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Fiber-interleaved mask of the samples inside the closed unit disk.
pub fn domain_mask(lattice: &Lattice, fibers: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(lattice.pixels() * fibers);
    for y in 0..lattice.height {
        for x in 0..lattice.width {
            let inside = lattice.pixel_to_point(x as f64, y as f64).norm_sqr() <= 1.0;
            out.extend(std::iter::repeat_n(inside, fibers));
        }
    }
    out
}

/// Correlations over the samples selected by `mask` (all when `None`).
pub fn correlation_report(frames: &[Frame], mask: Option<&[bool]>) -> Result<CorrelationReport> {
    if frames.len() < 2 {
        return Err(DroemError::ObserverCount(format!("{} observers, correlations need ≥ 2", frames.len())));
    }
    let len = frames[0].data.len();
    if frames.iter().any(|f| f.data.len() != len) || mask.is_some_and(|m| m.len() != len) {
        return Err(DroemError::Shape("observer frames differ in size".into()));
    }
    let select = |f: &Frame| -> Vec<f32> {
        match mask {
            Some(m) => f.data.iter().zip(m).filter(|(_, keep)| **keep).map(|(v, _)| *v).collect(),
            None => f.data.clone(),
        }
    };
    let selected: Vec<Vec<f32>> = frames.iter().map(select).collect();
    let pairwise = selected.iter().map(|a| selected.iter().map(|b| pearson(a, b)).collect()).collect();
    let frames = &selected;
    let len = frames[0].len();
    let k = frames.len() as f64;
    let mean: Vec<f64> = (0..len).map(|p| frames.iter().map(|f| f[p] as f64).sum::<f64>() / k).collect();
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for f in frames {
        let m = f.iter().map(|v| *v as f64).sum::<f64>() / len as f64;
        for (v, c) in f.iter().zip(&mean) {
            ss_res += (*v as f64 - c).powi(2);
            ss_tot += (*v as f64 - m).powi(2);
        }
    }
    let collective_diagnostic = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    Ok(CorrelationReport { pairwise, collective_diagnostic })
}

/// Applies one gaze event per observer, steps the shared state once and
/// returns each observer's frame with the correlation report over the
/// evaluation disk.
pub fn multi_observer_step(engine: &mut Engine, events: &[GazeEvent]) -> Result<(Vec<Frame>, CorrelationReport)> {
    let count = engine.config().observers.len();
    if count < 2 {
        return Err(DroemError::ObserverCount(format!("{count} observers, the harness needs ≥ 2")));
    }
    for e in events {
        engine.apply_event(e)?;
    }
    engine.step()?;
    let frames = engine.render_all()?;
    let mask = domain_mask(&engine.config().lattice, engine.config().fibers.len());
    let report = correlation_report(&frames, Some(&mask))?;
    Ok((frames, report))
}
