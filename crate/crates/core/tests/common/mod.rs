#![allow(dead_code)]

pub mod measure;
pub mod oracle;

use std::path::PathBuf;

use droem_core::session::GazeEvent;

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden").join(name)
}

/// Compares `actual` with the stored golden file byte for byte; with
/// `DROEM_BLESS=1` the file is (re)written instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var("DROEM_BLESS").is_ok_and(|v| v == "1") {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path)
        .map_err(|e| format!("missing golden file {} ({e}); run with DROEM_BLESS=1", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b).map(|i| i + 1);
        Err(format!("{} differs from golden (first differing line {:?})", name, line))
    }
}

/// Gaze circling the origin at radius `r`, sampled at `rate` Hz.
pub fn circular_gaze(r: f64, omega: f64, seconds: f64, rate: f64) -> Vec<GazeEvent> {
    let n = (seconds * rate).round() as usize;
    (1..=n)
        .map(|k| {
            let t = k as f64 / rate;
            let (s, c) = (omega * t).sin_cos();
            GazeEvent { t, u: [r * c, r * s], du: [-r * omega * s, r * omega * c], xi: Vec::new(), observer: 0 }
        })
        .collect()
}
