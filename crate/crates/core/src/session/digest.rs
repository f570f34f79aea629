//! 64-bit FNV-1a digests of states and frames.

use std::hash::Hasher;

use fnv::FnvHasher;

use crate::render::Frame;
use crate::scalar::C64;

/// Little-endian `(re, im)` f64 pairs in degree order.
pub fn state_digest(phi: &[C64]) -> u64 {
    let mut h = FnvHasher::default();
    for c in phi {
        h.write(&c.re.to_le_bytes());
        h.write(&c.im.to_le_bytes());
    }
    h.finish()
}

/// Intensities, then each overcolor channel, as little-endian f32.
pub fn frame_digest(frame: &Frame) -> u64 {
    let mut h = FnvHasher::default();
    for v in &frame.data {
        h.write(&v.to_le_bytes());
    }
    for o in &frame.overcolors {
        for v in &o.data {
            h.write(&v.to_le_bytes());
        }
    }
    h.finish()
}

pub fn to_hex(d: u64) -> String {
    format!("{d:016x}")
}
