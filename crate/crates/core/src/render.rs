//! Pixel lattice, rasterization of the state, dragging/masking of
//! multifibred frames and the frame wire format.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{DroemError, Result};
use crate::scalar::C64;

/// Minimal accepted ratio `delta_i / delta_o`.
pub const MIN_STEP_RATIO: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub delta_i: f64,
    pub delta_o: f64,
    pub width: usize,
    pub height: usize,
}

impl Lattice {
    pub fn new(delta_i: f64, delta_o: f64, width: usize, height: usize) -> Result<Self> {
        if !(delta_i > 0.0 && delta_o > 0.0) || width == 0 || height == 0 {
            return Err(DroemError::Domain("lattice steps and size must be positive".into()));
        }
        if delta_i < MIN_STEP_RATIO * delta_o {
            return Err(DroemError::Ratio { delta_i, delta_o });
        }
        Ok(Lattice { delta_i, delta_o, width, height })
    }

    /// Plane units per pixel; the shorter side spans `[-1, 1)`.
    pub fn pixel_size(&self) -> f64 {
        2.0 / self.width.min(self.height) as f64
    }

    pub fn pixel_to_point(&self, px: f64, py: f64) -> C64 {
        let s = self.pixel_size();
        C64::new((px - self.width as f64 / 2.0) * s, (self.height as f64 / 2.0 - py) * s)
    }

    pub fn point_to_pixel(&self, z: C64) -> (f64, f64) {
        let s = self.pixel_size();
        (z.re / s + self.width as f64 / 2.0, self.height as f64 / 2.0 - z.im / s)
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overcolor {
    pub name: String,
    pub data: Vec<f32>,
}

/// Row-major, fiber-interleaved intensities: `data[(y*w + x)*fibers + f]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub width: usize,
    pub height: usize,
    pub fibers: usize,
    pub data: Vec<f32>,
    pub overcolors: Vec<Overcolor>,
}

impl Frame {
    pub fn zeros(width: usize, height: usize, fibers: usize) -> Self {
        Frame { t: 0.0, width, height, fibers, data: vec![0.0; width * height * fibers], overcolors: Vec::new() }
    }

    pub fn from_fn(width: usize, height: usize, fibers: usize, f: impl Fn(usize, usize, usize) -> f32) -> Self {
        let mut out = Frame::zeros(width, height, fibers);
        for y in 0..height {
            for x in 0..width {
                for k in 0..fibers {
                    out.data[(y * width + x) * fibers + k] = f(x, y, k);
                }
            }
        }
        out
    }

    pub fn get(&self, x: usize, y: usize, fiber: usize) -> f32 {
        self.data[(y * self.width + x) * self.fibers + fiber]
    }

    pub fn fiber(&self, k: usize) -> Vec<f32> {
        self.data.iter().skip(k).step_by(self.fibers).copied().collect()
    }

    /// Copies the single fiber of `self` into `fibers` identical fibers.
    pub fn replicate(&self, fibers: usize) -> Result<Frame> {
        if self.fibers != 1 || fibers == 0 {
            return Err(DroemError::Shape("replicate needs a single-fiber frame".into()));
        }
        let data = self.data.iter().flat_map(|v| std::iter::repeat_n(*v, fibers)).collect();
        Ok(Frame { data, fibers, ..self.clone() })
    }

    pub fn to_wire(&self) -> WireFrame {
        WireFrame {
            t: self.t,
            w: self.width,
            h: self.height,
            fibers: self.fibers,
            encoding: ENCODING.into(),
            data: encode_f32(&self.data),
            overcolors: self
                .overcolors
                .iter()
                .map(|o| WireOvercolor { name: o.name.clone(), data: encode_f32(&o.data) })
                .collect(),
        }
    }

    pub fn from_wire(wire: &WireFrame) -> Result<Frame> {
        if wire.encoding != ENCODING {
            return Err(DroemError::Parse(format!("unknown encoding {}", wire.encoding)));
        }
        let data = decode_f32(&wire.data)?;
        if data.len() != wire.w * wire.h * wire.fibers {
            return Err(DroemError::Parse("payload length does not match header".into()));
        }
        let overcolors = wire
            .overcolors
            .iter()
            .map(|o| Ok(Overcolor { name: o.name.clone(), data: decode_f32(&o.data)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Frame { t: wire.t, width: wire.w, height: wire.h, fibers: wire.fibers, data, overcolors })
    }
}

pub const ENCODING: &str = "f32le";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireOvercolor {
    pub name: String,
    pub data: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireFrame {
    pub t: f64,
    pub w: usize,
    pub h: usize,
    pub fibers: usize,
    pub encoding: String,
    pub data: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overcolors: Vec<WireOvercolor>,
}

pub fn encode_f32(values: &[f32]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

pub fn decode_f32(payload: &str) -> Result<Vec<f32>> {
    let bytes = B64.decode(payload).map_err(|e| DroemError::Parse(format!("base64: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(DroemError::Parse("payload is not a whole number of f32".into()));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn for_each_row<T: Send>(data: &mut [T], row_len: usize, f: impl Fn(usize, &mut [T]) + Sync + Send) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| f(y, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(row_len).enumerate().for_each(|(y, row)| f(y, row));
    }
}

/// `p(z) = Σ cₙzⁿ` at each pixel inside the closed unit disk, 0 outside.
pub fn evaluate_state(phi: &[C64], lattice: &Lattice) -> Vec<C64> {
    let mut out = vec![C64::zero(); lattice.pixels()];
    for_each_row(&mut out, lattice.width, |y, row| {
        for (x, v) in row.iter_mut().enumerate() {
            let z = lattice.pixel_to_point(x as f64, y as f64);
            if z.norm_sqr() <= 1.0 {
                *v = phi.iter().rev().fold(C64::zero(), |acc, c| acc * z + c);
            }
        }
    });
    out
}

/// Single-fiber frame of `|p(z)| / max|p|` with the phase `arg p(z)` as an
/// overcolor channel.
pub fn rasterize_state(phi: &[C64], lattice: &Lattice) -> Result<Frame> {
    if phi.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(DroemError::Domain("state has non-finite entries".into()));
    }
    let values = evaluate_state(phi, lattice);
    let max = values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let data = values.iter().map(|v| (v.norm() * scale) as f32).collect();
    let phase = values.iter().map(|v| v.arg() as f32).collect();
    Ok(Frame {
        t: 0.0,
        width: lattice.width,
        height: lattice.height,
        fibers: 1,
        data,
        overcolors: vec![Overcolor { name: "phase".into(), data: phase }],
    })
}

/// Radial masking profile with `f(0) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mask {
    Gaussian { width: f64 },
    RaisedCosine { width: f64 },
    /// Samples on `[0, width]`, linearly interpolated; held beyond.
    Table { width: f64, values: Vec<f64> },
}

impl Mask {
    pub fn unit() -> Self {
        Mask::Table { width: 1.0, values: vec![1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DroemError::Domain(m.into()));
        match self {
            Mask::Gaussian { width } | Mask::RaisedCosine { width } if !(*width > 0.0) => {
                bad("mask width must be > 0")
            }
            Mask::Table { width, values } => {
                if !(*width > 0.0) || values.is_empty() {
                    return bad("table mask needs width > 0 and samples");
                }
                if values[0] != 1.0 || values.iter().any(|v| !(*v >= 0.0)) {
                    return bad("table mask must start at 1 and be nonnegative");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Mask::Gaussian { width } => (-(r * r) / (2.0 * width * width)).exp(),
            Mask::RaisedCosine { width } => {
                if r >= *width {
                    0.0
                } else {
                    0.5 * (1.0 + (std::f64::consts::PI * r / width).cos())
                }
            }
            Mask::Table { width, values } => {
                if values.len() == 1 {
                    return values[0];
                }
                let pos = r / width * (values.len() - 1) as f64;
                let i = pos.floor() as usize;
                if i + 1 >= values.len() {
                    return *values.last().unwrap_or(&0.0);
                }
                let frac = pos - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub gamma: f64,
    pub mask: Mask,
}

impl FiberSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(DroemError::Domain(format!("dragging coefficient {} outside [0, 1]", self.gamma)));
        }
        self.mask.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    Bilinear,
    Nearest,
}

fn sample(frame: &Frame, fiber: usize, sx: f64, sy: f64, mode: Sampling) -> f64 {
    let (w, h) = (frame.width as i64, frame.height as i64);
    let at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            frame.get(x as usize, y as usize, fiber) as f64
        }
    };
    match mode {
        Sampling::Nearest => at(sx.round() as i64, sy.round() as i64),
        Sampling::Bilinear => {
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
            let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
            top * (1.0 - fy) + bottom * fy
        }
    }
}

/// Per fiber `out(x) = f(|x − u|) · in(x − γu)`; overcolors pass through.
pub fn drag_mask(frame: &Frame, lattice: &Lattice, u: C64, fibers: &[FiberSpec], mode: Sampling) -> Result<Frame> {
    if fibers.len() != frame.fibers {
        return Err(DroemError::Shape(format!("{} fiber specs for {} fibers", fibers.len(), frame.fibers)));
    }
    if frame.width != lattice.width || frame.height != lattice.height {
        return Err(DroemError::Shape("frame and lattice sizes differ".into()));
    }
    if u.norm() > 1.0 {
        return Err(DroemError::Domain(format!("gaze |u| = {} > 1", u.norm())));
    }
    for spec in fibers {
        spec.validate()?;
    }
    let s = lattice.pixel_size();
    let nf = frame.fibers;
    let mut out = Frame { data: vec![0.0; frame.data.len()], ..frame.clone() };
    for_each_row(&mut out.data, frame.width * nf, |y, row| {
        for x in 0..frame.width {
            let z = lattice.pixel_to_point(x as f64, y as f64);
            let r = (z - u).norm();
            for (k, spec) in fibers.iter().enumerate() {
                let (sx, sy) = (x as f64 - spec.gamma * u.re / s, y as f64 + spec.gamma * u.im / s);
                let v = spec.mask.eval(r) * sample(frame, k, sx, sy, mode);
                row[x * nf + k] = v as f32;
            }
        }
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Three floats per pixel in `[0, 1]`.
    pub data: Vec<f32>,
}

impl RgbImage {
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn to_rgba8(&self) -> Vec<u8> {
        self.data
            .chunks_exact(3)
            .flat_map(|p| {
                let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                [q(p[0]), q(p[1]), q(p[2]), 255]
            })
            .collect()
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_rgba8().chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]));
        out
    }
}

/// Additive composition: each fiber's intensity times its palette color,
/// clamped to `[0, 1]`.
pub fn compose_fibers(frame: &Frame, palette: &[[f32; 3]]) -> Result<RgbImage> {
    if palette.len() != frame.fibers {
        return Err(DroemError::PaletteSize { palette: palette.len(), fibers: frame.fibers });
    }
    let nf = frame.fibers;
    let mut data = vec![0.0f32; 3 * frame.width * frame.height];
    for_each_row(&mut data, 3 * frame.width, |y, row| {
        for x in 0..frame.width {
            let base = (y * frame.width + x) * nf;
            let mut rgb = [0.0f32; 3];
            for (k, color) in palette.iter().enumerate() {
                let v = frame.data[base + k];
                for c in 0..3 {
                    rgb[c] += v * color[c];
                }
            }
            for c in 0..3 {
                row[3 * x + c] = rgb[c].clamp(0.0, 1.0);
            }
        }
    });
    Ok(RgbImage { width: frame.width, height: frame.height, data })
}

/// Evenly spaced hues, first fiber white when alone.
pub fn default_palette(fibers: usize) -> Vec<[f32; 3]> {
    const BASE: [[f32; 3]; 6] =
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]];
    if fibers == 1 {
        return vec![[1.0, 1.0, 1.0]];
    }
    (0..fibers).map(|k| BASE[k % BASE.len()]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(n: usize) -> Lattice {
        Lattice::new(0.08, 0.01, n, n).unwrap()
    }

    #[test]
    fn lattice_examples() {
        assert!(Lattice::new(0.08, 0.01, 128, 128).is_ok());
        assert!(matches!(Lattice::new(0.02, 0.01, 128, 128), Err(DroemError::Ratio { .. })));
        let l = lattice(128);
        assert_eq!(l.pixel_to_point(64.0, 64.0), C64::new(0.0, 0.0));
        let z = C64::new(0.3, -0.7);
        let (px, py) = l.point_to_pixel(z);
        assert!((l.pixel_to_point(px, py) - z).norm() < 1e-15);
    }

    #[test]
    fn constant_and_ramp_states() {
        let l = lattice(64);
        let one = rasterize_state(&[C64::new(1.0, 0.0)], &l).unwrap();
        let center = one.get(32, 32, 0);
        assert_eq!(center, 1.0);
        assert_eq!(one.get(0, 0, 0), 0.0);
        let ramp = rasterize_state(&[C64::zero(), C64::new(1.0, 0.0)], &l).unwrap();
        assert_eq!(ramp.get(32, 32, 0), 0.0);
        assert!(ramp.get(48, 32, 0) > ramp.get(40, 32, 0));
        let zero = rasterize_state(&[C64::zero(); 4], &l).unwrap();
        assert!(zero.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pure_masking_at_origin() {
        let l = lattice(32);
        let f = Frame::from_fn(32, 32, 1, |x, y, _| ((x + 2 * y) % 7) as f32 / 7.0);
        let mask = Mask::Gaussian { width: 0.4 };
        let out = drag_mask(&f, &l, C64::zero(), &[FiberSpec { gamma: 0.6, mask: mask.clone() }], Sampling::Bilinear)
            .unwrap();
        for (x, y) in [(3, 4), (16, 16), (30, 1)] {
            let r = l.pixel_to_point(x as f64, y as f64).norm();
            let expect = (mask.eval(r) * f.get(x, y, 0) as f64) as f32;
            assert_eq!(out.get(x, y, 0), expect);
        }
    }

    #[test]
    fn mask_profiles() {
        assert_eq!(Mask::Gaussian { width: 0.3 }.eval(0.0), 1.0);
        assert_eq!(Mask::RaisedCosine { width: 0.3 }.eval(0.0), 1.0);
        assert_eq!(Mask::RaisedCosine { width: 0.3 }.eval(0.5), 0.0);
        let t = Mask::Table { width: 1.0, values: vec![1.0, 0.5, 0.0] };
        assert_eq!(t.eval(0.25), 0.75);
        assert_eq!(t.eval(3.0), 0.0);
        assert!(Mask::Table { width: 1.0, values: vec![0.5] }.validate().is_err());
    }

    #[test]
    fn palette_mismatch_errors() {
        let f = Frame::zeros(4, 4, 2);
        assert!(matches!(compose_fibers(&f, &[[1.0; 3]]), Err(DroemError::PaletteSize { palette: 1, fibers: 2 })));
    }

    #[test]
    fn additive_colors() {
        let f = Frame::from_fn(2, 1, 2, |_, _, _| 1.0);
        let img = compose_fibers(&f, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(img.pixel(1, 0), [1.0, 1.0, 0.0]);
        let g = Frame::from_fn(2, 1, 1, |x, _, _| x as f32 * 0.5);
        let gray = compose_fibers(&g, &[[1.0; 3]]).unwrap();
        assert_eq!(gray.pixel(1, 0), [0.5, 0.5, 0.5]);
    }
}
