//! Measurements shared by the per-module tests and the acceptance run.

use std::time::Instant;

use droem_core::dynamics::{ensemble, step_deterministic, step_stochastic, EvolState, NoiseSource};
use droem_core::render::{compose_fibers, drag_mask, rasterize_state, FiberSpec, Frame, Lattice, Mask, Sampling};
use droem_core::symmetries::{defect, extended_generator, group_law_residual, to_orthonormal_frame, GeneratorKind};
use droem_core::{make_module, LinOp, ScalarMode, C64, Q};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn scalar_op(a: f64) -> LinOp<C64> {
    LinOp::from_fn(1, 0, 0, 0, |_, _| C64::new(a, 0.0))
}

pub fn integrate(a: &LinOp<C64>, phi0: Vec<C64>, t_end: f64, dt: f64) -> EvolState {
    let steps = (t_end / dt).round() as usize;
    let mut s = EvolState::new(phi0);
    for _ in 0..steps {
        s = step_deterministic(&s, &|_| Ok(a.clone()), dt).unwrap();
    }
    s
}

/// Observed order of RK4 on `φ' = 1.3φ` over `[0, 1]`, from `dt = 0.1, 0.05`.
pub fn rk4_order() -> f64 {
    let a = 1.3;
    let exact = (a * 1.0f64).exp();
    let err = |dt: f64| {
        let s = integrate(&scalar_op(a), vec![C64::new(1.0, 0.0)], 1.0, dt);
        (s.phi[0].re - exact).abs() / exact
    };
    (err(0.1) / err(0.05)).log2()
}

/// Endpoints of `dX = aX dt + bX dW`, `X₀ = 1`.
pub fn geometric_paths(a: f64, b: f64, t_end: f64, dt: f64, paths: usize, seed: u64) -> Vec<f64> {
    let (drift, diffusion) = (scalar_op(a), scalar_op(b));
    let steps = (t_end / dt).round() as usize;
    ensemble(paths, seed, |noise: NoiseSource| {
        let mut s = EvolState::new(vec![C64::new(1.0, 0.0)]);
        for _ in 0..steps {
            s = step_stochastic(&s, &drift, std::slice::from_ref(&diffusion), dt, &noise).unwrap();
        }
        s.phi[0].re
    })
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `(mean, se, target)` for `a = b = 0.5`, `T = 1`, 10⁴ paths.
pub fn sde_mean_check() -> (f64, f64, f64) {
    let xs = geometric_paths(0.5, 0.5, 1.0, 0.01, 10_000, 2024);
    let (mean, se) = mean_and_se(&xs);
    (mean, se, 0.5f64.exp())
}

/// Slope of `log|E[X_T] − e^{aT}|` against `log dt`.
pub fn weak_order() -> f64 {
    let dts = [0.2, 0.1, 0.05, 0.025];
    let target = 1.0f64.exp();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, dt) in dts.iter().enumerate() {
        let paths = geometric_paths(1.0, 0.2, 1.0, *dt, 100_000, 7_000_000 * (k as u64 + 1));
        let (mean, _) = mean_and_se(&paths);
        xs.push(dt.ln());
        ys.push((mean - target).abs().ln());
    }
    droem_core::linalg::fit_line(&xs, &ys).1
}

pub fn lattice(n: usize) -> Lattice {
    Lattice::new(0.08, 0.01, n, n).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
    (0..len).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Whether `γ = 0` with a unit mask reproduces random frames bit for bit.
pub fn identity_drag_is_exact() -> bool {
    let l = lattice(64);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vals: Vec<f32> = (0..64 * 64 * 2).map(|_| rng.random_range(0.0..1.0)).collect();
    let frame = Frame::from_fn(64, 64, 2, |x, y, k| vals[(y * 64 + x) * 2 + k]);
    let specs = vec![FiberSpec { gamma: 0.0, mask: Mask::unit() }; 2];
    [C64::new(0.0, 0.0), C64::new(0.31, -0.52)].iter().all(|&u| {
        [Sampling::Bilinear, Sampling::Nearest]
            .iter()
            .all(|&mode| drag_mask(&frame, &l, u, &specs, mode).unwrap().data == frame.data)
    })
}

/// Maximum deviation between `drag_mask` and the pointwise formula at 10
/// probe pixels, with a smooth input and a lattice-aligned shift.
pub fn drag_oracle_deviation() -> f64 {
    let n = 128;
    let l = lattice(n);
    let g = |z: C64| (z.re * 3.0).sin() * (z.im * 2.0).cos() + 0.5 * z.norm_sqr();
    let frame = Frame::from_fn(n, n, 2, |x, y, k| {
        let z = l.pixel_to_point(x as f64, y as f64);
        (g(z) * (1.0 + k as f64)) as f32
    });
    let s = l.pixel_size();
    let u = C64::new(12.0 * s, -8.0 * s);
    let specs = vec![
        FiberSpec { gamma: 1.0, mask: Mask::Gaussian { width: 0.35 } },
        FiberSpec { gamma: 0.5, mask: Mask::RaisedCosine { width: 0.6 } },
    ];
    let out = drag_mask(&frame, &l, u, &specs, Sampling::Bilinear).unwrap();
    let probes = [(64, 64), (70, 60), (80, 90), (40, 50), (100, 30), (20, 100), (64, 40), (90, 70), (55, 75), (30, 30)];
    let mut worst = 0.0f64;
    for (x, y) in probes {
        let z = l.pixel_to_point(x as f64, y as f64);
        for (k, spec) in specs.iter().enumerate() {
            let src = z - u * spec.gamma;
            let input = (g(src) * (1.0 + k as f64)) as f32 as f64;
            let expect = spec.mask.eval((z - u).norm()) * input;
            worst = worst.max((out.get(x, y, k) as f64 - expect).abs());
        }
    }
    worst
}

/// Median milliseconds for rasterize + drag_mask + compose at 128×128×2.
pub fn pipeline_millis(phi_len: usize) -> f64 {
    let l = lattice(128);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = random_state(&mut rng, phi_len);
    let specs = vec![
        FiberSpec { gamma: 0.3, mask: Mask::Gaussian { width: 0.4 } },
        FiberSpec { gamma: 0.8, mask: Mask::RaisedCosine { width: 0.7 } },
    ];
    let palette = [[1.0, 0.2, 0.1], [0.1, 0.6, 1.0]];
    let mut times = Vec::new();
    for i in 0..25 {
        let u = C64::new(0.3 * (i as f64 * 0.2).cos(), 0.3 * (i as f64 * 0.2).sin());
        let start = Instant::now();
        let frame = rasterize_state(&phi, &l).unwrap().replicate(2).unwrap();
        let dragged = drag_mask(&frame, &l, u, &specs, Sampling::Bilinear).unwrap();
        let img = compose_fibers(&dragged, &palette).unwrap();
        std::hint::black_box(img);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(|a, b| a.total_cmp(b));
    times[times.len() / 2]
}

/// Relative change of the `[0, 12]` window norm of `D(2, −2)` between two
/// truncations.
pub fn window_change(h: Q, d_small: usize, d_large: usize) -> f64 {
    let vf = GeneratorKind::VectorField;
    let norm = |d: usize| {
        let m = make_module(h.clone(), d, ScalarMode::ExactRational).unwrap();
        defect(&m, (2, vf), (-2, vf), 12).unwrap().tail_norms[0]
    };
    let (a, b) = (norm(d_small), norm(d_large));
    (a - b).abs() / b
}

/// `ρ(Lₙ) + ρ(L₋ₙ)` in the orthonormal frame.
pub fn symmetric_generator(h: Q, d: usize, order: i64) -> LinOp<C64> {
    let m = make_module(h, d, ScalarMode::ExactRational).unwrap();
    let vf = GeneratorKind::VectorField;
    let up = extended_generator(&m, order, vf).unwrap().op;
    let down = extended_generator(&m, -order, vf).unwrap().op;
    to_orthonormal_frame(&up.add(&down).unwrap(), &m.shapovalov_form().unwrap())
}

/// Largest group-law residual of `ρ(L₂) + ρ(L₋₂)` over `t, s ∈ {0.1, 0.2}`.
pub fn worst_group_law(h: Q, d: usize) -> f64 {
    let x = symmetric_generator(h, d, 2);
    let mut worst = 0.0f64;
    for t in [0.1, 0.2] {
        for s in [0.1, 0.2] {
            worst = worst.max(group_law_residual(&x, t, s).unwrap().absolute);
        }
    }
    worst
}
