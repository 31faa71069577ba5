//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use dgp_core::geometry::edge_lengths;
use dgp_core::likelihood::MeasurementSet;
use dgp_core::{NoiseModel, PointSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integral of a density over the real line, mapped onto `(-pi/2, pi/2)` by
/// `y = loc + scale * tan(t)` and split at `loc`.
pub fn integrate_real_line(pdf: &dyn Fn(f64) -> f64, loc: f64, scale: f64, tol: f64) -> f64 {
    let g = |t: f64| {
        let c = t.cos();
        if c <= 0.0 {
            return 0.0;
        }
        let v = pdf(loc + scale * t.tan()) * scale / (c * c);
        if v.is_finite() { v } else { 0.0 }
    };
    let edge = std::f64::consts::FRAC_PI_2;
    integrate(&g, -edge, 0.0, tol) + integrate(&g, 0.0, edge, tol)
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            xp[k] = x[k] + h;
            let up = f(&xp);
            xp[k] = x[k] - h;
            let down = f(&xp);
            xp[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_k |a_k - b_k| / max_k |b_k|`.
pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Uniform points in `[-1, 1]^dim` with pairwise separation above `min_sep`.
pub fn random_points(rng: &mut impl Rng, n: usize, dim: usize, min_sep: f64) -> PointSet {
    loop {
        let coords: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ps = PointSet::new("rand", dim, coords).unwrap();
        if edge_lengths(&ps).lengths().iter().all(|&d| d > min_sep) {
            return ps;
        }
    }
}

/// Simulated measurements with every residual at least `min_residual` away
/// from the truth.
pub fn measurements_away_from(
    truth: &PointSet,
    model: &NoiseModel,
    m: usize,
    min_residual: f64,
    rng: &mut impl Rng,
) -> MeasurementSet {
    let lengths = edge_lengths(truth);
    let mut values = Vec::with_capacity(lengths.lengths().len() * m);
    for &d in lengths.lengths() {
        for _ in 0..m {
            let y = loop {
                let y = model.sample(d, rng);
                if (y - d).abs() >= min_residual {
                    break y;
                }
            };
            values.push(y);
        }
    }
    MeasurementSet::new(truth.id(), truth.n_points(), m, values).unwrap()
}

/// Centered copy as `(x, y)` columns.
fn centered_2d(ps: &PointSet) -> Vec<(f64, f64)> {
    let n = ps.n_points() as f64;
    let cx = ps.points().map(|p| p[0]).sum::<f64>() / n;
    let cy = ps.points().map(|p| p[1]).sum::<f64>() / n;
    ps.points().map(|p| (p[0] - cx, p[1] - cy)).collect()
}

/// Minimum alignment loss over a rotation-angle grid, with and without a
/// reflection of the estimate.
pub fn brute_force_opp_loss_2d(estimate: &PointSet, truth: &PointSet, step: f64) -> f64 {
    let e = centered_2d(estimate);
    let t = centered_2d(truth);
    let steps = (std::f64::consts::TAU / step).ceil() as usize;
    let mut best = f64::INFINITY;
    for reflect in [1.0, -1.0] {
        for k in 0..steps {
            let (s, c) = (k as f64 * step).sin_cos();
            let ss: f64 = e
                .iter()
                .zip(&t)
                .map(|(&(ex, ey), &(tx, ty))| {
                    let ey = reflect * ey;
                    let (rx, ry) = (c * ex - s * ey, s * ex + c * ey);
                    (rx - tx).powi(2) + (ry - ty).powi(2)
                })
                .sum();
            best = best.min(ss);
        }
    }
    best.sqrt() / truth.n_points() as f64
}

/// Applies `x -> R x + t` to every point.
pub fn rigid_2d(ps: &PointSet, angle: f64, reflect: bool, t: (f64, f64)) -> PointSet {
    let (s, c) = angle.sin_cos();
    let coords = ps
        .points()
        .flat_map(|p| {
            let y = if reflect { -p[1] } else { p[1] };
            [c * p[0] - s * y + t.0, s * p[0] + c * y + t.1]
        })
        .collect();
    ps.with_coords(coords).unwrap()
}
