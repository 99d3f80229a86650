//! Brute-force oracles for low dimensions.
//!
//! Deliberately naive and independent of the solvers: exhaustive grids with
//! index-order tie-breaking, a plain projected fixed-point iteration, and a
//! multi-start agreement probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{Payoff, SmoothMap};
use crate::error::{Error, Result};
use crate::hilbert::{project_ball_unchecked, ConvexSet, Vector};

const MAX_GRID: usize = 10_000_000;
const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    /// Resolution of the `y` grid in [`grid_saddle_oracle`]; defaults to
    /// `points_per_axis`.
    pub y_points_per_axis: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points_per_axis: 201,
            y_points_per_axis: None,
        }
    }
}

impl GridSpec {
    pub fn new(points_per_axis: usize) -> Self {
        GridSpec {
            points_per_axis,
            y_points_per_axis: None,
        }
    }

    pub fn with_y_points(mut self, y_points_per_axis: usize) -> Self {
        self.y_points_per_axis = Some(y_points_per_axis);
        self
    }

    /// Spacing of the `x` grid on `[−r, r]`.
    pub fn spacing(&self, r: f64) -> f64 {
        2.0 * r / (self.points_per_axis - 1) as f64
    }

    fn check(points: usize, n: usize) -> Result<()> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::invalid(format!("grid oracles need 1 ≤ n ≤ {MAX_DIM}, got {n}")));
        }
        if points < 2 {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        match points.checked_pow(n as u32) {
            Some(total) if total <= MAX_GRID => Ok(()),
            _ => Err(Error::invalid(format!(
                "grid too large: {points}^{n} exceeds {MAX_GRID} points"
            ))),
        }
    }
}

/// All points of the axis grid `Π [lo_i, hi_i]` in lexicographic index order.
fn box_grid(lo: &[f64], hi: &[f64], points: usize) -> Vec<Vector> {
    let n = lo.len();
    let total = points.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    let coord = |i: usize, k: usize| {
        if points == 1 {
            lo[i]
        } else {
            lo[i] + (hi[i] - lo[i]) * k as f64 / (points - 1) as f64
        }
    };
    for idx in 0..total {
        let mut rem = idx;
        let mut v = Vector::zeros(n);
        for i in (0..n).rev() {
            v[i] = coord(i, rem % points);
            rem /= points;
        }
        out.push(v);
    }
    out
}

/// Grid points of `B_r`, each followed by its normalization onto `S_r` when it
/// lies within one spacing of the sphere. The second vector holds the
/// indices of the sphere candidates within the first.
fn ball_grid(n: usize, r: f64, points: usize) -> (Vec<Vector>, Vec<usize>) {
    let h = 2.0 * r / (points - 1) as f64;
    let lo = vec![-r; n];
    let hi = vec![r; n];
    let mut pts = Vec::new();
    let mut sphere = Vec::new();
    for p in box_grid(&lo, &hi, points) {
        let norm = p.norm();
        if norm <= r * (1.0 + 1e-12) {
            pts.push(p.clone());
        }
        if (norm - r).abs() <= h && norm > 0.0 {
            sphere.push(pts.len());
            pts.push(p * (r / norm));
        }
    }
    (pts, sphere)
}

/// Grid points of a convex set: the ball grid, the box grid, or the
/// projection of the bounding-box grid for oracle sets.
fn set_grid(set: &ConvexSet, n: usize, points: usize) -> Result<Vec<Vector>> {
    match set {
        ConvexSet::Ball(b) => Ok(ball_grid(n, b.radius(), points).0),
        ConvexSet::Box { lower, upper } => Ok(box_grid(lower.as_slice(), upper.as_slice(), points)),
        ConvexSet::Oracle(_) => {
            let bound = set
                .sup_norm()
                .ok_or_else(|| Error::invalid("grid over an oracle set needs a norm bound"))?;
            box_grid(&vec![-bound; n], &vec![bound; n], points)
                .iter()
                .map(|z| set.project(z))
                .collect()
        }
    }
}

/// Index of the smallest score, first index on ties. NaN scores never win.
fn argmin(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        match best {
            Some(b) if scores[b] <= *s => {}
            _ => best = Some(i),
        }
    }
    best
}

fn argmax_by<F: Fn(&Vector) -> f64>(pts: &[Vector], f: F) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let v = f(p);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSaddle {
    pub x: Vector,
    pub y: Vector,
    pub value: f64,
}

/// `x̂ = argmin_x max_y J(x, y)` over grids of `B_r` and `T`, with `ŷ` the
/// maximizer of the inner problem at `x̂`.
pub fn grid_saddle_oracle(payoff: &Payoff, r: f64, t_set: &ConvexSet, g: GridSpec) -> Result<GridSaddle> {
    let n = payoff.dimension();
    let py = g.y_points_per_axis.unwrap_or(g.points_per_axis);
    GridSpec::check(g.points_per_axis, n)?;
    GridSpec::check(py, n)?;
    if !(r > 0.0 && r <= payoff.x_radius() * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("r must lie in (0, {}]", payoff.x_radius())));
    }
    t_set.check_dimension(n)?;
    let xs = ball_grid(n, r, g.points_per_axis).0;
    let ys = set_grid(t_set, n, py)?;
    let inner: Vec<f64> = xs
        .par_iter()
        .map(|x| {
            let j = payoff.section(x);
            argmax_by(&ys, |y| j(y)).1
        })
        .collect();
    let i = argmin(&inner).ok_or_else(|| Error::invalid("payoff is NaN on the whole grid"))?;
    let j = payoff.section(&xs[i]);
    let (k, value) = argmax_by(&ys, |y| j(y));
    Ok(GridSaddle {
        x: xs[i].clone(),
        y: ys[k].clone(),
        value,
    })
}

/// Violation score of a VI candidate against a sample set:
/// `max_x max{⟨Φ(x̂), x̂ − x⟩, ⟨Φ(x), x̂ − x⟩}` over `x ≠ x̂`.
fn vi_score(cand: &Vector, phi_cand: &Vector, xs: &[Vector], phis: &[Vector]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (x, px) in xs.iter().zip(phis) {
        let d = cand - x;
        if d.norm_squared() == 0.0 {
            continue;
        }
        let v = phi_cand.dot(&d).max(px.dot(&d));
        if v > worst {
            worst = v;
        }
    }
    worst
}

/// The sphere candidate with the smallest VI violation score against every
/// grid point of `B_r`.
pub fn grid_vi_oracle(phi: &SmoothMap, r: f64, g: GridSpec) -> Result<Vector> {
    let n = phi.dimension();
    GridSpec::check(g.points_per_axis, n)?;
    if !(r > 0.0 && r <= phi.rho() * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("r must lie in (0, {}]", phi.rho())));
    }
    let (xs, sphere) = ball_grid(n, r, g.points_per_axis);
    let phis: Vec<Vector> = xs.par_iter().map(|x| phi.value(x)).collect();
    let scores: Vec<f64> = sphere
        .par_iter()
        .map(|&i| vi_score(&xs[i], &phis[i], &xs, &phis))
        .collect();
    let best = argmin(&scores).ok_or_else(|| Error::invalid("no finite VI score on the grid"))?;
    Ok(xs[sphere[best]].clone())
}

/// VI violation score of `cand` against the grid of `B_r`; negative means the
/// candidate satisfies both strict inequalities at every grid point.
pub fn grid_vi_score(phi: &SmoothMap, cand: &Vector, r: f64, g: GridSpec) -> Result<f64> {
    let n = phi.dimension();
    GridSpec::check(g.points_per_axis, n)?;
    let (xs, _) = ball_grid(n, r, g.points_per_axis);
    let phis: Vec<Vector> = xs.iter().map(|x| phi.value(x)).collect();
    Ok(vi_score(cand, &phi.value(cand), &xs, &phis))
}

/// Projected fixed-point iteration `x ← P_{B_r}(x − τΦ(x))` from `x = 0`.
pub fn fixedpoint_vi_oracle(phi: &SmoothMap, r: f64, tau: f64, tol: f64) -> Result<Vector> {
    const MAX_ITERS: usize = 1_000_000;
    if !(tau > 0.0 && tol > 0.0 && r > 0.0) {
        return Err(Error::invalid("tau, tol and r must be positive"));
    }
    let mut x = Vector::zeros(phi.dimension());
    let mut step = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let next = project_ball_unchecked(&(&x - phi.value(&x) * tau), r);
        step = (&next - &x).norm();
        x = next;
        if step <= tol {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        what: "projected fixed-point iteration",
        iterations: MAX_ITERS,
        residual: step,
    })
}

/// Minimum of `‖b + My‖` over `y ∈ set` by grid search, refined by
/// repeatedly re-gridding a window of two spacings around the incumbent.
/// Returns `(value, argmin)`.
pub fn grid_min_affine_norm(
    b: &Vector,
    m: &crate::hilbert::Matrix,
    set: &ConvexSet,
    points: usize,
    levels: usize,
) -> Result<(f64, Vector)> {
    let n = m.ncols();
    GridSpec::check(points, n)?;
    set.check_dimension(n)?;
    let eval = |y: &Vector| (b + m * y).norm();
    let mut pts = set_grid(set, n, points)?;
    let mut h = match set {
        ConvexSet::Box { lower, upper } => (upper - lower).max() / (points - 1) as f64,
        _ => 2.0 * set.sup_norm().unwrap_or(1.0) / (points - 1) as f64,
    };
    let mut best = Vector::zeros(n);
    let mut best_val = f64::INFINITY;
    for _ in 0..=levels {
        let vals: Vec<f64> = pts.par_iter().map(eval).collect();
        if let Some(i) = argmin(&vals) {
            if vals[i] < best_val {
                best_val = vals[i];
                best = pts[i].clone();
            }
        }
        let lo: Vec<f64> = best.iter().map(|c| c - 2.0 * h).collect();
        let hi: Vec<f64> = best.iter().map(|c| c + 2.0 * h).collect();
        pts = box_grid(&lo, &hi, points.min(41))
            .iter()
            .map(|z| set.project(z))
            .collect::<Result<_>>()?;
        h = 4.0 * h / (points.min(41) - 1) as f64;
    }
    Ok((best_val, best))
}

/// Runs `solver(seed)` for `starts` consecutive seeds from `seed` and returns
/// the largest pairwise distance of the results.
pub fn uniqueness_probe<F>(solver: F, starts: usize, seed: u64) -> Result<f64>
where
    F: Fn(u64) -> Result<Vector> + Sync,
{
    if starts < 2 {
        return Err(Error::invalid("uniqueness probe needs at least 2 starts"));
    }
    let seeds: Vec<u64> = (0..starts as u64).map(|i| seed.wrapping_add(i)).collect();
    probe_with_seeds(solver, &seeds)
}

/// [`uniqueness_probe`] over an explicit seed list.
pub fn probe_with_seeds<F>(solver: F, seeds: &[u64]) -> Result<f64>
where
    F: Fn(u64) -> Result<Vector> + Sync,
{
    let sols: Vec<Vector> = seeds
        .par_iter()
        .map(|&s| solver(s))
        .collect::<Result<_>>()?;
    Ok(max_pairwise(&sols))
}

pub fn max_pairwise(points: &[Vector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            worst = worst.max((a - b).norm());
        }
    }
    worst
}
