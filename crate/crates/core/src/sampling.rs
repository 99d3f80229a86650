//! Deterministic sample generation: Halton points in a ball for constant
//! estimation, and seeded pseudo-random draws for the sampled checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::hilbert::{ConvexSet, Vector};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut k = 2u64;
    while out.len() < count {
        if out.iter().take_while(|p| *p * *p <= k).all(|p| k % p != 0) {
            out.push(k);
        }
        k += 1;
    }
    out
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    acc
}

/// The structured points `{0, ±ρe_i}`.
pub(crate) fn structured_ball_points(n: usize, rho: f64) -> Vec<Vector> {
    let mut pts = vec![Vector::zeros(n)];
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = Vector::zeros(n);
            e[i] = s * rho;
            pts.push(e);
        }
    }
    pts
}

/// `count` Halton points mapped into `B_ρ`, starting after index `seed`.
///
/// Coordinates `0..n` give a direction, coordinate `n` the radius via
/// `ρ·u^{1/n}`. The sequence for a larger `count` extends the smaller one.
pub(crate) fn halton_ball(n: usize, rho: f64, count: usize, seed: u64) -> Vec<Vector> {
    let bases = primes(n + 1);
    let mut out = Vec::with_capacity(count);
    let mut index = seed.wrapping_add(1);
    while out.len() < count {
        let dir = Vector::from_fn(n, |i, _| 2.0 * radical_inverse(index, bases[i]) - 1.0);
        let u = radical_inverse(index, bases[n]);
        index = index.wrapping_add(1);
        let norm = dir.norm();
        if norm < 1e-12 {
            continue;
        }
        out.push(dir * (rho * u.powf(1.0 / n as f64) / norm));
    }
    out
}

pub(crate) fn unit_direction<R: Rng>(rng: &mut R, n: usize) -> Vector {
    loop {
        let g = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

pub(crate) fn uniform_sphere<R: Rng>(rng: &mut R, n: usize, r: f64) -> Vector {
    unit_direction(rng, n) * r
}

pub(crate) fn uniform_ball<R: Rng>(rng: &mut R, n: usize, r: f64) -> Vector {
    let u: f64 = rng.random();
    unit_direction(rng, n) * (r * u.powf(1.0 / n as f64))
}

/// A random point of `set`: uniform for balls and boxes, the projection of a
/// uniform point of the bounding ball for oracle sets.
pub(crate) fn sample_set<R: Rng>(rng: &mut R, set: &ConvexSet, n: usize) -> Result<Vector> {
    match set {
        ConvexSet::Ball(b) => Ok(uniform_ball(rng, n, b.radius())),
        ConvexSet::Box { lower, upper } => Ok(Vector::from_fn(n, |i, _| {
            lower[i] + (upper[i] - lower[i]) * rng.random::<f64>()
        })),
        ConvexSet::Oracle(_) => {
            let bound = set.sup_norm().unwrap_or(1.0);
            let z = uniform_ball(rng, n, 1.5 * bound);
            set.project(&z)
        }
    }
}

/// Extreme points of `set` along the coordinate axes: `P(±R e_i)` for a large
/// `R`.
pub(crate) fn axis_extremes(set: &ConvexSet, n: usize) -> Result<Vec<Vector>> {
    let big = 1e3 * set.sup_norm().unwrap_or(1.0).max(1.0);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = Vector::zeros(n);
            e[i] = s * big;
            out.push(set.project(&e)?);
        }
    }
    Ok(out)
}

/// `x` rotated by `angle` toward `e` inside the plane spanned by `x` and
/// `e`, keeping its norm. `None` when `e` is parallel to `x` or `x = 0`.
pub(crate) fn rotate_toward(x: &Vector, e: &Vector, angle: f64) -> Option<Vector> {
    let r = x.norm();
    if r < 1e-300 {
        return None;
    }
    let xh = x / r;
    let u = e - &xh * xh.dot(e);
    let un = u.norm();
    if un < 1e-12 {
        return None;
    }
    Some((xh * angle.cos() + u * (angle.sin() / un)) * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes_are_primes() {
        assert_eq!(primes(6), vec![2, 3, 5, 7, 11, 13]);
    }

    #[test]
    fn radical_inverse_base2() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn halton_points_lie_in_ball_and_extend() {
        let short = halton_ball(3, 2.0, 50, 7);
        let long = halton_ball(3, 2.0, 200, 7);
        assert_eq!(&long[..50], &short[..]);
        assert!(long.iter().all(|p| p.norm() <= 2.0 + 1e-12));
    }

    #[test]
    fn rotation_keeps_norm_and_angle() {
        let x = Vector::from_column_slice(&[2.0, 0.0, 0.0]);
        let e = Vector::from_column_slice(&[0.0, 1.0, 0.0]);
        let y = rotate_toward(&x, &e, 0.01).unwrap();
        assert!((y.norm() - 2.0).abs() < 1e-14);
        assert!((x.dot(&y) / 4.0 - 0.01f64.cos()).abs() < 1e-14);
        assert!(rotate_toward(&x, &x, 0.1).is_none());
    }

    #[test]
    fn uniform_ball_stays_inside() {
        let mut r = rng(3);
        for _ in 0..1000 {
            assert!(uniform_ball(&mut r, 5, 0.3).norm() <= 0.3 + 1e-15);
            assert!((uniform_sphere(&mut r, 5, 0.3).norm() - 0.3).abs() < 1e-14);
        }
    }
}
