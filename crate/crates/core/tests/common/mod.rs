#![allow(dead_code)]

use ballsaddle::catalog::{make_affine, make_constant, make_quadratic, SmoothMap};
use ballsaddle::saddle::SolveOptions;
use ballsaddle::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
    Matrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale))
}

/// Random vector with norm in `[lo, hi]`.
pub fn vector_with_norm(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    let mut d = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    while d.norm() < 1e-3 {
        d = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    }
    d.normalize() * rng.random_range(lo..=hi)
}

/// `Φ(x) = Ax + b` on `B_1` with `‖A‖ ≤ 0.5·n` and `‖b‖ ≥ 1.5`, so `σ > 0`.
pub fn random_affine(seed: u64, n: usize) -> SmoothMap {
    let mut g = rng(seed);
    let a = uniform_matrix(&mut g, n, 0.5 / n as f64);
    let b = vector_with_norm(&mut g, n, 1.5, 3.0);
    make_affine(a, b, 1.0).unwrap()
}

/// A quadratic map with small curvature and a dominant offset.
pub fn random_quadratic(seed: u64, n: usize) -> SmoothMap {
    let mut g = rng(seed);
    let a = uniform_matrix(&mut g, n, 0.3 / n as f64);
    let b = vector_with_norm(&mut g, n, 1.5, 3.0);
    let q = (0..n)
        .map(|_| {
            let m = uniform_matrix(&mut g, n, 0.2 / n as f64);
            (&m + m.transpose()) * 0.5
        })
        .collect();
    make_quadratic(a, b, q, 1.0).unwrap()
}

pub fn random_constant(seed: u64, n: usize) -> SmoothMap {
    let mut g = rng(seed);
    make_constant(vector_with_norm(&mut g, n, 0.5, 3.0), 1.0).unwrap()
}

/// Catalog problem `k`: cycles through constant, affine and quadratic maps
/// in dimensions 1 to 3.
pub fn catalog_map(k: u64) -> SmoothMap {
    let n = 1 + (k as usize % 3);
    match k % 3 {
        0 => random_constant(1000 + k, n),
        1 => random_affine(2000 + k, n),
        _ => random_quadratic(3000 + k, n),
    }
}

pub fn quick_options() -> SolveOptions {
    SolveOptions {
        samples: 2000,
        starts: 4,
        ..SolveOptions::default()
    }
}

/// `Ψ(x) = (‖x‖², 0)` on `B_1`.
pub fn norm_squared_map() -> SmoothMap {
    let q = vec![Matrix::identity(2, 2), Matrix::zeros(2, 2)];
    make_quadratic(Matrix::zeros(2, 2), Vector::zeros(2), q, 1.0).unwrap()
}
