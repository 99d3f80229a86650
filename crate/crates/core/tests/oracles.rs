//! Solver results against independent brute-force oracles, and the frozen
//! values those oracles produced.

mod common;

use ballsaddle::ba::{ba_small_radius, check_best_approx, solve_best_approx};
use ballsaddle::catalog::{ba_payoff, bilinear_payoff, make_affine, make_constant, make_quadratic, vi_payoff};
use ballsaddle::check::StrictPolicy;
use ballsaddle::constants::{
    estimate_eta, estimate_gamma, estimate_lipschitz, estimate_theta, op_norm, sigma_ba, sigma_vi,
    ConstantsReport, EstimateOptions,
};
use ballsaddle::hilbert::ConvexSet;
use ballsaddle::oracle::{
    fixedpoint_vi_oracle, grid_min_affine_norm, grid_saddle_oracle, grid_vi_oracle, grid_vi_score, GridSpec,
};
use ballsaddle::saddle::{check_saddle, solve_saddle, SaddleConfig};
use ballsaddle::vi::{check_vi, small_radius, solve_vi, solve_vi_shifted};
use ballsaddle::{Matrix, Vector};
use common::*;

fn svd_norm(a: &Matrix) -> f64 {
    a.clone().svd(false, false).singular_values.max()
}

fn diag(d: &[f64]) -> Matrix {
    Matrix::from_diagonal(&v(d))
}

#[test]
fn spectral_norms_agree_with_svd() {
    let cases = [
        Matrix::identity(3, 3),
        diag(&[2.0, -3.0]),
        Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        diag(&[-1.0, 0.0]),
    ];
    let expected = [1.0, 3.0, 1.0, 1.0];
    for (a, e) in cases.iter().zip(expected) {
        let p = op_norm(a).unwrap();
        assert!((p - e).abs() < 1e-9, "{p} vs {e}");
        assert!((p - svd_norm(a)).abs() < 1e-9);
    }
    let mut g = rng(7);
    for _ in 0..20 {
        let a = uniform_matrix(&mut g, 4, 2.0);
        assert!((op_norm(&a).unwrap() - svd_norm(&a)).abs() < 1e-8);
    }
}

#[test]
fn affine_constants_match_svd() {
    let f = make_affine(diag(&[2.0, 1.0]), Vector::zeros(2), 1.0).unwrap();
    let k = f.analytic().unwrap();
    assert!((k.theta.value - 2.0).abs() < 1e-9);
    assert!((k.eta.unwrap().value - 1.0).abs() < 1e-9);
    assert!((svd_norm(&(Matrix::identity(2, 2) - diag(&[2.0, 1.0]))) - 1.0).abs() < 1e-12);
}

#[test]
fn sampled_estimators_approach_exact_constants() {
    let sq = make_quadratic(Matrix::zeros(1, 1), Vector::zeros(1), vec![diag(&[1.0])], 1.0)
        .unwrap()
        .with_analytic(None);
    let theta = estimate_theta(&sq, 1000, 0).unwrap().value;
    assert!((2.0 - 1e-3..=2.0).contains(&theta), "{theta}");
    let gamma = estimate_gamma(&sq, 1000, 0).unwrap().value;
    assert!((2.0 - 1e-3..=2.0 + 1e-12).contains(&gamma), "{gamma}");
    let lip = estimate_lipschitz(|x: &Vector| x * 2.0, 1.0, 1, 1000, 0).unwrap().value;
    assert!((2.0 - 1e-3..=2.0 + 1e-12).contains(&lip));

    let c = make_constant(v(&[3.0, -1.0]), 1.0).unwrap().with_analytic(None);
    assert!((estimate_eta(&c, 200, 0).unwrap().value - 1.0).abs() < 1e-12);
    assert_eq!(estimate_gamma(&c, 200, 0).unwrap().value, 0.0);
}

#[test]
fn sigma_values_match_grid_minimization() {
    let s = sigma_vi(&v(&[1.0, 0.0]), &diag(&[0.0, 1.0]), 5.0).unwrap();
    let (grid, _) = grid_min_affine_norm(&v(&[1.0, 0.0]), &(-diag(&[0.0, 1.0])), &ConvexSet::ball(5.0).unwrap(), 201, 4)
        .unwrap();
    assert!((s - 1.0).abs() < 1e-9 && (grid - 1.0).abs() < 1e-4);

    let unit_box = ConvexSet::boxed(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap();
    let s = sigma_ba(&v(&[-1.0, 0.0]), &Matrix::identity(2, 2), &unit_box).unwrap();
    let (grid, arg) = grid_min_affine_norm(&v(&[1.0, 0.0]), &Matrix::identity(2, 2), &unit_box, 201, 4).unwrap();
    assert!((s - 1.0).abs() < 1e-9 && (grid - 1.0).abs() < 1e-9);
    assert!(arg.norm() < 1e-9);

    let s = sigma_vi(&v(&[2.0, 0.0]), &Matrix::identity(2, 2), 1.0).unwrap();
    assert!((s - 1.0).abs() < 1e-9);
}

#[test]
fn admissible_radius_for_constant_target() {
    let f = make_constant(v(&[2.0, 0.0]), 1.0).unwrap();
    let rep = ConstantsReport::ba(&f, &ConvexSet::ball(1.0).unwrap(), EstimateOptions::default()).unwrap();
    assert_eq!((rep.eta, rep.theta, rep.gamma), (Some(1.0), 0.0, 0.0));
    assert_eq!((rep.l, rep.sigma, rep.r_max), (Some(2.0), Some(2.0), 1.0));
}

#[test]
fn bilinear_saddle_matches_exhaustive_grid() {
    let t = ConvexSet::boxed(v(&[1.0]), v(&[2.0])).unwrap();
    let p = bilinear_payoff(v(&[0.0]), diag(&[1.0]), 0.3, &t).unwrap();
    let g = grid_saddle_oracle(&p, 0.3, &t, GridSpec::new(401)).unwrap();
    assert!((g.x[0] + 0.3).abs() < 1e-12 && (g.y[0] - 1.0).abs() < 1e-12);

    let cfg = SaddleConfig::for_payoff(&p, 0.3, t, 0.0).unwrap();
    let sp = solve_saddle(&p, &cfg).unwrap();
    assert!((sp.x_star[0] + 0.3).abs() < 1e-6 && (sp.y_star[0] - 1.0).abs() < 1e-6);
    let report = check_saddle(&p, &sp, &cfg, 10_000, 0).unwrap();
    assert!(report.passed(), "{:?}", report.first_failure());

    let mut bad = sp.clone();
    bad.x_star[0] += 0.003;
    let report = check_saddle(&p, &bad, &cfg, 10_000, 0).unwrap();
    let fail = report.first_failure().expect("perturbed point must fail");
    assert!(fail.witness.is_some());
}

#[test]
fn affine_vi_matches_grid_and_fixed_point_oracles() {
    let phi = make_affine(Matrix::identity(2, 2), v(&[2.0, 0.0]), 1.0).unwrap();
    let report = ConstantsReport::vi(&phi, EstimateOptions::default()).unwrap();
    let g = GridSpec::new(201);
    let cert = solve_vi(&phi, 0.25, &report, &quick_options()).unwrap();
    assert!(cert.passed);
    let x = v(&cert.x_star);
    assert!((&x - v(&[-0.25, 0.0])).norm() < 1e-6);
    let grid = grid_vi_oracle(&phi, 0.25, g).unwrap();
    assert!((&x - &grid).norm() <= 2.0 * g.spacing(0.25));
    let fp = fixedpoint_vi_oracle(&phi, 0.25, 0.4, 1e-12).unwrap();
    assert!((&x - fp).norm() < 1e-9);
    assert!(grid_vi_score(&phi, &x, 0.25, g).unwrap() <= 0.0);

    // The second inequality is strict on a dense sweep.
    let r = check_vi(&phi, &x, 0.25, 10_000, 3, StrictPolicy::default()).unwrap();
    assert!(r.get("vi.second").unwrap().passed);
    assert!(r.get("vi.second").unwrap().worst < 0.0);
}

#[test]
fn rotated_vi_solution_fails_with_witness() {
    let phi = make_affine(Matrix::identity(2, 2), v(&[2.0, 0.0]), 1.0).unwrap();
    let a: f64 = 0.01;
    let x = v(&[-0.25 * a.cos(), 0.25 * a.sin()]);
    let r = check_vi(&phi, &x, 0.25, 10_000, 0, StrictPolicy::default()).unwrap();
    let fail = r.first_failure().expect("rotated point must fail");
    assert!(fail.witness.is_some());
}

#[test]
fn antipodal_candidates_cannot_both_score() {
    let g = GridSpec::new(101);
    let mut rg = rng(11);
    for _ in 0..10 {
        let c = vector_with_norm(&mut rg, 2, 0.5, 3.0);
        let phi = make_constant(c, 1.0).unwrap();
        let x = vector_with_norm(&mut rg, 2, 0.5, 0.5);
        let s1 = grid_vi_score(&phi, &x, 0.5, g).unwrap();
        let s2 = grid_vi_score(&phi, &(-&x), 0.5, g).unwrap();
        assert!(!(s1 < 0.0 && s2 < 0.0));
    }
}

#[test]
fn shifted_norm_square_solution() {
    let psi = norm_squared_map();
    let est = EstimateOptions::default();
    let (cert, report, cond) = solve_vi_shifted(&psi, &v(&[16.0, 0.0]), 1.0, &quick_options(), est).unwrap();
    assert!(cert.passed, "{:?}", cert.checks.first_failure());
    assert_eq!((cond.theta1, cond.gamma1, cond.m1), (2.0, 2.0, 8.0));
    let x = v(&cert.x_star);
    assert!((&x - v(&[1.0, 0.0])).norm() < 1e-6);
    let phi = psi.shifted(&v(&[16.0, 0.0])).unwrap();
    let fp = fixedpoint_vi_oracle(&phi, 1.0, 0.05, 1e-12).unwrap();
    assert!((&x - fp).norm() < 1e-8);
    assert!(report.r_max > 0.0);

    // The coordinatewise-square variant has the same solution.
    let q = vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])];
    let coord = make_quadratic(Matrix::zeros(2, 2), v(&[-16.0, 0.0]), q, 1.0).unwrap();
    let fp = fixedpoint_vi_oracle(&coord, 1.0, 0.05, 1e-12).unwrap();
    assert!((fp - v(&[1.0, 0.0])).norm() < 1e-8);
}

#[test]
fn small_radius_bounds() {
    for rho in [1.0, 2.0] {
        let f = make_affine(Matrix::identity(2, 2), v(&[2.0, 0.0]), rho).unwrap();
        let est = EstimateOptions::default();
        let a = small_radius(&f, 0.5, est).unwrap();
        let b = ba_small_radius(&f, 0.5, est).unwrap();
        assert!((a.r_star - 1.0).abs() < 1e-12 && (b.r_star - 1.0).abs() < 1e-12);
        // ‖(2,0) − y‖ ≥ 1 on the unit ball.
        let (grid, _) =
            grid_min_affine_norm(&v(&[2.0, 0.0]), &(-Matrix::identity(2, 2)), &ConvexSet::ball(1.0).unwrap(), 201, 0)
                .unwrap();
        assert!(grid >= 1.0 - 1e-12);
    }
}

#[test]
fn best_approx_matches_grid_saddle() {
    let f = make_affine(Matrix::identity(2, 2), v(&[2.0, 0.0]), 1.0).unwrap();
    let ball = ConvexSet::ball(1.0).unwrap();
    let report = ConstantsReport::ba(&f, &ball, EstimateOptions::default()).unwrap();
    assert_eq!((report.l, report.sigma, report.r_max), (Some(2.0), Some(1.0), 0.5));
    let cert = solve_best_approx(&f, 0.5, &report, &quick_options()).unwrap();
    assert!(cert.passed);
    let p = ba_payoff(&f, &ball).unwrap();
    let g = GridSpec::new(201).with_y_points(41);
    let grid = grid_saddle_oracle(&p, 0.5, &ConvexSet::ball(0.5).unwrap(), g).unwrap();
    assert!((v(&cert.x_star) - grid.x).norm() <= 2.0 * g.spacing(0.5));

    let a: f64 = 0.05;
    let bad = v(&[0.5 * a.cos(), 0.5 * a.sin()]);
    let c = check_best_approx(&f, &bad, 0.5, 10_000, 0, StrictPolicy::default()).unwrap();
    assert!(!c.passed && c.witness.is_some());
}

#[test]
fn quadratic_prox_pair_matches_grid_saddle() {
    let q = vec![diag(&[0.1, 0.0]), Matrix::from_row_slice(2, 2, &[0.0, 0.05, 0.05, 0.0])];
    let f = make_quadratic(diag(&[0.2, 0.1]), v(&[1.5, -0.5]), q, 1.0).unwrap();
    let ball = ConvexSet::ball(1.0).unwrap();
    let report = ConstantsReport::ba(&f, &ball, EstimateOptions::default()).unwrap();
    let r = report.r_max;
    let cert = ballsaddle::ba::solve_prox_pair(&f, &ball, &ball, r, &report, &quick_options()).unwrap();
    assert!(cert.passed, "{:?}", cert.checks.first_failure());
    let p = ba_payoff(&f, &ball).unwrap();
    let g = GridSpec::new(201).with_y_points(61);
    let grid = grid_saddle_oracle(&p, r, &ball, g).unwrap();
    assert!((v(&cert.x_star) - &grid.x).norm() <= 2.0 * g.spacing(r), "{:?} vs {}", cert.x_star, grid.x);
}

#[test]
fn oracles_are_deterministic() {
    let phi = random_quadratic(5, 2);
    let g = GridSpec::new(101);
    assert_eq!(grid_vi_oracle(&phi, 0.2, g).unwrap(), grid_vi_oracle(&phi, 0.2, g).unwrap());
    let p = vi_payoff(&phi).unwrap();
    let t = ConvexSet::ball(0.2).unwrap();
    let g = GridSpec::new(51);
    assert_eq!(
        grid_saddle_oracle(&p, 0.2, &t, g).unwrap(),
        grid_saddle_oracle(&p, 0.2, &t, g).unwrap()
    );
}
