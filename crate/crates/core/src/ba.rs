//! Proximity pairs and best approximation on small balls.
//!
//! With `J(x, y) = ‖f(x) − x‖² − ‖f(x) − y‖²` on `B_ρ × Y`, `T ⊆ Y` closed
//! convex and `r ≤ min{ρ, σ/L}`, the saddle point `(x*, y*)` on `B_r × T` has
//! `x* ∈ S_r`, `y* = P_T(f(x*))` and, for every `x ∈ B_r \ {x*}`,
//!
//! `‖x* − f(x*)‖² + ‖f(x) − y*‖² − ‖x − f(x)‖² < ‖f(x*) − y*‖²`.
//!
//! With `Y = B_ρ` and `T = B_r` the pair collapses to `y* = x*`, the best
//! approximation of `f(x*)` in `B_r`, and `‖f(x) − x*‖ < ‖f(x) − x‖` for all
//! other `x`.

use serde::{Deserialize, Serialize};

use crate::catalog::{ba_payoff, Bound, Certification, Payoff, SmoothMap};
use crate::check::{sweep, CheckOutcome, CheckReport, RunMode, StrictPolicy};
use crate::constants::{ConstantsReport, EstimateOptions, ZERO_TOL};
use crate::error::{Error, Result};
use crate::hilbert::{dist_ball, dist_set, ConvexSet, Vector};
use crate::saddle::{check_saddle, solve_saddle, x_samples, Residuals, SaddleConfig, SaddlePoint, SolveOptions};
use crate::sampling;
use crate::vi::{probe, radius_bound, rotated_candidates, Uniqueness, GAP_TOL, PROBE_TOL};

const SUBSET_SAMPLES: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaCertificate {
    pub r: f64,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    /// `|‖f(x*) − y*‖ − dist(f(x*), T)|`.
    pub dist_gap: f64,
    /// Smallest sampled slack of the strict proximity inequality.
    pub proximity_margin: f64,
    /// `‖y* − x*‖`, best-approximation runs only.
    pub collapse_gap: Option<f64>,
    /// `|‖f(x*) − x*‖ − dist(f(x*), B_r)|`, best-approximation runs only.
    pub projection_gap: Option<f64>,
    /// Largest sampled `‖f(x) − x*‖ − ‖f(x) − x‖`, best-approximation runs only.
    pub strict_approx_worst: Option<f64>,
    pub uniqueness: Option<Uniqueness>,
    pub mode: RunMode,
    pub passed: bool,
    pub residuals: Residuals,
    pub checks: CheckReport,
}

/// `sup_{t∈T} dist(t, Y)` over axis extremes and seeded samples of `T`.
pub(crate) fn subset_gap(t_set: &ConvexSet, y_set: &ConvexSet, n: usize, seed: u64) -> Result<f64> {
    let mut pts = sampling::axis_extremes(t_set, n)?;
    let mut rng = sampling::rng(seed);
    for _ in 0..SUBSET_SAMPLES {
        pts.push(sampling::sample_set(&mut rng, t_set, n)?);
    }
    let mut worst: f64 = 0.0;
    for p in &pts {
        worst = worst.max(dist_set(p, y_set)?);
    }
    Ok(worst)
}

pub(crate) fn check_subset(t_set: &ConvexSet, y_set: &ConvexSet, n: usize, seed: u64) -> Result<()> {
    let gap = subset_gap(t_set, y_set, n, seed)?;
    if gap > 1e-9 {
        return Err(Error::hypothesis(format!(
            "T must be contained in Y: a sampled point of T lies {gap:e} outside Y"
        )));
    }
    Ok(())
}

/// The regularized saddle problem behind a proximity pair:
/// `J = ‖f(x) − x‖² − ‖f(x) − y‖²` on `B_r × T` with the report's `L`.
pub(crate) fn ba_problem(
    f: &SmoothMap,
    y_set: &ConvexSet,
    t_set: &ConvexSet,
    r: f64,
    report: &ConstantsReport,
    opts: &SolveOptions,
) -> Result<(Payoff, SaddleConfig)> {
    let n = f.dimension();
    y_set.check_dimension(n)?;
    t_set.check_dimension(n)?;
    let sigma = report
        .sigma
        .ok_or_else(|| Error::invalid("constants report has no sigma"))?;
    if !(sigma > ZERO_TOL) {
        return Err(Error::hypothesis(format!("sigma > 0 violated: sigma = {sigma:e}")));
    }
    let l = report
        .l
        .ok_or_else(|| Error::invalid("constants report has no L"))?;
    if !(r > 0.0 && r <= f.rho() * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("r must lie in (0, rho = {}], got {r}", f.rho())));
    }
    check_subset(t_set, y_set, n, opts.seed)?;
    let l_cert = report.certified.get("L").copied().unwrap_or(Certification::SampledLowerBound);
    let payoff = ba_payoff(&report.attach(f), y_set)?.with_grad_lipschitz(Some(Bound {
        value: l,
        certification: l_cert,
    }));
    let cfg = opts.saddle_config(&payoff, r, t_set.clone(), l, Some(report.r_max))?;
    Ok((payoff, cfg))
}

pub(crate) struct PairChecks {
    pub checks: CheckReport,
    pub dist_gap: f64,
    pub proximity_margin: f64,
}

/// Checks of a proximity pair that do not require solving again.
pub(crate) fn pair_checks(
    f: &SmoothMap,
    payoff: &Payoff,
    cfg: &SaddleConfig,
    sp: &SaddlePoint,
    opts: &SolveOptions,
) -> Result<PairChecks> {
    let mut checks = check_saddle(payoff, sp, cfg, opts.samples, opts.seed)?;
    let (xs, ys) = (&sp.x_star, &sp.y_star);
    let r = cfg.r;
    let fx_star = f.value(xs);
    let dist_gap = ((&fx_star - ys).norm() - dist_set(&fx_star, &cfg.t_set)?).abs();
    checks.push(CheckOutcome::scalar("ba.dist_gap", dist_gap, GAP_TOL));

    let base = (xs - &fx_star).norm_squared() - (&fx_star - ys).norm_squared();
    let grad = xs * cfg.regularization + payoff.grad_x(xs, ys);
    let samples = x_samples(xs, Some(&grad), cfg.step, &[fx_star.clone()], r, opts.samples, opts.seed);
    let excl = cfg.exclusion_radius();
    let proximity = sweep("ba.proximity", &samples, -opts.strict_margin, |x| {
        if (x - xs).norm() <= excl {
            return None;
        }
        let fx = f.value(x);
        Some(base + (&fx - ys).norm_squared() - (x - &fx).norm_squared())
    });
    let proximity_margin = -proximity.worst;
    checks.push(proximity);
    Ok(PairChecks {
        checks,
        dist_gap,
        proximity_margin,
    })
}

/// Proximity pair `(x*, y*) ∈ S_r × T` for `f` with target superset `Y`.
pub fn solve_prox_pair(
    f: &SmoothMap,
    y_set: &ConvexSet,
    t_set: &ConvexSet,
    r: f64,
    report: &ConstantsReport,
    opts: &SolveOptions,
) -> Result<BaCertificate> {
    let (payoff, cfg) = ba_problem(f, y_set, t_set, r, report, opts)?;
    let mode = opts.run_mode(report.is_certified(), r, report.r_max)?;
    let sp = solve_saddle(&payoff, &cfg)?;
    let pc = pair_checks(f, &payoff, &cfg, &sp, opts)?;
    Ok(BaCertificate {
        r,
        x_star: sp.x_star.iter().copied().collect(),
        y_star: sp.y_star.iter().copied().collect(),
        dist_gap: pc.dist_gap,
        proximity_margin: pc.proximity_margin,
        collapse_gap: None,
        projection_gap: None,
        strict_approx_worst: None,
        uniqueness: None,
        mode,
        passed: pc.checks.passed(),
        residuals: Residuals::from(&sp),
        checks: pc.checks,
    })
}

pub(crate) struct BestChecks {
    pub collapse_gap: f64,
    pub projection_gap: f64,
    pub strict_approx_worst: f64,
}

/// Collapse, projection identity, strict approximation inequality and the
/// refutation of other candidates, appended to `checks`.
pub(crate) fn best_checks(
    f: &SmoothMap,
    r: f64,
    sp: &SaddlePoint,
    opts: &SolveOptions,
    checks: &mut CheckReport,
) -> Result<BestChecks> {
    let (xs, ys) = (&sp.x_star, &sp.y_star);
    let collapse_gap = (ys - xs).norm();
    checks.push(CheckOutcome::scalar("ba.collapse", collapse_gap, GAP_TOL));
    let fx_star = f.value(xs);
    let projection_gap = ((&fx_star - xs).norm() - dist_ball(&fx_star, r)?).abs();
    checks.push(CheckOutcome::scalar("ba.projection", projection_gap, GAP_TOL));
    let strict_approx = check_best_approx(f, xs, r, opts.samples, opts.seed, opts.policy())?;
    let strict_approx_worst = strict_approx.worst;
    checks.push(strict_approx);

    // Any other candidate x₀ would need ‖f(x*) − x₀‖ < ‖f(x*) − x*‖; x* itself
    // refutes it.
    let mut cands = rotated_candidates(xs);
    cands.push(xs * 0.5);
    cands.push(Vector::zeros(xs.len()));
    let own = (&fx_star - xs).norm();
    checks.push(sweep("ba.uniqueness_witness", &cands, 1e-12, |c| Some(own - (&fx_star - c).norm())));
    Ok(BestChecks {
        collapse_gap,
        projection_gap,
        strict_approx_worst,
    })
}

/// Sampled check of `‖f(x) − x*‖ < ‖f(x) − x‖` on `B_r` outside the exclusion
/// ball.
pub fn check_best_approx(
    f: &SmoothMap,
    x_star: &Vector,
    r: f64,
    n_samples: usize,
    seed: u64,
    policy: StrictPolicy,
) -> Result<CheckOutcome> {
    if x_star.len() != f.dimension() {
        return Err(Error::DimensionMismatch {
            expected: f.dimension(),
            found: x_star.len(),
        });
    }
    let fx_star = f.value(x_star);
    let samples = x_samples(x_star, Some(&(x_star - &fx_star)), 0.1 * r, &[fx_star], r, n_samples, seed);
    let excl = policy.exclusion * r;
    Ok(sweep("ba.strict_approx", &samples, -policy.strict_margin, |x| {
        if (x - x_star).norm() <= excl {
            return None;
        }
        let fx = f.value(x);
        Some((&fx - x_star).norm() - (&fx - x).norm())
    }))
}

/// The unique best-approximation point `x* ∈ S_r`: `Y = B_ρ`, `T = B_r`.
pub fn solve_best_approx(f: &SmoothMap, r: f64, report: &ConstantsReport, opts: &SolveOptions) -> Result<BaCertificate> {
    let (payoff, cfg) = ba_problem(f, &ConvexSet::ball(f.rho())?, &ConvexSet::ball(r)?, r, report, opts)?;
    let mode = opts.run_mode(report.is_certified(), r, report.r_max)?;
    let sp = solve_saddle(&payoff, &cfg)?;
    let PairChecks {
        mut checks,
        dist_gap,
        proximity_margin,
    } = pair_checks(f, &payoff, &cfg, &sp, opts)?;
    let best = best_checks(f, r, &sp, opts, &mut checks)?;
    let uniqueness = probe(&payoff, &cfg, opts)?;
    if let Some(u) = uniqueness {
        checks.push(CheckOutcome::scalar("ba.uniqueness", u.max_pairwise, PROBE_TOL));
    }
    Ok(BaCertificate {
        r,
        x_star: sp.x_star.iter().copied().collect(),
        y_star: sp.y_star.iter().copied().collect(),
        dist_gap,
        proximity_margin,
        collapse_gap: Some(best.collapse_gap),
        projection_gap: Some(best.projection_gap),
        strict_approx_worst: Some(best.strict_approx_worst),
        uniqueness,
        mode,
        passed: checks.passed(),
        residuals: Residuals::from(&sp),
        checks,
    })
}

/// Small-radius existence for best approximation: `r*` and the constants of
/// `f` on `B_{r*}` with `Y = B_{r*}`.
pub fn ba_small_radius(f: &SmoothMap, epsilon: f64, est: EstimateOptions) -> Result<crate::vi::SmallRadius> {
    let r_star = radius_bound(f, epsilon)?;
    let restricted = f.restrict(r_star)?;
    let report = ConstantsReport::ba(&restricted, &ConvexSet::ball(r_star)?, est)?;
    Ok(crate::vi::SmallRadius {
        r_star,
        map: restricted,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_affine, make_constant};
    use crate::hilbert::Matrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn quick() -> SolveOptions {
        SolveOptions {
            samples: 2000,
            starts: 4,
            ..SolveOptions::default()
        }
    }

    #[test]
    fn constant_target_pair() {
        let f = make_constant(v(&[2.0, 0.0]), 1.0).unwrap();
        let y = ConvexSet::ball(1.0).unwrap();
        let rep = ConstantsReport::ba(&f, &y, EstimateOptions::default()).unwrap();
        assert_eq!(rep.l, Some(2.0));
        assert_eq!(rep.r_max, 1.0);
        let t = ConvexSet::ball(0.5).unwrap();
        let cert = solve_prox_pair(&f, &y, &t, 0.5, &rep, &quick()).unwrap();
        assert!(cert.passed, "{:#?}", cert.checks.first_failure());
        assert!((v(&cert.x_star) - v(&[0.5, 0.0])).norm() < 1e-6);
        assert!((v(&cert.y_star) - v(&[0.5, 0.0])).norm() < 1e-6);

        let bx = ConvexSet::boxed(v(&[-0.1, -0.1]), v(&[0.1, 0.1])).unwrap();
        let cert = solve_prox_pair(&f, &y, &bx, 0.5, &rep, &quick()).unwrap();
        assert!(cert.passed, "{:#?}", cert.checks.first_failure());
        assert!((v(&cert.y_star) - v(&[0.1, 0.0])).norm() < 1e-6);
    }

    #[test]
    fn target_outside_superset_is_rejected() {
        let f = make_constant(v(&[2.0, 0.0]), 1.0).unwrap();
        let y = ConvexSet::ball(1.0).unwrap();
        let rep = ConstantsReport::ba(&f, &y, EstimateOptions::default()).unwrap();
        let t = ConvexSet::boxed(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap();
        let err = solve_prox_pair(&f, &y, &t, 0.5, &rep, &quick()).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }

    #[test]
    fn best_approx_examples() {
        let f = make_constant(v(&[2.0, 0.0]), 1.0).unwrap();
        let rep = ConstantsReport::ba(&f, &ConvexSet::ball(1.0).unwrap(), EstimateOptions::default()).unwrap();
        let cert = solve_best_approx(&f, 0.5, &rep, &quick()).unwrap();
        assert!(cert.passed, "{:#?}", cert.checks.first_failure());
        assert!((v(&cert.x_star) - v(&[0.5, 0.0])).norm() < 1e-6);

        let g = make_affine(Matrix::identity(2, 2), v(&[2.0, 0.0]), 1.0).unwrap();
        let rep = ConstantsReport::ba(&g, &ConvexSet::ball(1.0).unwrap(), EstimateOptions::default()).unwrap();
        assert_eq!(rep.l, Some(2.0));
        assert!((rep.sigma.unwrap() - 1.0).abs() < 1e-9);
        assert!((rep.r_max - 0.5).abs() < 1e-9);
        let cert = solve_best_approx(&g, rep.r_max, &rep, &quick()).unwrap();
        assert!(cert.passed, "{:#?}", cert.checks.first_failure());
    }

    #[test]
    fn perturbed_best_approx_fails() {
        let f = make_constant(v(&[2.0, 0.0]), 1.0).unwrap();
        let x = sampling::rotate_toward(&v(&[0.5, 0.0]), &v(&[0.0, 1.0]), 0.02).unwrap();
        let out = check_best_approx(&f, &x, 0.5, 1000, 0, Default::default()).unwrap();
        assert!(!out.passed);
        assert!(out.witness.is_some());
    }

    #[test]
    fn small_radius_examples() {
        let est = EstimateOptions::default();
        let c = make_constant(v(&[1.0, 0.0]), 2.0).unwrap();
        assert_eq!(ba_small_radius(&c, 0.5, est).unwrap().r_star, 2.0);
        let a = make_affine(Matrix::identity(2, 2), v(&[2.0, 0.0]), 3.0).unwrap();
        assert!((ba_small_radius(&a, 0.5, est).unwrap().r_star - 1.0).abs() < 1e-12);
        let z = make_affine(Matrix::identity(2, 2), Vector::zeros(2), 1.0).unwrap();
        assert!(matches!(ba_small_radius(&z, 0.5, est), Err(Error::Hypothesis(_))));
    }
}
