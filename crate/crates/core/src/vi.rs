//! Variational inequalities on small balls.
//!
//! For `Φ : B_ρ → ℝⁿ` with `σ > 0` and `r ≤ min{ρ, σ/(2M)}` there is a unique
//! `x* ∈ S_r` with
//!
//! `max{⟨Φ(x*), x* − x⟩, ⟨Φ(x), x* − x⟩} < 0` for all `x ∈ B_r \ {x*}`.
//!
//! It is found as the `x`-part of the saddle point of `J(x, y) = ⟨Φ(x), x − y⟩`
//! on `B_r × B_r`, where `y* = x*`.

use serde::{Deserialize, Serialize};

use crate::catalog::{vi_payoff, Bound, Certification, Payoff, SmoothMap};
use crate::check::{sweep, CheckOutcome, CheckReport, RunMode, StrictPolicy};
use crate::constants::{estimate_gamma, estimate_theta, op_norm, ConstantsReport, EstimateOptions, ZERO_TOL};
use crate::error::{Error, Result};
use crate::hilbert::{ConvexSet, Vector};
use crate::oracle::uniqueness_probe;
use crate::saddle::{
    check_saddle, random_start, solve_saddle, solve_saddle_from, x_samples, Residuals, SaddleConfig, SaddlePoint,
    SolveOptions,
};
use crate::sampling;

/// Collapse and sphere-membership tolerance.
pub const GAP_TOL: f64 = 1e-6;
/// Agreement required of the multi-start probe.
pub const PROBE_TOL: f64 = 1e-5;
const ROTATED_CANDIDATES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViChecks {
    /// Largest sampled `⟨Φ(x*), x* − x⟩`.
    pub first: f64,
    /// Largest sampled `⟨Φ(x), x* − x⟩`.
    pub second: f64,
    /// `max` of both forms at `x = −x*`.
    pub antipode: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Uniqueness {
    pub starts: usize,
    pub max_pairwise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViCertificate {
    pub r: f64,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    /// `‖x* − y*‖`.
    pub collapse_gap: f64,
    /// `‖Φ(x*)‖`.
    pub phi_norm: f64,
    pub vi_checks: ViChecks,
    pub uniqueness: Option<Uniqueness>,
    pub mode: RunMode,
    pub passed: bool,
    pub residuals: Residuals,
    pub checks: CheckReport,
}

/// Sampled check of both strict VI inequalities at `x_star`.
///
/// Samples: the antipode, the axis points `±r e_i`, the minimizer of
/// `⟨Φ(x*), ·⟩` on `B_r`, small rotations of `x*` on `S_r`, then `n_samples`
/// random points of `B_r`.
pub fn check_vi(
    phi: &SmoothMap,
    x_star: &Vector,
    r: f64,
    n_samples: usize,
    seed: u64,
    policy: StrictPolicy,
) -> Result<CheckReport> {
    if x_star.len() != phi.dimension() {
        return Err(Error::DimensionMismatch {
            expected: phi.dimension(),
            found: x_star.len(),
        });
    }
    if !(r > 0.0 && r <= phi.rho() * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("r must lie in (0, {}]", phi.rho())));
    }
    let mut report = CheckReport::default();
    let x_norm = x_star.norm();
    report.push(
        CheckOutcome::scalar("vi.x_in_ball", x_norm - r, 1e-9).with_witness(Some(x_star.iter().copied().collect())),
    );
    if x_norm > phi.rho() * (1.0 + 1e-9) {
        return Ok(report);
    }
    let p_star = phi.value(x_star);
    let pn = p_star.norm();
    let extra: Vec<Vector> = if pn > 0.0 { vec![&p_star * (-r / pn)] } else { vec![] };
    let xs = x_samples(x_star, Some(&p_star), 0.1 * r / pn.max(1e-12), &extra, r, n_samples, seed);
    let excl = policy.exclusion * r;
    let thr = -policy.strict_margin;
    let far = |x: &Vector| (x - x_star).norm() > excl;
    report.push(sweep("vi.first", &xs, thr, |x| far(x).then(|| p_star.dot(&(x_star - x)))));
    report.push(sweep("vi.second", &xs, thr, |x| far(x).then(|| phi.value(x).dot(&(x_star - x)))));
    let anti = -x_star;
    let anti_val = p_star.dot(&(x_star - &anti)).max(phi.value(&anti).dot(&(x_star - &anti)));
    if (&anti - x_star).norm() > excl {
        report.push(CheckOutcome::scalar("vi.antipode", anti_val, thr));
    }
    Ok(report)
}

fn vi_checks(report: &CheckReport) -> ViChecks {
    let get = |name| report.get(name).map_or(f64::NAN, |c| c.worst);
    ViChecks {
        first: get("vi.first"),
        second: get("vi.second"),
        antipode: get("vi.antipode"),
    }
}

/// Candidates on `S_r` rotated away from `x*` by `kπ/16`, `k = 1..16`, toward
/// alternating coordinate directions; the last one is `−x*`.
pub(crate) fn rotated_candidates(x_star: &Vector) -> Vec<Vector> {
    let n = x_star.len();
    let mut out = Vec::with_capacity(ROTATED_CANDIDATES);
    for k in 1..=ROTATED_CANDIDATES {
        let angle = std::f64::consts::PI * k as f64 / ROTATED_CANDIDATES as f64;
        let cand = (0..n).find_map(|off| {
            let mut e = Vector::zeros(n);
            e[(k + off) % n] = if k % 2 == 0 { 1.0 } else { -1.0 };
            sampling::rotate_toward(x_star, &e, angle)
        });
        match cand {
            Some(c) => out.push(c),
            None => out.push(-x_star),
        }
    }
    out
}

/// The regularized saddle problem behind the VI: `J = ⟨Φ(x), x − y⟩`,
/// `L = M`, `T = B_r`.
pub(crate) fn vi_problem(
    phi: &SmoothMap,
    r: f64,
    report: &ConstantsReport,
    opts: &SolveOptions,
) -> Result<(Payoff, SaddleConfig)> {
    let sigma = report
        .sigma
        .ok_or_else(|| Error::invalid("constants report has no sigma"))?;
    if !(sigma > ZERO_TOL) {
        return Err(Error::hypothesis(format!("sigma > 0 violated: sigma = {sigma:e}")));
    }
    let m = report
        .m
        .ok_or_else(|| Error::invalid("constants report has no M"))?;
    if !(r > 0.0 && r <= phi.rho() * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("r must lie in (0, rho = {}], got {r}", phi.rho())));
    }
    let m_cert = report.certified.get("M").copied().unwrap_or(Certification::SampledLowerBound);
    let payoff = vi_payoff(&report.attach(phi))?.with_grad_lipschitz(Some(Bound {
        value: m,
        certification: m_cert,
    }));
    let cfg = opts.saddle_config(&payoff, r, ConvexSet::ball(r)?, m, Some(report.r_max))?;
    Ok((payoff, cfg))
}

pub(crate) struct ViPointChecks {
    pub checks: CheckReport,
    pub collapse_gap: f64,
    pub phi_norm: f64,
    pub summary: ViChecks,
}

/// Every check of a VI solution that does not require solving again.
pub(crate) fn vi_point_checks(
    phi: &SmoothMap,
    payoff: &Payoff,
    cfg: &SaddleConfig,
    sp: &SaddlePoint,
    opts: &SolveOptions,
) -> Result<ViPointChecks> {
    let r = cfg.r;
    let mut checks = check_saddle(payoff, sp, cfg, opts.samples, opts.seed)?;
    let collapse_gap = (&sp.x_star - &sp.y_star).norm();
    checks.push(CheckOutcome::scalar("vi.collapse", collapse_gap, GAP_TOL));
    let phi_norm = phi.value(&sp.x_star).norm();
    checks.push(CheckOutcome::scalar("vi.phi_nonzero", -phi_norm, -ZERO_TOL));
    let vi = check_vi(phi, &sp.x_star, r, opts.samples, opts.seed, opts.policy())?;
    let summary = vi_checks(&vi);
    checks.extend(vi);

    // Each rotated candidate must be refuted by the single sample x*.
    let p_star = phi.value(&sp.x_star);
    let cands = rotated_candidates(&sp.x_star);
    checks.push(sweep("vi.rotated_candidates", &cands, opts.strict_margin, |c| {
        let d = c - &sp.x_star;
        Some(-(phi.value(c).dot(&d).max(p_star.dot(&d))))
    }));
    Ok(ViPointChecks {
        checks,
        collapse_gap,
        phi_norm,
        summary,
    })
}

/// Largest pairwise distance of `x*` over `opts.starts` random starts.
pub(crate) fn probe(payoff: &Payoff, cfg: &SaddleConfig, opts: &SolveOptions) -> Result<Option<Uniqueness>> {
    if opts.starts < 2 {
        return Ok(None);
    }
    let max_pairwise = uniqueness_probe(
        |s| {
            let (x0, y0) = random_start(payoff.dimension(), cfg, s)?;
            Ok(solve_saddle_from(payoff, cfg, &x0, &y0)?.x_star)
        },
        opts.starts,
        opts.seed,
    )?;
    Ok(Some(Uniqueness {
        starts: opts.starts,
        max_pairwise,
    }))
}

/// Solve and certify the VI on `B_r` for `Φ` with the given constants.
///
/// The saddle solver runs with `L = M` and `T = B_r`. Failed verifications are
/// recorded in the certificate (`passed = false`); only hypothesis violations,
/// invalid input and non-convergence are errors.
pub fn solve_vi(phi: &SmoothMap, r: f64, report: &ConstantsReport, opts: &SolveOptions) -> Result<ViCertificate> {
    let (payoff, cfg) = vi_problem(phi, r, report, opts)?;
    let mode = opts.run_mode(report.is_certified(), r, report.r_max)?;
    let sp = solve_saddle(&payoff, &cfg)?;
    let ViPointChecks {
        mut checks,
        collapse_gap,
        phi_norm,
        summary,
    } = vi_point_checks(phi, &payoff, &cfg, &sp, opts)?;
    let uniqueness = probe(&payoff, &cfg, opts)?;
    if let Some(u) = uniqueness {
        checks.push(CheckOutcome::scalar("vi.uniqueness", u.max_pairwise, PROBE_TOL));
    }
    Ok(ViCertificate {
        r,
        x_star: sp.x_star.iter().copied().collect(),
        y_star: sp.y_star.iter().copied().collect(),
        collapse_gap,
        phi_norm,
        vi_checks: summary,
        uniqueness,
        mode,
        passed: checks.passed(),
        residuals: Residuals::from(&sp),
        checks,
    })
}

/// Outcome of the shift condition `‖w − Ψ(0)‖ ≥ 2M₁ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftCondition {
    pub theta1: f64,
    pub gamma1: f64,
    pub m1: f64,
    pub distance: f64,
    pub required: f64,
    /// `max(0, 2M₁ρ − ‖w − Ψ(0)‖)`.
    pub deficit: f64,
    pub certified: bool,
}

impl ShiftCondition {
    pub fn holds(&self) -> bool {
        self.deficit <= 0.0
    }
}

/// Check the hypotheses of the shifted problem: `Ψ′(0) = 0` (error otherwise)
/// and report the shift condition.
pub fn shift_condition(psi: &SmoothMap, w: &Vector, opts: EstimateOptions) -> Result<ShiftCondition> {
    let zero = Vector::zeros(psi.dimension());
    if w.len() != psi.dimension() {
        return Err(Error::DimensionMismatch {
            expected: psi.dimension(),
            found: w.len(),
        });
    }
    let d0 = op_norm(&psi.try_jacobian(&zero)?)?;
    if d0 > 1e-10 {
        return Err(Error::hypothesis(format!(
            "derivative of Psi must vanish at 0: ‖Psi'(0)‖ = {d0:e}"
        )));
    }
    let theta = estimate_theta(psi, opts.samples, opts.seed)?;
    let gamma = estimate_gamma(psi, opts.samples, opts.seed)?;
    let rho = psi.rho();
    let m1 = 2.0 * (theta.value + rho * gamma.value);
    let distance = (w - psi.try_value(&zero)?).norm();
    let required = 2.0 * m1 * rho;
    Ok(ShiftCondition {
        theta1: theta.value,
        gamma1: gamma.value,
        m1,
        distance,
        required,
        deficit: (required - distance).max(0.0),
        certified: theta.certification.is_certified() && gamma.certification.is_certified(),
    })
}

/// The VI for `Φ = Ψ − w` on `B_r`, valid for every `r ≤ ρ` once
/// `‖w − Ψ(0)‖ ≥ 2M₁ρ`.
pub fn solve_vi_shifted(
    psi: &SmoothMap,
    w: &Vector,
    r: f64,
    opts: &SolveOptions,
    est: EstimateOptions,
) -> Result<(ViCertificate, ConstantsReport, ShiftCondition)> {
    let cond = shift_condition(psi, w, est)?;
    if !cond.holds() {
        return Err(Error::hypothesis(format!(
            "shift condition ‖w−Ψ(0)‖ ≥ 2M₁ρ violated: ‖w−Ψ(0)‖ = {}, 2M₁ρ = {}, deficit {}",
            cond.distance, cond.required, cond.deficit
        )));
    }
    let phi = psi.shifted(w)?;
    let report = ConstantsReport::vi(&phi, est)?;
    let cert = solve_vi(&phi, r, &report, opts)?;
    Ok((cert, report, cond))
}

/// A radius on which the VI constants are guaranteed usable.
#[derive(Clone, Debug)]
pub struct SmallRadius {
    pub r_star: f64,
    /// The map restricted to `B_{r*}`.
    pub map: SmoothMap,
    pub report: ConstantsReport,
}

/// `r* = min{ρ, (1−ε)‖F(0)‖ / max(‖F′(0)‖, 1e-12)}`.
///
/// Then `‖F(0) − F′(0)ᵀy‖ ≥ ε‖F(0)‖` for all `‖y‖ ≤ r*`.
pub(crate) fn radius_bound(map: &SmoothMap, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let zero = Vector::zeros(map.dimension());
    let f0 = map.try_value(&zero)?.norm();
    if !(f0 > ZERO_TOL) {
        return Err(Error::hypothesis(format!(
            "the map vanishes at 0, no small-radius zero exclusion (‖F(0)‖ = {f0:e})"
        )));
    }
    let a = op_norm(&map.try_jacobian(&zero)?)?;
    Ok(map.rho().min((1.0 - epsilon) * f0 / a.max(1e-12)))
}

/// Small-radius existence for the VI: `r*` and the constants of `Φ` on `B_{r*}`.
pub fn small_radius(map: &SmoothMap, epsilon: f64, est: EstimateOptions) -> Result<SmallRadius> {
    let r_star = radius_bound(map, epsilon)?;
    let restricted = map.restrict(r_star)?;
    let report = ConstantsReport::vi(&restricted, est)?;
    Ok(SmallRadius {
        r_star,
        map: restricted,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_affine, make_constant, make_quadratic};
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

    fn psi() -> SmoothMap {
        let q = vec![Matrix::identity(2, 2), Matrix::zeros(2, 2)];
        make_quadratic(Matrix::zeros(2, 2), Vector::zeros(2), q, 1.0).unwrap()
    }

    #[test]
    fn constant_map() {
        let c = make_constant(v(&[1.0, 0.0]), 1.0).unwrap();
        let rep = ConstantsReport::vi(&c, EstimateOptions::default()).unwrap();
        let cert = solve_vi(&c, 0.5, &rep, &quick()).unwrap();
        assert!(cert.passed, "{:#?}", cert.checks.first_failure());
        assert!((v(&cert.x_star) - v(&[-0.5, 0.0])).norm() < 1e-6);
        assert_eq!(cert.mode, RunMode::Certified);
        // ⟨c, x* − (−x*)⟩ = −2r‖c‖.
        assert!((cert.vi_checks.antipode + 1.0).abs() < 1e-6);
    }

    #[test]
    fn affine_map() {
        let a = make_affine(Matrix::identity(2, 2), v(&[2.0, 0.0]), 1.0).unwrap();
        let rep = ConstantsReport::vi(&a, EstimateOptions::default()).unwrap();
        assert_eq!(rep.r_max, 0.25);
        let cert = solve_vi(&a, 0.25, &rep, &quick()).unwrap();
        assert!(cert.passed, "{:#?}", cert.checks.first_failure());
        assert!((v(&cert.x_star) - v(&[-0.25, 0.0])).norm() < 1e-6);
    }

    #[test]
    fn rotated_solution_fails_check() {
        let a = make_affine(Matrix::identity(2, 2), v(&[2.0, 0.0]), 1.0).unwrap();
        let x = sampling::rotate_toward(&v(&[-0.25, 0.0]), &v(&[0.0, 1.0]), 0.01).unwrap();
        let rep = check_vi(&a, &x, 0.25, 1000, 0, StrictPolicy::default()).unwrap();
        assert!(!rep.passed());
        assert!(rep.first_failure().unwrap().witness.is_some());
    }

    #[test]
    fn shift_gate() {
        let est = EstimateOptions::default();
        let ok = shift_condition(&psi(), &v(&[16.0, 0.0]), est).unwrap();
        assert_eq!(ok.m1, 8.0);
        assert!(ok.holds());
        let bad = shift_condition(&psi(), &v(&[15.9, 0.0]), est).unwrap();
        assert!((bad.deficit - 0.1).abs() < 1e-12);
        let err = solve_vi_shifted(&psi(), &v(&[15.9, 0.0]), 1.0, &quick(), est).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        let lin = make_affine(Matrix::identity(2, 2), Vector::zeros(2), 1.0).unwrap();
        assert!(matches!(shift_condition(&lin, &v(&[16.0, 0.0]), est), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn shifted_quadratic() {
        let (cert, rep, _) =
            solve_vi_shifted(&psi(), &v(&[16.0, 0.0]), 1.0, &quick(), EstimateOptions::default()).unwrap();
        assert_eq!(rep.r_max, 1.0);
        assert!(cert.passed, "{:#?}", cert.checks.first_failure());
        assert!((v(&cert.x_star) - v(&[1.0, 0.0])).norm() < 1e-6);
    }

    #[test]
    fn small_radius_examples() {
        let est = EstimateOptions::default();
        let c = make_constant(v(&[1.0, 0.0]), 2.0).unwrap();
        assert_eq!(small_radius(&c, 0.5, est).unwrap().r_star, 2.0);
        let a = make_affine(Matrix::identity(2, 2), v(&[2.0, 0.0]), 3.0).unwrap();
        assert!((small_radius(&a, 0.5, est).unwrap().r_star - 1.0).abs() < 1e-12);
        let z = make_affine(Matrix::identity(2, 2), Vector::zeros(2), 1.0).unwrap();
        assert!(matches!(small_radius(&z, 0.5, est), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn sampled_constants_need_heuristic_flag() {
        let c = SmoothMap::from_oracles(1, 1.0, |x: &Vector| x.map(|t| t * t + 1.0), |x: &Vector| {
            Matrix::from_diagonal(&x.map(|t| 2.0 * t))
        }, None)
        .unwrap();
        let rep = ConstantsReport::vi(&c, EstimateOptions::default()).unwrap();
        assert!(!rep.is_certified());
        let r = rep.r_max;
        assert!(matches!(solve_vi(&c, r, &rep, &quick()), Err(Error::Certification(_))));
        let opts = SolveOptions {
            heuristic: true,
            ..quick()
        };
        let cert = solve_vi(&c, r, &rep, &opts).unwrap();
        assert_eq!(cert.mode, RunMode::Heuristic);
    }
}
