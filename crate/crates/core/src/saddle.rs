//! The regularized saddle problem on `B_r × T`.
//!
//! With `φ(x, y) = (L/2)‖x‖² + J(x, y)` and `L` at least the Lipschitz
//! constant of `J′_x(·, y)`, `φ(·, y)` is convex, so `φ` is convex–concave on
//! `B_r × T` and has a saddle point. When `r ≤ δ/(2L)` the stationarity condition
//! `J′_x(x, y*) + Lx = 0` has no solution inside `B_r`, the minimizer `x*` of
//! `φ(·, y*)` sits on the sphere `S_r`, and since `‖x‖²` is constant there the
//! saddle inequalities transfer to `J` itself:
//!
//! `J(x*, y) ≤ J(x*, y*) < J(x, y*)` for all `x ∈ B_r \ {x*}`, `y ∈ T`.
//!
//! [`solve_saddle`] finds `(x*, y*)` by the extragradient method;
//! [`check_saddle`] verifies the inequalities on seeded samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Payoff;
use crate::check::{sweep, CheckOutcome, CheckReport, RunMode, StrictPolicy};
use crate::error::{Error, Result};
use crate::hilbert::{project_ball_unchecked, ConvexSet, Vector};
use crate::sampling;

/// Smallest smoothness bound used to derive a default step. Payoffs that are
/// linear in both arguments report zero, and any step converges for them.
const MIN_SMOOTHNESS: f64 = 1e-3;
const MAX_HALVINGS: usize = 40;

#[derive(Clone, Debug)]
pub struct SaddleConfig {
    pub r: f64,
    pub t_set: ConvexSet,
    /// The regularization weight `L`.
    pub regularization: f64,
    pub step: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub strict_margin: f64,
    /// Exclusion radius around `x*` for strict inequalities, relative to `r`.
    pub exclusion: f64,
    /// Admissible radius; sphere membership is only required when
    /// `r ≤ r_max`.
    pub r_max: Option<f64>,
}

impl SaddleConfig {
    pub fn new(r: f64, t_set: ConvexSet, regularization: f64, step: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("r must be positive, got {r}")));
        }
        if !(regularization.is_finite() && regularization >= 0.0) {
            return Err(Error::invalid("regularization must be nonnegative"));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid("step must be positive"));
        }
        Ok(SaddleConfig {
            r,
            t_set,
            regularization,
            step,
            tol: 1e-8,
            max_iters: 1_000_000,
            strict_margin: 1e-9,
            exclusion: 1e-4,
            r_max: None,
        })
    }

    /// Config with step `1/(2ℓ_φ)` derived from the payoff's constants.
    pub fn for_payoff(payoff: &Payoff, r: f64, t_set: ConvexSet, regularization: f64) -> Result<Self> {
        let step = default_step(payoff, regularization)?;
        Self::new(r, t_set, regularization, step)
    }

    pub fn with_tolerances(mut self, tol: f64, max_iters: usize, strict_margin: f64) -> Self {
        self.tol = tol;
        self.max_iters = max_iters;
        self.strict_margin = strict_margin;
        self
    }

    pub fn with_r_max(mut self, r_max: Option<f64>) -> Self {
        self.r_max = r_max;
        self
    }

    /// Slack allowed on the non-strict inequality `J(x*, y) ≤ J(x*, y*)`.
    pub fn check_tol(&self) -> f64 {
        10.0 * self.tol
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion * self.r
    }
}

/// Solver and verification settings shared by the application solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub strict_margin: f64,
    /// Exclusion radius relative to `r`.
    pub exclusion: f64,
    /// Sample count of each verification sweep.
    pub samples: usize,
    /// Random starts of the uniqueness probe.
    pub starts: usize,
    pub seed: u64,
    /// Allow sampled constants and radii beyond `r_max`.
    pub heuristic: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iters: 1_000_000,
            strict_margin: 1e-9,
            exclusion: 1e-4,
            samples: 10_000,
            starts: 16,
            seed: 0,
            heuristic: false,
        }
    }
}

impl SolveOptions {
    pub fn policy(&self) -> StrictPolicy {
        StrictPolicy {
            strict_margin: self.strict_margin,
            exclusion: self.exclusion,
        }
    }

    pub fn saddle_config(
        &self,
        payoff: &Payoff,
        r: f64,
        t_set: ConvexSet,
        regularization: f64,
        r_max: Option<f64>,
    ) -> Result<SaddleConfig> {
        let mut cfg = SaddleConfig::for_payoff(payoff, r, t_set, regularization)?
            .with_tolerances(self.tol, self.max_iters, self.strict_margin)
            .with_r_max(r_max);
        cfg.exclusion = self.exclusion;
        Ok(cfg)
    }

    /// Decide the run mode, rejecting heuristic runs unless allowed.
    pub fn run_mode(&self, constants_certified: bool, r: f64, r_max: f64) -> Result<RunMode> {
        let within = r <= r_max * (1.0 + 1e-12);
        if constants_certified && within {
            return Ok(RunMode::Certified);
        }
        if self.heuristic {
            return Ok(RunMode::Heuristic);
        }
        if !constants_certified {
            Err(Error::Certification(
                "constants include sampled lower bounds; rerun with --heuristic".into(),
            ))
        } else {
            Err(Error::hypothesis(format!(
                "r = {r} exceeds the admissible radius r_max = {r_max}"
            )))
        }
    }
}

/// Solver statistics recorded in certificates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Residuals {
    pub extragradient: f64,
    pub iterations: usize,
    pub step: f64,
}

impl From<&SaddlePoint> for Residuals {
    fn from(sp: &SaddlePoint) -> Self {
        Residuals {
            extragradient: sp.residual,
            iterations: sp.iterations,
            step: sp.step,
        }
    }
}

/// `1/(2ℓ_φ)` with `ℓ_φ = max(L + Lip(J′_x), Lip(∇_y J in y)) + coupling`, a
/// Lipschitz bound for the monotone operator `(∇_x φ, −∇_y φ)`.
pub fn default_step(payoff: &Payoff, regularization: f64) -> Result<f64> {
    let lip = payoff
        .grad_lipschitz()
        .ok_or_else(|| Error::invalid("payoff has no gradient Lipschitz constant; supply a step"))?
        .value;
    let coupling = payoff
        .coupling()
        .ok_or_else(|| Error::invalid("payoff has no coupling bound; supply a step"))?;
    let y_curv = payoff.y_curvature().unwrap_or(0.0);
    let smooth = (regularization + lip).max(y_curv) + coupling;
    Ok(1.0 / (2.0 * smooth.max(MIN_SMOOTHNESS)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddlePoint {
    pub x_star: Vector,
    pub y_star: Vector,
    /// Extragradient fixed-point residual at the returned point.
    pub residual: f64,
    pub iterations: usize,
    /// Step in use at termination (smaller than the configured one if it was
    /// halved).
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhiEval {
    pub value: f64,
    pub grad_x: Vector,
    pub grad_y: Vector,
}

fn check_in_domain(payoff: &Payoff, x: &Vector) -> Result<()> {
    if x.len() != payoff.dimension() {
        return Err(Error::DimensionMismatch {
            expected: payoff.dimension(),
            found: x.len(),
        });
    }
    let rho = payoff.x_radius();
    if x.norm() > rho * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::invalid(format!(
            "evaluation outside B_rho: ‖x‖ = {} > {rho}",
            x.norm()
        )));
    }
    Ok(())
}

/// `φ(x, y) = (L/2)‖x‖² + J(x, y)` with both partial gradients.
pub fn phi_value_grad(payoff: &Payoff, regularization: f64, x: &Vector, y: &Vector) -> Result<PhiEval> {
    check_in_domain(payoff, x)?;
    if y.len() != payoff.dimension() {
        return Err(Error::DimensionMismatch {
            expected: payoff.dimension(),
            found: y.len(),
        });
    }
    Ok(PhiEval {
        value: 0.5 * regularization * x.norm_squared() + payoff.value(x, y),
        grad_x: x * regularization + payoff.grad_x(x, y),
        grad_y: payoff.grad_y(x, y),
    })
}

fn validate(payoff: &Payoff, cfg: &SaddleConfig) -> Result<()> {
    if cfg.r > payoff.x_radius() * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "r = {} exceeds the payoff's domain radius {}",
            cfg.r,
            payoff.x_radius()
        )));
    }
    cfg.t_set.check_dimension(payoff.dimension())
}

/// Extragradient from `x₀ = 0`, `y₀ = P_T(0)`.
pub fn solve_saddle(payoff: &Payoff, cfg: &SaddleConfig) -> Result<SaddlePoint> {
    let n = payoff.dimension();
    let y0 = cfg.t_set.project(&Vector::zeros(n))?;
    solve_saddle_from(payoff, cfg, &Vector::zeros(n), &y0)
}

/// Extragradient iteration for `min_{B_r} max_T φ`.
///
/// Each iteration takes the half step `x̄ = P_{B_r}(x − τ∇_xφ)`,
/// `ȳ = P_T(y + τ∇_yφ)` and the full step from `(x, y)` with the gradients at
/// `(x̄, ȳ)`. Stops when `‖(x − x̄, y − ȳ)‖ ≤ tol`. If the residual grows the
/// step is halved.
pub fn solve_saddle_from(payoff: &Payoff, cfg: &SaddleConfig, x0: &Vector, y0: &Vector) -> Result<SaddlePoint> {
    validate(payoff, cfg)?;
    let l = cfg.regularization;
    let r = cfg.r;
    let t = &cfg.t_set;
    let grads = |x: &Vector, y: &Vector| (x * l + payoff.grad_x(x, y), payoff.grad_y(x, y));

    let mut x = project_ball_unchecked(x0, r);
    let mut y = t.project(y0)?;
    let mut tau = cfg.step;
    let mut prev = f64::INFINITY;
    let mut halvings = 0;
    let mut residual = f64::INFINITY;
    for it in 0..cfg.max_iters {
        let (gx, gy) = grads(&x, &y);
        let xb = project_ball_unchecked(&(&x - &gx * tau), r);
        let yb = t.project(&(&y + &gy * tau))?;
        residual = ((&x - &xb).norm_squared() + (&y - &yb).norm_squared()).sqrt();
        if !residual.is_finite() {
            return Err(Error::NonConvergence {
                what: "extragradient",
                iterations: it,
                residual,
            });
        }
        if residual <= cfg.tol {
            return Ok(SaddlePoint {
                x_star: x,
                y_star: y,
                residual,
                iterations: it,
                step: tau,
            });
        }
        if residual > prev * (1.0 + 1e-9) && halvings < MAX_HALVINGS {
            tau *= 0.5;
            halvings += 1;
            prev = f64::INFINITY;
            continue;
        }
        prev = residual;
        let (gx, gy) = grads(&xb, &yb);
        x = project_ball_unchecked(&(&x - &gx * tau), r);
        y = t.project(&(&y + &gy * tau))?;
    }
    Err(Error::NonConvergence {
        what: "extragradient",
        iterations: cfg.max_iters,
        residual,
    })
}

/// A random start `(x₀, y₀)` uniform in `B_r × T`.
pub fn random_start(n: usize, cfg: &SaddleConfig, seed: u64) -> Result<(Vector, Vector)> {
    let mut rng = sampling::rng(seed);
    let x0 = sampling::uniform_ball(&mut rng, n, cfg.r);
    let y0 = sampling::sample_set(&mut rng, &cfg.t_set, n)?;
    Ok((x0, y0))
}

/// Sample points of `B_r` for the strict inequality: structured candidates
/// first (axes, antipode, `y*`, projected descent steps from `x*`, small
/// rotations of `x*` on the sphere), then `n_samples` random points, one in
/// four on the sphere and the rest uniform in the ball.
pub(crate) fn x_samples(
    x_star: &Vector,
    descent: Option<&Vector>,
    step: f64,
    extra: &[Vector],
    r: f64,
    n_samples: usize,
    seed: u64,
) -> Vec<Vector> {
    let n = x_star.len();
    let mut out = Vec::with_capacity(n_samples + 8 * n + 16);
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = Vector::zeros(n);
            e[i] = s * r;
            out.push(e);
        }
    }
    out.push(project_ball_unchecked(&(-x_star), r));
    for p in extra {
        out.push(project_ball_unchecked(p, r));
    }
    if let Some(g) = descent {
        let gn = g.norm();
        if gn > 0.0 {
            out.push(g * (-r / gn));
            let mut s = step;
            for _ in 0..8 {
                out.push(project_ball_unchecked(&(x_star - g * s), r));
                s *= 4.0;
            }
        }
    }
    if x_star.norm() > 0.5 * r {
        for i in 0..n {
            for sgn in [1.0, -1.0] {
                let mut e = Vector::zeros(n);
                e[i] = sgn;
                for angle in [1e-3, 1e-2, 1e-1] {
                    if let Some(p) = sampling::rotate_toward(x_star, &e, angle) {
                        out.push(project_ball_unchecked(&p, r));
                    }
                }
            }
        }
    }
    let mut rng = sampling::rng(seed);
    for k in 0..n_samples {
        if k % 4 == 3 {
            out.push(sampling::uniform_sphere(&mut rng, n, r));
        } else {
            out.push(sampling::uniform_ball(&mut rng, n, r));
        }
    }
    out
}

fn y_samples(
    payoff: &Payoff,
    sp: &SaddlePoint,
    cfg: &SaddleConfig,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vector>> {
    let n = payoff.dimension();
    let t = &cfg.t_set;
    let mut out = sampling::axis_extremes(t, n)?;
    out.push(t.project(&sp.x_star)?);
    let gy = payoff.grad_y(&sp.x_star, &sp.y_star);
    let mut s = cfg.step;
    for _ in 0..8 {
        out.push(t.project(&(&sp.y_star + &gy * s))?);
        s *= 4.0;
    }
    // Distinct stream from the x samples.
    let mut rng = sampling::rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let _ = rng.random::<u64>();
    for _ in 0..n_samples {
        out.push(sampling::sample_set(&mut rng, t, n)?);
    }
    Ok(out)
}

/// Sampled verification of `J(x*, y) ≤ J(x*, y*) < J(x, y*)`.
///
/// Checks, all recorded in the report:
/// * `saddle.x_in_ball`, `saddle.y_in_t`: feasibility;
/// * `saddle.y_upper`: `J(x*, y) − J(x*, y*) ≤ 10·tol` for sampled `y ∈ T`;
/// * `saddle.x_strict`: `J(x*, y*) − J(x, y*) ≤ −strict_margin` for sampled
///   `x ∈ B_r` farther than the exclusion radius from `x*`;
/// * `saddle.minimax_gap`: `max_y φ(x*, y) − min_x φ(x, y*) ≤ 10·tol`;
/// * `saddle.kkt`: `∇_xφ(x*, y*)` lies in the normal cone of `B_r` at `x*`;
/// * `saddle.sphere`: `|‖x*‖ − r| ≤ 1e-6`, required when `L > 0` and
///   `r ≤ r_max`.
pub fn check_saddle(payoff: &Payoff, sp: &SaddlePoint, cfg: &SaddleConfig, n_samples: usize, seed: u64) -> Result<CheckReport> {
    validate(payoff, cfg)?;
    let n = payoff.dimension();
    for v in [&sp.x_star, &sp.y_star] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
    }
    let (xs, ys) = (&sp.x_star, &sp.y_star);
    let r = cfg.r;
    let l = cfg.regularization;
    let mut report = CheckReport::default();

    let x_norm = xs.norm();
    report.push(
        CheckOutcome::scalar("saddle.x_in_ball", x_norm - r, 1e-9).with_witness(Some(xs.iter().copied().collect())),
    );
    let y_gap = (cfg.t_set.project(ys)? - ys).norm();
    report.push(CheckOutcome::scalar("saddle.y_in_t", y_gap, 1e-9).with_witness(Some(ys.iter().copied().collect())));
    // The remaining checks evaluate J at x*; it must be in the domain.
    if x_norm > payoff.x_radius() * (1.0 + 1e-9) {
        return Ok(report);
    }

    let j_star = payoff.value(xs, ys);
    let gx = xs * l + payoff.grad_x(xs, ys);

    let ysamp = y_samples(payoff, sp, cfg, n_samples, seed)?;
    let at_x_star = payoff.section(xs);
    report.push(sweep("saddle.y_upper", &ysamp, cfg.check_tol(), |y| Some(at_x_star(y) - j_star)));

    let xsamp = x_samples(xs, Some(&gx), cfg.step, std::slice::from_ref(ys), r, n_samples, seed);
    let excl = cfg.exclusion_radius();
    report.push(sweep("saddle.x_strict", &xsamp, -cfg.strict_margin, |x| {
        if (x - xs).norm() <= excl {
            None
        } else {
            Some(j_star - payoff.value(x, ys))
        }
    }));

    let phi_star = 0.5 * l * xs.norm_squared() + j_star;
    let max_y = ysamp.iter().map(|y| 0.5 * l * xs.norm_squared() + at_x_star(y)).fold(phi_star, f64::max);
    let min_x = xsamp
        .iter()
        .map(|x| 0.5 * l * x.norm_squared() + payoff.value(x, ys))
        .fold(phi_star, f64::min);
    report.push(CheckOutcome::scalar("saddle.minimax_gap", max_y - min_x, 10.0 * cfg.tol));

    // Normal cone of B_r at x*: {0} inside, {−λx*, λ ≥ 0} on the sphere.
    let (kkt, lambda) = if x_norm >= r * (1.0 - 1e-6) && x_norm > 0.0 {
        let xh = xs / x_norm;
        let lambda = -gx.dot(&xh);
        let tangential = (&gx + &xh * lambda).norm();
        (tangential + (-lambda).max(0.0), lambda.max(0.0))
    } else {
        (gx.norm(), 0.0)
    };
    let kkt_tol = 10.0 * cfg.tol * (1.0 / cfg.step + lambda / r) + 1e-12;
    report.push(CheckOutcome::scalar("saddle.kkt", kkt, kkt_tol));

    if l > 0.0 && cfg.r_max.is_some_and(|rm| r <= rm * (1.0 + 1e-12)) {
        report.push(
            CheckOutcome::scalar("saddle.sphere", (x_norm - r).abs(), 1e-6)
                .with_witness(Some(xs.iter().copied().collect())),
        );
    }
    Ok(report)
}
