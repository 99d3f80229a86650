//! Constants of the existence results and the admissible radius they imply.
//!
//! | constant | meaning |
//! |----------|---------|
//! | `θ` | `sup_{x∈B_ρ} ‖Φ′(x)‖` |
//! | `γ` | Lipschitz constant of `Φ′` |
//! | `η` | Lipschitz constant of `x ↦ x − f(x)` |
//! | `M` | `2(θ + ργ)`, Lipschitz constant of `J′_x` for the VI payoff |
//! | `L` | `2(η + θ + γ(ρ + sup_Y‖y‖))` for the best-approximation payoff, or the declared gradient Lipschitz constant of a general payoff |
//! | `σ` | `inf_y ‖Φ(0) − Φ′(0)ᵀy‖` (VI) or `inf_{y∈Y} ‖f′(0)ᵀy − f(0)‖` (BA) |
//! | `δ` | `inf_{y∈Y} ‖J′_x(0, y)‖` |
//!
//! Sampled constants are lower bounds of suprema and therefore never certify
//! a radius; reports built from them are marked heuristic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{AnalyticConstants, Bound, Certification, Payoff, SmoothMap};
use crate::error::{Error, Result};
use crate::hilbert::{ConvexSet, Matrix, Vector};
use crate::sampling;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;
const PGD_TOL: f64 = 1e-10;
const PGD_MAX_ITERS: usize = 100_000;

/// Threshold below which `σ`, `δ` or `‖Φ(0)‖` count as zero.
pub const ZERO_TOL: f64 = 1e-9;

/// Spectral norm by power iteration on `AᵀA`.
///
/// Two starting vectors are used (a fixed irrational vector and the largest
/// column of `AᵀA`) so that a start orthogonal to the top singular vector
/// cannot go unnoticed.
pub fn op_norm(a: &Matrix) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::invalid(format!(
            "op_norm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = a.ncols();
    if n == 0 || a.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let ata = a.tr_mul(a);
    let golden = Vector::from_fn(n, |i, _| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() + 0.1);
    let (col, _) = ata
        .column_iter()
        .enumerate()
        .map(|(j, c)| (j, c.norm()))
        .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let first = power_iteration(&ata, golden)?;
    let second = power_iteration(&ata, ata.column(col).into_owned())?;
    Ok(first.max(second).sqrt())
}

/// Largest eigenvalue of a positive semidefinite matrix.
fn power_iteration(s: &Matrix, start: Vector) -> Result<f64> {
    let norm = start.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut v = start / norm;
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = s * &v;
        let next = w.norm();
        if next == 0.0 {
            return Ok(0.0);
        }
        v = w / next;
        if (next - lambda).abs() <= POWER_TOL * next.max(1.0) {
            return Ok(v.dot(&(s * &v)));
        }
        lambda = next;
    }
    Err(Error::NonConvergence {
        what: "power iteration",
        iterations: POWER_MAX_ITERS,
        residual: lambda,
    })
}

/// Values whose pairwise distance defines a Lipschitz ratio.
pub trait Displacement {
    fn distance(&self, other: &Self) -> Result<f64>;
}

impl Displacement for Vector {
    fn distance(&self, other: &Self) -> Result<f64> {
        Ok((self - other).norm())
    }
}

impl Displacement for Matrix {
    fn distance(&self, other: &Self) -> Result<f64> {
        op_norm(&(self - other))
    }
}

/// `sup‖Φ′‖` over `B_ρ`: the declared value when there is one, otherwise
/// the maximum over `{0, ±ρe_i}` and `samples` Halton points (a lower bound).
pub fn estimate_theta(map: &SmoothMap, samples: usize, seed: u64) -> Result<Bound> {
    if let Some(k) = map.analytic() {
        return Ok(k.theta);
    }
    let n = map.dimension();
    let mut best: f64 = 0.0;
    for x in sampling::structured_ball_points(n, map.rho())
        .into_iter()
        .chain(sampling::halton_ball(n, map.rho(), samples, seed))
    {
        best = best.max(op_norm(&map.try_jacobian(&x)?)?);
    }
    Ok(Bound::sampled(best))
}

/// Sampled lower bound of the Lipschitz constant of `oracle` on `B_ρ`:
/// the largest ratio `‖G(a) − G(b)‖ / ‖a − b‖` over structured pairs
/// (`(0, ±ρe_i)`, `(ρe_i, −ρe_i)`) and `pairs` Halton pairs.
pub fn estimate_lipschitz<T, G>(oracle: G, rho: f64, n: usize, pairs: usize, seed: u64) -> Result<Bound>
where
    T: Displacement,
    G: Fn(&Vector) -> T,
{
    let mut best: f64 = 0.0;
    let mut ratio = |a: &Vector, b: &Vector| -> Result<()> {
        let d = (a - b).norm();
        if d > 1e-12 {
            best = best.max(oracle(a).distance(&oracle(b))? / d);
        }
        Ok(())
    };
    let zero = Vector::zeros(n);
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = rho;
        ratio(&zero, &e)?;
        ratio(&zero, &(-&e))?;
        ratio(&e, &(-&e))?;
    }
    let pts = sampling::halton_ball(n, rho, 2 * pairs, seed);
    for pair in pts.chunks_exact(2) {
        ratio(&pair[0], &pair[1])?;
    }
    Ok(Bound::sampled(best))
}

/// `γ`: declared, or a sampled lower bound for the Jacobian's Lipschitz
/// constant.
pub fn estimate_gamma(map: &SmoothMap, pairs: usize, seed: u64) -> Result<Bound> {
    if let Some(k) = map.analytic() {
        return Ok(k.gamma);
    }
    estimate_lipschitz(|x| map.jacobian(x), map.rho(), map.dimension(), pairs, seed)
}

/// `η`: declared, or a sampled lower bound for `x ↦ x − f(x)`.
pub fn estimate_eta(map: &SmoothMap, pairs: usize, seed: u64) -> Result<Bound> {
    if let Some(eta) = map.analytic().and_then(|k| k.eta) {
        return Ok(eta);
    }
    estimate_lipschitz(|x| x - map.value(x), map.rho(), map.dimension(), pairs, seed)
}

/// Result of minimizing `‖b + My‖` over a convex set.
#[derive(Clone, Debug)]
pub struct AffineMin {
    pub value: f64,
    pub argmin: Vector,
    pub iterations: usize,
}

/// `inf_{y∈C} ‖b + My‖`.
///
/// Balls are solved exactly through the eigendecomposition of `MᵀM` (the
/// trust-region subproblem). Other sets use projected gradient descent on
/// `‖b + My‖²` with step `1/(2‖M‖²)`, started at `P_C(0)`, stopped when the
/// gradient mapping is below `1e-10` relative to the gradient scale.
pub fn min_affine_norm(b: &Vector, m: &Matrix, set: &ConvexSet) -> Result<AffineMin> {
    let n = b.len();
    if m.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.nrows(),
        });
    }
    let k = m.ncols();
    set.check_dimension(k)?;
    if let ConvexSet::Ball(ball) = set {
        let y = ball_min_affine(b, m, ball.radius());
        return Ok(AffineMin {
            value: (b + m * &y).norm(),
            argmin: y,
            iterations: 0,
        });
    }
    let mut y = set.project(&Vector::zeros(k))?;
    let lip = op_norm_rect(m)?;
    if lip == 0.0 {
        return Ok(AffineMin {
            value: b.norm(),
            argmin: y,
            iterations: 0,
        });
    }
    let step = 1.0 / (2.0 * lip * lip);
    let radius = set.sup_norm().unwrap_or_else(|| y.norm().max(1.0));
    let scale = (2.0 * lip * (b.norm() + lip * radius)).max(1.0);
    let mut gm = f64::INFINITY;
    for it in 0..PGD_MAX_ITERS {
        let grad = m.tr_mul(&(b + m * &y)) * 2.0;
        let next = set.project(&(&y - &grad * step))?;
        gm = (&y - &next).norm() / step;
        y = next;
        if gm <= PGD_TOL * scale {
            return Ok(AffineMin {
                value: (b + m * &y).norm(),
                argmin: y,
                iterations: it + 1,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "projected gradient (sigma)",
        iterations: PGD_MAX_ITERS,
        residual: gm,
    })
}

/// Minimizer of `‖b + My‖` over `‖y‖ ≤ ρ`: the minimum-norm least-squares
/// point if it lies in the ball, otherwise `y(μ) = −(MᵀM + μI)⁻¹Mᵀb` with
/// `‖y(μ)‖ = ρ`, found by bisection on the decreasing map `μ ↦ ‖y(μ)‖`.
fn ball_min_affine(b: &Vector, m: &Matrix, rho: f64) -> Vector {
    let eig = m.tr_mul(m).symmetric_eigen();
    let c = eig.eigenvectors.tr_mul(&m.tr_mul(b));
    let top = eig.eigenvalues.amax();
    let cutoff = top * 1e-14;
    let coords = |mu: f64| {
        Vector::from_fn(c.len(), |i, _| {
            let lam = eig.eigenvalues[i].max(0.0) + mu;
            if lam <= cutoff {
                0.0
            } else {
                -c[i] / lam
            }
        })
    };
    let mut z = coords(0.0);
    if z.norm() > rho {
        let (mut lo, mut hi) = (0.0, c.norm() / rho);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if coords(mid).norm() > rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        z = coords(hi);
    }
    let y = &eig.eigenvectors * z;
    // Guard against rounding pushing the point outside.
    let norm = y.norm();
    if norm > rho {
        y * (rho / norm)
    } else {
        y
    }
}

fn op_norm_rect(m: &Matrix) -> Result<f64> {
    if m.nrows() == m.ncols() {
        return op_norm(m);
    }
    // ‖M‖ = ‖MᵀM‖^{1/2}, and MᵀM is square.
    Ok(op_norm(&m.tr_mul(m))?.sqrt())
}

/// `σ = inf_{‖y‖≤ρ} ‖Φ(0) − Φ′(0)ᵀy‖`, using `sup_{‖u‖=1}|⟨v,u⟩| = ‖v‖`.
pub fn sigma_vi(phi0: &Vector, jac0: &Matrix, rho: f64) -> Result<f64> {
    let ball = ConvexSet::ball(rho)?;
    Ok(min_affine_norm(phi0, &(-jac0.transpose()), &ball)?.value)
}

/// `σ = inf_{y∈Y} ‖f′(0)ᵀy − f(0)‖`.
pub fn sigma_ba(f0: &Vector, jac0: &Matrix, y_set: &ConvexSet) -> Result<f64> {
    if y_set.sup_norm().is_none() {
        return Err(Error::invalid("Y must be bounded"));
    }
    Ok(min_affine_norm(&(-f0), &jac0.transpose(), y_set)?.value)
}

/// `δ = inf_{y∈Y} ‖J′_x(0, y)‖`.
///
/// Exact (up to solver tolerance) when `J′_x(0, ·)` is affine, as for every
/// catalog payoff. Otherwise the minimum over `samples` points of `Y`, which
/// over-estimates the infimum and is flagged as sampled.
pub fn delta_const(payoff: &Payoff, y_set: &ConvexSet, samples: usize, seed: u64) -> Result<Bound> {
    if let Some((b, m)) = payoff.grad_x_at_origin_affine() {
        return Ok(Bound::analytic(min_affine_norm(&b, &m, y_set)?.value));
    }
    let n = payoff.dimension();
    let zero = Vector::zeros(n);
    let mut rng = sampling::rng(seed);
    let mut best = f64::INFINITY;
    for y in sampling::axis_extremes(y_set, n)? {
        best = best.min(payoff.grad_x(&zero, &y).norm());
    }
    for _ in 0..samples {
        let y = sampling::sample_set(&mut rng, y_set, n)?;
        best = best.min(payoff.grad_x(&zero, &y).norm());
    }
    Ok(Bound::sampled(best))
}

/// Which radius bound applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiusMode {
    /// `min{ρ, δ/(2L)}`: general payoff.
    #[serde(rename = "thm1")]
    General,
    /// `min{ρ, σ/(2M)}`: variational inequality.
    #[serde(rename = "thm2")]
    Vi,
    /// `min{ρ, σ/L}`: proximity pair and best approximation.
    #[serde(rename = "thm5")]
    Proximity,
}

/// Everything the solvers need to know about an instance's constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsReport {
    pub mode: RadiusMode,
    pub rho: f64,
    pub theta: f64,
    pub gamma: f64,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub sigma: Option<f64>,
    pub r_max: f64,
    pub certified: BTreeMap<String, Certification>,
}

/// Sample budgets for constants that have to be estimated.
#[derive(Clone, Copy, Debug)]
pub struct EstimateOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            samples: 1000,
            seed: 0,
        }
    }
}

impl ConstantsReport {
    /// Certified when no constant entering `r_max` is a sampled lower bound.
    pub fn is_certified(&self) -> bool {
        self.certified.values().all(|c| c.is_certified())
    }

    pub fn mode_label(&self) -> &'static str {
        if self.is_certified() {
            "certified"
        } else {
            "heuristic"
        }
    }

    /// `map` carrying this report's `θ`, `γ`, `η` as its constants when it
    /// declares none, so that payoffs built from it know their step bounds.
    pub fn attach(&self, map: &SmoothMap) -> SmoothMap {
        if map.analytic().is_some() {
            return map.clone();
        }
        let cert = |k: &str| {
            self.certified
                .get(k)
                .copied()
                .unwrap_or(Certification::SampledLowerBound)
        };
        let bound = |value, k| Bound {
            value,
            certification: cert(k),
        };
        map.clone().with_analytic(Some(AnalyticConstants {
            theta: bound(self.theta, "theta"),
            gamma: bound(self.gamma, "gamma"),
            eta: self.eta.map(|e| bound(e, "eta")),
        }))
    }

    /// Constants for the variational inequality on `B_ρ`.
    pub fn vi(phi: &SmoothMap, opts: EstimateOptions) -> Result<Self> {
        let rho = phi.rho();
        let theta = estimate_theta(phi, opts.samples, opts.seed)?;
        let gamma = estimate_gamma(phi, opts.samples, opts.seed)?;
        let m = 2.0 * (theta.value + rho * gamma.value);
        let zero = Vector::zeros(phi.dimension());
        let sigma = sigma_vi(&phi.try_value(&zero)?, &phi.try_jacobian(&zero)?, rho)?;
        let mut certified = BTreeMap::new();
        certified.insert("theta".to_string(), theta.certification);
        certified.insert("gamma".to_string(), gamma.certification);
        certified.insert("M".to_string(), theta.certification.max(gamma.certification));
        certified.insert("sigma".to_string(), Certification::Analytic);
        let mut report = ConstantsReport {
            mode: RadiusMode::Vi,
            rho,
            theta: theta.value,
            gamma: gamma.value,
            eta: None,
            delta: Some(sigma),
            m: Some(m),
            l: None,
            sigma: Some(sigma),
            r_max: rho,
            certified,
        };
        report.r_max = admissible_radius(RadiusMode::Vi, &report, rho)?;
        Ok(report)
    }

    /// Constants for the proximity-pair / best-approximation payoff with
    /// target superset `Y`.
    pub fn ba(f: &SmoothMap, y_set: &ConvexSet, opts: EstimateOptions) -> Result<Self> {
        let rho = f.rho();
        let sup_y = y_set
            .sup_norm()
            .ok_or_else(|| Error::invalid("Y must be bounded"))?;
        let theta = estimate_theta(f, opts.samples, opts.seed)?;
        let gamma = estimate_gamma(f, opts.samples, opts.seed)?;
        let eta = estimate_eta(f, opts.samples, opts.seed)?;
        let l = 2.0 * (eta.value + theta.value + gamma.value * (rho + sup_y));
        let zero = Vector::zeros(f.dimension());
        let sigma = sigma_ba(&f.try_value(&zero)?, &f.try_jacobian(&zero)?, y_set)?;
        let lcert = eta
            .certification
            .max(theta.certification)
            .max(gamma.certification);
        let mut certified = BTreeMap::new();
        certified.insert("theta".to_string(), theta.certification);
        certified.insert("gamma".to_string(), gamma.certification);
        certified.insert("eta".to_string(), eta.certification);
        certified.insert("L".to_string(), lcert);
        certified.insert("sigma".to_string(), Certification::Analytic);
        let mut report = ConstantsReport {
            mode: RadiusMode::Proximity,
            rho,
            theta: theta.value,
            gamma: gamma.value,
            eta: Some(eta.value),
            delta: Some(2.0 * sigma),
            m: None,
            l: Some(l),
            sigma: Some(sigma),
            r_max: rho,
            certified,
        };
        report.r_max = admissible_radius(RadiusMode::Proximity, &report, rho)?;
        Ok(report)
    }

    /// Constants for a general payoff on `B_ρ × Y`.
    ///
    /// `L` is the payoff's declared gradient Lipschitz constant; without one
    /// the payoff is only usable in heuristic mode with a sampled `L`.
    pub fn saddle(payoff: &Payoff, opts: EstimateOptions) -> Result<Self> {
        let rho = payoff.x_radius();
        let y_set = payoff.y_set();
        let l = match payoff.grad_lipschitz() {
            Some(b) => b,
            None => {
                // Lipschitz constant of x ↦ J′_x(x, y) at the sampled y's.
                let n = payoff.dimension();
                let mut rng = sampling::rng(opts.seed);
                let mut best = Bound::sampled(0.0);
                for _ in 0..8 {
                    let y = sampling::sample_set(&mut rng, y_set, n)?;
                    let b = estimate_lipschitz(
                        |x| payoff.grad_x(x, &y),
                        rho,
                        n,
                        opts.samples / 8 + 1,
                        opts.seed,
                    )?;
                    best.value = best.value.max(b.value);
                }
                best
            }
        };
        let delta = delta_const(payoff, y_set, opts.samples, opts.seed)?;
        let (theta, gamma) = match payoff.map() {
            Some(m) => (
                estimate_theta(m, opts.samples, opts.seed)?,
                estimate_gamma(m, opts.samples, opts.seed)?,
            ),
            None => (
                Bound::analytic(payoff.coupling().unwrap_or(0.0)),
                Bound::analytic(0.0),
            ),
        };
        let mut certified = BTreeMap::new();
        certified.insert("L".to_string(), l.certification);
        certified.insert("delta".to_string(), delta.certification);
        let mut report = ConstantsReport {
            mode: RadiusMode::General,
            rho,
            theta: theta.value,
            gamma: gamma.value,
            eta: None,
            delta: Some(delta.value),
            m: None,
            l: Some(l.value),
            sigma: None,
            r_max: rho,
            certified,
        };
        report.r_max = admissible_radius(RadiusMode::General, &report, rho)?;
        Ok(report)
    }
}

/// The admissible radius `min{ρ, δ/(2L)}`, `min{ρ, σ/(2M)}` or `min{ρ, σ/L}`.
///
/// A zero denominator with a positive numerator makes the bound vacuous and
/// returns `ρ`. A zero numerator violates the positivity hypothesis.
pub fn admissible_radius(mode: RadiusMode, report: &ConstantsReport, rho: f64) -> Result<f64> {
    let missing = |name: &str| Error::invalid(format!("constant {name} is required for {mode:?}"));
    let (num, den, label) = match mode {
        RadiusMode::General => (
            report.delta.ok_or_else(|| missing("delta"))?,
            2.0 * report.l.ok_or_else(|| missing("L"))?,
            "delta > 0",
        ),
        RadiusMode::Vi => (
            report.sigma.ok_or_else(|| missing("sigma"))?,
            2.0 * report.m.ok_or_else(|| missing("M"))?,
            "sigma > 0",
        ),
        RadiusMode::Proximity => (
            report.sigma.ok_or_else(|| missing("sigma"))?,
            report.l.ok_or_else(|| missing("L"))?,
            "sigma > 0",
        ),
    };
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid("rho must be positive"));
    }
    if !(num > ZERO_TOL) {
        return Err(Error::hypothesis(format!(
            "{label} violated: value {num:e}"
        )));
    }
    if den <= 0.0 {
        return Ok(rho);
    }
    Ok(rho.min(num / den))
}
