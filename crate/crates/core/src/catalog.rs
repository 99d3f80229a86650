//! `C^{1,1}` maps with known constants and the payoffs built from them.
//!
//! A [`SmoothMap`] is a value oracle plus a Jacobian oracle on `B_ρ`. The
//! catalog families (constant, affine, quadratic) carry closed-form constants:
//! `θ = sup‖Φ′‖`, `γ` the Lipschitz constant of `Φ′`, and `η` the Lipschitz
//! constant of `x ↦ x − Φ(x)`.
//!
//! A [`Payoff`] is a two-argument function `J(x, y)` with its gradient in `x`.
//! [`vi_payoff`] and [`ba_payoff`] realize the two constructions the solvers
//! need:
//!
//! * variational inequality: `J(x, y) = ⟨Φ(x), x − y⟩`,
//! * best approximation: `J(x, y) = ‖f(x) − x‖² − ‖f(x) − y‖²`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::op_norm;
use crate::error::{Error, Result};
use crate::hilbert::{same_dim, ConvexSet, Matrix, Vector};
use crate::sampling;

/// How far a reported constant can be trusted.
///
/// Ordered from strongest to weakest, so the certification of a derived
/// constant is the `max` of its ingredients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    Analytic,
    ConservativeBound,
    SampledLowerBound,
}

impl Certification {
    pub fn is_certified(self) -> bool {
        self != Certification::SampledLowerBound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub certification: Certification,
}

impl Bound {
    pub fn analytic(value: f64) -> Self {
        Bound {
            value,
            certification: Certification::Analytic,
        }
    }

    pub fn conservative(value: f64) -> Self {
        Bound {
            value,
            certification: Certification::ConservativeBound,
        }
    }

    pub fn sampled(value: f64) -> Self {
        Bound {
            value,
            certification: Certification::SampledLowerBound,
        }
    }
}

/// Declared constants of a map on its domain ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConstants {
    pub theta: Bound,
    pub gamma: Bound,
    pub eta: Option<Bound>,
}

/// Structure of a map, kept so that restrictions and shifts can recompute
/// closed-form constants.
#[derive(Clone, Debug)]
pub enum MapKind {
    Constant {
        c: Vector,
    },
    Affine {
        a: Matrix,
        b: Vector,
    },
    /// Component `i` is `(Ax + b)_i + xᵀ Q_i x`.
    Quadratic {
        a: Matrix,
        b: Vector,
        q: Vec<Matrix>,
    },
    Custom,
}

type ValueFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type JacobianFn = dyn Fn(&Vector) -> Matrix + Send + Sync;

#[derive(Clone)]
pub struct SmoothMap {
    dimension: usize,
    rho: f64,
    kind: MapKind,
    value: Arc<ValueFn>,
    jacobian: Arc<JacobianFn>,
    analytic: Option<AnalyticConstants>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("dimension", &self.dimension)
            .field("rho", &self.rho)
            .field("kind", &self.kind)
            .field("analytic", &self.analytic)
            .finish_non_exhaustive()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

fn check_square(a: &Matrix, n: usize, what: &str) -> Result<()> {
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::invalid(format!(
            "{what} must be {n}x{n}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// `Φ(x) = c`.
pub fn make_constant(c: Vector, rho: f64) -> Result<SmoothMap> {
    check_rho(rho)?;
    let n = c.len();
    if n == 0 || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("constant must be a finite vector of dimension >= 1"));
    }
    let value_c = c.clone();
    Ok(SmoothMap {
        dimension: n,
        rho,
        kind: MapKind::Constant { c },
        value: Arc::new(move |_| value_c.clone()),
        jacobian: Arc::new(move |_| Matrix::zeros(n, n)),
        analytic: Some(AnalyticConstants {
            theta: Bound::analytic(0.0),
            gamma: Bound::analytic(0.0),
            eta: Some(Bound::analytic(1.0)),
        }),
    })
}

/// `Φ(x) = Ax + b`.
pub fn make_affine(a: Matrix, b: Vector, rho: f64) -> Result<SmoothMap> {
    check_rho(rho)?;
    let n = b.len();
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    check_square(&a, n, "A")?;
    let theta = op_norm(&a)?;
    let eta = op_norm(&(Matrix::identity(n, n) - &a))?;
    let (va, vb, ja) = (a.clone(), b.clone(), a.clone());
    Ok(SmoothMap {
        dimension: n,
        rho,
        kind: MapKind::Affine { a, b },
        value: Arc::new(move |x| &va * x + &vb),
        jacobian: Arc::new(move |_| ja.clone()),
        analytic: Some(AnalyticConstants {
            theta: Bound::analytic(theta),
            gamma: Bound::analytic(0.0),
            eta: Some(Bound::analytic(eta)),
        }),
    })
}

/// Component `i` is `(Ax + b)_i + xᵀ Q_i x` with each `Q_i` symmetric.
///
/// With `s = (Σ_i ‖Q_i‖²)^{1/2}`: `γ = 2s`, `θ ≤ ‖A‖ + 2ρs` and
/// `η ≤ ‖I − A‖ + 2ρs`. These are upper bounds and are flagged as
/// conservative whenever some `Q_i` is nonzero.
pub fn make_quadratic(a: Matrix, b: Vector, q: Vec<Matrix>, rho: f64) -> Result<SmoothMap> {
    check_rho(rho)?;
    let n = b.len();
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    check_square(&a, n, "A")?;
    if q.len() != n {
        return Err(Error::invalid(format!(
            "need one Q_i per output component: expected {n}, got {}",
            q.len()
        )));
    }
    for (i, qi) in q.iter().enumerate() {
        check_square(qi, n, &format!("Q[{i}]"))?;
        let scale = qi.amax().max(1.0);
        if (qi - qi.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid(format!("Q[{i}] is not symmetric")));
        }
    }
    if q.iter().all(|qi| qi.iter().all(|v| *v == 0.0)) {
        let mut m = make_affine(a.clone(), b.clone(), rho)?;
        m.kind = MapKind::Quadratic { a, b, q };
        return Ok(m);
    }
    let s = q
        .iter()
        .map(|qi| op_norm(qi).map(|v| v * v))
        .sum::<Result<f64>>()?
        .sqrt();
    let theta = op_norm(&a)? + 2.0 * rho * s;
    let eta = op_norm(&(Matrix::identity(n, n) - &a))? + 2.0 * rho * s;
    let (va, vb, vq) = (a.clone(), b.clone(), q.clone());
    let (ja, jq) = (a.clone(), q.clone());
    Ok(SmoothMap {
        dimension: n,
        rho,
        kind: MapKind::Quadratic { a, b, q },
        value: Arc::new(move |x| {
            let mut out = &va * x + &vb;
            for (i, qi) in vq.iter().enumerate() {
                out[i] += x.dot(&(qi * x));
            }
            out
        }),
        jacobian: Arc::new(move |x| {
            let mut out = ja.clone();
            for (i, qi) in jq.iter().enumerate() {
                let row = qi * x * 2.0;
                for j in 0..row.len() {
                    out[(i, j)] += row[j];
                }
            }
            out
        }),
        analytic: Some(AnalyticConstants {
            theta: Bound::conservative(theta),
            gamma: Bound::conservative(2.0 * s),
            eta: Some(Bound::conservative(eta)),
        }),
    })
}

impl SmoothMap {
    /// A map given by user oracles. The oracles must be pure and callable
    /// concurrently.
    pub fn from_oracles<V, J>(
        dimension: usize,
        rho: f64,
        value: V,
        jacobian: J,
        analytic: Option<AnalyticConstants>,
    ) -> Result<Self>
    where
        V: Fn(&Vector) -> Vector + Send + Sync + 'static,
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        check_rho(rho)?;
        if dimension == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(SmoothMap {
            dimension,
            rho,
            kind: MapKind::Custom,
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
            analytic,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn analytic(&self) -> Option<&AnalyticConstants> {
        self.analytic.as_ref()
    }

    /// Replace (or drop) the declared constants.
    pub fn with_analytic(mut self, analytic: Option<AnalyticConstants>) -> Self {
        self.analytic = analytic;
        self
    }

    pub fn value(&self, x: &Vector) -> Vector {
        (self.value)(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        (self.jacobian)(x)
    }

    /// Checked evaluation: dimension and finiteness.
    pub fn try_value(&self, x: &Vector) -> Result<Vector> {
        self.check_arg(x)?;
        let v = self.value(x);
        if v.len() != self.dimension || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Certification(
                "map value is not a finite vector of the right dimension".into(),
            ));
        }
        Ok(v)
    }

    pub fn try_jacobian(&self, x: &Vector) -> Result<Matrix> {
        self.check_arg(x)?;
        let j = self.jacobian(x);
        if j.nrows() != self.dimension
            || j.ncols() != self.dimension
            || j.iter().any(|c| !c.is_finite())
        {
            return Err(Error::Certification(
                "map jacobian is not a finite square matrix of the right dimension".into(),
            ));
        }
        Ok(j)
    }

    fn check_arg(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// The same map on the smaller ball `B_r`, with constants recomputed for
    /// catalog families. Declared constants of custom maps stay valid since
    /// suprema over a sub-ball can only shrink.
    pub fn restrict(&self, r: f64) -> Result<SmoothMap> {
        check_rho(r)?;
        if r > self.rho * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "cannot restrict a map on B_{} to the larger ball B_{r}",
                self.rho
            )));
        }
        let r = r.min(self.rho);
        match &self.kind {
            MapKind::Quadratic { a, b, q } => {
                let m = make_quadratic(a.clone(), b.clone(), q.clone(), r)?;
                Ok(self.keep_declared(m))
            }
            _ => {
                let mut m = self.clone();
                m.rho = r;
                Ok(m)
            }
        }
    }

    /// Keep user-declared constants if they came from a config rather than the
    /// catalog formulas.
    fn keep_declared(&self, mut fresh: SmoothMap) -> SmoothMap {
        if let (Some(old), Some(new)) = (self.analytic, fresh.analytic) {
            fresh.analytic = Some(AnalyticConstants {
                theta: pick_tighter(old.theta, new.theta),
                gamma: pick_tighter(old.gamma, new.gamma),
                eta: match (old.eta, new.eta) {
                    (Some(o), Some(n)) => Some(pick_tighter(o, n)),
                    (o, n) => n.or(o),
                },
            });
        }
        fresh
    }

    /// `Φ − w`. Jacobians and all constants are unchanged.
    pub fn shifted(&self, w: &Vector) -> Result<SmoothMap> {
        same_dim(&Vector::zeros(self.dimension), w)?;
        let kind = match &self.kind {
            MapKind::Constant { c } => MapKind::Constant { c: c - w },
            MapKind::Affine { a, b } => MapKind::Affine {
                a: a.clone(),
                b: b - w,
            },
            MapKind::Quadratic { a, b, q } => MapKind::Quadratic {
                a: a.clone(),
                b: b - w,
                q: q.clone(),
            },
            MapKind::Custom => MapKind::Custom,
        };
        let inner = self.value.clone();
        let w = w.clone();
        Ok(SmoothMap {
            dimension: self.dimension,
            rho: self.rho,
            kind,
            value: Arc::new(move |x| inner(x) - &w),
            jacobian: self.jacobian.clone(),
            analytic: self.analytic,
        })
    }

    /// Largest relative error between the Jacobian and central finite
    /// differences of the value over `points` random interior points
    /// (step `1e-5·ρ`).
    pub fn jacobian_fd_error(&self, points: usize, seed: u64) -> Result<f64> {
        let mut rng = sampling::rng(seed);
        let h = 1e-5 * self.rho;
        let n = self.dimension;
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let x = sampling::uniform_ball(&mut rng, n, self.rho * (1.0 - 1e-4));
            let jac = self.try_jacobian(&x)?;
            let mut fd = Matrix::zeros(n, n);
            for j in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let col = (self.try_value(&xp)? - self.try_value(&xm)?) / (2.0 * h);
                fd.set_column(j, &col);
            }
            worst = worst.max((fd - &jac).norm() / jac.norm().max(1.0));
        }
        Ok(worst)
    }
}

fn pick_tighter(a: Bound, b: Bound) -> Bound {
    match a.certification.cmp(&b.certification) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if a.value <= b.value {
                a
            } else {
                b
            }
        }
    }
}

type PayoffValueFn = dyn Fn(&Vector, &Vector) -> f64 + Send + Sync;
type PayoffGradFn = dyn Fn(&Vector, &Vector) -> Vector + Send + Sync;

/// Oracles of a user-defined payoff.
#[derive(Clone)]
pub struct CustomPayoff {
    pub value: Arc<PayoffValueFn>,
    pub grad_x: Arc<PayoffGradFn>,
    pub grad_y: Option<Arc<PayoffGradFn>>,
}

#[derive(Clone)]
pub enum PayoffKind {
    /// `⟨Φ(x), x − y⟩`.
    Vi(SmoothMap),
    /// `‖f(x) − x‖² − ‖f(x) − y‖²`.
    Ba(SmoothMap),
    /// `⟨c, x⟩ + ⟨x, B y⟩`.
    Bilinear { c: Vector, b: Matrix },
    Custom(CustomPayoff),
}

impl fmt::Debug for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffKind::Vi(m) => f.debug_tuple("Vi").field(m).finish(),
            PayoffKind::Ba(m) => f.debug_tuple("Ba").field(m).finish(),
            PayoffKind::Bilinear { c, b } => f
                .debug_struct("Bilinear")
                .field("c", c)
                .field("b", b)
                .finish(),
            PayoffKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// A payoff `J : B_ρ × Y → ℝ`, `C¹` in `x` with Lipschitz gradient and concave
/// in `y`.
#[derive(Clone, Debug)]
pub struct Payoff {
    dimension: usize,
    x_radius: f64,
    y_set: ConvexSet,
    kind: PayoffKind,
    grad_lipschitz: Option<Bound>,
}

/// `J(x, y) = ⟨Φ(x), x − y⟩` on `B_ρ × B_ρ`.
///
/// `J′_x(x, y) = Φ′(x)ᵀ(x − y) + Φ(x)`, Lipschitz in `x` with constant
/// `M = 2(θ + ργ)`.
pub fn vi_payoff(phi: &SmoothMap) -> Result<Payoff> {
    let grad_lipschitz = phi.analytic.map(|k| Bound {
        value: 2.0 * (k.theta.value + phi.rho * k.gamma.value),
        certification: k.theta.certification.max(k.gamma.certification),
    });
    Ok(Payoff {
        dimension: phi.dimension,
        x_radius: phi.rho,
        y_set: ConvexSet::ball(phi.rho)?,
        kind: PayoffKind::Vi(phi.clone()),
        grad_lipschitz,
    })
}

/// `J(x, y) = ‖f(x) − x‖² − ‖f(x) − y‖²` on `B_ρ × Y`.
///
/// `J′_x(x, y) = 2(x − f(x)) − 2f′(x)ᵀ(x − y)`, Lipschitz in `x` with constant
/// `L = 2(η + θ + γ(ρ + sup_{y∈Y}‖y‖))`.
pub fn ba_payoff(f: &SmoothMap, y_set: &ConvexSet) -> Result<Payoff> {
    y_set.check_dimension(f.dimension)?;
    let sup_y = y_set.sup_norm().ok_or_else(|| {
        Error::invalid("Y must be bounded: oracle sets need a declared norm bound")
    })?;
    let grad_lipschitz = f.analytic.and_then(|k| {
        k.eta.map(|eta| Bound {
            value: 2.0 * (eta.value + k.theta.value + k.gamma.value * (f.rho + sup_y)),
            certification: eta
                .certification
                .max(k.theta.certification)
                .max(k.gamma.certification),
        })
    });
    Ok(Payoff {
        dimension: f.dimension,
        x_radius: f.rho,
        y_set: y_set.clone(),
        kind: PayoffKind::Ba(f.clone()),
        grad_lipschitz,
    })
}

/// `J(x, y) = ⟨c, x⟩ + ⟨x, B y⟩`; `B = 0` gives the linear payoff `⟨c, x⟩`.
pub fn bilinear_payoff(c: Vector, b: Matrix, rho: f64, y_set: &ConvexSet) -> Result<Payoff> {
    check_rho(rho)?;
    let n = c.len();
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    check_square(&b, n, "B")?;
    y_set.check_dimension(n)?;
    Ok(Payoff {
        dimension: n,
        x_radius: rho,
        y_set: y_set.clone(),
        kind: PayoffKind::Bilinear { c, b },
        grad_lipschitz: Some(Bound::analytic(0.0)),
    })
}

impl Payoff {
    pub fn custom(
        dimension: usize,
        x_radius: f64,
        y_set: &ConvexSet,
        oracles: CustomPayoff,
        grad_lipschitz: Option<Bound>,
    ) -> Result<Self> {
        check_rho(x_radius)?;
        y_set.check_dimension(dimension)?;
        Ok(Payoff {
            dimension,
            x_radius,
            y_set: y_set.clone(),
            kind: PayoffKind::Custom(oracles),
            grad_lipschitz,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn x_radius(&self) -> f64 {
        self.x_radius
    }

    pub fn y_set(&self) -> &ConvexSet {
        &self.y_set
    }

    pub fn kind(&self) -> &PayoffKind {
        &self.kind
    }

    pub fn grad_lipschitz(&self) -> Option<Bound> {
        self.grad_lipschitz
    }

    pub fn with_grad_lipschitz(mut self, bound: Option<Bound>) -> Self {
        self.grad_lipschitz = bound;
        self
    }

    /// The underlying map for the VI and BA constructions.
    pub fn map(&self) -> Option<&SmoothMap> {
        match &self.kind {
            PayoffKind::Vi(m) | PayoffKind::Ba(m) => Some(m),
            _ => None,
        }
    }

    pub fn value(&self, x: &Vector, y: &Vector) -> f64 {
        match &self.kind {
            PayoffKind::Vi(phi) => phi.value(x).dot(&(x - y)),
            PayoffKind::Ba(f) => {
                let fx = f.value(x);
                (&fx - x).norm_squared() - (&fx - y).norm_squared()
            }
            PayoffKind::Bilinear { c, b } => c.dot(x) + x.dot(&(b * y)),
            PayoffKind::Custom(o) => (o.value)(x, y),
        }
    }

    pub fn grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        match &self.kind {
            PayoffKind::Vi(phi) => phi.jacobian(x).tr_mul(&(x - y)) + phi.value(x),
            PayoffKind::Ba(f) => {
                let fx = f.value(x);
                (x - &fx) * 2.0 - f.jacobian(x).tr_mul(&(x - y)) * 2.0
            }
            PayoffKind::Bilinear { c, b } => c + b * y,
            PayoffKind::Custom(o) => (o.grad_x)(x, y),
        }
    }

    /// Whether [`Payoff::grad_y`] is exact rather than a finite difference.
    pub fn has_analytic_grad_y(&self) -> bool {
        match &self.kind {
            PayoffKind::Custom(o) => o.grad_y.is_some(),
            _ => true,
        }
    }

    /// Gradient in `y`: analytic for the catalog payoffs, central finite
    /// differences with step `1e-6·diam(Y)` otherwise.
    pub fn grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        match &self.kind {
            PayoffKind::Vi(phi) => -phi.value(x),
            PayoffKind::Ba(f) => (f.value(x) - y) * 2.0,
            PayoffKind::Bilinear { b, .. } => b.tr_mul(x),
            PayoffKind::Custom(o) => match &o.grad_y {
                Some(g) => g(x, y),
                None => {
                    let h = 1e-6 * self.y_set.diameter().unwrap_or(1.0).max(1e-12);
                    Vector::from_fn(y.len(), |i, _| {
                        let mut yp = y.clone();
                        let mut ym = y.clone();
                        yp[i] += h;
                        ym[i] -= h;
                        ((o.value)(x, &yp) - (o.value)(x, &ym)) / (2.0 * h)
                    })
                }
            },
        }
    }

    /// `J(x, ·)` with everything that depends only on `x` evaluated once.
    pub fn section(&self, x: &Vector) -> Box<dyn Fn(&Vector) -> f64 + Send + Sync + '_> {
        match &self.kind {
            PayoffKind::Vi(phi) => {
                let p = phi.value(x);
                let px = p.dot(x);
                Box::new(move |y| px - p.dot(y))
            }
            PayoffKind::Ba(f) => {
                let fx = f.value(x);
                let base = (&fx - x).norm_squared();
                Box::new(move |y| base - fx.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            }
            PayoffKind::Bilinear { c, b } => {
                let cx = c.dot(x);
                let bx = b.tr_mul(x);
                Box::new(move |y| cx + bx.dot(y))
            }
            PayoffKind::Custom(o) => {
                let x = x.clone();
                Box::new(move |y| (o.value)(&x, y))
            }
        }
    }

    /// True when `J` does not depend on `y`, so `y*` is not unique.
    pub fn is_y_independent(&self) -> bool {
        match &self.kind {
            PayoffKind::Bilinear { b, .. } => b.iter().all(|v| *v == 0.0),
            _ => false,
        }
    }

    /// `(b, M)` with `J′_x(0, y) = b + M y`, for the payoffs where the gradient
    /// at the origin is affine in `y`.
    pub fn grad_x_at_origin_affine(&self) -> Option<(Vector, Matrix)> {
        let zero = Vector::zeros(self.dimension);
        match &self.kind {
            PayoffKind::Vi(phi) => Some((phi.value(&zero), -phi.jacobian(&zero).transpose())),
            PayoffKind::Ba(f) => Some((f.value(&zero) * -2.0, f.jacobian(&zero).transpose() * 2.0)),
            PayoffKind::Bilinear { c, b } => Some((c.clone(), b.clone())),
            PayoffKind::Custom(_) => None,
        }
    }

    /// Bound on how strongly `∇_x J` depends on `y` and `∇_y J` on `x`, when
    /// known from the construction.
    pub fn coupling(&self) -> Option<f64> {
        match &self.kind {
            PayoffKind::Vi(m) => m.analytic.map(|k| k.theta.value),
            PayoffKind::Ba(m) => m.analytic.map(|k| 2.0 * k.theta.value),
            PayoffKind::Bilinear { b, .. } => op_norm(b).ok(),
            PayoffKind::Custom(_) => None,
        }
    }

    /// Lipschitz constant of `∇_y J` in `y`.
    pub fn y_curvature(&self) -> Option<f64> {
        match &self.kind {
            PayoffKind::Vi(_) | PayoffKind::Bilinear { .. } => Some(0.0),
            PayoffKind::Ba(_) => Some(2.0),
            PayoffKind::Custom(_) => None,
        }
    }

    /// Largest relative error of `grad_x` (and `grad_y`) against central
    /// finite differences of the value on `pairs` random pairs of
    /// `B_ρ × Y`.
    pub fn gradient_fd_error(&self, pairs: usize, seed: u64) -> Result<GradientCheck> {
        let mut rng = sampling::rng(seed);
        let n = self.dimension;
        let hx = 1e-5 * self.x_radius;
        let hy = 1e-5 * self.y_set.diameter().unwrap_or(1.0).max(1e-12);
        let mut out = GradientCheck::default();
        for _ in 0..pairs {
            let x = sampling::uniform_ball(&mut rng, n, self.x_radius * (1.0 - 1e-4));
            let y = sampling::sample_set(&mut rng, &self.y_set, n)?;
            let gx = self.grad_x(&x, &y);
            let fdx = central_diff(n, hx, |i, h| {
                let mut xs = x.clone();
                xs[i] += h;
                self.value(&xs, &y)
            });
            out.grad_x = out.grad_x.max((fdx - &gx).norm() / gx.norm().max(1.0));
            let gy = self.grad_y(&x, &y);
            let fdy = central_diff(n, hy, |i, h| {
                let mut ys = y.clone();
                ys[i] += h;
                self.value(&x, &ys)
            });
            out.grad_y = out.grad_y.max((fdy - &gy).norm() / gy.norm().max(1.0));
        }
        Ok(out)
    }

    /// Smallest midpoint-concavity slack `J(x, (a+b)/2) − (J(x,a) + J(x,b))/2`
    /// over `triples` random triples; concavity means it is `≥ 0`.
    pub fn concavity_slack(&self, triples: usize, seed: u64) -> Result<f64> {
        let mut rng = sampling::rng(seed);
        let n = self.dimension;
        let mut worst = f64::INFINITY;
        for _ in 0..triples {
            let x = sampling::uniform_ball(&mut rng, n, self.x_radius);
            let a = sampling::sample_set(&mut rng, &self.y_set, n)?;
            let b = sampling::sample_set(&mut rng, &self.y_set, n)?;
            let mid = (&a + &b) * 0.5;
            let slack = self.value(&x, &mid) - 0.5 * (self.value(&x, &a) + self.value(&x, &b));
            worst = worst.min(slack);
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradientCheck {
    pub grad_x: f64,
    pub grad_y: f64,
}

fn central_diff(n: usize, h: f64, eval: impl Fn(usize, f64) -> f64) -> Vector {
    Vector::from_fn(n, |i, _| (eval(i, h) - eval(i, -h)) / (2.0 * h))
}
