//! Euclidean `ℝⁿ` primitives: points, balls centred at the origin, convex sets
//! and the projections onto them.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Absolute tolerance used for membership and idempotence comparisons.
pub const TOL: f64 = 1e-10;

/// A point of `ℝⁿ` with finite coordinates and `n ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vector);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_vector(Vector::from_vec(coords))
    }

    pub fn from_vector(v: Vector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("point must have dimension at least 1"));
        }
        if let Some(i) = v.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("coordinate {i} is not finite")));
        }
        Ok(Point(v))
    }

    pub fn zeros(n: usize) -> Self {
        Point(Vector::zeros(n))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn into_vector(self) -> Vector {
        self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }
}

impl Deref for Point {
    type Target = Vector;

    fn deref(&self) -> &Vector {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.to_vec()
    }
}

pub(crate) fn same_dim(a: &Vector, b: &Vector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub fn inner(a: &Vector, b: &Vector) -> Result<f64> {
    same_dim(a, b)?;
    Ok(a.dot(b))
}

/// Closed ball `B_r = {x : ‖x‖ ≤ r}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    radius: f64,
}

impl Ball {
    pub fn new(radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Ball { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, z: &Vector) -> bool {
        z.norm() <= self.radius + TOL
    }

    /// Membership in the sphere `S_r` up to `tol`.
    pub fn on_sphere(&self, z: &Vector, tol: f64) -> bool {
        (z.norm() - self.radius).abs() <= tol
    }

    pub fn project(&self, z: &Vector) -> Vector {
        project_ball_unchecked(z, self.radius)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

pub(crate) fn project_ball_unchecked(z: &Vector, r: f64) -> Vector {
    let n = z.norm();
    if n <= r {
        z.clone()
    } else {
        z * (r / n)
    }
}

pub fn project_ball(z: &Vector, r: f64) -> Result<Vector> {
    check_radius(r)?;
    Ok(project_ball_unchecked(z, r))
}

/// `dist(p, B_r) = max(0, ‖p‖ − r)`.
pub fn dist_ball(p: &Vector, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok((p.norm() - r).max(0.0))
}

type ProjectionFn = dyn Fn(&Vector) -> Vector + Send + Sync;

/// A user-supplied projection onto a closed convex set.
#[derive(Clone)]
pub struct ProjectionOracle {
    dimension: usize,
    project: Arc<ProjectionFn>,
    bound: Option<f64>,
}

impl ProjectionOracle {
    /// `bound`, when given, must satisfy `sup_{y∈C} ‖y‖ ≤ bound`.
    pub fn new<F>(dimension: usize, bound: Option<f64>, project: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        ProjectionOracle {
            dimension,
            project: Arc::new(project),
            bound,
        }
    }
}

impl fmt::Debug for ProjectionOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProjectionOracle")
            .field("dimension", &self.dimension)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

/// Closed convex sets the solvers can project onto.
#[derive(Clone, Debug)]
pub enum ConvexSet {
    /// Ball of the given radius centred at the origin.
    Ball(Ball),
    Box { lower: Vector, upper: Vector },
    Oracle(ProjectionOracle),
}

impl ConvexSet {
    pub fn ball(radius: f64) -> Result<Self> {
        Ok(ConvexSet::Ball(Ball::new(radius)?))
    }

    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        same_dim(&lower, &upper)?;
        if lower.is_empty() {
            return Err(Error::invalid("box must have dimension at least 1"));
        }
        for i in 0..lower.len() {
            if !(lower[i].is_finite() && upper[i].is_finite()) || lower[i] > upper[i] {
                return Err(Error::invalid(format!(
                    "box bounds must be finite with lower <= upper (axis {i})"
                )));
            }
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn oracle(oracle: ProjectionOracle) -> Self {
        ConvexSet::Oracle(oracle)
    }

    /// Fixed dimension of the set, if it has one (balls live in every `ℝⁿ`).
    pub fn dimension(&self) -> Option<usize> {
        match self {
            ConvexSet::Ball(_) => None,
            ConvexSet::Box { lower, .. } => Some(lower.len()),
            ConvexSet::Oracle(o) => Some(o.dimension),
        }
    }

    pub fn check_dimension(&self, n: usize) -> Result<()> {
        match self.dimension() {
            Some(d) if d != n => Err(Error::DimensionMismatch {
                expected: n,
                found: d,
            }),
            _ => Ok(()),
        }
    }

    /// `sup_{y∈C} ‖y‖`, exact for balls and boxes, declared for oracles.
    pub fn sup_norm(&self) -> Option<f64> {
        match self {
            ConvexSet::Ball(b) => Some(b.radius()),
            ConvexSet::Box { lower, upper } => Some(
                lower
                    .iter()
                    .zip(upper.iter())
                    .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
            ConvexSet::Oracle(o) => o.bound,
        }
    }

    /// Diameter upper bound, used to scale finite-difference steps.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            ConvexSet::Ball(b) => Some(2.0 * b.radius()),
            ConvexSet::Box { lower, upper } => Some((upper - lower).norm()),
            ConvexSet::Oracle(o) => o.bound.map(|b| 2.0 * b),
        }
    }

    pub fn project(&self, z: &Vector) -> Result<Vector> {
        if let Some(d) = self.dimension() {
            if d != z.len() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: z.len(),
                });
            }
        }
        match self {
            ConvexSet::Ball(b) => Ok(b.project(z)),
            ConvexSet::Box { lower, upper } => Ok(clamp(z, lower, upper)),
            ConvexSet::Oracle(o) => {
                let p = (o.project)(z);
                same_dim(z, &p)?;
                let pp = (o.project)(&p);
                let drift = (&pp - &p).norm();
                if !(drift <= TOL) {
                    return Err(Error::Certification(format!(
                        "projection oracle is not idempotent (drift {drift:e})"
                    )));
                }
                Ok(p)
            }
        }
    }

    pub fn contains(&self, z: &Vector, tol: f64) -> bool {
        match self {
            ConvexSet::Ball(b) => z.norm() <= b.radius() + tol,
            ConvexSet::Box { lower, upper } => {
                z.len() == lower.len()
                    && (0..z.len()).all(|i| z[i] >= lower[i] - tol && z[i] <= upper[i] + tol)
            }
            ConvexSet::Oracle(o) => match self.project(z) {
                Ok(p) => z.len() == o.dimension && (p - z).norm() <= tol,
                Err(_) => false,
            },
        }
    }
}

fn clamp(z: &Vector, lower: &Vector, upper: &Vector) -> Vector {
    Vector::from_iterator(
        z.len(),
        z.iter()
            .zip(lower.iter().zip(upper.iter()))
            .map(|(v, (l, u))| v.clamp(*l, *u)),
    )
}

/// Nearest point of `set` to `z`.
pub fn project_set(z: &Vector, set: &ConvexSet) -> Result<Vector> {
    set.project(z)
}

/// `dist(p, C) = ‖p − P_C(p)‖`.
pub fn dist_set(p: &Vector, set: &ConvexSet) -> Result<f64> {
    Ok((p - set.project(p)?).norm())
}
