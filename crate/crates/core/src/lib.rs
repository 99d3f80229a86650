//! Saddle points on small balls and their applications.
//!
//! Finite-dimensional toolkit built around a regularized convex–concave
//! saddle problem on `B_r × T`:
//!
//! * [`hilbert`]: vectors, balls, convex sets and projections in `ℝⁿ`.
//! * [`catalog`]: `C^{1,1}` maps with known constants and the two payoff
//!   constructions (variational inequality, best approximation).
//! * [`constants`]: operator norms, Lipschitz estimates, `σ`, `δ` and the
//!   admissible radius.
//! * [`saddle`]: extragradient solver and sampled saddle-inequality checks.
//! * [`vi`] and [`ba`]: sphere-localized solutions of the variational
//!   inequality and the best-approximation problem, with certificates.
//! * [`oracle`]: naive brute-force oracles used to cross-check the solvers.
//! * [`config`], [`certificate`], [`runner`]: the JSON front end shared by the
//!   `ballsaddle` binary and the Python bindings.

pub mod ba;
pub mod catalog;
pub mod certificate;
pub mod check;
pub mod config;
pub mod constants;
pub mod error;
pub mod hilbert;
pub mod oracle;
pub mod runner;
pub mod saddle;
mod sampling;
pub mod vi;

pub use error::{Error, Result};
pub use hilbert::{ConvexSet, Matrix, Point, Vector};
