//! JSON run configurations.
//!
//! Parsing is strict: unknown keys are rejected and every error names the
//! offending field path (`problem.rho`, `tolerances.tol`, ...). The problem
//! block accepts a flat form
//!
//! ```json
//! {"kind": "affine", "A": [[1, 0], [0, 1]], "b": [2, 0], "rho": 1.0}
//! ```
//!
//! and a nested form `{"dimension": 2, "rho": 1.0, "map": {"kind": ...}}`;
//! configs are echoed back in the nested form.

use serde::{Deserialize, Serialize};

use crate::catalog::{
    bilinear_payoff, make_affine, make_constant, make_quadratic, AnalyticConstants, Bound, Payoff, SmoothMap,
};
use crate::error::{Error, Result};
use crate::hilbert::{ConvexSet, Matrix, Vector};
use crate::saddle::SolveOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    Saddle,
    Vi,
    ViShifted,
    BestApprox,
    ProxPair,
    SmallRadius,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Saddle => "saddle",
            Command::Vi => "vi",
            Command::ViShifted => "vi-shifted",
            Command::BestApprox => "best-approx",
            Command::ProxPair => "prox-pair",
            Command::SmallRadius => "small-radius",
            Command::Verify => "verify",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::config("command", format!("unknown command `{s}`")))
    }
}

/// Which payoff construction a map feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Application {
    Vi,
    Ba,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapSpec {
    Constant {
        c: Vec<f64>,
    },
    Affine {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Quadratic {
        #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
        a: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        #[serde(rename = "Q")]
        q: Vec<Vec<Vec<f64>>>,
    },
    /// `J(x, y) = ⟨c, x⟩ + ⟨x, By⟩`; only meaningful for `saddle`.
    Bilinear {
        c: Vec<f64>,
        #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<Vec<f64>>>,
    },
}

/// User-declared constants; treated as analytic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredConstants {
    pub theta: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemRepr", into = "ProblemRepr")]
pub struct ProblemSpec {
    pub dimension: usize,
    pub rho: f64,
    pub map: MapSpec,
    pub analytic_constants: Option<DeclaredConstants>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dimension: Option<usize>,
    rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    map: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    q: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    bmat: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    analytic_constants: Option<DeclaredConstants>,
}

impl TryFrom<ProblemRepr> for ProblemSpec {
    type Error = String;

    fn try_from(p: ProblemRepr) -> std::result::Result<Self, String> {
        let flat = p.kind.is_some() || p.c.is_some() || p.a.is_some() || p.b.is_some() || p.q.is_some() || p.bmat.is_some();
        let map = match (p.map, flat) {
            (Some(_), true) => return Err("give either `map` or flat map fields, not both".into()),
            (Some(m), false) => m,
            (None, false) => return Err("missing map: expected `kind` or `map`".into()),
            (None, true) => {
                let kind = p.kind.ok_or("missing field `kind`")?;
                let unexpected = |name: &str| format!("field `{name}` is not used by kind `{kind}`");
                match kind.as_str() {
                    "constant" => {
                        if p.a.is_some() || p.b.is_some() || p.q.is_some() || p.bmat.is_some() {
                            return Err(unexpected("A/b/Q/B"));
                        }
                        MapSpec::Constant {
                            c: p.c.ok_or("missing field `c`")?,
                        }
                    }
                    "affine" => {
                        if p.c.is_some() || p.q.is_some() || p.bmat.is_some() {
                            return Err(unexpected("c/Q/B"));
                        }
                        MapSpec::Affine {
                            a: p.a.ok_or("missing field `A`")?,
                            b: p.b.ok_or("missing field `b`")?,
                        }
                    }
                    "quadratic" => {
                        if p.c.is_some() || p.bmat.is_some() {
                            return Err(unexpected("c/B"));
                        }
                        MapSpec::Quadratic {
                            a: p.a,
                            b: p.b,
                            q: p.q.ok_or("missing field `Q`")?,
                        }
                    }
                    "bilinear" => {
                        if p.a.is_some() || p.b.is_some() || p.q.is_some() {
                            return Err(unexpected("A/b/Q"));
                        }
                        MapSpec::Bilinear {
                            c: p.c.ok_or("missing field `c`")?,
                            b: p.bmat,
                        }
                    }
                    other => {
                        return Err(format!(
                            "unknown variant `{other}`, expected one of `constant`, `affine`, `quadratic`, `bilinear`"
                        ))
                    }
                }
            }
        };
        let dimension = match &map {
            MapSpec::Constant { c } | MapSpec::Bilinear { c, .. } => c.len(),
            MapSpec::Affine { b, .. } => b.len(),
            MapSpec::Quadratic { q, b, a } => b
                .as_ref()
                .map(Vec::len)
                .or_else(|| a.as_ref().map(Vec::len))
                .unwrap_or(q.len()),
        };
        if let Some(d) = p.dimension {
            if d != dimension {
                return Err(format!("dimension mismatch: `dimension` is {d} but the map has dimension {dimension}"));
            }
        }
        Ok(ProblemSpec {
            dimension,
            rho: p.rho,
            map,
            analytic_constants: p.analytic_constants,
        })
    }
}

impl From<ProblemSpec> for ProblemRepr {
    fn from(p: ProblemSpec) -> Self {
        ProblemRepr {
            dimension: Some(p.dimension),
            rho: p.rho,
            map: Some(p.map),
            analytic_constants: p.analytic_constants,
            ..ProblemRepr::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SetSpec {
    Ball { radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl SetSpec {
    pub fn build(&self) -> Result<ConvexSet> {
        match self {
            SetSpec::Ball { radius } => ConvexSet::ball(*radius),
            SetSpec::Box { lower, upper } => {
                ConvexSet::boxed(Vector::from_column_slice(lower), Vector::from_column_slice(upper))
            }
        }
    }

    fn dimension(&self) -> Option<usize> {
        match self {
            SetSpec::Ball { .. } => None,
            SetSpec::Box { lower, .. } => Some(lower.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tol: f64,
    pub max_iters: usize,
    pub strict_margin: f64,
    pub exclusion: f64,
    pub samples: usize,
    pub constant_samples: usize,
    pub starts: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = SolveOptions::default();
        Tolerances {
            tol: d.tol,
            max_iters: d.max_iters,
            strict_margin: d.strict_margin,
            exclusion: d.exclusion,
            samples: d.samples,
            constant_samples: 1000,
            starts: d.starts,
        }
    }
}

fn default_epsilon() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub problem: ProblemSpec,
    /// Payoff fed by the map (`constants`, `saddle`, `small-radius`);
    /// bilinear problems ignore it.
    #[serde(default, alias = "application", skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Application>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_set: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_set: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub heuristic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

fn finite(path: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::config(path, "entries must be finite"))
    }
}

fn check_len(path: &str, xs: &[f64], n: usize) -> Result<()> {
    finite(path, xs)?;
    if xs.len() != n {
        return Err(Error::config(path, format!("dimension mismatch: expected {n} entries, found {}", xs.len())));
    }
    Ok(())
}

fn matrix(path: &str, rows: &[Vec<f64>], n: usize) -> Result<Matrix> {
    if rows.len() != n {
        return Err(Error::config(path, format!("dimension mismatch: expected {n} rows, found {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        check_len(&format!("{path}[{i}]"), row, n)?;
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.problem.dimension;
        if n == 0 {
            return Err(Error::config("problem.dimension", "must be at least 1"));
        }
        positive("problem.rho", self.problem.rho)?;
        self.problem.check_shapes()?;
        if let Some(k) = &self.problem.analytic_constants {
            for (name, v) in [("theta", Some(k.theta)), ("gamma", Some(k.gamma)), ("eta", k.eta)] {
                if let Some(v) = v {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(Error::config(
                            format!("problem.analytic_constants.{name}"),
                            format!("must be nonnegative, got {v}"),
                        ));
                    }
                }
            }
        }
        for (path, set) in [("y_set", &self.y_set), ("t_set", &self.t_set)] {
            if let Some(s) = set {
                if let Some(d) = s.dimension() {
                    if d != n {
                        return Err(Error::config(path, format!("dimension mismatch: expected {n}, found {d}")));
                    }
                }
                if let SetSpec::Box { lower, upper } = s {
                    check_len(&format!("{path}.upper"), upper, lower.len())?;
                }
                s.build().map_err(|e| Error::config(path, e.to_string()))?;
            }
        }
        if let Some(w) = &self.w {
            check_len("w", w, n)?;
        }
        if let Some(r) = self.r {
            positive("r", r)?;
            if r > self.problem.rho * (1.0 + 1e-12) {
                return Err(Error::config("r", format!("must not exceed problem.rho = {}", self.problem.rho)));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        let t = &self.tolerances;
        positive("tolerances.tol", t.tol)?;
        positive("tolerances.exclusion", t.exclusion)?;
        if !(t.strict_margin.is_finite() && t.strict_margin >= 0.0) {
            return Err(Error::config("tolerances.strict_margin", "must be nonnegative"));
        }
        for (path, v) in [
            ("tolerances.max_iters", t.max_iters),
            ("tolerances.samples", t.samples),
            ("tolerances.constant_samples", t.constant_samples),
        ] {
            if v == 0 {
                return Err(Error::config(path, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        let t = &self.tolerances;
        SolveOptions {
            tol: t.tol,
            max_iters: t.max_iters,
            strict_margin: t.strict_margin,
            exclusion: t.exclusion,
            samples: t.samples,
            starts: t.starts,
            seed: self.seed,
            heuristic: self.heuristic,
        }
    }

    pub fn estimate_options(&self) -> crate::constants::EstimateOptions {
        crate::constants::EstimateOptions {
            samples: self.tolerances.constant_samples,
            seed: self.seed,
        }
    }
}

impl ProblemSpec {
    fn check_shapes(&self) -> Result<()> {
        let n = self.dimension;
        match &self.map {
            MapSpec::Constant { c } => check_len("problem.c", c, n),
            MapSpec::Affine { a, b } => {
                matrix("problem.A", a, n)?;
                check_len("problem.b", b, n)
            }
            MapSpec::Quadratic { a, b, q } => {
                if let Some(a) = a {
                    matrix("problem.A", a, n)?;
                }
                if let Some(b) = b {
                    check_len("problem.b", b, n)?;
                }
                if q.len() != n {
                    return Err(Error::config(
                        "problem.Q",
                        format!("dimension mismatch: expected {n} matrices, found {}", q.len()),
                    ));
                }
                for (i, qi) in q.iter().enumerate() {
                    let m = matrix(&format!("problem.Q[{i}]"), qi, n)?;
                    if (&m - m.transpose()).amax() > 0.0 {
                        return Err(Error::config(format!("problem.Q[{i}]"), "must be symmetric"));
                    }
                }
                Ok(())
            }
            MapSpec::Bilinear { c, b } => {
                check_len("problem.c", c, n)?;
                if let Some(b) = b {
                    matrix("problem.B", b, n)?;
                }
                Ok(())
            }
        }
    }

    pub fn is_bilinear(&self) -> bool {
        matches!(self.map, MapSpec::Bilinear { .. })
    }

    /// The catalog map, carrying any declared constants.
    pub fn smooth_map(&self) -> Result<SmoothMap> {
        let n = self.dimension;
        let rho = self.rho;
        let vec = |v: &[f64]| Vector::from_column_slice(v);
        let mat = |m: &[Vec<f64>]| Matrix::from_fn(n, n, |i, j| m[i][j]);
        let map = match &self.map {
            MapSpec::Constant { c } => make_constant(vec(c), rho)?,
            MapSpec::Affine { a, b } => make_affine(mat(a), vec(b), rho)?,
            MapSpec::Quadratic { a, b, q } => make_quadratic(
                a.as_deref().map_or_else(|| Matrix::zeros(n, n), mat),
                b.as_deref().map_or_else(|| Vector::zeros(n), vec),
                q.iter().map(|qi| mat(qi)).collect(),
                rho,
            )?,
            MapSpec::Bilinear { .. } => {
                return Err(Error::config("problem.kind", "a bilinear payoff is not a map; use the saddle command"))
            }
        };
        Ok(match self.analytic_constants {
            Some(k) => map.with_analytic(Some(AnalyticConstants {
                theta: Bound::analytic(k.theta),
                gamma: Bound::analytic(k.gamma),
                eta: k.eta.map(Bound::analytic),
            })),
            None => map,
        })
    }

    /// `(c, B)` of a bilinear problem.
    pub fn bilinear_parts(&self) -> Option<(Vector, Matrix)> {
        let n = self.dimension;
        match &self.map {
            MapSpec::Bilinear { c, b } => Some((
                Vector::from_column_slice(c),
                b.as_ref()
                    .map_or_else(|| Matrix::zeros(n, n), |m| Matrix::from_fn(n, n, |i, j| m[i][j])),
            )),
            _ => None,
        }
    }

    pub fn bilinear_payoff(&self, y_set: &ConvexSet) -> Result<Payoff> {
        let (c, b) = self
            .bilinear_parts()
            .ok_or_else(|| Error::invalid("problem is not bilinear"))?;
        bilinear_payoff(c, b, self.rho, y_set)
    }
}
