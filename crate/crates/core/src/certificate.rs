//! Certificate documents.
//!
//! A certificate embeds the normalized config, the constants, the solution and
//! every check, so that [`crate::runner::verify`] can audit it without solving
//! again. Serialization is deterministic; only `wall_time` varies between
//! identical runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ba::BaCertificate;
use crate::check::{CheckOutcome, RunMode};
use crate::config::{Command, RunConfig};
use crate::constants::ConstantsReport;
use crate::error::{Error, Result};
use crate::saddle::Residuals;
use crate::vi::{ShiftCondition, ViCertificate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    pub r: f64,
    pub x_star: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_star: Option<Vec<f64>>,
    /// `false` when the payoff ignores `y`, so any `y ∈ T` is optimal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_star_unique: Option<bool>,
    /// Radius found by the small-radius search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_star: Option<f64>,
}

/// Application-specific summary fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Details {
    Vi(ViSummary),
    Ba(BaSummary),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViSummary {
    pub collapse_gap: f64,
    pub phi_norm: f64,
    pub vi_checks: crate::vi::ViChecks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<crate::vi::Uniqueness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftCondition>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaSummary {
    pub dist_gap: f64,
    pub proximity_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict_approx_worst: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<crate::vi::Uniqueness>,
}

impl From<&ViCertificate> for ViSummary {
    fn from(c: &ViCertificate) -> Self {
        ViSummary {
            collapse_gap: c.collapse_gap,
            phi_norm: c.phi_norm,
            vi_checks: c.vi_checks,
            uniqueness: c.uniqueness,
            shift: None,
        }
    }
}

impl From<&BaCertificate> for BaSummary {
    fn from(c: &BaCertificate) -> Self {
        BaSummary {
            dist_gap: c.dist_gap,
            proximity_margin: c.proximity_margin,
            collapse_gap: c.collapse_gap,
            projection_gap: c.projection_gap,
            strict_approx_worst: c.strict_approx_worst,
            uniqueness: c.uniqueness,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    /// Which result the run instantiates, `"1"` to `"7"`.
    pub theorem: String,
    pub command: Command,
    pub mode: RunMode,
    pub passed: bool,
    pub config: RunConfig,
    pub constants: ConstantsReport,
    pub solution: Option<Solution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Details>,
    pub checks: Vec<CheckOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Residuals>,
    pub seed: u64,
    pub wall_time: f64,
}

/// Outcome of auditing a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verification {
    pub command: Command,
    pub theorem: String,
    pub source_command: Command,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub seed: u64,
    pub wall_time: f64,
}

impl Certificate {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            3
        }
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })
    }

    /// JSON with `wall_time` zeroed, for reproducibility comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.wall_time = 0.0;
        to_json(&c)
    }
}

impl Verification {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            3
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Read a certificate file.
pub fn read_certificate(path: &Path) -> Result<Certificate> {
    Certificate::from_json(&std::fs::read_to_string(path)?)
}
