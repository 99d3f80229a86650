//! Outcomes of sampled verifications.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Whether a run's constants justify its radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Analytic or conservative constants and `r ≤ r_max`.
    Certified,
    /// Sampled constants or `r > r_max`; results are indicative only.
    Heuristic,
}

/// Margin policy for strict inequalities: `≤ −strict_margin` at every sample
/// farther than `exclusion·r` from the candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrictPolicy {
    pub strict_margin: f64,
    pub exclusion: f64,
}

impl Default for StrictPolicy {
    fn default() -> Self {
        StrictPolicy {
            strict_margin: 1e-9,
            exclusion: 1e-4,
        }
    }
}

/// One named verification.
///
/// `worst` is the least favourable value seen; the check passes when it is on
/// the right side of `threshold` (`worst <= threshold`). `witness` is the
/// first violating sample, by sample index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    /// Samples skipped inside the exclusion ball around the solution.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub excluded: usize,
    pub worst: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl CheckOutcome {
    /// A single scalar comparison `value <= threshold`.
    pub fn scalar(name: &str, value: f64, threshold: f64) -> Self {
        CheckOutcome {
            name: name.to_string(),
            passed: value <= threshold,
            samples: 1,
            excluded: 0,
            worst: value,
            threshold,
            witness: None,
        }
    }

    pub fn with_witness(mut self, witness: Option<Vec<f64>>) -> Self {
        if !self.passed {
            self.witness = witness;
        }
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn push(&mut self, c: CheckOutcome) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: CheckReport) {
        self.checks.extend(other.checks);
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Evaluate `score` on every sample (in parallel) and fold the results in
/// sample order. `None` scores are skipped (e.g. inside the exclusion ball).
/// The check passes when every score is `<= threshold`.
pub(crate) fn sweep<T, F>(name: &str, samples: &[T], threshold: f64, score: F) -> CheckOutcome
where
    T: Sync + AsWitness,
    F: Fn(&T) -> Option<f64> + Sync + Send,
{
    let scores: Vec<Option<f64>> = samples.par_iter().map(&score).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut counted = 0;
    let mut witness = None;
    for (s, v) in samples.iter().zip(scores) {
        let Some(v) = v else { continue };
        counted += 1;
        // NaN counts as a violation.
        let bad = !(v <= threshold);
        if bad && witness.is_none() {
            witness = Some(s.witness());
        }
        if v > worst || v.is_nan() {
            worst = v;
        }
    }
    CheckOutcome {
        name: name.to_string(),
        passed: witness.is_none(),
        samples: counted,
        excluded: samples.len() - counted,
        worst,
        threshold,
        witness,
    }
}

pub(crate) trait AsWitness {
    fn witness(&self) -> Vec<f64>;
}

impl AsWitness for crate::hilbert::Vector {
    fn witness(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }
}
