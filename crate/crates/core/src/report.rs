//! Pass/fail records for bound checks and small statistics helpers.

use serde::{Deserialize, Serialize};

/// Tolerance used by [`ValidationReport`] unless a check states its own.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `lhs >= rhs`
    Geq,
    /// `lhs <= rhs`
    Leq,
}

/// One checked inequality `lhs (>=|<=) rhs`.
///
/// `margin` is signed so that a non-negative value means the inequality
/// holds. A bound is vacuous when its right-hand side makes it trivially
/// true for any probability (`rhs <= 0` for `>=`, `rhs >= 1` for `<=`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub vacuous: bool,
    pub instance_digest: String,
}

impl ValidationReport {
    /// Operator-level check with no probabilistic vacuity notion.
    pub fn new(name: impl Into<String>, relation: Relation, lhs: f64, rhs: f64, tol: f64) -> Self {
        let margin = match relation {
            Relation::Geq => lhs - rhs,
            Relation::Leq => rhs - lhs,
        };
        Self {
            name: name.into(),
            relation,
            lhs,
            rhs,
            margin,
            tolerance: tol,
            pass: margin >= -tol,
            vacuous: false,
            instance_digest: String::new(),
        }
    }

    /// Check on a probability-valued left-hand side, flagged vacuous when
    /// the right-hand side leaves no constraint.
    pub fn bound(name: impl Into<String>, relation: Relation, lhs: f64, rhs: f64, tol: f64) -> Self {
        let mut r = Self::new(name, relation, lhs, rhs, tol);
        r.vacuous = match relation {
            Relation::Geq => rhs <= 0.0,
            Relation::Leq => rhs >= 1.0,
        } || !rhs.is_finite();
        if r.vacuous {
            r.pass = true;
        }
        r
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.instance_digest = digest.into();
        self
    }

    /// `pass`, `vacuous-pass` or `fail`.
    pub fn status(&self) -> &'static str {
        match (self.pass, self.vacuous) {
            (_, true) => "vacuous-pass",
            (true, false) => "pass",
            (false, false) => "fail",
        }
    }
}

/// Counts of checks by status.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub pass: usize,
    pub vacuous: usize,
    pub fail: usize,
}

impl Tally {
    pub fn add(&mut self, r: &ValidationReport) {
        match r.status() {
            "pass" => self.pass += 1,
            "vacuous-pass" => self.vacuous += 1,
            _ => self.fail += 1,
        }
    }

    pub fn extend<'a>(&mut self, rs: impl IntoIterator<Item = &'a ValidationReport>) {
        for r in rs {
            self.add(r);
        }
    }

    pub fn total(&self) -> usize {
        self.pass + self.vacuous + self.fail
    }

    pub fn vacuous_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.vacuous as f64 / self.total() as f64
        }
    }
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
