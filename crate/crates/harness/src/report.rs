//! Machine-readable experiment reports.
//!
//! A report lists one entry per check with the measured value, the bound it
//! was compared against and the formula the check audits. Reports contain no
//! timing so that a fixed spec and seed give identical bytes; wall-clock time
//! is returned separately in [`Timed`].

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Serialize, Serializer};

/// Outcome of one check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The input did not meet the check's hypothesis; not a failure.
    Precondition,
}

/// How `measured` is compared with `bound`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Cmp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "in")]
    Within,
}

/// Serializes non-finite floats as strings (`"-inf"`, `"nan"`) instead of `null`.
fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&v.to_string())
    }
}

fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_f64(x, s),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// Formula the check audits.
    pub anchor: String,
    #[serde(serialize_with = "ser_f64")]
    pub measured: f64,
    pub cmp: Cmp,
    #[serde(serialize_with = "ser_f64")]
    pub bound: f64,
    /// Upper end for [`Cmp::Within`].
    #[serde(serialize_with = "ser_opt_f64", skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// Finite float, or its string form when not finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric(pub f64);

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ser_f64(&self.0, s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, Metric>,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            passed: true,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn push(&mut self, c: Check) -> bool {
        let ok = c.passed();
        self.passed &= ok;
        self.checks.push(c);
        ok
    }

    /// `measured ≤ bound`; NaN fails.
    pub fn le(&mut self, name: impl Into<String>, anchor: &str, measured: f64, bound: f64) -> bool {
        let ok = measured <= bound;
        self.push(Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            anchor: anchor.to_string(),
            measured,
            cmp: Cmp::Le,
            bound,
            upper: None,
            detail: String::new(),
        })
    }

    /// `measured ≥ bound`; NaN fails.
    pub fn ge(&mut self, name: impl Into<String>, anchor: &str, measured: f64, bound: f64) -> bool {
        let ok = measured >= bound;
        self.push(Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            anchor: anchor.to_string(),
            measured,
            cmp: Cmp::Ge,
            bound,
            upper: None,
            detail: String::new(),
        })
    }

    /// `lo ≤ measured ≤ hi`.
    pub fn within(&mut self, name: impl Into<String>, anchor: &str, measured: f64, lo: f64, hi: f64) -> bool {
        let ok = measured >= lo && measured <= hi;
        self.push(Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            anchor: anchor.to_string(),
            measured,
            cmp: Cmp::Within,
            bound: lo,
            upper: Some(hi),
            detail: String::new(),
        })
    }

    /// A boolean property, recorded as `1 ≥ 1` or `0 ≥ 1`.
    pub fn holds(&mut self, name: impl Into<String>, anchor: &str, ok: bool, detail: impl Into<String>) -> bool {
        self.push(Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            anchor: anchor.to_string(),
            measured: if ok { 1.0 } else { 0.0 },
            cmp: Cmp::Ge,
            bound: 1.0,
            upper: None,
            detail: detail.into(),
        })
    }

    pub fn precondition(&mut self, name: impl Into<String>, anchor: &str, reason: impl Into<String>) {
        self.push(Check {
            name: name.into(),
            status: Status::Precondition,
            anchor: anchor.to_string(),
            measured: f64::NAN,
            cmp: Cmp::Ge,
            bound: f64::NAN,
            upper: None,
            detail: reason.into(),
        });
    }

    /// Attaches a detail string to the last check.
    pub fn detail(&mut self, text: impl Into<String>) {
        if let Some(c) = self.checks.last_mut() {
            c.detail = text.into();
        }
    }

    pub fn metric(&mut self, key: impl Into<String>, v: f64) {
        self.metrics.insert(key.into(), Metric(v));
    }

    pub fn artifact(&mut self, name: impl Into<String>) {
        self.artifacts.push(name.into());
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// Merges `other`'s checks and metrics under a name prefix.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for mut c in other.checks {
            c.name = format!("{prefix}.{}", c.name);
            self.push(c);
        }
        for (k, v) in other.metrics {
            self.metrics.insert(format!("{prefix}.{k}"), v);
        }
        self.artifacts.extend(other.artifacts);
        self.notes.extend(other.notes);
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Precondition => "PRE ",
        };
        let rel = match self.cmp {
            Cmp::Le => format!("<= {:.6e}", self.bound),
            Cmp::Ge => format!(">= {:.6e}", self.bound),
            Cmp::Within => format!("in [{:.6e}, {:.6e}]", self.bound, self.upper.unwrap_or(f64::NAN)),
        };
        write!(f, "{tag} {}: {:.6e} {rel}  [{}]", self.name, self.measured, self.anchor)?;
        if !self.detail.is_empty() {
            write!(f, "  ({})", self.detail)?;
        }
        Ok(())
    }
}

/// A report together with the wall-clock time that produced it.
#[derive(Clone, Debug)]
pub struct Timed {
    pub report: Report,
    pub elapsed: Duration,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failures_flip_passed() {
        let mut r = Report::new("x", 0);
        assert!(r.le("a", "a <= 1", 0.5, 1.0));
        assert!(r.passed);
        r.precondition("b", "rho >= 0", "negative value");
        assert!(r.passed);
        assert!(!r.ge("c", "c >= 1", f64::NAN, 1.0));
        assert!(!r.passed);
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn non_finite_values_serialize_as_strings() {
        let mut r = Report::new("x", 0);
        r.le("slope", "s <= b", f64::NEG_INFINITY, -8.0);
        r.metric("m", f64::INFINITY);
        let j = r.to_json().unwrap();
        assert!(j.contains("\"-inf\"") && j.contains("\"inf\""));
    }
}
