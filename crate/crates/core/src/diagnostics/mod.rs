//! Numerical certification of the a priori estimates and symmetries.
//!
//! Every check produces a [`CheckRecord`] with a signed margin: positive
//! means the asserted inequality holds with room to spare, negative means it
//! is violated. Margins of inequality checks already include the quadrature
//! allowance the check grants. `Info` records are reported but never gate
//! the outcome.

mod bounds;
mod dependence;
mod moments;
mod residual;
mod symmetry;

pub use bounds::{check_decay, check_energy, check_gradient_bound, sup_ratio_report, tame_time_measure, tame_time_sweep, DecayWindow};
pub use dependence::{check_continuous_dependence, difference_functional, perturbation_sweep, threshold_sweep};
pub use moments::{kappa_star, lq_kappa_sweep, lq_moment_report, threshold_recursion};
pub use residual::{check_residual_order, integral_residual, vorticity_residual, vorticity_residual_value};
pub use symmetry::{
    check_galilean, check_rotation, check_scale, check_symmetries, galilean_shift, scale_up, SignedPermutation,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Info,
    Inconclusive,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::Inconclusive => "INCONCLUSIVE",
        }
    }
}

fn finite_or_null<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: Status,
    #[serde(serialize_with = "finite_or_null")]
    pub margin: f64,
    pub details: BTreeMap<String, Value>,
}

/// JSON value of a float, mapping non-finite values to null.
pub(crate) fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub(crate) fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, status: Status, margin: f64) -> Self {
        Self { name: name.into(), status, margin, details: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.to_string(), value.into());
        self
    }

    pub fn with_num(self, key: &str, value: f64) -> Self {
        self.with(key, num(value))
    }

    pub fn with_nums(self, key: &str, values: &[f64]) -> Self {
        self.with(key, nums(values))
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Whether the record gates the overall outcome.
    pub fn is_asserted(&self) -> bool {
        self.status != Status::Info
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub metadata: BTreeMap<String, Value>,
    pub records: Vec<CheckRecord>,
}

impl DiagnosticsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    /// Add a record; names must be unique within a report.
    pub fn push(&mut self, record: CheckRecord) -> Result<()> {
        if self.get(&record.name).is_some() {
            return Err(Error::Structural(format!("duplicate check '{}'", record.name)));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Names of asserted checks that did not pass.
    pub fn failures(&self) -> Vec<&str> {
        self.records.iter().filter(|r| r.is_asserted() && !r.passed()).map(|r| r.name.as_str()).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are always serializable")
    }

    pub fn to_table(&self) -> String {
        let width = self.records.iter().map(|r| r.name.len()).max().unwrap_or(4).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:<12}  {:>13}", "check", "status", "margin");
        for r in &self.records {
            let _ = writeln!(out, "{:<width$}  {:<12}  {:>13.6e}", r.name, r.status.label(), r.margin);
        }
        out
    }
}

#[cfg(test)]
mod tests;
