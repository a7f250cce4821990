//! Suite reports and their JSON, CSV and text renderings.

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One verified statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The identity or claim being tested, in words.
    pub anchor: String,
    /// Residual, ratio or count, compared against `tol` as the name says.
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    /// Supporting numbers such as a spectrum.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

impl Check {
    /// Passes when `value ≤ tol`.
    pub fn at_most(name: impl Into<String>, anchor: impl Into<String>, value: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            value,
            tol,
            pass: value <= tol,
            values: Vec::new(),
        }
    }

    /// Passes when `value ≥ tol`.
    pub fn at_least(name: impl Into<String>, anchor: impl Into<String>, value: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            value,
            tol,
            pass: value >= tol,
            values: Vec::new(),
        }
    }

    /// A yes/no statement; `value` is 1 or 0 against a tolerance of 1.
    pub fn holds(name: impl Into<String>, anchor: impl Into<String>, ok: bool) -> Check {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            value: if ok { 1.0 } else { 0.0 },
            tol: 1.0,
            pass: ok,
            values: Vec::new(),
        }
    }

    pub fn with_values(mut self, values: Vec<f64>) -> Check {
        self.values = values;
        self
    }
}

/// Outcome of one suite. Deterministic given `(spec, seed, order)`; the
/// wall-clock runtime is kept out of the serialised form and out of
/// equality for that reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub spec: String,
    pub seed: u64,
    pub order: usize,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip)]
    pub runtime: Duration,
}

impl PartialEq for SuiteReport {
    fn eq(&self, other: &SuiteReport) -> bool {
        self.suite == other.suite
            && self.spec == other.spec
            && self.seed == other.seed
            && self.order == other.order
            && self.checks == other.checks
            && self.pass == other.pass
    }
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, spec: impl Into<String>, seed: u64, order: usize) -> SuiteReport {
        SuiteReport {
            suite: suite.into(),
            spec: spec.into(),
            seed,
            order,
            checks: Vec::new(),
            pass: true,
            runtime: Duration::ZERO,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// One row of the flattened form: the report columns followed by the
/// check columns. `values` is `;`-separated.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    suite: String,
    spec: String,
    seed: u64,
    order: usize,
    name: String,
    anchor: String,
    value: f64,
    tol: f64,
    pass: bool,
    values: String,
}

pub fn to_json(reports: &[SuiteReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn from_json(text: &str) -> Result<Vec<SuiteReport>> {
    serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn to_csv(reports: &[SuiteReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        for c in &r.checks {
            w.serialize(CsvRow {
                suite: r.suite.clone(),
                spec: r.spec.clone(),
                seed: r.seed,
                order: r.order,
                name: c.name.clone(),
                anchor: c.anchor.clone(),
                value: c.value,
                tol: c.tol,
                pass: c.pass,
                values: c
                    .values
                    .iter()
                    .map(|v| format!("{v:?}"))
                    .collect::<Vec<_>>()
                    .join(";"),
            })
            .map_err(|e| Error::Serialization(e.to_string()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

/// Inverse of [`to_csv`]. Reports without checks do not survive the
/// flattening; the suite pass flag is recomputed from the checks.
pub fn from_csv(text: &str) -> Result<Vec<SuiteReport>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out: Vec<SuiteReport> = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| Error::Serialization(e.to_string()))?;
        let values = if row.values.is_empty() {
            Vec::new()
        } else {
            row.values
                .split(';')
                .map(|v| v.parse::<f64>().map_err(|e| Error::Serialization(e.to_string())))
                .collect::<Result<_>>()?
        };
        let check = Check {
            name: row.name,
            anchor: row.anchor,
            value: row.value,
            tol: row.tol,
            pass: row.pass,
            values,
        };
        let same = out
            .last()
            .is_some_and(|r| r.suite == row.suite && r.spec == row.spec && r.seed == row.seed && r.order == row.order);
        if !same {
            out.push(SuiteReport::new(row.suite, row.spec, row.seed, row.order));
        }
        out.last_mut().expect("just pushed").push(check);
    }
    Ok(out)
}

/// Human-readable summary, one line per check.
pub fn to_text(reports: &[SuiteReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = writeln!(
            s,
            "== {} [{}] seed={} order={} : {}",
            r.suite,
            r.spec,
            r.seed,
            r.order,
            if r.pass { "PASS" } else { "FAIL" }
        );
        for c in &r.checks {
            let _ = writeln!(
                s,
                "  {} {:<58} value={:<12.4e} tol={:.1e}",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                c.value,
                c.tol
            );
            if !c.values.is_empty() {
                let vals: Vec<String> = c.values.iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(s, "       [{}]", vals.join(", "));
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Vec<SuiteReport> {
        let mut a = SuiteReport::new("complex", "S2xS2", 7, 3);
        a.push(Check::at_most("L after K", "complex property", 3.2e-14, 1e-9));
        a.push(Check::at_least("control detected", "negative control", 0.5, 1e-9).with_values(vec![1.0, -0.25]));
        let mut b = SuiteReport::new("spectrum", "CP2", 0, 3);
        b.push(Check::holds("top eigenvalue is Kähler", "spectrum, \"quoted\" anchor", false));
        vec![a, b]
    }

    #[test]
    fn pass_flag_tracks_checks() {
        let r = sample();
        assert!(r[0].pass);
        assert!(!r[1].pass);
        assert_eq!(r[1].failures().count(), 1);
    }

    #[test]
    fn json_schema_and_round_trip() {
        let r = sample();
        let text = to_json(&r).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<&str> = v[0].as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["suite", "spec", "seed", "order", "checks", "pass"]);
        let check_keys: Vec<&str> = v[0]["checks"][0].as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(check_keys, ["name", "anchor", "value", "tol", "pass"]);
        assert_eq!(from_json(&text).unwrap(), r);
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        assert_eq!(from_csv(&to_csv(&r).unwrap()).unwrap(), r);
    }

    proptest! {
        #[test]
        fn csv_round_trip_arbitrary(
            values in prop::collection::vec(-1e6f64..1e6, 0..4),
            value in -1e3f64..1e3,
            name in "[a-zA-Z ,\"]{1,20}",
        ) {
            let mut r = SuiteReport::new("s", "S3", 1, 3);
            r.push(Check::at_most(name, "a", value, 1e-9).with_values(values));
            let back = from_csv(&to_csv(std::slice::from_ref(&r)).unwrap()).unwrap();
            prop_assert_eq!(back, vec![r]);
        }
    }
}
