//! Serialized outputs: verification reports, coefficient tables and forward-run
//! tables, as JSON or long-format CSV.
//!
//! Reals are written as decimal strings so that reports carry the full working
//! precision and re-serialize byte for byte.

use std::collections::BTreeMap;
use std::time::SystemTime;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::hankel::Pipeline;
use crate::lf::LfReport;
use crate::verify::Outcome;

/// Decimal digits that represent `bits` binary digits without loss.
pub fn full_digits(bits: u32) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1
}

/// Digits used in coefficient tables: bits/3.33.
pub fn table_digits(bits: u32) -> usize {
    (bits as f64 / 3.33).floor() as usize
}

pub fn dec(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    x.to_string_radix(10, Some(digits))
}

pub fn now() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub bits: u32,
    pub eps_verify: String,
    pub started: String,
    pub finished: String,
}

impl Manifest {
    pub fn new(command: &str, config: BTreeMap<String, String>, bits: u32, eps_verify: &Float) -> Manifest {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            bits,
            eps_verify: dec(eps_verify, full_digits(bits)),
            started: now(),
            finished: String::new(),
        }
    }

    pub fn finish(&mut self) {
        self.finished = now();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOut {
    pub suite: String,
    pub identity: String,
    pub n: usize,
    pub residual: String,
    pub budget: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrataOut {
    pub identity: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureOut {
    pub suite: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub errata: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub manifest: Manifest,
    pub records: Vec<RecordOut>,
    pub errata: Vec<ErrataOut>,
    pub failures: Vec<FailureOut>,
    pub summary: Summary,
}

impl VerificationReport {
    pub fn new(manifest: Manifest, outcome: &Outcome) -> VerificationReport {
        let digits = full_digits(manifest.bits);
        let records = outcome
            .records
            .iter()
            .map(|r| RecordOut {
                suite: r.suite.clone(),
                identity: r.identity.clone(),
                n: r.n,
                residual: dec(&r.residual, digits),
                budget: dec(&r.budget, digits),
                pass: r.pass(),
            })
            .collect();
        let (pass, fail, errata) = outcome.counts();
        VerificationReport {
            manifest,
            records,
            errata: outcome
                .errata
                .iter()
                .map(|e| ErrataOut { identity: e.identity.clone(), detail: e.detail.clone() })
                .collect(),
            failures: outcome
                .failures
                .iter()
                .map(|f| FailureOut { suite: f.suite.clone(), error: f.error.to_string() })
                .collect(),
            summary: Summary { pass, fail, errata },
        }
    }

    /// Report with no records, written when the shared inputs could not be built.
    pub fn aborted(manifest: Manifest, error: &crate::Error) -> VerificationReport {
        VerificationReport {
            manifest,
            records: Vec::new(),
            errata: Vec::new(),
            failures: vec![FailureOut { suite: "setup".to_string(), error: error.to_string() }],
            summary: Summary { pass: 0, fail: 0, errata: 0 },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(s: &str) -> serde_json::Result<VerificationReport> {
        serde_json::from_str(s)
    }

    pub fn to_csv(&self) -> String {
        write_csv(&self.records)
    }
}

fn write_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub n: usize,
    pub rho_n: String,
    #[serde(rename = "H_n")]
    pub h_n: String,
    pub beta_n: String,
    pub gamma_n: String,
    pub p1_n: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub manifest: Manifest,
    pub rows: Vec<CoefficientRow>,
}

impl CoefficientTable {
    pub fn new(manifest: Manifest, pl: &Pipeline) -> CoefficientTable {
        let digits = table_digits(manifest.bits);
        let d = &pl.data;
        let rows = (0..pl.k)
            .map(|n| CoefficientRow {
                n,
                rho_n: dec(&pl.table.rho[n], digits),
                h_n: dec(&d.h[n], digits),
                beta_n: dec(&d.beta[n], digits),
                gamma_n: dec(&d.gamma[n], digits),
                p1_n: dec(&d.p1[n], digits),
            })
            .collect();
        CoefficientTable { manifest, rows }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        write_csv(&self.rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardRowOut {
    pub n: usize,
    pub beta_lf: String,
    pub beta_chol: String,
    pub gamma_lf: String,
    pub gamma_chol: String,
    pub dev_beta: String,
    pub dev_gamma: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTable {
    pub manifest: Manifest,
    pub seed_rows: usize,
    pub max_deviation: String,
    pub stopped: Option<String>,
    pub rows: Vec<ForwardRowOut>,
}

impl ForwardTable {
    pub fn new(manifest: Manifest, rep: &LfReport) -> ForwardTable {
        let bits = manifest.bits;
        let digits = table_digits(bits);
        let rows = rep
            .rows
            .iter()
            .map(|r| ForwardRowOut {
                n: r.n,
                beta_lf: dec(&r.beta_lf, digits),
                beta_chol: dec(&r.beta_chol, digits),
                gamma_lf: dec(&r.gamma_lf, digits),
                gamma_chol: dec(&r.gamma_chol, digits),
                dev_beta: dec(&r.dev_beta, 6),
                dev_gamma: dec(&r.dev_gamma, 6),
            })
            .collect();
        ForwardTable {
            manifest,
            seed_rows: 3,
            max_deviation: dec(&rep.max_deviation(bits), 6),
            stopped: rep.stopped.as_ref().map(|e| e.to_string()),
            rows,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        write_csv(&self.rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::Record;

    #[test]
    fn decimal_rendering_keeps_precision() {
        let x = Float::with_val(384, 1) / 3u32;
        let s = dec(&x, full_digits(384));
        let back = Float::with_val(384, Float::parse(&s).unwrap());
        assert_eq!(back, x);
        assert_eq!(dec(&Float::new(64), 10), "0");
    }

    #[test]
    fn digits_follow_bits() {
        assert_eq!(table_digits(384), 115);
        assert_eq!(full_digits(384), 117);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let f = |v: f64| Float::with_val(128, v);
        let outcome = Outcome {
            records: vec![Record { suite: "s".into(), identity: "x".into(), n: 3, residual: f(1e-40), budget: f(1e-30) }],
            ..Default::default()
        };
        let mut m = Manifest::new("verify", BTreeMap::from([("family".into(), "f12".into())]), 128, &f(1e-19));
        m.finish();
        let json = VerificationReport::new(m, &outcome).to_json();
        let back = VerificationReport::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
        assert!(back.records[0].pass);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let f = |v: f64| Float::with_val(64, v);
        let outcome = Outcome {
            records: vec![Record { suite: "s".into(), identity: "a@1/2".into(), n: 0, residual: f(2.0), budget: f(1.0) }],
            ..Default::default()
        };
        let rep = VerificationReport::new(Manifest::new("verify", BTreeMap::new(), 64, &f(0.5)), &outcome);
        let csv = rep.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("suite,identity,n,residual,budget,pass"));
        assert!(lines.next().unwrap().ends_with(",false"));
    }
}
