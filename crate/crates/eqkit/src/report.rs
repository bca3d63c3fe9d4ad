//! The JSON report contract and its serialization.
//!
//! Reports are emitted as compact JSON with every float printed at 17
//! significant digits (`%.16e`), which round-trips `f64` exactly and keeps
//! reports byte-stable for a fixed configuration and seed. Keys and the
//! `theta` component ordering (`alpha, beta, skew params, w1, w2`) are part
//! of the contract; the shipped `schema/report.schema.json` describes them.

use crate::classify::SymmetryClass;
use crate::constraint::BcKind;
use crate::transport::StationarityReport;
use serde::Serialize;
use std::io::{self, Write};

/// Echo of the resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc: Option<BcKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl ConfigEcho {
    pub fn new(command: &str) -> ConfigEcho {
        ConfigEcho {
            command: command.to_string(),
            domain_file: None,
            params_file: None,
            field_file: None,
            bc: None,
            samples: None,
            seed: None,
            tol: None,
            particles: None,
            t_end: None,
            steps: None,
            t: None,
            x: None,
            x0: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub singular_values: Vec<f64>,
    pub null_dim: usize,
    /// `null` when nothing was kept or nothing was discarded.
    pub gap_ratio: Option<f64>,
    pub low_gap_warning: bool,
    /// Nullspace basis; component order `alpha, beta, <skew>, w1..., w2...`.
    pub basis: Vec<Vec<f64>>,
    pub theta_order: String,
    pub classification: SymmetryClass,
    pub forward_check_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// Worst normalized transport residual over the random phase points.
    pub transport_residual_max: f64,
    pub transport_points: usize,
    /// `|A theta| / (|A| |theta|)` on the sampled boundary.
    pub boundary_residual: f64,
    pub admissible: bool,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorReport {
    pub t: f64,
    pub x: Vec<f64>,
    pub rho: f64,
    pub rho_formula: f64,
    pub a: f64,
    pub u: Vec<f64>,
    pub window_lo: f64,
    pub window_hi: f64,
}

/// The top-level report; exactly one payload section is set per command.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<StationarityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<FactorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(config: ConfigEcho) -> Report {
        Report {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            classify: None,
            verify: None,
            simulate: None,
            factor: None,
            error: None,
        }
    }

    pub fn error(command: &str, message: String) -> Report {
        let mut r = Report::new(ConfigEcho::new(command));
        r.error = Some(message);
        r
    }
}

struct SignificantDigits17;

impl serde_json::ser::Formatter for SignificantDigits17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        // 17 significant digits: exact f64 round-trip
        write!(writer, "{value:.16e}")
    }
}

/// Serialize any value as compact JSON with 17-significant-digit floats.
pub fn to_json(value: &impl Serialize) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits17);
    value
        .serialize(&mut ser)
        .expect("report serialization cannot fail");
    String::from_utf8(out).expect("JSON output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_serialized_at_17_digits_round_trip() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: f64,
            c: f64,
        }
        let original = S {
            a: std::f64::consts::PI,
            b: 1.0 / 3.0,
            c: -2.2250738585072014e-308,
        };
        let text = to_json(&original);
        assert!(text.contains("e0") || text.contains("e-"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64().unwrap(), original.a);
        assert_eq!(back["b"].as_f64().unwrap(), original.b);
        assert_eq!(back["c"].as_f64().unwrap(), original.c);
    }

    #[test]
    fn report_is_byte_stable() {
        let mut r = Report::new(ConfigEcho::new("classify"));
        r.classify = Some(ClassifyReport {
            singular_values: vec![1.0, 0.5, 1e-16],
            null_dim: 1,
            gap_ratio: Some(5e15),
            low_gap_warning: false,
            basis: vec![vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]],
            theta_order: "alpha, beta, lambda, w1, w2".into(),
            classification: crate::classify::SymmetryClass {
                case: crate::classify::SymmetryCase::DiskOrAnnulus,
                detected: Default::default(),
                flags: crate::classify::SymmetryFlags {
                    has_alpha_dilation: false,
                    has_beta_dilation: false,
                    rotation_dims: 1,
                    translation_dims: 0,
                    helical_coupling: false,
                },
            },
            forward_check_residual: 1e-14,
        });
        assert_eq!(to_json(&r), to_json(&r.clone()));
    }

    #[test]
    fn error_reports_have_machine_readable_key() {
        let r = Report::error("classify", "no such file".into());
        let text = to_json(&r);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["error"].as_str().unwrap(), "no such file");
    }
}
