//! Report rendering.

use crate::error::{Error, Result};
use crate::identity_checks::IdentityReport;
use serde::Serialize;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Parse(format!("format {s:?}: expected json or csv"))),
        }
    }
}

/// CSV row: the JSON fields without `details`; non-finite numbers are empty.
#[derive(Serialize)]
struct Row<'a> {
    name: &'a str,
    lhs: Option<f64>,
    rhs: Option<f64>,
    se_lhs: f64,
    se_rhs: f64,
    se_diff: f64,
    z: Option<f64>,
    n_outer: usize,
    seed: u64,
    pass: bool,
    wall_time_s: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// One JSON object for a single report, an array otherwise; CSV always has
/// a header row.
pub fn render(reports: &[IdentityReport], format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = if reports.len() == 1 {
                serde_json::to_string_pretty(&reports[0])
            } else {
                serde_json::to_string_pretty(reports)
            }
            .map_err(|e| Error::Parse(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in reports {
                w.serialize(Row {
                    name: &r.name,
                    lhs: finite(r.lhs),
                    rhs: finite(r.rhs),
                    se_lhs: r.se_lhs,
                    se_rhs: r.se_rhs,
                    se_diff: r.se_diff,
                    z: finite(r.z),
                    n_outer: r.n_outer,
                    seed: r.seed,
                    pass: r.pass,
                    wall_time_s: r.wall_time_s,
                })
                .map_err(|e| Error::Parse(e.to_string()))?;
            }
            if reports.is_empty() {
                w.write_record(HEADER).map_err(|e| Error::Parse(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
        }
    }
}

pub const HEADER: [&str; 11] =
    ["name", "lhs", "rhs", "se_lhs", "se_rhs", "se_diff", "z", "n_outer", "seed", "pass", "wall_time_s"];
