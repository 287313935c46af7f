//! Result tables and their CSV / JSON encodings.
//!
//! Every value is written with 12 significant digits (`{:.11e}`), `NaN` for
//! missing entries in CSV and `null` in JSON, so identical runs give
//! byte-identical files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use eprbec::correlators::EprResult;
use eprbec::sequence::ProtocolPoint;
use serde_json::{json, Value};

use crate::config::Format;

/// Version of the column layouts below.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const POINT_COLUMNS: [&str; 12] = [
    "t_total_s",
    "t_int_s",
    "E_EPR",
    "alpha_opt",
    "beta_opt",
    "spin_len_a",
    "spin_len_b",
    "overlap_a",
    "overlap_b",
    "inferred_var_1",
    "inferred_var_2",
    "oracle_E_EPR",
];

/// Leading columns of sweep tables.
pub const SWEEP_COLUMNS: [&str; 4] = ["N_a", "N_b", "dz_max_a0", "t_R_trap"];

pub const DENSE_COLUMNS: [&str; 10] = [
    "t_s",
    "E_EPR",
    "alpha_opt",
    "beta_opt",
    "spin_len_a",
    "spin_len_b",
    "overlap_a",
    "overlap_b",
    "inferred_var_1",
    "inferred_var_2",
];

pub const ORACLE_COLUMNS: [&str; 9] = [
    "t_s",
    "int_chi_a",
    "int_chi_b",
    "int_chi_ab",
    "oracle_E_EPR",
    "alpha_opt",
    "beta_opt",
    "spin_len_a",
    "spin_len_b",
];

pub const LOSS_COLUMNS: [&str; 8] = [
    "rate_one_body_per_s",
    "rate_two_body_11_per_s",
    "rate_two_body_01_per_s",
    "rate_three_body_per_s",
    "duration_s",
    "two_body_lost",
    "n_lost",
    "lost_fraction",
];

pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.11e}")
    }
}

/// `E_EPR, α, β, |S_a|, |S_b|, overlaps, inferred variances`.
pub fn epr_values(e: &EprResult) -> [f64; 9] {
    [
        e.e_epr,
        e.alpha,
        e.beta,
        e.spin_len[0],
        e.spin_len[1],
        e.overlap[0],
        e.overlap[1],
        e.inferred_var[0],
        e.inferred_var[1],
    ]
}

/// Row of [`POINT_COLUMNS`] for a successful point; times converted with `omega`.
pub fn point_row(p: &ProtocolPoint, omega: f64) -> Option<Vec<f64>> {
    let d = p.outcome.as_ref().ok()?;
    let mut row = vec![p.t_total / omega, p.t_int / omega];
    row.extend(epr_values(&d.epr));
    row.push(d.oracle_e_epr.unwrap_or(f64::NAN));
    Some(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.iter().map(|v| fmt_value(*v)).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| {
                        let val = if v.is_finite() {
                            json!(fmt_value(*v).parse::<f64>().unwrap())
                        } else {
                            Value::Null
                        };
                        (c.clone(), val)
                    })
                    .collect::<serde_json::Map<_, _>>();
                Value::Object(obj)
            })
            .collect();
        json!({ "schema_version": CSV_SCHEMA_VERSION, "columns": self.columns, "rows": rows })
    }

    /// Writes `<dir>/<stem>.csv` or `<dir>/<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> io::Result<PathBuf> {
        let path = dir.join(format!("{stem}.{}", format.name()));
        let text = match format {
            Format::Csv => self.to_csv(),
            Format::Json => serde_json::to_string_pretty(&self.to_json()).expect("serializable") + "\n",
        };
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Parses a CSV written by [`Table::to_csv`].
pub fn read_csv(text: &str) -> Result<Table, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty table")?;
    let mut table = Table::new(&header.split(',').collect::<Vec<_>>());
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|_| format!("row {}: bad value `{v}`", k + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != table.columns.len() {
            return Err(format!(
                "row {}: {} values for {} columns",
                k + 1,
                row.len(),
                table.columns.len()
            ));
        }
        table.rows.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_value(1.0), "1.00000000000e0");
        assert_eq!(fmt_value(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(fmt_value(f64::NAN), "NaN");
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.5, f64::NAN]);
        t.push(vec![-2e-9, 3.0]);
        let back = read_csv(&t.to_csv()).unwrap();
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.rows[1], t.rows[1]);
        assert!(back.rows[0][1].is_nan());
        let j = t.to_json();
        assert_eq!(j["rows"][0]["b"], Value::Null);
        assert_eq!(j["rows"][1]["a"], json!(-2e-9));
    }
}
