//! Report emission: versioned JSON with fixed float formatting, and CSV.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::CliError;

pub const SCHEMA: &str = "solvq/1";
const SIGNIFICANT: usize = 12;

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in `v`; non-finite floats were already turned into null.
fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(round_sig(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(normalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

/// A JSON report: `schema` and `command` first, then the given fields.
pub struct Report {
    fields: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut fields = Map::new();
        fields.insert("schema".into(), Value::from(SCHEMA));
        fields.insert("command".into(), Value::from(command));
        Report { fields }
    }

    pub fn field<T: Serialize>(mut self, key: &str, value: &T) -> Result<Self, CliError> {
        self.fields.insert(key.into(), normalize(serde_json::to_value(value)?));
        Ok(self)
    }

    /// Inlines the fields of a serialized struct.
    pub fn flatten<T: Serialize>(mut self, value: &T) -> Result<Self, CliError> {
        match normalize(serde_json::to_value(value)?) {
            Value::Object(map) => self.fields.extend(map),
            other => return Err(CliError::Usage(format!("cannot flatten {other}"))),
        }
        Ok(self)
    }

    pub fn to_string_pretty(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(&self.fields)?;
        s.push('\n');
        Ok(s)
    }
}

/// One CSV cell: 12 significant digits, `nan`/`inf` for non-finite values.
pub fn csv_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        let y = round_sig(x);
        let a = y.abs();
        if a != 0.0 && !(1e-4..1e15).contains(&a) {
            format!("{y:e}")
        } else {
            format!("{y}")
        }
    }
}

pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| csv_number(x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0).to_string(), "0.333333333333");
        assert_eq!(csv_number(f64::INFINITY), "inf");
        assert_eq!(csv_number(2.0), "2");
        assert_eq!(csv_number(5.358443615134e-15), "5.35844361513e-15");
    }

    #[test]
    fn nonfinite_becomes_null() {
        let r = Report::new("t").field("x", &vec![1.0, f64::NAN, 1.0 / 7.0]).unwrap();
        let s = r.to_string_pretty().unwrap();
        assert!(s.contains("null"));
        assert!(s.contains("0.142857142857"));
        assert!(s.find("schema").unwrap() < s.find("command").unwrap());
    }
}
