//! Shared rendering helpers for the three output formats.

use mmcomm::exact::{decimal_string, fraction_string, BigRational, Real};
use serde_json::{Map, Value};

use crate::error::CliResult;

/// Inserts `key` as a decimal string and `key_fraction` as `"num/den"`.
pub fn put_rational(obj: &mut Map<String, Value>, key: &str, q: &BigRational) {
    obj.insert(key.into(), Value::String(decimal_string(q)));
    obj.insert(format!("{key}_fraction"), Value::String(fraction_string(q)));
}

/// Like [`put_rational`]; irrational values get a float string and a null fraction.
pub fn put_real(obj: &mut Map<String, Value>, key: &str, r: &Real) {
    obj.insert(key.into(), Value::String(r.decimal()));
    obj.insert(format!("{key}_fraction"), r.fraction().map_or(Value::Null, Value::String));
}

pub fn json_text(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("json values always serialize");
    text.push('\n');
    text
}

pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(std::io::Error::from)?;
    for row in rows {
        w.write_record(row).map_err(std::io::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields is utf-8"))
}

/// Aligned `label  value` lines.
pub fn human_lines(pairs: &[(&str, String)]) -> String {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    pairs.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

pub fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}
