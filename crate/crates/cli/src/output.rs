use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use shortpath_core::Result;

/// Significant digits kept for every floating value in JSON output.
pub const DIGITS: usize = 12;

fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", DIGITS - 1, x).parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            if let Some(r) = num.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *num = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to [`DIGITS`] significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// CSV with a header row; floats rounded like JSON.
pub fn to_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, row) in rows.iter().enumerate() {
        let mut v = serde_json::to_value(row)?;
        round_value(&mut v);
        let Value::Object(map) = v else {
            return Err(shortpath_core::Error::Input("CSV rows must be records".into()));
        };
        if i == 0 {
            w.write_record(map.keys()).map_err(csv_err)?;
        }
        w.write_record(map.values().map(cell)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn csv_err(e: csv::Error) -> shortpath_core::Error {
    shortpath_core::Error::Io(io::Error::other(e))
}

/// Writes `text` to `path`, or to stdout when `path` is `None` or `-`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => File::create(p)?.write_all(text.as_bytes())?,
        _ => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        assert_eq!(round_sig(2.0 / 3.0), 0.666666666667);
        assert_eq!(round_sig(-1.0 / 3.0), -0.333333333333);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::INFINITY).is_infinite());
    }

    #[test]
    fn csv_has_header() {
        #[derive(Serialize)]
        struct Row {
            s: f64,
            ok: bool,
        }
        let out = to_csv(&[Row { s: 0.5, ok: true }, Row { s: 1.0, ok: false }]).unwrap();
        assert_eq!(out, "s,ok\n0.5,true\n1.0,false\n");
    }
}
