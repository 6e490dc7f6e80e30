//! JSON with fixed 17-significant-digit floats, and atomic file writes.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Number, Value};

/// `x` as a JSON number with 17 significant digits; non-finite becomes null.
pub fn float17(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    Value::Number(text.parse::<Number>().expect("formatted float parses"))
}

/// Rewrites every non-integer number in `v` with [`float17`].
pub fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => float17(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(items) => Value::Array(items.into_iter().map(normalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Value> {
    Ok(normalize(serde_json::to_value(value)?))
}

pub fn render<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&to_json(value)?)?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot create file in {}", dir.display()))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = render(value)?;
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_get_seventeen_digits() {
        assert_eq!(float17(0.5).to_string(), "5.0000000000000000e-1");
        assert_eq!(float17(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(float17(f64::NAN), Value::Null);
        let v = normalize(json!({"a": [1, 2.5], "b": -3}));
        assert_eq!(v.to_string(), r#"{"a":[1,2.5000000000000000e+0],"b":-3}"#);
    }

    #[test]
    fn round_trips_exactly() {
        for x in [1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 123456.789] {
            let back: f64 = float17(x).to_string().parse().unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_json(&p, &json!({"v": 1})).unwrap();
        write_json(&p, &json!({"v": 2})).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().contains('2'));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
