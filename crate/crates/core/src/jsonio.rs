//! JSON emission with fixed float formatting.
//!
//! Reports and concept-vector files print every float with 17 significant
//! digits (`{:.16e}`), which round-trips f64 exactly, and keep object keys
//! sorted, so byte-identical output is a pure function of the value.

use crate::error::{Error, Result};
use serde::Serialize;
use serde_json::Value;

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

pub fn from_json_str<T: serde::de::DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Format(format!("json parse failed: {e}")))
}

fn write_value(v: &Value, indent: usize, out: &mut String) -> Result<()> {
    match v {
        Value::Null => {
            // serde_json maps non-finite floats to null; our data is finite
            return Err(Error::Format("null/non-finite value in document".into()));
        }
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().expect("numeric");
                if !f.is_finite() {
                    return Err(Error::Format("non-finite float".into()));
                }
                out.push_str(&format!("{f:.16e}"));
            }
        }
        Value::String(s) => write_escaped(s, out),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline(indent + 1, out);
                    write_value(item, indent + 1, out)?;
                }
                newline(indent, out);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
            } else {
                out.push('{');
                // serde_json's default map is sorted; iterate as-is
                for (i, (k, item)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline(indent + 1, out);
                    write_escaped(k, out);
                    out.push_str(": ");
                    write_value(item, indent + 1, out)?;
                }
                newline(indent, out);
                out.push('}');
            }
        }
    }
    Ok(())
}

fn newline(indent: usize, out: &mut String) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_escaped(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}
