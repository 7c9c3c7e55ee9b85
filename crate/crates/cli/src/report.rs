//! JSON report construction. Numbers are strings: exact values as `p/q`,
//! floats with 15 significant digits.

use detline::scalar::{format_sig, Scalar};
use detline::Error;
use serde_json::{json, Map, Value};

pub const SCHEMA: u64 = 1;

/// A real number.
pub fn real(x: f64) -> Value {
    Value::String(format_sig(x))
}

/// The modulus of a backend value, exact when the backend is.
pub fn modulus<S: Scalar>(x: &S) -> Value {
    if S::EXACT {
        let r = x.render();
        Value::String(r.strip_prefix('-').map(str::to_owned).unwrap_or(r))
    } else {
        real(x.modulus())
    }
}

/// A signed backend value: `p/q`, a real decimal, or `{re, im}`.
pub fn signed<S: Scalar>(x: &S) -> Value {
    if S::EXACT {
        return Value::String(x.render());
    }
    let z = x.to_c64();
    if z.im == 0.0 {
        real(z.re)
    } else {
        json!({ "re": format_sig(z.re), "im": format_sig(z.im) })
    }
}

/// Starts a report with the common header fields.
pub fn header(command: &str, backend: &str, tol: f64, seed: u64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("backend".into(), json!(backend));
    m.insert("tol".into(), real(tol));
    m.insert("seed".into(), json!(seed));
    m
}

pub fn error_report(command: &str, err: &Error) -> Value {
    json!({
        "schema": SCHEMA,
        "command": command,
        "ok": false,
        "error": { "code": err.code(), "message": err.to_string(), "validation": err.is_validation() },
    })
}
