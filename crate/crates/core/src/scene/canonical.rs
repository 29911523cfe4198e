//! Canonical JSON: object keys sorted, no insignificant whitespace, and every
//! float rounded to 9 significant digits (lossless for `f32`).

use serde::Serialize;
use serde_json::{Number, Value};

pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, &mut out);
    Ok(out)
}

pub fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(n, out),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string encoding")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string encoding"));
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
    }
}

fn write_number(n: &Number, out: &mut String) {
    if n.is_f64() {
        out.push_str(&format_float(n.as_f64().unwrap_or(0.0)));
    } else {
        out.push_str(&n.to_string());
    }
}

/// Rounds to 9 significant digits and prints the shortest form of the result.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        // JSON has no representation; callers keep scene floats finite.
        return "null".to_string();
    }
    if x == 0.0 {
        return "0.0".to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("rust float formatting");
    format!("{rounded:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_compact() {
        let v = json!({"b": [1, 2.5], "a": {"z": null, "y": "é\""}});
        let mut s = String::new();
        write_value(&v, &mut s);
        assert_eq!(s, r#"{"a":{"y":"é\"","z":null},"b":[1,2.5]}"#);
    }

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(-0.0), "0.0");
        assert_eq!(format_float(0.1f32 as f64), "0.100000001");
        assert_eq!(format_float(123456789012.0), "123456789000.0");
        assert_eq!(format_float(1.5e-12), "1.5e-12");
    }

    #[test]
    fn nine_digits_recover_every_f32() {
        let mut x = 1.0e-6f32;
        while x < 1.0e6 {
            let text = format_float(x as f64);
            assert_eq!(text.parse::<f32>().unwrap(), x, "{text}");
            x *= 1.37;
        }
    }
}
