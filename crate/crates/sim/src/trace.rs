//! JSON-lines trace output.
//!
//! One record per simulation tick after a versioned header record. Floats
//! are printed with 17 significant digits (exact f64 round-trip) and object
//! keys are sorted, so a (scenario, seed) pair yields a byte-identical file
//! on every run. Non-finite floats serialize as `null`; infinite-distance
//! sentinels in metrics rely on this.
//!
//! Timing measurements never appear in the trace (they would break
//! byte-for-byte determinism); they live in the separate metrics document.

use serde::Serialize;
use serde_json::Value;
use std::io::{self, Write};

/// Print `v` as JSON with deterministic float formatting.
pub fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_u64() || n.is_i64() {
                    out.push_str(&n.to_string());
                } else if f.is_finite() {
                    // 17 significant digits: 1 before the point + 16 after.
                    out.push_str(&format!("{f:.16e}"));
                } else {
                    out.push_str("null");
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string encoding"));
        }
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
            // serde_json's default map is a BTreeMap: keys come out sorted.
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key encoding"));
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

/// Serialize one record as a single line.
pub fn record_line<T: Serialize>(record: &T) -> String {
    let value = serde_json::to_value(record).expect("record serialization");
    let mut line = String::new();
    write_value(&value, &mut line);
    line
}

/// Streaming JSONL writer.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        TraceWriter { out }
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        let line = record_line(record);
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_get_17_significant_digits() {
        let mut s = String::new();
        write_value(&json!(0.1), &mut s);
        assert_eq!(s, "1.0000000000000001e-1");
        let parsed: f64 = s.parse().unwrap();
        assert_eq!(parsed, 0.1);
    }

    #[test]
    fn integers_stay_integers() {
        let mut s = String::new();
        write_value(&json!({"tick": 42, "t": 2.5}), &mut s);
        assert_eq!(s, "{\"t\":2.5000000000000000e0,\"tick\":42}");
    }

    #[test]
    fn keys_are_sorted_and_nonfinite_is_null() {
        #[derive(Serialize)]
        struct R {
            b: f64,
            a: f64,
        }
        let line = record_line(&R {
            b: 1.0,
            a: f64::INFINITY,
        });
        assert_eq!(line, "{\"a\":null,\"b\":1.0000000000000000e0}");
    }

    #[test]
    fn round_trip_is_exact_for_awkward_floats() {
        for &x in &[1.0 / 3.0, 2.0_f64.sqrt(), 1e-300, -0.0, 123456789.123456789] {
            let mut s = String::new();
            write_value(&json!(x), &mut s);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s}");
        }
    }
}
