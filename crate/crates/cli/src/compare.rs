//! Side-by-side comparison of two metrics files.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `b - a`.
    pub delta: Option<f64>,
    /// `100 (b - a) / |a|`; `None` when `a` is zero and the values differ.
    pub percent: Option<f64>,
}

/// Numeric leaves by dotted path. Nulls are kept so both files must expose
/// the same signal set; strings are identification only.
fn flatten(v: &Value, prefix: &str, out: &mut BTreeMap<String, Option<f64>>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(x, &key(k), out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(x, &key(&i.to_string()), out);
            }
        }
        Value::Number(n) => {
            out.insert(prefix.to_string(), n.as_f64());
        }
        Value::Null => {
            out.insert(prefix.to_string(), None);
        }
        Value::Bool(_) | Value::String(_) => {}
    }
}

pub fn compare_values(a: &Value, b: &Value) -> Result<Vec<Row>> {
    let version = |v: &Value| v.get("schema_version").and_then(Value::as_u64);
    match (version(a), version(b)) {
        (Some(x), Some(y)) if x == y => {}
        (x, y) => bail!("schema version mismatch: {x:?} vs {y:?}"),
    }
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    flatten(a, "", &mut fa);
    flatten(b, "", &mut fb);
    fa.remove("schema_version");
    fb.remove("schema_version");
    fa.remove("seed");
    fb.remove("seed");
    let only_a: Vec<&String> = fa.keys().filter(|k| !fb.contains_key(*k)).collect();
    let only_b: Vec<&String> = fb.keys().filter(|k| !fa.contains_key(*k)).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        bail!("metric sets differ: only in first {only_a:?}, only in second {only_b:?}");
    }
    Ok(fa
        .into_iter()
        .map(|(metric, a)| {
            let b = fb[&metric];
            let delta = a.zip(b).map(|(a, b)| b - a);
            let percent = a.zip(delta).and_then(|(a, d)| {
                if d == 0.0 {
                    Some(0.0)
                } else if a != 0.0 {
                    Some(100.0 * d / a.abs())
                } else {
                    None
                }
            });
            Row {
                metric,
                a,
                b,
                delta,
                percent,
            }
        })
        .collect())
}

pub fn compare_files(a: &str, b: &str) -> Result<Vec<Row>> {
    let read = |p: &str| -> Result<Value> {
        let s = std::fs::read_to_string(p).with_context(|| format!("cannot read {p}"))?;
        serde_json::from_str(&s).with_context(|| format!("{p} is not valid JSON"))
    };
    compare_values(&read(a)?, &read(b)?)
}

pub fn render_table(rows: &[Row]) -> String {
    let f = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
    let p = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:+.2}%"));
    let width = rows.iter().map(|r| r.metric.len()).max().unwrap_or(6).max(6);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>14}  {:>14}  {:>14}  {:>10}", "metric", "a", "b", "delta", "change");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>14}  {:>14}  {:>14}  {:>10}",
            r.metric,
            f(r.a),
            f(r.b),
            f(r.delta),
            p(r.percent)
        );
    }
    s
}
