//! Flat result records and their JSONL / CSV encodings.
//!
//! Integers are written bare, reals rounded to 12 significant digits,
//! rationals as reduced `"num/den"` strings (denominator always present).
//! Columns follow a fixed schema so every line of a file has the same keys in
//! the same order; fields a record does not set are `null` / empty.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::bounds::{BoundReport, Rational};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i128),
    Real(f64),
    Rational(Rational),
    Str(String),
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

macro_rules! int_value {
    ($($t:ty),*) => {$(
        impl From<$t> for Value {
            fn from(v: $t) -> Self {
                Value::Int(v as i128)
            }
        }
    )*};
}
int_value!(u32, u64, usize, i64, i128);

impl From<u128> for Value {
    fn from(v: u128) -> Self {
        Value::Int(i128::try_from(v).expect("count fits in i128"))
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<Rational> for Value {
    fn from(v: Rational) -> Self {
        Value::Rational(v)
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}

/// Rounds to 12 significant digits and prints the shortest decimal that
/// reads back as the rounded value, in exponent form outside `[1e-4, 1e15)`.
pub fn format_real(x: f64) -> Option<String> {
    if !x.is_finite() {
        return None;
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    // Normalize -0 so equal records print identically.
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    let mag = rounded.abs();
    if mag != 0.0 && !(1e-4..1e15).contains(&mag) {
        Some(format!("{rounded:e}"))
    } else {
        Some(format!("{rounded}"))
    }
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

impl Value {
    fn json(&self) -> String {
        match self {
            Value::Null => "null".to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Real(x) => format_real(*x).unwrap_or_else(|| "null".to_string()),
            Value::Rational(r) => serde_json::to_string(&format_rational(r)).expect("string"),
            Value::Str(s) => serde_json::to_string(s).expect("string"),
        }
    }

    fn csv(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Real(x) => format_real(*x).unwrap_or_default(),
            Value::Rational(r) => format_rational(r),
            Value::Str(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    fields: Vec<(&'static str, Value)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing any earlier value.
    pub fn set(&mut self, key: &'static str, value: impl Into<Value>) -> &mut Self {
        let value = value.into();
        match self.fields.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.fields.push((key, value)),
        }
        self
    }

    pub fn with(mut self, key: &'static str, value: impl Into<Value>) -> Self {
        self.set(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| *k == key).map(|(_, v)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.fields.iter().map(|(k, _)| *k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format {s:?} (expected jsonl or csv)")),
        }
    }
}

/// Encodes records against `schema`. Keys outside the schema are a
/// programming error and panic in debug builds.
pub fn emit(schema: &[&str], records: &[Record], format: Format) -> Vec<u8> {
    debug_assert!(records
        .iter()
        .all(|r| r.keys().all(|k| schema.contains(&k))));
    match format {
        Format::Jsonl => {
            let mut out = String::new();
            for r in records {
                out.push('{');
                for (i, key) in schema.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let v = r.get(key).unwrap_or(&Value::Null);
                    write!(out, "\"{key}\":{}", v.json()).expect("write to string");
                }
                out.push_str("}\n");
            }
            out.into_bytes()
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(schema).expect("write to memory");
            for r in records {
                w.write_record(
                    schema
                        .iter()
                        .map(|k| r.get(k).map(Value::csv).unwrap_or_default()),
                )
                .expect("write to memory");
            }
            w.into_inner().expect("flush to memory")
        }
    }
}

/// Columns describing one point set's distance statistics.
pub const REPORT_FIELDS: &[&str] = &[
    "q",
    "dim",
    "set_size",
    "f_value",
    "distance_count",
    "distance_set",
    "zero_distance_realized",
    "nonzero_pairs",
    "distinct_pairs",
    "null_pair_count",
    "lower_bound",
    "upper_exact",
    "upper_asymptotic",
    "delta_implied",
    "threshold",
    "regime",
    "ratio_cubic",
    "ratio_linear",
    "lower_ok",
    "upper_ok",
    "asymptotic_ok",
    "remark_ok",
];

pub fn report_fields(record: &mut Record, r: &BoundReport) {
    let ds: Vec<String> = r.distance_set.iter().map(|d| d.to_string()).collect();
    record
        .set("q", r.q)
        .set("dim", r.dim)
        .set("set_size", r.set_size)
        .set("f_value", r.f_value)
        .set("distance_count", r.distance_count())
        .set("distance_set", ds.join(" "))
        .set("zero_distance_realized", r.zero_distance_realized)
        .set("nonzero_pairs", r.nonzero_pairs)
        .set("distinct_pairs", r.distinct_pairs)
        .set("null_pair_count", r.null_pair_count)
        .set("lower_bound", r.lower_bound)
        .set("upper_exact", r.upper_exact)
        .set("upper_asymptotic", r.upper_asymptotic)
        .set("delta_implied", r.delta_implied)
        .set("threshold", r.threshold)
        .set("regime", r.regime.to_string())
        .set("ratio_cubic", r.ratio_cubic)
        .set("ratio_linear", r.ratio_linear)
        .set("lower_ok", r.verdicts.lower)
        .set("upper_ok", r.verdicts.upper)
        .set("asymptotic_ok", r.verdicts.asymptotic)
        .set("remark_ok", r.verdicts.remark);
}
