//! Report structure and its canonical JSON and flat CSV renderings.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sim::SimEstimate;

/// One reported number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub units: String,
    /// Method that produced the value.
    pub source: String,
    /// 95% half-width for simulated values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

impl Metric {
    pub fn analytic(name: impl Into<String>, value: f64, units: &str, source: &str) -> Self {
        Metric { name: name.into(), value, units: units.into(), source: source.into(), half_width: None }
    }

    pub fn simulated(name: impl Into<String>, e: &SimEstimate, units: &str) -> Self {
        Metric {
            name: name.into(),
            value: e.point,
            units: units.into(),
            source: "sim.batch_means".into(),
            half_width: Some(e.half_width_95),
        }
    }
}

/// Analytic value against its simulated estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub metric: String,
    pub analytic: f64,
    pub simulated: f64,
    pub half_width: f64,
    pub delta: f64,
    pub units: String,
    pub within_ci: bool,
    /// `|delta| <= tolerance * half_width`.
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Unstable,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub kind: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub verdicts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<Metric>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub simulated: Vec<Metric>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<Delta>,
}

impl ModelReport {
    pub fn new(name: &str, kind: &str) -> Self {
        ModelReport {
            name: name.into(),
            kind: kind.into(),
            status: Status::Ok,
            verdicts: BTreeMap::new(),
            error: None,
            metrics: Vec::new(),
            simulated: Vec::new(),
            deltas: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64, units: &str, source: &str) {
        self.metrics.push(Metric::analytic(name, value, units, source));
    }

    pub fn verdict(&mut self, key: &str, value: impl Into<String>) {
        self.verdicts.insert(key.into(), value.into());
    }

    /// Records a failure; instability is a verdict, anything else an error.
    pub fn fail(&mut self, err: &Error) {
        match err {
            Error::Unstable { load, verdict } => {
                self.status = Status::Unstable;
                self.verdict("stability", format!("{verdict}, rho={load}"));
            }
            other => {
                self.status = Status::Error;
                self.error = Some(other.to_string());
            }
        }
    }

    pub fn analytic_value(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub models: Vec<ModelReport>,
}

impl Report {
    pub fn breaches(&self) -> usize {
        self.models.iter().flat_map(|m| &m.deltas).filter(|d| !d.pass).count()
    }

    pub fn metric_count(&self) -> usize {
        self.models.iter().map(|m| m.metrics.len() + m.simulated.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_u64() {
                out.push_str(&i.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                out.push_str(&format!("{:.16e}", n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*key], indent + 1);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Canonical JSON: sorted keys, reals with 17 significant digits.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

/// One row per (model, metric), analytic and simulated alike.
pub fn to_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["model", "kind", "metric", "value", "units", "source", "half_width"]).map_err(csv_err)?;
    for m in &report.models {
        for x in m.metrics.iter().chain(&m.simulated) {
            let hw = x.half_width.map(|h| format!("{h:.16e}")).unwrap_or_default();
            w.write_record([
                m.name.as_str(),
                m.kind.as_str(),
                x.name.as_str(),
                &format!("{:.16e}", x.value),
                x.units.as_str(),
                x.source.as_str(),
                &hw,
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => to_canonical_json(report),
        Format::Csv => to_csv(report),
    }
}

/// Writes the report to `path`, or to stdout when `path` is `None`.
pub fn emit_report(report: &Report, format: Format, path: Option<&Path>) -> Result<()> {
    let text = render(report, format)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Per-batch simulation samples as `model,metric,batch,value` rows.
pub fn batches_csv(rows: &[(String, String, usize, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["model", "metric", "batch", "value"]).map_err(csv_err)?;
    for (model, metric, batch, value) in rows {
        w.write_record([model.as_str(), metric.as_str(), &batch.to_string(), &format!("{value:.16e}")])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
