//! Model-file schema, parsing and path-addressed validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::birth_death::BirthDeathSpec;
use crate::error::{Error, Result, Violation};
use crate::pgf::Pgf;
use crate::polling::{Policy, PollingQueue, PollingSpec};
use crate::queues::{QueueModel, ServiceDescriptor};
use crate::sim::{Routing, SimConfig};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueueKind {
    MM1,
    MMInf,
    MMm,
    MMmm,
    MG1,
}

/// One entry of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelEntry {
    MarkovChain {
        name: Option<String>,
        matrix: Vec<Vec<f64>>,
        states: Option<Vec<String>>,
        /// Horizon for the n-step matrix and the evolved law.
        steps: Option<u64>,
        initial: Option<Vec<f64>>,
    },
    BirthDeath {
        name: Option<String>,
        process: BirthDeathSpec,
        n_max: Option<usize>,
        tail_tol: Option<f64>,
    },
    Queue {
        name: Option<String>,
        model: QueueKind,
        beta: f64,
        delta: Option<f64>,
        m: Option<usize>,
        es: Option<f64>,
        es2: Option<f64>,
        service: Option<ServiceDescriptor>,
        /// Times at which to evaluate the waiting-time distributions.
        cdf_at: Option<Vec<f64>>,
    },
    Tandem {
        name: Option<String>,
        lambda: f64,
        mu1: f64,
        mu2: f64,
    },
    Polling {
        name: Option<String>,
        /// Both disciplines when absent.
        policy: Option<Policy>,
        lambda: Vec<f64>,
        b1: Vec<f64>,
        b2: Vec<f64>,
        s1: Vec<f64>,
        s2: Vec<f64>,
        delta2: Option<f64>,
        routing: Option<Routing>,
    },
    DiscretePolling {
        name: Option<String>,
        mu: Vec<f64>,
        r: Vec<f64>,
    },
    Pgf {
        name: Option<String>,
        law: Pgf,
    },
    Ruin {
        name: Option<String>,
        initial: Pgf,
        step: Pgf,
        drain: Option<u64>,
        replications: Option<u64>,
        /// Points at which to evaluate the ruin-time root.
        w: Option<Vec<f64>>,
    },
}

impl ModelEntry {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelEntry::MarkovChain { .. } => "markov_chain",
            ModelEntry::BirthDeath { .. } => "birth_death",
            ModelEntry::Queue { .. } => "queue",
            ModelEntry::Tandem { .. } => "tandem",
            ModelEntry::Polling { .. } => "polling",
            ModelEntry::DiscretePolling { .. } => "discrete_polling",
            ModelEntry::Pgf { .. } => "pgf",
            ModelEntry::Ruin { .. } => "ruin",
        }
    }

    fn explicit_name(&self) -> Option<&str> {
        match self {
            ModelEntry::MarkovChain { name, .. }
            | ModelEntry::BirthDeath { name, .. }
            | ModelEntry::Queue { name, .. }
            | ModelEntry::Tandem { name, .. }
            | ModelEntry::Polling { name, .. }
            | ModelEntry::DiscretePolling { name, .. }
            | ModelEntry::Pgf { name, .. }
            | ModelEntry::Ruin { name, .. } => name.as_deref(),
        }
    }

    /// Given name, else `models[i]`.
    pub fn display_name(&self, index: usize) -> String {
        self.explicit_name().map(str::to_string).unwrap_or_else(|| format!("models[{index}]"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default = "default_version")]
    pub version: String,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
}

fn default_version() -> String {
    SCHEMA_VERSION.to_string()
}

/// Parses and validates model-file text.
pub fn parse_model_str(text: &str) -> Result<ModelFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Syntax | serde_json::error::Category::Eof | serde_json::error::Category::Io => {
                Error::Parse(inner.to_string())
            }
            serde_json::error::Category::Data => Error::Schema(vec![Violation { path, message: inner.to_string() }]),
        }
    })?;
    let violations = validate_file(&file);
    if violations.is_empty() {
        Ok(file)
    } else {
        Err(Error::Schema(violations))
    }
}

pub fn parse_model_file(path: &Path) -> Result<ModelFile> {
    parse_model_str(&std::fs::read_to_string(path)?)
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, path: String, message: impl Into<String>) {
        self.out.push(Violation { path, message: message.into() });
    }

    fn positive(&mut self, path: String, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.push(path, format!("must be positive and finite, got {v}"));
        }
    }

    fn nonnegative(&mut self, path: String, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.push(path, format!("must be nonnegative and finite, got {v}"));
        }
    }

    fn required<T>(&mut self, path: String, v: &Option<T>, why: &str) {
        if v.is_none() {
            self.push(path, format!("required {why}"));
        }
    }

    fn nested(&mut self, path: String, r: Result<()>) {
        if let Err(e) = r {
            self.push(path, e.to_string());
        }
    }
}

fn validate_file(file: &ModelFile) -> Vec<Violation> {
    let mut c = Checker { out: Vec::new() };
    if file.version != SCHEMA_VERSION {
        c.push("version".into(), format!("unsupported schema version {:?}", file.version));
    }
    if file.models.is_empty() {
        c.push("models".into(), "at least one model is required");
    }
    if let Some(sim) = &file.sim {
        c.nested("sim".into(), sim.validate());
    }
    for (i, entry) in file.models.iter().enumerate() {
        let p = |field: &str| format!("models[{i}].{field}");
        match entry {
            ModelEntry::MarkovChain { matrix, states, initial, .. } => {
                if matrix.is_empty() {
                    c.push(p("matrix"), "must have at least one row");
                }
                for (r, row) in matrix.iter().enumerate() {
                    if row.len() != matrix.len() {
                        c.push(format!("models[{i}].matrix[{r}]"), format!("has {} entries, expected {}", row.len(), matrix.len()));
                        continue;
                    }
                    if row.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                        c.push(format!("models[{i}].matrix[{r}]"), "entries must be nonnegative");
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > crate::markov::ROW_SUM_TOL {
                        c.push(format!("models[{i}].matrix[{r}]"), format!("row sums to {sum}, not 1"));
                    }
                }
                if let Some(s) = states {
                    if s.len() != matrix.len() {
                        c.push(p("states"), format!("has {} labels for {} states", s.len(), matrix.len()));
                    }
                }
                if let Some(x) = initial {
                    if x.len() != matrix.len() {
                        c.push(p("initial"), format!("has {} entries for {} states", x.len(), matrix.len()));
                    } else if x.iter().any(|v| !(*v >= 0.0)) || (x.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                        c.push(p("initial"), "must be a probability vector");
                    }
                }
            }
            ModelEntry::BirthDeath { process, tail_tol, .. } => {
                c.nested(p("process"), process.validate());
                if let Some(t) = tail_tol {
                    c.positive(p("tail_tol"), *t);
                }
            }
            ModelEntry::Queue { model, beta, delta, m, es, es2, service, cdf_at, .. } => {
                c.positive(p("beta"), *beta);
                if let Some(d) = delta {
                    c.positive(p("delta"), *d);
                }
                if let Some(k) = m {
                    if *k == 0 {
                        c.push(p("m"), "must be at least 1");
                    }
                }
                match model {
                    QueueKind::MM1 | QueueKind::MMInf => c.required(p("delta"), delta, "for this model"),
                    QueueKind::MMm | QueueKind::MMmm => {
                        c.required(p("delta"), delta, "for this model");
                        c.required(p("m"), m, "for this model");
                    }
                    QueueKind::MG1 => {
                        if let Some(s) = service {
                            c.nested(p("service"), s.validate());
                        } else {
                            c.required(p("es"), es, "when no service law is given");
                            c.required(p("es2"), es2, "when no service law is given");
                        }
                        if let Some(x) = es {
                            c.positive(p("es"), *x);
                        }
                        if let (Some(a), Some(b)) = (es, es2) {
                            if !(*b >= a * a * (1.0 - 1e-12)) {
                                c.push(p("es2"), "must be at least es^2");
                            }
                        }
                    }
                }
                if let Some(ts) = cdf_at {
                    if !matches!(model, QueueKind::MM1 | QueueKind::MMm) {
                        c.push(p("cdf_at"), "waiting-time distributions are available for MM1 and MMm only");
                    }
                    for (k, t) in ts.iter().enumerate() {
                        c.nonnegative(format!("models[{i}].cdf_at[{k}]"), *t);
                    }
                }
            }
            ModelEntry::Tandem { lambda, mu1, mu2, .. } => {
                c.positive(p("lambda"), *lambda);
                c.positive(p("mu1"), *mu1);
                c.positive(p("mu2"), *mu2);
            }
            ModelEntry::Polling { lambda, b1, b2, s1, s2, delta2, .. } => {
                let n = lambda.len();
                if n == 0 {
                    c.push(p("lambda"), "at least one queue is required");
                }
                for (field, v) in [("b1", b1), ("b2", b2), ("s1", s1), ("s2", s2)] {
                    if v.len() != n {
                        c.push(p(field), format!("has {} entries, expected {n}", v.len()));
                    }
                }
                for (field, v) in [("lambda", lambda), ("b1", b1), ("s1", s1)] {
                    for (k, x) in v.iter().enumerate() {
                        c.positive(format!("models[{i}].{field}[{k}]"), *x);
                    }
                }
                for k in 0..n.min(b1.len()).min(b2.len()) {
                    if !(b2[k] >= b1[k] * b1[k] * (1.0 - 1e-12)) {
                        c.push(format!("models[{i}].b2[{k}]"), "must be at least b1^2");
                    }
                }
                for k in 0..n.min(s1.len()).min(s2.len()) {
                    if !(s2[k] >= s1[k] * s1[k] * (1.0 - 1e-12)) {
                        c.push(format!("models[{i}].s2[{k}]"), "must be at least s1^2");
                    }
                }
                if let Some(d) = delta2 {
                    c.positive(p("delta2"), *d);
                }
            }
            ModelEntry::DiscretePolling { mu, r, .. } => {
                if mu.is_empty() {
                    c.push(p("mu"), "at least one queue is required");
                }
                if r.len() != mu.len() {
                    c.push(p("r"), format!("has {} entries, expected {}", r.len(), mu.len()));
                }
                for (k, x) in mu.iter().enumerate() {
                    if !(*x > 0.0 && *x < 1.0) {
                        c.push(format!("models[{i}].mu[{k}]"), "must lie in (0, 1)");
                    }
                }
                for (k, x) in r.iter().enumerate() {
                    c.nonnegative(format!("models[{i}].r[{k}]"), *x);
                }
            }
            ModelEntry::Pgf { law, .. } => c.nested(p("law"), law.validate()),
            ModelEntry::Ruin { initial, step, drain, replications, w, .. } => {
                c.nested(p("initial"), initial.validate());
                c.nested(p("step"), step.validate());
                if drain == &Some(0) {
                    c.push(p("drain"), "must be at least 1");
                }
                if let Some(n) = replications {
                    if *n < 64 {
                        c.push(p("replications"), "must be at least 64");
                    }
                }
                if let Some(ws) = w {
                    for (k, x) in ws.iter().enumerate() {
                        if !(*x > 0.0 && *x <= 1.0) {
                            c.push(format!("models[{i}].w[{k}]"), "must lie in (0, 1]");
                        }
                    }
                }
            }
        }
    }
    c.out
}

/// Analytic queue model for a validated entry.
pub fn queue_model(
    kind: QueueKind,
    beta: f64,
    delta: Option<f64>,
    m: Option<usize>,
    es: Option<f64>,
    es2: Option<f64>,
    service: Option<&ServiceDescriptor>,
) -> QueueModel {
    let d = delta.unwrap_or(f64::NAN);
    let m = m.unwrap_or(1);
    match kind {
        QueueKind::MM1 => QueueModel::MM1 { beta, delta: d },
        QueueKind::MMInf => QueueModel::MMInf { beta, delta: d },
        QueueKind::MMm => QueueModel::MMm { beta, delta: d, m },
        QueueKind::MMmm => QueueModel::MMmm { beta, delta: d, m },
        QueueKind::MG1 => {
            let es = es.or(service.map(|s| s.mean())).unwrap_or(f64::NAN);
            let es2 = es2.or(service.map(|s| s.second_moment())).unwrap_or(f64::NAN);
            QueueModel::MG1 { beta, es, es2 }
        }
    }
}

pub fn polling_spec(lambda: &[f64], b1: &[f64], b2: &[f64], s1: &[f64], s2: &[f64], delta2: Option<f64>) -> PollingSpec {
    let queues = (0..lambda.len())
        .map(|k| PollingQueue { lambda: lambda[k], b1: b1[k], b2: b2[k], s1: s1[k], s2: s2[k] })
        .collect();
    PollingSpec { queues, delta2 }
}

/// JSON Schema describing the model file.
pub const MODEL_SCHEMA: &str = include_str!("model.schema.json");
