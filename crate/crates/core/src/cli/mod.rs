//! Model-file driven analyze, simulate and validate runs.

pub mod model;
pub mod report;

use crate::birth_death::{self, Normalization, Recurrence};
use crate::error::{Error, Result, StabilityVerdict};
use crate::markov::{Distribution, Ergodicity, TransitionMatrix};
use crate::pgf;
use crate::polling::{cross_station_moments, cyclic_station_moments, DiscretePollingSpec, DiscreteQueue};
use crate::polling::{self, Policy};
use crate::queues::{self, mg1_arrival_probs, embedded_residual, embedded_stationary, QueueModel, TandemNetwork};
use crate::sim::{self, BatchLog, QueueSim, Routing, SimConfig};

pub use model::{parse_model_file, parse_model_str, ModelEntry, ModelFile, QueueKind, MODEL_SCHEMA};
pub use report::{emit_report, render, Delta, Format, Metric, ModelReport, Report, Status};

/// Deltas pass within this many half-widths unless overridden.
pub const DEFAULT_TOLERANCE: f64 = 3.0;
/// Ratio margin for the birth-death recurrence test.
pub const RECURRENCE_MARGIN: f64 = 1e-3;
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const DEFAULT_RUIN_REPLICATIONS: u64 = 100_000;
/// States of a stationary law listed individually in reports.
pub const LISTED_STATES: usize = 20;
/// Tandem balance check window.
pub const BALANCE_WINDOW: usize = 20;
const EMBEDDED_TERMS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analyze,
    Simulate,
    Validate,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Analyze => "analyze",
            Mode::Simulate => "simulate",
            Mode::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub tolerance: f64,
    /// Relative error injected into analytic values before comparison.
    /// Harness self-test only.
    pub perturb: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: None, horizon: None, tolerance: DEFAULT_TOLERANCE, perturb: 0.0 }
    }
}

impl RunOptions {
    pub fn sim_config(&self, file: &ModelFile) -> SimConfig {
        let mut cfg = file.sim.unwrap_or_default();
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        cfg
    }
}

/// One per-batch observation: `(model, metric, batch, value)`.
pub type BatchRow = (String, String, usize, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub report: Report,
    pub batches: Vec<BatchRow>,
}

impl Run {
    /// 0 when clean, 2 on a validation breach.
    pub fn exit_code(&self) -> i32 {
        let bad_model = self.report.command == "validate" && self.report.models.iter().any(|m| m.status != Status::Ok);
        if bad_model || self.report.breaches() > 0 {
            2
        } else {
            0
        }
    }
}

pub fn run_analyze(file: &ModelFile) -> Report {
    run(file, Mode::Analyze, &RunOptions::default()).report
}

pub fn run_simulate(file: &ModelFile, opts: &RunOptions) -> Run {
    run(file, Mode::Simulate, opts)
}

pub fn run_validate(file: &ModelFile, opts: &RunOptions) -> Run {
    run(file, Mode::Validate, opts)
}

/// Runs every entry, one thread each, and assembles the report in name order.
pub fn run(file: &ModelFile, mode: Mode, opts: &RunOptions) -> Run {
    let cfg = opts.sim_config(file);
    let mut results: Vec<(ModelReport, Vec<BatchRow>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = file
            .models
            .iter()
            .enumerate()
            .map(|(i, entry)| scope.spawn(move || run_entry(entry, &entry.display_name(i), mode, &cfg, opts)))
            .collect();
        handles
            .into_iter()
            .zip(&file.models)
            .enumerate()
            .map(|(i, (h, entry))| {
                h.join().unwrap_or_else(|_| {
                    let mut rep = ModelReport::new(&entry.display_name(i), entry.kind());
                    rep.fail(&Error::Validation("model run panicked".into()));
                    (rep, Vec::new())
                })
            })
            .collect()
    });
    results.sort_by(|a, b| a.0.name.cmp(&b.0.name));
    let seed = (mode != Mode::Analyze).then_some(cfg.seed);
    let mut models = Vec::with_capacity(results.len());
    let mut batches = Vec::new();
    for (rep, rows) in results {
        models.push(rep);
        batches.extend(rows);
    }
    Run { report: Report { command: mode.name().into(), version: file.version.clone(), seed, models }, batches }
}

fn run_entry(entry: &ModelEntry, name: &str, mode: Mode, cfg: &SimConfig, opts: &RunOptions) -> (ModelReport, Vec<BatchRow>) {
    let mut rep = ModelReport::new(name, entry.kind());
    if let Err(e) = analytic(entry, &mut rep) {
        rep.fail(&e);
        if mode == Mode::Simulate {
            rep.metrics.clear();
        }
        return (rep, Vec::new());
    }
    if mode == Mode::Analyze {
        return (rep, Vec::new());
    }
    let mut rows = Vec::new();
    match simulate(entry, &mut rep, cfg) {
        Ok(logs) => {
            for (prefix, log) in logs {
                rows.extend(log.rows().into_iter().map(|(m, b, v)| (name.to_string(), format!("{prefix}{m}"), b, v)));
            }
        }
        Err(e) => rep.fail(&e),
    }
    match mode {
        Mode::Simulate => rep.metrics.clear(),
        Mode::Validate if comparable(entry) => compare(&mut rep, opts),
        _ => {}
    }
    (rep, rows)
}

/// Whether the simulation models exactly what the analytics solve.
fn comparable(entry: &ModelEntry) -> bool {
    match entry {
        ModelEntry::Polling { delta2, .. } => delta2.is_none(),
        ModelEntry::Ruin { drain, .. } => drain.unwrap_or(1) == 1,
        _ => true,
    }
}

fn compare(rep: &mut ModelReport, opts: &RunOptions) {
    let mut deltas = Vec::new();
    for s in &rep.simulated {
        let Some(hw) = s.half_width else { continue };
        let Some(a) = rep.analytic_value(&s.name) else { continue };
        let analytic = a.value + opts.perturb * a.value.abs().max(1.0);
        let delta = s.value - analytic;
        deltas.push(Delta {
            metric: s.name.clone(),
            analytic,
            simulated: s.value,
            half_width: hw,
            delta,
            units: s.units.clone(),
            within_ci: delta.abs() <= hw,
            pass: delta.abs() <= opts.tolerance * hw,
        });
    }
    rep.deltas = deltas;
}

fn stability_verdict(rep: &mut ModelReport, load: f64) {
    rep.verdict("stability", format!("{}, rho={load}", StabilityVerdict::from_load(load)));
}

fn analytic(entry: &ModelEntry, rep: &mut ModelReport) -> Result<()> {
    match entry {
        ModelEntry::MarkovChain { matrix, states, steps, initial, .. } => markov_chain(rep, matrix, states, *steps, initial),
        ModelEntry::BirthDeath { process, n_max, tail_tol, .. } => {
            let n_max = n_max.unwrap_or(birth_death::DEFAULT_N_MAX);
            let tail_tol = tail_tol.unwrap_or(DEFAULT_TAIL_TOL);
            let src = "birth_death.recurrence_series";
            match birth_death::classify_recurrence(process, n_max, RECURRENCE_MARGIN)? {
                Recurrence::Recurrent => rep.verdict("recurrence", "recurrent"),
                Recurrence::Transient { sum_bound } => {
                    rep.verdict("recurrence", "transient");
                    rep.metric("recurrence_sum_bound", sum_bound, "1", src);
                }
                Recurrence::Inconclusive { .. } => rep.verdict("recurrence", "inconclusive"),
            }
            let src = "birth_death.normalization";
            match birth_death::normalization(process, n_max, tail_tol)? {
                Normalization::Finite { value, tail_bound } => {
                    rep.verdict("ergodic", "yes");
                    rep.metric("S", value, "1", src);
                    rep.metric("S_tail_bound", tail_bound, "1", src);
                    let pi = birth_death::stationary_distribution(process, n_max, tail_tol)?;
                    let src = "birth_death.stationary_law";
                    for (n, p) in pi.probs.iter().take(LISTED_STATES + 1).enumerate() {
                        rep.metric(format!("pi[{n}]"), *p, "probability", src);
                    }
                    rep.metric("L", pi.mean(), "customers", src);
                    rep.metric("tail_mass", pi.tail_mass, "probability", src);
                }
                Normalization::Diverges => rep.verdict("ergodic", "no"),
                Normalization::Undetermined { partial_sum } => {
                    rep.verdict("ergodic", "undetermined");
                    rep.metric("S_partial", partial_sum, "1", src);
                }
            }
            Ok(())
        }
        ModelEntry::Queue { model, beta, delta, m, es, es2, service, cdf_at, .. } => {
            let q = model::queue_model(*model, *beta, *delta, *m, *es, *es2, service.as_ref());
            queue_analytic(rep, &q, service.as_ref(), cdf_at.as_deref().unwrap_or(&[]))
        }
        ModelEntry::Tandem { lambda, mu1, mu2, .. } => {
            let net = TandemNetwork::new(*lambda, *mu1, *mu2)?;
            let t = net.metrics();
            let src = "tandem.product_form";
            stability_verdict(rep, t.rho1.max(t.rho2));
            rep.metric("rho1", t.rho1, "1", src);
            rep.metric("rho2", t.rho2, "1", src);
            rep.metric("L1", t.l1, "customers", src);
            rep.metric("L2", t.l2, "customers", src);
            rep.metric("L", t.l, "customers", src);
            rep.metric("W", t.w, "time", src);
            rep.metric("P00", t.p00, "probability", src);
            rep.metric("balance_residual", net.balance_residual(BALANCE_WINDOW), "probability/time", "tandem.global_balance");
            Ok(())
        }
        ModelEntry::Polling { policy, lambda, b1, b2, s1, s2, delta2, routing, .. } => {
            let spec = model::polling_spec(lambda, b1, b2, s1, s2, *delta2);
            spec.validate()?;
            stability_verdict(rep, spec.rho());
            rep.metric("rho", spec.rho(), "1", "polling.load");
            rep.metric("E C", spec.mean_cycle(), "time", "polling.mean_cycle");
            if !matches!(routing.as_ref().unwrap_or(&Routing::Cyclic), Routing::Cyclic) {
                rep.verdict("analytics", "cyclic routing only; simulation estimates reported");
                return Ok(());
            }
            for pol in policies(*policy) {
                polling_analytic(rep, &spec, pol)?;
            }
            match polling::takagi_approx_waits(&spec) {
                Ok(w) => {
                    rep.verdict("takagi", "approximate");
                    for (i, x) in w.iter().enumerate() {
                        rep.metric(format!("takagi.W[{i}]"), *x, "time", "polling.takagi_approximation");
                    }
                }
                Err(e) => rep.verdict("takagi", e.to_string()),
            }
            Ok(())
        }
        ModelEntry::DiscretePolling { mu, r, .. } => {
            let queues = mu.iter().zip(r).map(|(&mu, &r)| DiscreteQueue { mu, r }).collect();
            let spec = DiscretePollingSpec::new(queues)?;
            stability_verdict(rep, spec.mu());
            let diag = cyclic_station_moments(&spec)?;
            let cross = cross_station_moments(&spec, &diag)?;
            for (i, row) in cross.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let src = if i == j { "discrete_polling.fixed_point" } else { "discrete_polling.cross_moments" };
                    rep.metric(format!("f[{i}]({j})"), *v, "customers", src);
                }
            }
            Ok(())
        }
        ModelEntry::Pgf { law, .. } => {
            let m = pgf::pgf_moments(law, pgf::DEFAULT_TOL)?;
            let src = "pgf.derivatives_at_one";
            rep.metric("mean", m.mean, "1", src);
            rep.metric("variance", m.variance, "1", src);
            rep.metric("tail_bound", m.tail_bound, "probability", src);
            for k in 0..=10 {
                rep.metric(format!("p[{k}]"), law.pmf(k), "probability", "pgf.coefficients");
            }
            match pgf::extinction_fixed_point(law, pgf::DEFAULT_TOL)? {
                Some(q) => {
                    rep.verdict("extinction", "possible survival");
                    rep.metric("extinction_root", q, "probability", "pgf.fixed_point_iteration");
                }
                None => rep.verdict("extinction", "certain"),
            }
            Ok(())
        }
        ModelEntry::Ruin { initial, step, drain, w, .. } => {
            if drain.unwrap_or(1) != 1 {
                rep.verdict("analytics", "unit drain only; simulation estimates reported");
                return Ok(());
            }
            let (mean, var) = pgf::ruin_time_moments(initial, step)?;
            let src = "ruin.corollary_moments";
            rep.metric("E[T]", mean, "steps", src);
            rep.metric("Var[T]", var, "steps^2", src);
            for x in w.as_deref().unwrap_or(&[]) {
                let theta = pgf::ruin_root_theta(step, *x, pgf::DEFAULT_TOL)?;
                rep.metric(format!("theta({x})"), theta, "1", "ruin.root_iteration");
            }
            Ok(())
        }
    }
}

fn markov_chain(
    rep: &mut ModelReport,
    matrix: &[Vec<f64>],
    states: &Option<Vec<String>>,
    steps: Option<u64>,
    initial: &Option<Vec<f64>>,
) -> Result<()> {
    let p = match states {
        Some(s) => TransitionMatrix::with_labels(s.clone(), matrix.to_vec())?,
        None => TransitionMatrix::new(matrix.to_vec())?,
    };
    let labels = p.states().to_vec();
    let cls = p.classify();
    rep.verdict("irreducible", cls.is_irreducible().to_string());
    let erg = match p.ergodicity() {
        Ergodicity::Ergodic => "ergodic".to_string(),
        Ergodicity::Periodic(d) => format!("periodic, d={d}"),
        Ergodicity::Reducible => "reducible".to_string(),
    };
    rep.verdict("ergodicity", erg);
    for (label, kind) in labels.iter().zip(&cls.kinds) {
        let kind = serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        rep.verdict(&format!("state[{label}]"), kind);
    }
    if cls.is_irreducible() {
        let pi = p.stationary()?;
        for (label, x) in labels.iter().zip(pi.weights()) {
            rep.metric(format!("pi[{label}]"), *x, "probability", "markov.stationary_solve");
        }
    }
    if let Some(n) = steps {
        let pn = p.n_step(n);
        for (i, a) in labels.iter().enumerate() {
            for (j, b) in labels.iter().enumerate() {
                rep.metric(format!("P^{n}[{a},{b}]"), pn.get(i, j), "probability", "markov.chapman_kolmogorov");
            }
        }
        if let Some(x) = initial {
            let law = p.evolve(&Distribution::new(x.clone())?, n)?;
            for (label, v) in labels.iter().zip(law.weights()) {
                rep.metric(format!("pi_{n}[{label}]"), *v, "probability", "markov.chapman_kolmogorov");
            }
        }
    }
    Ok(())
}

fn queue_source(q: &QueueModel) -> &'static str {
    match q {
        QueueModel::MM1 { .. } => "mm1.closed_form",
        QueueModel::MMInf { .. } => "mminf.poisson_law",
        QueueModel::MMm { .. } => "mmm.erlang_c",
        QueueModel::MMmm { .. } => "mmmm.erlang_b",
        QueueModel::MG1 { .. } => "mg1.pollaczek_khinchine",
    }
}

fn queue_analytic(
    rep: &mut ModelReport,
    q: &QueueModel,
    service: Option<&queues::ServiceDescriptor>,
    cdf_at: &[f64],
) -> Result<()> {
    let m = q.metrics()?;
    let src = queue_source(q);
    rep.verdict("model", q.name());
    match q {
        QueueModel::MMmm { .. } => rep.verdict("stability", "positive recurrent, finite state space"),
        QueueModel::MMInf { .. } => rep.verdict("stability", "positive recurrent, infinitely many servers"),
        _ => stability_verdict(rep, m.u.unwrap_or(m.rho)),
    }
    rep.metric("rho", m.rho, "1", src);
    if let Some(u) = m.u {
        rep.metric("u", u, "1", src);
    }
    rep.metric("L", m.l, "customers", src);
    rep.metric("Lq", m.lq, "customers", src);
    rep.metric("Ls", m.ls, "customers", src);
    rep.metric("W", m.w, "time", src);
    rep.metric("Wq", m.wq, "time", src);
    rep.metric("Ws", m.ws, "time", src);
    rep.metric("pi0", m.pi0, "probability", src);
    rep.metric("lambda_eff", m.effective_arrival, "customers/time", src);
    if let Some(b) = m.blocking {
        rep.metric("blocking", b, "probability", src);
    }
    if let Some(c) = m.delay_prob {
        rep.metric("delay_prob", c, "probability", src);
    }
    if let Some(v) = m.var_n {
        rep.metric("var_N", v, "customers^2", src);
    }
    rep.metric("identity_residual", m.identity_residual(), "customers", "little.identity_check");
    for &t in cdf_at {
        let (w, wq) = queues::waiting_time_cdf(q, t)?;
        rep.metric(format!("P(W<={t})"), w, "probability", "waiting_time.distribution");
        rep.metric(format!("P(Wq<={t})"), wq, "probability", "waiting_time.distribution");
    }
    if let (QueueModel::MG1 { beta, .. }, Some(s)) = (q, service) {
        let arrivals = mg1_arrival_probs(*beta, s, EMBEDDED_TERMS)?;
        let pi = embedded_stationary(&arrivals, EMBEDDED_TERMS)?;
        let src = "mg1.embedded_chain";
        for (n, p) in pi.probs.iter().take(LISTED_STATES + 1).enumerate() {
            rep.metric(format!("embedded_pi[{n}]"), *p, "probability", src);
        }
        rep.metric("embedded_L", pi.mean(), "customers", src);
        rep.metric("embedded_tail_mass", pi.tail_mass, "probability", src);
        rep.metric("embedded_residual", embedded_residual(&arrivals, &pi.probs), "probability", src);
    }
    Ok(())
}

fn policies(p: Option<Policy>) -> Vec<Policy> {
    p.map(|p| vec![p]).unwrap_or_else(|| vec![Policy::Exhaustive, Policy::Gated])
}

fn policy_name(p: Policy) -> &'static str {
    match p {
        Policy::Exhaustive => "exhaustive",
        Policy::Gated => "gated",
    }
}

fn polling_analytic(rep: &mut ModelReport, spec: &polling::PollingSpec, pol: Policy) -> Result<()> {
    let a = polling::analyze(spec, pol)?;
    let p = policy_name(pol);
    for (i, w) in a.waits.iter().enumerate() {
        rep.metric(format!("{p}.W[{i}]"), *w, "time", &format!("polling.{p}.mean_wait"));
    }
    let (period, src) = match pol {
        Policy::Exhaustive => ("I", "polling.exhaustive.intervisit_moments"),
        Policy::Gated => ("C", "polling.gated.cycle_moments"),
    };
    for (i, m) in a.periods.iter().enumerate() {
        rep.metric(format!("{p}.E {period}[{i}]"), m.mean, "time", src);
        rep.metric(format!("{p}.E {period}2[{i}]"), m.second, "time^2", src);
    }
    let src = format!("polling.{p}.covariance_system");
    for (i, row) in a.covariances.r.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            rep.metric(format!("{p}.r[{i}][{j}]"), *v, "time^2", &src);
        }
    }
    rep.metric(format!("{p}.system_residual"), a.covariances.residual, "time^2", &src);
    rep.metric(format!("{p}.condition"), a.covariances.condition, "1", &src);
    rep.metric(format!("{p}.pcl_residual"), a.pcl_residual, "time", &format!("polling.{p}.pseudo_conservation"));
    Ok(())
}

/// Runs the simulation oracle for `entry`, returning named batch logs.
fn simulate(entry: &ModelEntry, rep: &mut ModelReport, cfg: &SimConfig) -> Result<Vec<(String, BatchLog)>> {
    match entry {
        ModelEntry::Queue { model, beta, delta, m, es, es2, service, .. } => {
            let q = model::queue_model(*model, *beta, *delta, *m, *es, *es2, service.as_ref());
            let qs = match (model, service) {
                (QueueKind::MG1, Some(s)) => QueueSim::mg1(*beta, s)?,
                _ => QueueSim::from_model(&q)?,
            };
            let e = sim::simulate_single_queue(&qs, cfg)?;
            let out = &mut rep.simulated;
            out.push(Metric::simulated("L", &e.l, "customers"));
            out.push(Metric::simulated("Lq", &e.lq, "customers"));
            out.push(Metric::simulated("W", &e.w, "time"));
            out.push(Metric::simulated("Wq", &e.wq, "time"));
            out.push(Metric::simulated("pi0", &e.pi0, "probability"));
            out.push(Metric::simulated("lambda_eff", &e.throughput, "customers/time"));
            if let Some(b) = &e.blocking {
                out.push(Metric::simulated("blocking", b, "probability"));
            }
            Ok(vec![(String::new(), e.batches)])
        }
        ModelEntry::Tandem { lambda, mu1, mu2, .. } => {
            let e = sim::simulate_tandem(*lambda, *mu1, *mu2, cfg)?;
            rep.simulated.push(Metric::simulated("L", &e.l, "customers"));
            rep.simulated.push(Metric::simulated("W", &e.w, "time"));
            rep.simulated.push(Metric::simulated("P00", &e.p00, "probability"));
            for (i, w) in e.warnings.iter().enumerate() {
                rep.verdict(&format!("sim_warning[{i}]"), w.clone());
            }
            Ok(vec![(String::new(), e.batches)])
        }
        ModelEntry::Polling { policy, lambda, b1, b2, s1, s2, delta2, routing, .. } => {
            let spec = model::polling_spec(lambda, b1, b2, s1, s2, *delta2);
            let routing = routing.clone().unwrap_or_default();
            if delta2.is_some() {
                rep.verdict("sim_switchover", "independent switchovers; delta2 not simulated");
            }
            let mut logs = Vec::new();
            for pol in policies(*policy) {
                let p = policy_name(pol);
                let e = sim::simulate_polling(&spec, pol, &routing, cfg)?;
                for (i, w) in e.waits.iter().enumerate() {
                    rep.simulated.push(Metric::simulated(format!("{p}.W[{i}]"), w, "time"));
                }
                let (period, moments) = match pol {
                    Policy::Exhaustive => ("I", &e.intervisit),
                    Policy::Gated => ("C", &e.cycle),
                };
                for (i, m) in moments.iter().enumerate() {
                    rep.simulated.push(sample_moment(format!("{p}.E {period}[{i}]"), m.mean, "time"));
                    rep.simulated.push(sample_moment(format!("{p}.E {period}2[{i}]"), m.second, "time^2"));
                }
                if let Some(r) = &e.covariances {
                    for (i, row) in r.iter().enumerate() {
                        for (j, v) in row.iter().enumerate() {
                            rep.simulated.push(sample_moment(format!("{p}.r[{i}][{j}]"), *v, "time^2"));
                        }
                    }
                }
                logs.push((format!("{p}."), e.batches));
            }
            Ok(logs)
        }
        ModelEntry::Ruin { initial, step, drain, replications, .. } => {
            let n = replications.unwrap_or(DEFAULT_RUIN_REPLICATIONS);
            let e = sim::simulate_ruin(initial, step, drain.unwrap_or(1), n, cfg.batches, cfg.seed)?;
            rep.simulated.push(Metric::simulated("E[T]", &e.mean, "steps"));
            rep.simulated.push(Metric::simulated("Var[T]", &e.variance, "steps^2"));
            Ok(Vec::new())
        }
        ModelEntry::MarkovChain { .. } | ModelEntry::BirthDeath { .. } | ModelEntry::DiscretePolling { .. } | ModelEntry::Pgf { .. } => {
            rep.verdict("simulation", "not applicable");
            Ok(Vec::new())
        }
    }
}

fn sample_moment(name: String, value: f64, units: &str) -> Metric {
    Metric { name, value, units: units.into(), source: "sim.sample_moments".into(), half_width: None }
}
