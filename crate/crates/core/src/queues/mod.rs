//! Closed-form metrics for Kendall-Lee single-station models and the
//! two-node tandem network.

mod mg1;
mod tandem;

pub use mg1::{
    embedded_residual, embedded_stationary, embedded_transition_rows, mg1_arrival_probs, mg1_metrics,
    ArrivalProbabilities, ServiceDescriptor,
};
pub use tandem::{TandemMetrics, TandemNetwork};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result, StabilityVerdict};

/// Mean-value performance measures of a stationary queue.
///
/// Counts are in customers, times in the model's time unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    /// Offered load `beta/delta` (or `beta E[s]`).
    pub rho: f64,
    /// Per-server utilisation; absent for infinitely many servers.
    pub u: Option<f64>,
    pub l: f64,
    pub lq: f64,
    pub ls: f64,
    pub w: f64,
    pub wq: f64,
    pub ws: f64,
    pub pi0: f64,
    /// Rate of customers actually admitted.
    pub effective_arrival: f64,
    /// Erlang B, loss systems only.
    pub blocking: Option<f64>,
    /// Erlang C, multi-server delay systems only.
    pub delay_prob: Option<f64>,
    /// Variance of the number in system, where known in closed form.
    pub var_n: Option<f64>,
}

impl PerformanceMetrics {
    /// Largest violation of `L = Lq + Ls`, `W = Wq + Ws` and Little's law.
    pub fn identity_residual(&self) -> f64 {
        let lam = self.effective_arrival;
        [
            self.l - self.lq - self.ls,
            self.w - self.wq - self.ws,
            self.l - lam * self.w,
            self.lq - lam * self.wq,
        ]
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
    }
}

/// Kendall-Lee model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum QueueModel {
    MM1 { beta: f64, delta: f64 },
    MMInf { beta: f64, delta: f64 },
    MMm { beta: f64, delta: f64, m: usize },
    MMmm { beta: f64, delta: f64, m: usize },
    MG1 { beta: f64, es: f64, es2: f64 },
}

impl QueueModel {
    pub fn metrics(&self) -> Result<PerformanceMetrics> {
        match *self {
            QueueModel::MM1 { beta, delta } => mm1_metrics(beta, delta),
            QueueModel::MMInf { beta, delta } => mminf_metrics(beta, delta),
            QueueModel::MMm { beta, delta, m } => mmm_metrics(beta, delta, m),
            QueueModel::MMmm { beta, delta, m } => erlang_loss_metrics(beta, delta, m),
            QueueModel::MG1 { beta, es, es2 } => mg1_metrics(beta, es, es2),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QueueModel::MM1 { .. } => "M/M/1",
            QueueModel::MMInf { .. } => "M/M/inf",
            QueueModel::MMm { .. } => "M/M/m",
            QueueModel::MMmm { .. } => "M/M/m/m",
            QueueModel::MG1 { .. } => "M/G/1",
        }
    }
}

fn unstable(load: f64) -> Error {
    Error::Unstable { load, verdict: StabilityVerdict::from_load(load) }
}

/// M/M/1 with arrival rate `beta` and service rate `delta`.
pub fn mm1_metrics(beta: f64, delta: f64) -> Result<PerformanceMetrics> {
    ensure_positive("beta", beta)?;
    ensure_positive("delta", delta)?;
    let rho = beta / delta;
    if rho >= 1.0 {
        return Err(unstable(rho));
    }
    let es = 1.0 / delta;
    Ok(PerformanceMetrics {
        rho,
        u: Some(rho),
        l: rho / (1.0 - rho),
        lq: rho * rho / (1.0 - rho),
        ls: rho,
        w: 1.0 / (delta - beta),
        wq: es * rho / (1.0 - rho),
        ws: es,
        pi0: 1.0 - rho,
        effective_arrival: beta,
        blocking: None,
        delay_prob: None,
        var_n: Some(rho / ((1.0 - rho) * (1.0 - rho))),
    })
}

/// M/M/inf: always ergodic with Poisson(`beta/delta`) occupancy.
pub fn mminf_metrics(beta: f64, delta: f64) -> Result<PerformanceMetrics> {
    ensure_positive("beta", beta)?;
    ensure_positive("delta", delta)?;
    let eta = beta / delta;
    Ok(PerformanceMetrics {
        rho: eta,
        u: None,
        l: eta,
        lq: 0.0,
        ls: eta,
        w: 1.0 / delta,
        wq: 0.0,
        ws: 1.0 / delta,
        pi0: (-eta).exp(),
        effective_arrival: beta,
        blocking: None,
        delay_prob: None,
        var_n: Some(eta),
    })
}

/// Running sums of `rho^n/n!`, rescaled whenever they threaten to overflow.
///
/// Returns `(sum_{n<m} t_n, t_m, t_0)` all multiplied by the same unknown factor.
fn scaled_poisson_terms(rho: f64, m: usize) -> (f64, f64, f64) {
    let mut term = 1.0f64;
    let mut head = 0.0f64;
    let mut one = 1.0f64;
    for n in 0..m {
        head += term;
        term *= rho / (n + 1) as f64;
        if term > 1e250 || head > 1e250 {
            term *= 1e-250;
            head *= 1e-250;
            one *= 1e-250;
        }
    }
    (head, term, one)
}

/// M/M/m delay system with `m` servers of rate `delta` each.
pub fn mmm_metrics(beta: f64, delta: f64, m: usize) -> Result<PerformanceMetrics> {
    ensure_positive("beta", beta)?;
    ensure_positive("delta", delta)?;
    if m == 0 {
        return Err(Error::Validation("m must be at least 1".into()));
    }
    let rho = beta / delta;
    let u = rho / m as f64;
    if u >= 1.0 {
        return Err(unstable(u));
    }
    let (head, last, one) = scaled_poisson_terms(rho, m);
    let queue_part = last / (1.0 - u);
    let s = head + queue_part;
    let pi0 = one / s;
    let c = queue_part / s;
    let lq = c * u / (1.0 - u);
    let wq = lq / beta;
    let w = wq + 1.0 / delta;
    Ok(PerformanceMetrics {
        rho,
        u: Some(u),
        l: beta * w,
        lq,
        ls: rho,
        w,
        wq,
        ws: 1.0 / delta,
        pi0,
        effective_arrival: beta,
        blocking: None,
        delay_prob: Some(c),
        var_n: None,
    })
}

/// Erlang B by direct summation of the truncated Poisson law.
pub fn erlang_b(m: usize, rho: f64) -> f64 {
    let (head, last, _) = scaled_poisson_terms(rho, m);
    last / (head + last)
}

/// Erlang B by `B_k = rho B_(k-1) / (k + rho B_(k-1))`, `B_0 = 1`.
pub fn erlang_b_recursive(m: usize, rho: f64) -> f64 {
    (1..=m).fold(1.0, |b, k| rho * b / (k as f64 + rho * b))
}

/// Erlang C: probability an arrival to M/M/m has to wait.
pub fn erlang_c(m: usize, rho: f64) -> Result<f64> {
    let u = rho / m as f64;
    if u >= 1.0 {
        return Err(unstable(u));
    }
    let (head, last, _) = scaled_poisson_terms(rho, m);
    let q = last / (1.0 - u);
    Ok(q / (head + q))
}

/// M/M/m/m loss system.
pub fn erlang_loss_metrics(beta: f64, delta: f64, m: usize) -> Result<PerformanceMetrics> {
    ensure_positive("beta", beta)?;
    ensure_positive("delta", delta)?;
    if m == 0 {
        return Err(Error::Validation("m must be at least 1".into()));
    }
    let rho = beta / delta;
    let (head, last, one) = scaled_poisson_terms(rho, m);
    let total = head + last;
    let b = last / total;
    let carried = rho * (1.0 - b);
    Ok(PerformanceMetrics {
        rho,
        u: Some(carried / m as f64),
        l: carried,
        lq: 0.0,
        ls: carried,
        w: 1.0 / delta,
        wq: 0.0,
        ws: 1.0 / delta,
        pi0: one / total,
        effective_arrival: beta * (1.0 - b),
        blocking: Some(b),
        delay_prob: None,
        var_n: None,
    })
}

/// `(W(t), Wq(t))`: distribution functions of sojourn and queueing delay.
pub fn waiting_time_cdf(model: &QueueModel, t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::Validation(format!("t must be nonnegative, got {t}")));
    }
    match *model {
        QueueModel::MM1 { beta, delta } => {
            let m = mm1_metrics(beta, delta)?;
            let decay = (-t / m.w).exp();
            Ok((1.0 - decay, 1.0 - m.rho * decay))
        }
        QueueModel::MMm { beta, delta, m } => {
            let metrics = mmm_metrics(beta, delta, m)?;
            let c = metrics.delay_prob.unwrap_or(0.0);
            let u = metrics.u.unwrap_or(0.0);
            let rho = metrics.rho;
            let mf = m as f64;
            let queue_decay = (-mf * delta * t * (1.0 - u)).exp();
            let wq = 1.0 - c * queue_decay;
            let gap = mf - 1.0 - rho;
            let w = if gap.abs() < 1e-9 {
                1.0 - (1.0 + c * delta * t) * (-delta * t).exp()
            } else {
                let wq0 = 1.0 - c;
                1.0 + (-delta * t).exp() * (rho - mf + wq0) / gap + queue_decay * c / gap
            };
            Ok((w, wq))
        }
        _ => Err(Error::Unsupported(format!("waiting-time distribution for {}", model.name()))),
    }
}
