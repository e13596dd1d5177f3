use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{unstable, PerformanceMetrics};
use crate::birth_death::TruncatedDistribution;
use crate::error::{ensure_positive, Error, Result};

/// Service-time law of an M/G/1 queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceDescriptor {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    /// Finite support `values` with probabilities `probs`.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    /// Piecewise-linear density through `(t, f(t))` knots, zero outside.
    Density { points: Vec<[f64; 2]> },
}

impl ServiceDescriptor {
    pub fn validate(&self) -> Result<()> {
        match self {
            ServiceDescriptor::Exponential { rate } => ensure_positive("rate", *rate),
            ServiceDescriptor::Deterministic { value } => ensure_positive("value", *value),
            ServiceDescriptor::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::Validation("discrete service needs matching nonempty values and probs".into()));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Validation("service values must be finite and nonnegative".into()));
                }
                check_probs(probs)
            }
            ServiceDescriptor::Density { points } => {
                if points.len() < 2 {
                    return Err(Error::Validation("density needs at least two knots".into()));
                }
                if points.windows(2).any(|w| !(w[1][0] > w[0][0])) || points[0][0] < 0.0 {
                    return Err(Error::Validation("density knots must be nonnegative and strictly increasing".into()));
                }
                if points.iter().any(|p| !(p[1].is_finite() && p[1] >= 0.0)) {
                    return Err(Error::Validation("density values must be finite and nonnegative".into()));
                }
                let mass = self.moment(0);
                if (mass - 1.0).abs() > 1e-9 {
                    return Err(Error::Validation(format!("density integrates to {mass}, not 1")));
                }
                Ok(())
            }
        }
    }

    /// Raw moment `E[s^k]` for `k` in `0..=2`.
    pub fn moment(&self, k: i32) -> f64 {
        match self {
            ServiceDescriptor::Exponential { rate } => match k {
                0 => 1.0,
                1 => 1.0 / rate,
                _ => 2.0 / (rate * rate),
            },
            ServiceDescriptor::Deterministic { value } => value.powi(k),
            ServiceDescriptor::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| p * v.powi(k)).sum()
            }
            ServiceDescriptor::Density { points } => {
                // exact for polynomial times linear density: Simpson per segment
                points
                    .windows(2)
                    .map(|w| {
                        let (t0, f0, t1, f1) = (w[0][0], w[0][1], w[1][0], w[1][1]);
                        let tm = 0.5 * (t0 + t1);
                        let fm = 0.5 * (f0 + f1);
                        (t1 - t0) / 6.0 * (f0 * t0.powi(k) + 4.0 * fm * tm.powi(k) + f1 * t1.powi(k))
                    })
                    .sum()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn second_moment(&self) -> f64 {
        self.moment(2)
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Validation("probabilities must be nonnegative".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Poisson(`x`) masses at `0..=j_max`.
fn poisson_pmfs(x: f64, j_max: usize) -> Vec<f64> {
    if x < 700.0 {
        let mut p = (-x).exp();
        (0..=j_max)
            .map(|j| {
                if j > 0 {
                    p *= x / j as f64;
                }
                p
            })
            .collect()
    } else {
        (0..=j_max)
            .map(|j| {
                let jf = j as f64;
                (-x + jf * x.ln() - ln_gamma(jf + 1.0)).exp()
            })
            .collect()
    }
}

fn poisson_pmf(j: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    let jf = j as f64;
    (-x + jf * x.ln() - ln_gamma(jf + 1.0)).exp()
}

/// Arrivals during one service: `a_j` for `j = 0..=j_max` plus the mass beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProbabilities {
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

impl ArrivalProbabilities {
    /// Mean number of arrivals per service over the retained support.
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(j, a)| j as f64 * a).sum()
    }

    /// Probability generating function over the retained support.
    pub fn pgf(&self, z: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, a| acc * z + a)
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `a_j = int e^(-beta t) (beta t)^j / j! dG(t)` for the given service law.
pub fn mg1_arrival_probs(beta: f64, service: &ServiceDescriptor, j_max: usize) -> Result<ArrivalProbabilities> {
    ensure_positive("beta", beta)?;
    service.validate()?;
    let probs: Vec<f64> = match service {
        ServiceDescriptor::Exponential { rate } => {
            let p = rate / (beta + rate);
            let q = beta / (beta + rate);
            (0..=j_max).map(|j| p * q.powi(j as i32)).collect()
        }
        ServiceDescriptor::Deterministic { value } => poisson_pmfs(beta * value, j_max),
        ServiceDescriptor::Discrete { values, probs } => {
            let mut out = vec![0.0; j_max + 1];
            for (v, p) in values.iter().zip(probs) {
                for (o, q) in out.iter_mut().zip(poisson_pmfs(beta * v, j_max)) {
                    *o += p * q;
                }
            }
            out
        }
        ServiceDescriptor::Density { points } => (0..=j_max)
            .map(|j| {
                points
                    .windows(2)
                    .map(|w| {
                        let (t0, f0, t1, f1) = (w[0][0], w[0][1], w[1][0], w[1][1]);
                        let density = |t: f64| f0 + (f1 - f0) * (t - t0) / (t1 - t0);
                        adaptive_simpson(&|t: f64| density(t) * poisson_pmf(j, beta * t), t0, t1, 1e-15)
                    })
                    .sum()
            })
            .collect(),
    };
    let tail_mass = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    Ok(ArrivalProbabilities { probs, tail_mass })
}

/// Pollaczek-Khinchine mean-value metrics.
pub fn mg1_metrics(beta: f64, es: f64, es2: f64) -> Result<PerformanceMetrics> {
    ensure_positive("beta", beta)?;
    ensure_positive("E[s]", es)?;
    if !(es2.is_finite() && es2 >= es * es * (1.0 - 1e-12)) {
        return Err(Error::Validation(format!("E[s^2]={es2} is below E[s]^2={}", es * es)));
    }
    let rho = beta * es;
    if rho >= 1.0 {
        return Err(unstable(rho));
    }
    let l = rho + beta * beta * es2 / (2.0 * (1.0 - rho));
    let w = l / beta;
    Ok(PerformanceMetrics {
        rho,
        u: Some(rho),
        l,
        lq: l - rho,
        ls: rho,
        w,
        wq: w - es,
        ws: es,
        pi0: 1.0 - rho,
        effective_arrival: beta,
        blocking: None,
        delay_prob: None,
        var_n: None,
    })
}

/// Stationary law of the departure-epoch chain.
///
/// Uses the level-crossing form `pi_j a_0 = pi_0 A_(j-1) + sum_(i=1..j-1) pi_i A_(j-i)`
/// with `A_k = P(arrivals > k)`, which is algebraically the one-step balance
/// equation solved for `pi_j` but avoids its cancellation.
pub fn embedded_stationary(arrivals: &ArrivalProbabilities, n_max: usize) -> Result<TruncatedDistribution> {
    let a = &arrivals.probs;
    if a.is_empty() {
        return Err(Error::Validation("arrival probabilities are empty".into()));
    }
    let rho = arrivals.mean();
    if rho >= 1.0 {
        return Err(unstable(rho));
    }
    let pi0 = 1.0 - rho;
    if a[0] <= 0.0 {
        return Err(Error::Domain("a_0 must be positive for a stable embedded chain".into()));
    }
    // suffix sums: abar[k] = P(A > k)
    let mut abar = vec![0.0; a.len()];
    let mut acc = arrivals.tail_mass;
    for k in (0..a.len()).rev() {
        abar[k] = acc;
        acc += a[k];
    }
    let abar_at = |k: usize| if k < abar.len() { abar[k] } else { 0.0 };
    let mut probs = Vec::with_capacity(n_max + 1);
    probs.push(pi0);
    for j in 1..=n_max {
        let s = probs[1..j].iter().enumerate().fold(pi0 * abar_at(j - 1), |s, (k, p)| s + p * abar_at(j - 1 - k));
        probs.push((s / a[0]).max(0.0));
    }
    let tail_mass = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    Ok(TruncatedDistribution { probs, tail_mass })
}

/// Departure-epoch transition matrix on `0..n`, the last column absorbing overflow.
pub fn embedded_transition_rows(arrivals: &ArrivalProbabilities, n: usize) -> Vec<Vec<f64>> {
    let a = |k: usize| arrivals.probs.get(k).copied().unwrap_or(0.0);
    (0..n)
        .map(|i| {
            let base = i.saturating_sub(1);
            let mut row: Vec<f64> = (0..n).map(|j| if j >= base { a(j - base) } else { 0.0 }).collect();
            let kept: f64 = row.iter().sum();
            row[n - 1] += 1.0 - kept;
            row
        })
        .collect()
}

/// Largest violation of `pi_j = pi_0 a_j + sum_(i=1..j+1) pi_i a_(j-i+1)`
/// over the states whose equation only references retained entries.
pub fn embedded_residual(arrivals: &ArrivalProbabilities, pi: &[f64]) -> f64 {
    let a = |k: usize| arrivals.probs.get(k).copied().unwrap_or(0.0);
    let mut worst = 0.0f64;
    for j in 0..pi.len().saturating_sub(1) {
        let rhs = pi[1..=j + 1].iter().enumerate().fold(pi[0] * a(j), |r, (k, p)| r + p * a(j - k));
        worst = worst.max((pi[j] - rhs).abs());
    }
    worst
}
