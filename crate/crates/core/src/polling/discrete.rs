use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::arc;
use crate::error::{Error, Result, StabilityVerdict};
use crate::linalg::solve_dense;

/// One queue of a slotted polling system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteQueue {
    /// Expected work brought per slot.
    pub mu: f64,
    /// Mean switchover slots out of this queue.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretePollingSpec {
    pub queues: Vec<DiscreteQueue>,
}

impl DiscretePollingSpec {
    pub fn new(queues: Vec<DiscreteQueue>) -> Result<Self> {
        let spec = DiscretePollingSpec { queues };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mu(&self) -> f64 {
        self.queues.iter().map(|q| q.mu).sum()
    }

    pub fn total_switchover(&self) -> f64 {
        self.queues.iter().map(|q| q.r).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.queues.is_empty() {
            return Err(Error::Validation("polling system needs at least one queue".into()));
        }
        for (i, q) in self.queues.iter().enumerate() {
            if !(q.mu > 0.0 && q.mu < 1.0) {
                return Err(Error::Validation(format!("queues[{i}].mu must lie in (0, 1)")));
            }
            if !(q.r.is_finite() && q.r >= 0.0) {
                return Err(Error::Validation(format!("queues[{i}].r must be nonnegative")));
            }
        }
        let mu = self.mu();
        if mu >= 1.0 {
            return Err(Error::Unstable { load: mu, verdict: StabilityVerdict::from_load(mu) });
        }
        Ok(())
    }
}

/// `f_i(i)`: mean queue-`i` content when the server arrives there.
///
/// Solves `f_i(i) = mu_i [r + sum_{k != i} f_k(k) / (1 - mu_k)]`.
pub fn cyclic_station_moments(spec: &DiscretePollingSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.queues.len();
    let r = spec.total_switchover();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (i, qi) in spec.queues.iter().enumerate() {
        b[i] = qi.mu * r;
        for (k, qk) in spec.queues.iter().enumerate() {
            if k != i {
                a[(i, k)] -= qi.mu / (1.0 - qk.mu);
            }
        }
    }
    Ok(solve_dense(&a, &b)?.x.iter().copied().collect())
}

/// `f_i(j)` for all pairs: mean queue-`j` content when the server reaches `i`.
///
/// The diagonal is copied from `f_diag`.
pub fn cross_station_moments(spec: &DiscretePollingSpec, f_diag: &[f64]) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let n = spec.queues.len();
    if f_diag.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f_diag.len() });
    }
    let cycle = spec.total_switchover() / (1.0 - spec.mu());
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return f_diag[i];
                    }
                    let prev = (i + n - 1) % n;
                    let served: f64 = arc((j + 1) % n, prev, n).map(|k| spec.queues[k].mu).sum();
                    let switched: f64 = arc(j, prev, n).map(|k| spec.queues[k].r).sum();
                    spec.queues[j].mu * (cycle * served + switched)
                })
                .collect()
        })
        .collect())
}
