//! Cyclic polling systems: station-time covariances, intervisit and cycle
//! moments, mean waits and the pseudo-conservation law.
//!
//! Queues are indexed `0..N` in server order and every subscript wraps
//! modulo `N`. The station time of queue `i` is the visit to `i` plus the
//! adjacent switchover: the one *into* `i` for exhaustive service and the
//! one *out of* `i` for gated service.

mod discrete;

pub use discrete::{cross_station_moments, cyclic_station_moments, DiscretePollingSpec, DiscreteQueue};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result, StabilityVerdict};
use crate::linalg::solve_dense;

/// Largest accepted residual of the assembled covariance system.
pub const SYSTEM_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Exhaustive,
    Gated,
}

/// One queue of a continuous-time polling system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PollingQueue {
    pub lambda: f64,
    /// Mean service time.
    pub b1: f64,
    /// Second moment of the service time.
    pub b2: f64,
    /// Mean switchover out of this queue.
    pub s1: f64,
    /// Second moment of the switchover out of this queue.
    pub s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PollingSpec {
    pub queues: Vec<PollingQueue>,
    /// Second moment of the total switchover per cycle; independent legs if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
}

impl PollingSpec {
    pub fn new(queues: Vec<PollingQueue>) -> Result<Self> {
        let spec = PollingSpec { queues, delta2: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn len(&self) -> usize {
        self.queues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.is_empty()
    }

    pub fn rho_i(&self, i: usize) -> f64 {
        self.queues[i].lambda * self.queues[i].b1
    }

    pub fn rho(&self) -> f64 {
        (0..self.len()).map(|i| self.rho_i(i)).sum()
    }

    /// Mean total switchover per cycle.
    pub fn delta(&self) -> f64 {
        self.queues.iter().map(|q| q.s1).sum()
    }

    /// `delta2` if given, else `sum(s2_i - s1_i^2) + delta^2`.
    pub fn delta2(&self) -> f64 {
        self.delta2.unwrap_or_else(|| independent_delta2(&self.queues))
    }

    /// Mean cycle time `delta / (1 - rho)`.
    pub fn mean_cycle(&self) -> f64 {
        self.delta() / (1.0 - self.rho())
    }

    pub fn validate(&self) -> Result<()> {
        if self.queues.is_empty() {
            return Err(Error::Validation("polling system needs at least one queue".into()));
        }
        for (i, q) in self.queues.iter().enumerate() {
            ensure_positive(&format!("queues[{i}].lambda"), q.lambda)?;
            ensure_positive(&format!("queues[{i}].b1"), q.b1)?;
            ensure_positive(&format!("queues[{i}].s1"), q.s1)?;
            if !(q.b2.is_finite() && q.b2 >= q.b1 * q.b1 * (1.0 - 1e-12)) {
                return Err(Error::Validation(format!("queues[{i}].b2 must be at least b1^2")));
            }
            if !(q.s2.is_finite() && q.s2 >= q.s1 * q.s1 * (1.0 - 1e-12)) {
                return Err(Error::Validation(format!("queues[{i}].s2 must be at least s1^2")));
            }
        }
        if let Some(d2) = self.delta2 {
            let d = self.delta();
            if !(d2.is_finite() && d2 >= d * d * (1.0 - 1e-12)) {
                return Err(Error::Validation("delta2 must be at least delta^2".into()));
            }
        }
        let rho = self.rho();
        if rho >= 1.0 {
            return Err(Error::Unstable { load: rho, verdict: StabilityVerdict::from_load(rho) });
        }
        Ok(())
    }

    /// Same system with every time quantity multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        PollingSpec {
            queues: self
                .queues
                .iter()
                .map(|q| PollingQueue {
                    lambda: q.lambda / c,
                    b1: q.b1 * c,
                    b2: q.b2 * c * c,
                    s1: q.s1 * c,
                    s2: q.s2 * c * c,
                })
                .collect(),
            delta2: self.delta2.map(|d| d * c * c),
        }
    }

    fn switch_var(&self, i: usize) -> f64 {
        let q = &self.queues[i];
        (q.s2 - q.s1 * q.s1).max(0.0)
    }
}

/// Total switchover second moment when the legs are independent.
pub fn independent_delta2(queues: &[PollingQueue]) -> f64 {
    let d: f64 = queues.iter().map(|q| q.s1).sum();
    queues.iter().map(|q| q.s2 - q.s1 * q.s1).sum::<f64>() + d * d
}

/// Station-time covariances `r_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub policy: Policy,
    pub r: Vec<Vec<f64>>,
    pub residual: f64,
    pub condition: f64,
}

impl CovarianceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i][j]
    }

    /// `sum_{j != i} r_ij`.
    fn row_off(&self, i: usize) -> f64 {
        self.r[i].iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum()
    }

    /// `sum_{j != i} r_ji`.
    fn col_off(&self, i: usize) -> f64 {
        self.r.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, row)| row[i]).sum()
    }
}

/// Indices `a, a+1, ..., b` modulo `n`, empty when `a == b + 1 (mod n)`.
/// Never spans all `n` indices.
fn arc(a: usize, b: usize, n: usize) -> impl Iterator<Item = usize> {
    let len = (b + 2 * n - a + 1) % n;
    (0..len).map(move |t| (a + t) % n)
}

/// Assembles and solves the `N^2` covariance system for `policy`.
pub fn solve_station_covariances(spec: &PollingSpec, policy: Policy) -> Result<CovarianceMatrix> {
    spec.validate()?;
    let n = spec.len();
    let ec = spec.mean_cycle();
    let idx = |i: usize, j: usize| i * n + j;
    let mut a = DMatrix::<f64>::zeros(n * n, n * n);
    let mut rhs = DVector::<f64>::zeros(n * n);
    for i in 0..n {
        let q = &spec.queues[i];
        let rho_i = spec.rho_i(i);
        for j in 0..n {
            let row = idx(i, j);
            a[(row, row)] += 1.0;
            if i == j {
                match policy {
                    Policy::Exhaustive => {
                        let ei = (1.0 - rho_i) * ec;
                        let prev = (i + n - 1) % n;
                        rhs[row] = spec.switch_var(prev) / (1.0 - rho_i).powi(2)
                            + q.lambda * q.b2 * ei / (1.0 - rho_i).powi(3);
                        for k in (0..n).filter(|&k| k != i) {
                            a[(row, idx(i, k))] -= rho_i / (1.0 - rho_i);
                        }
                    }
                    Policy::Gated => {
                        rhs[row] = spec.switch_var(i) + q.lambda * q.b2 * ec;
                        a[(row, row)] -= rho_i * rho_i;
                        for k in (0..n).filter(|&k| k != i) {
                            a[(row, idx(i, k))] -= rho_i;
                            a[(row, idx(k, i))] -= rho_i * rho_i;
                        }
                    }
                }
            } else {
                let (c, before) = match policy {
                    Policy::Exhaustive => (rho_i / (1.0 - rho_i), (i + 1) % n),
                    Policy::Gated => (rho_i, i),
                };
                for m in arc(before, (j + n - 1) % n, n) {
                    a[(row, idx(j, m))] -= c;
                }
                for m in arc(j, (i + n - 1) % n, n) {
                    a[(row, idx(m, j))] -= c;
                }
            }
        }
    }
    let sol = solve_dense(&a, &rhs)?;
    let scale = rhs.amax().max(1.0);
    if sol.residual > SYSTEM_RESIDUAL_TOL * scale {
        return Err(Error::Singular { condition: sol.condition });
    }
    let r = (0..n).map(|i| (0..n).map(|j| sol.x[idx(i, j)]).collect()).collect();
    Ok(CovarianceMatrix { policy, r, residual: sol.residual, condition: sol.condition })
}

/// First and second moments of one queue's intervisit or cycle time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodMoments {
    pub mean: f64,
    pub second: f64,
}

/// Intervisit moments `(E I_i, E I_i^2)` under exhaustive service.
pub fn intervisit_moments(spec: &PollingSpec, r: &CovarianceMatrix) -> Result<Vec<PeriodMoments>> {
    if r.policy != Policy::Exhaustive {
        return Err(Error::Unsupported("intervisit moments need exhaustive covariances".into()));
    }
    let n = spec.len();
    let ec = spec.mean_cycle();
    Ok((0..n)
        .map(|i| {
            let rho_i = spec.rho_i(i);
            let ei = (1.0 - rho_i) * ec;
            let prev = (i + n - 1) % n;
            let second = spec.switch_var(prev) + (1.0 - rho_i) / rho_i * r.row_off(i) + ei * ei;
            PeriodMoments { mean: ei, second }
        })
        .collect())
}

/// Cycle moments `(E C, E C_i^2)` seen from each queue under gated service.
pub fn cycle_moments(spec: &PollingSpec, r: &CovarianceMatrix) -> Result<Vec<PeriodMoments>> {
    if r.policy != Policy::Gated {
        return Err(Error::Unsupported("cycle moments need gated covariances".into()));
    }
    let ec = spec.mean_cycle();
    Ok((0..spec.len())
        .map(|i| {
            let var = r.get(i, i) + r.row_off(i) / spec.rho_i(i) + r.col_off(i);
            PeriodMoments { mean: ec, second: var + ec * ec }
        })
        .collect())
}

/// Everything the analytic polling engine reports for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollingAnalysis {
    pub covariances: CovarianceMatrix,
    /// Intervisit moments (exhaustive) or cycle moments (gated).
    pub periods: Vec<PeriodMoments>,
    pub waits: Vec<f64>,
    pub pcl_residual: f64,
}

pub fn analyze(spec: &PollingSpec, policy: Policy) -> Result<PollingAnalysis> {
    let covariances = solve_station_covariances(spec, policy)?;
    let (periods, waits) = waits_from(spec, &covariances)?;
    let pcl_residual = pseudo_conservation_residual(spec, &waits, policy)?;
    Ok(PollingAnalysis { covariances, periods, waits, pcl_residual })
}

fn waits_from(spec: &PollingSpec, r: &CovarianceMatrix) -> Result<(Vec<PeriodMoments>, Vec<f64>)> {
    match r.policy {
        Policy::Exhaustive => {
            let periods = intervisit_moments(spec, r)?;
            let waits = periods
                .iter()
                .zip(&spec.queues)
                .enumerate()
                .map(|(i, (p, q))| p.second / (2.0 * p.mean) + q.lambda * q.b2 / (2.0 * (1.0 - spec.rho_i(i))))
                .collect();
            Ok((periods, waits))
        }
        Policy::Gated => {
            let periods = cycle_moments(spec, r)?;
            let waits = periods
                .iter()
                .enumerate()
                .map(|(i, p)| (1.0 + spec.rho_i(i)) * p.second / (2.0 * p.mean))
                .collect();
            Ok((periods, waits))
        }
    }
}

/// Mean waiting time at each queue.
pub fn mean_waits(spec: &PollingSpec, policy: Policy) -> Result<Vec<f64>> {
    let r = solve_station_covariances(spec, policy)?;
    Ok(waits_from(spec, &r)?.1)
}

/// Right-hand side of the pseudo-conservation law for `sum rho_i E W_i`.
pub fn pseudo_conservation_rhs(spec: &PollingSpec, policy: Policy) -> f64 {
    let rho = spec.rho();
    let d = spec.delta();
    let work: f64 = spec.queues.iter().map(|q| q.lambda * q.b2).sum();
    let sq: f64 = (0..spec.len()).map(|i| spec.rho_i(i).powi(2)).sum();
    let sign = match policy {
        Policy::Exhaustive => -1.0,
        Policy::Gated => 1.0,
    };
    rho * work / (2.0 * (1.0 - rho)) + rho * spec.delta2() / (2.0 * d) + d / (2.0 * (1.0 - rho)) * (rho * rho + sign * sq)
}

/// `sum rho_i E W_i` minus the pseudo-conservation right-hand side.
pub fn pseudo_conservation_residual(spec: &PollingSpec, waits: &[f64], policy: Policy) -> Result<f64> {
    if waits.len() != spec.len() {
        return Err(Error::DimensionMismatch { expected: spec.len(), got: waits.len() });
    }
    let lhs: f64 = waits.iter().enumerate().map(|(i, w)| spec.rho_i(i) * w).sum();
    Ok(lhs - pseudo_conservation_rhs(spec, policy))
}

/// Takagi's closed-form approximation to the exhaustive mean waits.
pub fn takagi_approx_waits(spec: &PollingSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let rho = spec.rho();
    let d = spec.delta();
    let work: f64 = spec.queues.iter().map(|q| q.lambda * q.b2).sum();
    let big_delta2: f64 = spec.queues.iter().map(|q| q.s1 * q.s1).sum();
    let sq: f64 = (0..spec.len()).map(|i| spec.rho_i(i).powi(2)).sum();
    let weighted: f64 = (0..spec.len()).map(|i| spec.rho_i(i) * (1.0 + spec.rho_i(i))).sum();
    let bracket = rho / (2.0 * (1.0 - rho)) * work + rho * big_delta2 / (2.0 * d) + d / (2.0 * (1.0 - rho)) * weighted;
    let common = (1.0 - rho) / (rho * (1.0 - rho) + sq);
    spec.queues
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let denom = 1.0 - rho - q.lambda * d;
            if denom <= 0.0 {
                return Err(Error::Domain(format!("1 - rho - lambda_{i} delta = {denom} is not positive")));
            }
            Ok((1.0 - rho + spec.rho_i(i)) / denom * common * bracket)
        })
        .collect()
}
