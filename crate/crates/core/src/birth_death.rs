//! Birth-death jump processes: recurrence tests, the normalisation constant,
//! stationary laws and tridiagonal intensity matrices.
//!
//! Rates are indexed as in the usual generator
//!
//! ```text
//! -b0      b0
//!  d1  -b1-d1      b1
//!       d2     -b2-d2   b2
//! ```
//!
//! Recurrence holds iff `sum_n (d1..dn)/(b1..bn)` diverges; the process is
//! ergodic iff additionally `S = 1 + sum_n (b0..b(n-1))/(d1..dn)` is finite,
//! in which case `pi_0 = 1/S` and `pi_n = pi_0 (b0..b(n-1))/(d1..dn)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Number of trailing terms inspected by the ratio tests.
pub const RATIO_WINDOW: usize = 20;
pub const DEFAULT_N_MAX: usize = 10_000;
/// Tolerance on intensity-matrix row sums.
pub const GENERATOR_TOL: f64 = 1e-12;

/// Birth and death rate laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rates", rename_all = "snake_case", deny_unknown_fields)]
pub enum BirthDeathSpec {
    /// `b_n = birth`, `d_n = death` (the M/M/1 queue).
    Constant { birth: f64, death: f64 },
    /// `b_n = birth`, `d_n = n * death` (infinitely many servers).
    Linear { birth: f64, death: f64 },
    /// `b_n = birth`, `d_n = min(n, servers) * death`.
    Servers { birth: f64, death: f64, servers: usize },
    /// Like `Servers` but births stop at `capacity` customers.
    Capped { birth: f64, death: f64, servers: usize, capacity: usize },
    /// Explicit rates: `birth[n]` for `n >= 0`, `death[n - 1]` for `n >= 1`.
    /// Past the end of a table its last entry repeats.
    Table { birth: Vec<f64>, death: Vec<f64> },
}

impl BirthDeathSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BirthDeathSpec::Constant { birth, death } | BirthDeathSpec::Linear { birth, death } => {
                ensure_positive("birth", *birth)?;
                ensure_positive("death", *death)
            }
            BirthDeathSpec::Servers { birth, death, servers } => {
                ensure_positive("birth", *birth)?;
                ensure_positive("death", *death)?;
                if *servers == 0 {
                    return Err(Error::Validation("servers must be at least 1".into()));
                }
                Ok(())
            }
            BirthDeathSpec::Capped { birth, death, servers, capacity } => {
                ensure_positive("birth", *birth)?;
                ensure_positive("death", *death)?;
                if *servers == 0 || *capacity == 0 {
                    return Err(Error::Validation("servers and capacity must be at least 1".into()));
                }
                Ok(())
            }
            BirthDeathSpec::Table { birth, death } => {
                if birth.is_empty() || death.is_empty() {
                    return Err(Error::Validation("rate tables must be non-empty".into()));
                }
                for (i, b) in birth.iter().enumerate() {
                    ensure_positive(&format!("birth[{i}]"), *b)?;
                }
                for (i, d) in death.iter().enumerate() {
                    ensure_positive(&format!("death[{i}]"), *d)?;
                }
                Ok(())
            }
        }
    }

    /// Largest reachable state, if the state space is finite.
    pub fn capacity(&self) -> Option<usize> {
        match self {
            BirthDeathSpec::Capped { capacity, .. } => Some(*capacity),
            _ => None,
        }
    }

    pub fn birth(&self, n: usize) -> f64 {
        match self {
            BirthDeathSpec::Constant { birth, .. }
            | BirthDeathSpec::Linear { birth, .. }
            | BirthDeathSpec::Servers { birth, .. } => *birth,
            BirthDeathSpec::Capped { birth, capacity, .. } => {
                if n < *capacity {
                    *birth
                } else {
                    0.0
                }
            }
            BirthDeathSpec::Table { birth, .. } => birth[n.min(birth.len() - 1)],
        }
    }

    /// Death rate in state `n`; zero in state 0.
    pub fn death(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            BirthDeathSpec::Constant { death, .. } => *death,
            BirthDeathSpec::Linear { death, .. } => n as f64 * death,
            BirthDeathSpec::Servers { death, servers, .. }
            | BirthDeathSpec::Capped { death, servers, .. } => n.min(*servers) as f64 * death,
            BirthDeathSpec::Table { death, .. } => death[(n - 1).min(death.len() - 1)],
        }
    }

    /// Jump-chain probability of moving up from state `n` (`p_0 = 1`).
    pub fn up_probability(&self, n: usize) -> f64 {
        let (b, d) = (self.birth(n), self.death(n));
        b / (b + d)
    }

    pub fn down_probability(&self, n: usize) -> f64 {
        1.0 - self.up_probability(n)
    }

    /// Total exit rate of state `n`.
    pub fn exit_rate(&self, n: usize) -> f64 {
        self.birth(n) + self.death(n)
    }
}

/// Outcome of the recurrence test on `sum_n (d1..dn)/(b1..bn)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Recurrence {
    Recurrent,
    /// The series converges; `sum_bound` is partial sum plus geometric tail bound.
    Transient { sum_bound: f64 },
    /// Neither test fired; `trace` holds `(n, partial sum)` at powers of two.
    Inconclusive { trace: Vec<(usize, f64)> },
}

/// Ratio test on the recurrence series.
///
/// Declares recurrence when the last [`RATIO_WINDOW`] terms are nondecreasing,
/// transience when every ratio in that window is at most `1 - ratio_margin`,
/// and `Inconclusive` otherwise.
pub fn classify_recurrence(spec: &BirthDeathSpec, n_max: usize, ratio_margin: f64) -> Result<Recurrence> {
    spec.validate()?;
    if n_max < 10 {
        return Err(Error::Validation("n_max must be at least 10".into()));
    }
    if spec.capacity().is_some() {
        // finite irreducible state space
        return Ok(Recurrence::Recurrent);
    }
    let window = RATIO_WINDOW.min(n_max - 1);
    let mut log_term = 0.0f64;
    let mut partial = 0.0f64;
    let mut trace = Vec::new();
    let mut ratios = std::collections::VecDeque::with_capacity(window);
    for n in 1..=n_max {
        let ratio = spec.death(n) / spec.birth(n);
        log_term += ratio.ln();
        partial += log_term.exp();
        if n.is_power_of_two() {
            trace.push((n, partial));
        }
        if ratios.len() == window {
            ratios.pop_front();
        }
        ratios.push_back(ratio);
    }
    let q_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let q_max = ratios.iter().copied().fold(0.0, f64::max);
    if q_min >= 1.0 {
        return Ok(Recurrence::Recurrent);
    }
    if q_max <= 1.0 - ratio_margin {
        let last = log_term.exp();
        return Ok(Recurrence::Transient { sum_bound: partial + last * q_max / (1.0 - q_max) });
    }
    trace.push((n_max, partial));
    Ok(Recurrence::Inconclusive { trace })
}

/// Value of the normalisation constant `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Normalization {
    /// `value` includes the tail estimate; `tail_bound` bounds what was not summed.
    Finite { value: f64, tail_bound: f64 },
    Diverges,
    /// Terms decay too slowly to certify either way at this truncation.
    Undetermined { partial_sum: f64 },
}

impl Normalization {
    pub fn value(&self) -> Option<f64> {
        match self {
            Normalization::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// `S = 1 + sum_n (b0..b(n-1))/(d1..dn)`.
///
/// Constant, linear and multi-server laws use their closed forms; tables are
/// summed to `n_max` with a geometric tail bound which must not exceed
/// `tail_tol * S`.
pub fn normalization(spec: &BirthDeathSpec, n_max: usize, tail_tol: f64) -> Result<Normalization> {
    spec.validate()?;
    if n_max < 10 {
        return Err(Error::Validation("n_max must be at least 10".into()));
    }
    let closed = match spec {
        BirthDeathSpec::Constant { birth, death } => {
            let rho = birth / death;
            Some(if rho < 1.0 {
                Normalization::Finite { value: 1.0 / (1.0 - rho), tail_bound: 0.0 }
            } else {
                Normalization::Diverges
            })
        }
        BirthDeathSpec::Linear { birth, death } => {
            Some(Normalization::Finite { value: (birth / death).exp(), tail_bound: 0.0 })
        }
        BirthDeathSpec::Servers { birth, death, servers } => {
            let rho = birth / death;
            let u = rho / *servers as f64;
            Some(if u < 1.0 {
                let (head, last) = poisson_head_sum(rho, *servers);
                Normalization::Finite { value: head + last / (1.0 - u), tail_bound: 0.0 }
            } else {
                Normalization::Diverges
            })
        }
        BirthDeathSpec::Capped { capacity, .. } => {
            let value: f64 = stationary_terms(spec, *capacity).iter().sum();
            Some(Normalization::Finite { value, tail_bound: 0.0 })
        }
        BirthDeathSpec::Table { .. } => None,
    };
    if let Some(c) = closed {
        return Ok(c);
    }

    let window = RATIO_WINDOW.min(n_max - 1);
    let mut term = 1.0f64;
    let mut partial = 1.0f64;
    let mut ratios = std::collections::VecDeque::with_capacity(window);
    for n in 1..=n_max {
        let ratio = spec.birth(n - 1) / spec.death(n);
        term *= ratio;
        if !term.is_finite() || term > 1e300 {
            return Ok(Normalization::Diverges);
        }
        partial += term;
        if ratios.len() == window {
            ratios.pop_front();
        }
        ratios.push_back(ratio);
    }
    let q_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let q_max = ratios.iter().copied().fold(0.0, f64::max);
    if q_min >= 1.0 {
        return Ok(Normalization::Diverges);
    }
    if q_max < 1.0 {
        let tail = term * q_max / (1.0 - q_max);
        if tail <= tail_tol * partial {
            return Ok(Normalization::Finite { value: partial + tail, tail_bound: tail });
        }
    }
    Ok(Normalization::Undetermined { partial_sum: partial })
}

/// `sum_{n<m} rho^n/n!` and `rho^m/m!`, by running-term recurrence.
pub(crate) fn poisson_head_sum(rho: f64, m: usize) -> (f64, f64) {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 0..m {
        sum += term;
        term *= rho / (n + 1) as f64;
    }
    (sum, term)
}

/// Unnormalised weights `(b0..b(n-1))/(d1..dn)` for `n = 0..=last`.
fn stationary_terms(spec: &BirthDeathSpec, last: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(last + 1);
    let mut term = 1.0;
    out.push(term);
    for n in 1..=last {
        term *= spec.birth(n - 1) / spec.death(n);
        out.push(term);
    }
    out
}

/// Stationary law truncated to states `0..probs.len()`, plus the mass beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedDistribution {
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

impl TruncatedDistribution {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// Ergodic law `pi_0 = 1/S`, `pi_n = pi_0 (b0..b(n-1))/(d1..dn)`.
///
/// States are emitted until the remaining mass drops to `tail_tol` or
/// `n_max` is reached; in the latter case the remaining mass must still be
/// within `tail_tol`.
pub fn stationary_distribution(spec: &BirthDeathSpec, n_max: usize, tail_tol: f64) -> Result<TruncatedDistribution> {
    let s = match normalization(spec, n_max, tail_tol)? {
        Normalization::Finite { value, .. } => value,
        Normalization::Diverges => {
            return Err(Error::NotErgodic("normalisation constant S diverges".into()))
        }
        Normalization::Undetermined { partial_sum } => {
            return Err(Error::NotErgodic(format!(
                "normalisation constant could not be certified (partial sum {partial_sum:e})"
            )))
        }
    };
    let last = spec.capacity().map_or(n_max, |c| c.min(n_max));
    let pi0 = 1.0 / s;
    let mut probs = Vec::new();
    let mut term = 1.0;
    let mut mass = 0.0;
    for n in 0..=last {
        if n > 0 {
            term *= spec.birth(n - 1) / spec.death(n);
        }
        let p = pi0 * term;
        probs.push(p);
        mass += p;
        if 1.0 - mass <= tail_tol && spec.capacity().is_none() {
            break;
        }
    }
    let tail_mass = (1.0 - mass).max(0.0);
    if tail_mass > tail_tol {
        return Err(Error::TailTooLarge { tail: tail_mass, tol: tail_tol });
    }
    Ok(TruncatedDistribution { probs, tail_mass })
}

/// Unnormalised stationary measure of the jump chain,
/// `mu_n = (p1..p(n-1))/(q1..qn) mu_0` with `mu_0 = 1`.
pub fn embedded_stationary_measure(spec: &BirthDeathSpec, n_states: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_states);
    if n_states == 0 {
        return out;
    }
    out.push(1.0);
    let mut up = 1.0;
    let mut down = 1.0;
    for n in 1..n_states {
        if n >= 2 {
            up *= spec.up_probability(n - 1);
        }
        down *= spec.down_probability(n);
        out.push(up / down);
    }
    out
}

/// Square generator matrix of a jump process.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMatrix {
    rates: DMatrix<f64>,
}

/// First condition an intensity matrix fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum IntensityViolation {
    PositiveDiagonal { row: usize, value: f64 },
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
}

impl IntensityMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Validation("intensity matrix must be square and non-empty".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Self { rates: DMatrix::from_row_slice(n, n, &flat) })
    }

    pub fn len(&self) -> usize {
        self.rates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rates[(i, j)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rates.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Checks diagonal `<= 0`, off-diagonal `>= 0` and zero row sums, row by row.
    pub fn validate(&self) -> std::result::Result<(), IntensityViolation> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                let v = self.rates[(i, j)];
                if i == j && v > 0.0 {
                    return Err(IntensityViolation::PositiveDiagonal { row: i, value: v });
                }
                if i != j && v < 0.0 {
                    return Err(IntensityViolation::NegativeOffDiagonal { row: i, col: j, value: v });
                }
            }
            let sum: f64 = self.rates.row(i).iter().sum();
            if sum.abs() > GENERATOR_TOL {
                return Err(IntensityViolation::RowSum { row: i, sum });
            }
        }
        Ok(())
    }

    /// `max_j |(nu Lambda)_j|`.
    pub fn left_residual(&self, nu: &[f64]) -> Result<f64> {
        if nu.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: nu.len() });
        }
        let v = nalgebra::RowDVector::from_row_slice(nu);
        Ok((v * &self.rates).amax())
    }
}

/// Tridiagonal generator on states `0..n_states`; the last row drops its birth
/// rate so every row still sums to zero.
pub fn build_intensity_matrix(spec: &BirthDeathSpec, n_states: usize) -> Result<IntensityMatrix> {
    spec.validate()?;
    if n_states < 2 {
        return Err(Error::Validation("n_states must be at least 2".into()));
    }
    let mut m = DMatrix::zeros(n_states, n_states);
    for n in 0..n_states {
        let up = if n + 1 < n_states { spec.birth(n) } else { 0.0 };
        let down = spec.death(n);
        if n + 1 < n_states {
            m[(n, n + 1)] = up;
        }
        if n > 0 {
            m[(n, n - 1)] = down;
        }
        m[(n, n)] = -(up + down);
    }
    Ok(IntensityMatrix { rates: m })
}
