//! Discrete-event simulation used as an independent check on the analytics.

mod polling;
mod queue;
mod rng;
mod ruin;
mod tandem;

pub use polling::{simulate_polling, MomentEstimate, PollingEstimates, Routing};
pub use queue::{simulate_single_queue, QueueSim, QueueEstimates, Servers};
pub use rng::{replication_seed, splitmix64, IntegerSampler, Sampler, SimRng};
pub use ruin::{simulate_ruin, RuinEstimates};
pub use tandem::{simulate_tandem, TandemEstimates};

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Run length and output-analysis settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    /// Customers served (departures) per replication, warmup included.
    pub horizon: u64,
    /// Fraction of the horizon discarded before measuring.
    pub warmup: f64,
    pub replications: u64,
    pub batches: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 42, horizon: 1_000_000, warmup: 0.2, replications: 1, batches: 32 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(Error::Validation(format!("warmup must lie in [0, 1), got {}", self.warmup)));
        }
        if self.replications == 0 {
            return Err(Error::Validation("replications must be at least 1".into()));
        }
        if self.batches < 10 {
            return Err(Error::Validation("batches must be at least 10".into()));
        }
        if self.batch_size() == 0 {
            return Err(Error::Validation(format!(
                "horizon {} is too small for {} batches after warmup",
                self.horizon, self.batches
            )));
        }
        Ok(())
    }

    pub(crate) fn warmup_count(&self) -> u64 {
        (self.warmup * self.horizon as f64).floor() as u64
    }

    pub(crate) fn batch_size(&self) -> u64 {
        (self.horizon - self.warmup_count()) / self.batches
    }
}

/// Point estimate with a 95% Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub point: f64,
    pub half_width_95: f64,
    pub samples: u64,
}

impl SimEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return SimEstimate { point: 0.0, half_width_95: 0.0, samples: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return SimEstimate { point: mean, half_width_95: f64::INFINITY, samples: 1 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(1.96);
        SimEstimate { point: mean, half_width_95: t * (var / n as f64).sqrt(), samples: n as u64 }
    }

    /// Whether `target` lies within `k` half-widths of the point.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.point - target).abs() <= k * self.half_width_95
    }
}

/// Named per-batch observations, kept for export and turned into estimates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchLog {
    pub series: BTreeMap<String, Vec<f64>>,
}

impl BatchLog {
    pub fn push(&mut self, name: &str, value: f64) {
        self.series.entry(name.to_string()).or_default().push(value);
    }

    pub fn merge(&mut self, other: BatchLog) {
        for (k, mut v) in other.series {
            self.series.entry(k).or_default().append(&mut v);
        }
    }

    pub fn estimate(&self, name: &str) -> SimEstimate {
        self.series.get(name).map(|v| SimEstimate::from_samples(v)).unwrap_or_else(|| SimEstimate::from_samples(&[]))
    }

    /// Flat `(metric, batch index, value)` rows in a stable order.
    pub fn rows(&self) -> Vec<(String, usize, f64)> {
        self.series
            .iter()
            .flat_map(|(k, v)| v.iter().enumerate().map(move |(i, x)| (k.clone(), i, *x)))
            .collect()
    }
}

/// Event-calendar key: time first, insertion sequence breaks ties.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EventKey {
    pub time: f64,
    pub seq: u64,
}

impl PartialEq for EventKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for EventKey {}

impl PartialOrd for EventKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EventKey {
    // reversed so that std's max-heap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BinaryHeap;

    #[test]
    fn estimate_from_known_samples() {
        let e = SimEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.point, 2.5);
        // t_{0.975,3} = 3.182446
        assert!((e.half_width_95 - 3.182446 * (5.0f64 / 12.0).sqrt() / 1.0).abs() < 1e-5);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig { horizon: 20, ..Default::default() }.validate().is_err());
        assert!(SimConfig { batches: 4, ..Default::default() }.validate().is_err());
        assert!(SimConfig { warmup: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn heap_orders_by_time_then_sequence() {
        let mut h = BinaryHeap::new();
        for (time, seq) in [(2.0, 0), (1.0, 3), (1.0, 1), (0.5, 9)] {
            h.push(EventKey { time, seq });
        }
        let order: Vec<u64> = std::iter::from_fn(|| h.pop().map(|k| k.seq)).collect();
        assert_eq!(order, vec![9, 1, 3, 0]);
    }
}
