use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{BatchLog, SimConfig, SimEstimate, SimRng};
use crate::error::{ensure_positive, Result};

/// Histogram window: occupancies `0..=HISTOGRAM_WINDOW` at each station.
pub const HISTOGRAM_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TandemEstimates {
    pub l: SimEstimate,
    pub w: SimEstimate,
    pub p00: SimEstimate,
    /// Time fractions with `(n, m)` customers at the two stations.
    pub joint: Vec<Vec<f64>>,
    pub utilization: [f64; 2],
    pub warnings: Vec<String>,
    pub batches: BatchLog,
}

/// Two exponential single-server FIFO stations in series.
pub fn simulate_tandem(lambda: f64, mu1: f64, mu2: f64, config: &SimConfig) -> Result<TandemEstimates> {
    ensure_positive("lambda", lambda)?;
    ensure_positive("mu1", mu1)?;
    ensure_positive("mu2", mu2)?;
    config.validate()?;
    let k = HISTOGRAM_WINDOW + 1;
    let mut hist = vec![vec![0.0; k]; k];
    let mut busy = [0.0f64; 2];
    let mut measured = 0.0f64;
    let mut log = BatchLog::default();
    let warm = config.warmup_count();
    let size = config.batch_size();
    let end = warm + size * config.batches;

    for r in 0..config.replications {
        let mut rng = SimRng::for_replication(config.seed, r);
        let mut q1: VecDeque<f64> = VecDeque::new();
        let mut q2: VecDeque<f64> = VecDeque::new();
        let mut t = 0.0f64;
        let mut next_arrival = rng.exponential(lambda);
        let mut next_d1 = f64::INFINITY;
        let mut next_d2 = f64::INFINITY;
        let mut departures = 0u64;
        let (mut area, mut empty, mut sum_w) = (0.0f64, 0.0f64, 0.0f64);
        let (mut base_t, mut base_area, mut base_empty, mut base_w) = (0.0, 0.0, 0.0, 0.0);

        while departures < end {
            let next = next_arrival.min(next_d1).min(next_d2);
            let dt = next - t;
            let (n, m) = (q1.len(), q2.len());
            area += (n + m) as f64 * dt;
            if n + m == 0 {
                empty += dt;
            }
            if departures >= warm {
                if n < k && m < k {
                    hist[n][m] += dt;
                }
                busy[0] += if n > 0 { dt } else { 0.0 };
                busy[1] += if m > 0 { dt } else { 0.0 };
                measured += dt;
            }
            t = next;
            if next == next_arrival {
                q1.push_back(t);
                if q1.len() == 1 {
                    next_d1 = t + rng.exponential(mu1);
                }
                next_arrival = t + rng.exponential(lambda);
            } else if next == next_d1 {
                let arrival = q1.pop_front().expect("customer at station 1");
                next_d1 = if q1.is_empty() { f64::INFINITY } else { t + rng.exponential(mu1) };
                q2.push_back(arrival);
                if q2.len() == 1 {
                    next_d2 = t + rng.exponential(mu2);
                }
            } else {
                let arrival = q2.pop_front().expect("customer at station 2");
                next_d2 = if q2.is_empty() { f64::INFINITY } else { t + rng.exponential(mu2) };
                departures += 1;
                sum_w += t - arrival;
                if departures == warm {
                    (base_t, base_area, base_empty, base_w) = (t, area, empty, sum_w);
                } else if departures > warm && (departures - warm).is_multiple_of(size) {
                    let span = t - base_t;
                    log.push("L", (area - base_area) / span);
                    log.push("P00", (empty - base_empty) / span);
                    log.push("W", (sum_w - base_w) / size as f64);
                    (base_t, base_area, base_empty, base_w) = (t, area, empty, sum_w);
                }
            }
        }
    }
    for row in hist.iter_mut() {
        for cell in row.iter_mut() {
            *cell /= measured;
        }
    }
    let utilization = [busy[0] / measured, busy[1] / measured];
    let warnings = utilization
        .iter()
        .enumerate()
        .filter(|(_, u)| **u >= 0.99)
        .map(|(i, u)| format!("station {} measured utilization {u:.4} suggests instability", i + 1))
        .collect();
    Ok(TandemEstimates {
        l: log.estimate("L"),
        w: log.estimate("W"),
        p00: log.estimate("P00"),
        joint: hist,
        utilization,
        warnings,
        batches: log,
    })
}
