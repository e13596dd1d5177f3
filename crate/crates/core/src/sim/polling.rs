use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{BatchLog, Sampler, SimConfig, SimEstimate, SimRng};
use crate::error::{Error, Result};
use crate::polling::{Policy, PollingSpec};

/// Order in which the server visits the queues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "order", rename_all = "snake_case", deny_unknown_fields)]
pub enum Routing {
    #[default]
    Cyclic,
    /// Visit the queues in `table` order, repeating.
    Periodic { table: Vec<usize> },
    /// Next queue drawn independently with probabilities `probs`.
    Random { probs: Vec<f64> },
}

impl Routing {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Routing::Cyclic => Ok(()),
            Routing::Periodic { table } => {
                if table.is_empty() || table.iter().any(|&q| q >= n) {
                    return Err(Error::Validation("polling table must list valid queue indices".into()));
                }
                if (0..n).any(|q| !table.contains(&q)) {
                    return Err(Error::Validation("polling table must visit every queue".into()));
                }
                Ok(())
            }
            Routing::Random { probs } => {
                if probs.len() != n || probs.iter().any(|p| !(*p > 0.0)) {
                    return Err(Error::Validation("random routing needs one positive probability per queue".into()));
                }
                if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(Error::Validation("random routing probabilities must sum to 1".into()));
                }
                Ok(())
            }
        }
    }
}

/// Sample first and second moments of a period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub second: f64,
    pub samples: u64,
}

#[derive(Default, Clone, Copy)]
struct Moments {
    s1: f64,
    s2: f64,
    n: u64,
}

impl Moments {
    fn add(&mut self, x: f64) {
        self.s1 += x;
        self.s2 += x * x;
        self.n += 1;
    }

    fn estimate(&self) -> MomentEstimate {
        let n = self.n.max(1) as f64;
        MomentEstimate { mean: self.s1 / n, second: self.s2 / n, samples: self.n }
    }
}

#[derive(Default, Clone, Copy)]
struct Pair {
    sx: f64,
    sy: f64,
    sxy: f64,
    n: u64,
}

impl Pair {
    fn add(&mut self, x: f64, y: f64) {
        self.sx += x;
        self.sy += y;
        self.sxy += x * y;
        self.n += 1;
    }

    fn cov(&self) -> f64 {
        let n = self.n.max(1) as f64;
        self.sxy / n - (self.sx / n) * (self.sy / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollingEstimates {
    /// Mean wait before service at each queue.
    pub waits: Vec<SimEstimate>,
    /// Departure from queue `i` to the next arrival of the server there.
    pub intervisit: Vec<MomentEstimate>,
    /// Successive arrivals of the server at queue `i`.
    pub cycle: Vec<MomentEstimate>,
    /// `r_ij`: covariance of station time `i` with the latest preceding
    /// station time `j` (cyclic routing only).
    pub covariances: Option<Vec<Vec<f64>>>,
    pub served: u64,
    pub batches: BatchLog,
}

struct Station {
    queue: VecDeque<f64>,
    next_arrival: f64,
    rate: f64,
}

impl Station {
    fn absorb(&mut self, t: f64, rng: &mut SimRng) {
        while self.next_arrival <= t {
            self.queue.push_back(self.next_arrival);
            self.next_arrival += rng.exponential(self.rate);
        }
    }
}

/// Single-server polling simulation; `config.horizon` counts served customers.
pub fn simulate_polling(spec: &PollingSpec, policy: Policy, routing: &Routing, config: &SimConfig) -> Result<PollingEstimates> {
    spec.validate()?;
    config.validate()?;
    let n = spec.len();
    routing.validate(n)?;
    let service: Vec<Sampler> = spec.queues.iter().map(|q| Sampler::fit_moments(q.b1, q.b2)).collect::<Result<_>>()?;
    let switch: Vec<Sampler> = spec.queues.iter().map(|q| Sampler::fit_moments(q.s1, q.s2)).collect::<Result<_>>()?;
    let random_cdf: Vec<f64> = match routing {
        Routing::Random { probs } => probs
            .iter()
            .scan(0.0, |a, p| {
                *a += p;
                Some(*a)
            })
            .collect(),
        _ => Vec::new(),
    };
    let cyclic = matches!(routing, Routing::Cyclic);
    let warm = config.warmup_count();
    let size = config.batch_size();
    let end = warm + size * config.batches;

    let mut log = BatchLog::default();
    let mut intervisit = vec![Moments::default(); n];
    let mut cycle = vec![Moments::default(); n];
    let mut pairs = vec![vec![Pair::default(); n]; n];
    let names: Vec<String> = (0..n).map(|i| format!("W[{i}]")).collect();

    for r in 0..config.replications {
        let mut rng = SimRng::for_replication(config.seed, r);
        let mut stations: Vec<Station> = spec
            .queues
            .iter()
            .map(|q| Station { queue: VecDeque::new(), next_arrival: rng.exponential(q.lambda), rate: q.lambda })
            .collect();
        let mut t = 0.0f64;
        let mut pos = 0usize;
        let mut table_pos = 0usize;
        let mut served = 0u64;
        let mut batch_sum = vec![0.0f64; n];
        let mut batch_cnt = vec![0u64; n];
        let mut last_dep: Vec<Option<f64>> = vec![None; n];
        let mut last_arr: Vec<Option<f64>> = vec![None; n];
        let mut last_theta: Vec<Option<f64>> = vec![None; n];
        let mut switch_in = 0.0f64;

        'run: loop {
            let i = pos;
            let measuring = served >= warm;
            if measuring {
                if let Some(d) = last_dep[i] {
                    intervisit[i].add(t - d);
                }
                if let Some(a) = last_arr[i] {
                    cycle[i].add(t - a);
                }
            }
            last_arr[i] = Some(t);
            let visit_start = t;
            stations[i].absorb(t, &mut rng);
            let gate = match policy {
                Policy::Exhaustive => usize::MAX,
                Policy::Gated => stations[i].queue.len(),
            };
            let mut count = 0usize;
            while count < gate {
                let Some(arrival) = stations[i].queue.pop_front() else { break };
                count += 1;
                if served >= warm {
                    batch_sum[i] += t - arrival;
                    batch_cnt[i] += 1;
                }
                t += service[i].sample(&mut rng);
                served += 1;
                if served > warm && (served - warm).is_multiple_of(size) {
                    for q in 0..n {
                        if batch_cnt[q] > 0 {
                            log.push(&names[q], batch_sum[q] / batch_cnt[q] as f64);
                        }
                    }
                    batch_sum.iter_mut().for_each(|x| *x = 0.0);
                    batch_cnt.iter_mut().for_each(|x| *x = 0);
                }
                if served >= end {
                    break 'run;
                }
                if policy == Policy::Exhaustive {
                    stations[i].absorb(t, &mut rng);
                }
            }
            let visit = t - visit_start;
            last_dep[i] = Some(t);
            let out = switch[i].sample(&mut rng);
            t += out;
            if cyclic {
                let theta = match policy {
                    Policy::Exhaustive => switch_in + visit,
                    Policy::Gated => visit + out,
                };
                if served >= warm {
                    pairs[i][i].add(theta, theta);
                    for j in (0..n).filter(|&j| j != i) {
                        if let Some(tj) = last_theta[j] {
                            pairs[i][j].add(theta, tj);
                        }
                    }
                }
                last_theta[i] = Some(theta);
            }
            switch_in = out;
            pos = match routing {
                Routing::Cyclic => (i + 1) % n,
                Routing::Periodic { table } => {
                    table_pos = (table_pos + 1) % table.len();
                    table[table_pos]
                }
                Routing::Random { .. } => rng.from_cdf(&random_cdf),
            };
        }
    }
    let waits = names.iter().map(|k| log.estimate(k)).collect();
    let covariances = cyclic.then(|| pairs.iter().map(|row| row.iter().map(Pair::cov).collect()).collect());
    Ok(PollingEstimates {
        waits,
        intervisit: intervisit.iter().map(Moments::estimate).collect(),
        cycle: cycle.iter().map(Moments::estimate).collect(),
        covariances,
        served: config.replications * size * config.batches,
        batches: log,
    })
}
