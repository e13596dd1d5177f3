use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{BatchLog, EventKey, Sampler, SimConfig, SimEstimate, SimRng};
use crate::error::{Error, Result};
use crate::queues::{QueueModel, ServiceDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Servers {
    Finite(usize),
    Infinite,
}

/// A single FIFO station with Poisson arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueSim {
    pub beta: f64,
    pub servers: Servers,
    /// Arrivals finding this many customers present are lost.
    pub capacity: Option<usize>,
    pub service: Sampler,
}

impl QueueSim {
    /// M/G/1 models only carry two service moments; they are fitted by a
    /// moment-matched law (see [`Sampler::fit_moments`]).
    pub fn from_model(model: &QueueModel) -> Result<Self> {
        let exp = |delta: f64| Sampler::Exponential { rate: delta };
        Ok(match *model {
            QueueModel::MM1 { beta, delta } => {
                QueueSim { beta, servers: Servers::Finite(1), capacity: None, service: exp(delta) }
            }
            QueueModel::MMInf { beta, delta } => {
                QueueSim { beta, servers: Servers::Infinite, capacity: None, service: exp(delta) }
            }
            QueueModel::MMm { beta, delta, m } => {
                QueueSim { beta, servers: Servers::Finite(m), capacity: None, service: exp(delta) }
            }
            QueueModel::MMmm { beta, delta, m } => {
                QueueSim { beta, servers: Servers::Finite(m), capacity: Some(m), service: exp(delta) }
            }
            QueueModel::MG1 { beta, es, es2 } => QueueSim {
                beta,
                servers: Servers::Finite(1),
                capacity: None,
                service: Sampler::fit_moments(es, es2)?,
            },
        })
    }

    pub fn mg1(beta: f64, service: &ServiceDescriptor) -> Result<Self> {
        Ok(QueueSim { beta, servers: Servers::Finite(1), capacity: None, service: Sampler::from_descriptor(service)? })
    }
}

/// Batch-means estimates for a single station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEstimates {
    pub l: SimEstimate,
    pub lq: SimEstimate,
    pub w: SimEstimate,
    pub wq: SimEstimate,
    pub pi0: SimEstimate,
    /// Fraction of arrivals lost; present only for finite-capacity systems.
    pub blocking: Option<SimEstimate>,
    /// Departures per unit time.
    pub throughput: SimEstimate,
    pub departures: u64,
    pub batches: BatchLog,
}

struct Departure {
    key: EventKey,
    arrival: f64,
    start: f64,
}

impl PartialEq for Departure {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for Departure {}
impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

#[derive(Default, Clone, Copy)]
struct Totals {
    time: f64,
    area_n: f64,
    area_q: f64,
    empty: f64,
    arrivals: u64,
    blocked: u64,
    departures: u64,
    sum_w: f64,
    sum_wq: f64,
}

fn record_batch(log: &mut BatchLog, now: &Totals, base: &Totals, loss: bool) {
    let dt = now.time - base.time;
    let dd = (now.departures - base.departures) as f64;
    log.push("L", (now.area_n - base.area_n) / dt);
    log.push("Lq", (now.area_q - base.area_q) / dt);
    log.push("pi0", (now.empty - base.empty) / dt);
    log.push("W", (now.sum_w - base.sum_w) / dd);
    log.push("Wq", (now.sum_wq - base.sum_wq) / dd);
    log.push("throughput", dd / dt);
    if loss {
        let da = (now.arrivals - base.arrivals) as f64;
        log.push("blocking", (now.blocked - base.blocked) as f64 / da);
    }
}

fn run_replication(sim: &QueueSim, config: &SimConfig, rng: &mut SimRng) -> BatchLog {
    let limit = match sim.servers {
        Servers::Finite(m) => m,
        Servers::Infinite => usize::MAX,
    };
    let warm = config.warmup_count();
    let size = config.batch_size();
    let end = warm + size * config.batches;
    let loss = sim.capacity.is_some();

    let mut log = BatchLog::default();
    let mut totals = Totals::default();
    let mut base = totals;
    let mut heap: BinaryHeap<Departure> = BinaryHeap::new();
    let mut waiting: VecDeque<f64> = VecDeque::new();
    let mut seq = 0u64;
    let mut next_arrival = rng.exponential(sim.beta);

    while totals.departures < end {
        let next_dep = heap.peek().map(|d| d.key.time).unwrap_or(f64::INFINITY);
        let t = next_arrival.min(next_dep);
        let dt = t - totals.time;
        let in_service = heap.len();
        let n = in_service + waiting.len();
        totals.area_n += n as f64 * dt;
        totals.area_q += waiting.len() as f64 * dt;
        if n == 0 {
            totals.empty += dt;
        }
        totals.time = t;

        if next_arrival <= next_dep {
            totals.arrivals += 1;
            if sim.capacity.is_some_and(|c| n >= c) {
                totals.blocked += 1;
            } else if in_service < limit {
                seq += 1;
                let key = EventKey { time: t + sim.service.sample(rng), seq };
                heap.push(Departure { key, arrival: t, start: t });
            } else {
                waiting.push_back(t);
            }
            next_arrival = t + rng.exponential(sim.beta);
        } else {
            let done = heap.pop().expect("departure scheduled");
            totals.departures += 1;
            totals.sum_w += t - done.arrival;
            totals.sum_wq += done.start - done.arrival;
            if let Some(arrival) = waiting.pop_front() {
                seq += 1;
                let key = EventKey { time: t + sim.service.sample(rng), seq };
                heap.push(Departure { key, arrival, start: t });
            }
            if totals.departures == warm {
                base = totals;
            } else if totals.departures > warm && (totals.departures - warm).is_multiple_of(size) {
                record_batch(&mut log, &totals, &base, loss);
                base = totals;
            }
        }
    }
    log
}

/// Simulates `config.replications` independent runs and pools their batches.
pub fn simulate_single_queue(sim: &QueueSim, config: &SimConfig) -> Result<QueueEstimates> {
    config.validate()?;
    if !(sim.beta.is_finite() && sim.beta >= 0.0) {
        return Err(Error::Validation(format!("beta must be nonnegative, got {}", sim.beta)));
    }
    if let Servers::Finite(0) = sim.servers {
        return Err(Error::Validation("at least one server is required".into()));
    }
    let loss = sim.capacity.is_some();
    if sim.beta == 0.0 {
        let zero = SimEstimate { point: 0.0, half_width_95: 0.0, samples: 0 };
        let one = SimEstimate { point: 1.0, ..zero };
        return Ok(QueueEstimates {
            l: zero,
            lq: zero,
            w: zero,
            wq: zero,
            pi0: one,
            blocking: loss.then_some(zero),
            throughput: zero,
            departures: 0,
            batches: BatchLog::default(),
        });
    }
    let mut log = BatchLog::default();
    for r in 0..config.replications {
        let mut rng = SimRng::for_replication(config.seed, r);
        log.merge(run_replication(sim, config, &mut rng));
    }
    let departures = config.replications * config.batch_size() * config.batches;
    Ok(QueueEstimates {
        l: log.estimate("L"),
        lq: log.estimate("Lq"),
        w: log.estimate("W"),
        wq: log.estimate("Wq"),
        pi0: log.estimate("pi0"),
        blocking: loss.then(|| log.estimate("blocking")),
        throughput: log.estimate("throughput"),
        departures,
        batches: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> SimConfig {
        SimConfig { horizon: 200_000, ..Default::default() }
    }

    #[test]
    fn mm1_close_to_analytic() {
        let sim = QueueSim::from_model(&QueueModel::MM1 { beta: 1.0, delta: 2.0 }).unwrap();
        let e = simulate_single_queue(&sim, &short()).unwrap();
        assert!(e.l.covers(1.0, 4.0), "{:?}", e.l);
        assert!(e.wq.covers(0.5, 4.0), "{:?}", e.wq);
        assert!(e.pi0.covers(0.5, 4.0), "{:?}", e.pi0);
    }

    #[test]
    fn erlang_loss_blocking() {
        let sim = QueueSim::from_model(&QueueModel::MMmm { beta: 1.0, delta: 1.0, m: 2 }).unwrap();
        let e = simulate_single_queue(&sim, &short()).unwrap();
        assert!(e.blocking.unwrap().covers(0.2, 4.0), "{:?}", e.blocking);
        assert_eq!(e.wq.point, 0.0);
    }

    #[test]
    fn zero_arrivals() {
        let sim = QueueSim::from_model(&QueueModel::MM1 { beta: 0.0, delta: 2.0 });
        let sim = sim.unwrap();
        let e = simulate_single_queue(&sim, &short()).unwrap();
        assert_eq!((e.departures, e.l.point), (0, 0.0));
    }

    #[test]
    fn reproducible() {
        let sim = QueueSim::from_model(&QueueModel::MMm { beta: 1.5, delta: 1.0, m: 2 }).unwrap();
        let cfg = SimConfig { horizon: 20_000, ..Default::default() };
        let a = simulate_single_queue(&sim, &cfg).unwrap();
        let b = simulate_single_queue(&sim, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
