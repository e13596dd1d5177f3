//! Pinned PRNG and inversion samplers.
//!
//! The generator is xoshiro256++ seeded through SplitMix64, and every
//! sampler draws by inversion from `uniform()`, so a seed reproduces the
//! same stream on any platform or in any language implementing the pair.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{ensure_positive, Error, Result};
use crate::pgf::Pgf;
use crate::queues::ServiceDescriptor;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `r` derived from the run seed.
pub fn replication_seed(seed: u64, r: u64) -> u64 {
    splitmix64(seed ^ splitmix64(r))
}

pub struct SimRng(Xoshiro256PlusPlus);

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn for_replication(seed: u64, r: u64) -> Self {
        Self::new(replication_seed(seed, r))
    }

    /// Uniform on the open interval `(0, 1)` with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }

    pub fn erlang(&mut self, k: u32, rate: f64) -> f64 {
        (0..k).map(|_| self.exponential(rate)).sum()
    }

    /// Index drawn from a cumulative table whose last entry is the total mass.
    pub fn from_cdf(&mut self, cdf: &[f64]) -> usize {
        let u = self.uniform() * cdf[cdf.len() - 1];
        cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
    }
}

/// A nonnegative continuous or lattice law that can be sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Deterministic(f64),
    Exponential { rate: f64 },
    Erlang { k: u32, rate: f64 },
    /// Erlang(k-1) with probability `p`, else Erlang(k), common rate.
    MixedErlang { k: u32, p: f64, rate: f64 },
    /// Two-phase hyperexponential.
    Hyper2 { p1: f64, rate1: f64, rate2: f64 },
    Discrete { values: Vec<f64>, cdf: Vec<f64> },
    /// Piecewise-linear density: knots and cumulative segment masses.
    Density { points: Vec<[f64; 2]>, cdf: Vec<f64> },
}

fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    weights
        .into_iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

impl Sampler {
    /// Law matching the given mean and second moment.
    ///
    /// Squared coefficient of variation 0 and 1 give deterministic and
    /// exponential laws; below 1 a mixture of adjacent Erlangs, above 1 a
    /// hyperexponential with balanced means.
    pub fn fit_moments(mean: f64, second: f64) -> Result<Self> {
        ensure_positive("mean", mean)?;
        let c2 = second / (mean * mean) - 1.0;
        if !(c2 >= -1e-12) || !c2.is_finite() {
            return Err(Error::Validation(format!("second moment {second} below mean^2")));
        }
        if c2 < 1e-12 {
            return Ok(Sampler::Deterministic(mean));
        }
        if (c2 - 1.0).abs() < 1e-12 {
            return Ok(Sampler::Exponential { rate: 1.0 / mean });
        }
        if c2 < 1.0 {
            let k = (1.0 / c2).ceil().max(2.0);
            let p = (k * c2 - (k * (1.0 + c2) - k * k * c2).max(0.0).sqrt()) / (1.0 + c2);
            let p = p.clamp(0.0, 1.0);
            return Ok(Sampler::MixedErlang { k: k as u32, p, rate: (k - p) / mean });
        }
        let p1 = 0.5 * (1.0 + ((c2 - 1.0) / (c2 + 1.0)).sqrt());
        Ok(Sampler::Hyper2 { p1, rate1: 2.0 * p1 / mean, rate2: 2.0 * (1.0 - p1) / mean })
    }

    pub fn from_descriptor(d: &ServiceDescriptor) -> Result<Self> {
        d.validate()?;
        Ok(match d {
            ServiceDescriptor::Exponential { rate } => Sampler::Exponential { rate: *rate },
            ServiceDescriptor::Deterministic { value } => Sampler::Deterministic(*value),
            ServiceDescriptor::Discrete { values, probs } => {
                Sampler::Discrete { values: values.clone(), cdf: cumulative(probs.iter().copied()) }
            }
            ServiceDescriptor::Density { points } => {
                let masses = points.windows(2).map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1]));
                Sampler::Density { points: points.clone(), cdf: cumulative(masses) }
            }
        })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Sampler::Deterministic(v) => *v,
            Sampler::Exponential { rate } => 1.0 / rate,
            Sampler::Erlang { k, rate } => *k as f64 / rate,
            Sampler::MixedErlang { k, p, rate } => (*k as f64 - p) / rate,
            Sampler::Hyper2 { p1, rate1, rate2 } => p1 / rate1 + (1.0 - p1) / rate2,
            Sampler::Discrete { values, cdf } => {
                let total = cdf[cdf.len() - 1];
                let mut prev = 0.0;
                values
                    .iter()
                    .zip(cdf)
                    .map(|(v, c)| {
                        let w = c - prev;
                        prev = *c;
                        v * w / total
                    })
                    .sum()
            }
            Sampler::Density { points, .. } => {
                ServiceDescriptor::Density { points: points.clone() }.mean()
            }
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Sampler::Deterministic(v) => *v,
            Sampler::Exponential { rate } => rng.exponential(*rate),
            Sampler::Erlang { k, rate } => rng.erlang(*k, *rate),
            Sampler::MixedErlang { k, p, rate } => {
                let phases = if rng.uniform() < *p { k - 1 } else { *k };
                rng.erlang(phases, *rate)
            }
            Sampler::Hyper2 { p1, rate1, rate2 } => {
                let rate = if rng.uniform() < *p1 { rate1 } else { rate2 };
                rng.exponential(*rate)
            }
            Sampler::Discrete { values, cdf } => values[rng.from_cdf(cdf)],
            Sampler::Density { points, cdf } => {
                let s = rng.from_cdf(cdf);
                let (t0, f0, t1, f1) = (points[s][0], points[s][1], points[s + 1][0], points[s + 1][1]);
                let h = t1 - t0;
                let mass = cdf[s] - if s == 0 { 0.0 } else { cdf[s - 1] };
                let v = rng.uniform() * mass;
                // solve f0 x + (f1 - f0) x^2 / (2h) = v on [0, h]
                let a = (f1 - f0) / (2.0 * h);
                let disc = (f0 * f0 + 4.0 * a * v).max(0.0);
                let denom = f0 + disc.sqrt();
                let x = if denom > 0.0 { 2.0 * v / denom } else { h };
                t0 + x.clamp(0.0, h)
            }
        }
    }
}

/// Inversion sampler for a law on the nonnegative integers.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerSampler {
    cdf: Vec<f64>,
}

impl IntegerSampler {
    /// Tabulates `g` until at most `1e-15` of its mass is left out.
    pub fn new(g: &Pgf) -> Result<Self> {
        g.validate()?;
        let (coeffs, _) = match g.to_series(1e-15)? {
            Pgf::Series { coeffs, tail_mass } => (coeffs, tail_mass),
            _ => unreachable!("to_series returns a series"),
        };
        let mut cdf = cumulative(coeffs);
        while cdf.len() > 1 && cdf[cdf.len() - 1] == cdf[cdf.len() - 2] {
            cdf.pop();
        }
        Ok(IntegerSampler { cdf })
    }

    pub fn sample(&self, rng: &mut SimRng) -> u64 {
        rng.from_cdf(&self.cdf) as u64
    }
}
