use serde::{Deserialize, Serialize};

use super::{IntegerSampler, SimEstimate, SimRng};
use crate::error::{Error, Result};
use crate::pgf::Pgf;

/// Steps after which a single walk is declared runaway.
pub const STEP_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuinEstimates {
    pub mean: SimEstimate,
    pub variance: SimEstimate,
    pub replications: u64,
}

/// Replicates `L_(n+1) = L_n + X_(n+1) - drain` from `L_0 ~ initial` until
/// `L <= 0`, returning batch-means estimates of the hitting time's mean and
/// variance over `batches` groups of replications.
pub fn simulate_ruin(initial: &Pgf, step: &Pgf, drain: u64, replications: u64, batches: u64, seed: u64) -> Result<RuinEstimates> {
    if drain == 0 {
        return Err(Error::Validation("drain must be at least 1".into()));
    }
    if batches < 2 || replications < 2 * batches {
        return Err(Error::Validation("need at least two replications per batch and two batches".into()));
    }
    let mu = step.mean();
    if mu >= drain as f64 {
        return Err(Error::Domain(format!("step mean {mu} is not below the drain {drain}")));
    }
    let f = IntegerSampler::new(initial)?;
    let x = IntegerSampler::new(step)?;
    let per = replications / batches;
    let mut means = Vec::with_capacity(batches as usize);
    let mut vars = Vec::with_capacity(batches as usize);
    for b in 0..batches {
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for k in 0..per {
            let mut rng = SimRng::for_replication(seed, b * per + k);
            let mut level = f.sample(&mut rng) as i64;
            let mut steps = 0u64;
            while level > 0 {
                level += x.sample(&mut rng) as i64 - drain as i64;
                steps += 1;
                if steps > STEP_CAP {
                    return Err(Error::Domain(format!("walk exceeded {STEP_CAP} steps without ruin")));
                }
            }
            let t = steps as f64;
            s1 += t;
            s2 += t * t;
        }
        let n = per as f64;
        let m = s1 / n;
        means.push(m);
        vars.push((s2 - n * m * m) / (n - 1.0));
    }
    Ok(RuinEstimates {
        mean: SimEstimate::from_samples(&means),
        variance: SimEstimate::from_samples(&vars),
        replications: per * batches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_steps() {
        let e = simulate_ruin(&Pgf::degenerate(1), &Pgf::Poisson { mean: 0.5 }, 1, 64_000, 32, 11).unwrap();
        assert!(e.mean.covers(2.0, 4.0), "{:?}", e.mean);
        assert!(e.variance.covers(4.0, 4.0), "{:?}", e.variance);
    }

    #[test]
    fn zero_capital() {
        let e = simulate_ruin(&Pgf::degenerate(0), &Pgf::Poisson { mean: 0.5 }, 1, 1000, 10, 1).unwrap();
        assert_eq!((e.mean.point, e.variance.point), (0.0, 0.0));
    }
}
