use serde::{Deserialize, Serialize};

use super::unstable;
use crate::error::{ensure_positive, Result};

/// Two exponential stations in series fed by a Poisson stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TandemNetwork {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TandemMetrics {
    pub rho1: f64,
    pub rho2: f64,
    pub l1: f64,
    pub l2: f64,
    pub l: f64,
    pub w: f64,
    pub p00: f64,
}

impl TandemNetwork {
    pub fn new(lambda: f64, mu1: f64, mu2: f64) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        ensure_positive("mu1", mu1)?;
        ensure_positive("mu2", mu2)?;
        let worst = (lambda / mu1).max(lambda / mu2);
        if worst >= 1.0 {
            return Err(unstable(worst));
        }
        Ok(TandemNetwork { lambda, mu1, mu2 })
    }

    pub fn metrics(&self) -> TandemMetrics {
        let (rho1, rho2) = (self.lambda / self.mu1, self.lambda / self.mu2);
        let l1 = self.lambda / (self.mu1 - self.lambda);
        let l2 = self.lambda / (self.mu2 - self.lambda);
        TandemMetrics {
            rho1,
            rho2,
            l1,
            l2,
            l: l1 + l2,
            w: (l1 + l2) / self.lambda,
            p00: (1.0 - rho1) * (1.0 - rho2),
        }
    }

    /// Product-form probability of `n` customers at station 1 and `m` at station 2.
    pub fn joint(&self, n: usize, m: usize) -> f64 {
        let (r1, r2) = (self.lambda / self.mu1, self.lambda / self.mu2);
        r1.powi(n as i32) * (1.0 - r1) * r2.powi(m as i32) * (1.0 - r2)
    }

    /// Largest global-balance violation over `0 <= n, m <= window`.
    pub fn balance_residual(&self, window: usize) -> f64 {
        let (lam, m1, m2) = (self.lambda, self.mu1, self.mu2);
        let p = |n: usize, m: usize| self.joint(n, m);
        let mut worst = 0.0f64;
        for n in 0..=window {
            for m in 0..=window {
                let r = match (n, m) {
                    (0, 0) => lam * p(0, 0) - m2 * p(0, 1),
                    (_, 0) => (lam + m1) * p(n, 0) - m2 * p(n, 1) - lam * p(n - 1, 0),
                    (0, _) => (lam + m2) * p(0, m) - m2 * p(0, m + 1) - m1 * p(1, m - 1),
                    _ => (lam + m1 + m2) * p(n, m) - m2 * p(n, m + 1) - m1 * p(n + 1, m - 1) - lam * p(n - 1, m),
                };
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_values() {
        let t = TandemNetwork::new(1.0, 2.0, 3.0).unwrap();
        let m = t.metrics();
        assert!((m.l - 1.5).abs() < 1e-15);
        assert!((m.p00 - 1.0 / 3.0).abs() < 1e-15);
        assert!(t.balance_residual(20) <= 1e-12);
    }

    #[test]
    fn symmetric_marginals() {
        let t = TandemNetwork::new(1.0, 2.0, 2.0).unwrap();
        let m = t.metrics();
        assert_eq!(m.l, 2.0);
        assert_eq!(m.l1, m.l2);
        assert_eq!(t.joint(3, 1), t.joint(1, 3));
    }

    #[test]
    fn joint_sums_to_one() {
        let t = TandemNetwork::new(0.4, 1.0, 0.9).unwrap();
        let total: f64 = (0..200).flat_map(|n| (0..200).map(move |m| (n, m))).map(|(n, m)| t.joint(n, m)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_station_rejected() {
        assert!(TandemNetwork::new(2.0, 3.0, 2.0).is_err());
    }
}
