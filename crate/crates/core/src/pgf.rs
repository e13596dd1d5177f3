//! Probability generating functions of nonnegative integer laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 1_000_000;
pub const DEFAULT_TRUNCATION: usize = 256;
const MAX_TRUNCATION: usize = 1 << 16;
const MASS_TOL: f64 = 1e-12;

/// A law on `0, 1, 2, ...` given by coefficients or by a named family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pgf {
    /// `p_0..p_K` plus a bound on the mass beyond `K`.
    Series {
        coeffs: Vec<f64>,
        #[serde(default)]
        tail_mass: f64,
    },
    Poisson { mean: f64 },
    /// `p_k = p (1 - p)^k`.
    Geometric { p: f64 },
    /// `a0 + (1 - a0 - a2) s + a2 s^2`.
    Quadratic { a0: f64, a2: f64 },
    /// `outer(inner(s))`.
    Compound { outer: Box<Pgf>, inner: Box<Pgf> },
}

/// Mean and variance, with the tail mass that was left out of the sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub tail_bound: f64,
}

impl Pgf {
    /// Point mass at `k`.
    pub fn degenerate(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Pgf::Series { coeffs, tail_mass: 0.0 }
    }

    pub fn compound(outer: Pgf, inner: Pgf) -> Self {
        Pgf::Compound { outer: Box::new(outer), inner: Box::new(inner) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Pgf::Series { coeffs, tail_mass } => {
                if coeffs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::Validation("coefficients must be nonnegative and finite".into()));
                }
                if !(tail_mass.is_finite() && *tail_mass >= 0.0) {
                    return Err(Error::Validation("tail_mass must be nonnegative".into()));
                }
                let total = coeffs.iter().sum::<f64>() + tail_mass;
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::Validation(format!("coefficients and tail sum to {total}, not 1")));
                }
                Ok(())
            }
            Pgf::Poisson { mean } => {
                if mean.is_finite() && *mean >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Validation(format!("poisson mean must be nonnegative, got {mean}")))
                }
            }
            Pgf::Geometric { p } => {
                if *p > 0.0 && *p <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Validation(format!("geometric p must lie in (0, 1], got {p}")))
                }
            }
            Pgf::Quadratic { a0, a2 } => {
                let a1 = 1.0 - a0 - a2;
                if *a0 >= 0.0 && *a2 >= 0.0 && a1 >= -MASS_TOL {
                    Ok(())
                } else {
                    Err(Error::Validation("quadratic needs a0, a2 >= 0 and a0 + a2 <= 1".into()))
                }
            }
            Pgf::Compound { outer, inner } => {
                outer.validate()?;
                inner.validate()
            }
        }
    }

    /// `G(s)` for `s` in `[0, 1]`; for series the tail is omitted.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Pgf::Series { coeffs, .. } => coeffs.iter().rev().fold(0.0, |acc, p| acc * s + p),
            Pgf::Poisson { mean } => (mean * (s - 1.0)).exp(),
            Pgf::Geometric { p } => p / (1.0 - (1.0 - p) * s),
            Pgf::Quadratic { a0, a2 } => a0 + (1.0 - a0 - a2) * s + a2 * s * s,
            Pgf::Compound { outer, inner } => outer.eval(inner.eval(s)),
        }
    }

    /// Mass the representation leaves uncovered.
    pub fn tail_mass(&self) -> f64 {
        match self {
            Pgf::Series { tail_mass, .. } => *tail_mass,
            Pgf::Compound { outer, inner } => outer.tail_mass() + inner.tail_mass(),
            _ => 0.0,
        }
    }

    /// Mean and variance without certifying the tail.
    fn raw_moments(&self) -> (f64, f64) {
        match self {
            Pgf::Series { coeffs, .. } => {
                let (m, f2) = coeffs.iter().enumerate().fold((0.0, 0.0), |(m, f2), (k, p)| {
                    let k = k as f64;
                    (m + k * p, f2 + k * (k - 1.0) * p)
                });
                (m, f2 + m - m * m)
            }
            Pgf::Poisson { mean } => (*mean, *mean),
            Pgf::Geometric { p } => ((1.0 - p) / p, (1.0 - p) / (p * p)),
            Pgf::Quadratic { a0, a2 } => {
                let a1 = 1.0 - a0 - a2;
                let m = a1 + 2.0 * a2;
                (m, a1 + 4.0 * a2 - m * m)
            }
            Pgf::Compound { outer, inner } => {
                let (ma, va) = outer.raw_moments();
                let (mb, vb) = inner.raw_moments();
                (ma * mb, ma * vb + va * mb * mb)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moments().0
    }

    /// Coefficients `p_0..=p_k` and the mass beyond them.
    pub fn coefficients(&self, k: usize) -> (Vec<f64>, f64) {
        let coeffs = match self {
            Pgf::Series { coeffs, .. } => {
                let mut c = coeffs.clone();
                c.resize(k + 1, 0.0);
                c
            }
            Pgf::Poisson { mean } => {
                let mut p = (-mean).exp();
                (0..=k)
                    .map(|j| {
                        if j > 0 {
                            p *= mean / j as f64;
                        }
                        p
                    })
                    .collect()
            }
            Pgf::Geometric { p } => {
                let mut term = *p;
                (0..=k)
                    .map(|_| {
                        let t = term;
                        term *= 1.0 - p;
                        t
                    })
                    .collect()
            }
            Pgf::Quadratic { a0, a2 } => {
                let mut c = vec![0.0; k + 1];
                let a1 = (1.0 - a0 - a2).max(0.0);
                for (j, v) in [*a0, a1, *a2].into_iter().enumerate() {
                    if j <= k {
                        c[j] = v;
                    }
                }
                c
            }
            Pgf::Compound { outer, inner } => compose_coefficients(outer, inner, k),
        };
        let tail = (1.0 - coeffs.iter().sum::<f64>()).max(0.0);
        (coeffs, tail)
    }

    pub fn pmf(&self, k: usize) -> f64 {
        self.coefficients(k).0[k]
    }

    /// Truncated series whose tail is at most `tol`, doubling `K` from 256.
    pub fn to_series(&self, tol: f64) -> Result<Pgf> {
        let mut k = DEFAULT_TRUNCATION;
        loop {
            let (coeffs, tail) = self.coefficients(k);
            if tail <= tol {
                return Ok(Pgf::Series { coeffs, tail_mass: tail });
            }
            if k >= MAX_TRUNCATION {
                return Err(Error::TailTooLarge { tail, tol });
            }
            k *= 2;
        }
    }
}

fn poly_mul_truncated(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    for (i, x) in a.iter().enumerate().filter(|(_, x)| **x != 0.0) {
        for (j, y) in b.iter().enumerate().take(k + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of `outer(inner(z))` up to `z^k` by Horner substitution.
fn compose_coefficients(outer: &Pgf, inner: &Pgf, k: usize) -> Vec<f64> {
    let (mut a, _) = outer.coefficients(k);
    // drop outer terms whose combined mass is negligible
    let mut suffix = 0.0;
    while let Some(&last) = a.last() {
        if a.len() > 1 && suffix + last < 1e-18 {
            suffix += last;
            a.pop();
        } else {
            break;
        }
    }
    let (b, _) = inner.coefficients(k);
    let mut acc = vec![0.0; k + 1];
    for &ak in a.iter().rev() {
        acc = poly_mul_truncated(&acc, &b, k);
        acc[0] += ak;
    }
    acc
}

/// Mean and variance; fails when an uncovered tail exceeds `tol`.
pub fn pgf_moments(g: &Pgf, tol: f64) -> Result<Moments> {
    g.validate()?;
    let tail = g.tail_mass();
    if tail > tol {
        return Err(Error::TailTooLarge { tail, tol });
    }
    let (mean, variance) = g.raw_moments();
    Ok(Moments { mean, variance, tail_bound: tail })
}

/// `A(B(z))` as a truncated series certified to `tol`.
pub fn pgf_compose(a: &Pgf, b: &Pgf, tol: f64) -> Result<Pgf> {
    a.validate()?;
    b.validate()?;
    Pgf::compound(a.clone(), b.clone()).to_series(tol)
}

fn iterate<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<f64> {
    let mut s = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let next = f(s);
        if (next - s).abs() < tol {
            return Ok(next);
        }
        s = next;
    }
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS })
}

/// Smallest root of `g(s) = s` in `[0, 1)`, which exists iff `g'(1) > 1`.
pub fn extinction_fixed_point(g: &Pgf, tol: f64) -> Result<Option<f64>> {
    g.validate()?;
    if g.mean() <= 1.0 {
        return Ok(None);
    }
    iterate(|s| g.eval(s), tol).map(Some)
}

/// Root `theta(w)` of `theta = w P(theta)` in `(0, 1]`.
pub fn ruin_root_theta(p: &Pgf, w: f64, tol: f64) -> Result<f64> {
    p.validate()?;
    let mu = p.mean();
    if mu >= 1.0 {
        return Err(Error::Domain(format!("step law mean {mu} must be below 1")));
    }
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::Domain(format!("w must lie in (0, 1], got {w}")));
    }
    iterate(|t| w * p.eval(t), tol)
}

/// Mean and variance of the ruin time from initial capital `f` with step law `p`.
pub fn ruin_time_moments(f: &Pgf, p: &Pgf) -> Result<(f64, f64)> {
    let fm = pgf_moments(f, DEFAULT_TOL)?;
    let pm = pgf_moments(p, DEFAULT_TOL)?;
    if pm.mean >= 1.0 {
        return Err(Error::Domain(format!("step law mean {} must be below 1", pm.mean)));
    }
    let d = 1.0 - pm.mean;
    Ok((fm.mean / d, fm.variance / (d * d) + pm.variance * fm.mean / d.powi(3)))
}
