//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use queuekit::markov::{Distribution, StateKind, TransitionMatrix};
use queuekit::pgf::{self, Pgf};
use queuekit::polling::{self, Policy, PollingQueue, PollingSpec};
use queuekit::polling::{cross_station_moments, cyclic_station_moments, DiscretePollingSpec, DiscreteQueue};
use queuekit::queues::{self, mg1_metrics, mm1_metrics, ServiceDescriptor, TandemNetwork};
use queuekit::sim::{self, QueueSim, SimConfig, SimRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// One million measured departures after the default 20% warmup.
fn million() -> SimConfig {
    SimConfig { horizon: 1_250_000, ..Default::default() }
}

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{name} = {got:.17e}, expected {want:.17e} (tol {tol:e})"))
    }
}

fn c1_mm1() -> Outcome {
    let (beta, delta) = (1.0, 2.0);
    let rho = beta / delta;
    let m = mm1_metrics(beta, delta).map_err(|e| e.to_string())?;
    close("L", m.l, rho / (1.0 - rho), 1e-12)?;
    close("Lq", m.lq, rho * rho / (1.0 - rho), 1e-12)?;
    close("W", m.w, 1.0 / (delta - beta), 1e-12)?;
    close("Wq", m.wq, rho / (delta - beta), 1e-12)?;
    close("pi0", m.pi0, 1.0 - rho, 1e-12)?;
    let start = Instant::now();
    let q = QueueSim::from_model(&queues::QueueModel::MM1 { beta, delta }).map_err(|e| e.to_string())?;
    let e = sim::simulate_single_queue(&q, &million()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check!(e.departures >= 1_000_000, "only {} departures", e.departures);
    for (name, est, want) in [("L", e.l, m.l), ("Lq", e.lq, m.lq), ("W", e.w, m.w), ("Wq", e.wq, m.wq), ("pi0", e.pi0, m.pi0)] {
        check!(est.covers(want, 3.0), "simulated {name} {:.6} +/- {:.6} misses {want}", est.point, est.half_width_95);
    }
    check!(secs < 10.0, "simulation took {secs:.2} s");
    Ok(format!("closed forms exact; 1e6-departure sim within 3 hw (L={:.4}+/-{:.4}); {secs:.2} s", e.l.point, e.l.half_width_95))
}

fn erlang_b_oracle(m: usize, rho: f64) -> f64 {
    // direct sum in log space, independent of the library's rescaling
    let ln_terms: Vec<f64> = (0..=m).map(|k| k as f64 * rho.ln() - (1..=k).map(|j| (j as f64).ln()).sum::<f64>()).collect();
    let top = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = ln_terms.iter().map(|t| (t - top).exp()).sum();
    (ln_terms[m] - top).exp() / denom
}

fn c2_erlang() -> Outcome {
    close("B(2,1)", queues::erlang_b(2, 1.0), 0.5 / 2.5, 1e-12)?;
    close("C(2,1)", queues::erlang_c(2, 1.0).map_err(|e| e.to_string())?, 1.0 / 3.0, 1e-12)?;
    let mut worst: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let rhos: Vec<f64> = (1..=500).map(|k| k as f64 * 0.1).collect();
    for m in 1..=200 {
        for &rho in &rhos {
            let (d, r) = (queues::erlang_b(m, rho), queues::erlang_b_recursive(m, rho));
            worst = worst.max((d - r).abs());
            worst_oracle = worst_oracle.max((d - erlang_b_oracle(m, rho)).abs());
        }
    }
    check!(worst <= 1e-12, "direct vs recursion differ by {worst:e}");
    check!(worst_oracle <= 1e-12, "direct vs log-space oracle differ by {worst_oracle:e}");
    Ok(format!("B(2,1)=0.2, C(2,1)=1/3; max |direct - recursion| = {worst:.1e} over m<=200, rho<=50"))
}

fn c3_pollaczek_khinchine() -> Outcome {
    let (beta, s) = (0.5, 1.0);
    let rho = beta * s;
    let want = rho + beta * beta * s * s / (2.0 * (1.0 - rho));
    let m = mg1_metrics(beta, s, s * s).map_err(|e| e.to_string())?;
    close("M/D/1 L", m.l, 0.75, 1e-12)?;
    close("M/D/1 L (oracle)", m.l, want, 1e-12)?;
    let q = QueueSim::mg1(beta, &ServiceDescriptor::Deterministic { value: s }).map_err(|e| e.to_string())?;
    let e = sim::simulate_single_queue(&q, &million()).map_err(|e| e.to_string())?;
    check!(e.l.covers(0.75, 3.0), "simulated L {:.6} +/- {:.6}", e.l.point, e.l.half_width_95);
    let a = mm1_metrics(1.0, 2.0).map_err(|e| e.to_string())?;
    let g = mg1_metrics(1.0, 0.5, 2.0 * 0.25).map_err(|e| e.to_string())?;
    let gap = [a.l - g.l, a.lq - g.lq, a.w - g.w, a.wq - g.wq, a.pi0 - g.pi0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    check!(gap == 0.0, "M/G/1 with exponential moments differs from M/M/1 by {gap:e}");
    Ok(format!("L=0.75; sim {:.4}+/-{:.4}; exponential-moment M/G/1 identical to M/M/1", e.l.point, e.l.half_width_95))
}

fn c4_tandem() -> Outcome {
    let (lam, m1, m2) = (1.0, 2.0, 3.0);
    let net = TandemNetwork::new(lam, m1, m2).map_err(|e| e.to_string())?;
    let t = net.metrics();
    close("L", t.l, lam / (m1 - lam) + lam / (m2 - lam), 1e-12)?;
    close("L", t.l, 1.5, 1e-12)?;
    let residual = net.balance_residual(20);
    check!(residual <= 1e-12, "library balance residual {residual:e}");
    // independent global-balance check on the product form
    let p = |n: i64, m: i64| -> f64 {
        if n < 0 || m < 0 {
            return 0.0;
        }
        let (r1, r2) = (lam / m1, lam / m2);
        (1.0 - r1) * r1.powi(n as i32) * (1.0 - r2) * r2.powi(m as i32)
    };
    let mut oracle: f64 = 0.0;
    for n in 0..=20i64 {
        for m in 0..=20i64 {
            let out = p(n, m) * (lam + if n > 0 { m1 } else { 0.0 } + if m > 0 { m2 } else { 0.0 });
            let inflow = if n > 0 { lam * p(n - 1, m) } else { 0.0 } + m1 * p(n + 1, m - 1) + m2 * p(n, m + 1);
            oracle = oracle.max((out - inflow).abs());
        }
    }
    check!(oracle <= 1e-12, "oracle balance residual {oracle:e}");
    let e = sim::simulate_tandem(lam, m1, m2, &SimConfig::default()).map_err(|e| e.to_string())?;
    check!(e.l.covers(1.5, 1.0), "simulated L {:.6} +/- {:.6} misses 1.5", e.l.point, e.l.half_width_95);
    Ok(format!("L=1.5; balance residual {residual:.1e}; sim L {:.4}+/-{:.4}", e.l.point, e.l.half_width_95))
}

fn random_spec(rng: &mut SimRng, n: usize) -> PollingSpec {
    let target = 0.05 + 0.75 * rng.uniform();
    let weights: Vec<f64> = (0..n).map(|_| 0.1 + rng.uniform()).collect();
    let total: f64 = weights.iter().sum();
    let queues = weights
        .iter()
        .map(|w| {
            let b1 = 0.2 + 2.0 * rng.uniform();
            let s1 = 0.05 + rng.uniform();
            PollingQueue {
                lambda: target * w / total / b1,
                b1,
                b2: b1 * b1 * (1.0 + 2.0 * rng.uniform()),
                s1,
                s2: s1 * s1 * (1.0 + 2.0 * rng.uniform()),
            }
        })
        .collect();
    PollingSpec::new(queues).expect("stable random spec")
}

fn c5_polling_consistency() -> Outcome {
    let mut rng = SimRng::new(2024);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let spec = random_spec(&mut rng, 1 + k % 5);
        check!(spec.rho() <= 0.8 + 1e-12, "generator produced rho {}", spec.rho());
        for policy in [Policy::Exhaustive, Policy::Gated] {
            let a = polling::analyze(&spec, policy).map_err(|e| e.to_string())?;
            // recompute both sides independently of the library residual
            let lhs: f64 = a.waits.iter().enumerate().map(|(i, w)| spec.rho_i(i) * w).sum();
            let rho = spec.rho();
            let d: f64 = spec.queues.iter().map(|q| q.s1).sum();
            let d2 = spec.queues.iter().map(|q| q.s2 - q.s1 * q.s1).sum::<f64>() + d * d;
            let work: f64 = spec.queues.iter().map(|q| q.lambda * q.b2).sum();
            let sq: f64 = (0..spec.len()).map(|i| spec.rho_i(i).powi(2)).sum();
            let sign = if policy == Policy::Gated { 1.0 } else { -1.0 };
            let rhs = rho / (2.0 * (1.0 - rho)) * work
                + rho * d2 / (2.0 * d)
                + d / (2.0 * (1.0 - rho)) * (rho * rho + sign * sq);
            worst = worst.max((lhs - rhs).abs()).max(a.pcl_residual.abs());
        }
    }
    check!(worst <= 1e-9, "worst pseudo-conservation residual {worst:e}");
    let q = PollingQueue { lambda: 0.25, b1: 1.0, b2: 2.0, s1: 0.5, s2: 0.25 };
    let single = PollingSpec::new(vec![q]).map_err(|e| e.to_string())?;
    let rho = 0.25;
    let base = q.lambda * q.b2 / (2.0 * (1.0 - rho)) + q.s2 / (2.0 * q.s1);
    let ex = polling::mean_waits(&single, Policy::Exhaustive).map_err(|e| e.to_string())?[0];
    let ga = polling::mean_waits(&single, Policy::Gated).map_err(|e| e.to_string())?[0];
    close("exhaustive N=1 W", ex, 7.0 / 12.0, 1e-10)?;
    close("exhaustive N=1 W (vacation oracle)", ex, base, 1e-10)?;
    close("gated N=1 W", ga, 0.75, 1e-10)?;
    close("gated N=1 W (vacation oracle)", ga, base + rho * q.s1 / (1.0 - rho), 1e-10)?;
    Ok(format!("50 random specs, worst residual {worst:.1e}; W=7/12 exhaustive, 0.75 gated"))
}

fn c6_polling_simulation() -> Outcome {
    let q = PollingQueue { lambda: 0.25, b1: 1.0, b2: 2.0, s1: 0.5, s2: 0.25 };
    let spec = PollingSpec::new(vec![q; 2]).map_err(|e| e.to_string())?;
    let (n, rho, s) = (2.0, 0.5, 1.0);
    let oracle = n * q.lambda * q.b2 / (2.0 * (1.0 - rho)) + s * (1.0 - rho / n) / (2.0 * (1.0 - rho));
    close("symmetric W (oracle)", oracle, 1.75, 1e-12)?;
    let w = polling::mean_waits(&spec, Policy::Exhaustive).map_err(|e| e.to_string())?;
    for x in &w {
        close("symmetric W", *x, 1.75, 1e-12)?;
    }
    let start = Instant::now();
    let e = sim::simulate_polling(&spec, Policy::Exhaustive, &sim::Routing::Cyclic, &million()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut detail = Vec::new();
    check!(e.served >= 1_000_000, "only {} customers measured", e.served);
    for (i, est) in e.waits.iter().enumerate() {
        let rel = (est.point - 1.75).abs() / 1.75;
        check!(rel <= 0.05, "W[{i}] = {:.4}, {:.2}% from 1.75", est.point, 100.0 * rel);
        detail.push(format!("{:.4}", est.point));
    }
    check!(secs < 60.0, "simulation took {secs:.2} s");
    Ok(format!("W=1.75; sim W = [{}] at 1e6 served; {secs:.2} s", detail.join(", ")))
}

fn c7_discrete_polling() -> Outcome {
    let spec = |v: &[(f64, f64)]| DiscretePollingSpec::new(v.iter().map(|&(mu, r)| DiscreteQueue { mu, r }).collect());
    let two = spec(&[(0.3, 1.0), (0.3, 1.0)]).map_err(|e| e.to_string())?;
    let f = cyclic_station_moments(&two).map_err(|e| e.to_string())?;
    let (r, mu) = (2.0, 0.6);
    for x in &f {
        close("N=2 f_i(i)", *x, 1.05, 1e-12)?;
        close("N=2 f_i(i) (oracle)", *x, r * 0.3 * 0.7 / (1.0 - mu), 1e-12)?;
    }
    let three = spec(&[(0.2, 1.0); 3]).map_err(|e| e.to_string())?;
    for x in cyclic_station_moments(&three).map_err(|e| e.to_string())? {
        close("N=3 f_i(i)", x, 1.2, 1e-12)?;
    }
    let four = spec(&[(0.1, 0.4), (0.2, 0.9), (0.3, 2.0), (0.15, 0.1)]).map_err(|e| e.to_string())?;
    for s in [&two, &three, &four] {
        let diag = cyclic_station_moments(s).map_err(|e| e.to_string())?;
        let x = cross_station_moments(s, &diag).map_err(|e| e.to_string())?;
        let n = s.queues.len();
        for i in 0..n {
            let next = (i + 1) % n;
            if next != i {
                let want = s.queues[i].r * s.queues[i].mu;
                check!(x[next][i] == want, "f_{next}({i}) = {} != r_i mu_i = {want}", x[next][i]);
            }
        }
    }
    Ok("f(1)=f(2)=1.05 (N=2), 1.2 (N=3); f_{i+1}(i) = r_i mu_i exactly".into())
}

fn c8_pgf() -> Outcome {
    let g = Pgf::Quadratic { a0: 0.4, a2: 0.6 };
    let root = pgf::extinction_fixed_point(&g, 1e-13).map_err(|e| e.to_string())?.ok_or("no extinction root")?;
    close("extinction root", root, 2.0 / 3.0, 1e-9)?;
    let mut worst: f64 = 0.0;
    for p in [Pgf::Poisson { mean: 0.5 }, Pgf::Geometric { p: 0.7 }, Pgf::Quadratic { a0: 0.5, a2: 0.2 }] {
        let m = pgf::pgf_moments(&p, pgf::DEFAULT_TOL).map_err(|e| e.to_string())?;
        let (mu, var) = (m.mean, m.variance);
        let theta = |w: f64| pgf::ruin_root_theta(&p, w, 1e-15).expect("theta");
        let h = 1e-4;
        let t: Vec<f64> = (0..4).map(|k| theta(1.0 - k as f64 * h)).collect();
        let d1 = (3.0 * t[0] - 4.0 * t[1] + t[2]) / (2.0 * h);
        let d2 = (2.0 * t[0] - 5.0 * t[1] + 4.0 * t[2] - t[3]) / (h * h);
        let (w1, w2) = (1.0 / (1.0 - mu), var / (1.0 - mu).powi(3) + mu / (1.0 - mu).powi(2));
        let rel = ((d1 - w1) / w1).abs().max(((d2 - w2) / w2).abs());
        check!(rel <= 1e-3, "{p:?}: theta' {d1} vs {w1}, theta'' {d2} vs {w2}");
        worst = worst.max(rel);
    }
    let (f, step) = (Pgf::degenerate(1), Pgf::Poisson { mean: 0.5 });
    let (et, vt) = pgf::ruin_time_moments(&f, &step).map_err(|e| e.to_string())?;
    close("E[T]", et, 2.0, 1e-12)?;
    close("Var[T]", vt, 4.0, 1e-12)?;
    let e = sim::simulate_ruin(&f, &step, 1, 100_000, 32, 42).map_err(|e| e.to_string())?;
    check!(e.mean.covers(2.0, 1.0), "simulated E[T] {:.5} +/- {:.5}", e.mean.point, e.mean.half_width_95);
    check!(e.variance.covers(4.0, 1.0), "simulated Var[T] {:.5} +/- {:.5}", e.variance.point, e.variance.half_width_95);
    Ok(format!(
        "root 2/3; theta derivative worst rel error {worst:.1e}; E[T]=2, Var[T]=4; MC {:.4}+/-{:.4}, {:.4}+/-{:.4}",
        e.mean.point, e.mean.half_width_95, e.variance.point, e.variance.half_width_95
    ))
}

fn random_chain(rng: &mut SimRng, n: usize, sparsity: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n).map(|_| if rng.uniform() < sparsity { 0.0 } else { rng.uniform() }).collect();
            if row.iter().all(|x| *x == 0.0) {
                row[(rng.uniform() * n as f64) as usize % n] = 1.0;
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

/// Depth-20 enumeration: reachability and return lengths from boolean powers.
struct Enumeration {
    reach: Vec<Vec<bool>>,
    period: Vec<usize>,
}

fn enumerate(p: &[Vec<f64>]) -> Enumeration {
    let n = p.len();
    let step: Vec<Vec<bool>> = p.iter().map(|r| r.iter().map(|x| *x > 0.0).collect()).collect();
    let mut power = step.clone();
    let mut reach = vec![vec![false; n]; n];
    let mut period = vec![0usize; n];
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    for len in 1..=20 {
        for i in 0..n {
            for j in 0..n {
                reach[i][j] |= power[i][j];
            }
            if power[i][i] {
                period[i] = gcd(period[i], len);
            }
        }
        power = (0..n).map(|i| (0..n).map(|j| (0..n).any(|k| power[i][k] && step[k][j])).collect()).collect();
    }
    Enumeration { reach, period }
}

fn c9_markov() -> Outcome {
    let mut rng = SimRng::new(7);
    let mut worst_ck: f64 = 0.0;
    for k in 0..100 {
        let n = 2 + k % 7;
        let rows = random_chain(&mut rng, n, 0.3);
        let p = TransitionMatrix::new(rows.clone()).map_err(|e| e.to_string())?;
        let (a, b) = (1 + k as u64 % 5, 2 + k as u64 % 7);
        let lhs = p.n_step(a + b);
        let mut pa = rows.clone();
        for _ in 1..a {
            pa = matmul(&pa, &rows);
        }
        let mut pb = rows.clone();
        for _ in 1..b {
            pb = matmul(&pb, &rows);
        }
        let rhs = matmul(&pa, &pb);
        for i in 0..n {
            for j in 0..n {
                worst_ck = worst_ck.max((lhs.get(i, j) - rhs[i][j]).abs());
            }
        }
    }
    check!(worst_ck <= 1e-10, "Chapman-Kolmogorov residual {worst_ck:e}");

    let (p, q) = (0.2, 0.3);
    let chain = TransitionMatrix::new(vec![vec![1.0 - q, q], vec![p, 1.0 - p]]).map_err(|e| e.to_string())?;
    let start = Distribution::point_mass(2, 0).map_err(|e| e.to_string())?;
    for n in [1u64, 5, 20, 50] {
        let law = chain.evolve(&start, n).map_err(|e| e.to_string())?;
        let closed = p / (p + q) + (1.0 - p - q).powi(n as i32) * (1.0 - p / (p + q));
        close(&format!("P[X_{n}=0]"), law.weights()[0], closed, 1e-12)?;
    }
    let law = chain.evolve(&start, 50).map_err(|e| e.to_string())?;
    close("limit[0]", law.weights()[0], 0.4, 1e-10)?;
    close("limit[1]", law.weights()[1], 0.6, 1e-10)?;
    let pi = chain.stationary().map_err(|e| e.to_string())?;
    close("pi[0]", pi.weights()[0], 0.4, 1e-10)?;

    let mut chains: Vec<Vec<Vec<f64>>> = vec![
        vec![vec![1.0]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
        vec![vec![0.5, 0.5, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.5, 0.5]],
        vec![vec![0.0, 1.0, 0.0, 0.0], vec![0.5, 0.0, 0.5, 0.0], vec![0.0, 0.5, 0.0, 0.5], vec![0.0, 0.0, 1.0, 0.0]],
    ];
    for k in 0..600 {
        let sparsity = 0.4 + 0.4 * rng.uniform();
        chains.push(random_chain(&mut rng, 1 + k % 6, sparsity));
    }
    for rows in &chains {
        let n = rows.len();
        let c = TransitionMatrix::new(rows.clone()).map_err(|e| e.to_string())?.classify();
        let en = enumerate(rows);
        let comm = |i: usize, j: usize| i == j || (en.reach[i][j] && en.reach[j][i]);
        for i in 0..n {
            let class = c.class_of(i).ok_or("state without class")?;
            let oracle_class: Vec<usize> = (0..n).filter(|&j| comm(i, j)).collect();
            let mut lib_class = class.states.clone();
            lib_class.sort_unstable();
            check!(lib_class == oracle_class, "{rows:?}: class of {i} {lib_class:?} vs {oracle_class:?}");
            let closed = oracle_class.iter().all(|&x| (0..n).all(|y| rows[x][y] == 0.0 || oracle_class.contains(&y)));
            check!(class.closed == closed, "{rows:?}: closedness of {i}");
            let absorbing = rows[i][i] == 1.0;
            let kind = if absorbing {
                StateKind::Absorbing
            } else if closed {
                StateKind::Recurrent
            } else {
                StateKind::Transient
            };
            check!(c.kinds[i] == kind, "{rows:?}: state {i} is {:?}, oracle {kind:?}", c.kinds[i]);
            check!(class.period == en.period[i], "{rows:?}: period of {i} {} vs {}", class.period, en.period[i]);
        }
    }
    Ok(format!("CK residual {worst_ck:.1e} on 100 chains; limit (0.4, 0.6); {} chains match enumeration", chains.len()))
}

const MIXED_MODEL: &str = r#"{
  "version": "1",
  "sim": {"seed": 7, "horizon": 50000},
  "models": [
    {"kind": "queue", "name": "mm1", "model": "MM1", "beta": 1, "delta": 2},
    {"kind": "queue", "name": "md1", "model": "MG1", "beta": 0.5, "service": {"dist": "deterministic", "value": 1}},
    {"kind": "tandem", "name": "tandem", "lambda": 1, "mu1": 2, "mu2": 3},
    {"kind": "polling", "name": "polling", "lambda": [0.25, 0.25], "b1": [1, 1], "b2": [2, 2], "s1": [0.5, 0.5], "s2": [0.25, 0.25]},
    {"kind": "ruin", "name": "ruin", "initial": {"family": "series", "coeffs": [0, 1]}, "step": {"family": "poisson", "mean": 0.5}, "replications": 6400}
  ]
}"#;

fn c10_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("queuekit-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let model = dir.join("model.json");
    std::fs::write(&model, MIXED_MODEL).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for format in ["json", "csv"] {
        let runs: Vec<Vec<u8>> = (0..2)
            .map(|_| {
                Command::new(env!("CARGO_BIN_EXE_queuekit"))
                    .args(["validate", model.to_str().unwrap(), "--seed", "42", "--format", format])
                    .output()
                    .expect("run queuekit")
            })
            .map(|o| o.stdout)
            .collect();
        check!(!runs[0].is_empty(), "{format} report is empty");
        check!(runs[0] == runs[1], "{format} reports differ between runs");
        outputs.push(runs[0].len());
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("two validate runs byte-identical (json {} bytes, csv {} bytes)", outputs[0], outputs[1]))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("M/M/1 closed forms and simulation", c1_mm1),
        ("Erlang systems", c2_erlang),
        ("Pollaczek-Khinchine", c3_pollaczek_khinchine),
        ("Tandem product form", c4_tandem),
        ("Polling internal consistency", c5_polling_consistency),
        ("Polling vs simulation", c6_polling_simulation),
        ("Discrete polling fixed point", c7_discrete_polling),
        ("PGF suite", c8_pgf),
        ("Markov core", c9_markov),
        ("Determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
