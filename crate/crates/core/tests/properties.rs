use approx::relative_eq;
use proptest::prelude::*;

use queuekit::birth_death::{stationary_distribution, BirthDeathSpec};
use queuekit::markov::TransitionMatrix;
use queuekit::pgf::{pgf_moments, ruin_root_theta, Pgf};
use queuekit::polling::{mean_waits, Policy, PollingQueue, PollingSpec};
use queuekit::queues::{
    embedded_stationary, erlang_b, erlang_b_recursive, mg1_arrival_probs, QueueModel, ServiceDescriptor, TandemNetwork,
};

fn stochastic_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..7).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, n), n).prop_map(|rows| {
            rows.into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|x| x / s).collect()
                })
                .collect()
        })
    })
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn polling_spec() -> impl Strategy<Value = PollingSpec> {
    (1usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec((0.1f64..1.0, 0.1f64..2.0, 0.0f64..2.0, 0.05f64..2.0, 0.0f64..2.0), n),
            0.05f64..0.9,
        )
            .prop_map(|(raw, target)| {
                let load: f64 = raw.iter().map(|(w, b1, ..)| w * b1).sum();
                let queues = raw
                    .into_iter()
                    .map(|(w, b1, cb, s1, cs)| PollingQueue {
                        lambda: w * target / load,
                        b1,
                        b2: b1 * b1 * (1.0 + cb),
                        s1,
                        s2: s1 * s1 * (1.0 + cs),
                    })
                    .collect();
                PollingSpec { queues, delta2: None }
            })
    })
}

fn pcl_rhs(spec: &PollingSpec, policy: Policy) -> f64 {
    let q = &spec.queues;
    let rho: f64 = q.iter().map(|q| q.lambda * q.b1).sum();
    let d: f64 = q.iter().map(|q| q.s1).sum();
    let d2 = q.iter().map(|q| q.s2 - q.s1 * q.s1).sum::<f64>() + d * d;
    let work: f64 = q.iter().map(|q| q.lambda * q.b2).sum();
    let sq: f64 = q.iter().map(|q| (q.lambda * q.b1).powi(2)).sum();
    let sign = if policy == Policy::Exhaustive { -1.0 } else { 1.0 };
    rho * work / (2.0 * (1.0 - rho)) + rho * d2 / (2.0 * d) + d / (2.0 * (1.0 - rho)) * (rho * rho + sign * sq)
}

fn weighted_wait(spec: &PollingSpec, w: &[f64]) -> f64 {
    spec.queues.iter().zip(w).map(|(q, w)| q.lambda * q.b1 * w).sum()
}

proptest! {
    #[test]
    fn chapman_kolmogorov(rows in stochastic_matrix(), m in 0u64..6, n in 0u64..6) {
        let p = TransitionMatrix::new(rows.clone()).unwrap();
        let mut naive = (0..rows.len()).map(|i| (0..rows.len()).map(|j| f64::from(i == j)).collect::<Vec<_>>()).collect::<Vec<_>>();
        for _ in 0..m + n {
            naive = matmul(&naive, &rows);
        }
        let split = matmul(&p.n_step(m).to_rows(), &p.n_step(n).to_rows());
        prop_assert!(max_gap(&p.n_step(m + n).to_rows(), &naive) < 1e-12);
        prop_assert!(max_gap(&split, &naive) < 1e-12);
    }

    #[test]
    fn stationary_is_left_fixed_point(rows in stochastic_matrix()) {
        let p = TransitionMatrix::new(rows.clone()).unwrap();
        let pi = p.stationary().unwrap();
        let w = pi.weights();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..rows.len() {
            let next: f64 = (0..rows.len()).map(|i| w[i] * rows[i][j]).sum();
            prop_assert!((next - w[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn queue_identities_hold(beta in 0.05f64..10.0, delta in 0.1f64..5.0, m in 1usize..30, load in 0.01f64..0.95, cv in 0.0f64..3.0) {
        let models = [
            QueueModel::MM1 { beta: load * delta, delta },
            QueueModel::MMInf { beta, delta },
            QueueModel::MMm { beta: load * delta * m as f64, delta, m },
            QueueModel::MMmm { beta, delta, m },
            QueueModel::MG1 { beta: load * delta, es: 1.0 / delta, es2: (1.0 + cv) / (delta * delta) },
        ];
        for q in models {
            let x = q.metrics().unwrap();
            prop_assert!(x.identity_residual() <= 1e-9 * x.l.max(1.0), "{q:?}: {}", x.identity_residual());
            prop_assert!(x.pi0 > 0.0 && x.pi0 <= 1.0);
        }
    }

    #[test]
    fn mmm_matches_birth_death_law(delta in 0.2f64..5.0, m in 1usize..20, load in 0.05f64..0.9) {
        let beta = load * delta * m as f64;
        let x = QueueModel::MMm { beta, delta, m }.metrics().unwrap();
        let law = stationary_distribution(&BirthDeathSpec::Servers { birth: beta, death: delta, servers: m }, 100_000, 1e-13).unwrap();
        prop_assert!(relative_eq!(x.l, law.mean(), max_relative = 1e-9), "{} vs {}", x.l, law.mean());
        prop_assert!(relative_eq!(x.pi0, law.probs[0], max_relative = 1e-9));
    }

    #[test]
    fn erlang_b_matches_direct_sum(m in 1usize..40, rho in 0.01f64..30.0) {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=m {
            term *= rho / k as f64;
            sum += term;
        }
        let direct = term / sum;
        prop_assert!(relative_eq!(erlang_b(m, rho), direct, max_relative = 1e-12));
        prop_assert!(relative_eq!(erlang_b_recursive(m, rho), direct, max_relative = 1e-12));
    }

    #[test]
    fn detailed_balance(birth in 0.1f64..5.0, death in 0.1f64..5.0, servers in 1usize..8, cap in 1usize..60) {
        let spec = BirthDeathSpec::Capped { birth, death, servers, capacity: servers.max(cap) };
        let law = stationary_distribution(&spec, 1000, 1e-14).unwrap();
        let p = &law.probs;
        prop_assert!((p.iter().sum::<f64>() + law.tail_mass - 1.0).abs() < 1e-12);
        for n in 0..p.len() - 1 {
            let flow_up = p[n] * birth;
            let flow_down = p[n + 1] * (n + 1).min(servers) as f64 * death;
            prop_assert!((flow_up - flow_down).abs() <= 1e-12 * flow_up.max(1e-300));
        }
    }

    #[test]
    fn tandem_global_balance(lambda in 0.1f64..3.0, r1 in 0.05f64..0.9, r2 in 0.05f64..0.9) {
        let net = TandemNetwork::new(lambda, lambda / r1, lambda / r2).unwrap();
        prop_assert!(net.balance_residual(20) < 1e-12);
        let t = net.metrics();
        prop_assert!(relative_eq!(t.l, r1 / (1.0 - r1) + r2 / (1.0 - r2), max_relative = 1e-12));
    }

    #[test]
    fn embedded_law_matches_transform(delta in 0.2f64..5.0, load in 0.05f64..0.8, det in any::<bool>()) {
        let beta = load * delta;
        let service = if det {
            ServiceDescriptor::Deterministic { value: 1.0 / delta }
        } else {
            ServiceDescriptor::Exponential { rate: delta }
        };
        let a = mg1_arrival_probs(beta, &service, 400).unwrap();
        let pi = embedded_stationary(&a, 1000).unwrap();
        for z in [0.0, 0.3, 0.6, 0.9, 0.99] {
            let lhs = pi.probs.iter().rev().fold(0.0, |acc, p| acc * z + p);
            let az = a.pgf(z);
            let rhs = (1.0 - load) * (1.0 - z) * az / (az - z);
            prop_assert!((lhs - rhs).abs() < 1e-9, "z={z}: {lhs} vs {rhs}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pseudo_conservation(spec in polling_spec()) {
        for policy in [Policy::Exhaustive, Policy::Gated] {
            let w = mean_waits(&spec, policy).unwrap();
            let rhs = pcl_rhs(&spec, policy);
            prop_assert!((weighted_wait(&spec, &w) - rhs).abs() <= 1e-9 * rhs, "{policy:?}");
            prop_assert!(w.iter().all(|x| x.is_finite() && *x > 0.0));
        }
    }

    #[test]
    fn gated_weighted_wait_exceeds_exhaustive(spec in polling_spec()) {
        let ex = weighted_wait(&spec, &mean_waits(&spec, Policy::Exhaustive).unwrap());
        let ga = weighted_wait(&spec, &mean_waits(&spec, Policy::Gated).unwrap());
        prop_assert!(ga > ex);
    }

    #[test]
    fn waits_scale_with_time_unit(spec in polling_spec(), c in 0.1f64..10.0) {
        for policy in [Policy::Exhaustive, Policy::Gated] {
            let base = mean_waits(&spec, policy).unwrap();
            let scaled = mean_waits(&spec.scaled(c), policy).unwrap();
            for (b, s) in base.iter().zip(&scaled) {
                prop_assert!(relative_eq!(c * b, *s, max_relative = 1e-9));
            }
        }
    }

    #[test]
    fn pgf_normalised_and_mean_from_slope(mean in 0.05f64..5.0, p in 0.05f64..0.95, a0 in 0.0f64..0.5, a2 in 0.0f64..0.5) {
        let laws = [
            (Pgf::Poisson { mean }, mean),
            (Pgf::Geometric { p }, (1.0 - p) / p),
            (Pgf::Quadratic { a0, a2 }, 1.0 - a0 + a2),
        ];
        for (g, m) in laws {
            prop_assert!((g.eval(1.0) - 1.0).abs() < 1e-12);
            prop_assert!((g.eval(1.0 - 1e-10) - 1.0).abs() < 1e-8);
            let h = 1e-5;
            let slope = (3.0 * g.eval(1.0) - 4.0 * g.eval(1.0 - h) + g.eval(1.0 - 2.0 * h)) / (2.0 * h);
            prop_assert!(relative_eq!(slope, m, max_relative = 1e-5, epsilon = 1e-8), "{g:?}: {slope} vs {m}");
            prop_assert!(relative_eq!(pgf_moments(&g, 1e-12).unwrap().mean, m, max_relative = 1e-9));
        }
    }

    #[test]
    fn ruin_root_is_fixed_point(a0 in 0.05f64..0.6, frac in 0.0f64..0.95, w in 0.01f64..1.0) {
        let a2 = a0 * frac;
        prop_assume!(a0 + a2 <= 1.0);
        let p = Pgf::Quadratic { a0, a2 };
        let theta = ruin_root_theta(&p, w, 1e-14).unwrap();
        let step = a0 + (1.0 - a0 - a2) * theta + a2 * theta * theta;
        prop_assert!(theta > 0.0 && theta <= 1.0);
        prop_assert!((theta - w * step).abs() < 1e-12);
        let higher = ruin_root_theta(&p, (w + 0.5).min(1.0), 1e-14).unwrap();
        prop_assert!(higher >= theta - 1e-12);
    }
}
