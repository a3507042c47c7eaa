use std::sync::Arc;

use finsum_core::objectives::QuadraticSum;
use finsum_core::qvrg::{qvrg, ComponentDifference, EstimatorMode};
use finsum_core::spider::{run_fs_q_spider, spider_params};
use finsum_core::{CaseTag, FiniteSumObjective, ProblemInstance, ProximalTerm, QueryLedger, SimRng, Vector};
use rand::SeedableRng;

fn suite(seed: u64) -> (ProblemInstance, QuadraticSum, f64) {
    let mut rng = SimRng::seed_from_u64(seed);
    let q = QuadraticSum::random_indefinite(16, 8, 2.0, &mut rng);
    let x_star = q.stationary_point().unwrap();
    let delta = q.value(&Vector::zeros(8)) - q.value(&x_star);
    let inst = ProblemInstance::new(Arc::new(q.clone()), ProximalTerm::Zero, CaseTag::Nonconvex)
        .unwrap()
        .with_delta(delta);
    (inst, q, delta)
}

#[test]
fn median_gradient_norm() {
    let eps = 0.05;
    for inst_seed in [1u64, 2, 3] {
        let (inst, q, delta) = suite(inst_seed);
        let p = spider_params(16, 8, q.smoothness(), delta, eps).unwrap();
        let mut norms: Vec<f64> = (0..20)
            .map(|seed| {
                let mut rng = SimRng::seed_from_u64(seed);
                let mut ledger = QueryLedger::new();
                let out = run_fs_q_spider(&inst, &p, EstimatorMode::Minibatch, &mut rng, &mut ledger).unwrap();
                q.gradient(&out.x).norm()
            })
            .collect();
        norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (norms[9] + norms[10]);
        assert!(median <= 1.2 * eps, "instance {inst_seed}: median {median}");
    }
}

#[test]
fn difference_drift_matches_premises() {
    let eps = 0.05;
    let (inst, q, delta) = suite(1);
    let p = spider_params(16, 8, q.smoothness(), delta, eps).unwrap();
    let mut rng = SimRng::seed_from_u64(77);
    let x_prev = Vector::from_fn(8, |k, _| 0.1 * k as f64);
    let dir = Vector::from_fn(8, |k, _| if k % 2 == 0 { 1.0 } else { -1.0 }).normalize();
    let x = &x_prev + dir * p.step;
    let exact = ComponentDifference::new(&q, &x, &x_prev).exact_mean();
    let reps = 10_000;
    let mut mean = Vector::zeros(8);
    let mut mse = 0.0;
    let mut ledger = QueryLedger::new();
    for _ in 0..reps {
        let g = qvrg(&inst, &x, &x_prev, p.sigma_hat(), EstimatorMode::Minibatch, &mut rng, &mut ledger).unwrap();
        mse += (&g - &exact).norm_squared();
        mean += g;
    }
    mean /= reps as f64;
    mse /= reps as f64;
    let target = p.sigma_hat().powi(2);
    assert!(mse <= 1.2 * target, "mse {mse} target {target}");
    assert!((mean - &exact).norm() <= 4.0 * p.sigma_hat() / (reps as f64).sqrt());
    assert_eq!(ledger.quantum(), reps as f64 * p.difference_charge(8));
}
