use std::sync::Arc;

use finsum_core::katyusha::{katyusha_params, run_q_katyusha};
use finsum_core::objectives::LeastSquares;
use finsum_core::qvrg::EstimatorMode;
use finsum_core::{CaseTag, FiniteSumObjective, KnownOptimum, ProblemInstance, ProximalTerm, QueryLedger, SimRng, Vector};
use rand::SeedableRng;

fn ridge(ratio: f64, seed: u64) -> (ProblemInstance, f64) {
    let mut rng = SimRng::seed_from_u64(seed);
    let ls = LeastSquares::random(16, 8, &mut rng);
    let mu = ls.smoothness() / ratio;
    let x_star = ls.ridge_solution(mu).unwrap();
    let inst = ProblemInstance::new(Arc::new(ls), ProximalTerm::L2 { mu }, CaseTag::Case1).unwrap();
    let f_star = inst.evaluate(&x_star).unwrap();
    let delta = inst.evaluate(&Vector::zeros(8)).unwrap() - f_star;
    let inst = inst
        .with_delta(delta)
        .with_known_optimum(KnownOptimum::Exact { x: x_star, value: f_star });
    (inst, delta)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[test]
fn median_error_below_target() {
    for ratio in [10.0, 100.0] {
        let (inst, delta) = ridge(ratio, 42);
        let eps = 1e-6 * delta;
        let p = katyusha_params(16, 8, inst.objective.smoothness(), inst.proximal.strong_convexity(), delta, eps).unwrap();
        let mut errs = Vec::new();
        for seed in 0..20 {
            let mut rng = SimRng::seed_from_u64(seed);
            let mut ledger = QueryLedger::new();
            let t = run_q_katyusha(&inst, &p, None, EstimatorMode::Minibatch, &mut rng, &mut ledger).unwrap();
            errs.push(inst.error(&t.x_out).unwrap());
            assert_eq!(ledger.quantum(), p.modeled_cost(16, 8));
        }
        let med = median(errs.clone());
        println!("ratio {ratio}: S={} median {med:e} eps {eps:e} max {:e}", p.epochs, errs.iter().cloned().fold(0.0, f64::max));
        assert!(med <= eps);
    }
}
