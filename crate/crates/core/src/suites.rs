//! Canonical instances and measurement routines shared by the experiment
//! harness and the acceptance tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::hard::{gen_hard_instance, hypothesis_points, suboptimality_check, HardSpec, Verdict};
use crate::katyusha::{katyusha_params, run_q_katyusha, KatyushaParams, Trajectory};
use crate::ledger::QueryLedger;
use crate::mean::{mlmc_sample, BiasedFamily, GaussianSampler};
use crate::objectives::{proximal_gradient_reference, subgradient_reference, HingeLoss, LeastSquares, QuadraticSum};
use crate::problem::{CaseTag, FiniteSumObjective, KnownOptimum, ProblemInstance, ProximalTerm, Vector};
use crate::qvrg::{qvrg, ComponentDifference, EstimatorMode};
use crate::reductions::{run_reduction, KatyushaHood, Reduction, ReductionOutcome};
use crate::spider::{run_fs_q_spider, spider_params, SpiderOutcome};
use crate::SimRng;

/// Random least squares plus a ridge term with `l / mu = ratio`, exact optimum attached.
pub fn ridge_instance(n: usize, d: usize, ratio: f64, seed: u64) -> Result<ProblemInstance> {
    if !(ratio >= 1.0) {
        return Err(Error::InvalidParameter(format!("condition ratio must be at least 1, got {ratio}")));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let ls = LeastSquares::random(n, d, &mut rng);
    let mu = ls.smoothness() / ratio;
    let x_star = ls.ridge_solution(mu)?;
    let inst = ProblemInstance::new(Arc::new(ls), ProximalTerm::L2 { mu }, CaseTag::Case1)?;
    let f_star = inst.evaluate(&x_star)?;
    let delta = inst.evaluate(&Vector::zeros(d))? - f_star;
    Ok(inst
        .with_delta(delta)
        .with_radius(x_star.norm())
        .with_known_optimum(KnownOptimum::Exact { x: x_star, value: f_star }))
}

/// Runs the accelerated solver from the origin at `eps = eps_rel * delta`.
pub fn katyusha_run(
    instance: &ProblemInstance,
    eps_rel: f64,
    mode: EstimatorMode,
    seed: u64,
) -> Result<(KatyushaParams, Trajectory, QueryLedger)> {
    let params = katyusha_params(
        instance.n(),
        instance.dim(),
        instance.objective.smoothness(),
        instance.proximal.strong_convexity(),
        instance.delta,
        eps_rel * instance.delta,
    )?;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut ledger = QueryLedger::new();
    let traj = run_q_katyusha(instance, &params, None, mode, &mut rng, &mut ledger)?;
    let expected = params.modeled_cost(instance.n(), instance.dim());
    if ledger.quantum() != expected {
        return Err(Error::Invariant(format!(
            "modeled total {} differs from S n + S m ceil(sqrt(b d)) = {expected}",
            ledger.quantum()
        )));
    }
    Ok((params, traj, ledger))
}

/// `n + sqrt(d) + sqrt(l/mu) (n^{1/3} d^{1/3} + n^{-2/3} d^{5/6})`.
pub fn theory_value(n: usize, d: usize, ratio: f64) -> f64 {
    let (n, d) = (n as f64, d as f64);
    n + d.sqrt() + ratio.sqrt() * (n.cbrt() * d.cbrt() + n.powf(-2.0 / 3.0) * d.powf(5.0 / 6.0))
}

/// Indefinite quadratic sum with its stationary point as the reference for `delta`.
pub fn indefinite_instance(n: usize, d: usize, spread: f64, seed: u64) -> Result<(ProblemInstance, QuadraticSum)> {
    let mut rng = SimRng::seed_from_u64(seed);
    let q = QuadraticSum::random_indefinite(n, d, spread, &mut rng);
    let x_star = q.stationary_point()?;
    let delta = q.value(&Vector::zeros(d)) - q.value(&x_star);
    let inst = ProblemInstance::new(Arc::new(q.clone()), ProximalTerm::Zero, CaseTag::Nonconvex)?.with_delta(delta.abs());
    Ok((inst, q))
}

/// Runs the nonconvex solver; returns the outcome and `||grad f(x_out)||`.
pub fn spider_run(instance: &ProblemInstance, eps: f64, seed: u64) -> Result<(SpiderOutcome, f64, QueryLedger)> {
    let params = spider_params(
        instance.n(),
        instance.dim(),
        instance.objective.smoothness(),
        instance.delta,
        eps,
    )?;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut ledger = QueryLedger::new();
    let out = run_fs_q_spider(instance, &params, EstimatorMode::Minibatch, &mut rng, &mut ledger)?;
    let grad = instance.objective.gradient(&out.x).norm();
    Ok((out, grad, ledger))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QvrgStats {
    pub calls: u64,
    pub sigma_hat: f64,
    /// `||mean(g) - g_exact||`.
    pub bias_norm: f64,
    pub mse: f64,
    pub quantum_total: f64,
}

/// Repeated estimates of one gradient difference on a smooth least-squares instance
/// with `sigma_hat = sigma_fraction * l ||x - x_ref||`.
pub fn qvrg_stats(n: usize, d: usize, calls: u64, sigma_fraction: f64, seed: u64) -> Result<QvrgStats> {
    let mut rng = SimRng::seed_from_u64(seed);
    let ls = LeastSquares::random(n, d, &mut rng);
    let inst = ProblemInstance::new(Arc::new(ls), ProximalTerm::Zero, CaseTag::Nonconvex)?;
    let x_ref = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let x = &x_ref + Vector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
    let diff = ComponentDifference::new(inst.objective.as_ref(), &x, &x_ref);
    let exact = diff.exact_mean();
    let sigma_hat = sigma_fraction * diff.sigma();
    let mut ledger = QueryLedger::new();
    let mut mean = Vector::zeros(d);
    let mut mse = 0.0;
    for _ in 0..calls {
        let g = qvrg(&inst, &x, &x_ref, sigma_hat, EstimatorMode::Minibatch, &mut rng, &mut ledger)?;
        mse += (&g - &exact).norm_squared();
        mean += g;
    }
    mean /= calls as f64;
    Ok(QvrgStats {
        calls,
        sigma_hat,
        bias_norm: (mean - exact).norm(),
        mse: mse / calls as f64,
        quantum_total: ledger.quantum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlmcStats {
    pub runs: u64,
    pub debiased_bias: f64,
    pub standard_error: f64,
    pub naive_bias: f64,
    pub mean_draws: f64,
}

/// Scalar standard normal with bias `bias0 2^{-j}` injected at levels `j < j_clean`.
pub fn mlmc_stats(bias0: f64, j_clean: u32, n0: u64, runs: u64, seed: u64) -> Result<MlmcStats> {
    if runs < 2 {
        return Err(Error::InvalidParameter("need at least two runs".into()));
    }
    let sampler = GaussianSampler {
        mean: Vector::zeros(1),
        std: 1.0,
    };
    let family = BiasedFamily::unbiased(&sampler, n0, j_clean).with_geometric_bias(&Vector::from_element(1, bias0));
    let mut rng = SimRng::seed_from_u64(seed);
    let (mut sum, mut sum_sq, mut naive, mut draws) = (0.0, 0.0, 0.0, 0u64);
    for _ in 0..runs {
        let (v, used) = mlmc_sample(&family, &mut rng)?;
        sum += v[0];
        sum_sq += v[0] * v[0];
        draws += used;
        naive += family.level_estimate(0, &mut rng)[0];
    }
    let r = runs as f64;
    let mean = sum / r;
    let var = (sum_sq - r * mean * mean) / (r - 1.0);
    // the sampler mean is zero, so the bias is the sample mean itself
    Ok(MlmcStats {
        runs,
        debiased_bias: mean - sampler.mean[0],
        standard_error: (var / r).sqrt(),
        naive_bias: naive / r - sampler.mean[0],
        mean_draws: draws as f64 / r,
    })
}

/// Composite instance together with a high-accuracy reference value.
#[derive(Debug, Clone)]
pub struct ReferenceSetup {
    pub instance: ProblemInstance,
    pub f_ref: f64,
}

/// Lasso: least squares plus `lambda ||x||_1`; reference from proximal gradient.
pub fn lasso_setup(n: usize, d: usize, lambda: f64, seed: u64, reference_iterations: usize) -> Result<ReferenceSetup> {
    let mut rng = SimRng::seed_from_u64(seed);
    let ls = Arc::new(LeastSquares::random(n, d, &mut rng));
    let psi = ProximalTerm::L1 { lambda };
    let x_ref = proximal_gradient_reference(ls.as_ref(), psi, reference_iterations);
    let inst = ProblemInstance::new(ls, psi, CaseTag::Case2)?;
    let f_ref = inst.evaluate(&x_ref)?;
    let delta = inst.evaluate(&Vector::zeros(d))? - f_ref;
    Ok(ReferenceSetup {
        instance: inst.with_delta(delta).with_radius(x_ref.norm()),
        f_ref,
    })
}

/// Hinge loss plus `(mu/2)||x||^2`; reference from averaged subgradient descent.
pub fn svm_setup(n: usize, d: usize, mu: f64, seed: u64, reference_iterations: usize) -> Result<ReferenceSetup> {
    let mut rng = SimRng::seed_from_u64(seed);
    let hinge = Arc::new(HingeLoss::random(n, d, &mut rng));
    let x_ref = subgradient_reference(hinge.as_ref(), mu, reference_iterations);
    let inst = ProblemInstance::new(hinge, ProximalTerm::L2 { mu }, CaseTag::Case3)?;
    let f_ref = inst.evaluate(&x_ref)?;
    let delta = inst.evaluate(&Vector::zeros(d))? - f_ref;
    Ok(ReferenceSetup {
        instance: inst.with_delta(delta),
        f_ref,
    })
}

/// Staged reduction at `eps = eps_rel * delta`; returns the outcome, `F(x) - f_ref` and the ledger.
pub fn reduction_run(
    kind: Reduction,
    setup: &ReferenceSetup,
    eps_rel: f64,
    seed: u64,
) -> Result<(ReductionOutcome, f64, QueryLedger)> {
    let eps = eps_rel * setup.instance.delta;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut ledger = QueryLedger::new();
    let out = run_reduction(kind, &setup.instance, eps, &KatyushaHood, &mut rng, &mut ledger)?;
    let err = setup.instance.evaluate(&out.x)? - setup.f_ref;
    Ok((out, err, ledger))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardCheckStats {
    pub k: usize,
    pub dim: usize,
    pub points: usize,
    pub violations: usize,
    /// Smallest `(F(x) - F_lower) / eps` over the points.
    pub min_gap_ratio: f64,
}

/// Draws hypothesis-satisfying points and counts violations of the value-gap bound.
pub fn hard_instance_checks(spec: &HardSpec, points: usize, seed: u64) -> Result<HardCheckStats> {
    let inst = gen_hard_instance(spec)?;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut violations = 0;
    let mut min_gap_ratio = f64::INFINITY;
    for x in hypothesis_points(&inst, points, &mut rng) {
        let r = suboptimality_check(&inst, &x, spec.eps)?;
        if !r.hypothesis {
            return Err(Error::Invariant("generated point does not satisfy the hypothesis".into()));
        }
        if r.verdict == Verdict::Violates {
            violations += 1;
        }
        min_gap_ratio = min_gap_ratio.min(r.gap / spec.eps);
    }
    Ok(HardCheckStats {
        k: inst.params.k,
        dim: inst.dim(),
        points,
        violations,
        min_gap_ratio,
    })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}
