use std::sync::Arc;

use finsum_core::hard::{gen_hard_instance, hypothesis_points, suboptimality_check, HardCase, HardInstance, HardSpec, Verdict};
use finsum_core::{FiniteSumObjective, KnownOptimum, SimRng, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

fn desk_specs() -> Vec<HardSpec> {
    vec![
        HardSpec::new(HardCase::Case1, 4, 1e-4).with_strong_convexity(1.0 / 400.0, 1.0),
        HardSpec::new(HardCase::Case2, 4, 6e-5),
        HardSpec::new(HardCase::Case4, 4, 0.05),
        HardSpec::new(HardCase::Case4, 4, 0.01),
        HardSpec::new(HardCase::Case3, 4, 0.005),
    ]
}

fn scaled(spec: HardSpec) -> HardSpec {
    HardSpec {
        smoothness: 3.0,
        lipschitz: 2.5,
        radius: 4.0,
        eps: spec.eps * if spec.case == HardCase::Case1 { 3.0 } else if spec.case == HardCase::Case2 { 48.0 } else { 10.0 },
        mu: spec.mu.map(|m| 3.0 * m),
        delta: spec.delta.map(|v| 3.0 * v),
        ..spec
    }
}

fn instances(seed: u64) -> Vec<HardInstance> {
    desk_specs()
        .into_iter()
        .flat_map(|s| [s.clone(), scaled(s)])
        .map(|s| gen_hard_instance(&s.with_seed(seed)).unwrap())
        .collect()
}

fn gaussian(d: usize, scale: f64, rng: &mut SimRng) -> Vector {
    Vector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn scaling_preserves_chain_constants() {
    for s in desk_specs() {
        let a = gen_hard_instance(&s).unwrap();
        let b = gen_hard_instance(&scaled(s)).unwrap();
        assert_eq!(a.params.k, b.params.k);
        assert!((a.params.c - b.params.c).abs() <= 1e-12 * a.params.c);
    }
}

#[test]
fn component_gradients_match_finite_differences() {
    let mut rng = SimRng::seed_from_u64(1);
    for inst in instances(2) {
        let (xr, _, _) = inst.closed_form_minimizer();
        for _ in 0..5 {
            let x = &xr + gaussian(inst.dim(), 0.3 * inst.spec.radius, &mut rng);
            for i in 0..inst.num_components() {
                let g = inst.component_gradient(i, &x);
                let h = 1e-6 * inst.spec.radius;
                for t in 0..inst.dim() {
                    let mut e = Vector::zeros(inst.dim());
                    e[t] = h;
                    let fd = (inst.component_value(i, &(&x + &e)) - inst.component_value(i, &(&x - &e))) / (2.0 * h);
                    assert!((fd - g[t]).abs() < 1e-5 * (1.0 + g[t].abs()), "{:?} i={i} t={t}: {fd} vs {}", inst.spec.case, g[t]);
                }
            }
        }
    }
}

#[test]
fn declared_constants_are_certified() {
    let mut rng = SimRng::seed_from_u64(3);
    for inst in instances(4) {
        let r = inst.spec.radius;
        for _ in 0..200 {
            let x = gaussian(inst.dim(), r * rng.random_range(0.01..1.0), &mut rng);
            let y = &x + gaussian(inst.dim(), r * rng.random_range(1e-4..0.5), &mut rng);
            for i in 0..inst.num_components() {
                let gx = inst.component_gradient(i, &x);
                if inst.smoothness() > 0.0 {
                    let gy = inst.component_gradient(i, &y);
                    assert!((gx - gy).norm() <= inst.smoothness() * (&x - &y).norm() * (1.0 + 1e-9));
                } else {
                    assert!(gx.norm() <= inst.lipschitz() * (1.0 + 1e-12));
                }
            }
        }
    }
}

#[test]
fn reference_point_minimizes_surrogate() {
    let mut rng = SimRng::seed_from_u64(5);
    for inst in instances(6).into_iter().filter(|i| matches!(i.spec.case, HardCase::Case1 | HardCase::Case2)) {
        let (xr, _, _) = inst.closed_form_minimizer();
        let s0 = inst.surrogate_value(&xr).unwrap();
        let h = 1e-5 * inst.spec.radius;
        for t in 0..inst.dim() {
            let mut e = Vector::zeros(inst.dim());
            e[t] = h;
            let fd = (inst.surrogate_value(&(&xr + &e)).unwrap() - inst.surrogate_value(&(&xr - &e)).unwrap()) / (2.0 * h);
            assert!(fd.abs() < 1e-6 * inst.smoothness() * inst.spec.radius, "{fd}");
        }
        for _ in 0..100 {
            let x = &xr + gaussian(inst.dim(), 0.1 * inst.spec.radius, &mut rng);
            assert!(inst.surrogate_value(&x).unwrap() >= s0);
            // the surrogate majorizes F
            assert!(inst.surrogate_value(&x).unwrap() >= inst.objective_value(&x) - 1e-12);
        }
    }
}

#[test]
fn problem_instance_carries_interval() {
    for inst in instances(7) {
        let (_, upper, lower) = inst.closed_form_minimizer();
        let p = Arc::new(inst).problem_instance().unwrap();
        assert_eq!(p.known_optimum, Some(KnownOptimum::Interval { lower, upper }));
        assert!(lower <= upper);
    }
}

#[test]
fn generation_is_seed_deterministic() {
    for s in desk_specs() {
        let a = gen_hard_instance(&s.clone().with_seed(9)).unwrap();
        let b = gen_hard_instance(&s.clone().with_seed(9)).unwrap();
        let c = gen_hard_instance(&s.with_seed(10)).unwrap();
        assert_eq!(a.vectors(), b.vectors());
        assert_ne!(a.vectors(), c.vectors());
        assert!(a.header().starts_with("# hard_instance"));
    }
}

#[test]
fn no_adversarial_point_violates_the_bound() {
    for inst in instances(12) {
        let mut rng = SimRng::seed_from_u64(13);
        let mut worst = f64::INFINITY;
        for x in hypothesis_points(&inst, 1000, &mut rng) {
            let r = suboptimality_check(&inst, &x, inst.spec.eps).unwrap();
            assert!(r.hypothesis);
            assert_eq!(r.verdict, Verdict::Consistent, "{:?} gap {}", inst.spec.case, r.gap);
            worst = worst.min(r.gap / inst.spec.eps);
        }
        assert!(worst >= 1.0);
    }
}

#[test]
fn reference_point_escapes_hypothesis() {
    for inst in instances(14) {
        let (xr, _, _) = inst.closed_form_minimizer();
        let r = suboptimality_check(&inst, &xr, inst.spec.eps).unwrap();
        assert!(!r.hypothesis, "{:?} {:?}", inst.spec.case, inst.params);
        assert!(r.gap <= inst.spec.eps * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn values_stay_above_lower_bound(which in 0usize..10, seed in 0u64..1000, scale in 0.001f64..3.0) {
        let inst = &instances(seed)[which];
        let mut rng = SimRng::seed_from_u64(seed);
        let (xr, upper, lower) = inst.closed_form_minimizer();
        prop_assert!(lower <= upper);
        let x = &xr + gaussian(inst.dim(), scale * inst.spec.radius, &mut rng);
        prop_assert!(inst.objective_value(&x) >= lower - 1e-12 * lower.abs().max(1.0));
        let y = gaussian(inst.dim(), scale * inst.spec.radius, &mut rng);
        prop_assert!(inst.objective_value(&y) >= lower - 1e-12 * lower.abs().max(1.0));
    }
}
