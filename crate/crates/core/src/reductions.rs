//! Reductions from the non-strongly-convex and non-smooth cases to the smooth,
//! strongly convex case, driven by any solver that quarters the optimality gap.
//!
//! Stage `s` of `S = max(1, ceil(log2(delta/eps)))` uses regularization
//! `mu0 / 2^s` with `mu0 = delta / R^2` and/or Moreau smoothing parameter
//! `lambda0 / 2^s` with `lambda0 = delta / L^2`. Stages are warm-started from
//! the previous stage's output, the first from the origin.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::katyusha::quarter_decrease;
use crate::ledger::QueryLedger;
use crate::problem::{CaseTag, FiniteSumObjective, ProblemInstance, Vector};
use crate::SimRng;

/// A solver that, from `x0`, returns a point whose expected gap is at most `gap / 4`
/// whenever `F(x0) - F* <= gap`.
pub trait HoodSolver {
    fn quarter(
        &self,
        instance: &ProblemInstance,
        x0: &Vector,
        gap: f64,
        rng: &mut SimRng,
        ledger: &mut QueryLedger,
    ) -> Result<Vector>;
}

/// [`quarter_decrease`] as a stage solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct KatyushaHood;

impl HoodSolver for KatyushaHood {
    fn quarter(
        &self,
        instance: &ProblemInstance,
        x0: &Vector,
        gap: f64,
        rng: &mut SimRng,
        ledger: &mut QueryLedger,
    ) -> Result<Vector> {
        quarter_decrease(instance, x0, gap, rng, ledger)
    }
}

/// `(x - prox_{lambda f_i}(x)) / lambda`.
pub fn moreau_gradient(objective: &dyn FiniteSumObjective, i: usize, lambda: f64, x: &Vector) -> Result<Vector> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let p = objective
        .component_prox(i, lambda, x)
        .ok_or_else(|| Error::Unsupported(format!("component {i} has no proximal operator")))?;
    Ok((x - p) / lambda)
}

/// `f_i(p) + ||x - p||^2 / (2 lambda)` with `p = prox_{lambda f_i}(x)`.
pub fn moreau_value(objective: &dyn FiniteSumObjective, i: usize, lambda: f64, x: &Vector) -> Result<f64> {
    let p = objective
        .component_prox(i, lambda, x)
        .ok_or_else(|| Error::Unsupported(format!("component {i} has no proximal operator")))?;
    Ok(objective.component_value(i, &p) + (x - &p).norm_squared() / (2.0 * lambda))
}

/// Componentwise Moreau envelopes; `1/lambda`-smooth.
#[derive(Debug, Clone)]
pub struct MoreauSmoothed {
    inner: Arc<dyn FiniteSumObjective>,
    lambda: f64,
}

impl MoreauSmoothed {
    /// Fails unless every component exposes a proximal operator.
    pub fn new(inner: Arc<dyn FiniteSumObjective>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        let probe = Vector::zeros(inner.dim());
        for i in 0..inner.num_components() {
            if inner.component_prox(i, lambda, &probe).is_none() {
                return Err(Error::Unsupported(format!("component {i} has no proximal operator")));
            }
        }
        Ok(Self { inner, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl FiniteSumObjective for MoreauSmoothed {
    fn num_components(&self) -> usize {
        self.inner.num_components()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        moreau_value(self.inner.as_ref(), i, self.lambda, x).expect("prox checked at construction")
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        moreau_gradient(self.inner.as_ref(), i, self.lambda, x).expect("prox checked at construction")
    }
    fn smoothness(&self) -> f64 {
        1.0 / self.lambda
    }
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Regularize,
    Smooth,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionSchedule {
    pub stages: u32,
    /// `delta / R^2` for the regularizing reductions.
    pub mu0: Option<f64>,
    /// `delta / L^2` for the smoothing reductions.
    pub lambda0: Option<f64>,
}

impl ReductionSchedule {
    pub fn mu(&self, s: u32) -> Option<f64> {
        self.mu0.map(|m| m / 2f64.powi(s as i32))
    }

    pub fn lambda(&self, s: u32) -> Option<f64> {
        self.lambda0.map(|l| l / 2f64.powi(s as i32))
    }
}

/// `max(1, ceil(log2(delta / eps)))`.
pub fn stage_count(delta: f64, eps: f64) -> u32 {
    let raw = (delta / eps).log2();
    if raw.is_finite() && raw > 0.0 {
        (crate::ledger::snapped_ceil(raw) as u32).max(1)
    } else {
        1
    }
}

pub fn reduction_schedule(kind: Reduction, instance: &ProblemInstance, eps: f64) -> Result<ReductionSchedule> {
    let expected = match kind {
        Reduction::Regularize => CaseTag::Case2,
        Reduction::Smooth => CaseTag::Case3,
        Reduction::Both => CaseTag::Case4,
    };
    if instance.case != expected {
        return Err(Error::Precondition(format!(
            "{kind:?} reduction expects a {expected:?} instance, got {:?}",
            instance.case
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if !(instance.delta > 0.0) {
        return Err(Error::Precondition("reduction needs a positive delta".into()));
    }
    let mu0 = match kind {
        Reduction::Regularize | Reduction::Both => {
            if !(instance.radius > 0.0) {
                return Err(Error::Precondition("reduction needs a positive radius".into()));
            }
            Some(instance.delta / instance.radius.powi(2))
        }
        Reduction::Smooth => None,
    };
    let lambda0 = match kind {
        Reduction::Smooth | Reduction::Both => {
            let l = instance.objective.lipschitz();
            if !(l > 0.0) {
                return Err(Error::Precondition("smoothing needs a Lipschitz objective".into()));
            }
            Some(instance.delta / (l * l))
        }
        Reduction::Regularize => None,
    };
    Ok(ReductionSchedule {
        stages: stage_count(instance.delta, eps),
        mu0,
        lambda0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: u32,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub gap_bound: f64,
    pub classical: u64,
    pub quantum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionOutcome {
    pub x: Vector,
    pub schedule: ReductionSchedule,
    pub stages: Vec<StageRecord>,
}

/// Runs the staged reduction of the given kind.
pub fn run_reduction(
    kind: Reduction,
    instance: &ProblemInstance,
    eps: f64,
    solver: &dyn HoodSolver,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<ReductionOutcome> {
    let schedule = reduction_schedule(kind, instance, eps)?;
    // stage-s gap bound is c delta / 2^s, where c absorbs the smoothing bias of stage 0
    let c = match kind {
        Reduction::Regularize => 1.0,
        Reduction::Smooth => 1.5,
        Reduction::Both => 2.0,
    };
    let mut x = Vector::zeros(instance.dim());
    let mut stages = Vec::with_capacity(schedule.stages as usize);
    for s in 0..schedule.stages {
        let mu = schedule.mu(s);
        let lambda = schedule.lambda(s);
        let objective: Arc<dyn FiniteSumObjective> = match lambda {
            Some(l) => Arc::new(MoreauSmoothed::new(instance.objective.clone(), l)?),
            None => instance.objective.clone(),
        };
        let proximal = match mu {
            Some(m) => instance.proximal.with_added_ridge(m),
            None => instance.proximal,
        };
        let stage_instance = ProblemInstance::new(objective, proximal, CaseTag::Case1)?;
        let gap_bound = c * instance.delta / 2f64.powi(s as i32);
        let before = ledger.snapshot();
        x = solver.quarter(&stage_instance, &x, gap_bound, rng, ledger)?;
        let after = ledger.snapshot();
        log::debug!("{kind:?} stage {s}: mu={mu:?} lambda={lambda:?}");
        stages.push(StageRecord {
            stage: s,
            mu,
            lambda,
            gap_bound,
            classical: after.0 - before.0,
            quantum: after.1 - before.1,
        });
    }
    Ok(ReductionOutcome { x, schedule, stages })
}

pub fn adapt_reg(
    instance: &ProblemInstance,
    eps: f64,
    solver: &dyn HoodSolver,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<ReductionOutcome> {
    run_reduction(Reduction::Regularize, instance, eps, solver, rng, ledger)
}

pub fn adapt_smooth(
    instance: &ProblemInstance,
    eps: f64,
    solver: &dyn HoodSolver,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<ReductionOutcome> {
    run_reduction(Reduction::Smooth, instance, eps, solver, rng, ledger)
}

pub fn adapt_both(
    instance: &ProblemInstance,
    eps: f64,
    solver: &dyn HoodSolver,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<ReductionOutcome> {
    run_reduction(Reduction::Both, instance, eps, solver, rng, ledger)
}
