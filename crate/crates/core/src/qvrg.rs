//! Variance-reduced gradient differences.
//!
//! Estimates `g = (1/n) sum_i (grad f_i(x) - grad f_i(x_ref))` from uniformly
//! sampled components. Smoothness bounds each sample by `l ||x - x_ref||`,
//! which is used as the standard deviation bound.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ledger::{phase, quantum_mean_cost, snapped_ceil, QueryLedger};
use crate::mean::{minibatch_size, mlmc_sample, multilevel_n0, BiasedFamily, Sampler};
use crate::problem::{FiniteSumObjective, ProblemInstance, Vector};
use crate::SimRng;

/// How the gradient difference is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorMode {
    /// Average of `ceil(sigma^2/sigma_hat^2)` uniform samples.
    #[default]
    Minibatch,
    /// Unbiased multilevel estimator truncated at `j_clean`.
    Multilevel { j_clean: u32 },
    /// Exact average over all components; the modeled charge is unchanged.
    Exact,
}

/// `grad f_i(x) - grad f_i(x_ref)` for uniform `i`; each draw costs two queries.
pub struct ComponentDifference<'a> {
    objective: &'a dyn FiniteSumObjective,
    x: &'a Vector,
    x_ref: &'a Vector,
    sigma: f64,
}

impl<'a> ComponentDifference<'a> {
    pub fn new(objective: &'a dyn FiniteSumObjective, x: &'a Vector, x_ref: &'a Vector) -> Self {
        let sigma = objective.smoothness() * (x - x_ref).norm();
        Self {
            objective,
            x,
            x_ref,
            sigma,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn component(&self, i: usize) -> Vector {
        self.objective.component_gradient(i, self.x) - self.objective.component_gradient(i, self.x_ref)
    }

    /// Exact mean by enumeration.
    pub fn exact_mean(&self) -> Vector {
        let n = self.objective.num_components();
        let mut acc = Vector::zeros(self.objective.dim());
        for i in 0..n {
            acc += self.component(i);
        }
        acc / n as f64
    }
}

impl Sampler for ComponentDifference<'_> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }
    fn sample(&self, rng: &mut SimRng) -> Vector {
        let i = rng.random_range(0..self.objective.num_components());
        self.component(i)
    }
    fn variance_bound(&self) -> f64 {
        self.sigma * self.sigma
    }
    fn per_sample_cost(&self) -> u64 {
        2
    }
}

fn require_smooth(instance: &ProblemInstance) -> Result<()> {
    if !(instance.objective.smoothness() > 0.0) {
        return Err(Error::Unsupported(
            "gradient-difference estimation needs a smooth objective".into(),
        ));
    }
    Ok(())
}

fn check_dims(instance: &ProblemInstance, x: &Vector, x_ref: &Vector) -> Result<()> {
    for v in [x, x_ref] {
        if v.len() != instance.dim() {
            return Err(Error::DimensionMismatch {
                expected: instance.dim(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// Draws the estimate with the given minibatch size and charges `quantum`.
fn estimate(
    sampler: &ComponentDifference<'_>,
    batch: u64,
    sigma_hat: f64,
    quantum: f64,
    mode: EstimatorMode,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<Vector> {
    let n = sampler.objective.num_components() as u64;
    let (value, samples) = match mode {
        EstimatorMode::Minibatch => {
            let mut acc = Vector::zeros(sampler.dim());
            for _ in 0..batch {
                acc += sampler.sample(rng);
            }
            (acc / batch as f64, batch)
        }
        EstimatorMode::Multilevel { j_clean } => {
            let n0 = multilevel_n0(sampler.variance_bound(), sigma_hat, j_clean);
            let family = BiasedFamily::unbiased(sampler, n0, j_clean);
            mlmc_sample(&family, rng)?
        }
        EstimatorMode::Exact => (sampler.exact_mean(), n),
    };
    ledger.charge_classical(phase::QVRG, samples * sampler.per_sample_cost());
    ledger.charge_quantum(phase::QVRG, quantum)?;
    Ok(value)
}

/// Unbiased estimate of the averaged gradient difference with RMSE at most `sigma_hat`.
///
/// Returns the zero vector without any charge when `x == x_ref`.
pub fn qvrg(
    instance: &ProblemInstance,
    x: &Vector,
    x_ref: &Vector,
    sigma_hat: f64,
    mode: EstimatorMode,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<Vector> {
    require_smooth(instance)?;
    check_dims(instance, x, x_ref)?;
    if !(sigma_hat > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_hat must be positive, got {sigma_hat}"
        )));
    }
    let sampler = ComponentDifference::new(instance.objective.as_ref(), x, x_ref);
    if sampler.sigma() == 0.0 {
        return Ok(Vector::zeros(instance.dim()));
    }
    let quantum = quantum_mean_cost(instance.dim(), sampler.sigma(), sigma_hat)?;
    let batch = minibatch_size(sampler.sigma(), sigma_hat);
    estimate(&sampler, batch, sigma_hat, quantum, mode, rng, ledger)
}

/// Estimate with target `sigma_hat = l ||x - x_ref|| / sqrt(b)`.
///
/// The batch is exactly `b` and the modeled charge exactly `ceil(sqrt(b d))`,
/// including the degenerate call with `x == x_ref`, so that per-step charges
/// do not depend on the trajectory.
pub fn qvrg_relative(
    instance: &ProblemInstance,
    x: &Vector,
    x_ref: &Vector,
    b: u64,
    mode: EstimatorMode,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<Vector> {
    require_smooth(instance)?;
    check_dims(instance, x, x_ref)?;
    if b == 0 {
        return Err(Error::InvalidParameter("batch must be positive".into()));
    }
    let quantum = relative_charge(b, instance.dim());
    let sampler = ComponentDifference::new(instance.objective.as_ref(), x, x_ref);
    if sampler.sigma() == 0.0 {
        ledger.charge_quantum(phase::QVRG, quantum)?;
        return Ok(Vector::zeros(instance.dim()));
    }
    let sigma_hat = sampler.sigma() / (b as f64).sqrt();
    estimate(&sampler, b, sigma_hat, quantum, mode, rng, ledger)
}

/// `ceil(sqrt(b d))`.
pub fn relative_charge(b: u64, d: usize) -> f64 {
    snapped_ceil(((b as f64) * d as f64).sqrt())
}
