//! Path-integrated gradient tracking for smooth nonconvex finite sums.
//!
//! The estimate `v_t` is refreshed with a full gradient every `q` steps and
//! otherwise updated with a variance-reduced gradient difference. Steps have
//! fixed length, so every difference call has the same modeled cost.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::katyusha::batch_size;
use crate::ledger::{snapped_ceil, QueryLedger};
use crate::problem::{ProblemInstance, ProximalTerm, Vector};
use crate::qvrg::{qvrg, EstimatorMode};
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiderParams {
    pub period: u64,
    pub eps_hat: f64,
    pub iterations: u64,
    pub step: f64,
}

impl SpiderParams {
    /// RMSE target of each difference call, `eps_hat / sqrt(2 q)`.
    pub fn sigma_hat(&self) -> f64 {
        self.eps_hat / (2.0 * self.period as f64).sqrt()
    }

    /// Modeled cost of one difference call, `ceil(sqrt(d q / 2))`.
    pub fn difference_charge(&self, d: usize) -> f64 {
        snapped_ceil((d as f64 * self.period as f64 / 2.0).sqrt())
    }
}

pub fn spider_params(n: usize, d: usize, l: f64, delta: f64, eps: f64) -> Result<SpiderParams> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be positive".into()));
    }
    for (name, v) in [("l", l), ("delta", delta), ("eps", eps)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let eps_hat = eps / 5.0;
    Ok(SpiderParams {
        period: batch_size(n, d),
        eps_hat,
        iterations: (snapped_ceil(4.0 * l * delta / (eps * eps)) as u64).max(1),
        step: eps_hat / (2.0 * l),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpiderStep {
    pub t: u64,
    pub v_norm: f64,
    pub reset: bool,
    /// `||x_{t+1} - x_t||`, zero on the exit step.
    pub displacement: f64,
    pub classical: u64,
    pub quantum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpiderOutcome {
    pub x: Vector,
    /// Iteration at which the small-estimate exit fired, if it did.
    pub stopped_at: Option<u64>,
    pub steps: Vec<SpiderStep>,
}

impl SpiderOutcome {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v_norm,reset,classical,quantum_modeled\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{:e},{},{},{}",
                s.t, s.v_norm, s.reset as u8, s.classical, s.quantum
            );
        }
        out
    }
}

/// Runs from the origin; returns early once `||v_t|| <= eps_hat`, otherwise a
/// uniformly drawn iterate among `x_0..x_{T-1}`.
pub fn run_fs_q_spider(
    instance: &ProblemInstance,
    params: &SpiderParams,
    mode: EstimatorMode,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<SpiderOutcome> {
    if instance.proximal != ProximalTerm::Zero {
        return Err(Error::Unsupported("nonconvex solver requires a zero proximal term".into()));
    }
    let l = instance.objective.smoothness();
    if !(l > 0.0) {
        return Err(Error::Unsupported("nonconvex solver requires a smooth objective".into()));
    }
    if params.period == 0 || params.iterations == 0 || !(params.eps_hat > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid parameters {params:?}")));
    }
    let fallback = rng.random_range(0..params.iterations);
    let mut x = Vector::zeros(instance.dim());
    let mut prev = x.clone();
    let mut v = Vector::zeros(instance.dim());
    let mut chosen = None;
    let mut steps = Vec::new();
    for t in 0..params.iterations {
        let reset = t % params.period == 0;
        if reset {
            v = instance.full_gradient(&x, ledger)?;
        } else {
            v += qvrg(instance, &x, &prev, params.sigma_hat(), mode, rng, ledger)?;
        }
        let v_norm = v.norm();
        let mut step = SpiderStep {
            t,
            v_norm,
            reset,
            displacement: 0.0,
            classical: ledger.classical(),
            quantum: ledger.quantum(),
        };
        if v_norm <= params.eps_hat {
            steps.push(step);
            return Ok(SpiderOutcome {
                x,
                stopped_at: Some(t),
                steps,
            });
        }
        if t == fallback {
            chosen = Some(x.clone());
        }
        let next = &x - &v * (params.step / v_norm);
        step.displacement = (&next - &x).norm();
        steps.push(step);
        prev = std::mem::replace(&mut x, next);
    }
    Ok(SpiderOutcome {
        x: chosen.expect("fallback index lies within the iteration range"),
        stopped_at: None,
        steps,
    })
}
