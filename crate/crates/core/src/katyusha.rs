//! Accelerated proximal variance-reduced solver for smooth, strongly convex
//! finite sums with an exact proximal term.

use std::fmt::Write as _;

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::ledger::{snapped_ceil, QueryLedger};
use crate::problem::{ProblemInstance, Vector};
use crate::qvrg::{qvrg_relative, EstimatorMode};
use crate::SimRng;

/// Epoch counts above this are treated as a degenerate (near zero curvature) input.
pub const MAX_EPOCHS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatyushaParams {
    pub epochs: u64,
    pub batch: u64,
    pub inner: u64,
    pub tau1: f64,
    pub tau2: f64,
    /// Set when the target accuracy is not below `delta` and `epochs` was clamped to one.
    pub clamped: bool,
}

/// `ceil(n^{2/3} d^{-1/3})`.
pub fn batch_size(n: usize, d: usize) -> u64 {
    let v = (n as f64).powf(2.0 / 3.0) * (d as f64).powf(-1.0 / 3.0);
    (snapped_ceil(v) as u64).max(1)
}

pub fn katyusha_params(n: usize, d: usize, l: f64, mu: f64, delta: f64, eps: f64) -> Result<KatyushaParams> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be positive".into()));
    }
    for (name, v) in [("l", l), ("mu", mu), ("delta", delta), ("eps", eps)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let b = batch_size(n, d);
    let m = b;
    let bm = (b * m) as f64;
    let tau2 = 1.0 / (2.0 * b as f64);
    let tau1 = tau2 * (8.0 * bm * mu / (3.0 * l)).sqrt().min(1.0);
    let log_ratio = (delta / eps).log2();
    let raw = 5.0 * (1.0 + (l / (bm * mu)).sqrt()) * log_ratio;
    if !raw.is_finite() || raw > MAX_EPOCHS as f64 {
        return Err(Error::InvalidParameter(format!(
            "epoch count {raw:e} exceeds {MAX_EPOCHS}; curvature too small for this solver"
        )));
    }
    let clamped = log_ratio <= 0.0;
    let epochs = (snapped_ceil(raw) as u64).max(1);
    let params = KatyushaParams {
        epochs,
        batch: b,
        inner: m,
        tau1,
        tau2,
        clamped,
    };
    params.validate()?;
    Ok(params)
}

impl KatyushaParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs >= 1
            && self.batch >= 1
            && self.inner >= 1
            && self.tau1 > 0.0
            && self.tau2 > 0.0
            && self.tau1 + self.tau2 <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid solver parameters {self:?}")))
        }
    }

    /// Closed-form modeled cost: `S n + S m ceil(sqrt(b d))`.
    pub fn modeled_cost(&self, n: usize, d: usize) -> f64 {
        let per_step = crate::qvrg::relative_charge(self.batch, d);
        (self.epochs * n as u64) as f64 + (self.epochs * self.inner) as f64 * per_step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub value: f64,
    /// `F - F*` when the instance carries a known optimum.
    pub error: Option<f64>,
    pub classical: u64,
    pub quantum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub epochs: Vec<EpochRecord>,
    pub x_out: Vector,
}

impl Trajectory {
    /// `epoch,F_err,classical,quantum_modeled`; the value column holds `F` when no optimum is known.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,F_err,classical,quantum_modeled\n");
        for r in &self.epochs {
            let v = r.error.unwrap_or(r.value);
            let _ = writeln!(out, "{},{:e},{},{}", r.epoch, v, r.classical, r.quantum);
        }
        out
    }
}

fn record(instance: &ProblemInstance, epoch: u64, x: &Vector, ledger: &QueryLedger) -> Result<EpochRecord> {
    let value = instance.evaluate(x)?;
    let error = instance
        .known_optimum
        .as_ref()
        .map(|o| value - o.reference_value());
    Ok(EpochRecord {
        epoch,
        value,
        error,
        classical: ledger.classical(),
        quantum: ledger.quantum(),
    })
}

/// Runs the solver from `x0` (the origin when `None`).
pub fn run_q_katyusha(
    instance: &ProblemInstance,
    params: &KatyushaParams,
    x0: Option<&Vector>,
    mode: EstimatorMode,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<Trajectory> {
    params.validate()?;
    let l = instance.objective.smoothness();
    if !(l > 0.0) || !(instance.proximal.strong_convexity() > 0.0) {
        return Err(Error::Unsupported(
            "solver needs a smooth objective and a strongly convex proximal term".into(),
        ));
    }
    let d = instance.dim();
    let start = match x0 {
        Some(x) if x.len() != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            })
        }
        Some(x) => x.clone(),
        None => Vector::zeros(d),
    };
    let (tau1, tau2) = (params.tau1, params.tau2);
    let rest = 1.0 - tau1 - tau2;
    let psi = &instance.proximal;

    let mut y = start.clone();
    let mut z = start.clone();
    let mut snapshot = start;
    let mut records = vec![record(instance, 0, &snapshot, ledger)?];
    for s in 0..params.epochs {
        let full = instance.full_gradient(&snapshot, ledger)?;
        let mut y_sum = Vector::zeros(d);
        for _ in 0..params.inner {
            let x = &z * tau1 + &snapshot * tau2 + &y * rest;
            let diff = qvrg_relative(instance, &x, &snapshot, params.batch, mode, rng, ledger)?;
            let grad = &full + diff;
            z = psi.prox_step(3.0 * tau1 * l, &z, &grad)?;
            y = psi.prox_step(3.0 * l, &x, &grad)?;
            y_sum += &y;
        }
        snapshot = y_sum / params.inner as f64;
        records.push(record(instance, s + 1, &snapshot, ledger)?);
    }
    let w = tau2 * params.inner as f64;
    let x_out = (&snapshot * w + &y * rest) / (w + rest);
    Ok(Trajectory {
        epochs: records,
        x_out,
    })
}

/// Solver run that targets a quarter of `gap`, an upper bound on `F(x0) - F*`.
pub fn quarter_decrease(
    instance: &ProblemInstance,
    x0: &Vector,
    gap: f64,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<Vector> {
    if gap <= 0.0 {
        return Ok(x0.clone());
    }
    let params = katyusha_params(
        instance.n(),
        instance.dim(),
        instance.objective.smoothness(),
        instance.proximal.strong_convexity(),
        gap,
        gap / 4.0,
    )?;
    Ok(run_q_katyusha(instance, &params, Some(x0), EstimatorMode::Minibatch, rng, ledger)?.x_out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoodReport {
    pub initial_gap: f64,
    pub mean_final_gap: f64,
    pub threshold: f64,
    pub holds: bool,
}

/// Checks that the mean over `seeds` runs of the final gap is at most a quarter
/// of the initial gap, within factor `tolerance`.
pub fn check_hood(
    instance: &ProblemInstance,
    x0: &Vector,
    seeds: u64,
    base_seed: u64,
    tolerance: f64,
    ledger: &mut QueryLedger,
) -> Result<HoodReport> {
    let optimum = instance
        .known_optimum
        .as_ref()
        .ok_or_else(|| Error::Precondition("quarter-decrease check needs a known optimum".into()))?
        .reference_value();
    if seeds == 0 {
        return Err(Error::InvalidParameter("at least one seed required".into()));
    }
    let initial_gap = instance.evaluate(x0)? - optimum;
    let threshold = initial_gap / 4.0 * tolerance;
    if initial_gap <= 0.0 {
        return Ok(HoodReport {
            initial_gap,
            mean_final_gap: initial_gap,
            threshold,
            holds: true,
        });
    }
    let mut total = 0.0;
    for k in 0..seeds {
        let mut rng = SimRng::seed_from_u64(base_seed ^ k);
        let x = quarter_decrease(instance, x0, initial_gap, &mut rng, ledger)?;
        total += instance.evaluate(&x)? - optimum;
    }
    let mean_final_gap = total / seeds as f64;
    Ok(HoodReport {
        initial_gap,
        mean_final_gap,
        threshold,
        holds: mean_final_gap <= threshold,
    })
}
