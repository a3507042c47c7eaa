//! Finite-sum composite objectives `F(x) = (1/n) sum_i f_i(x) + psi(x)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::ledger::{phase, QueryLedger};

pub type Vector = DVector<f64>;

/// The smooth or Lipschitz part `f = (1/n) sum_i f_i` of a composite objective.
///
/// A smoothness or Lipschitz constant of zero means the property is not claimed.
pub trait FiniteSumObjective: fmt::Debug + Send + Sync {
    fn num_components(&self) -> usize;

    fn dim(&self) -> usize;

    fn component_value(&self, i: usize, x: &Vector) -> f64;

    fn component_gradient(&self, i: usize, x: &Vector) -> Vector;

    /// Per-component smoothness `l`.
    fn smoothness(&self) -> f64 {
        0.0
    }

    /// Per-component Lipschitz constant `L`.
    fn lipschitz(&self) -> f64 {
        0.0
    }

    /// `argmin_z { gamma f_i(z) + ||z - x||^2 / 2 }`, for components that have a cheap prox.
    fn component_prox(&self, _i: usize, _gamma: f64, _x: &Vector) -> Option<Vector> {
        None
    }

    fn value(&self, x: &Vector) -> f64 {
        let n = self.num_components();
        (0..n).map(|i| self.component_value(i, x)).sum::<f64>() / n as f64
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let n = self.num_components();
        let mut g = Vector::zeros(self.dim());
        for i in 0..n {
            g += self.component_gradient(i, x);
        }
        g / n as f64
    }
}

/// Proximal term `psi` with an exact closed-form prox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProximalTerm {
    Zero,
    /// `(mu / 2) ||x||^2`
    L2 { mu: f64 },
    /// `lambda ||x||_1`
    L1 { lambda: f64 },
    /// `lambda ||x||_1 + (mu / 2) ||x||^2`, produced when a ridge term is added to an L1 term.
    ElasticNet { lambda: f64, mu: f64 },
}

impl ProximalTerm {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ProximalTerm::Zero => true,
            ProximalTerm::L2 { mu } => mu > 0.0 && mu.is_finite(),
            ProximalTerm::L1 { lambda } => lambda > 0.0 && lambda.is_finite(),
            ProximalTerm::ElasticNet { lambda, mu } => {
                lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid proximal term {self:?}")))
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        match *self {
            ProximalTerm::L2 { mu } | ProximalTerm::ElasticNet { mu, .. } => mu,
            _ => 0.0,
        }
    }

    fn l1_weight(&self) -> f64 {
        match *self {
            ProximalTerm::L1 { lambda } | ProximalTerm::ElasticNet { lambda, .. } => lambda,
            _ => 0.0,
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.l1_weight() * x.lp_norm(1) + 0.5 * self.strong_convexity() * x.norm_squared()
    }

    /// Returns `psi + (mu/2)||x||^2`.
    pub fn with_added_ridge(&self, extra_mu: f64) -> ProximalTerm {
        if extra_mu == 0.0 {
            return *self;
        }
        match *self {
            ProximalTerm::Zero => ProximalTerm::L2 { mu: extra_mu },
            ProximalTerm::L2 { mu } => ProximalTerm::L2 { mu: mu + extra_mu },
            ProximalTerm::L1 { lambda } => ProximalTerm::ElasticNet { lambda, mu: extra_mu },
            ProximalTerm::ElasticNet { lambda, mu } => ProximalTerm::ElasticNet {
                lambda,
                mu: mu + extra_mu,
            },
        }
    }

    /// Exact minimizer of `(a/2)||z - anchor||^2 + <g, z> + psi(z)`.
    pub fn prox_step(&self, a: f64, anchor: &Vector, g: &Vector) -> Result<Vector> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "prox step weight must be positive, got {a}"
            )));
        }
        if anchor.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: anchor.len(),
                got: g.len(),
            });
        }
        // a(z - anchor) + g + lambda s + mu z = 0, s in d|z|
        let lambda = self.l1_weight();
        let mu = self.strong_convexity();
        let mut z = anchor * a - g;
        if lambda > 0.0 {
            z.apply(|v| *v = soft_threshold(*v, lambda));
        }
        Ok(z / (a + mu))
    }
}

pub fn soft_threshold(v: f64, level: f64) -> f64 {
    if v > level {
        v - level
    } else if v < -level {
        v + level
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    /// smooth components, strongly convex `psi`
    Case1,
    /// smooth components, `psi` not strongly convex
    Case2,
    /// Lipschitz components, strongly convex `psi`
    Case3,
    /// Lipschitz components, `psi` not strongly convex
    Case4,
    Nonconvex,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KnownOptimum {
    Exact { x: Vector, value: f64 },
    Interval { lower: f64, upper: f64 },
}

impl KnownOptimum {
    /// Value used as `F*` when measuring errors. For an interval this is the
    /// lower end, so measured errors are upper bounds.
    pub fn reference_value(&self) -> f64 {
        match self {
            KnownOptimum::Exact { value, .. } => *value,
            KnownOptimum::Interval { lower, .. } => *lower,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub objective: Arc<dyn FiniteSumObjective>,
    pub proximal: ProximalTerm,
    pub case: CaseTag,
    /// Trusted bound on `F(0) - F*`.
    pub delta: f64,
    /// Trusted bound on `||x*||`.
    pub radius: f64,
    pub known_optimum: Option<KnownOptimum>,
}

impl ProblemInstance {
    pub fn new(
        objective: Arc<dyn FiniteSumObjective>,
        proximal: ProximalTerm,
        case: CaseTag,
    ) -> Result<Self> {
        proximal.validate()?;
        if objective.num_components() == 0 || objective.dim() == 0 {
            return Err(Error::InvalidParameter(
                "objective needs at least one component and one dimension".into(),
            ));
        }
        let smooth = objective.smoothness() > 0.0;
        let lipschitz = objective.lipschitz() > 0.0;
        let strongly_convex = proximal.strong_convexity() > 0.0;
        let consistent = match case {
            CaseTag::Case1 => smooth && strongly_convex,
            CaseTag::Case2 => smooth && !strongly_convex,
            CaseTag::Case3 => lipschitz && strongly_convex,
            CaseTag::Case4 => lipschitz && !strongly_convex,
            CaseTag::Nonconvex => smooth,
        };
        if !consistent {
            return Err(Error::InvalidParameter(format!(
                "{case:?} inconsistent with l={}, L={}, mu={}",
                objective.smoothness(),
                objective.lipschitz(),
                proximal.strong_convexity()
            )));
        }
        Ok(Self {
            objective,
            proximal,
            case,
            delta: 0.0,
            radius: 0.0,
            known_optimum: None,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_known_optimum(mut self, optimum: KnownOptimum) -> Self {
        self.known_optimum = Some(optimum);
        self
    }

    pub fn n(&self) -> usize {
        self.objective.num_components()
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `F(x) = (1/n) sum_i f_i(x) + psi(x)`.
    pub fn evaluate(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.objective.value(x) + self.proximal.value(x))
    }

    /// Exact `(1/n) sum_i grad f_i(x)`; charges `n` classical and `n` modeled quantum queries.
    pub fn full_gradient(&self, x: &Vector, ledger: &mut QueryLedger) -> Result<Vector> {
        self.check_dim(x)?;
        let n = self.n();
        ledger.charge_classical(phase::FULL_GRADIENT, n as u64);
        ledger.charge_quantum(phase::FULL_GRADIENT, n as f64)?;
        Ok(self.objective.gradient(x))
    }

    /// `F(x) - F*` against the known optimum, if one was supplied.
    pub fn error(&self, x: &Vector) -> Result<f64> {
        let optimum = self
            .known_optimum
            .as_ref()
            .ok_or_else(|| Error::Precondition("instance has no known optimum".into()))?;
        Ok(self.evaluate(x)? - optimum.reference_value())
    }
}
