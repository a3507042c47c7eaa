//! Chain-structured hard instances with certified optimum bounds.
//!
//! Each instance has `n/2` blocks of `k+1` orthonormal directions
//! `v_{i,0..=k}`. Component `2i` and `2i+1` act only on the inner products
//! `y_{i,j} = <x, v_{i,j}>`, coupling consecutive entries through helper
//! functions that are flat on `[-c, c]`. Instances are built in normalized
//! units (smoothness, Lipschitz constant and radius one) and rescaled as
//! `F(x) = s_v F_base(x / s_x)`.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::objectives::random_orthonormal;
use crate::problem::{CaseTag, FiniteSumObjective, KnownOptimum, ProblemInstance, ProximalTerm, Vector};
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelperKind {
    /// Quadratic outside a flat zone, 4-smooth.
    Phi,
    /// `max(0, |z| - c)`.
    Chi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Helper {
    pub kind: HelperKind,
    pub c: f64,
}

impl Helper {
    pub fn phi(c: f64) -> Self {
        Self { kind: HelperKind::Phi, c }
    }

    pub fn chi(c: f64) -> Self {
        Self { kind: HelperKind::Chi, c }
    }

    /// Value and derivative (the zero subgradient at the kinks of `Chi`).
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let a = z.abs();
        let c = self.c;
        match self.kind {
            HelperKind::Phi => {
                if a <= c {
                    (0.0, 0.0)
                } else if a <= 2.0 * c {
                    (2.0 * (a - c).powi(2), 4.0 * (a - c) * z.signum())
                } else {
                    (z * z - 2.0 * c * c, 2.0 * z)
                }
            }
            HelperKind::Chi => {
                if a <= c {
                    (0.0, 0.0)
                } else {
                    (a - c, z.signum())
                }
            }
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        self.eval(z).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HardCase {
    Case1,
    Case2,
    Case3,
    Case4,
}

impl HardCase {
    pub fn tag(self) -> CaseTag {
        match self {
            HardCase::Case1 => CaseTag::Case1,
            HardCase::Case2 => CaseTag::Case2,
            HardCase::Case3 => CaseTag::Case3,
            HardCase::Case4 => CaseTag::Case4,
        }
    }

    fn smooth(self) -> bool {
        matches!(self, HardCase::Case1 | HardCase::Case2)
    }
}

/// Generation request. `mu` and `delta` are needed for case 1 only.
#[derive(Debug, Clone, PartialEq)]
pub struct HardSpec {
    pub case: HardCase,
    pub n: usize,
    pub eps: f64,
    pub mu: Option<f64>,
    pub delta: Option<f64>,
    pub smoothness: f64,
    pub lipschitz: f64,
    pub radius: f64,
    /// Query budget `N`, entering `c <= 1/sqrt(N)`.
    pub budget: f64,
    /// Dimension; the minimum `(n/2)(k+1)` when `None`.
    pub dim: Option<usize>,
    pub seed: u64,
}

impl HardSpec {
    pub fn new(case: HardCase, n: usize, eps: f64) -> Self {
        Self {
            case,
            n,
            eps,
            mu: None,
            delta: None,
            smoothness: 1.0,
            lipschitz: 1.0,
            radius: 1.0,
            budget: 1e6,
            dim: None,
            seed: 0,
        }
    }

    pub fn with_strong_convexity(mut self, mu: f64, delta: f64) -> Self {
        self.mu = Some(mu);
        self.delta = Some(delta);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }
}

/// Derived constants in normalized units; entries a case does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HardParams {
    pub k: usize,
    /// Chain amplitude `C`.
    pub amplitude: f64,
    /// Flat-zone half width `c`.
    pub c: f64,
    pub zeta: f64,
    pub mu_tilde: f64,
    pub cond: f64,
    pub q_ratio: f64,
    pub b_offset: f64,
    /// Strong convexity of the proximal term in normalized units.
    pub mu: f64,
    /// Target accuracy in normalized units.
    pub eps: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn chain_case4(n: usize, eps: f64, budget: f64) -> Result<HardParams> {
    let nf = n as f64;
    if !(eps < 3.0 / (10.0 * nf.sqrt())) {
        return Err(Error::Precondition(format!(
            "Lipschitz instance needs eps < 3/(10 sqrt(n)) = {}, got {eps}",
            3.0 / (10.0 * nf.sqrt())
        )));
    }
    let k = (1.0 / (10.0 * eps * nf.sqrt())).floor() as usize;
    if k < 1 {
        return Err(Error::Precondition(format!(
            "chain length floor(1/(10 eps sqrt(n))) = {k} must be at least 1"
        )));
    }
    let kf = k as f64;
    Ok(HardParams {
        k,
        c: (1.0 / budget.sqrt()).min(eps / kf.sqrt()),
        b_offset: (2.0 / (nf * (kf + 1.0))).sqrt(),
        eps,
        ..Default::default()
    })
}

/// Computes the normalized constants and the scaling `(s_v, s_x)`.
pub fn hard_params(spec: &HardSpec) -> Result<(HardParams, f64, f64)> {
    if spec.n < 2 || !spec.n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("n must be even and at least 2, got {}", spec.n)));
    }
    check_positive("eps", spec.eps)?;
    check_positive("budget", spec.budget)?;
    let n = spec.n as f64;
    match spec.case {
        HardCase::Case1 => {
            check_positive("smoothness", spec.smoothness)?;
            let mu = spec
                .mu
                .ok_or_else(|| Error::InvalidParameter("strongly convex instance needs mu".into()))?;
            let delta = spec
                .delta
                .ok_or_else(|| Error::InvalidParameter("strongly convex instance needs delta".into()))?;
            check_positive("mu", mu)?;
            check_positive("delta", delta)?;
            let l = spec.smoothness;
            let (mu, delta, eps) = (mu / l, delta / l, spec.eps / l);
            if eps > 4.0 / 3.0 * mu * delta {
                return Err(Error::Precondition(format!(
                    "strongly convex instance needs eps <= (4/3) mu delta / l, got eps/l = {eps} > {}",
                    4.0 / 3.0 * mu * delta
                )));
            }
            let mu_tilde = n * mu;
            if mu_tilde >= 1.0 {
                return Err(Error::Precondition(format!("n mu / l must be below 1, got {mu_tilde}")));
            }
            let cond = 0.5 * (1.0 / mu_tilde - 1.0) + 1.0;
            let s = cond.sqrt();
            let q = (s - 1.0) / (s + 1.0);
            let kf = ((s - 1.0) / 4.0 * (delta / (n * eps * (s - 1.0).powi(2))).log2()).floor() - 1.0;
            if !(kf >= 1.0) {
                return Err(Error::Precondition(format!("chain length {kf} must be at least 1")));
            }
            let k = kf as usize;
            let amplitude = (delta / mu).sqrt() * 4.0 / (s - 1.0);
            let c = (1.0 / spec.budget.sqrt())
                .min((8.0 * n * eps / ((1.0 - mu_tilde) * (kf + 1.0))).sqrt())
                .min(amplitude * q.powi(k as i32 + 1));
            Ok((
                HardParams {
                    k,
                    amplitude,
                    c,
                    zeta: 1.0 - q,
                    mu_tilde,
                    cond,
                    q_ratio: q,
                    mu,
                    eps,
                    ..Default::default()
                },
                l,
                1.0,
            ))
        }
        HardCase::Case2 => {
            check_positive("smoothness", spec.smoothness)?;
            check_positive("radius", spec.radius)?;
            let sv = spec.smoothness * spec.radius.powi(2);
            let eps = spec.eps / sv;
            if !(eps < 1.0 / (4096.0 * n)) {
                return Err(Error::Precondition(format!(
                    "smooth instance needs eps < l R^2/(4096 n), got normalized eps {eps} >= {}",
                    1.0 / (4096.0 * n)
                )));
            }
            let k = ((1.0 / (16.0 * (eps * n).sqrt())).floor() - 1.0) as i64;
            if k < 3 {
                return Err(Error::Precondition(format!("chain length {k} must be at least 3")));
            }
            let k = k as usize;
            let kf = k as f64;
            let amplitude = (6.0 / (n * kf)).sqrt();
            let c = (1.0 / spec.budget.sqrt())
                .min((2.0 - 3f64.sqrt()) * amplitude)
                .min(8.0 * (eps / kf).sqrt());
            Ok((
                HardParams {
                    k,
                    amplitude,
                    c,
                    zeta: 1.0,
                    eps,
                    ..Default::default()
                },
                sv,
                spec.radius,
            ))
        }
        HardCase::Case4 | HardCase::Case3 => {
            check_positive("lipschitz", spec.lipschitz)?;
            check_positive("radius", spec.radius)?;
            let sv = spec.lipschitz * spec.radius;
            let eps = spec.eps / sv;
            if spec.case == HardCase::Case4 {
                Ok((chain_case4(spec.n, eps, spec.budget)?, sv, spec.radius))
            } else {
                // regularized instance at twice the accuracy, mu = 2 eps / R^2
                let mut p = chain_case4(spec.n, 2.0 * eps, spec.budget)?;
                p.mu = 2.0 * eps;
                p.eps = eps;
                Ok((p, sv, spec.radius))
            }
        }
    }
}

/// A generated instance: orthonormal directions, constants and scaling.
#[derive(Debug, Clone)]
pub struct HardInstance {
    pub spec: HardSpec,
    pub params: HardParams,
    dim: usize,
    /// `d x (n/2)(k+1)`; block `i` occupies columns `i(k+1)..(i+1)(k+1)`.
    vectors: DMatrix<f64>,
    scale_value: f64,
    scale_arg: f64,
}

/// Minimal dimension `(n/2)(k+1)`.
pub fn required_dim(n: usize, k: usize) -> usize {
    n / 2 * (k + 1)
}

pub fn gen_hard_instance(spec: &HardSpec) -> Result<HardInstance> {
    let (params, scale_value, scale_arg) = hard_params(spec)?;
    let required = required_dim(spec.n, params.k);
    let dim = spec.dim.unwrap_or(required);
    if dim < required {
        return Err(Error::DimensionTooSmall { required, got: dim });
    }
    let mut rng = SimRng::seed_from_u64(spec.seed);
    let vectors = random_orthonormal(dim, required, &mut rng);
    Ok(HardInstance {
        spec: spec.clone(),
        params,
        dim,
        vectors,
        scale_value,
        scale_arg,
    })
}

impl HardInstance {
    pub fn blocks(&self) -> usize {
        self.spec.n / 2
    }

    pub fn chain_len(&self) -> usize {
        self.params.k + 1
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// `v_{i,j}`.
    pub fn direction(&self, i: usize, j: usize) -> Vector {
        self.vectors.column(i * self.chain_len() + j).into_owned()
    }

    /// Normalized chain coordinates `<x / s_x, v_{i,j}>`, indexed `[i][j]`.
    pub fn chain_coords(&self, x: &Vector) -> Vec<Vec<f64>> {
        let y = self.vectors.tr_mul(x) / self.scale_arg;
        let m = self.chain_len();
        (0..self.blocks()).map(|i| y.rows(i * m, m).iter().copied().collect()).collect()
    }

    /// Point with the given normalized chain coordinates and no orthogonal part.
    pub fn from_chain_coords(&self, coords: &[Vec<f64>]) -> Vector {
        let y = Vector::from_iterator(self.vectors.ncols(), coords.iter().flatten().copied());
        &self.vectors * y * self.scale_arg
    }

    fn chain_weight(&self) -> f64 {
        match self.spec.case {
            HardCase::Case1 => (1.0 - self.params.mu_tilde) / 16.0,
            HardCase::Case2 => 1.0 / 16.0,
            HardCase::Case3 | HardCase::Case4 => 1.0 / (2.0 * (self.params.k as f64).sqrt()),
        }
    }

    fn helper(&self) -> Helper {
        if self.spec.case.smooth() {
            Helper::phi(self.params.c)
        } else {
            Helper::chi(self.params.c)
        }
    }

    /// Normalized value of part `part` of block chain `y` and its chain gradient.
    fn part_eval(&self, part: usize, y: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let k = self.params.k;
        let w = self.chain_weight();
        let h = self.helper();
        let mut local = vec![0.0; k + 1];
        let mut value = 0.0;
        let first = if part == 0 { 2 } else { 1 };
        for r in (first..=k).step_by(2) {
            let (v, d) = h.eval(y[r - 1] - y[r]);
            value += w * v;
            local[r - 1] += w * d;
            local[r] -= w * d;
        }
        match (self.spec.case.smooth(), part) {
            (true, 0) => {
                let a = self.params.amplitude;
                value += w * (y[0] * y[0] - 2.0 * a * y[0]);
                local[0] += w * (2.0 * y[0] - 2.0 * a);
            }
            (true, _) => {
                let (v, d) = h.eval(y[k]);
                value += w * self.params.zeta * v;
                local[k] += w * self.params.zeta * d;
            }
            (false, 0) => {
                let r = self.params.b_offset - y[0];
                value += r.abs() / 2f64.sqrt();
                local[0] -= sign(r) / 2f64.sqrt();
            }
            (false, _) => {}
        }
        if let Some(g) = grad {
            for (gi, li) in g.iter_mut().zip(local) {
                *gi += li;
            }
        }
        value
    }

    fn block_slice<'a>(&self, y: &'a Vector, i: usize) -> &'a [f64] {
        let m = self.chain_len();
        &y.as_slice()[i * m..(i + 1) * m]
    }

    /// Normalized `F_base` restricted to block `i` from chain coordinates,
    /// including the block's share `(mu/2)||y_i||^2` of the proximal term:
    /// `F_base = sum_i block_value(i) + (mu/2)||P_perp u||^2`.
    pub fn block_value(&self, y: &[f64]) -> f64 {
        let n = self.spec.n as f64;
        let f = (self.part_eval(0, y, None) + self.part_eval(1, y, None)) / n;
        f + 0.5 * self.params.mu * y.iter().map(|v| v * v).sum::<f64>()
    }

    /// Gradient of [`Self::block_value`] in chain coordinates.
    pub fn block_gradient(&self, y: &[f64]) -> Vec<f64> {
        let n = self.spec.n as f64;
        let mut g = vec![0.0; y.len()];
        self.part_eval(0, y, Some(&mut g));
        self.part_eval(1, y, Some(&mut g));
        g.iter().zip(y).map(|(gi, yi)| gi / n + self.params.mu * yi).collect()
    }

    /// Chain coordinates of the reference point of one block.
    pub fn reference_chain(&self) -> Vec<f64> {
        let p = &self.params;
        let k = p.k;
        (0..=k)
            .map(|j| match self.spec.case {
                HardCase::Case1 => p.amplitude * p.q_ratio.powi(j as i32 + 1),
                HardCase::Case2 => p.amplitude * (1.0 - (j as f64 + 1.0) / (k as f64 + 2.0)),
                HardCase::Case3 | HardCase::Case4 => p.b_offset,
            })
            .collect()
    }

    /// Reference point: the quadratic-surrogate minimizer (cases 1, 2) or the
    /// exact minimizer of the unregularized chain (cases 3, 4).
    pub fn reference_point(&self) -> Vector {
        let chain = self.reference_chain();
        self.from_chain_coords(&vec![chain; self.blocks()])
    }

    /// Value with every helper replaced by its quadratic majorant `z^2`
    /// (cases 1 and 2 only).
    pub fn surrogate_value(&self, x: &Vector) -> Result<f64> {
        if !self.spec.case.smooth() {
            return Err(Error::Unsupported("surrogate defined for smooth instances only".into()));
        }
        let p = &self.params;
        let k = p.k;
        let w = self.chain_weight();
        let n = self.spec.n as f64;
        let u = x / self.scale_arg;
        let mut total = 0.0;
        for y in self.chain_coords(x) {
            let mut v = y[0] * y[0] - 2.0 * p.amplitude * y[0] + p.zeta * y[k] * y[k];
            for r in 1..=k {
                v += (y[r - 1] - y[r]).powi(2);
            }
            total += w * v / n;
        }
        Ok(self.scale_value * (total + 0.5 * p.mu * u.norm_squared()))
    }

    /// Normalized surrogate minimum and helper slack.
    fn surrogate_bounds(&self) -> (f64, f64) {
        let p = &self.params;
        let k = p.k as f64;
        match self.spec.case {
            HardCase::Case1 => (
                -p.mu_tilde * p.amplitude.powi(2) * (p.cond.sqrt() - 1.0).powi(2) / 16.0,
                (1.0 - p.mu_tilde) * (k + p.zeta) * p.c * p.c / 16.0,
            ),
            HardCase::Case2 => (
                -p.amplitude.powi(2) / 32.0 * (k + 1.0) / (k + 2.0),
                (k + 1.0) * p.c * p.c / 16.0,
            ),
            HardCase::Case3 | HardCase::Case4 => (0.0, 0.0),
        }
    }

    pub fn proximal(&self) -> ProximalTerm {
        if self.params.mu > 0.0 {
            // normalized mu scales by s_v / s_x^2
            ProximalTerm::L2 {
                mu: self.params.mu * self.scale_value / self.scale_arg.powi(2),
            }
        } else {
            ProximalTerm::Zero
        }
    }

    /// `(x_ref, F_upper, F_lower)` with `F_lower <= F* <= F_upper`.
    pub fn closed_form_minimizer(&self) -> (Vector, f64, f64) {
        let x = self.reference_point();
        let upper = self.objective_value(&x);
        let lower = match self.spec.case {
            HardCase::Case1 | HardCase::Case2 => {
                let (min, slack) = self.surrogate_bounds();
                self.scale_value * (min - slack)
            }
            // the unregularized chain is non-negative
            HardCase::Case3 | HardCase::Case4 => 0.0,
        };
        // the two bounds coincide in exact arithmetic when every helper at x_ref is saturated
        (x, upper, lower.min(upper))
    }

    /// `F(x) = f(x) + psi(x)`.
    pub fn objective_value(&self, x: &Vector) -> f64 {
        self.value(x) + self.proximal().value(x)
    }

    /// Wraps the instance with its proximal term and certified optimum interval.
    pub fn problem_instance(self: &Arc<Self>) -> Result<ProblemInstance> {
        let (_, upper, lower) = self.closed_form_minimizer();
        let objective: Arc<dyn FiniteSumObjective> = self.clone();
        let mut inst = ProblemInstance::new(objective, self.proximal(), self.spec.case.tag())?
            .with_known_optimum(KnownOptimum::Interval { lower, upper })
            .with_radius(self.spec.radius);
        if let Some(delta) = self.spec.delta {
            inst = inst.with_delta(delta);
        }
        Ok(inst)
    }

    /// Whether `x` satisfies the small-inner-product hypothesis of the value-gap bound.
    pub fn hypothesis_holds(&self, x: &Vector) -> bool {
        let coords = self.chain_coords(x);
        let half = self.params.c / 2.0;
        let k = self.params.k;
        let small = |y: &Vec<f64>, range: std::ops::RangeInclusive<usize>| range.into_iter().any(|j| y[j].abs() < half);
        match self.spec.case {
            HardCase::Case1 => coords.iter().any(|y| small(y, 1..=k)),
            HardCase::Case2 => coords.iter().filter(|y| small(y, 1..=k / 2)).count() * 4 >= self.spec.n,
            HardCase::Case3 | HardCase::Case4 => coords.iter().filter(|y| small(y, 0..=k)).count() * 4 >= self.spec.n,
        }
    }

    /// Metadata line for result files.
    pub fn header(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = write!(
            s,
            "# hard_instance case={:?} n={} k={} d={} C={:e} c={:e} zeta={:e} mu_tilde={:e} Q={:e} q_ratio={:e} b_offset={:e} N={:e} seed={}",
            self.spec.case, self.spec.n, p.k, self.dim, p.amplitude, p.c, p.zeta, p.mu_tilde, p.cond, p.q_ratio, p.b_offset, self.spec.budget, self.spec.seed
        );
        s
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl FiniteSumObjective for HardInstance {
    fn num_components(&self) -> usize {
        self.spec.n
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        let y = self.vectors.tr_mul(x) / self.scale_arg;
        self.scale_value * self.part_eval(i % 2, self.block_slice(&y, i / 2), None)
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        let y = self.vectors.tr_mul(x) / self.scale_arg;
        let m = self.chain_len();
        let block = i / 2;
        let mut g = vec![0.0; m];
        self.part_eval(i % 2, self.block_slice(&y, block), Some(&mut g));
        let cols = self.vectors.columns(block * m, m);
        cols * Vector::from_vec(g) * (self.scale_value / self.scale_arg)
    }
    fn smoothness(&self) -> f64 {
        if self.spec.case.smooth() {
            self.scale_value / self.scale_arg.powi(2)
        } else {
            0.0
        }
    }
    fn lipschitz(&self) -> f64 {
        if self.spec.case.smooth() {
            0.0
        } else {
            self.scale_value / self.scale_arg
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The hypothesis holds yet `F(x) - F_lower < eps`.
    Violates,
    Consistent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub hypothesis: bool,
    /// `F(x) - F_lower`.
    pub gap: f64,
    pub verdict: Verdict,
}

/// Tests `x` against the value-gap bound the instance was generated for.
pub fn suboptimality_check(inst: &HardInstance, x: &Vector, eps: f64) -> Result<CheckReport> {
    if (eps - inst.spec.eps).abs() > 1e-12 * inst.spec.eps.abs() {
        return Err(Error::InvalidParameter(format!(
            "instance was generated for eps = {}, checked with {eps}",
            inst.spec.eps
        )));
    }
    if x.len() != inst.dim {
        return Err(Error::DimensionMismatch {
            expected: inst.dim,
            got: x.len(),
        });
    }
    let (_, _, lower) = inst.closed_form_minimizer();
    let gap = inst.objective_value(x) - lower;
    let hypothesis = inst.hypothesis_holds(x);
    let verdict = if hypothesis && gap < eps {
        Verdict::Violates
    } else {
        Verdict::Consistent
    };
    Ok(CheckReport {
        hypothesis,
        gap,
        verdict,
    })
}

/// Minimizes [`HardInstance::block_value`] over one block chain with entry `fixed`
/// held at `value`, by accelerated gradient descent from `start`.
fn constrained_block_min(inst: &HardInstance, start: &[f64], fixed: usize, value: f64, iterations: usize) -> Vec<f64> {
    let n = inst.spec.n as f64;
    let step = 1.0 / (2.0 / n + inst.params.mu);
    let mut y = start.to_vec();
    y[fixed] = value;
    let mut prev = y.clone();
    for t in 0..iterations {
        let beta = t as f64 / (t as f64 + 3.0);
        let look: Vec<f64> = y.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
        let g = inst.block_gradient(&look);
        let mut next: Vec<f64> = look.iter().zip(&g).map(|(a, gi)| a - step * gi).collect();
        next[fixed] = value;
        prev = std::mem::replace(&mut y, next);
    }
    y
}

/// Chain of one block with entry `fixed` pinned at `value`, descending from the
/// offset as slowly as the flat zones allow (Lipschitz instances).
fn lipschitz_block_repair(inst: &HardInstance, fixed: usize, value: f64, slack: f64) -> Vec<f64> {
    let b = inst.params.b_offset;
    let c = inst.params.c * slack;
    (0..inst.chain_len())
        .map(|r| {
            if r < fixed {
                let steps = (fixed - r) as f64;
                if b >= value {
                    (value + steps * c).min(b)
                } else {
                    (value - steps * c).max(b)
                }
            } else {
                value
            }
        })
        .collect()
}

/// Draws points that satisfy the hypothesis of the value-gap bound while staying
/// as close to optimal as the constraint allows.
///
/// Mixes (a) near-minimizers of `F` subject to a pinned small inner product,
/// (b) the same with random perturbations off the pinned entries, and
/// (c) random points with the pinned entries projected into the flat zone.
pub fn hypothesis_points(inst: &HardInstance, count: usize, rng: &mut SimRng) -> Vec<Vector> {
    let k = inst.params.k;
    let blocks = inst.blocks();
    let c = inst.params.c;
    let reference = inst.reference_chain();
    let candidates: Vec<usize> = match inst.spec.case {
        HardCase::Case1 => (1..=k).collect(),
        HardCase::Case2 => (1..=k / 2).collect(),
        HardCase::Case3 | HardCase::Case4 => (0..=k).collect(),
    };
    let needed = match inst.spec.case {
        HardCase::Case1 => 1,
        _ => inst.spec.n.div_ceil(4),
    };
    // constrained minima per pinned entry, shared by all blocks (blocks are identical in chain coordinates)
    let pinned: Vec<Vec<f64>> = candidates
        .iter()
        .map(|&j| {
            if inst.spec.case.smooth() {
                constrained_block_min(inst, &reference, j, 0.0, 20_000)
            } else {
                lipschitz_block_repair(inst, j, 0.0, 1.0)
            }
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut coords = vec![reference.clone(); blocks];
        let mut chosen: Vec<usize> = (0..blocks).collect();
        // partial Fisher-Yates for the pinned blocks
        for a in 0..needed {
            let b = rng.random_range(a..blocks);
            chosen.swap(a, b);
        }
        let style = rng.random_range(0..3u8);
        let noise = [0.0, 1e-6, 1e-4, 1e-2][rng.random_range(0..4)];
        let mut pins = Vec::with_capacity(needed);
        for &blk in &chosen[..needed] {
            let which = rng.random_range(0..candidates.len());
            let j = candidates[which];
            let t = (rng.random::<f64>() - 0.5) * c * 0.999;
            let mut chain = match style {
                2 => (0..=k).map(|_| rng.sample::<f64, _>(StandardNormal) * reference[0].abs().max(c)).collect(),
                _ if inst.spec.case.smooth() => pinned[which].clone(),
                _ => lipschitz_block_repair(inst, j, t, rng.random_range(0.9..1.0)),
            };
            if style == 1 {
                for v in chain.iter_mut() {
                    *v += noise * rng.sample::<f64, _>(StandardNormal);
                }
            }
            chain[j] = t;
            coords[blk] = chain;
            pins.push((blk, j));
        }
        if style == 1 {
            for (blk, chain) in coords.iter_mut().enumerate() {
                if pins.iter().any(|&(b, _)| b == blk) {
                    continue;
                }
                for v in chain.iter_mut() {
                    *v += noise * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let x = inst.from_chain_coords(&coords);
        debug_assert!(inst.hypothesis_holds(&x));
        out.push(x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helper_examples() {
        assert_eq!(Helper::phi(1.0).eval(0.5), (0.0, 0.0));
        assert_eq!(Helper::phi(1.0).eval(1.5), (0.5, 2.0));
        assert_eq!(Helper::phi(1.0).eval(3.0), (7.0, 6.0));
        let (v, d) = Helper::chi(0.1).eval(0.3);
        assert!((v - 0.2).abs() < 1e-15);
        assert_eq!(d, 1.0);
        assert_eq!(Helper::chi(0.1).eval(0.1), (0.0, 0.0));
        assert_eq!(Helper::chi(0.1).eval(-0.5).1, -1.0);
    }

    #[test]
    fn phi_is_continuously_differentiable_at_breakpoints() {
        let h = Helper::phi(0.7);
        for z in [0.7, 1.4, -0.7, -1.4] {
            let (a, da) = h.eval(z - 1e-12);
            let (b, db) = h.eval(z + 1e-12);
            assert!((a - b).abs() < 1e-10);
            assert!((da - db).abs() < 1e-10);
        }
    }

    #[test]
    fn case1_ratio_example() {
        // Q = 4 when n mu = 1/7
        let spec = HardSpec::new(HardCase::Case1, 2, 1e-6).with_strong_convexity(1.0 / 14.0, 1.0);
        let (p, _, _) = hard_params(&spec).unwrap();
        assert!((p.cond - 4.0).abs() < 1e-12);
        assert!((p.q_ratio - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.zeta - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn case4_example() {
        let (p, _, _) = hard_params(&HardSpec::new(HardCase::Case4, 4, 0.01)).unwrap();
        assert_eq!(p.k, 5);
        assert!((p.b_offset - (1.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn case2_chain_guard() {
        assert_eq!(hard_params(&HardSpec::new(HardCase::Case2, 4, 6e-5)).unwrap().0.k, 3);
        assert!(hard_params(&HardSpec::new(HardCase::Case2, 4, 6.2e-5)).is_err());
        assert!(hard_params(&HardSpec::new(HardCase::Case2, 4, 1.0 / 8192.0)).is_err());
    }

    #[test]
    fn preconditions_named() {
        let odd = HardSpec::new(HardCase::Case4, 3, 0.01);
        assert!(matches!(hard_params(&odd), Err(Error::InvalidParameter(_))));
        let coarse = HardSpec::new(HardCase::Case1, 4, 1.0).with_strong_convexity(1.0 / 400.0, 1.0);
        assert!(matches!(hard_params(&coarse), Err(Error::Precondition(_))));
        let small = HardSpec::new(HardCase::Case4, 4, 0.01).with_dim(5);
        assert!(matches!(gen_hard_instance(&small), Err(Error::DimensionTooSmall { required: 12, got: 5 })));
    }

    #[test]
    fn case4_reference_is_exact_minimum() {
        let inst = gen_hard_instance(&HardSpec::new(HardCase::Case4, 4, 0.01).with_seed(3)).unwrap();
        let (x, upper, lower) = inst.closed_form_minimizer();
        assert!(upper.abs() < 1e-12);
        assert_eq!(lower, 0.0);
        assert!(!inst.hypothesis_holds(&x));
    }

    #[test]
    fn origin_satisfies_hypothesis_and_bound() {
        let spec = HardSpec::new(HardCase::Case1, 4, 1e-4).with_strong_convexity(1.0 / 400.0, 1.0);
        let inst = gen_hard_instance(&spec).unwrap();
        let r = suboptimality_check(&inst, &Vector::zeros(inst.dim), 1e-4).unwrap();
        assert!(r.hypothesis);
        assert_eq!(r.verdict, Verdict::Consistent);
        assert!(suboptimality_check(&inst, &Vector::zeros(inst.dim), 2e-4).is_err());
    }
}
