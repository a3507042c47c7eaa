//! Concrete finite-sum objectives used by the experiments and tests.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problem::{FiniteSumObjective, ProximalTerm, Vector};

fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `f_i(x) = 0` with declared (trivially valid) constants `l = L = 1`.
#[derive(Debug, Clone)]
pub struct ZeroObjective {
    n: usize,
    d: usize,
}

impl ZeroObjective {
    pub fn new(n: usize, d: usize) -> Self {
        Self { n, d }
    }
}

impl FiniteSumObjective for ZeroObjective {
    fn num_components(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn component_value(&self, _i: usize, _x: &Vector) -> f64 {
        0.0
    }
    fn component_gradient(&self, _i: usize, _x: &Vector) -> Vector {
        Vector::zeros(self.d)
    }
    fn smoothness(&self) -> f64 {
        1.0
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn component_prox(&self, _i: usize, _gamma: f64, x: &Vector) -> Option<Vector> {
        Some(x.clone())
    }
}

/// `f_i(x) = <a_i, x>`; any `l >= 0` is a valid smoothness bound, `1` is declared.
#[derive(Debug, Clone)]
pub struct LinearSum {
    coefficients: Vec<Vector>,
}

impl LinearSum {
    pub fn new(coefficients: Vec<Vector>) -> Self {
        assert!(!coefficients.is_empty());
        Self { coefficients }
    }
}

impl FiniteSumObjective for LinearSum {
    fn num_components(&self) -> usize {
        self.coefficients.len()
    }
    fn dim(&self) -> usize {
        self.coefficients[0].len()
    }
    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        self.coefficients[i].dot(x)
    }
    fn component_gradient(&self, i: usize, _x: &Vector) -> Vector {
        self.coefficients[i].clone()
    }
    fn smoothness(&self) -> f64 {
        1.0
    }
}

/// Least squares components `f_i(x) = (1/2)(<a_i, x> - y_i)^2`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    rows: Vec<Vector>,
    targets: Vec<f64>,
    smoothness: f64,
}

impl LeastSquares {
    pub fn new(rows: Vec<Vector>, targets: Vec<f64>) -> Result<Self> {
        if rows.is_empty() || rows.len() != targets.len() {
            return Err(Error::InvalidParameter(
                "least squares needs one target per non-empty row set".into(),
            ));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter("rows have differing lengths".into()));
        }
        let smoothness = rows.iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
        Ok(Self {
            rows,
            targets,
            smoothness,
        })
    }

    /// Gaussian rows scaled by `1/sqrt(d)` and Gaussian targets.
    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (d as f64).sqrt();
        let rows: Vec<Vector> = (0..n).map(|_| gaussian_vector(d, rng) * scale).collect();
        let targets = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self::new(rows, targets).expect("well-formed random rows")
    }

    pub fn rows(&self) -> &[Vector] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `(1/n) A^T A` and `(1/n) A^T y`.
    pub fn normal_equations(&self) -> (DMatrix<f64>, Vector) {
        let d = self.rows[0].len();
        let n = self.rows.len() as f64;
        let mut gram = DMatrix::zeros(d, d);
        let mut rhs = Vector::zeros(d);
        for (a, &y) in self.rows.iter().zip(&self.targets) {
            gram.ger(1.0 / n, a, a, 1.0);
            rhs.axpy(y / n, a, 1.0);
        }
        (gram, rhs)
    }

    /// Exact minimizer of `f + (mu/2)||x||^2` from the normal equations.
    pub fn ridge_solution(&self, mu: f64) -> Result<Vector> {
        let (mut gram, rhs) = self.normal_equations();
        for k in 0..gram.nrows() {
            gram[(k, k)] += mu;
        }
        let chol = gram.cholesky().ok_or_else(|| {
            Error::InvalidParameter("normal equations are not positive definite".into())
        })?;
        Ok(chol.solve(&rhs))
    }
}

impl FiniteSumObjective for LeastSquares {
    fn num_components(&self) -> usize {
        self.rows.len()
    }
    fn dim(&self) -> usize {
        self.rows[0].len()
    }
    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        let r = self.rows[i].dot(x) - self.targets[i];
        0.5 * r * r
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        let r = self.rows[i].dot(x) - self.targets[i];
        &self.rows[i] * r
    }
    fn smoothness(&self) -> f64 {
        self.smoothness
    }
    fn component_prox(&self, i: usize, gamma: f64, x: &Vector) -> Option<Vector> {
        // z = x - gamma a (a^T z - y)  =>  a^T z = (a^T x + gamma |a|^2 y) / (1 + gamma |a|^2)
        let a = &self.rows[i];
        let aa = a.norm_squared();
        let u = (a.dot(x) + gamma * aa * self.targets[i]) / (1.0 + gamma * aa);
        Some(x - a * (gamma * (u - self.targets[i])))
    }
}

/// Dense quadratic components `f_i(x) = (1/2) x^T A_i x + <b_i, x> + c_i`.
#[derive(Debug, Clone)]
pub struct QuadraticSum {
    hessians: Vec<DMatrix<f64>>,
    linear: Vec<Vector>,
    constants: Vec<f64>,
    smoothness: f64,
}

impl QuadraticSum {
    pub fn new(hessians: Vec<DMatrix<f64>>, linear: Vec<Vector>, constants: Vec<f64>) -> Result<Self> {
        let n = hessians.len();
        if n == 0 || linear.len() != n || constants.len() != n {
            return Err(Error::InvalidParameter(
                "quadratic components need matching hessians, linear terms and constants".into(),
            ));
        }
        let d = hessians[0].nrows();
        for (h, b) in hessians.iter().zip(&linear) {
            if h.nrows() != d || h.ncols() != d || b.len() != d {
                return Err(Error::InvalidParameter("component shapes differ".into()));
            }
            if (h - h.transpose()).amax() > 1e-12 {
                return Err(Error::InvalidParameter("hessian is not symmetric".into()));
            }
        }
        let smoothness = hessians
            .iter()
            .map(|h| {
                SymmetricEigen::new(h.clone())
                    .eigenvalues
                    .iter()
                    .fold(0.0f64, |m, e| m.max(e.abs()))
            })
            .fold(0.0, f64::max);
        Ok(Self {
            hessians,
            linear,
            constants,
            smoothness,
        })
    }

    /// `f_i(x) = (scale/2) ||x - c_i||^2`, one component per center.
    pub fn isotropic(n: usize, d: usize, scale: f64, centers: &[Vector]) -> Self {
        assert_eq!(n, centers.len());
        let hessians = vec![DMatrix::identity(d, d) * scale; n];
        let linear = centers.iter().map(|c| c * -scale).collect();
        let constants = centers.iter().map(|c| 0.5 * scale * c.norm_squared()).collect();
        Self::new(hessians, linear, constants).expect("isotropic components are well-formed")
    }

    /// Components with indefinite hessians whose average is positive definite.
    ///
    /// Each `A_i = M + S_i` with `M` a fixed positive definite matrix (eigenvalues in
    /// `[0.5, 1.5]`) and `S_i` zero-mean symmetric perturbations with spectral norm
    /// `spread`; for `spread > 1.5` every component has a negative eigenvalue while
    /// `f` itself stays bounded below.
    pub fn random_indefinite<R: Rng + ?Sized>(n: usize, d: usize, spread: f64, rng: &mut R) -> Self {
        assert!(n >= 2 && n.is_multiple_of(2), "perturbations are paired, n must be even");
        let basis = random_orthonormal(d, d, rng);
        let eig = Vector::from_fn(d, |k, _| 0.5 + k as f64 / (d.max(2) - 1) as f64);
        let mean = &basis * DMatrix::from_diagonal(&eig) * basis.transpose();
        let mut hessians = Vec::with_capacity(n);
        let mut linear = Vec::with_capacity(n);
        for _ in 0..n / 2 {
            let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut s = (&g + g.transpose()) * 0.5;
            let norm = SymmetricEigen::new(s.clone())
                .eigenvalues
                .iter()
                .fold(0.0f64, |m, e| m.max(e.abs()));
            s *= spread / norm;
            hessians.push(&mean + &s);
            hessians.push(&mean - &s);
            let b = gaussian_vector(d, rng);
            linear.push(b.clone() * 0.5);
            linear.push(b * 0.5);
        }
        for h in hessians.iter_mut() {
            let sym = (h.clone() + h.transpose()) * 0.5;
            *h = sym;
        }
        Self::new(hessians, linear, vec![0.0; n]).expect("random components are well-formed")
    }

    pub fn mean_hessian(&self) -> DMatrix<f64> {
        let n = self.hessians.len() as f64;
        self.hessians.iter().fold(DMatrix::zeros(self.dim(), self.dim()), |acc, h| acc + h) / n
    }

    pub fn mean_linear(&self) -> Vector {
        let n = self.linear.len() as f64;
        self.linear.iter().fold(Vector::zeros(self.dim()), |acc, b| acc + b) / n
    }

    /// Minimizer of `f` when the average hessian is positive definite.
    pub fn stationary_point(&self) -> Result<Vector> {
        let chol = self.mean_hessian().cholesky().ok_or_else(|| {
            Error::InvalidParameter("average hessian is not positive definite".into())
        })?;
        Ok(chol.solve(&-self.mean_linear()))
    }

    pub fn hessian(&self, i: usize) -> &DMatrix<f64> {
        &self.hessians[i]
    }
}

impl FiniteSumObjective for QuadraticSum {
    fn num_components(&self) -> usize {
        self.hessians.len()
    }
    fn dim(&self) -> usize {
        self.hessians[0].nrows()
    }
    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hessians[i] * x)) + self.linear[i].dot(x) + self.constants[i]
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        &self.hessians[i] * x + &self.linear[i]
    }
    fn smoothness(&self) -> f64 {
        self.smoothness
    }
}

/// `f_i(x) = |<a_i, x> - y_i|`.
#[derive(Debug, Clone)]
pub struct AbsoluteLoss {
    rows: Vec<Vector>,
    targets: Vec<f64>,
    lipschitz: f64,
}

impl AbsoluteLoss {
    pub fn new(rows: Vec<Vector>, targets: Vec<f64>) -> Result<Self> {
        if rows.is_empty() || rows.len() != targets.len() {
            return Err(Error::InvalidParameter("one target per row required".into()));
        }
        let lipschitz = rows.iter().map(|r| r.norm()).fold(0.0, f64::max);
        Ok(Self {
            rows,
            targets,
            lipschitz,
        })
    }
}

impl FiniteSumObjective for AbsoluteLoss {
    fn num_components(&self) -> usize {
        self.rows.len()
    }
    fn dim(&self) -> usize {
        self.rows[0].len()
    }
    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        (self.rows[i].dot(x) - self.targets[i]).abs()
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        let r = self.rows[i].dot(x) - self.targets[i];
        &self.rows[i] * sign(r)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn component_prox(&self, i: usize, gamma: f64, x: &Vector) -> Option<Vector> {
        let a = &self.rows[i];
        let kappa = gamma * a.norm_squared();
        let r = a.dot(x) - self.targets[i];
        let s = if r.abs() <= kappa { r / kappa } else { sign(r) };
        Some(x - a * (gamma * s))
    }
}

/// `f_i(x) = max(0, 1 - y_i <a_i, x>)` with labels `y_i` in `{-1, +1}`.
#[derive(Debug, Clone)]
pub struct HingeLoss {
    rows: Vec<Vector>,
    labels: Vec<f64>,
    lipschitz: f64,
}

impl HingeLoss {
    pub fn new(rows: Vec<Vector>, labels: Vec<f64>) -> Result<Self> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::InvalidParameter("one label per row required".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
        }
        let lipschitz = rows.iter().map(|r| r.norm()).fold(0.0, f64::max);
        Ok(Self {
            rows,
            labels,
            lipschitz,
        })
    }

    /// Linearly separable-ish data with label noise.
    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Self {
        let truth = gaussian_vector(d, rng);
        let scale = 1.0 / (d as f64).sqrt();
        let rows: Vec<Vector> = (0..n).map(|_| gaussian_vector(d, rng) * scale).collect();
        let labels = rows
            .iter()
            .map(|a| {
                let y = if a.dot(&truth) >= 0.0 { 1.0 } else { -1.0 };
                if rng.random::<f64>() < 0.2 {
                    -y
                } else {
                    y
                }
            })
            .collect();
        Self::new(rows, labels).expect("well-formed random rows")
    }

    pub fn rows(&self) -> &[Vector] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

impl FiniteSumObjective for HingeLoss {
    fn num_components(&self) -> usize {
        self.rows.len()
    }
    fn dim(&self) -> usize {
        self.rows[0].len()
    }
    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        (1.0 - self.labels[i] * self.rows[i].dot(x)).max(0.0)
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        let margin = self.labels[i] * self.rows[i].dot(x);
        if margin < 1.0 {
            &self.rows[i] * -self.labels[i]
        } else {
            Vector::zeros(self.dim())
        }
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn component_prox(&self, i: usize, gamma: f64, x: &Vector) -> Option<Vector> {
        let a = &self.rows[i];
        let y = self.labels[i];
        let kappa = gamma * a.norm_squared();
        let margin = y * a.dot(x);
        // z = x + gamma t y a with t in [0, 1] the subgradient multiplier
        let t = if margin >= 1.0 {
            0.0
        } else if margin <= 1.0 - kappa {
            1.0
        } else {
            (1.0 - margin) / kappa
        };
        Some(x + a * (gamma * t * y))
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

/// `d x m` matrix with orthonormal columns from seeded Gaussian draws.
pub fn random_orthonormal<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(m <= d);
    let g = DMatrix::from_fn(d, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Reference minimizer of `(1/n) sum_i f_i + psi` by proximal gradient descent with step `1/l`.
///
/// Used as a high-accuracy oracle for smooth objectives.
pub fn proximal_gradient_reference(
    objective: &dyn FiniteSumObjective,
    psi: ProximalTerm,
    iterations: usize,
) -> Vector {
    let l = objective.smoothness();
    assert!(l > 0.0);
    let mut x = Vector::zeros(objective.dim());
    for _ in 0..iterations {
        let g = objective.gradient(&x);
        let next = psi.prox_step(l, &x, &g).expect("positive step");
        let moved = (&next - &x).norm();
        x = next;
        if moved == 0.0 {
            break;
        }
    }
    x
}

/// Reference minimizer of `(1/n) sum_i f_i + (mu/2)||x||^2` for Lipschitz `f_i`
/// by the subgradient method with steps `1/(mu (t+1))`.
///
/// Returns whichever of the best iterate and the `t`-weighted average has the
/// smaller objective.
pub fn subgradient_reference(objective: &dyn FiniteSumObjective, mu: f64, iterations: usize) -> Vector {
    assert!(mu > 0.0);
    let value = |x: &Vector| objective.value(x) + 0.5 * mu * x.norm_squared();
    let mut x = Vector::zeros(objective.dim());
    let mut best = x.clone();
    let mut best_value = value(&x);
    let mut avg = Vector::zeros(objective.dim());
    let mut weight = 0.0;
    for t in 0..iterations {
        let g = objective.gradient(&x) + &x * mu;
        x -= g / (mu * (t + 1) as f64);
        let w = (t + 1) as f64;
        weight += w;
        avg += (&x - &avg) * (w / weight);
        let v = value(&x);
        if v < best_value {
            best_value = v;
            best = x.clone();
        }
    }
    if value(&avg) < best_value {
        avg
    } else {
        best
    }
}
