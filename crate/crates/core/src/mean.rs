//! Unbiased mean estimation: a minibatch estimator with a fixed RMSE target and
//! a multilevel Monte Carlo estimator that removes a vanishing bias.

use crate::error::{Error, Result};
use crate::ledger::{phase, quantum_mean_cost, snapped_ceil, QueryLedger};
use crate::problem::Vector;
use crate::SimRng;

/// A `d`-dimensional random variable with a known variance bound.
pub trait Sampler {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut SimRng) -> Vector;
    /// Upper bound `sigma^2` on `E||X - E X||^2`.
    fn variance_bound(&self) -> f64;
    fn per_sample_cost(&self) -> u64 {
        1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub estimate: Vector,
    pub sigma_hat: f64,
    pub classical_cost: u64,
    pub quantum_cost: f64,
}

/// `max(1, ceil(sigma^2 / sigma_hat^2))`.
pub fn minibatch_size(sigma: f64, sigma_hat: f64) -> u64 {
    let ratio = (sigma / sigma_hat).powi(2);
    (snapped_ceil(ratio) as u64).max(1)
}

/// Averages `max(1, ceil(sigma^2/sigma_hat^2))` draws.
///
/// Charges the true sample count classically and `ceil(sqrt(d) sigma / sigma_hat)`
/// as the modeled quantum cost.
pub fn minibatch_mean(
    sampler: &dyn Sampler,
    sigma_hat: f64,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
    phase_label: &str,
) -> Result<EstimateResult> {
    if !(sigma_hat > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_hat must be positive, got {sigma_hat}"
        )));
    }
    let sigma = sampler.variance_bound().sqrt();
    let quantum = quantum_mean_cost(sampler.dim(), sigma, sigma_hat)?;
    let batch = minibatch_size(sigma, sigma_hat);
    let mut acc = Vector::zeros(sampler.dim());
    for _ in 0..batch {
        acc += sampler.sample(rng);
    }
    acc /= batch as f64;
    let classical = batch * sampler.per_sample_cost();
    ledger.charge_classical(phase_label, classical);
    ledger.charge_quantum(phase_label, quantum)?;
    Ok(EstimateResult {
        estimate: acc,
        sigma_hat,
        classical_cost: classical,
        quantum_cost: quantum,
    })
}

/// Level estimators `B_j` built from `n0 2^j` draws of a sampler plus an
/// injected bias `beta_j`, with `beta_j = 0` for `j >= j_clean`.
pub struct BiasedFamily<'a> {
    pub sampler: &'a dyn Sampler,
    pub n0: u64,
    pub j_clean: u32,
    /// `bias[j]` for `j < j_clean`; shorter vectors mean zero bias beyond.
    pub bias: Vec<Vector>,
}

impl<'a> BiasedFamily<'a> {
    pub fn unbiased(sampler: &'a dyn Sampler, n0: u64, j_clean: u32) -> Self {
        Self {
            sampler,
            n0,
            j_clean,
            bias: Vec::new(),
        }
    }

    /// Scalar-style geometric bias `beta0 2^{-j} e` for `j < j_clean`.
    pub fn with_geometric_bias(mut self, beta0: &Vector) -> Self {
        self.bias = (0..self.j_clean)
            .map(|j| beta0 * 0.5f64.powi(j as i32))
            .collect();
        self
    }

    pub fn level_cost(&self, j: u32) -> u64 {
        self.n0 << j
    }

    fn bias_at(&self, j: u32) -> Option<&Vector> {
        if j >= self.j_clean {
            None
        } else {
            self.bias.get(j as usize)
        }
    }

    fn level_from_samples(&self, j: u32, samples: &[Vector]) -> Vector {
        let count = self.level_cost(j) as usize;
        let mut acc = Vector::zeros(self.sampler.dim());
        for s in &samples[..count] {
            acc += s;
        }
        acc /= count as f64;
        if let Some(b) = self.bias_at(j) {
            acc += b;
        }
        acc
    }

    /// One draw of `B_j`.
    pub fn level_estimate(&self, j: u32, rng: &mut SimRng) -> Vector {
        let samples: Vec<Vector> = (0..self.level_cost(j))
            .map(|_| self.sampler.sample(rng))
            .collect();
        self.level_from_samples(j, &samples)
    }

    /// `P(J = j)`.
    pub fn level_probability(&self, j: u32) -> f64 {
        if j < self.j_clean {
            0.5f64.powi(j as i32 + 1)
        } else if j == self.j_clean {
            0.5f64.powi(self.j_clean as i32)
        } else {
            0.0
        }
    }

    /// Expected draws spent on the correction level `J`.
    pub fn expected_level_cost(&self) -> f64 {
        (0..=self.j_clean)
            .map(|j| self.level_probability(j) * self.level_cost(j) as f64)
            .sum()
    }

    fn draw_level(&self, rng: &mut SimRng) -> u32 {
        use rand::Rng;
        let mut j = 0;
        while j < self.j_clean && rng.random::<bool>() {
            j += 1;
        }
        j
    }
}

/// One multilevel draw `B_0 + (B_J - B_{J-1}) / P(J)` with `B_J`, `B_{J-1}`
/// sharing samples. Returns the estimate and the number of draws consumed.
pub fn mlmc_sample(family: &BiasedFamily<'_>, rng: &mut SimRng) -> Result<(Vector, u64)> {
    if family.n0 == 0 {
        return Err(Error::InvalidParameter("n0 must be positive".into()));
    }
    let mut out = family.level_estimate(0, rng);
    let j = family.draw_level(rng);
    let mut drawn = family.level_cost(0);
    if j > 0 {
        let samples: Vec<Vector> = (0..family.level_cost(j))
            .map(|_| family.sampler.sample(rng))
            .collect();
        drawn += family.level_cost(j);
        let fine = family.level_from_samples(j, &samples);
        let coarse = family.level_from_samples(j - 1, &samples);
        out += (fine - coarse) / family.level_probability(j);
    }
    Ok((out, drawn))
}

/// [`mlmc_sample`] with the drawn sample count charged to both ledger columns;
/// the estimator is a classical demonstrator and models no quantum speedup.
pub fn mlmc_debias(
    family: &BiasedFamily<'_>,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
    phase_label: &str,
) -> Result<Vector> {
    let (out, drawn) = mlmc_sample(family, rng)?;
    let cost = drawn * family.sampler.per_sample_cost();
    ledger.charge_classical(phase_label, cost);
    ledger.charge_quantum(phase_label, cost as f64)?;
    Ok(out)
}

/// `n0` giving RMSE at most `sigma_hat` for an unbiased multilevel draw.
///
/// Without injected bias the estimator has variance at most
/// `(1 + 2 j_clean) sigma^2 / n0`.
pub fn multilevel_n0(sigma2: f64, sigma_hat: f64, j_clean: u32) -> u64 {
    (snapped_ceil((1.0 + 2.0 * j_clean as f64) * sigma2 / sigma_hat.powi(2)) as u64).max(1)
}

/// Unbiased estimate with RMSE at most `sigma_hat` through the multilevel path.
pub fn multilevel_mean(
    sampler: &dyn Sampler,
    sigma_hat: f64,
    j_clean: u32,
    rng: &mut SimRng,
    ledger: &mut QueryLedger,
) -> Result<EstimateResult> {
    if !(sigma_hat > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_hat must be positive, got {sigma_hat}"
        )));
    }
    let n0 = multilevel_n0(sampler.variance_bound(), sigma_hat, j_clean);
    let family = BiasedFamily::unbiased(sampler, n0, j_clean);
    let before = ledger.snapshot();
    let estimate = mlmc_debias(&family, rng, ledger, phase::MLMC)?;
    let after = ledger.snapshot();
    Ok(EstimateResult {
        estimate,
        sigma_hat,
        classical_cost: after.0 - before.0,
        quantum_cost: after.1 - before.1,
    })
}

/// Uniform draw from a finite list of vectors.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    pub atoms: Vec<Vector>,
    pub variance_bound: f64,
}

impl DiscreteSampler {
    /// Uses the exact variance of the uniform distribution on `atoms`.
    pub fn new(atoms: Vec<Vector>) -> Self {
        let n = atoms.len() as f64;
        let mean = atoms.iter().fold(Vector::zeros(atoms[0].len()), |a, v| a + v) / n;
        let var = atoms.iter().map(|a| (a - &mean).norm_squared()).sum::<f64>() / n;
        Self {
            atoms,
            variance_bound: var,
        }
    }

    pub fn mean(&self) -> Vector {
        let n = self.atoms.len() as f64;
        self.atoms.iter().fold(Vector::zeros(self.atoms[0].len()), |a, v| a + v) / n
    }
}

impl Sampler for DiscreteSampler {
    fn dim(&self) -> usize {
        self.atoms[0].len()
    }
    fn sample(&self, rng: &mut SimRng) -> Vector {
        use rand::Rng;
        self.atoms[rng.random_range(0..self.atoms.len())].clone()
    }
    fn variance_bound(&self) -> f64 {
        self.variance_bound
    }
}

/// Gaussian with given mean and isotropic standard deviation per coordinate.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    pub mean: Vector,
    pub std: f64,
}

impl Sampler for GaussianSampler {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn sample(&self, rng: &mut SimRng) -> Vector {
        use rand::Rng;
        use rand_distr::StandardNormal;
        Vector::from_fn(self.mean.len(), |k, _| {
            self.mean[k] + self.std * rng.sample::<f64, _>(StandardNormal)
        })
    }
    fn variance_bound(&self) -> f64 {
        self.std * self.std * self.mean.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rademacher() -> DiscreteSampler {
        DiscreteSampler::new(vec![Vector::from_element(1, -1.0), Vector::from_element(1, 1.0)])
    }

    #[test]
    fn deterministic_variable_needs_one_sample() {
        let s = DiscreteSampler::new(vec![Vector::from_vec(vec![2.0, -1.0])]);
        let mut rng = SimRng::seed_from_u64(0);
        let mut ledger = QueryLedger::new();
        let r = minibatch_mean(&s, 0.1, &mut rng, &mut ledger, phase::MEAN).unwrap();
        assert_eq!(r.estimate, Vector::from_vec(vec![2.0, -1.0]));
        assert_eq!(r.classical_cost, 1);
        assert_eq!(r.quantum_cost, 0.0);
    }

    #[test]
    fn batch_sizes() {
        assert_eq!(minibatch_size(2.0, 1.0), 4);
        assert_eq!(minibatch_size(1.0, 0.1), 100);
        assert_eq!(minibatch_size(0.0, 1.0), 1);
    }

    #[test]
    fn rejects_nonpositive_target() {
        let mut rng = SimRng::seed_from_u64(0);
        let mut ledger = QueryLedger::new();
        assert!(minibatch_mean(&rademacher(), 0.0, &mut rng, &mut ledger, "m").is_err());
    }

    #[test]
    fn costs_match_ledger() {
        let s = rademacher();
        let mut rng = SimRng::seed_from_u64(3);
        let mut ledger = QueryLedger::new();
        let r = minibatch_mean(&s, 0.1, &mut rng, &mut ledger, phase::MEAN).unwrap();
        assert_eq!(r.classical_cost, 100);
        assert_eq!(ledger.classical(), 100);
        assert_eq!(ledger.quantum(), r.quantum_cost);
        assert_eq!(r.quantum_cost, 10.0);
    }

    #[test]
    fn same_seed_same_estimate() {
        let s = GaussianSampler {
            mean: Vector::from_vec(vec![1.0, 2.0, 3.0]),
            std: 0.7,
        };
        let run = |seed| {
            let mut rng = SimRng::seed_from_u64(seed);
            let mut ledger = QueryLedger::new();
            minibatch_mean(&s, 0.3, &mut rng, &mut ledger, "m").unwrap().estimate
        };
        assert_eq!(run(17), run(17));
        let fam = BiasedFamily::unbiased(&s, 4, 5);
        let mlmc = |seed| {
            let mut rng = SimRng::seed_from_u64(seed);
            let mut ledger = QueryLedger::new();
            mlmc_debias(&fam, &mut rng, &mut ledger, "m").unwrap()
        };
        assert_eq!(mlmc(5), mlmc(5));
    }

    #[test]
    fn expected_level_cost_closed_form() {
        let s = rademacher();
        for j_clean in 0..10u32 {
            let fam = BiasedFamily::unbiased(&s, 3, j_clean);
            let total: f64 = (0..=j_clean).map(|j| fam.level_probability(j)).sum();
            assert!((total - 1.0).abs() < 1e-15);
            // sum_{j<J} 2^{-(j+1)} n0 2^j + n0 = n0 (J/2 + 1)
            let exact = 3.0 * (j_clean as f64 / 2.0 + 1.0);
            assert!((fam.expected_level_cost() - exact).abs() < 1e-12);
            assert!(fam.expected_level_cost() <= 3.0 * (j_clean as f64 + 1.0));
        }
    }

    #[test]
    fn bias_vanishes_beyond_clean_level() {
        let s = rademacher();
        let fam = BiasedFamily::unbiased(&s, 2, 6).with_geometric_bias(&Vector::from_element(1, 0.5));
        assert!(fam.bias_at(5).is_some());
        assert!(fam.bias_at(6).is_none());
        assert!(fam.bias_at(7).is_none());
    }
}
