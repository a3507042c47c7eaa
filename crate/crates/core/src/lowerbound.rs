//! Classical simulators for the chain query problems and an exact evaluator of
//! the weighted adversary bound on small instances.
//!
//! Rows are 0-based; prefix lengths are counts (`1..=k` for chain queries,
//! `0..k` for detection queries).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::Vector;
use crate::SimRng;

/// Largest `n k` for which inputs are enumerated.
pub const MAX_ENUMERATED_BITS: usize = 20;

/// `n` hidden `k`-bit strings, stored as a bitmask with bit `i k + j` holding `x_{i,j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct McpInstance {
    pub n: usize,
    pub k: usize,
    pub bits: u64,
}

impl McpInstance {
    pub fn new(n: usize, k: usize, bits: u64) -> Result<Self> {
        if n == 0 || k == 0 || n * k > 64 {
            return Err(Error::InvalidParameter(format!("need n, k >= 1 and n k <= 64, got n={n}, k={k}")));
        }
        if n * k < 64 && bits >> (n * k) != 0 {
            return Err(Error::InvalidParameter(format!("bit mask {bits:#x} exceeds {} bits", n * k)));
        }
        Ok(Self { n, k, bits })
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParameter("rows must have equal length".into()));
        }
        let mut bits = 0u64;
        for (i, r) in rows.iter().enumerate() {
            for (j, &b) in r.iter().enumerate() {
                bits |= (b as u64) << (i * k + j);
            }
        }
        Self::new(n, k, bits)
    }

    pub fn bit(&self, i: usize, j: usize) -> bool {
        self.bits >> (i * self.k + j) & 1 == 1
    }

    /// Whether `s` is exactly the length-`s.len()` prefix of row `i`.
    pub fn query(&self, i: usize, s: &[bool]) -> Result<bool> {
        if i >= self.n || s.is_empty() || s.len() > self.k {
            return Err(Error::InvalidParameter(format!(
                "chain query (row {i}, length {}) outside n={}, k={}",
                s.len(),
                self.n,
                self.k
            )));
        }
        Ok(s.iter().enumerate().all(|(j, &b)| self.bit(i, j) == b))
    }
}

/// Matrix of two-way vector choices: `a_{i,j} = candidates[i][j][choices[i][j]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpInstance {
    pub n: usize,
    pub k: usize,
    pub choices: Vec<Vec<bool>>,
    pub candidates: Vec<Vec<[Vector; 2]>>,
}

impl MdpInstance {
    pub fn new(choices: Vec<Vec<bool>>, candidates: Vec<Vec<[Vector; 2]>>) -> Result<Self> {
        let n = choices.len();
        let k = choices.first().map_or(0, Vec::len);
        if n == 0 || k == 0 || choices.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParameter("choices must be a non-empty rectangular matrix".into()));
        }
        if candidates.len() != n || candidates.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParameter("candidate matrix shape differs from choices".into()));
        }
        if candidates.iter().flatten().any(|[a, b]| a == b) {
            return Err(Error::InvalidParameter("the two candidates of an entry must differ".into()));
        }
        Ok(Self {
            n,
            k,
            choices,
            candidates,
        })
    }

    /// Gaussian candidates in dimension `dim`.
    pub fn random_candidates(choices: Vec<Vec<bool>>, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = SimRng::seed_from_u64(seed);
        let candidates = choices
            .iter()
            .map(|row| {
                row.iter()
                    .map(|_| {
                        let mut draw = || Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                        [draw(), draw()]
                    })
                    .collect()
            })
            .collect();
        Self::new(choices, candidates)
    }

    pub fn entry(&self, i: usize, j: usize) -> &Vector {
        &self.candidates[i][j][self.choices[i][j] as usize]
    }

    /// `(found, value)`: whether `a_{i,p} = v_{i,p,m_p}` for all `p < m.len()`,
    /// and if so the choice at position `m.len()`.
    pub fn query(&self, i: usize, m: &[bool]) -> Result<(bool, bool)> {
        let j = m.len();
        if i >= self.n || j >= self.k {
            return Err(Error::InvalidParameter(format!(
                "detection query (row {i}, length {j}) outside n={}, k={} (length must be below k)",
                self.n, self.k
            )));
        }
        let matches = m
            .iter()
            .enumerate()
            .all(|(p, &b)| self.entry(i, p) == &self.candidates[i][p][b as usize]);
        if matches {
            Ok((true, self.choices[i][j]))
        } else {
            Ok((false, false))
        }
    }

    /// Chain instance hiding the same choice matrix.
    pub fn to_mcp(&self) -> Result<McpInstance> {
        McpInstance::from_rows(&self.choices)
    }
}

/// Answers a detection query with two chain queries on `m0` and `m1`.
pub fn mdp_via_mcp<F>(i: usize, m: &[bool], mut chain_oracle: F) -> Result<(bool, bool)>
where
    F: FnMut(usize, &[bool]) -> Result<bool>,
{
    let mut s = m.to_vec();
    s.push(false);
    let zero = chain_oracle(i, &s)?;
    *s.last_mut().expect("non-empty") = true;
    let one = chain_oracle(i, &s)?;
    Ok((zero || one, one))
}

/// A finite query problem over indexed inputs and queries.
pub trait QueryProblem: Sync {
    fn input_count(&self) -> usize;
    fn query_count(&self) -> usize;
    fn response(&self, x: usize, q: usize) -> bool;
    fn target(&self, x: usize) -> u64;
}

/// Chain problem with every input enumerated; the target is the input itself.
#[derive(Debug, Clone)]
pub struct McpProblem {
    pub n: usize,
    pub k: usize,
    /// `(row, prefix bits, length)` per query index.
    queries: Vec<(usize, u64, usize)>,
}

impl McpProblem {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidParameter(format!("need n, k >= 1, got n={n}, k={k}")));
        }
        if n * k > MAX_ENUMERATED_BITS {
            return Err(Error::BudgetExceeded(format!(
                "n k = {} exceeds the enumeration limit {MAX_ENUMERATED_BITS}",
                n * k
            )));
        }
        let mut queries = Vec::new();
        for i in 0..n {
            for t in 1..=k {
                for s in 0..1u64 << t {
                    queries.push((i, s, t));
                }
            }
        }
        Ok(Self { n, k, queries })
    }

    /// `(row, prefix bits, length)` of query `q`; bit `j` of the prefix is position `j`.
    pub fn query(&self, q: usize) -> (usize, u64, usize) {
        self.queries[q]
    }

    fn row(&self, x: usize, i: usize) -> u64 {
        (x as u64 >> (i * self.k)) & ((1u64 << self.k) - 1)
    }
}

impl QueryProblem for McpProblem {
    fn input_count(&self) -> usize {
        1 << (self.n * self.k)
    }
    fn query_count(&self) -> usize {
        self.queries.len()
    }
    fn response(&self, x: usize, q: usize) -> bool {
        let (i, s, t) = self.queries[q];
        self.row(x, i) & ((1u64 << t) - 1) == s
    }
    fn target(&self, x: usize) -> u64 {
        x as u64
    }
}

type PrimeWeight = Box<dyn Fn(usize, usize, usize) -> f64 + Send + Sync>;

/// Sparse weight scheme: `pairs[x]` lists every `(y, w(x, y))` with non-zero
/// weight; `w'` is consulted only on listed pairs and is zero elsewhere.
pub struct WeightScheme {
    pub pairs: Vec<Vec<(usize, f64)>>,
    pub w_prime: PrimeWeight,
}

impl std::fmt::Debug for WeightScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightScheme").field("pairs", &self.pairs.len()).finish_non_exhaustive()
    }
}

/// Hamming-distance-one scheme on the chain problem.
pub fn mcp_weight_scheme(problem: &McpProblem) -> WeightScheme {
    let bits = problem.n * problem.k;
    let pairs = (0..1usize << bits)
        .map(|x| (0..bits).map(|b| (x ^ (1 << b), 1.0)).collect())
        .collect();
    let p = problem.clone();
    WeightScheme {
        pairs,
        w_prime: Box::new(move |x, y, q| {
            if (x ^ y).count_ones() == 1 && p.response(x, q) != p.response(y, q) {
                1.0
            } else {
                0.0
            }
        }),
    }
}

fn weight_of(scheme: &WeightScheme, x: usize, y: usize) -> f64 {
    scheme.pairs[x].iter().find(|&&(z, _)| z == y).map_or(0.0, |&(_, w)| w)
}

/// Checks every scheme condition on every triple with a listed pair.
pub fn validate_scheme<P: QueryProblem>(problem: &P, scheme: &WeightScheme) -> Result<()> {
    if scheme.pairs.len() != problem.input_count() {
        return Err(Error::InvalidParameter(format!(
            "scheme covers {} inputs, problem has {}",
            scheme.pairs.len(),
            problem.input_count()
        )));
    }
    let violation = |x: usize, y: usize, q: Option<usize>, reason: &str| Error::SchemeViolation {
        x,
        y,
        q,
        reason: reason.into(),
    };
    (0..problem.input_count()).into_par_iter().try_for_each(|x| {
        for &(y, w) in &scheme.pairs[x] {
            if y >= problem.input_count() {
                return Err(violation(x, y, None, "pair index out of range"));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(violation(x, y, None, "weight must be finite and non-negative"));
            }
            if (weight_of(scheme, y, x) - w).abs() > 0.0 {
                return Err(violation(x, y, None, "weight is not symmetric"));
            }
            let same_target = problem.target(x) == problem.target(y);
            if w > 0.0 && same_target {
                return Err(violation(x, y, None, "positive weight on equal targets"));
            }
            for q in 0..problem.query_count() {
                let wp = (scheme.w_prime)(x, y, q);
                if !(wp >= 0.0) || !wp.is_finite() {
                    return Err(violation(x, y, Some(q), "w' must be finite and non-negative"));
                }
                let differs = problem.response(x, q) != problem.response(y, q);
                if (!differs || same_target) && wp != 0.0 {
                    return Err(violation(x, y, Some(q), "w' must vanish when responses or targets agree"));
                }
                if differs && !same_target && wp * (scheme.w_prime)(y, x, q) < w * w {
                    return Err(violation(x, y, Some(q), "w'(x,y,q) w'(y,x,q) < w(x,y)^2"));
                }
            }
        }
        Ok(())
    })
}

/// Validates the scheme, then returns the exact minimum of
/// `sqrt(mu(x) mu(y) / (nu(x,q) nu(y,q)))` over admissible `(x, y, q)`.
pub fn adversary_bound<P: QueryProblem>(problem: &P, scheme: &WeightScheme) -> Result<f64> {
    validate_scheme(problem, scheme)?;
    let mu: Vec<f64> = scheme.pairs.iter().map(|p| p.iter().map(|&(_, w)| w).sum()).collect();
    let nu = |x: usize, q: usize| -> f64 { scheme.pairs[x].iter().map(|&(y, _)| (scheme.w_prime)(x, y, q)).sum() };
    let best = (0..problem.input_count())
        .into_par_iter()
        .map(|x| {
            let mut best = f64::INFINITY;
            for &(y, w) in &scheme.pairs[x] {
                if w <= 0.0 {
                    continue;
                }
                for q in 0..problem.query_count() {
                    if problem.response(x, q) != problem.response(y, q) {
                        let ratio = (mu[x] * mu[y] / (nu(x, q) * nu(y, q))).sqrt();
                        best = best.min(ratio);
                    }
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::NoAdmissiblePair)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub n: usize,
    pub k: usize,
    pub bound: f64,
    pub expected: f64,
    pub deviation: f64,
}

pub fn mcp_bound_row(n: usize, k: usize) -> Result<BoundRow> {
    let problem = McpProblem::new(n, k)?;
    let bound = adversary_bound(&problem, &mcp_weight_scheme(&problem))?;
    let expected = n as f64 * (k as f64).sqrt();
    Ok(BoundRow {
        n,
        k,
        bound,
        expected,
        deviation: (bound - expected).abs(),
    })
}

pub fn bound_rows_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from("n,k,bound,expected,deviation\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.17e},{:.17e},{:e}", r.n, r.k, r.bound, r.expected, r.deviation);
    }
    out
}

/// `ceil(n(k+1) + (8 R^2 / c^2) log2(2 n k N^3))`.
pub fn dimension_requirement(n: usize, k: usize, c: f64, radius: f64, budget: f64) -> Result<u64> {
    for (name, v) in [("c", c), ("radius", radius), ("budget", budget)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter("n and k must be positive".into()));
    }
    let (nf, kf) = (n as f64, k as f64);
    let extra = 8.0 * radius * radius / (c * c) * (2.0 * nf * kf * budget.powi(3)).log2();
    Ok(crate::ledger::snapped_ceil(nf * (kf + 1.0) + extra) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_query_examples() {
        let inst = McpInstance::from_rows(&[vec![false, true]]).unwrap();
        assert!(inst.query(0, &[false, true]).unwrap());
        assert!(!inst.query(0, &[false, false]).unwrap());
        assert!(inst.query(0, &[false]).unwrap());
        assert!(inst.query(1, &[false]).is_err());
        assert!(inst.query(0, &[]).is_err());
        assert!(inst.query(0, &[false, true, true]).is_err());
    }

    #[test]
    fn detection_query_examples() {
        let inst = MdpInstance::random_candidates(vec![vec![true, false, true]], 3, 1).unwrap();
        assert_eq!(inst.query(0, &[]).unwrap(), (true, true));
        assert_eq!(inst.query(0, &[true]).unwrap(), (true, false));
        assert_eq!(inst.query(0, &[true, false]).unwrap(), (true, true));
        assert_eq!(inst.query(0, &[false]).unwrap(), (false, false));
        assert!(inst.query(0, &[true, false, true]).is_err());
    }

    #[test]
    fn reduction_on_mismatch_gets_two_zeros() {
        let inst = MdpInstance::random_candidates(vec![vec![true, false]], 2, 2).unwrap();
        let mcp = inst.to_mcp().unwrap();
        let mut answers = Vec::new();
        let out = mdp_via_mcp(0, &[false], |i, s| {
            let a = mcp.query(i, s)?;
            answers.push(a);
            Ok(a)
        })
        .unwrap();
        assert_eq!(out, (false, false));
        assert_eq!(answers, vec![false, false]);
    }

    #[test]
    fn single_bit_bound() {
        let row = mcp_bound_row(1, 1).unwrap();
        assert!((row.bound - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_scheme_has_no_admissible_pair() {
        let p = McpProblem::new(1, 2).unwrap();
        let scheme = WeightScheme {
            pairs: vec![Vec::new(); 4],
            w_prime: Box::new(|_, _, _| 0.0),
        };
        assert!(matches!(adversary_bound(&p, &scheme), Err(Error::NoAdmissiblePair)));
    }

    #[test]
    fn invalid_scheme_names_triple() {
        let p = McpProblem::new(1, 2).unwrap();
        let mut scheme = mcp_weight_scheme(&p);
        scheme.w_prime = Box::new(|_, _, _| 1.0);
        assert!(matches!(adversary_bound(&p, &scheme), Err(Error::SchemeViolation { q: Some(_), .. })));
        let mut asym = mcp_weight_scheme(&p);
        asym.pairs[0][0].1 = 2.0;
        assert!(matches!(validate_scheme(&p, &asym), Err(Error::SchemeViolation { q: None, .. })));
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(McpProblem::new(3, 7), Err(Error::BudgetExceeded(_))));
        assert!(McpProblem::new(4, 5).is_ok());
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(dimension_requirement(2, 1, 1.0, 1.0, 2.0).unwrap(), 44);
        assert_eq!(dimension_requirement(2, 1, 1e3, 1.0, 2.0).unwrap(), 5);
        let a = dimension_requirement(3, 2, 0.5, 1.0, 10.0).unwrap() as f64 - 9.0;
        let b = dimension_requirement(3, 2, 0.5, 2.0, 10.0).unwrap() as f64 - 9.0;
        assert!((b / a - 4.0).abs() < 1e-2);
    }
}
