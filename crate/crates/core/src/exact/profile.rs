use crate::error::{Error, Result};
use crate::model::TreeModelSpec;
use crate::scalar::{Accumulator, Scalar};

use super::split::{split_distribution, SplitShape};
use super::ExactTable;

/// Coefficients of `prod_{1 <= j < n} (1 + u/j)` up to `u^{k_max}`.
pub fn expected_profile_stirling<S: Scalar>(n: usize, k_max: usize) -> Result<Vec<S>> {
    if n == 0 {
        return Err(Error::size(0, "trees have at least one node"));
    }
    let mut rows = StirlingRows::<S>::new(k_max);
    while rows.n() < n {
        rows.advance();
    }
    Ok(rows.row().to_vec())
}

/// Successive rows `n = 1, 2, ...` of the recursive-tree expected profile.
#[derive(Clone, Debug)]
pub struct StirlingRows<S> {
    n: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> StirlingRows<S> {
    pub fn new(k_max: usize) -> Self {
        let mut coeffs = vec![S::zero(); k_max + 1];
        coeffs[0] = S::one();
        StirlingRows { n: 1, coeffs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self) -> &[S] {
        &self.coeffs
    }

    /// Multiplies by `1 + u/n`, moving to row `n + 1`.
    pub fn advance(&mut self) {
        let inv = S::one().div_ref(&S::from_u64(self.n as u64));
        let top = self.coeffs.len().min(self.n + 1);
        for k in (1..top).rev() {
            let shifted = self.coeffs[k - 1].mul_ref(&inv);
            self.coeffs[k] = self.coeffs[k].add_ref(&shifted);
        }
        self.n += 1;
    }
}

/// Nonzero split probabilities when they are all equal on a contiguous range
/// `a..=b`, as `(a, b, p)`.
fn uniform_range<S: Scalar>(support: &[(usize, S)]) -> Option<(usize, usize, S)> {
    let (a, p) = support.first()?;
    let contiguous = support.iter().enumerate().all(|(i, (j, q))| *j == a + i && q == p);
    contiguous.then(|| (*a, a + support.len() - 1, p.clone()))
}

/// Expected profiles for all `n <= n_max` from the split-law recurrence.
///
/// Uniform split laws (recursive trees, binary search trees) read the inner
/// sums off running prefix sums `sum_{j <= i} mu_{j,k}`; in floating point
/// only when no prefix has to be subtracted.
pub fn expected_profile_dp<S: Scalar>(model: &TreeModelSpec, n_max: usize, k_max: usize) -> Result<ExactTable<S>> {
    let shape = SplitShape::of(model)?;
    let mut mu: Vec<Vec<S>> = vec![vec![S::zero(); k_max + 1]; n_max + 1];
    // prefix[i][k] = sum_{j < i} mu_{j,k}
    let mut prefix: Vec<Vec<S>> = vec![vec![S::zero(); k_max + 1]; n_max + 2];
    let range = |prefix: &[Vec<S>], lo: usize, hi: usize, k: usize| prefix[hi + 1][k].sub_ref(&prefix[lo][k]);
    for n in 1..=n_max {
        mu[n][0] = S::one();
        if !shape.is_bucket(n) {
            let law = split_distribution::<S>(model, n)?;
            let support: Vec<(usize, S)> = law.support().map(|(j, p)| (j, p.clone())).collect();
            let uniform = uniform_range(&support)
                .filter(|(a, _, _)| *a >= 1 || shape != SplitShape::TwoPart)
                .filter(|(a, b, _)| S::EXACT || (*a <= 1 && n - b <= 1));
            for k in 1..=k_max {
                let mut v = match (&uniform, shape) {
                    (Some((a, b, p)), SplitShape::TwoPart) => {
                        let inner = range(&prefix, *a, *b, k - 1).add_ref(&range(&prefix, n - b, n - a, k));
                        p.mul_ref(&inner)
                    }
                    (Some((a, b, p)), SplitShape::Branching { .. }) => p.mul_ref(&range(&prefix, *a, *b, k - 1)),
                    (None, SplitShape::TwoPart) => {
                        let mut acc = S::acc();
                        for (j, p) in &support {
                            acc.add_product(p, &mu[*j][k - 1].add_ref(&mu[n - j][k]));
                        }
                        acc.value()
                    }
                    (None, SplitShape::Branching { .. }) => {
                        let mut acc = S::acc();
                        for (j, p) in &support {
                            acc.add_product(p, &mu[*j][k - 1]);
                        }
                        acc.value()
                    }
                };
                if let SplitShape::Branching { h, .. } = shape {
                    v = v.mul_ref(&S::from_u64(h));
                }
                mu[n][k] = v;
            }
        }
        for k in 0..=k_max {
            prefix[n + 1][k] = prefix[n][k].add_ref(&mu[n][k]);
        }
    }
    Ok(ExactTable::new(model.clone(), mu))
}

/// Expected number of nodes `N_n = 1 + h sum_j pi_{n,j} N_j` (one per item for
/// two-part families).
pub fn expected_node_counts<S: Scalar>(model: &TreeModelSpec, n_max: usize) -> Result<Vec<S>> {
    let shape = SplitShape::of(model)?;
    let mut out = vec![S::zero(); n_max + 1];
    for n in 1..=n_max {
        out[n] = match shape {
            SplitShape::TwoPart => S::from_u64(n as u64),
            SplitShape::Branching { h, .. } => {
                if shape.is_bucket(n) {
                    S::one()
                } else {
                    let law = split_distribution::<S>(model, n)?;
                    let mut acc = S::acc();
                    for (j, p) in law.support() {
                        acc.add_product(p, &out[j]);
                    }
                    S::one().add_ref(&acc.value().mul_ref(&S::from_u64(h)))
                }
            }
        };
    }
    Ok(out)
}

/// Largest value of `mu_{n,k} r^k n^{-r} sqrt(L_n)` over `k`, for each
/// `n <= n_max`, along recursive-tree rows.
pub fn uniform_bound_profile(r: f64, n_max: usize) -> Vec<f64> {
    let mut rows = StirlingRows::<f64>::new(n_max);
    let mut out = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        while rows.n() < n {
            rows.advance();
        }
        let l = crate::model::log_n(n as f64);
        let scale = (n as f64).powf(-r) * l.sqrt();
        out[n] = rows
            .row()
            .iter()
            .enumerate()
            .take(n)
            .map(|(k, m)| m * r.powi(k as i32) * scale)
            .fold(0.0, f64::max);
    }
    out
}
