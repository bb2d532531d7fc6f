//! Exact split laws, expected profiles and central moments, plus brute-force
//! enumeration for tiny trees.
//!
//! Tables are generic over [`Scalar`]: rationals give exact values, `f64`
//! gives compensated sums for large `n`.

mod enumerate;
mod moments;
mod profile;
mod split;

pub use enumerate::{enumerate_exact, ProfileDistribution, ENUM_CAP, RECURSIVE_ENUM_CAP};
pub use moments::{
    central_moment_dp, closed_form_recursive_moments, closed_form_recursive_row, supports_moment_dp, MAX_MOMENT_N,
    MAX_MOMENT_ORDER,
};
pub use profile::{
    expected_node_counts, expected_profile_dp, expected_profile_stirling, uniform_bound_profile, StirlingRows,
};
pub use split::{split_distribution, SplitLaw, SplitShape};

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::model::TreeModelSpec;
use crate::scalar::{format_ratio, Rational, Scalar};

/// Default size up to which tables are computed in rational arithmetic.
pub const EXACT_BOUNDARY: usize = 400;

/// `mu[n][k]` for `n <= n_max`, `k <= k_max`, and optionally the central
/// moments `pm[m][n][k]` with their inhomogeneous parts `q[m][n][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTable<S> {
    pub model: TreeModelSpec,
    pub mu: Vec<Vec<S>>,
    pub pm: Option<Vec<Vec<Vec<S>>>>,
    pub q: Option<Vec<Vec<Vec<S>>>>,
}

impl<S: Scalar> ExactTable<S> {
    pub fn new(model: TreeModelSpec, mu: Vec<Vec<S>>) -> Self {
        ExactTable {
            model,
            mu,
            pm: None,
            q: None,
        }
    }

    pub fn n_max(&self) -> usize {
        self.mu.len() - 1
    }

    pub fn k_max(&self) -> usize {
        self.mu[0].len() - 1
    }

    pub fn m_max(&self) -> Option<usize> {
        self.pm.as_ref().map(|p| p.len() - 1)
    }

    /// `P^{(m)}_{n,k}`; zero when moments were not computed.
    pub fn moment(&self, m: usize, n: usize, k: usize) -> S {
        self.pm
            .as_ref()
            .and_then(|p| p.get(m))
            .map(|p| p[n][k].clone())
            .unwrap_or_else(S::zero)
    }

    /// `M_n = max_k mu_{n,k}` and the smallest level attaining it.
    pub fn max_mean(&self, n: usize) -> (usize, S) {
        let row = &self.mu[n];
        let mut best = 0;
        for k in 1..row.len() {
            if row[best].sub_ref(&row[k]).is_negative() {
                best = k;
            }
        }
        (best, row[best].clone())
    }

    /// Rows `n,k,value` of `mu` (or of `P^{(m)}` when `moment` is set).
    pub fn to_csv(&self, moment: Option<usize>) -> String
    where
        S: TableValue,
    {
        let mut out = String::from("n,k,value\n");
        for n in 0..=self.n_max() {
            for k in 0..=self.k_max() {
                let v = match moment {
                    None => self.mu[n][k].clone(),
                    Some(m) => self.moment(m, n, k),
                };
                let _ = writeln!(out, "{n},{k},{}", v.render());
            }
        }
        out
    }

    pub fn to_json(&self) -> Value
    where
        S: TableValue,
    {
        let grid = |t: &Vec<Vec<S>>| -> Value {
            Value::Array(
                t.iter()
                    .map(|row| Value::Array(row.iter().map(TableValue::json).collect()))
                    .collect(),
            )
        };
        let mut v = json!({
            "model": self.model.to_string(),
            "n_max": self.n_max(),
            "k_max": self.k_max(),
            "mu": grid(&self.mu),
        });
        if let Some(pm) = &self.pm {
            v["moments"] = Value::Array(pm.iter().map(grid).collect());
        }
        v
    }
}

/// Serialization of table entries: rationals as `"p/q"`, floats in shortest
/// round-trip form.
pub trait TableValue {
    fn render(&self) -> String;
    fn json(&self) -> Value;
}

impl TableValue for Rational {
    fn render(&self) -> String {
        format_ratio(self)
    }

    fn json(&self) -> Value {
        Value::String(format_ratio(self))
    }
}

impl TableValue for f64 {
    fn render(&self) -> String {
        format!("{self:?}")
    }

    fn json(&self) -> Value {
        json!(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;

    #[test]
    fn csv_of_small_recursive_table() {
        let t = expected_profile_dp::<Rational>(&TreeModelSpec::Recursive, 4, 3).unwrap();
        let csv = t.to_csv(None);
        assert!(csv.starts_with("n,k,value\n"));
        assert!(csv.contains("4,1,11/6\n"));
        assert!(csv.contains("4,3,1/6\n"));
        let f = expected_profile_dp::<f64>(&TreeModelSpec::Recursive, 4, 3).unwrap();
        assert!(f.to_csv(None).lines().any(|l| l.starts_with("4,3,0.1666")));
    }

    #[test]
    fn json_keeps_rationals_as_strings() {
        let t = central_moment_dp::<Rational>(&TreeModelSpec::Recursive, 3, 2, 2).unwrap();
        let v = t.to_json();
        assert_eq!(v["mu"][3][1], "3/2");
        assert_eq!(v["moments"][2][3][1], "1/4");
    }

    #[test]
    fn max_mean_level() {
        let t = expected_profile_dp::<Rational>(&TreeModelSpec::Recursive, 10, 9).unwrap();
        let (k, m) = t.max_mean(10);
        assert_eq!(k, 2);
        assert_eq!(m, t.mu[10][2]);
        assert!(m > rational(2, 1));
    }
}
