//! Brute-force profile distributions for tiny trees.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{width_and_mode, Profile, TreeModelSpec};
use crate::scalar::{format_ratio, Rational};
use crate::series::DegreeFunction;

pub const RECURSIVE_ENUM_CAP: usize = 8;
pub const ENUM_CAP: usize = 7;

/// Exact law of the profile vector (trailing zero levels removed).
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileDistribution {
    pub n: usize,
    pub outcomes: BTreeMap<Vec<u64>, Rational>,
}

impl ProfileDistribution {
    pub fn probability(&self, counts: &[u64]) -> Rational {
        self.outcomes.get(counts).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.outcomes.values().fold(Rational::zero(), |a, p| a + p)
    }

    fn level(counts: &[u64], k: usize) -> Rational {
        Rational::from_integer(counts.get(k).copied().unwrap_or(0).into())
    }

    /// `E Y_{n,k}`.
    pub fn mean(&self, k: usize) -> Rational {
        self.outcomes
            .iter()
            .fold(Rational::zero(), |a, (c, p)| a + p * Self::level(c, k))
    }

    /// `E (Y_{n,k} - E Y_{n,k})^m`.
    pub fn central_moment(&self, k: usize, m: u32) -> Rational {
        let mean = self.mean(k);
        self.outcomes.iter().fold(Rational::zero(), |a, (c, p)| {
            let d = Self::level(c, k) - &mean;
            a + p * num_traits::pow(d, m as usize)
        })
    }

    /// Number of distinct values `Y_{n,k}` takes.
    pub fn distinct_values(&self, k: usize) -> usize {
        let mut seen: Vec<u64> = self
            .outcomes
            .keys()
            .map(|c| c.get(k).copied().unwrap_or(0))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Highest level any outcome reaches.
    pub fn max_level(&self) -> usize {
        self.outcomes.keys().map(|c| c.len().saturating_sub(1)).max().unwrap_or(0)
    }

    /// Law of the width `W_n`.
    pub fn width_distribution(&self) -> BTreeMap<u64, Rational> {
        let mut out: BTreeMap<u64, Rational> = BTreeMap::new();
        for (c, p) in &self.outcomes {
            let w = c.iter().copied().max().unwrap_or(0);
            *out.entry(w).or_insert_with(Rational::zero) += p;
        }
        out
    }

    /// Law of the smallest level attaining the width.
    pub fn mode_distribution(&self) -> BTreeMap<usize, Rational> {
        let mut out: BTreeMap<usize, Rational> = BTreeMap::new();
        for (c, p) in &self.outcomes {
            let k = width_and_mode(&Profile::new(c.clone(), self.n as u64))
                .map(|s| s.mode_level)
                .unwrap_or(0);
            *out.entry(k).or_insert_with(Rational::zero) += p;
        }
        out
    }
}

impl Serialize for ProfileDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Outcome<'a> {
            profile: &'a [u64],
            probability: String,
        }
        let mut seq = s.serialize_seq(Some(self.outcomes.len()))?;
        for (c, p) in &self.outcomes {
            seq.serialize_element(&Outcome {
                profile: c,
                probability: format_ratio(p),
            })?;
        }
        seq.end()
    }
}

/// Full profile law of a random tree of size `n` by exhaustive enumeration.
pub fn enumerate_exact(model: &TreeModelSpec, n: usize) -> Result<ProfileDistribution> {
    if n == 0 {
        return Err(Error::size(0, "trees have at least one node"));
    }
    let cap = match model {
        TreeModelSpec::Recursive => RECURSIVE_ENUM_CAP,
        TreeModelSpec::Quad { d } | TreeModelSpec::Grid { d, .. } if *d >= 2 => {
            return Err(Error::unsupported(
                "enumerate_exact",
                model,
                "continuous splits in dimension >= 2 have no finite outcome space",
            ))
        }
        _ => ENUM_CAP,
    };
    if n > cap {
        return Err(Error::size(n as u64, format!("enumeration is capped at n = {cap}")));
    }
    let mut outcomes = BTreeMap::new();
    match model {
        TreeModelSpec::Recursive => attach(n, &mut vec![0], &Rational::one(), &mut outcomes),
        TreeModelSpec::Port => gaps(n, &mut vec![0], &mut vec![0], &Rational::one(), &mut outcomes),
        TreeModelSpec::Quad { .. } => permutations(n, 2, 0, &mut outcomes),
        TreeModelSpec::Grid { m, .. } => permutations(n, *m as usize, 0, &mut outcomes),
        TreeModelSpec::Mary { m, t } => permutations(n, *m as usize, *t as usize, &mut outcomes),
        TreeModelSpec::Increasing { .. } | TreeModelSpec::Mobile => {
            outcomes = compositions(&DegreeFunction::from_model(model)?, n).swap_remove(n);
        }
    }
    Ok(ProfileDistribution { n, outcomes })
}

fn record(out: &mut BTreeMap<Vec<u64>, Rational>, depths: &[u32], p: Rational) {
    let mut counts = vec![0u64; depths.iter().copied().max().unwrap_or(0) as usize + 1];
    for &d in depths {
        counts[d as usize] += 1;
    }
    *out.entry(counts).or_insert_with(Rational::zero) += p;
}

/// Node `i` picks one of the `i` earlier nodes as parent.
fn attach(n: usize, depths: &mut Vec<u32>, p: &Rational, out: &mut BTreeMap<Vec<u64>, Rational>) {
    let i = depths.len();
    if i == n {
        record(out, depths, p.clone());
        return;
    }
    let q = p / Rational::from_integer(i.into());
    for parent in 0..i {
        depths.push(depths[parent] + 1);
        attach(n, depths, &q, out);
        depths.pop();
    }
}

/// `slots` holds the depth of the node owning each gap; a node with
/// outdegree `d` owns `d + 1` gaps.
fn gaps(n: usize, depths: &mut Vec<u32>, slots: &mut Vec<u32>, p: &Rational, out: &mut BTreeMap<Vec<u64>, Rational>) {
    if depths.len() == n {
        record(out, depths, p.clone());
        return;
    }
    let q = p / Rational::from_integer(slots.len().into());
    for s in 0..slots.len() {
        let d = slots[s] + 1;
        depths.push(d);
        slots.push(slots[s]);
        slots.push(d);
        gaps(n, depths, slots, &q, out);
        slots.truncate(slots.len() - 2);
        depths.pop();
    }
}

/// Recursive pivoting over all `n!` arrival orders.
fn permutations(n: usize, m: usize, t: usize, out: &mut BTreeMap<Vec<u64>, Rational>) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0u64;
    let mut counts: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    loop {
        let mut depths = Vec::with_capacity(n);
        pivot_region(&perm, m, t, 0, &mut depths);
        let mut c = vec![0u64; depths.iter().copied().max().unwrap_or(0) as usize + 1];
        for d in depths {
            c[d as usize] += 1;
        }
        *counts.entry(c).or_insert(0) += 1;
        total += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    for (c, k) in counts {
        out.insert(c, Rational::new(k.into(), total.into()));
    }
}

/// Emits one depth per node of the region holding `keys` in arrival order.
fn pivot_region(keys: &[usize], m: usize, t: usize, depth: u32, depths: &mut Vec<u32>) {
    if keys.is_empty() {
        return;
    }
    depths.push(depth);
    let s = m * (t + 1) - 1;
    if keys.len() < s {
        return;
    }
    let mut sample = keys[..s].to_vec();
    sample.sort_unstable();
    let pivots: Vec<usize> = (1..m).map(|i| sample[i * (t + 1) - 1]).collect();
    for child in 0..m {
        let lo = if child == 0 { None } else { Some(pivots[child - 1]) };
        let hi = pivots.get(child).copied();
        let sub: Vec<usize> = keys
            .iter()
            .copied()
            .filter(|&x| lo.is_none_or(|l| x > l) && hi.is_none_or(|h| x < h))
            .collect();
        pivot_region(&sub, m, t, depth + 1, depths);
    }
}

fn next_permutation(a: &mut [usize]) -> bool {
    let Some(i) = (1..a.len()).rev().find(|&i| a[i - 1] < a[i]) else {
        return false;
    };
    let j = (i..a.len()).rev().find(|&j| a[j] > a[i - 1]).unwrap();
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

type Law = BTreeMap<Vec<u64>, Rational>;

/// Profile laws for sizes `0..=n` of an increasing variety. A root with
/// ordered subtrees of sizes `a_1..a_r` has weight `phi_r prod w(a_i)`,
/// where `a w(a)` is the total weight of size `a`.
fn compositions(phi: &DegreeFunction, n: usize) -> Vec<Law> {
    let mut laws: Vec<Law> = vec![Law::new(); n + 1];
    let mut w = vec![Rational::zero(); n + 1];
    for a in 1..=n {
        // forests[r]: weighted laws of ordered r-tuples of subtrees with a - 1 nodes in total
        let mut acc: Law = Law::new();
        let mut total = Rational::zero();
        let mut stack: Vec<(usize, Rational, Vec<u64>, usize)> = vec![(a - 1, Rational::one(), Vec::new(), 0)];
        while let Some((rest, weight, shifted, r)) = stack.pop() {
            if rest == 0 {
                let c = phi.coefficient(r);
                if c.is_zero() {
                    continue;
                }
                let mut profile = vec![1u64];
                profile.extend(shifted.iter().copied());
                let p = weight * c;
                total += &p;
                *acc.entry(profile).or_insert_with(Rational::zero) += p;
                continue;
            }
            for size in 1..=rest {
                if w[size].is_zero() {
                    continue;
                }
                for (child, q) in &laws[size] {
                    let mut merged = shifted.clone();
                    if merged.len() < child.len() {
                        merged.resize(child.len(), 0);
                    }
                    for (slot, v) in merged.iter_mut().zip(child) {
                        *slot += v;
                    }
                    stack.push((rest - size, &weight * &w[size] * q, merged, r + 1));
                }
            }
        }
        if total.is_zero() {
            continue;
        }
        w[a] = &total / Rational::from_integer(a.into());
        laws[a] = acc.into_iter().map(|(k, p)| (k, p / &total)).collect();
    }
    laws
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::expected_profile_stirling;
    use crate::model::parse_model_spec;
    use crate::scalar::rational;

    fn law(spec: &str, n: usize) -> ProfileDistribution {
        enumerate_exact(&parse_model_spec(spec).unwrap(), n).unwrap()
    }

    #[test]
    fn size_three_laws() {
        let r = law("recursive", 3);
        assert_eq!(r.probability(&[1, 2]), rational(1, 2));
        assert_eq!(r.probability(&[1, 1, 1]), rational(1, 2));
        let p = law("port", 3);
        assert_eq!(p.probability(&[1, 2]), rational(2, 3));
        assert_eq!(p.probability(&[1, 1, 1]), rational(1, 3));
        let q = law("quad:d=1", 3);
        assert_eq!(q.probability(&[1, 2]), rational(1, 3));
        assert_eq!(q.probability(&[1, 1, 1]), rational(2, 3));
    }

    #[test]
    fn recursive_level_one_mean() {
        assert_eq!(law("recursive", 4).mean(1), rational(11, 6));
        let d = law("recursive", 8);
        let row = expected_profile_stirling::<Rational>(8, 7).unwrap();
        for (k, mu) in row.iter().enumerate() {
            assert_eq!(d.mean(k), *mu);
        }
        assert_eq!(d.central_moment(1, 1), rational(0, 1));
    }

    #[test]
    fn laws_are_normalized() {
        for spec in [
            "recursive",
            "port",
            "quad:d=1",
            "mary:m=3,t=1",
            "grid:m=3,d=1",
            "increasing:phi=1,2,1",
            "increasing:phi=1,0,0,1",
            "mobile",
        ] {
            for n in 1..=7 {
                let d = enumerate_exact(&parse_model_spec(spec).unwrap(), n);
                if let Ok(d) = d {
                    if !d.outcomes.is_empty() {
                        assert_eq!(d.total(), rational(1, 1), "{spec} n = {n}");
                    }
                }
            }
        }
    }

    #[test]
    fn binary_increasing_is_binary_search_tree() {
        for n in 1..=7 {
            assert_eq!(law("increasing:phi=1,2,1", n), law("quad:d=1", n), "n = {n}");
            assert_eq!(law("mary:m=2,t=0", n), law("quad:d=1", n));
        }
    }

    #[test]
    fn mobile_size_three() {
        // two mobile trees: a path and a cherry
        let d = law("mobile", 3);
        assert_eq!(d.probability(&[1, 2]), rational(1, 2));
        assert_eq!(d.probability(&[1, 1, 1]), rational(1, 2));
    }

    #[test]
    fn infeasible_sizes_are_empty() {
        assert!(law("increasing:phi=1,0,0,1", 3).outcomes.is_empty());
        assert_eq!(law("increasing:phi=1,0,0,1", 4).probability(&[1, 3]), rational(1, 1));
    }

    #[test]
    fn caps_and_rejections() {
        assert!(enumerate_exact(&TreeModelSpec::Recursive, 9).is_err());
        assert!(enumerate_exact(&TreeModelSpec::Port, 8).is_err());
        assert!(enumerate_exact(&parse_model_spec("quad:d=2").unwrap(), 3).is_err());
        assert!(enumerate_exact(&TreeModelSpec::Recursive, 0).is_err());
    }

    #[test]
    fn bucket_rule() {
        // m = 3, t = 1 needs five keys before splitting
        let d = law("mary:m=3,t=1", 4);
        assert_eq!(d.probability(&[1]), rational(1, 1));
        let d = law("mary:m=3,t=1", 5);
        assert_eq!(d.probability(&[1, 3]), rational(1, 1));
    }
}
