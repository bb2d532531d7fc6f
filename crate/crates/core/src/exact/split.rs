use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::model::TreeModelSpec;
use crate::scalar::{Accumulator, Rational, Scalar};

/// How a tree of size `n` decomposes at its root.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitShape {
    /// Subtree of size `j` hangs one level down; the remaining `n - j` nodes
    /// form a tree of the same law rooted at the same level.
    TwoPart,
    /// `h` subtrees one level down, with `kappa` items kept at the root;
    /// regions with fewer than `threshold` items are a single node.
    Branching { h: u64, kappa: usize, threshold: usize },
}

impl SplitShape {
    pub fn of(model: &TreeModelSpec) -> Result<Self> {
        Ok(match model {
            TreeModelSpec::Recursive | TreeModelSpec::Port => SplitShape::TwoPart,
            TreeModelSpec::Quad { d } => SplitShape::Branching {
                h: 1u64.checked_shl(*d).filter(|_| *d < 64).ok_or(Error::ParameterOutOfRange {
                    field: "d",
                    reason: "2^d must fit in 64 bits".into(),
                })?,
                kappa: 1,
                threshold: 1,
            },
            TreeModelSpec::Grid { m, d } => SplitShape::Branching {
                h: (*m as u64).checked_pow(*d).ok_or(Error::ParameterOutOfRange {
                    field: "d",
                    reason: "m^d must fit in 64 bits".into(),
                })?,
                kappa: *m as usize - 1,
                threshold: *m as usize - 1,
            },
            TreeModelSpec::Mary { m, t } => SplitShape::Branching {
                h: *m as u64,
                kappa: *m as usize - 1,
                threshold: (*m as usize) * (*t as usize + 1) - 1,
            },
            other => {
                return Err(Error::unsupported(
                    "split_distribution",
                    other,
                    "no closed split law; use the series module",
                ))
            }
        })
    }

    /// Whether a region of `n >= 1` items is a single bucket node.
    pub fn is_bucket(&self, n: usize) -> bool {
        match self {
            SplitShape::TwoPart => n == 1,
            SplitShape::Branching { threshold, .. } => n < *threshold,
        }
    }
}

/// Law of the first subtree size `j` for a tree of size `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitLaw<S> {
    pub n: usize,
    pub shape: SplitShape,
    /// `pi[j]` for `j = 0..=n`.
    pub pi: Vec<S>,
}

impl<S: Scalar> SplitLaw<S> {
    /// Indices with nonzero probability.
    pub fn support(&self) -> impl Iterator<Item = (usize, &S)> {
        self.pi.iter().enumerate().filter(|(_, p)| !p.is_zero())
    }

    pub fn total(&self) -> S {
        let mut acc = S::acc();
        for p in &self.pi {
            acc.add(p);
        }
        acc.value()
    }
}

/// Split law for `n >= 2` (or `n >= 1` for branching families above their
/// bucket threshold).
pub fn split_distribution<S: Scalar>(model: &TreeModelSpec, n: usize) -> Result<SplitLaw<S>> {
    let shape = SplitShape::of(model)?;
    let min_n = match shape {
        SplitShape::TwoPart => 2,
        SplitShape::Branching { threshold, .. } => threshold.max(1),
    };
    if n < min_n {
        return Err(Error::size(n as u64, format!("split laws start at n = {min_n}")));
    }
    let pi = match model {
        TreeModelSpec::Recursive => {
            let p = S::one().div_ref(&S::from_u64(n as u64 - 1));
            (0..=n).map(|j| if j >= 1 && j < n { p.clone() } else { S::zero() }).collect()
        }
        TreeModelSpec::Port => port(n),
        TreeModelSpec::Quad { d } => quad(n, *d as usize),
        TreeModelSpec::Grid { m, d } => grid(n, *m as usize, *d as usize),
        TreeModelSpec::Mary { m, t } => mary(n, *m as usize, *t as usize),
        _ => unreachable!("shape check rejects other families"),
    };
    Ok(SplitLaw { n, shape, pi })
}

/// `pi_j = c_{j-1} c_{n-j-1} / (2 j c_{n-1})` with `c_k = binom(2k,k) / 4^k`.
fn port<S: Scalar>(n: usize) -> Vec<S> {
    let mut c = vec![S::one()];
    for k in 1..n {
        let next = c[k - 1].mul_ref(&S::from_u64(2 * k as u64 - 1)).div_ref(&S::from_u64(2 * k as u64));
        c.push(next);
    }
    let mut pi = vec![S::zero(); n + 1];
    for (j, slot) in pi.iter_mut().enumerate().take(n).skip(1) {
        let den = S::from_u64(2 * j as u64).mul_ref(&c[n - 1]);
        *slot = c[j - 1].mul_ref(&c[n - j - 1]).div_ref(&den);
    }
    pi
}

/// `pi_j = (1/n) sum_{j < j_1 <= ... <= j_{d-1} <= n} 1/(j_1 ... j_{d-1})`.
fn quad<S: Scalar>(n: usize, d: usize) -> Vec<S> {
    let mut pi = vec![S::zero(); n + 1];
    let inv_n = S::one().div_ref(&S::from_u64(n as u64));
    if d == 1 {
        for p in pi.iter_mut().take(n) {
            *p = inv_n.clone();
        }
        return pi;
    }
    let inv: Vec<S> = (0..=n)
        .map(|z| if z == 0 { S::zero() } else { S::one().div_ref(&S::from_u64(z as u64)) })
        .collect();
    // g(y) = weight of chains starting at y, one level per pass
    let mut g: Vec<S> = (0..=n).map(|y| if y == 0 { S::zero() } else { S::one() }).collect();
    for _ in 0..d.saturating_sub(2) {
        let mut run = S::zero();
        for y in (1..=n).rev() {
            run = run.add_ref(&g[y].mul_ref(&inv[y]));
            g[y] = run.clone();
        }
    }
    let mut run = S::zero();
    for j in (0..n).rev() {
        run = run.add_ref(&g[j + 1].mul_ref(&inv[j + 1]));
        pi[j] = run.mul_ref(&inv_n);
    }
    pi
}

/// Nested grid-tree sum, evaluated from the outermost index inwards:
/// `S_{l-1}(x) = sum_{y >= x} binom(y-x+m-2, m-2) S_l(y) / binom(y+m-1, m-1)`
/// with `S_d(y) = [y = n-m+1]`, and `pi_j = S_0(j)`.
fn grid<S: Scalar>(n: usize, m: usize, d: usize) -> Vec<S> {
    let top = n + 1 - m;
    let denom: Vec<S> = (0..=top)
        .map(|y| S::from_ratio(&Rational::from_integer(binomial(y + m - 1, m - 1))))
        .collect();
    let mut s: Vec<S> = (0..=top).map(|y| if y == top { S::one() } else { S::zero() }).collect();
    for _ in 0..d {
        let mut a: Vec<S> = s.iter().zip(&denom).map(|(v, b)| v.div_ref(b)).collect();
        for _ in 0..m - 1 {
            let mut run = S::zero();
            for y in (0..=top).rev() {
                run = run.add_ref(&a[y]);
                a[y] = run.clone();
            }
        }
        s = a;
    }
    let mut pi = vec![S::zero(); n + 1];
    for (j, v) in s.into_iter().enumerate() {
        pi[j] = v;
    }
    pi
}

/// `pi_j = binom(j,t) binom(n-1-j, (m-1)(t+1)-1) / binom(n, m(t+1)-1)`.
fn mary<S: Scalar>(n: usize, m: usize, t: usize) -> Vec<S> {
    let s = m * (t + 1) - 1;
    let rest = s - t - 1;
    let total = binomial(n, s);
    let mut pi = vec![S::zero(); n + 1];
    for (j, slot) in pi.iter_mut().enumerate().take(n) {
        if j < t || n - 1 - j < rest {
            continue;
        }
        let num = binomial(j, t) * binomial(n - 1 - j, rest);
        *slot = S::from_ratio(&Rational::new(num, total.clone()));
    }
    pi
}

pub(crate) fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::from(0);
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model_spec;
    use crate::scalar::rational;
    use proptest::prelude::*;

    fn law(spec: &str, n: usize) -> Vec<Rational> {
        split_distribution::<Rational>(&parse_model_spec(spec).unwrap(), n).unwrap().pi
    }

    #[test]
    fn port_three() {
        assert_eq!(law("port", 3), vec![rational(0, 1), rational(2, 3), rational(1, 3), rational(0, 1)]);
    }

    #[test]
    fn binary_quad_is_uniform() {
        let pi = law("quad:d=1", 6);
        assert!(pi[..6].iter().all(|p| *p == rational(1, 6)));
        assert_eq!(pi[6], rational(0, 1));
    }

    #[test]
    fn mary_two_one_at_four() {
        let pi = law("mary:m=2,t=1", 4);
        assert_eq!(pi, vec![rational(0, 1), rational(1, 2), rational(1, 2), rational(0, 1), rational(0, 1)]);
    }

    #[test]
    fn quad_two_at_two() {
        let pi = law("quad:d=2", 2);
        assert_eq!(&pi[..2], &[rational(3, 4), rational(1, 4)]);
    }

    #[test]
    fn ternary_grid_is_ternary_search_tree() {
        for n in 2..12 {
            assert_eq!(law("grid:m=3,d=1", n), law("mary:m=3,t=0", n), "n = {n}");
        }
    }

    #[test]
    fn grid_with_two_cuts_is_quad() {
        for d in 1..4 {
            for n in 1..15 {
                let g = law(&format!("grid:m=2,d={d}"), n);
                let q = law(&format!("quad:d={d}"), n);
                assert_eq!(g, q, "d = {d}, n = {n}");
            }
        }
    }

    #[test]
    fn quad_brute_force_nested_sum() {
        // direct triple sum for d = 4
        let n = 7;
        let pi = law("quad:d=4", n);
        for (j, p) in pi.iter().enumerate().take(n) {
            let mut s = rational(0, 1);
            for a in j + 1..=n {
                for b in a..=n {
                    for c in b..=n {
                        s += rational(1, (a * b * c) as i64);
                    }
                }
            }
            assert_eq!(*p, s * rational(1, n as i64));
        }
    }

    #[test]
    fn small_sizes_rejected() {
        assert!(split_distribution::<f64>(&TreeModelSpec::Recursive, 1).is_err());
        assert!(split_distribution::<f64>(&parse_model_spec("mary:m=3,t=1").unwrap(), 4).is_err());
        assert!(split_distribution::<f64>(&TreeModelSpec::Mobile, 5).is_err());
    }

    fn arb_split_model() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("recursive".to_string()),
            Just("port".to_string()),
            (1u32..5).prop_map(|d| format!("quad:d={d}")),
            (2u32..5, 1u32..4).prop_map(|(m, d)| format!("grid:m={m},d={d}")),
            (2u32..5, 0u32..3).prop_map(|(m, t)| format!("mary:m={m},t={t}")),
        ]
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(spec in arb_split_model(), n in 2usize..40) {
            let model = parse_model_spec(&spec).unwrap();
            if let Ok(l) = split_distribution::<Rational>(&model, n) {
                prop_assert_eq!(l.total(), rational(1, 1));
                prop_assert!(l.pi.iter().all(|p| !p.is_negative()));
                let f = split_distribution::<f64>(&model, n).unwrap();
                prop_assert!((f.total() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
