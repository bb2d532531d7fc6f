//! Exact sampler for increasing-tree varieties and mobile trees.
//!
//! A tree of size `n` has root degree `r` and ordered subtree sizes
//! `(n_1, ..., n_r)` with probability `phi_r prod t_{n_i} / (n t_n)`, where
//! `t_a = tau_a / a!`. Weights use the rescaled coefficients `c^a t_a` with
//! `c = R`, which keeps them polynomially bounded.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::TreeModelSpec;
use crate::rng::TreeRng;
use crate::scalar::{ratio_to_f64, NeumaierAcc};
use crate::series::{solve_tree_ode, DegreeFunction};

/// Largest size the sampler accepts.
pub const SAMPLER_CAP: usize = 2000;

#[derive(Clone, Debug)]
enum Tables {
    /// `forests[r][s] = [z^s] T^r` for `r <= d`.
    Polynomial { phi: Vec<f64>, forests: Vec<Vec<f64>> },
    /// `seq[s] = [z^s] 1/(1-T)`.
    Mobile { seq: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct IncreasingSampler {
    n_max: usize,
    t: Vec<f64>,
    tables: Tables,
}

impl IncreasingSampler {
    pub fn new(model: &TreeModelSpec, n_max: usize) -> Result<Self> {
        if n_max > SAMPLER_CAP {
            return Err(Error::size(
                n_max as u64,
                format!("increasing-tree sampling is capped at n = {SAMPLER_CAP}"),
            ));
        }
        let phi = DegreeFunction::from_model(model)?;
        let scale = phi.radius()?;
        let n = n_max.max(1);
        let t = solve_tree_ode::<f64>(&phi, n, &scale)?.into_coeffs();
        let tables = match (&phi, model) {
            (DegreeFunction::Polynomial(c), TreeModelSpec::Increasing { .. }) => {
                let d = c.len() - 1;
                let mut forests = vec![vec![0.0; n]; d + 1];
                forests[0][0] = 1.0;
                for r in 1..=d {
                    for s in r..n {
                        let mut acc = NeumaierAcc::default();
                        for a in 1..=s - (r - 1) {
                            acc.push(t[a] * forests[r - 1][s - a]);
                        }
                        forests[r][s] = acc.total();
                    }
                }
                Tables::Polynomial {
                    phi: c.iter().map(ratio_to_f64).collect(),
                    forests,
                }
            }
            (DegreeFunction::Mobile, TreeModelSpec::Mobile) => {
                let mut seq = vec![0.0; n];
                seq[0] = 1.0;
                for s in 1..n {
                    let mut acc = NeumaierAcc::default();
                    for a in 1..=s {
                        acc.push(t[a] * seq[s - a]);
                    }
                    seq[s] = acc.total();
                }
                Tables::Mobile { seq }
            }
            _ => {
                return Err(Error::unsupported(
                    "increasing sampler",
                    model,
                    "only increasing varieties and mobile trees",
                ))
            }
        };
        Ok(IncreasingSampler { n_max, t, tables })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Whether trees of size `n` exist.
    pub fn feasible(&self, n: usize) -> bool {
        n >= 1 && n <= self.n_max && self.t[n] > 0.0
    }

    /// Draws one tree and calls `emit` with every node depth, root first.
    pub fn sample(&self, n: usize, rng: &mut TreeRng, mut emit: impl FnMut(u32)) -> Result<()> {
        if n == 0 {
            return Err(Error::size(0, "trees have at least one node"));
        }
        if n > self.n_max {
            return Err(Error::size(n as u64, format!("sampler tables built for n <= {}", self.n_max)));
        }
        if !self.feasible(n) {
            return Err(Error::size(n as u64, "no tree of this size exists in the variety"));
        }
        let mut stack = vec![(n, 0u32)];
        let mut sizes = Vec::new();
        while let Some((size, depth)) = stack.pop() {
            emit(depth);
            if size == 1 {
                continue;
            }
            sizes.clear();
            self.split(size - 1, rng, &mut sizes);
            stack.extend(sizes.iter().map(|&a| (a, depth + 1)));
        }
        Ok(())
    }

    /// Subtree sizes of a root whose descendants number `s > 0`.
    fn split(&self, s: usize, rng: &mut TreeRng, out: &mut Vec<usize>) {
        match &self.tables {
            Tables::Polynomial { phi, forests } => {
                let d = phi.len() - 1;
                let r = pick(rng, 1..=d.min(s), |r| phi[r] * forests[r][s]);
                let mut rest = s;
                for slots in (1..=r).rev() {
                    let a = if slots == 1 {
                        rest
                    } else {
                        pick(rng, 1..=rest - (slots - 1), |a| self.t[a] * forests[slots - 1][rest - a])
                    };
                    out.push(a);
                    rest -= a;
                }
            }
            Tables::Mobile { seq } => {
                // Tuples drawn with weight n_1 prod t_{n_i} have the same
                // rotation classes, hence the same multiset law, as the
                // cycle weight prod t_{n_i} / r.
                let first = pick(rng, 1..=s, |a| a as f64 * self.t[a] * seq[s - a]);
                out.push(first);
                let mut rest = s - first;
                while rest > 0 {
                    let a = pick(rng, 1..=rest, |a| self.t[a] * seq[rest - a]);
                    out.push(a);
                    rest -= a;
                }
            }
        }
    }
}

/// Index drawn with probability proportional to `weight`.
fn pick(rng: &mut TreeRng, range: std::ops::RangeInclusive<usize>, weight: impl Fn(usize) -> f64) -> usize {
    let mut total = NeumaierAcc::default();
    for i in range.clone() {
        total.push(weight(i));
    }
    let total = total.total();
    debug_assert!(total > 0.0, "no feasible choice");
    let mut target = rng.random::<f64>() * total;
    let mut last = *range.start();
    for i in range {
        let w = weight(i);
        if w > 0.0 {
            last = i;
            if target < w {
                return i;
            }
            target -= w;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model_spec;
    use crate::rng::tree_rng;

    #[test]
    fn sizes_sum_and_feasibility() {
        let model = parse_model_spec("increasing:phi=1,0,0,1").unwrap();
        let s = IncreasingSampler::new(&model, 40).unwrap();
        assert!(s.feasible(1) && s.feasible(4) && s.feasible(7));
        assert!(!s.feasible(5));
        let mut rng = tree_rng(9);
        assert!(s.sample(5, &mut rng, |_| {}).is_err());
        let mut count = 0;
        s.sample(40, &mut rng, |_| count += 1).unwrap();
        assert_eq!(count, 40);
    }

    #[test]
    fn mobile_trees_have_n_nodes() {
        let s = IncreasingSampler::new(&TreeModelSpec::Mobile, 300).unwrap();
        let mut rng = tree_rng(2);
        let mut depths = Vec::new();
        s.sample(300, &mut rng, |d| depths.push(d)).unwrap();
        assert_eq!(depths.len(), 300);
        assert_eq!(depths[0], 0);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(IncreasingSampler::new(&TreeModelSpec::Mobile, SAMPLER_CAP + 1).is_err());
    }
}
