use serde::Serialize;

use crate::scalar::NeumaierAcc;

/// An estimate with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub order: u32,
    pub value: f64,
    pub se: f64,
}

fn sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = NeumaierAcc::default();
    for v in values {
        acc.push(v);
    }
    acc.total()
}

/// Sample mean and unbiased variance (variance 0 for a single value).
pub(crate) fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = sum(x.iter().copied()) / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let ss = sum(x.iter().map(|v| (v - mean) * (v - mean)));
    (mean, ss / (n - 1.0))
}

/// Central moment of order `k` from power sums `t[p] = sum d^p` of data
/// shifted by an arbitrary constant, over `count` values.
fn central_from_sums(t: &[f64], count: f64, k: usize) -> f64 {
    let a = t[1] / count;
    let mut binom = 1.0;
    let mut out = 0.0;
    for p in 0..=k {
        out += binom * (-a).powi((k - p) as i32) * t[p];
        binom = binom * (k - p) as f64 / (p + 1) as f64;
    }
    out / count
}

/// Plug-in central moments `(1/N) sum (x - mean)^k` for `k = 2..=max_order`
/// with delete-one jackknife standard errors.
pub fn jackknife_central_moments(x: &[f64], max_order: usize) -> Vec<MomentEstimate> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let c = sum(x.iter().copied()) / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - c).collect();
    let sums: Vec<f64> = (0..=max_order).map(|p| sum(d.iter().map(|v| v.powi(p as i32)))).collect();
    (2..=max_order)
        .map(|k| {
            let value = central_from_sums(&sums, n as f64, k);
            let se = if n < 3 {
                0.0
            } else {
                let loo: Vec<f64> = d
                    .iter()
                    .map(|di| {
                        let t: Vec<f64> = sums.iter().enumerate().map(|(p, s)| s - di.powi(p as i32)).collect();
                        central_from_sums(&t, (n - 1) as f64, k)
                    })
                    .collect();
                let mean = sum(loo.iter().copied()) / n as f64;
                let ss = sum(loo.iter().map(|v| (v - mean) * (v - mean)));
                ((n - 1) as f64 / n as f64 * ss).sqrt()
            };
            MomentEstimate {
                order: k as u32,
                value,
                se,
            }
        })
        .collect()
}

/// `(1/2) sum |p_i - q_i|` for two count vectors on the same bins.
pub fn total_variation(p: &[u64], q: &[u64]) -> f64 {
    let np: u64 = p.iter().sum();
    let nq: u64 = q.iter().sum();
    if np == 0 || nq == 0 {
        return if np == nq { 0.0 } else { 1.0 };
    }
    let len = p.len().max(q.len());
    let at = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0) as f64;
    0.5 * sum((0..len).map(|i| (at(p, i) / np as f64 - at(q, i) / nq as f64).abs()))
}

/// Equal-width bins on `[lo, hi)` plus an underflow bin first and an overflow
/// bin last.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Bins {
    pub fn index(&self, x: f64) -> usize {
        if x < self.lo {
            0
        } else if x >= self.hi {
            self.count + 1
        } else {
            let w = (self.hi - self.lo) / self.count as f64;
            1 + (((x - self.lo) / w) as usize).min(self.count - 1)
        }
    }

    pub fn fill(&self, values: &[f64]) -> Vec<u64> {
        let mut out = vec![0u64; self.count + 2];
        for &v in values {
            out[self.index(v)] += 1;
        }
        out
    }
}
