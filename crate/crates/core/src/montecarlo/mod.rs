//! Seeded, replication-parallel simulation and the gates that compare it
//! with exact tables and asymptotic predictions.
//!
//! Replication `i` draws from its own stream `stream_rng(seed, i)`, results
//! are collected in replication order and reduced sequentially, so every
//! summary is bit-identical for any worker count.

mod figure1;
mod gates;
mod stats;
mod suite;

pub use figure1::{figure1_experiment, Figure1Report, LevelDistance};
pub use gates::{
    convergence_experiment, mode_tail_gate, profile_moment_gate, variance_scaling_gate, width_gate,
    ConvergenceReport, GateResult, ModeTailReport, MomentCheck, ProfileMomentReport, Rule, VarianceReport,
    WidthGateReport,
};
pub use stats::{jackknife_central_moments, total_variation, MomentEstimate};
pub use suite::{run_gates, ExperimentReport, GateConfig, SuiteReport};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generate::Generator;
use crate::model::{width_and_mode, TreeModelSpec};
use crate::rng::stream_rng;

/// Default cap on `n * reps` node generations per command.
pub const DEFAULT_BUDGET: u64 = 4_000_000_000;

/// Execution settings that never change results.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub allow_large: bool,
    pub budget: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: None,
            allow_large: false,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl RunOptions {
    pub fn with_threads(threads: usize) -> Self {
        RunOptions {
            threads: Some(threads),
            ..Default::default()
        }
    }

    fn check_budget(&self, n: u64, reps: u64) -> Result<()> {
        let work = n.saturating_mul(reps);
        if work > self.budget && !self.allow_large {
            return Err(Error::Budget(format!(
                "n * reps = {work} exceeds the budget of {}; pass allow_large to run it",
                self.budget
            )));
        }
        Ok(())
    }

    /// Runs `f` on a pool of the requested size.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(f()),
            Some(0) => Err(Error::arg("threads", "thread count must be at least 1")),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Per-tree outcome of one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeOutcome {
    pub counts: Vec<u64>,
    pub width: u64,
    pub mode_level: usize,
}

/// Raw per-replication outcomes in replication order.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub model: TreeModelSpec,
    pub n: u64,
    pub seed: u64,
    pub trees: Vec<TreeOutcome>,
}

impl Samples {
    pub fn reps(&self) -> usize {
        self.trees.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.trees.iter().map(|t| t.width as f64).collect()
    }

    pub fn level(&self, k: usize) -> Vec<f64> {
        self.trees
            .iter()
            .map(|t| t.counts.get(k).copied().unwrap_or(0) as f64)
            .collect()
    }

    pub fn width_histogram(&self) -> BTreeMap<u64, u64> {
        histogram(self.trees.iter().map(|t| t.width))
    }

    pub fn level_histogram(&self, k: usize) -> BTreeMap<u64, u64> {
        histogram(self.trees.iter().map(|t| t.counts.get(k).copied().unwrap_or(0)))
    }

    pub fn mode_histogram(&self) -> BTreeMap<usize, u64> {
        histogram(self.trees.iter().map(|t| t.mode_level))
    }
}

fn histogram<T: Ord>(values: impl Iterator<Item = T>) -> BTreeMap<T, u64> {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}

/// Draws `reps` trees of size `n`.
pub fn run_replications(
    model: &TreeModelSpec,
    n: u64,
    reps: u64,
    seed: u64,
    opts: &RunOptions,
) -> Result<Samples> {
    if reps == 0 {
        return Err(Error::arg("reps", "at least one replication is required"));
    }
    if n == 0 {
        return Err(Error::size(0, "trees have at least one node"));
    }
    opts.check_budget(n, reps)?;
    let generator = Generator::new(model, n)?;
    let trees = opts.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|i| -> Result<TreeOutcome> {
                let mut rng = stream_rng(seed, i);
                let profile = generator.profile(n, &mut rng)?;
                let w = width_and_mode(&profile)?;
                Ok(TreeOutcome {
                    counts: profile.counts,
                    width: w.width,
                    mode_level: w.mode_level,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(Samples {
        model: model.clone(),
        n,
        seed,
        trees,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStat {
    pub level: usize,
    pub mean: f64,
    pub se: f64,
}

/// Aggregates of one simulation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimSummary {
    pub model: TreeModelSpec,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub width_hist: BTreeMap<u64, u64>,
    pub mode_hist: BTreeMap<usize, u64>,
    pub mean_profile: Vec<LevelStat>,
    pub width_mean: f64,
    /// Unbiased sample variance.
    pub width_var: f64,
    /// Central moments of orders 2 to 4 with jackknife standard errors.
    pub width_moments: Vec<MomentEstimate>,
}

impl SimSummary {
    pub fn from_samples(s: &Samples) -> Self {
        let reps = s.reps();
        let widths = s.widths();
        let depth = s.trees.iter().map(|t| t.counts.len()).max().unwrap_or(0);
        let mean_profile = (0..depth)
            .map(|k| {
                let (mean, var) = stats::mean_var(&s.level(k));
                LevelStat {
                    level: k,
                    mean,
                    se: (var / reps as f64).sqrt(),
                }
            })
            .collect();
        let (width_mean, width_var) = stats::mean_var(&widths);
        SimSummary {
            model: s.model.clone(),
            n: s.n,
            reps: reps as u64,
            seed: s.seed,
            width_hist: s.width_histogram(),
            mode_hist: s.mode_histogram(),
            mean_profile,
            width_mean,
            width_var,
            width_moments: jackknife_central_moments(&widths, 4),
        }
    }

    /// Most frequent mode level (smallest on ties).
    pub fn mode_peak(&self) -> Option<usize> {
        let best = self.mode_hist.values().copied().max()?;
        self.mode_hist.iter().find(|(_, &c)| c == best).map(|(&k, _)| k)
    }
}

/// Simulates `reps` trees and summarizes them.
pub fn simulate(model: &TreeModelSpec, n: u64, reps: u64, seed: u64) -> Result<SimSummary> {
    simulate_with(model, n, reps, seed, &RunOptions::default())
}

pub fn simulate_with(model: &TreeModelSpec, n: u64, reps: u64, seed: u64, opts: &RunOptions) -> Result<SimSummary> {
    Ok(SimSummary::from_samples(&run_replications(model, n, reps, seed, opts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model_spec;

    #[test]
    fn single_node_trees() {
        let s = simulate(&TreeModelSpec::Recursive, 1, 50, 3).unwrap();
        assert_eq!(s.width_hist, BTreeMap::from([(1, 50)]));
        assert_eq!(s.mode_peak(), Some(0));
    }

    #[test]
    fn worker_count_does_not_matter() {
        let model = parse_model_spec("mary:m=3,t=1").unwrap();
        let a = simulate_with(&model, 300, 40, 7, &RunOptions::with_threads(1)).unwrap();
        let b = simulate_with(&model, 300, 40, 7, &RunOptions::with_threads(3)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn budget_enforced() {
        let opts = RunOptions {
            budget: 1000,
            ..Default::default()
        };
        let err = run_replications(&TreeModelSpec::Recursive, 100, 11, 0, &opts).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
        let opts = RunOptions {
            allow_large: true,
            ..opts
        };
        assert!(run_replications(&TreeModelSpec::Recursive, 100, 11, 0, &opts).is_ok());
        assert!(run_replications(&TreeModelSpec::Recursive, 10, 0, 0, &opts).is_err());
    }

    #[test]
    fn small_width_means() {
        let s = simulate(&TreeModelSpec::Recursive, 3, 100_000, 1).unwrap();
        let se = (s.width_var / 1e5).sqrt();
        assert!((s.width_mean - 1.5).abs() < 4.0 * se);
        let q = simulate(&parse_model_spec("quad:d=1").unwrap(), 3, 100_000, 2).unwrap();
        let p = q.width_hist[&2] as f64 / 1e5;
        let se = (p * (1.0 - p) / 1e5).sqrt();
        assert!((p - 1.0 / 3.0).abs() < 4.0 * se);
    }
}
