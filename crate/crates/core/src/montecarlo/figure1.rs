//! Which level's count distribution the width distribution resembles.

use std::collections::BTreeMap;

use serde::Serialize;

use super::gates::{GateResult, Rule};
use super::stats::{mean_var, total_variation, Bins};
use super::{run_replications, RunOptions, Samples};
use crate::asympt::selector;
use crate::error::{Error, Result};
use crate::model::{log_n, TreeModelSpec};

pub const MIN_FIGURE1_REPS: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelDistance {
    /// Offset from `floor(L_n)`.
    pub offset: i64,
    pub level: usize,
    pub tv: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Figure1Report {
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub l_n: f64,
    pub frac: f64,
    pub predicted_offset: i64,
    pub closest_offset: i64,
    pub width_mean: f64,
    pub bins: Bins,
    pub distances: Vec<LevelDistance>,
    pub width_hist: BTreeMap<u64, u64>,
    pub level_hists: BTreeMap<String, BTreeMap<u64, u64>>,
    pub gate: GateResult,
}

/// Histograms of `W_n` and of `Y_{n, floor(L_n) + l}`, `l in {-1, 0, 1}`, for
/// recursive trees, and the total-variation distance of each level to `W_n`.
///
/// Counts near `10^5` make raw integer histograms of a few hundred trees
/// almost disjoint, so distances are taken on `ceil(sqrt(reps))` equal bins
/// spanning the width's mean plus or minus six standard deviations, with one
/// underflow and one overflow bin.
pub fn figure1_experiment(n: u64, reps: u64, seed: u64, opts: &RunOptions) -> Result<Figure1Report> {
    if reps < MIN_FIGURE1_REPS {
        return Err(Error::arg(
            "reps",
            format!("the histogram comparison needs at least {MIN_FIGURE1_REPS} replications"),
        ));
    }
    if n < 3 {
        return Err(Error::size(n, "levels below floor(L_n) need n >= 3"));
    }
    let samples = run_replications(&TreeModelSpec::Recursive, n, reps, seed, opts)?;
    Ok(report_from_samples(&samples))
}

pub(crate) fn report_from_samples(samples: &Samples) -> Figure1Report {
    let n = samples.n;
    let l = log_n(n as f64);
    let frac = l - l.floor();
    let base = l.floor() as i64;
    let widths = samples.widths();
    let (mean, var) = mean_var(&widths);
    let sd = if var > 0.0 { var.sqrt() } else { 0.5 };
    let bins = Bins {
        lo: mean - 6.0 * sd,
        hi: mean + 6.0 * sd,
        count: (samples.reps() as f64).sqrt().ceil() as usize,
    };
    let w_binned = bins.fill(&widths);
    let mut distances = Vec::new();
    let mut level_hists = BTreeMap::new();
    for offset in [-1i64, 0, 1] {
        let level = (base + offset).max(0) as usize;
        let y = samples.level(level);
        distances.push(LevelDistance {
            offset,
            level,
            tv: total_variation(&w_binned, &bins.fill(&y)),
            mean: mean_var(&y).0,
        });
        level_hists.insert(format!("level_{level}"), samples.level_histogram(level));
    }
    let closest = distances
        .iter()
        .fold(&distances[0], |best, d| if d.tv < best.tv { d } else { best });
    let closest_offset = closest.offset;
    let predicted = selector(frac);
    let gate = GateResult::new(
        "figure1_closest_level",
        Rule::Equal,
        closest_offset as f64,
        predicted as f64,
        0.0,
        "periodic mode selector",
    );
    Figure1Report {
        n,
        reps: samples.reps() as u64,
        seed: samples.seed,
        l_n: l,
        frac,
        predicted_offset: predicted,
        closest_offset,
        width_mean: mean,
        bins,
        distances,
        width_hist: samples.width_histogram(),
        level_hists,
        gate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_few_reps() {
        assert!(figure1_experiment(1000, 50, 0, &RunOptions::default()).is_err());
    }

    #[test]
    fn closest_has_smallest_distance() {
        let r = figure1_experiment(5000, 100, 4, &RunOptions::default()).unwrap();
        let min = r.distances.iter().map(|d| d.tv).fold(f64::INFINITY, f64::min);
        let closest = r.distances.iter().find(|d| d.offset == r.closest_offset).unwrap();
        assert_eq!(closest.tv, min);
        assert_eq!(r.bins.count, 10);
        assert_eq!(r.width_hist.values().sum::<u64>(), 100);
    }
}
