//! Seeded tree generation: depth sequences, profiles and growth trajectories.

mod grow;
mod increasing;

pub use grow::{Grower, MAX_GRID_FANOUT, MAX_QUAD_DIM};
pub use increasing::{IncreasingSampler, SAMPLER_CAP};

use serde::Serialize;

use crate::asympt;
use crate::error::{Error, Result};
use crate::model::{Profile, TreeModelSpec};
use crate::rng::{tree_rng, TreeRng};

/// Node depths in creation order; `depths[0] = 0` is the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DepthSequence {
    pub depths: Vec<u32>,
}

/// Draws trees of one family; samplers for increasing varieties are built once.
#[derive(Clone, Debug)]
pub struct Generator {
    model: TreeModelSpec,
    sampler: Option<IncreasingSampler>,
}

impl Generator {
    /// Prepares a generator for sizes up to `n_max`.
    pub fn new(model: &TreeModelSpec, n_max: u64) -> Result<Self> {
        let sampler = if model.is_incremental() {
            Grower::new(model)?;
            None
        } else {
            if n_max > SAMPLER_CAP as u64 {
                return Err(Error::size(
                    n_max,
                    format!("increasing-tree sampling is capped at n = {SAMPLER_CAP}"),
                ));
            }
            Some(IncreasingSampler::new(model, n_max as usize)?)
        };
        Ok(Generator {
            model: model.clone(),
            sampler,
        })
    }

    pub fn model(&self) -> &TreeModelSpec {
        &self.model
    }

    /// Calls `emit` with the depth of every node of one random tree of size `n`.
    pub fn for_each_depth(&self, n: u64, rng: &mut TreeRng, mut emit: impl FnMut(u32)) -> Result<()> {
        if n == 0 {
            return Err(Error::size(0, "trees have at least one node"));
        }
        match &self.sampler {
            Some(s) => s.sample(n as usize, rng, emit),
            None => {
                let mut g = Grower::new(&self.model)?;
                for _ in 0..n {
                    g.insert(rng, &mut emit);
                }
                Ok(())
            }
        }
    }

    pub fn depths(&self, n: u64, rng: &mut TreeRng) -> Result<DepthSequence> {
        let mut depths = Vec::with_capacity(n as usize);
        self.for_each_depth(n, rng, |d| depths.push(d))?;
        Ok(DepthSequence { depths })
    }

    pub fn profile(&self, n: u64, rng: &mut TreeRng) -> Result<Profile> {
        let mut counts: Vec<u64> = Vec::new();
        self.for_each_depth(n, rng, |d| bump(&mut counts, d as usize))?;
        Ok(Profile::new(counts, n))
    }
}

#[inline]
fn bump(counts: &mut Vec<u64>, level: usize) {
    if counts.len() <= level {
        counts.resize(level + 1, 0);
    }
    counts[level] += 1;
}

/// One tree of size `n`, deterministic in `(model, n, seed)`.
pub fn generate_depths(model: &TreeModelSpec, n: u64, seed: u64) -> Result<DepthSequence> {
    let generator = Generator::new(model, n)?;
    generator.depths(n, &mut tree_rng(seed))
}

pub fn profile_from_depths(depths: &DepthSequence) -> Profile {
    let mut counts = Vec::new();
    for &d in &depths.depths {
        bump(&mut counts, d as usize);
    }
    Profile::new(counts, depths.depths.len() as u64)
}

/// Keys stored per level. Differs from the node profile only for m-ary and
/// grid trees; meant as a diagnostic.
pub fn key_profile(model: &TreeModelSpec, n: u64, seed: u64) -> Result<Profile> {
    let mut rng = tree_rng(seed);
    if model.is_incremental() {
        let mut g = Grower::new(model)?;
        let mut counts = Vec::new();
        for _ in 0..n {
            g.insert(&mut rng, |d| bump(&mut counts, d as usize));
        }
        let counts = g.keys_per_level().unwrap_or(counts);
        Ok(Profile::new(counts, n))
    } else {
        Generator::new(model, n)?.profile(n, &mut rng)
    }
}

/// Strictly increasing sizes at which a growing tree is inspected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GrowthSchedule {
    checkpoints: Vec<u64>,
}

impl GrowthSchedule {
    pub fn new(checkpoints: Vec<u64>) -> Result<Self> {
        if checkpoints.is_empty() {
            return Err(Error::arg("checkpoints", "schedule is empty"));
        }
        if checkpoints[0] < 1 {
            return Err(Error::arg("checkpoints", "first checkpoint must be at least 1"));
        }
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::arg("checkpoints", "checkpoints must be strictly increasing"));
        }
        Ok(GrowthSchedule { checkpoints })
    }

    /// `n_l = floor(e^{sqrt(l)})` for `l = 0..=ell_max`, with repeats dropped.
    pub fn exponential_sqrt(ell_max: u32) -> Self {
        let mut checkpoints: Vec<u64> = (0..=ell_max)
            .map(|l| f64::from(l).sqrt().exp().floor() as u64)
            .collect();
        checkpoints.dedup();
        GrowthSchedule { checkpoints }
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.checkpoints
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub n: u64,
    pub width: u64,
    pub mode_level: usize,
    /// `W_n` over the predicted mean width.
    pub ratio: f64,
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WidthTrajectory {
    pub model: TreeModelSpec,
    pub seed: u64,
    pub points: Vec<TrajectoryPoint>,
    /// Largest change of the width caused by a single insertion.
    pub max_width_step: u64,
}

/// Grows one tree through all checkpoints, maintaining the profile incrementally.
pub fn grow_checkpoints(model: &TreeModelSpec, schedule: &GrowthSchedule, seed: u64) -> Result<WidthTrajectory> {
    if !model.is_incremental() {
        return Err(Error::unsupported(
            "grow_checkpoints",
            model,
            "increasing varieties are sampled, not grown",
        ));
    }
    let mut g = Grower::new(model)?;
    let mut rng = tree_rng(seed);
    let mut counts: Vec<u64> = Vec::new();
    let mut width = 0u64;
    let mut mode = 0usize;
    let mut max_step = 0u64;
    let mut points = Vec::with_capacity(schedule.checkpoints.len());
    let mut n = 0u64;
    for &target in &schedule.checkpoints {
        while n < target {
            let before = width;
            g.insert(&mut rng, |d| {
                let d = d as usize;
                bump(&mut counts, d);
                let c = counts[d];
                if c > width || (c == width && d < mode) {
                    width = c;
                    mode = d;
                }
            });
            max_step = max_step.max(width - before);
            n += 1;
        }
        let reference = asympt::expected_width_prediction(model, n as f64)?;
        points.push(TrajectoryPoint {
            n,
            width,
            mode_level: mode,
            ratio: width as f64 / reference,
            counts: counts.clone(),
        });
    }
    Ok(WidthTrajectory {
        model: model.clone(),
        seed,
        points,
        max_width_step: max_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model_spec, width_and_mode};

    #[test]
    fn depth_profiles() {
        let p = |d: &[u32]| profile_from_depths(&DepthSequence { depths: d.to_vec() }).counts;
        assert_eq!(p(&[0]), vec![1]);
        assert_eq!(p(&[0, 1, 1]), vec![1, 2]);
        assert_eq!(p(&[0, 1, 2, 1]), vec![1, 2, 1]);
    }

    #[test]
    fn deterministic_given_seed() {
        for spec in ["recursive", "port", "quad:d=2", "grid:m=3,d=2", "mary:m=3,t=1", "mobile"] {
            let model = parse_model_spec(spec).unwrap();
            let a = generate_depths(&model, 200, 42).unwrap();
            let b = generate_depths(&model, 200, 42).unwrap();
            assert_eq!(a, b, "{spec}");
            assert_eq!(a.depths[0], 0);
        }
    }

    #[test]
    fn zero_size_rejected() {
        assert!(generate_depths(&TreeModelSpec::Recursive, 0, 1).is_err());
        assert!(generate_depths(&TreeModelSpec::Mobile, 3000, 1).is_err());
    }

    #[test]
    fn recursive_depths_follow_parents() {
        let d = generate_depths(&TreeModelSpec::Recursive, 1000, 3).unwrap().depths;
        for i in 1..d.len() {
            assert!(d[..i].contains(&(d[i] - 1)));
        }
    }

    #[test]
    fn schedule_rules() {
        let s = GrowthSchedule::exponential_sqrt(190);
        assert_eq!(&s.checkpoints()[..4], &[1, 2, 4, 5]);
        assert!(s.checkpoints().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*s.checkpoints().last().unwrap(), 190f64.sqrt().exp().floor() as u64);
        assert!(GrowthSchedule::new(vec![3, 3]).is_err());
        assert!(GrowthSchedule::new(vec![0, 3]).is_err());
    }

    #[test]
    fn small_trajectories() {
        let s = GrowthSchedule::new(vec![1, 2, 3]).unwrap();
        for seed in 0..20 {
            let t = grow_checkpoints(&TreeModelSpec::Recursive, &s, seed).unwrap();
            assert_eq!(t.points[0].width, 1);
            assert_eq!(t.points[1].width, 1);
            assert!((1..=2).contains(&t.points[2].width));
        }
        assert!(grow_checkpoints(&TreeModelSpec::Mobile, &s, 0).is_err());
    }

    #[test]
    fn trajectory_matches_fresh_profile() {
        let model = parse_model_spec("quad:d=2").unwrap();
        let s = GrowthSchedule::new(vec![10, 500]).unwrap();
        let t = grow_checkpoints(&model, &s, 11).unwrap();
        let fresh = generate_depths(&model, 500, 11).unwrap();
        let w = width_and_mode(&profile_from_depths(&fresh)).unwrap();
        assert_eq!((t.points[1].width, t.points[1].mode_level), (w.width, w.mode_level));
        assert!(t.max_width_step <= 1);
    }

    #[test]
    fn key_profile_counts_keys() {
        let model = parse_model_spec("mary:m=3,t=1").unwrap();
        let keys = key_profile(&model, 300, 4).unwrap();
        assert_eq!(keys.total_nodes(), 300);
        let nodes = profile_from_depths(&generate_depths(&model, 300, 4).unwrap());
        assert!(nodes.total_nodes() < 300);
    }
}
