//! Incremental growers: one item per call, reporting the depth of every node
//! the insertion creates.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::TreeModelSpec;
use crate::rng::TreeRng;

const NONE: u32 = u32::MAX;
/// Largest fan-out stored as a dense child array.
const DENSE_FANOUT: u64 = 16;
/// Largest quad-tree dimension accepted by the generator.
pub const MAX_QUAD_DIM: u32 = 16;
/// Largest grid fan-out `m^d` accepted by the generator.
pub const MAX_GRID_FANOUT: u64 = 1 << 40;

/// Child slots of spatial trees.
#[derive(Clone, Debug)]
enum ChildTable {
    Dense { fanout: usize, slots: Vec<u32> },
    Sparse { fanout: u64, map: HashMap<u64, u32> },
}

impl ChildTable {
    fn new(fanout: u64) -> Self {
        if fanout <= DENSE_FANOUT {
            ChildTable::Dense {
                fanout: fanout as usize,
                slots: Vec::new(),
            }
        } else {
            ChildTable::Sparse {
                fanout,
                map: HashMap::new(),
            }
        }
    }

    fn add_node(&mut self) {
        if let ChildTable::Dense { fanout, slots } = self {
            slots.extend(std::iter::repeat_n(NONE, *fanout));
        }
    }

    fn get(&self, node: u32, cell: u64) -> u32 {
        match self {
            ChildTable::Dense { fanout, slots } => slots[node as usize * fanout + cell as usize],
            ChildTable::Sparse { fanout, map } => {
                map.get(&(node as u64 * fanout + cell)).copied().unwrap_or(NONE)
            }
        }
    }

    fn set(&mut self, node: u32, cell: u64, child: u32) {
        match self {
            ChildTable::Dense { fanout, slots } => slots[node as usize * *fanout + cell as usize] = child,
            ChildTable::Sparse { fanout, map } => {
                map.insert(node as u64 * *fanout + cell, child);
            }
        }
    }
}

/// Uniform recursive tree: only depths are kept.
#[derive(Clone, Debug, Default)]
pub struct RecursiveGrower {
    depths: Vec<u32>,
}

impl RecursiveGrower {
    #[inline]
    fn insert(&mut self, rng: &mut TreeRng, emit: &mut impl FnMut(u32)) {
        let i = self.depths.len();
        let d = if i == 0 {
            0
        } else {
            self.depths[rng.random_range(0..i)] + 1
        };
        self.depths.push(d);
        emit(d);
    }
}

/// Plane-oriented recursive tree via gaps: a node with `c` children owns
/// `c + 1` gaps, so a uniform gap selects a parent with probability
/// proportional to outdegree + 1.
#[derive(Clone, Debug, Default)]
pub struct PortGrower {
    /// Depth of the parent owning each gap.
    gaps: Vec<u32>,
    nodes: usize,
}

impl PortGrower {
    #[inline]
    fn insert(&mut self, rng: &mut TreeRng, emit: &mut impl FnMut(u32)) {
        let d = if self.nodes == 0 {
            self.gaps.push(0);
            0
        } else {
            let parent = self.gaps[rng.random_range(0..self.gaps.len())];
            self.gaps.push(parent);
            self.gaps.push(parent + 1);
            parent + 1
        };
        self.nodes += 1;
        debug_assert_eq!(self.gaps.len(), 2 * self.nodes - 1);
        emit(d);
    }

    pub fn gap_count(&self) -> usize {
        self.gaps.len()
    }
}

/// Point quad tree in `[0,1]^d`; a coordinate equal to the split value goes
/// to the lower cell.
#[derive(Clone, Debug)]
pub struct QuadGrower {
    dim: usize,
    coords: Vec<f64>,
    depth: Vec<u32>,
    children: ChildTable,
    point: Vec<f64>,
}

impl QuadGrower {
    fn new(d: u32) -> Result<Self> {
        if d > MAX_QUAD_DIM {
            return Err(Error::ParameterOutOfRange {
                field: "d",
                reason: format!("quad-tree generation supports d <= {MAX_QUAD_DIM}"),
            });
        }
        Ok(QuadGrower {
            dim: d as usize,
            coords: Vec::new(),
            depth: Vec::new(),
            children: ChildTable::new(1u64 << d),
            point: vec![0.0; d as usize],
        })
    }

    fn push_node(&mut self, depth: u32) -> u32 {
        let id = self.depth.len() as u32;
        self.coords.extend_from_slice(&self.point);
        self.depth.push(depth);
        self.children.add_node();
        id
    }

    fn insert(&mut self, rng: &mut TreeRng, emit: &mut impl FnMut(u32)) {
        for x in self.point.iter_mut() {
            *x = rng.random::<f64>();
        }
        if self.depth.is_empty() {
            self.push_node(0);
            emit(0);
            return;
        }
        let mut node = 0u32;
        loop {
            let base = node as usize * self.dim;
            let mut cell = 0u64;
            for (i, x) in self.point.iter().enumerate() {
                if *x > self.coords[base + i] {
                    cell |= 1 << i;
                }
            }
            let child = self.children.get(node, cell);
            if child == NONE {
                let d = self.depth[node as usize] + 1;
                let id = self.push_node(d);
                self.children.set(node, cell, id);
                emit(d);
                return;
            }
            node = child;
        }
    }
}

#[derive(Clone, Debug)]
struct GridNode {
    depth: u32,
    /// Axis-major points while filling, sorted cuts per axis once full.
    cuts: Vec<f64>,
    filled: usize,
}

/// Grid tree: each node stores its first `m - 1` points, whose per-axis order
/// statistics cut the region into `m^d` cells.
#[derive(Clone, Debug)]
pub struct GridGrower {
    m: usize,
    dim: usize,
    nodes: Vec<GridNode>,
    children: ChildTable,
    point: Vec<f64>,
}

impl GridGrower {
    fn new(m: u32, d: u32) -> Result<Self> {
        let fanout = (m as u64)
            .checked_pow(d)
            .filter(|f| *f <= MAX_GRID_FANOUT)
            .ok_or(Error::ParameterOutOfRange {
                field: "d",
                reason: format!("grid fan-out m^d must not exceed {MAX_GRID_FANOUT}"),
            })?;
        Ok(GridGrower {
            m: m as usize,
            dim: d as usize,
            nodes: Vec::new(),
            children: ChildTable::new(fanout),
            point: vec![0.0; d as usize],
        })
    }

    fn capacity(&self) -> usize {
        self.m - 1
    }

    fn new_node(&mut self, depth: u32) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(GridNode {
            depth,
            cuts: vec![0.0; self.dim * self.capacity()],
            filled: 0,
        });
        self.children.add_node();
        id
    }

    fn store_point(&mut self, node: u32) {
        let cap = self.capacity();
        let n = &mut self.nodes[node as usize];
        for (axis, x) in self.point.iter().enumerate() {
            n.cuts[axis * cap + n.filled] = *x;
        }
        n.filled += 1;
        if n.filled == cap {
            for axis in n.cuts.chunks_mut(cap) {
                axis.sort_by(f64::total_cmp);
            }
        }
    }

    fn insert(&mut self, rng: &mut TreeRng, emit: &mut impl FnMut(u32)) {
        for x in self.point.iter_mut() {
            *x = rng.random::<f64>();
        }
        if self.nodes.is_empty() {
            let id = self.new_node(0);
            self.store_point(id);
            emit(0);
            return;
        }
        let cap = self.capacity();
        let mut node = 0u32;
        loop {
            let n = &self.nodes[node as usize];
            if n.filled < cap {
                self.store_point(node);
                return;
            }
            let mut cell = 0u64;
            let mut stride = 1u64;
            for (axis, x) in self.point.iter().enumerate() {
                let cuts = &n.cuts[axis * cap..(axis + 1) * cap];
                cell += cuts.partition_point(|c| c < x) as u64 * stride;
                stride *= self.m as u64;
            }
            let child = self.children.get(node, cell);
            if child == NONE {
                let d = n.depth + 1;
                let id = self.new_node(d);
                self.store_point(id);
                self.children.set(node, cell, id);
                emit(d);
                return;
            }
            node = child;
        }
    }

    fn keys_per_level(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for n in &self.nodes {
            add_at(&mut out, n.depth as usize, n.filled as u64);
        }
        out
    }
}

#[derive(Clone, Debug)]
enum MaryNode {
    Bucket { depth: u32, keys: Vec<f64> },
    Internal { depth: u32, pivots: Vec<f64>, children: Vec<u32> },
}

/// Generalized m-ary search tree. A region's first `m(t+1) - 1` keys wait in a
/// bucket node; when the bucket fills, the keys of rank `t+1, 2(t+1), ...`
/// become pivots and the `t` keys between consecutive pivots seed the `m`
/// children.
#[derive(Clone, Debug)]
pub struct MaryGrower {
    m: usize,
    t: usize,
    nodes: Vec<MaryNode>,
}

impl MaryGrower {
    fn new(m: u32, t: u32) -> Self {
        MaryGrower {
            m: m as usize,
            t: t as usize,
            nodes: Vec::new(),
        }
    }

    fn sample_size(&self) -> usize {
        self.m * (self.t + 1) - 1
    }

    fn bucket(&mut self, depth: u32, keys: Vec<f64>, emit: &mut impl FnMut(u32)) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(MaryNode::Bucket { depth, keys });
        emit(depth);
        id
    }

    fn split_if_full(&mut self, node: u32, emit: &mut impl FnMut(u32)) {
        let s = self.sample_size();
        let (depth, mut keys) = match &mut self.nodes[node as usize] {
            MaryNode::Bucket { depth, keys } if keys.len() == s => (*depth, std::mem::take(keys)),
            _ => return,
        };
        keys.sort_by(f64::total_cmp);
        let step = self.t + 1;
        let pivots: Vec<f64> = (1..self.m).map(|i| keys[i * step - 1]).collect();
        let mut children = vec![NONE; self.m];
        if self.t > 0 {
            for (g, child) in children.iter_mut().enumerate() {
                let group = keys[g * step..g * step + self.t].to_vec();
                *child = self.bucket(depth + 1, group, emit);
            }
        }
        self.nodes[node as usize] = MaryNode::Internal {
            depth,
            pivots,
            children,
        };
    }

    fn insert(&mut self, rng: &mut TreeRng, emit: &mut impl FnMut(u32)) {
        let x: f64 = rng.random();
        if self.nodes.is_empty() {
            let id = self.bucket(0, vec![x], emit);
            self.split_if_full(id, emit);
            return;
        }
        let mut node = 0u32;
        loop {
            match &mut self.nodes[node as usize] {
                MaryNode::Bucket { keys, .. } => {
                    keys.push(x);
                    self.split_if_full(node, emit);
                    return;
                }
                MaryNode::Internal {
                    depth,
                    pivots,
                    children,
                } => {
                    let slot = pivots.partition_point(|p| *p < x);
                    let child = children[slot];
                    if child == NONE {
                        let d = *depth + 1;
                        let id = self.bucket(d, vec![x], emit);
                        if let MaryNode::Internal { children, .. } = &mut self.nodes[node as usize] {
                            children[slot] = id;
                        }
                        self.split_if_full(id, emit);
                        return;
                    }
                    node = child;
                }
            }
        }
    }

    fn keys_per_level(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for n in &self.nodes {
            match n {
                MaryNode::Bucket { depth, keys } => add_at(&mut out, *depth as usize, keys.len() as u64),
                MaryNode::Internal { depth, pivots, .. } => {
                    add_at(&mut out, *depth as usize, pivots.len() as u64)
                }
            }
        }
        out
    }
}

fn add_at(v: &mut Vec<u64>, i: usize, amount: u64) {
    if v.len() <= i {
        v.resize(i + 1, 0);
    }
    v[i] += amount;
}

/// Any incrementally growable family.
#[derive(Clone, Debug)]
pub enum Grower {
    Recursive(RecursiveGrower),
    Port(PortGrower),
    Quad(QuadGrower),
    Grid(GridGrower),
    Mary(MaryGrower),
}

impl Grower {
    pub fn new(model: &TreeModelSpec) -> Result<Self> {
        Ok(match model {
            TreeModelSpec::Recursive => Grower::Recursive(RecursiveGrower::default()),
            TreeModelSpec::Port => Grower::Port(PortGrower::default()),
            TreeModelSpec::Quad { d } => Grower::Quad(QuadGrower::new(*d)?),
            TreeModelSpec::Grid { m, d } => Grower::Grid(GridGrower::new(*m, *d)?),
            TreeModelSpec::Mary { m, t } => Grower::Mary(MaryGrower::new(*m, *t)),
            other => {
                return Err(Error::unsupported(
                    "grow",
                    other,
                    "increasing varieties have no sequential growth rule",
                ))
            }
        })
    }

    /// Inserts one item, calling `emit` with the depth of each new node.
    #[inline]
    pub fn insert(&mut self, rng: &mut TreeRng, mut emit: impl FnMut(u32)) {
        match self {
            Grower::Recursive(g) => g.insert(rng, &mut emit),
            Grower::Port(g) => g.insert(rng, &mut emit),
            Grower::Quad(g) => g.insert(rng, &mut emit),
            Grower::Grid(g) => g.insert(rng, &mut emit),
            Grower::Mary(g) => g.insert(rng, &mut emit),
        }
    }

    /// Keys stored per level for families whose nodes hold several keys.
    pub fn keys_per_level(&self) -> Option<Vec<u64>> {
        match self {
            Grower::Grid(g) => Some(g.keys_per_level()),
            Grower::Mary(g) => Some(g.keys_per_level()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::tree_rng;

    #[test]
    fn port_gap_count_is_two_i_minus_one() {
        let mut g = PortGrower::default();
        let mut rng = tree_rng(1);
        for i in 1..=500 {
            g.insert(&mut rng, &mut |_| {});
            assert_eq!(g.gap_count(), 2 * i - 1);
        }
    }

    #[test]
    fn mary_splits_emit_children() {
        // m = 3, t = 1: sample of 5, pivots at ranks 2 and 4
        let mut g = MaryGrower::new(3, 1);
        let mut rng = tree_rng(3);
        let mut depths = Vec::new();
        for _ in 0..5 {
            g.insert(&mut rng, &mut |d| depths.push(d));
        }
        assert_eq!(depths, vec![0, 1, 1, 1]);
        let keys: u64 = g.keys_per_level().iter().sum();
        assert_eq!(keys, 5);
    }

    #[test]
    fn grid_root_collects_points() {
        let mut g = GridGrower::new(4, 2).unwrap();
        let mut rng = tree_rng(5);
        let mut depths = Vec::new();
        for _ in 0..3 {
            g.insert(&mut rng, &mut |d| depths.push(d));
        }
        assert_eq!(depths, vec![0]);
        g.insert(&mut rng, &mut |d| depths.push(d));
        assert_eq!(depths, vec![0, 1]);
    }

    #[test]
    fn sparse_child_table_round_trip() {
        let mut t = ChildTable::new(1 << 20);
        t.add_node();
        assert_eq!(t.get(0, 12345), NONE);
        t.set(0, 12345, 7);
        assert_eq!(t.get(0, 12345), 7);
    }

    #[test]
    fn binary_quad_first_subtree_is_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        const N: usize = 64;
        const TREES: usize = 64_000;
        let mut freq = [0u64; N];
        let mut rng = tree_rng(64);
        for _ in 0..TREES {
            let mut g = QuadGrower::new(1).unwrap();
            for _ in 0..N {
                g.insert(&mut rng, &mut |_| {});
            }
            let root = g.coords[0];
            freq[g.coords[1..].iter().filter(|&&x| x <= root).count()] += 1;
        }
        let expected = TREES as f64 / N as f64;
        let stat: f64 = freq.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((N - 1) as f64).unwrap().cdf(stat);
        assert!(p > 1e-3, "chi-square {stat}, p = {p}");
    }
}
