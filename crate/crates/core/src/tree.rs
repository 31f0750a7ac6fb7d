//! Regression trees over time-covariate space, grown by exact minimization of
//! the likelihood risk.
//!
//! For a candidate region `A` and current log-hazard `F`, the statistics
//!
//! ```text
//! U(A) = (1/n) sum_i  integral of exp(F(t, X_i(t))) over the time X_i spends in A
//! V(A) = (1/n) sum_i  Delta_i * 1[(T_i, X_i(T_i)) in A]
//! ```
//!
//! determine everything: subtracting a constant `gamma` on `A` changes the
//! risk by `exp(-gamma) U + gamma V`, minimized at `gamma = log(U / V)`, and
//! replacing one optimally valued leaf by two changes the risk by the split
//! score returned from [`split_score`].

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{Dataset, Schema};
use crate::error::{Error, Result};
use crate::exposure::ExposureTable;
use crate::grid::{AxisCuts, SplitCandidateGrid};
use crate::numeric::CompensatedSum;

/// Pieces per histogram chunk. Fixed so the reduction order, and therefore
/// the result, does not depend on the number of worker threads.
const HISTOGRAM_CHUNK: usize = 8192;

/// Split axis: time is axis 0, covariate `j` is axis `j + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Time,
    Covariate(usize),
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::Time => 0,
            Axis::Covariate(j) => j + 1,
        }
    }

    pub fn from_index(index: usize) -> Self {
        if index == 0 {
            Axis::Time
        } else {
            Axis::Covariate(index - 1)
        }
    }

    #[inline]
    fn coordinate(self, t: f64, x: &[f64]) -> f64 {
        match self {
            Axis::Time => t,
            Axis::Covariate(j) => x[j],
        }
    }
}

/// How a split partitions its parent region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    /// `coordinate <= value` goes left; `cut` is the threshold's index in the grid.
    Threshold { value: f64, cut: usize },
    /// Readings equal to this label code go left, all others right.
    Label(usize),
}

impl SplitRule {
    fn order_key(&self) -> usize {
        match *self {
            SplitRule::Threshold { cut, .. } => cut,
            SplitRule::Label(label) => label,
        }
    }
}

/// Left-open, right-closed interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ALL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        self.lo < v && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovariateBound {
    Interval(Interval),
    /// Admissible label codes.
    Labels(Vec<bool>),
}

/// Axis-aligned region of time-covariate space; the support of a leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeCovariateCube {
    pub time: Interval,
    pub covariates: Vec<CovariateBound>,
}

impl TimeCovariateCube {
    /// The whole space for the axes described by `grid`.
    pub fn everything(grid: &SplitCandidateGrid) -> Self {
        Self {
            time: Interval::ALL,
            covariates: grid
                .covariates
                .iter()
                .map(|axis| match axis {
                    AxisCuts::Continuous(_) => CovariateBound::Interval(Interval::ALL),
                    AxisCuts::Categorical(n) => CovariateBound::Labels(vec![true; *n]),
                })
                .collect(),
        }
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        self.time.contains(t)
            && self.covariates.iter().zip(x).all(|(bound, &v)| match bound {
                CovariateBound::Interval(iv) => iv.contains(v),
                CovariateBound::Labels(ok) => {
                    v >= 0.0 && (v as usize) < ok.len() && ok[v as usize]
                }
            })
    }

    /// Restricts the time interval; convenient for building test regions.
    pub fn with_time(mut self, time: Interval) -> Self {
        self.time = time;
        self
    }

    pub fn with_covariate(mut self, j: usize, bound: CovariateBound) -> Self {
        self.covariates[j] = bound;
        self
    }

    /// The two halves produced by a split.
    pub fn split(&self, axis: Axis, rule: SplitRule) -> (Self, Self) {
        let mut left = self.clone();
        let mut right = self.clone();
        match rule {
            SplitRule::Threshold { value, .. } => {
                let (l, r) = match axis {
                    Axis::Time => (&mut left.time, &mut right.time),
                    Axis::Covariate(j) => match (&mut left.covariates[j], &mut right.covariates[j]) {
                        (CovariateBound::Interval(l), CovariateBound::Interval(r)) => (l, r),
                        _ => panic!("threshold split on a categorical axis"),
                    },
                };
                l.hi = value;
                r.lo = value;
            }
            SplitRule::Label(label) => {
                let Axis::Covariate(j) = axis else {
                    panic!("label split on the time axis");
                };
                match (&mut left.covariates[j], &mut right.covariates[j]) {
                    (CovariateBound::Labels(l), CovariateBound::Labels(r)) => {
                        l.iter_mut().enumerate().for_each(|(k, ok)| *ok = *ok && k == label);
                        r[label] = false;
                    }
                    _ => panic!("label split on a continuous axis"),
                }
            }
        }
        (left, right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        region: TimeCovariateCube,
    },
    Split {
        axis: Axis,
        rule: SplitRule,
        /// Risk change `d` recorded when the split was accepted.
        score: f64,
        left: usize,
        right: usize,
    },
}

/// One fitted tree `g(t, x)`, stored as an arena rooted at node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// The identically zero tree.
    pub fn zero(grid: &SplitCandidateGrid) -> Self {
        Self {
            nodes: vec![Node::Leaf {
                value: 0.0,
                region: TimeCovariateCube::everything(grid),
            }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.nodes.as_slice(), [Node::Leaf { value, .. }] if *value == 0.0)
    }

    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&TimeCovariateCube, f64)> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, region } => Some((region, *value)),
            Node::Split { .. } => None,
        })
    }

    /// `(axis, score)` of every split.
    pub fn splits(&self) -> impl Iterator<Item = (Axis, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { axis, score, .. } => Some((*axis, *score)),
            Node::Leaf { .. } => None,
        })
    }

    /// `g(t, x)`.
    pub fn evaluate(&self, t: f64, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { axis, rule, left, right, .. } => {
                    let goes_left = match *rule {
                        SplitRule::Threshold { value, .. } => axis.coordinate(t, x) <= value,
                        SplitRule::Label(label) => axis.coordinate(t, x) == label as f64,
                    };
                    idx = if goes_left { *left } else { *right };
                }
            }
        }
    }

    /// `g` on a piece of an exposure table built with the training grid.
    #[inline]
    pub fn evaluate_binned(&self, row: &[u16]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { axis, rule, left, right, .. } => {
                    let bin = row[axis.index()] as usize;
                    let goes_left = match *rule {
                        SplitRule::Threshold { cut, .. } => bin <= cut,
                        SplitRule::Label(label) => bin == label,
                    };
                    idx = if goes_left { *left } else { *right };
                }
            }
        }
    }

    /// Time thresholds used by this tree.
    pub fn time_thresholds(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split {
                axis: Axis::Time,
                rule: SplitRule::Threshold { value, .. },
                ..
            } => Some(*value),
            _ => None,
        })
    }

    /// Line-oriented preorder text: `node_id,kind,axis,threshold|label,value`.
    ///
    /// `kind` is `leaf`, `split` (threshold) or `label` (categorical
    /// singleton). Leaves carry their value; splits carry their score.
    /// Renumbers the arena in preorder, the layout [`RegressionTree::from_lines`]
    /// produces. Returns the old-to-new id map.
    fn into_preorder(self) -> (Self, Vec<usize>) {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(idx) = stack.pop() {
            order.push(idx);
            if let Node::Split { left, right, .. } = &self.nodes[idx] {
                stack.push(*right);
                stack.push(*left);
            }
        }
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let mut slots: Vec<Option<Node>> = self.nodes.into_iter().map(Some).collect();
        let nodes = order
            .iter()
            .map(|&old| match slots[old].take().expect("each node visited once") {
                Node::Split { axis, rule, score, left, right } => Node::Split {
                    axis,
                    rule,
                    score,
                    left: new_id[left],
                    right: new_id[right],
                },
                leaf => leaf,
            })
            .collect();
        (RegressionTree { nodes }, new_id)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut next_id = 0usize;
        self.write_preorder(0, &mut next_id, &mut out);
        out
    }

    fn write_preorder(&self, idx: usize, next_id: &mut usize, out: &mut String) {
        let id = *next_id;
        *next_id += 1;
        match &self.nodes[idx] {
            Node::Leaf { value, .. } => {
                let _ = writeln!(out, "{id},leaf,,,{value}");
            }
            Node::Split { axis, rule, score, left, right } => {
                match rule {
                    SplitRule::Threshold { value, .. } => {
                        let _ = writeln!(out, "{id},split,{},{value},{score}", axis.index());
                    }
                    SplitRule::Label(label) => {
                        let _ = writeln!(out, "{id},label,{},{label},{score}", axis.index());
                    }
                }
                self.write_preorder(*left, next_id, out);
                self.write_preorder(*right, next_id, out);
            }
        }
    }

    /// Parses [`RegressionTree::to_text`] output. `first_line` is only used
    /// to number errors.
    pub fn from_lines<'a, I>(lines: &mut I, grid: &SplitCandidateGrid, first_line: usize) -> Result<Self>
    where
        I: Iterator<Item = &'a str>,
    {
        let mut tree = RegressionTree { nodes: Vec::new() };
        let mut line_no = first_line;
        tree.read_node(lines, grid, TimeCovariateCube::everything(grid), &mut line_no)?;
        Ok(tree)
    }

    fn read_node<'a, I>(
        &mut self,
        lines: &mut I,
        grid: &SplitCandidateGrid,
        region: TimeCovariateCube,
        line_no: &mut usize,
    ) -> Result<usize>
    where
        I: Iterator<Item = &'a str>,
    {
        let this_line = *line_no;
        let err = |message: String| Error::ModelFormat {
            line: this_line,
            message,
        };
        let line = lines.next().ok_or_else(|| err("unexpected end of tree".into()))?;
        *line_no += 1;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, got `{line}`")));
        }
        let expected_id = self.nodes.len();
        if fields[0].parse::<usize>().ok() != Some(expected_id) {
            return Err(err(format!("expected node id {expected_id}, got `{}`", fields[0])));
        }
        let number = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
        match fields[1] {
            "leaf" => {
                let value = number(fields[4])?;
                self.nodes.push(Node::Leaf { value, region });
                Ok(expected_id)
            }
            kind @ ("split" | "label") => {
                let axis_index: usize = fields[2].parse().map_err(|_| err(format!("bad axis `{}`", fields[2])))?;
                if axis_index >= grid.axis_count() {
                    return Err(err(format!("axis {axis_index} out of range")));
                }
                let axis = Axis::from_index(axis_index);
                let categorical = matches!(
                    axis,
                    Axis::Covariate(j) if matches!(grid.covariates[j], AxisCuts::Categorical(_))
                );
                let rule = if kind == "split" {
                    if categorical {
                        return Err(err("threshold split on categorical axis".into()));
                    }
                    let value = number(fields[3])?;
                    let cut = grid
                        .cut_index(axis_index, value)
                        .ok_or_else(|| err(format!("threshold {value} not in the split grid")))?;
                    SplitRule::Threshold { value, cut }
                } else {
                    if !categorical {
                        return Err(err("label split on continuous axis".into()));
                    }
                    let label: usize = fields[3].parse().map_err(|_| err(format!("bad label `{}`", fields[3])))?;
                    SplitRule::Label(label)
                };
                let score = number(fields[4])?;
                self.nodes.push(Node::Split { axis, rule, score, left: 0, right: 0 });
                let (lr, rr) = region.split(axis, rule);
                let left = self.read_node(lines, grid, lr, line_no)?;
                let right = self.read_node(lines, grid, rr, line_no)?;
                if let Node::Split { left: l, right: r, .. } = &mut self.nodes[expected_id] {
                    *l = left;
                    *r = right;
                }
                Ok(expected_id)
            }
            other => Err(err(format!("unknown node kind `{other}`"))),
        }
    }
}

/// `d` for replacing one optimally valued leaf by two optimally valued halves.
///
/// Callers must ensure all four statistics are positive. Written with each
/// half's log ratio taken relative to the parent's, so equal ratios cancel
/// inside the logarithms rather than between large products.
pub fn split_score(u1: f64, v1: f64, u2: f64, v2: f64) -> f64 {
    debug_assert!(u1 > 0.0 && v1 > 0.0 && u2 > 0.0 && v2 > 0.0);
    let (u, v) = (u1 + u2, v1 + v2);
    v1 * ((u1 * v) / (v1 * u)).ln() + v2 * ((u2 * v) / (v2 * u)).ln()
}

/// Optimal leaf value `log(U / V)`, minimizing `exp(-gamma) U + gamma V`.
pub fn leaf_value(u: f64, v: f64) -> f64 {
    debug_assert!(u > 0.0 && v > 0.0, "leaf value needs positive U and V");
    (u / v).ln()
}

/// Exposure and event statistics of a region.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegionStats {
    pub u: f64,
    pub v: f64,
}

impl RegionStats {
    pub fn admissible(&self) -> bool {
        self.u > 0.0 && self.v > 0.0
    }
}

/// A scored candidate split of one leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitEvaluation {
    /// Arena id of the leaf being split.
    pub leaf: usize,
    pub axis: Axis,
    pub rule: SplitRule,
    pub left: RegionStats,
    pub right: RegionStats,
    pub gamma_left: f64,
    pub gamma_right: f64,
    pub score: f64,
}

impl SplitEvaluation {
    fn new(leaf: usize, axis: Axis, rule: SplitRule, left: RegionStats, right: RegionStats) -> Self {
        Self {
            leaf,
            axis,
            rule,
            left,
            right,
            gamma_left: leaf_value(left.u, left.v),
            gamma_right: leaf_value(right.u, right.v),
            score: split_score(left.u, left.v, right.u, right.v),
        }
    }

    /// Deterministic preference: lower score, then lower axis, then lower
    /// threshold or label.
    fn better_than(&self, other: &SplitEvaluation) -> bool {
        match self.score.total_cmp(&other.score) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => {
                (self.axis.index(), self.rule.order_key()) < (other.axis.index(), other.rule.order_key())
            }
        }
    }
}

/// Which leaves are searched after each accepted split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchScope {
    /// Only the two new leaves; earlier leaves keep their cached best split.
    #[default]
    NewLeaves,
    /// Every leaf, every iteration. Slower; used to check the caching.
    AllLeaves,
}

/// Result of growing one tree.
#[derive(Debug, Clone)]
pub struct GrownTree {
    pub tree: RegressionTree,
    /// Accepted splits in acceptance order.
    pub splits: Vec<SplitEvaluation>,
    /// Statistics of the whole space under the current log-hazard.
    pub root: RegionStats,
    /// Pieces of the training table in each leaf, keyed by leaf arena id.
    leaf_pieces: Vec<(usize, Vec<u32>)>,
}

impl GrownTree {
    /// Sum of accepted split scores.
    pub fn total_score(&self) -> f64 {
        self.splits.iter().map(|s| s.score).sum()
    }

    /// Applies `F <- F - nu g` on the training table's pieces.
    pub fn apply(&self, log_hazard: &mut [f64], nu: f64) {
        for (leaf, pieces) in &self.leaf_pieces {
            let Node::Leaf { value, .. } = self.tree.nodes[*leaf] else {
                unreachable!("leaf id points at a split");
            };
            if value == 0.0 {
                continue;
            }
            for &p in pieces {
                log_hazard[p as usize] -= nu * value;
            }
        }
    }
}

struct Histogram {
    u: Vec<CompensatedSum>,
    v: Vec<u64>,
}

impl Histogram {
    fn zeros(len: usize) -> Self {
        Self {
            u: vec![CompensatedSum::new(); len],
            v: vec![0; len],
        }
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.u.iter_mut().zip(&other.u) {
            a.merge(b);
        }
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            *a += b;
        }
    }
}

struct LeafState {
    node: usize,
    pieces: Vec<u32>,
    best: Option<SplitEvaluation>,
}

/// Split search over a prepared exposure table.
pub struct TreeGrower<'a> {
    table: &'a ExposureTable,
    grid: &'a SplitCandidateGrid,
    /// `exp(F) * duration` per piece.
    weights: Vec<f64>,
    offsets: Vec<usize>,
    bin_counts: Vec<usize>,
    categorical: Vec<bool>,
    inv_n: f64,
}

impl<'a> TreeGrower<'a> {
    pub fn new(table: &'a ExposureTable, grid: &'a SplitCandidateGrid, log_hazard: &[f64]) -> Self {
        assert_eq!(log_hazard.len(), table.len());
        let weights = log_hazard
            .iter()
            .zip(table.durations())
            .map(|(f, dt)| f.exp() * dt)
            .collect();
        let bin_counts = grid.bin_counts();
        let mut offsets = Vec::with_capacity(bin_counts.len());
        let mut acc = 0;
        for &b in &bin_counts {
            offsets.push(acc);
            acc += b;
        }
        let categorical = std::iter::once(false)
            .chain(grid.covariates.iter().map(|a| matches!(a, AxisCuts::Categorical(_))))
            .collect();
        Self {
            table,
            grid,
            weights,
            offsets,
            bin_counts,
            categorical,
            inv_n: 1.0 / table.n_subjects() as f64,
        }
    }

    fn histogram_len(&self) -> usize {
        self.bin_counts.iter().sum()
    }

    fn accumulate(&self, pieces: &[u32]) -> Histogram {
        let mut hist = Histogram::zeros(self.histogram_len());
        let events = self.table.events();
        for &p in pieces {
            let p = p as usize;
            let w = self.weights[p];
            let row = self.table.row(p);
            let ev = events[p];
            for (&bin, &off) in row.iter().zip(&self.offsets) {
                let slot = off + bin as usize;
                hist.u[slot].add(w);
                if ev {
                    hist.v[slot] += 1;
                }
            }
        }
        hist
    }

    fn histogram(&self, pieces: &[u32]) -> Histogram {
        if pieces.len() <= HISTOGRAM_CHUNK {
            return self.accumulate(pieces);
        }
        let partials: Vec<Histogram> = pieces
            .par_chunks(HISTOGRAM_CHUNK)
            .map(|chunk| self.accumulate(chunk))
            .collect();
        let mut iter = partials.into_iter();
        let mut total = iter.next().expect("nonempty");
        for h in iter {
            total.merge(&h);
        }
        total
    }

    fn stats(&self, u: &CompensatedSum, v: u64) -> RegionStats {
        RegionStats {
            u: u.value() * self.inv_n,
            v: v as f64 * self.inv_n,
        }
    }

    /// Whole-region statistics of a set of pieces.
    pub fn region_stats(&self, pieces: &[u32]) -> RegionStats {
        let hist = self.histogram(pieces);
        let mut u = CompensatedSum::new();
        let mut v = 0;
        for b in 0..self.bin_counts[0] {
            u.merge(&hist.u[b]);
            v += hist.v[b];
        }
        self.stats(&u, v)
    }

    fn best_split(&self, leaf: usize, pieces: &[u32]) -> Option<SplitEvaluation> {
        if pieces.is_empty() {
            return None;
        }
        let hist = self.histogram(pieces);
        let mut best: Option<SplitEvaluation> = None;
        let mut consider = |candidate: SplitEvaluation| {
            if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
                best = Some(candidate);
            }
        };
        for axis_index in 0..self.bin_counts.len() {
            let off = self.offsets[axis_index];
            let bins = self.bin_counts[axis_index];
            let u = &hist.u[off..off + bins];
            let v = &hist.v[off..off + bins];
            let axis = Axis::from_index(axis_index);
            if self.categorical[axis_index] {
                for label in 0..bins {
                    if v[label] == 0 {
                        continue;
                    }
                    let mut rest_u = CompensatedSum::new();
                    let mut rest_v = 0;
                    for other in (0..bins).filter(|&o| o != label) {
                        rest_u.merge(&u[other]);
                        rest_v += v[other];
                    }
                    let left = self.stats(&u[label], v[label]);
                    let right = self.stats(&rest_u, rest_v);
                    if left.admissible() && right.admissible() {
                        consider(SplitEvaluation::new(leaf, axis, SplitRule::Label(label), left, right));
                    }
                }
            } else {
                // suffix[k] = sum over bins >= k
                let mut suffix_u = vec![CompensatedSum::new(); bins + 1];
                let mut suffix_v = vec![0u64; bins + 1];
                for b in (0..bins).rev() {
                    suffix_u[b] = suffix_u[b + 1];
                    suffix_u[b].merge(&u[b]);
                    suffix_v[b] = suffix_v[b + 1] + v[b];
                }
                let mut prefix_u = CompensatedSum::new();
                let mut prefix_v = 0u64;
                for cut in 0..bins.saturating_sub(1) {
                    prefix_u.merge(&u[cut]);
                    prefix_v += v[cut];
                    if prefix_v == 0 || suffix_v[cut + 1] == 0 {
                        continue;
                    }
                    let left = self.stats(&prefix_u, prefix_v);
                    let right = self.stats(&suffix_u[cut + 1], suffix_v[cut + 1]);
                    if left.admissible() && right.admissible() {
                        let rule = SplitRule::Threshold {
                            value: self.grid.threshold(axis_index, cut),
                            cut,
                        };
                        consider(SplitEvaluation::new(leaf, axis, rule, left, right));
                    }
                }
            }
        }
        best
    }

    fn goes_left(&self, piece: u32, axis: Axis, rule: SplitRule) -> bool {
        let bin = self.table.bin(piece as usize, axis.index());
        match rule {
            SplitRule::Threshold { cut, .. } => bin <= cut,
            SplitRule::Label(label) => bin == label,
        }
    }

    /// Best-first growth: repeatedly accept the globally best split with a
    /// negative score, at most `max_splits` times.
    pub fn grow(&self, max_splits: usize, scope: SearchScope) -> GrownTree {
        let all: Vec<u32> = (0..self.table.len() as u32).collect();
        let root_stats = self.region_stats(&all);
        let mut nodes = vec![Node::Leaf {
            value: 0.0,
            region: TimeCovariateCube::everything(self.grid),
        }];
        let mut leaves = vec![LeafState {
            node: 0,
            best: self.best_split(0, &all),
            pieces: all,
        }];
        let mut splits = Vec::new();

        for _ in 0..max_splits {
            if scope == SearchScope::AllLeaves && !splits.is_empty() {
                for leaf in leaves.iter_mut() {
                    leaf.best = self.best_split(leaf.node, &leaf.pieces);
                }
            }
            let mut chosen: Option<usize> = None;
            for (k, leaf) in leaves.iter().enumerate() {
                if let Some(candidate) = &leaf.best {
                    let better = match chosen {
                        None => true,
                        Some(c) => candidate.better_than(leaves[c].best.as_ref().expect("chosen has best")),
                    };
                    if better {
                        chosen = Some(k);
                    }
                }
            }
            let Some(k) = chosen else { break };
            let split = leaves[k].best.expect("chosen leaf has a candidate");
            if split.score >= 0.0 {
                break;
            }
            let parent = leaves.swap_remove(k);
            let (left_pieces, right_pieces): (Vec<u32>, Vec<u32>) = parent
                .pieces
                .iter()
                .partition(|&&p| self.goes_left(p, split.axis, split.rule));
            let region = match &nodes[parent.node] {
                Node::Leaf { region, .. } => region.clone(),
                Node::Split { .. } => unreachable!("splitting an internal node"),
            };
            let (left_region, right_region) = region.split(split.axis, split.rule);
            let left_id = nodes.len();
            nodes.push(Node::Leaf {
                value: split.gamma_left,
                region: left_region,
            });
            nodes.push(Node::Leaf {
                value: split.gamma_right,
                region: right_region,
            });
            nodes[parent.node] = Node::Split {
                axis: split.axis,
                rule: split.rule,
                score: split.score,
                left: left_id,
                right: left_id + 1,
            };
            splits.push(split);
            let left_best = self.best_split(left_id, &left_pieces);
            let right_best = self.best_split(left_id + 1, &right_pieces);
            leaves.push(LeafState { node: left_id, pieces: left_pieces, best: left_best });
            leaves.push(LeafState { node: left_id + 1, pieces: right_pieces, best: right_best });
            // keep leaves in creation order so ties between leaves resolve the same way
            leaves.sort_by_key(|l| l.node);
        }

        let (tree, new_id) = RegressionTree { nodes }.into_preorder();
        GrownTree {
            tree,
            splits,
            root: root_stats,
            leaf_pieces: leaves.into_iter().map(|l| (new_id[l.node], l.pieces)).collect(),
        }
    }
}

/// A log-hazard that can be evaluated pointwise.
pub trait LogHazard {
    fn log_hazard(&self, t: f64, x: &[f64]) -> f64;
}

impl<F: Fn(f64, &[f64]) -> f64> LogHazard for F {
    fn log_hazard(&self, t: f64, x: &[f64]) -> f64 {
        self(t, x)
    }
}

fn piece_values(table: &ExposureTable, dataset: &Dataset, log_hazard: &dyn LogHazard) -> Vec<f64> {
    (0..table.len())
        .map(|p| {
            let (i, k) = table.origin(p);
            log_hazard.log_hazard(table.ends()[p], &dataset.samples[i].epochs[k].values)
        })
        .collect()
}

/// Grows one tree against the log-hazard `F_m`, which must be constant
/// between consecutive grid time cuts along every trajectory.
pub fn grow_tree(
    dataset: &Dataset,
    grid: &SplitCandidateGrid,
    log_hazard: &dyn LogHazard,
    max_splits: usize,
) -> GrownTree {
    let table = ExposureTable::new(dataset, grid);
    let values = piece_values(&table, dataset, log_hazard);
    TreeGrower::new(&table, grid, &values).grow(max_splits, SearchScope::NewLeaves)
}

/// Calls `visit(t_end, duration, x)` for every piece of the trajectory on
/// `[0, until)`, cut at `cuts`. `log_hazard` style functions are constant on
/// each piece and are evaluated at its right end.
pub(crate) fn for_each_piece<F>(sample_epochs: &[crate::data::Epoch], cuts: &[f64], until: f64, mut visit: F)
where
    F: FnMut(f64, f64, &[f64]),
{
    for epoch in sample_epochs {
        if epoch.start >= until {
            break;
        }
        let end = epoch.end.min(until);
        let mut start = epoch.start;
        let first = cuts.partition_point(|&c| c <= start);
        for stop in cuts[first..]
            .iter()
            .copied()
            .take_while(|&c| c < end)
            .chain(std::iter::once(end))
        {
            if stop > start {
                visit(stop, stop - start, &epoch.values);
                start = stop;
            }
        }
    }
}

/// `(U, V)` of a region computed directly from the trajectories.
///
/// Each epoch is cut at `time_cuts` and at the region's own time bounds,
/// and `exp(F)` times piece length is summed over pieces inside the region.
/// The event point `(T, X(T))` uses the last epoch's readings.
pub fn accumulate_uv(
    region: &TimeCovariateCube,
    dataset: &Dataset,
    log_hazard: &dyn LogHazard,
    time_cuts: &[f64],
) -> RegionStats {
    let mut cuts: Vec<f64> = time_cuts.to_vec();
    cuts.extend([region.time.lo, region.time.hi].into_iter().filter(|c| c.is_finite()));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut u = CompensatedSum::new();
    let mut events = 0usize;
    for sample in &dataset.samples {
        for_each_piece(&sample.epochs, &cuts, sample.followup, |t, dt, x| {
            if region.contains(t, x) {
                u.add(log_hazard.log_hazard(t, x).exp() * dt);
            }
        });
        if sample.event && region.contains(sample.followup, sample.terminal_covariates()) {
            events += 1;
        }
    }
    let n = dataset.n() as f64;
    RegionStats {
        u: u.value() / n,
        v: events as f64 / n,
    }
}

/// Likelihood risk of `F`, integrated exactly over pieces between
/// consecutive `time_cuts`.
pub fn likelihood_risk(dataset: &Dataset, log_hazard: &dyn LogHazard, time_cuts: &[f64]) -> f64 {
    let mut total = CompensatedSum::new();
    for sample in &dataset.samples {
        for_each_piece(&sample.epochs, time_cuts, sample.followup, |t, dt, x| {
            total.add(log_hazard.log_hazard(t, x).exp() * dt);
        });
        if sample.event {
            total.add(-log_hazard.log_hazard(sample.followup, sample.terminal_covariates()));
        }
    }
    total.value() / dataset.n() as f64
}

/// Best singleton-label split of `region` on categorical covariate `j`.
pub fn best_categorical_split(
    region: &TimeCovariateCube,
    dataset: &Dataset,
    log_hazard: &dyn LogHazard,
    time_cuts: &[f64],
    j: usize,
) -> Option<SplitEvaluation> {
    let CovariateBound::Labels(admissible) = &region.covariates[j] else {
        return None;
    };
    let mut best: Option<SplitEvaluation> = None;
    for label in (0..admissible.len()).filter(|&l| admissible[l]) {
        let (left_region, right_region) = region.split(Axis::Covariate(j), SplitRule::Label(label));
        let left = accumulate_uv(&left_region, dataset, log_hazard, time_cuts);
        let right = accumulate_uv(&right_region, dataset, log_hazard, time_cuts);
        if !(left.admissible() && right.admissible()) {
            continue;
        }
        let candidate = SplitEvaluation::new(0, Axis::Covariate(j), SplitRule::Label(label), left, right);
        if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
            best = Some(candidate);
        }
    }
    best
}

/// Column names by axis, time first.
pub fn axis_names(schema: &Schema) -> Vec<String> {
    std::iter::once("time".to_string())
        .chain(schema.columns.iter().map(|c| c.name.clone()))
        .collect()
}
