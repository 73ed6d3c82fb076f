use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_labels, SparseExample};
use crate::error::{Error, Result};
use crate::features::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees_per_batch: usize,
    /// Cap on the total number of trees; later batches add nothing once reached.
    pub max_trees: usize,
    pub max_depth: usize,
    /// Fraction of the feature space sampled as split candidates per node.
    pub max_features_fraction: f64,
}

impl ForestConfig {
    fn validate(&self) -> Result<()> {
        if self.trees_per_batch == 0 {
            return Err(Error::InvalidArgument("trees per batch must be at least 1".into()));
        }
        if !(self.max_features_fraction > 0.0 && self.max_features_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "max features fraction must be in (0, 1], got {}",
                self.max_features_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Nonzero per-label positive frequencies of the training rows reaching the leaf.
    Leaf { frequencies: Vec<(u32, f64)> },
}

/// A multi-output CART tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn leaf(&self, x: &SparseVector) -> &[(u32, f64)] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x.get(*feature as usize) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                TreeNode::Leaf { frequencies } => return frequencies,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalForestModel {
    num_labels: usize,
    dim: usize,
    config: ForestConfig,
    trees: Vec<Tree>,
    batches_seen: usize,
}

impl IncrementalForestModel {
    pub fn new(num_labels: usize, dim: usize, config: ForestConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            num_labels,
            dim,
            config,
            trees: Vec::new(),
            batches_seen: 0,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// Grows `trees_per_batch` new trees (capped by `max_trees`) on this batch only.
    pub fn partial_fit(&mut self, batch: &[SparseExample], seed: u64) -> Result<()> {
        check_labels(batch, self.num_labels, self.dim)?;
        let batch_index = self.batches_seen;
        self.batches_seen += 1;
        let room = self.config.max_trees.saturating_sub(self.trees.len());
        let count = room.min(self.config.trees_per_batch);
        if count == 0 || batch.is_empty() {
            return Ok(());
        }
        let columns = Columns::new(batch, self.dim);
        let first = self.trees.len();
        let grown: Vec<Tree> = (0..count)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((batch_index as u64) << 32) | (first + k) as u64);
                grow_tree(batch, &columns, self.num_labels, &self.config, &mut rng)
            })
            .collect();
        self.trees.extend(grown);
        Ok(())
    }

    /// Mean over trees of the leaf label frequencies.
    pub fn score(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if self.trees.is_empty() {
            return Err(Error::NotFitted);
        }
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        let mut out = vec![0.0; self.num_labels];
        for tree in &self.trees {
            for &(l, f) in tree.leaf(x) {
                out[l as usize] += f;
            }
        }
        let n = self.trees.len() as f64;
        for v in &mut out {
            *v /= n;
        }
        Ok(out)
    }
}

/// Column-major view of a batch: for each feature, the rows where it is nonzero.
struct Columns {
    entries: Vec<Vec<(u32, f64)>>,
}

impl Columns {
    fn new(batch: &[SparseExample], dim: usize) -> Self {
        let mut entries = vec![Vec::new(); dim];
        for (r, ex) in batch.iter().enumerate() {
            for (f, v) in ex.features.iter() {
                entries[f].push((r as u32, v));
            }
        }
        Self { entries }
    }
}

fn entropy(pos: f64, n: f64) -> f64 {
    if n <= 0.0 || pos <= 0.0 || pos >= n {
        return 0.0;
    }
    let p = pos / n;
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

struct Builder<'a> {
    batch: &'a [SparseExample],
    columns: &'a Columns,
    num_labels: usize,
    max_depth: usize,
    candidates: usize,
    nodes: Vec<TreeNode>,
    /// Bootstrap multiplicity of each batch row in the current tree.
    weight: Vec<u32>,
    /// Node membership of each batch row during growth.
    node_of: Vec<u32>,
}

fn grow_tree(batch: &[SparseExample], columns: &Columns, num_labels: usize, config: &ForestConfig, rng: &mut ChaCha8Rng) -> Tree {
    let n = batch.len();
    let mut weight = vec![0u32; n];
    for _ in 0..n {
        weight[rng.gen_range(0..n)] += 1;
    }
    let dim = columns.entries.len();
    let candidates = ((config.max_features_fraction * dim as f64).ceil() as usize).clamp(1, dim.max(1));
    let mut b = Builder {
        batch,
        columns,
        num_labels,
        max_depth: config.max_depth,
        candidates,
        nodes: Vec::new(),
        weight,
        node_of: vec![0; n],
    };
    let rows: Vec<u32> = (0..n as u32).filter(|&r| b.weight[r as usize] > 0).collect();
    b.build(rows, 0, rng);
    Tree { nodes: b.nodes }
}

struct Split {
    feature: u32,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn label_counts(&self, rows: &[u32]) -> (Vec<f64>, f64) {
        let mut counts = vec![0.0; self.num_labels];
        let mut total = 0.0;
        for &r in rows {
            let w = self.weight[r as usize] as f64;
            total += w;
            for &l in &self.batch[r as usize].labels {
                counts[l] += w;
            }
        }
        (counts, total)
    }

    fn build(&mut self, rows: Vec<u32>, depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let id = self.nodes.len() as u32;
        let (counts, total) = self.label_counts(&rows);
        let pure = counts.iter().all(|&c| c == 0.0 || c == total);
        let split = if depth >= self.max_depth || pure || rows.len() < 2 {
            None
        } else {
            self.best_split(&rows, id, &counts, total, rng)
        };
        let Some(split) = split else {
            let frequencies = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0.0)
                .map(|(l, &c)| (l as u32, c / total))
                .collect();
            self.nodes.push(TreeNode::Leaf { frequencies });
            return id;
        };
        self.nodes.push(TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&r| self.batch[r as usize].features.get(split.feature as usize) <= split.threshold);
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        if let TreeNode::Split { left: l, right: r, .. } = &mut self.nodes[id as usize] {
            *l = left;
            *r = right;
        }
        id
    }

    fn best_split(&mut self, rows: &[u32], node: u32, counts: &[f64], total: f64, rng: &mut ChaCha8Rng) -> Option<Split> {
        for &r in rows {
            self.node_of[r as usize] = node;
        }
        let parent: f64 = counts.iter().map(|&c| entropy(c, total)).sum();
        let dim = self.columns.entries.len();
        let mut features = sample(rng, dim, self.candidates).into_vec();
        features.sort_unstable();
        let mut best: Option<Split> = None;
        let mut left = vec![0.0; self.num_labels];
        for f in features {
            // Nonzero entries of this feature within the node, plus one
            // pseudo-entry for all rows where it is zero.
            let mut entries: Vec<(f64, Option<u32>)> = self.columns.entries[f]
                .iter()
                .filter(|(r, _)| self.node_of[*r as usize] == node && self.weight[*r as usize] > 0)
                .map(|&(r, v)| (v, Some(r)))
                .collect();
            if entries.is_empty() {
                continue;
            }
            let mut zero_counts = counts.to_vec();
            let mut zero_total = total;
            for &(_, r) in &entries {
                let r = r.unwrap() as usize;
                let w = self.weight[r] as f64;
                zero_total -= w;
                for &l in &self.batch[r].labels {
                    zero_counts[l] -= w;
                }
            }
            if zero_total > 0.0 {
                entries.push((0.0, None));
            }
            entries.sort_by(|a, b| a.0.total_cmp(&b.0));
            left.iter_mut().for_each(|c| *c = 0.0);
            let mut left_total = 0.0;
            for i in 0..entries.len() - 1 {
                match entries[i].1 {
                    Some(r) => {
                        let w = self.weight[r as usize] as f64;
                        left_total += w;
                        for &l in &self.batch[r as usize].labels {
                            left[l] += w;
                        }
                    }
                    None => {
                        left_total += zero_total;
                        for (c, z) in left.iter_mut().zip(&zero_counts) {
                            *c += z;
                        }
                    }
                }
                let (v, next) = (entries[i].0, entries[i + 1].0);
                if next <= v {
                    continue;
                }
                let right_total = total - left_total;
                let children: f64 = left
                    .iter()
                    .zip(counts)
                    .map(|(&lc, &c)| {
                        (left_total * entropy(lc, left_total) + right_total * entropy(c - lc, right_total)) / total
                    })
                    .sum();
                let gain = parent - children;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split {
                        feature: f as u32,
                        threshold: v + (next - v) / 2.0,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Grows the forest batch by batch.
pub fn rf_fit_incremental<'a>(
    batches: impl IntoIterator<Item = &'a [SparseExample]>,
    num_labels: usize,
    dim: usize,
    config: &ForestConfig,
    seed: u64,
) -> Result<IncrementalForestModel> {
    let mut model = IncrementalForestModel::new(num_labels, dim, config.clone())?;
    for batch in batches {
        model.partial_fit(batch, seed)?;
    }
    if model.trees.is_empty() {
        return Err(Error::InvalidArgument("no trees were grown; training data is empty".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(depth: usize) -> ForestConfig {
        ForestConfig {
            trees_per_batch: 10,
            max_trees: 100,
            max_depth: depth,
            max_features_fraction: 1.0,
        }
    }

    fn ex(pairs: Vec<(u32, f64)>, labels: Vec<usize>, dim: usize) -> SparseExample {
        SparseExample {
            features: SparseVector::from_pairs(pairs, dim).unwrap(),
            labels,
        }
    }

    #[test]
    fn always_present_label_is_single_leaf() {
        let data: Vec<_> = (0..10).map(|i| ex(vec![(i % 3, 1.0)], vec![0], 3)).collect();
        let m = rf_fit_incremental([data.as_slice()], 1, 3, &cfg(4), 1).unwrap();
        for t in m.trees() {
            assert_eq!(t.nodes, vec![TreeNode::Leaf { frequencies: vec![(0, 1.0)] }]);
        }
        assert_eq!(m.score(&SparseVector::empty(3)).unwrap(), [1.0]);
    }

    #[test]
    fn xor_is_learned_with_depth_two() {
        // Label 0 = XOR of binary features 0 and 1, replicated so bootstrap
        // samples almost surely contain every corner.
        let mut data = Vec::new();
        for _ in 0..25 {
            for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                let labels = if (a == 1.0) != (b == 1.0) { vec![0] } else { vec![] };
                data.push(ex(vec![(0, a), (1, b)], labels, 2));
            }
        }
        let m = rf_fit_incremental([data.as_slice()], 1, 2, &cfg(2), 3).unwrap();
        let correct = data
            .iter()
            .filter(|e| (m.score(&e.features).unwrap()[0] >= 0.5) == e.labels.contains(&0))
            .count();
        assert!(correct as f64 / data.len() as f64 > 0.95);
        assert!(m.trees().iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn depth_bound_and_score_range() {
        let data: Vec<_> = (0..60u32)
            .map(|i| ex(vec![(i % 7, 1.0 + (i % 4) as f64), ((i * 3) % 11, 1.0)], vec![(i % 3) as usize], 11))
            .collect();
        let config = ForestConfig {
            trees_per_batch: 3,
            max_trees: 7,
            max_depth: 3,
            max_features_fraction: 0.3,
        };
        let batches: Vec<&[SparseExample]> = data.chunks(20).collect();
        let m = rf_fit_incremental(batches, 3, 11, &config, 5).unwrap();
        assert_eq!(m.trees().len(), 7);
        assert!(m.trees().iter().all(|t| t.depth() <= 3));
        for e in &data {
            assert!(m.score(&e.features).unwrap().iter().all(|s| (0.0..=1.0).contains(s)));
        }
        let again = rf_fit_incremental(data.chunks(20), 3, 11, &config, 5).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn invalid_config() {
        let mut c = cfg(3);
        c.trees_per_batch = 0;
        assert!(IncrementalForestModel::new(1, 2, c).is_err());
    }
}
