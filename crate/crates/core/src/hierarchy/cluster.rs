use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Complete,
    #[default]
    Average,
}

/// One agglomeration step. Leaves are clusters `0..n`; the cluster created
/// by merge `k` has id `n + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Relative tolerance under which two linkage distances count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Bottom-up clustering of `rows` under Euclidean distance. At each step the
/// closest pair of clusters merges; ties go to the lexicographically
/// smallest `(id, id)` pair.
pub fn agglomerate(rows: &[Vec<f64>], labels: Vec<String>, linkage: Linkage) -> Result<Dendrogram> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidArgument("clustering needs at least two rows".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let total = 2 * n - 1;
    let mut dist = vec![f64::NAN; total * total];
    for i in 0..n {
        for j in 0..n {
            dist[i * total + j] = euclidean(&rows[i], &rows[j]);
        }
    }
    let mut size = vec![0usize; total];
    size[..n].fill(1);
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let d = dist[a * total + b];
                let better = match best {
                    None => true,
                    Some((bd, _, _)) => d < bd - TIE_TOLERANCE * bd.abs().max(d.abs()),
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (height, a, b) = best.expect("at least two active clusters");
        let id = n + k;
        size[id] = size[a] + size[b];
        active.retain(|&c| c != a && c != b);
        for &c in &active {
            let (da, db) = (dist[a * total + c], dist[b * total + c]);
            let d = match linkage {
                Linkage::Single => da.min(db),
                Linkage::Complete => da.max(db),
                Linkage::Average => (size[a] as f64 * da + size[b] as f64 * db) / size[id] as f64,
            };
            dist[id * total + c] = d;
            dist[c * total + id] = d;
        }
        active.push(id);
        merges.push(Merge {
            left: a,
            right: b,
            height,
            size: size[id],
        });
    }
    Ok(Dendrogram { leaves: labels, merges })
}

impl Dendrogram {
    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn root(&self) -> usize {
        2 * self.num_leaves() - 2
    }

    pub fn height(&self, node: usize) -> f64 {
        if node < self.num_leaves() {
            0.0
        } else {
            self.merges[node - self.num_leaves()].height
        }
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        (node >= self.num_leaves()).then(|| {
            let m = &self.merges[node - self.num_leaves()];
            (m.left, m.right)
        })
    }

    /// Sorted leaf indices under `node`.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                Some((l, r)) => stack.extend([l, r]),
                None => out.push(x),
            }
        }
        out.sort_unstable();
        out
    }

    /// Leaf sets on the two sides of the final merge.
    pub fn top_split(&self) -> (Vec<usize>, Vec<usize>) {
        let (l, r) = self.children(self.root()).expect("root is internal");
        (self.members(l), self.members(r))
    }

    /// Nested `{id, name, height}` leaves and `{id, height, children}` nodes.
    pub fn to_json(&self) -> Value {
        self.node_json(self.root())
    }

    fn node_json(&self, node: usize) -> Value {
        match self.children(node) {
            None => json!({"id": node, "name": self.leaves[node], "height": 0.0}),
            Some((l, r)) => json!({
                "id": node,
                "height": self.height(node),
                "size": self.merges[node - self.num_leaves()].size,
                "children": [self.node_json(l), self.node_json(r)],
            }),
        }
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        fn count_leaves(v: &Value) -> Result<usize> {
            match v.get("children").and_then(Value::as_array) {
                Some(c) if c.len() == 2 => Ok(count_leaves(&c[0])? + count_leaves(&c[1])?),
                Some(_) => Err(Error::InvalidArgument("dendrogram nodes need exactly two children".into())),
                None => Ok(1),
            }
        }
        fn walk(v: &Value, leaves: &mut [Option<String>], merges: &mut [Option<Merge>]) -> Result<usize> {
            let bad = |m: &str| Error::InvalidArgument(format!("invalid dendrogram node: {m}"));
            let id = v.get("id").and_then(Value::as_u64).ok_or_else(|| bad("missing id"))? as usize;
            let n = leaves.len();
            match v.get("children").and_then(Value::as_array) {
                None => {
                    let name = v.get("name").and_then(Value::as_str).ok_or_else(|| bad("leaf without name"))?;
                    let slot = leaves.get_mut(id).ok_or_else(|| bad("leaf id out of range"))?;
                    if slot.replace(name.to_string()).is_some() {
                        return Err(bad("duplicate leaf id"));
                    }
                    Ok(1)
                }
                Some(c) => {
                    let height = v.get("height").and_then(Value::as_f64).ok_or_else(|| bad("missing height"))?;
                    let left_id = c[0].get("id").and_then(Value::as_u64).ok_or_else(|| bad("child without id"))? as usize;
                    let right_id = c[1].get("id").and_then(Value::as_u64).ok_or_else(|| bad("child without id"))? as usize;
                    let size = walk(&c[0], leaves, merges)? + walk(&c[1], leaves, merges)?;
                    let slot = id
                        .checked_sub(n)
                        .and_then(|k| merges.get_mut(k))
                        .ok_or_else(|| bad("internal id out of range"))?;
                    let merge = Merge {
                        left: left_id,
                        right: right_id,
                        height,
                        size,
                    };
                    if slot.replace(merge).is_some() {
                        return Err(bad("duplicate internal id"));
                    }
                    Ok(size)
                }
            }
        }
        let n = count_leaves(value)?;
        if n < 2 {
            return Err(Error::InvalidArgument("dendrogram needs at least two leaves".into()));
        }
        let mut leaves = vec![None; n];
        let mut merges = vec![None; n - 1];
        walk(value, &mut leaves, &mut merges)?;
        Ok(Self {
            leaves: leaves.into_iter().map(|l| l.expect("every leaf visited")).collect(),
            merges: merges.into_iter().map(|m| m.expect("every merge visited")).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("e{i}")).collect()
    }

    fn identity(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
    }

    #[test]
    fn two_rows_single_merge() {
        let d = agglomerate(&[vec![0.0, 0.0], vec![3.0, 4.0]], names(2), Linkage::Average).unwrap();
        assert_eq!(d.merges, vec![Merge { left: 0, right: 1, height: 5.0, size: 2 }]);
    }

    #[test]
    fn identity_merge_sequence() {
        let d = agglomerate(&identity(5), names(5), Linkage::Average).unwrap();
        let pairs: Vec<(usize, usize)> = d.merges.iter().map(|m| (m.left, m.right)).collect();
        assert_eq!(pairs, [(0, 1), (2, 3), (4, 5), (6, 7)]);
        assert!(d.merges.iter().all(|m| (m.height - 2f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn planted_blocks_split_at_top() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = Vec::new();
        for block in 0..2 {
            for _ in 0..5 {
                let mut r = vec![0.0; 4];
                r[block] = 1.0;
                r[2 + block] = rng.gen_range(0.0..0.05);
                rows.push(r);
            }
        }
        let mut order: Vec<usize> = (0..10).collect();
        order.shuffle(&mut rng);
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
        let d = agglomerate(&shuffled, names(10), Linkage::Average).unwrap();
        let (a, b) = d.top_split();
        let block_of = |leaves: &[usize]| leaves.iter().map(|&l| order[l] / 5).collect::<std::collections::BTreeSet<_>>();
        assert_eq!(block_of(&a).len(), 1);
        assert_eq!(block_of(&b).len(), 1);
        assert_eq!(a.len() + b.len(), 10);
    }

    #[test]
    fn heights_monotone_and_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..5).map(|_| rng.gen::<f64>()).collect()).collect();
            for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
                let d = agglomerate(&rows, names(12), linkage).unwrap();
                assert!(d.merges.windows(2).all(|w| w[0].height <= w[1].height + 1e-12));
                let mut perm: Vec<usize> = (0..12).collect();
                perm.shuffle(&mut rng);
                let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
                let p = agglomerate(&permuted, names(12), linkage).unwrap();
                let h1: Vec<f64> = d.merges.iter().map(|m| m.height).collect();
                let h2: Vec<f64> = p.merges.iter().map(|m| m.height).collect();
                for (x, y) in h1.iter().zip(&h2) {
                    assert!((x - y).abs() < 1e-12);
                }
                // Same clusters, expressed in original leaf indices.
                let clusters = |d: &Dendrogram, map: &dyn Fn(usize) -> usize| {
                    let mut v: Vec<Vec<usize>> = (12..23)
                        .map(|node| {
                            let mut m: Vec<usize> = d.members(node).into_iter().map(map).collect();
                            m.sort_unstable();
                            m
                        })
                        .collect();
                    v.sort();
                    v
                };
                assert_eq!(clusters(&d, &|i| i), clusters(&p, &|i| perm[i]));
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..88).map(|_| (0..6).map(|_| rng.gen::<f64>()).collect()).collect();
        let d = agglomerate(&rows, names(88), Linkage::Average).unwrap();
        let text = serde_json::to_string(&d.to_json()).unwrap();
        let back = Dendrogram::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, d);
        let small = agglomerate(&identity(2), names(2), Linkage::Average).unwrap();
        assert_eq!(Dendrogram::from_json(&small.to_json()).unwrap(), small);
    }
}
