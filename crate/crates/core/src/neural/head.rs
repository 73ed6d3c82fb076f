//! Per-token projection to label logits followed by pooling over real tokens.

use super::Pooling;

/// Pools per-token logits (`T × N`) into one logit per label.
///
/// `attention` holds the per-token weights (already softmaxed) and is only
/// read for [`Pooling::Attention`].
pub fn pool(kind: Pooling, logits: &[Vec<f64>], attention: Option<&[f64]>) -> Vec<f64> {
    let n = logits[0].len();
    match kind {
        Pooling::Max => (0..n)
            .map(|k| logits.iter().map(|z| z[k]).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
        Pooling::Mean => {
            let t = logits.len() as f64;
            (0..n).map(|k| logits.iter().map(|z| z[k]).sum::<f64>() / t).collect()
        }
        Pooling::Attention => {
            let a = attention.expect("attention weights required for attention pooling");
            (0..n).map(|k| logits.iter().zip(a).map(|(z, w)| w * z[k]).sum()).collect()
        }
    }
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Head {
    pub width: usize,
    pub num_labels: usize,
    pub pooling: Pooling,
}

pub(crate) struct HeadCache {
    pub logits: Vec<Vec<f64>>,
    pub attention: Option<Vec<f64>>,
    pub pooled: Vec<f64>,
}

impl Head {
    pub fn num_params(&self) -> usize {
        let attention = if self.pooling == Pooling::Attention { self.width } else { 0 };
        self.num_labels * self.width + self.num_labels + attention
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (w, rest) = p.split_at(self.num_labels * self.width);
        let (b, v) = rest.split_at(self.num_labels);
        (w, b, v)
    }

    pub fn forward(&self, p: &[f64], features: &[Vec<f64>]) -> HeadCache {
        let (w, b, v) = self.split(p);
        let logits: Vec<Vec<f64>> = features
            .iter()
            .map(|f| {
                (0..self.num_labels)
                    .map(|k| b[k] + dot(&w[k * self.width..(k + 1) * self.width], f))
                    .collect()
            })
            .collect();
        let attention = (self.pooling == Pooling::Attention)
            .then(|| softmax(&features.iter().map(|f| dot(v, f)).collect::<Vec<_>>()));
        let pooled = pool(self.pooling, &logits, attention.as_deref());
        HeadCache {
            logits,
            attention,
            pooled,
        }
    }

    /// Accumulates head parameter gradients into `grad` and returns the
    /// gradient with respect to each token's features.
    pub fn backward(&self, p: &[f64], features: &[Vec<f64>], cache: &HeadCache, dpooled: &[f64], grad: &mut [f64]) -> Vec<Vec<f64>> {
        let (w, _, v) = self.split(p);
        let t_len = features.len();
        let mut dlogits = vec![vec![0.0; self.num_labels]; t_len];
        let mut dfeat = vec![vec![0.0; self.width]; t_len];
        match self.pooling {
            Pooling::Max => {
                for k in 0..self.num_labels {
                    let mut best = 0;
                    for t in 1..t_len {
                        if cache.logits[t][k] > cache.logits[best][k] {
                            best = t;
                        }
                    }
                    dlogits[best][k] = dpooled[k];
                }
            }
            Pooling::Mean => {
                for row in &mut dlogits {
                    for (d, g) in row.iter_mut().zip(dpooled) {
                        *d = g / t_len as f64;
                    }
                }
            }
            Pooling::Attention => {
                let a = cache.attention.as_ref().expect("attention cache");
                let dalpha: Vec<f64> = cache.logits.iter().map(|z| dot(z, dpooled)).collect();
                let mean: f64 = a.iter().zip(&dalpha).map(|(x, y)| x * y).sum();
                let gv = &mut grad[self.num_labels * (self.width + 1)..];
                for t in 0..t_len {
                    for (d, g) in dlogits[t].iter_mut().zip(dpooled) {
                        *d = a[t] * g;
                    }
                    let ds = a[t] * (dalpha[t] - mean);
                    for j in 0..self.width {
                        gv[j] += ds * features[t][j];
                        dfeat[t][j] += ds * v[j];
                    }
                }
            }
        }
        let (gw, rest) = grad.split_at_mut(self.num_labels * self.width);
        let gb = &mut rest[..self.num_labels];
        for t in 0..t_len {
            for k in 0..self.num_labels {
                let dz = dlogits[t][k];
                if dz == 0.0 {
                    continue;
                }
                gb[k] += dz;
                let row = &w[k * self.width..(k + 1) * self.width];
                let grow = &mut gw[k * self.width..(k + 1) * self.width];
                for j in 0..self.width {
                    grow[j] += dz * features[t][j];
                    dfeat[t][j] += dz * row[j];
                }
            }
        }
        dfeat
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += M x` for a row-major `rows × x.len()` matrix.
pub(crate) fn matvec_add(m: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// `out += Mᵀ y` for a row-major `y.len() × out.len()` matrix.
pub(crate) fn matvec_t_add(m: &[f64], y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(&m[r * cols..(r + 1) * cols]) {
            *o += yr * w;
        }
    }
}

/// `G += y xᵀ`.
pub(crate) fn outer_add(g: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        for (gv, xv) in g[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *gv += yr * xv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_token_pooling_identity() {
        let logits = vec![vec![0.3, -1.2, 2.0]];
        for kind in [Pooling::Max, Pooling::Mean, Pooling::Attention] {
            assert_eq!(pool(kind, &logits, Some(&[1.0])), logits[0]);
        }
    }

    #[test]
    fn max_pool_ignores_duplicates() {
        let a = vec![vec![0.1, 0.5], vec![0.4, -0.2]];
        let mut b = a.clone();
        b.push(a[0].clone());
        assert_eq!(pool(Pooling::Max, &a, None), pool(Pooling::Max, &b, None));
    }

    #[test]
    fn softmax_sums_to_one() {
        let s = softmax(&[1000.0, 999.0, -5.0]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(s[0] > s[1] && s[1] > s[2]);
    }
}
