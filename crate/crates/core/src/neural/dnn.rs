//! Token-wise feed-forward encoder of the pooled DNN head.

use super::head::{matvec_add, matvec_t_add, outer_add};
use super::Activation;

#[derive(Debug, Clone, Copy)]
pub(crate) struct DnnEncoder {
    pub input_dim: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub activation: Activation,
}

/// Per token, the input followed by every layer's activations.
pub(crate) struct DnnCache {
    layers: Vec<Vec<Vec<f64>>>,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Elu => {
                if a > 0.0 {
                    a
                } else {
                    a.exp_m1()
                }
            }
        }
    }

    /// Derivative expressed through the activation output `h`.
    fn derivative(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Elu => {
                if h > 0.0 {
                    1.0
                } else {
                    h + 1.0
                }
            }
        }
    }
}

impl DnnEncoder {
    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_size
        }
    }

    fn layer_offset(&self, l: usize) -> usize {
        (0..l).map(|i| (self.layer_in(i) + 1) * self.hidden_size).sum()
    }

    pub fn num_params(&self) -> usize {
        self.layer_offset(self.num_layers)
    }

    pub fn width(&self) -> usize {
        self.hidden_size
    }

    /// `(offset, len, fan_in)` of every parameter block, in layout order.
    pub fn blocks(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for l in 0..self.num_layers {
            let (off, fan_in) = (self.layer_offset(l), self.layer_in(l));
            out.push((off, fan_in * self.hidden_size, fan_in));
            out.push((off + fan_in * self.hidden_size, self.hidden_size, fan_in));
        }
        out
    }

    fn layer<'a>(&self, p: &'a [f64], l: usize) -> (&'a [f64], &'a [f64]) {
        let off = self.layer_offset(l);
        let w_len = self.layer_in(l) * self.hidden_size;
        (&p[off..off + w_len], &p[off + w_len..off + w_len + self.hidden_size])
    }

    pub fn forward(&self, p: &[f64], xs: &[&[f64]]) -> (Vec<Vec<f64>>, DnnCache) {
        let mut layers = Vec::with_capacity(xs.len());
        let mut features = Vec::with_capacity(xs.len());
        for x in xs {
            let mut acts = vec![x.to_vec()];
            for l in 0..self.num_layers {
                let (w, b) = self.layer(p, l);
                let mut a = b.to_vec();
                matvec_add(w, acts.last().unwrap(), &mut a);
                acts.push(a.into_iter().map(|v| self.activation.apply(v)).collect());
            }
            features.push(acts.last().unwrap().clone());
            layers.push(acts);
        }
        (features, DnnCache { layers })
    }

    pub fn backward(&self, p: &[f64], cache: &DnnCache, dfeatures: &[Vec<f64>], grad: &mut [f64]) {
        for (acts, df) in cache.layers.iter().zip(dfeatures) {
            let mut dh = df.clone();
            for l in (0..self.num_layers).rev() {
                let h = &acts[l + 1];
                let da: Vec<f64> = dh.iter().zip(h).map(|(d, &hv)| d * self.activation.derivative(hv)).collect();
                let off = self.layer_offset(l);
                let w_len = self.layer_in(l) * self.hidden_size;
                {
                    let (gw, gb) = grad[off..off + w_len + self.hidden_size].split_at_mut(w_len);
                    outer_add(gw, &da, &acts[l]);
                    for (g, d) in gb.iter_mut().zip(&da) {
                        *g += d;
                    }
                }
                if l > 0 {
                    let (w, _) = self.layer(p, l);
                    let mut below = vec![0.0; self.layer_in(l)];
                    matvec_t_add(w, &da, &mut below);
                    dh = below;
                }
            }
        }
    }
}
