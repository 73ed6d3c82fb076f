//! Stacked, optionally bidirectional LSTM encoder.

use super::head::{matvec_add, matvec_t_add, outer_add};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LstmEncoder {
    pub input_dim: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub bidirectional: bool,
}

/// Activations of one direction of one layer at one step.
struct Step {
    /// Gates `i, f, g, o` after their nonlinearities, `4H`.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

pub(crate) struct LstmCache {
    /// Inputs of every layer, `layers × T × in`.
    inputs: Vec<Vec<Vec<f64>>>,
    /// `layers × directions × T` steps, indexed by sequence position.
    steps: Vec<Vec<Vec<Step>>>,
    /// Hidden states, same indexing as `steps`.
    hidden: Vec<Vec<Vec<Vec<f64>>>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmEncoder {
    fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    pub fn width(&self) -> usize {
        self.hidden_size * self.directions()
    }

    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.width()
        }
    }

    fn cell_params(&self, l: usize) -> usize {
        let h = self.hidden_size;
        4 * h * (self.layer_in(l) + h + 1)
    }

    fn cell_offset(&self, l: usize, dir: usize) -> usize {
        (0..l).map(|i| self.cell_params(i) * self.directions()).sum::<usize>() + dir * self.cell_params(l)
    }

    pub fn num_params(&self) -> usize {
        self.cell_offset(self.num_layers, 0)
    }

    /// `(offset, len, fan_in)` of every parameter block; biases last within a cell.
    pub fn blocks(&self) -> Vec<(usize, usize, usize)> {
        let h = self.hidden_size;
        let mut out = Vec::new();
        for l in 0..self.num_layers {
            for dir in 0..self.directions() {
                let off = self.cell_offset(l, dir);
                let n_in = self.layer_in(l);
                out.push((off, 4 * h * n_in, h));
                out.push((off + 4 * h * n_in, 4 * h * h, h));
                out.push((off + 4 * h * (n_in + h), 4 * h, h));
            }
        }
        out
    }

    /// Index ranges of forget-gate biases, initialized to one.
    pub fn forget_biases(&self) -> Vec<std::ops::Range<usize>> {
        let h = self.hidden_size;
        let mut out = Vec::new();
        for l in 0..self.num_layers {
            for dir in 0..self.directions() {
                let b = self.cell_offset(l, dir) + 4 * h * (self.layer_in(l) + h);
                out.push(b + h..b + 2 * h);
            }
        }
        out
    }

    fn cell<'a>(&self, p: &'a [f64], l: usize, dir: usize) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let h = self.hidden_size;
        let off = self.cell_offset(l, dir);
        let n_in = self.layer_in(l);
        let (w, rest) = p[off..off + self.cell_params(l)].split_at(4 * h * n_in);
        let (u, b) = rest.split_at(4 * h * h);
        (w, u, b)
    }

    pub fn forward(&self, p: &[f64], xs: &[&[f64]]) -> (Vec<Vec<f64>>, LstmCache) {
        let h = self.hidden_size;
        let t_len = xs.len();
        let mut layer_input: Vec<Vec<f64>> = xs.iter().map(|x| x.to_vec()).collect();
        let mut inputs = Vec::new();
        let mut steps = Vec::new();
        let mut hidden = Vec::new();
        for l in 0..self.num_layers {
            let mut out = vec![vec![0.0; self.width()]; t_len];
            let mut layer_steps = Vec::new();
            let mut layer_hidden = Vec::new();
            for dir in 0..self.directions() {
                let (w, u, b) = self.cell(p, l, dir);
                let mut h_prev = vec![0.0; h];
                let mut c_prev = vec![0.0; h];
                let mut dir_steps: Vec<Option<Step>> = (0..t_len).map(|_| None).collect();
                let mut dir_hidden = vec![Vec::new(); t_len];
                let order: Vec<usize> = if dir == 0 { (0..t_len).collect() } else { (0..t_len).rev().collect() };
                for t in order {
                    let mut a = b.to_vec();
                    matvec_add(w, &layer_input[t], &mut a);
                    matvec_add(u, &h_prev, &mut a);
                    let mut gates = vec![0.0; 4 * h];
                    for j in 0..h {
                        gates[j] = sigmoid(a[j]);
                        gates[h + j] = sigmoid(a[h + j]);
                        gates[2 * h + j] = a[2 * h + j].tanh();
                        gates[3 * h + j] = sigmoid(a[3 * h + j]);
                    }
                    let c: Vec<f64> = (0..h).map(|j| gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j]).collect();
                    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
                    let hv: Vec<f64> = (0..h).map(|j| gates[3 * h + j] * tanh_c[j]).collect();
                    out[t][dir * h..(dir + 1) * h].copy_from_slice(&hv);
                    h_prev = hv.clone();
                    c_prev = c.clone();
                    dir_hidden[t] = hv;
                    dir_steps[t] = Some(Step { gates, c, tanh_c });
                }
                layer_steps.push(dir_steps.into_iter().map(|s| s.unwrap()).collect());
                layer_hidden.push(dir_hidden);
            }
            inputs.push(std::mem::replace(&mut layer_input, out));
            steps.push(layer_steps);
            hidden.push(layer_hidden);
        }
        (layer_input, LstmCache { inputs, steps, hidden })
    }

    pub fn backward(&self, p: &[f64], cache: &LstmCache, dfeatures: &[Vec<f64>], grad: &mut [f64]) {
        let h = self.hidden_size;
        let t_len = dfeatures.len();
        let mut dout: Vec<Vec<f64>> = dfeatures.to_vec();
        for l in (0..self.num_layers).rev() {
            let n_in = self.layer_in(l);
            let mut dinput = vec![vec![0.0; n_in]; t_len];
            for dir in 0..self.directions() {
                let (w, u, _) = self.cell(p, l, dir);
                let off = self.cell_offset(l, dir);
                let steps = &cache.steps[l][dir];
                let hidden = &cache.hidden[l][dir];
                let mut dh_next = vec![0.0; h];
                let mut dc_next = vec![0.0; h];
                // Reverse of the processing order.
                let order: Vec<usize> = if dir == 0 { (0..t_len).rev().collect() } else { (0..t_len).collect() };
                for (k, &t) in order.iter().enumerate() {
                    // The step processed just before `t`, if any.
                    let prev = order.get(k + 1).copied();
                    let s = &steps[t];
                    let zeros = vec![0.0; h];
                    let (h_prev, c_prev) = match prev {
                        Some(q) => (&hidden[q], &steps[q].c),
                        None => (&zeros, &zeros),
                    };
                    let mut da = vec![0.0; 4 * h];
                    let mut dc_prev = vec![0.0; h];
                    for j in 0..h {
                        let dh = dout[t][dir * h + j] + dh_next[j];
                        let (i, f, g, o) = (s.gates[j], s.gates[h + j], s.gates[2 * h + j], s.gates[3 * h + j]);
                        let dc = dh * o * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_next[j];
                        da[j] = dc * g * i * (1.0 - i);
                        da[h + j] = dc * c_prev[j] * f * (1.0 - f);
                        da[2 * h + j] = dc * i * (1.0 - g * g);
                        da[3 * h + j] = dh * s.tanh_c[j] * o * (1.0 - o);
                        dc_prev[j] = dc * f;
                    }
                    {
                        let cell = &mut grad[off..off + self.cell_params(l)];
                        let (gw, rest) = cell.split_at_mut(4 * h * n_in);
                        let (gu, gb) = rest.split_at_mut(4 * h * h);
                        outer_add(gw, &da, &cache.inputs[l][t]);
                        outer_add(gu, &da, h_prev);
                        for (g, d) in gb.iter_mut().zip(&da) {
                            *g += d;
                        }
                    }
                    matvec_t_add(w, &da, &mut dinput[t]);
                    let mut dh_prev = vec![0.0; h];
                    matvec_t_add(u, &da, &mut dh_prev);
                    dh_next = dh_prev;
                    dc_next = dc_prev;
                }
            }
            dout = dinput;
        }
    }
}
