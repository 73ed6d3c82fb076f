use serde::{Deserialize, Serialize};

/// AdamW moments and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(num_params: usize, learning_rate: f64, epsilon: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            epsilon,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    /// One update; weight decay is applied to the parameters directly,
    /// decoupled from the adaptive step.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - self.learning_rate * self.weight_decay;
        for i in 0..params.len() {
            params[i] *= decay;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}
