/// Probabilities are clamped to `[ε, 1 − ε]` before taking logs.
pub const BCE_EPSILON: f64 = 1e-7;

/// Mean binary cross-entropy over labels.
pub fn bce_loss(probabilities: &[f64], targets: &[f64]) -> f64 {
    let n = probabilities.len() as f64;
    probabilities
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

/// Gradient of [`bce_loss`] of `sigmoid(logits)` with respect to the logits;
/// zero where the clamp is active.
pub fn bce_logit_gradient(probabilities: &[f64], targets: &[f64]) -> Vec<f64> {
    let n = probabilities.len() as f64;
    probabilities
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            if !(BCE_EPSILON..=1.0 - BCE_EPSILON).contains(&p) {
                0.0
            } else {
                (p - y) / n
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions_near_zero() {
        assert!(bce_loss(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]) <= 1.2e-7);
    }

    #[test]
    fn half_is_ln_two() {
        for t in [[0.0, 1.0], [1.0, 1.0], [0.0, 0.0]] {
            assert!((bce_loss(&[0.5, 0.5], &t) - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn matches_direct_formula(ps in prop::collection::vec((1e-6f64..1.0 - 1e-6, any::<bool>()), 1..20)) {
            let p: Vec<f64> = ps.iter().map(|x| x.0).collect();
            let y: Vec<f64> = ps.iter().map(|x| if x.1 { 1.0 } else { 0.0 }).collect();
            let mut direct = 0.0;
            for i in 0..p.len() {
                direct += if y[i] == 1.0 { -p[i].ln() } else { -(1.0 - p[i]).ln() };
            }
            direct /= p.len() as f64;
            let got = bce_loss(&p, &y);
            prop_assert!(got >= 0.0);
            prop_assert!((got - direct).abs() <= 1e-12);
        }
    }
}
