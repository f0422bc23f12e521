use crate::align::partition_batch;
use crate::dataset::{generate_synthetic, SyntheticSpec};
use crate::encoders::{TowerSpec, TwoTowerModel};
use crate::error::{Error, Result};
use crate::nn::{grad_check, GradCheckConfig, GradCheckReport};
use crate::objective::{composite_loss, LossConfig, StepContext};
use crate::rng::derive_seed;

pub const GRAD_CHECK_TOLERANCE: f64 = 1e-3;

/// Finite-difference check of the full composite step on a small seeded
/// batch: half labelled, half pseudo-labelled, dropout active.
pub fn composite_grad_check(seed: u64, n_pairs: usize, loss: &LossConfig) -> Result<GradCheckReport> {
    const CLASSES: usize = 4;
    if n_pairs < CLASSES {
        return Err(Error::config(format!("grad check needs at least {CLASSES} pairs")));
    }
    let data = generate_synthetic(&SyntheticSpec {
        n_classes: CLASSES,
        pairs_per_class: n_pairs.div_ceil(CLASSES),
        audio_dim: 10,
        visual_dim: 12,
        noise: 0.3,
        correlation: 0.9,
        label_noise_rate: 0.0,
        seed,
    })?;
    let total = data.len();
    let idx: Vec<usize> = (0..n_pairs).map(|i| i * total / n_pairs).collect();
    let batch = data.pairs.select(&idx);
    let spec = |input| TowerSpec::new(input, CLASSES).with_hidden(vec![16, 16]);
    let mut model = TwoTowerModel::init(spec(10), spec(12), derive_seed(seed, &[1]))?;
    let plan = partition_batch(n_pairs, 0.5, derive_seed(seed, &[2]))?;
    let ctx = StepContext {
        n_classes: CLASSES,
        dropout_seed: derive_seed(seed, &[3]),
    };
    let params: Vec<_> = model.params().into_iter().cloned().collect();
    grad_check(
        |p| {
            model.set_params(p)?;
            let out = composite_loss(&mut model, &batch, &plan, loss, &ctx)?;
            model.clear_cache();
            Ok((out.breakdown.total, out.grads))
        },
        &params,
        GRAD_CHECK_TOLERANCE,
        &GradCheckConfig {
            seed,
            ..GradCheckConfig::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_gradients_match() {
        let r = composite_grad_check(7, 8, &LossConfig::default()).unwrap();
        assert!(r.passed, "max relative error {}", r.max_relative_error);
        assert!(r.coords_checked > 100);
    }

    #[test]
    fn too_few_pairs() {
        assert!(composite_grad_check(7, 3, &LossConfig::default()).is_err());
    }
}
