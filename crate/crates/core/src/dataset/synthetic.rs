use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Dataset, DatasetMeta, PairedBatch};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::rng_from;

/// Gaussian-mixture stand-in for extracted audio/visual features.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub pairs_per_class: usize,
    pub audio_dim: usize,
    pub visual_dim: usize,
    /// Per-coordinate noise σ added to both modalities.
    pub noise: f64,
    /// Weight ρ of the class centroid in the visual features; the rest is a
    /// per-pair independent draw.
    pub correlation: f64,
    pub label_noise_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_classes: 10,
            pairs_per_class: 40,
            audio_dim: 128,
            visual_dim: 1024,
            noise: 0.05,
            correlation: 0.9,
            label_noise_rate: 0.0,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.pairs_per_class == 0 {
            return Err(Error::config("synthetic data needs >= 2 classes and >= 1 pair per class"));
        }
        if self.audio_dim == 0 || self.visual_dim == 0 {
            return Err(Error::config("synthetic dims must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("synthetic noise must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return Err(Error::config("cross-modal correlation must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.label_noise_rate) {
            return Err(Error::config("label noise rate must lie in [0, 1)"));
        }
        Ok(())
    }
}

fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Values are rounded to f32 so the AVFD roundtrip is exact.
fn to_f32_grid(v: f64) -> f64 {
    v as f32 as f64
}

/// Reassign `round(rate·n)` labels, chosen uniformly, to a different class
/// drawn uniformly.
pub fn apply_label_noise(labels: &mut [usize], rate: f64, n_classes: usize, seed: u64) {
    let n = labels.len();
    let k = ((rate * n as f64).round() as usize).min(n);
    if k == 0 || n_classes < 2 {
        return;
    }
    let mut rng = rng_from(seed, &[0x1abe1]);
    let mut picked = sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    for i in picked {
        let shift = rng.random_range(1..n_classes);
        labels[i] = (labels[i] + shift) % n_classes;
    }
}

/// Class-major pairs: all of class 0, then class 1, and so on.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let (c, m) = (spec.n_classes, spec.pairs_per_class);
    let n = c * m;
    let mut audio = Matrix::zeros(n, spec.audio_dim);
    let mut visual = Matrix::zeros(n, spec.visual_dim);
    let mut labels = Vec::with_capacity(n);
    let rho = spec.correlation;
    for class in 0..c {
        let mut crng = rng_from(spec.seed, &[0, class as u64]);
        let ca = normal_vec(&mut crng, spec.audio_dim);
        let cv = normal_vec(&mut crng, spec.visual_dim);
        for k in 0..m {
            let i = class * m + k;
            let mut prng = rng_from(spec.seed, &[1, i as u64]);
            for (o, &mu) in audio.row_mut(i).iter_mut().zip(&ca) {
                *o = to_f32_grid(mu + spec.noise * prng.sample::<f64, _>(StandardNormal));
            }
            let indep = normal_vec(&mut prng, spec.visual_dim);
            for ((o, &mu), &z) in visual.row_mut(i).iter_mut().zip(&cv).zip(&indep) {
                let e: f64 = prng.sample(StandardNormal);
                *o = to_f32_grid(rho * mu + (1.0 - rho) * z + spec.noise * e);
            }
            labels.push(class);
        }
    }
    apply_label_noise(&mut labels, spec.label_noise_rate, c, spec.seed);
    Dataset::new(
        DatasetMeta {
            n_pairs: n,
            audio_dim: spec.audio_dim,
            visual_dim: spec.visual_dim,
            n_classes: c,
            class_names: None,
        },
        PairedBatch::new(audio, visual, labels)?,
    )
}
