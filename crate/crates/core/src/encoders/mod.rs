//! Two-tower model: an audio encoder and a visual encoder that project both
//! modalities into a shared space whose dimension equals the label count.

mod checkpoint;

pub use checkpoint::{
    checkpoint_load, checkpoint_read, checkpoint_save, checkpoint_write, Precision,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, DropoutSpec, LayerGrads, Matrix};
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, PartialEq)]
pub struct TowerSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub dropout_rate: f64,
}

impl TowerSpec {
    /// Three 1024-unit hidden layers with dropout 0.1.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        TowerSpec {
            input_dim,
            hidden_dims: vec![1024, 1024, 1024],
            output_dim,
            dropout_rate: 0.1,
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden_dims = hidden;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("tower input_dim must be positive"));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::config("tower needs at least one nonzero hidden layer"));
        }
        if self.output_dim < 2 {
            return Err(Error::config(format!(
                "tower output_dim must be >= 2, got {}",
                self.output_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!(
                "dropout rate {} not in [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.output_dim);
        d
    }

    pub fn param_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// A stack of ReLU hidden layers (with dropout) and a linear prediction layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    spec: TowerSpec,
    layers: Vec<DenseLayer>,
}

impl Tower {
    fn init(spec: TowerSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from(seed, &[]);
        let dims = spec.dims();
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::init(w[0], w[1], act, &mut rng)
            })
            .collect();
        Ok(Tower { spec, layers })
    }

    pub(crate) fn from_layers(spec: TowerSpec, layers: Vec<DenseLayer>) -> Result<Self> {
        spec.validate()?;
        let dims = spec.dims();
        if layers.len() != dims.len() - 1 {
            return Err(Error::shape("layer count does not match tower spec"));
        }
        for (l, w) in layers.iter().zip(dims.windows(2)) {
            if l.in_dim() != w[0] || l.out_dim() != w[1] {
                return Err(Error::shape("layer dims do not match tower spec"));
            }
        }
        Ok(Tower { spec, layers })
    }

    pub fn spec(&self) -> &TowerSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.infer(&h)?;
        }
        Ok(h)
    }

    fn forward_train(&mut self, x: &Matrix, dropout_seed: u64) -> Result<Matrix> {
        let rate = self.spec.dropout_rate;
        let n = self.layers.len();
        let mut h = x.clone();
        for (i, l) in self.layers.iter_mut().enumerate() {
            let dropout = (i + 1 < n && rate > 0.0).then(|| DropoutSpec {
                rate,
                rng_seed: derive_seed(dropout_seed, &[i as u64]),
            });
            h = l.forward(&h, dropout, true)?;
        }
        Ok(h)
    }

    fn backward(&self, upstream: &Matrix) -> Result<Vec<LayerGrads>> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = upstream.clone();
        for l in self.layers.iter().rev() {
            let (lg, gx) = l.backward(&g)?;
            grads.push(lg);
            g = gx;
        }
        grads.reverse();
        Ok(grads)
    }

    fn clear_cache(&mut self) {
        self.layers.iter_mut().for_each(DenseLayer::clear_cache);
    }
}

/// Paired projections for one batch, both `N × c`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    pub audio: Matrix,
    pub visual: Matrix,
}

impl EmbeddingBatch {
    pub fn new(audio: Matrix, visual: Matrix) -> Result<Self> {
        if audio.shape() != visual.shape() {
            return Err(Error::shape(format!(
                "audio embeddings {:?} vs visual {:?}",
                audio.shape(),
                visual.shape()
            )));
        }
        Ok(EmbeddingBatch { audio, visual })
    }

    pub fn len(&self) -> usize {
        self.audio.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.audio.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.audio.cols()
    }

    pub fn select(&self, idx: &[usize]) -> EmbeddingBatch {
        EmbeddingBatch {
            audio: self.audio.select_rows(idx),
            visual: self.visual.select_rows(idx),
        }
    }

    pub fn zeros_like(&self) -> EmbeddingBatch {
        EmbeddingBatch {
            audio: Matrix::zeros(self.audio.rows(), self.audio.cols()),
            visual: Matrix::zeros(self.visual.rows(), self.visual.cols()),
        }
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, other: &EmbeddingBatch, k: f64) -> Result<()> {
        self.audio.add_scaled(&other.audio, k)?;
        self.visual.add_scaled(&other.visual, k)
    }
}

/// Gradient with respect to an [`EmbeddingBatch`].
pub type EmbeddingGrads = EmbeddingBatch;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTowerModel {
    audio: Tower,
    visual: Tower,
}

impl TwoTowerModel {
    pub fn init(audio_spec: TowerSpec, visual_spec: TowerSpec, seed: u64) -> Result<Self> {
        if audio_spec.output_dim != visual_spec.output_dim {
            return Err(Error::config(format!(
                "tower output dims differ: audio {} vs visual {}",
                audio_spec.output_dim, visual_spec.output_dim
            )));
        }
        Ok(TwoTowerModel {
            audio: Tower::init(audio_spec, derive_seed(seed, &[0]))?,
            visual: Tower::init(visual_spec, derive_seed(seed, &[1]))?,
        })
    }

    pub(crate) fn from_towers(audio: Tower, visual: Tower) -> Result<Self> {
        if audio.spec.output_dim != visual.spec.output_dim {
            return Err(Error::config("tower output dims differ"));
        }
        Ok(TwoTowerModel { audio, visual })
    }

    pub fn audio_tower(&self) -> &Tower {
        &self.audio
    }

    pub fn visual_tower(&self) -> &Tower {
        &self.visual
    }

    pub fn embed_dim(&self) -> usize {
        self.audio.spec.output_dim
    }

    pub fn param_count(&self) -> usize {
        self.audio.spec.param_count() + self.visual.spec.param_count()
    }

    /// Parameter tensors in declaration order: audio layers (weights, bias)
    /// then visual layers.
    pub fn params(&self) -> Vec<&Matrix> {
        self.audio
            .layers
            .iter()
            .chain(&self.visual.layers)
            .flat_map(|l| [l.weights(), l.bias()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.audio
            .layers
            .iter_mut()
            .chain(self.visual.layers.iter_mut())
            .flat_map(|l| l.params_mut())
            .collect()
    }

    /// Overwrite all parameters; shapes must match [`Self::params`].
    pub fn set_params(&mut self, values: &[Matrix]) -> Result<()> {
        let mut slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(Error::shape(format!(
                "expected {} parameter tensors, got {}",
                slots.len(),
                values.len()
            )));
        }
        for (s, v) in slots.iter_mut().zip(values) {
            if s.shape() != v.shape() {
                return Err(Error::shape("parameter shape mismatch"));
            }
            **s = v.clone();
        }
        Ok(())
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in self.params() {
            for v in p.data() {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    fn check_inputs(&self, audio: &Matrix, visual: &Matrix) -> Result<()> {
        if audio.rows() != visual.rows() {
            return Err(Error::shape(format!(
                "{} audio rows vs {} visual rows",
                audio.rows(),
                visual.rows()
            )));
        }
        if audio.cols() != self.audio.spec.input_dim || visual.cols() != self.visual.spec.input_dim
        {
            return Err(Error::shape(format!(
                "feature dims ({}, {}) do not match towers ({}, {})",
                audio.cols(),
                visual.cols(),
                self.audio.spec.input_dim,
                self.visual.spec.input_dim
            )));
        }
        Ok(())
    }

    /// Inference-mode projection (no dropout, no caches). Pure in
    /// `(parameters, input)`.
    pub fn encode(&self, audio: &Matrix, visual: &Matrix) -> Result<EmbeddingBatch> {
        self.check_inputs(audio, visual)?;
        EmbeddingBatch::new(self.audio.infer(audio)?, self.visual.infer(visual)?)
    }

    /// Training-mode projection. Dropout masks derive from `dropout_seed`
    /// and are cached for [`Self::backward`].
    pub fn encode_train(
        &mut self,
        audio: &Matrix,
        visual: &Matrix,
        dropout_seed: u64,
    ) -> Result<EmbeddingBatch> {
        self.check_inputs(audio, visual)?;
        let a = self
            .audio
            .forward_train(audio, derive_seed(dropout_seed, &[0]))?;
        let v = self
            .visual
            .forward_train(visual, derive_seed(dropout_seed, &[1]))?;
        EmbeddingBatch::new(a, v)
    }

    /// Parameter gradients, in [`Self::params`] order, for the last
    /// `encode_train` call.
    pub fn backward(&self, grads: &EmbeddingGrads) -> Result<Vec<Matrix>> {
        let a = self.audio.backward(&grads.audio)?;
        let v = self.visual.backward(&grads.visual)?;
        Ok(a.into_iter()
            .chain(v)
            .flat_map(|g| [g.weights, g.bias])
            .collect())
    }

    pub fn clear_cache(&mut self) {
        self.audio.clear_cache();
        self.visual.clear_cache();
    }
}
