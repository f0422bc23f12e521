use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

/// Inverted dropout. The mask is a pure function of `rng_seed`, so a
/// forward pass can be replayed exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub rate: f64,
    pub rng_seed: u64,
}

impl DropoutSpec {
    pub fn new(rate: f64, rng_seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate {rate} not in [0, 1)")));
        }
        Ok(DropoutSpec { rate, rng_seed })
    }

    /// Per-element multipliers: 0 for dropped units, 1/(1-rate) for kept.
    pub fn mask(&self, len: usize) -> Vec<f64> {
        let keep = 1.0 / (1.0 - self.rate);
        let mut rng = rng_from(self.rng_seed, &[]);
        (0..len)
            .map(|_| {
                if rng.random::<f64>() < self.rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct ForwardCache {
    input: Matrix,
    /// Post-activation, pre-dropout output (ReLU derivative is read off it).
    activated: Matrix,
    mask: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Matrix,
}

/// Fully connected layer `y = act(x·W + b)` with `W` stored `in × out`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    weights: Matrix,
    bias: Matrix,
    activation: Activation,
    cache: Option<ForwardCache>,
}

impl PartialEq for DenseLayer {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
            && self.bias == other.bias
            && self.activation == other.activation
    }
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Matrix, activation: Activation) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weights.cols() {
            return Err(Error::shape(format!(
                "bias {}x{} does not match weights {}x{}",
                bias.rows(),
                bias.cols(),
                weights.rows(),
                weights.cols()
            )));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
            cache: None,
        })
    }

    /// He-uniform weights for ReLU layers, Xavier-uniform otherwise; zero bias.
    pub fn init<R: Rng>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = match activation {
            Activation::Relu => (6.0 / in_dim as f64).sqrt(),
            Activation::Identity => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let data = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        DenseLayer {
            weights: Matrix::from_vec(in_dim, out_dim, data).expect("dims"),
            bias: Matrix::zeros(1, out_dim),
            activation,
            cache: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &Matrix {
        &self.bias
    }

    pub fn params_mut(&mut self) -> [&mut Matrix; 2] {
        [&mut self.weights, &mut self.bias]
    }

    fn affine(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape(format!(
                "layer expects {} input features, got {}",
                self.in_dim(),
                input.cols()
            )));
        }
        let mut out = input.matmul(&self.weights)?;
        let b = self.bias.row(0);
        let act = self.activation;
        for r in 0..out.rows() {
            for (v, &bb) in out.row_mut(r).iter_mut().zip(b) {
                *v = act.apply(*v + bb);
            }
        }
        Ok(out)
    }

    /// Inference pass: no dropout, no cache.
    pub fn infer(&self, input: &Matrix) -> Result<Matrix> {
        self.affine(input)
    }

    /// Forward pass that caches what `backward` needs. Dropout is applied
    /// only when `training` is set and a spec is given.
    pub fn forward(
        &mut self,
        input: &Matrix,
        dropout: Option<DropoutSpec>,
        training: bool,
    ) -> Result<Matrix> {
        let activated = self.affine(input)?;
        let mask = match dropout {
            Some(d) if training && d.rate > 0.0 => Some(d.mask(activated.data().len())),
            _ => None,
        };
        let mut out = activated.clone();
        if let Some(m) = &mask {
            for (v, &k) in out.data_mut().iter_mut().zip(m) {
                *v *= k;
            }
        }
        self.cache = Some(ForwardCache {
            input: input.clone(),
            activated,
            mask,
        });
        Ok(out)
    }

    /// Gradients for the most recent `forward` call.
    pub fn backward(&self, upstream: &Matrix) -> Result<(LayerGrads, Matrix)> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        if upstream.shape() != cache.activated.shape() {
            return Err(Error::shape(format!(
                "upstream gradient {}x{} does not match layer output {}x{}",
                upstream.rows(),
                upstream.cols(),
                cache.activated.rows(),
                cache.activated.cols()
            )));
        }
        let mut delta = upstream.clone();
        if let Some(m) = &cache.mask {
            for (g, &k) in delta.data_mut().iter_mut().zip(m) {
                *g *= k;
            }
        }
        if self.activation == Activation::Relu {
            for (g, &a) in delta.data_mut().iter_mut().zip(cache.activated.data()) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let weights = cache.input.matmul_tn(&delta)?;
        let bias = delta.sum_rows();
        let input_grad = delta.matmul_nt(&self.weights)?;
        Ok((LayerGrads { weights, bias }, input_grad))
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
