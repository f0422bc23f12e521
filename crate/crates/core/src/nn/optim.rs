use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::config(format!("unknown optimizer '{s}'"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl OptimizerState {
    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    /// Adam uses the usual defaults β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(OptimizerState {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::shape(format!(
                    "parameter {i} is {:?} but gradient is {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        if self.kind == OptimizerKind::Adam {
            if self.m.is_empty() {
                self.m = grads.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect();
                self.v = self.m.clone();
            } else if self.m.len() != grads.len()
                || self.m.iter().zip(grads).any(|(m, g)| m.shape() != g.shape())
            {
                return Err(Error::shape("optimizer moments do not match parameters"));
            }
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (x, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *x -= lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let bc1 = 1.0 - b1.powi(self.step as i32);
                let bc2 = 1.0 - b2.powi(self.step as i32);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    let it = p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut().iter_mut().zip(v.data_mut()));
                    for ((x, &d), (mi, vi)) in it {
                        *mi = b1 * *mi + (1.0 - b1) * d;
                        *vi = b2 * *vi + (1.0 - b2) * d * d;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *x -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[[v]]).unwrap()
    }

    #[test]
    fn sgd_step() {
        let mut opt = OptimizerState::sgd(0.1).unwrap();
        let mut p = scalar(1.0);
        opt.apply(&mut [&mut p], &[scalar(0.5)]).unwrap();
        assert!((p.get(0, 0) - 0.95).abs() < 1e-15);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn first_adam_step_closed_form() {
        let mut opt = OptimizerState::adam(1e-4).unwrap();
        let mut p = scalar(1.0);
        opt.apply(&mut [&mut p], &[scalar(0.5)]).unwrap();
        // m̂ = 0.5, v̂ = 0.25, so the step is lr·0.5/(0.5 + ε).
        let expected = 1.0 - 1e-4 * 0.5 / (0.25f64.sqrt() + 1e-8);
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
        assert!((p.get(0, 0) - 0.9999).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut sgd = OptimizerState::sgd(0.3).unwrap();
        let mut p = Matrix::from_rows(&[[0.1, -2.5, 3.0]]).unwrap();
        let before = p.clone();
        sgd.apply(&mut [&mut p], &[Matrix::zeros(1, 3)]).unwrap();
        assert_eq!(p, before);

        let mut adam = OptimizerState::adam(1e-4).unwrap();
        for _ in 0..3 {
            adam.apply(&mut [&mut p], &[Matrix::zeros(1, 3)]).unwrap();
        }
        for (a, b) in p.data().iter().zip(before.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut opt = OptimizerState::adam(1e-3).unwrap();
        let mut p = Matrix::zeros(2, 2);
        assert!(matches!(
            opt.apply(&mut [&mut p], &[Matrix::zeros(2, 3)]),
            Err(Error::Shape(_))
        ));
        assert!(OptimizerState::sgd(0.0).is_err());
    }

    #[test]
    fn step_counter_increments() {
        let mut opt = OptimizerState::adam(1e-3).unwrap();
        let mut p = scalar(0.0);
        for t in 1..=5 {
            opt.apply(&mut [&mut p], &[scalar(1.0)]).unwrap();
            assert_eq!(opt.step_count(), t);
        }
    }
}
