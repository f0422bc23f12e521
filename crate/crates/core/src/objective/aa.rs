use crate::error::Result;
use crate::nn::{softmax_rows, Matrix};
use crate::objective::{AaProxy, LossConfig};

/// Cached forward state of the AA proxy.
#[derive(Debug, Clone)]
pub struct AaForward {
    pub input: Matrix,
    /// Row-stochastic attention weights (attention mode only).
    pub weights: Option<Matrix>,
    pub output: Matrix,
}

/// Identity, or `out_i = Σ_j w_ij e_j` with `w_i = softmax_j(⟨e_i, e_j⟩ / τ)`.
pub fn aa_forward(emb: &Matrix, proxy: AaProxy, temperature: f64) -> Result<AaForward> {
    match proxy {
        AaProxy::Identity => Ok(AaForward {
            input: emb.clone(),
            weights: None,
            output: emb.clone(),
        }),
        AaProxy::Attention if emb.rows() == 0 => Ok(AaForward {
            input: emb.clone(),
            weights: Some(Matrix::zeros(0, 0)),
            output: emb.clone(),
        }),
        AaProxy::Attention => {
            let mut scores = emb.matmul_nt(emb)?;
            scores.scale(1.0 / temperature);
            let weights = softmax_rows(&scores)?;
            let output = weights.matmul(emb)?;
            Ok(AaForward {
                input: emb.clone(),
                weights: Some(weights),
                output,
            })
        }
    }
}

pub fn aa_backward(fwd: &AaForward, d_out: &Matrix, temperature: f64) -> Result<Matrix> {
    let Some(w) = &fwd.weights else {
        return Ok(d_out.clone());
    };
    if w.rows() == 0 {
        return Ok(d_out.clone());
    }
    let e = &fwd.input;
    // out = W·E
    let mut d_e = w.matmul_tn(d_out)?;
    let d_w = d_out.matmul_nt(e)?;
    // Softmax Jacobian per row.
    let n = w.rows();
    let mut d_s = Matrix::zeros(n, n);
    for i in 0..n {
        let wr = w.row(i);
        let gr = d_w.row(i);
        let inner: f64 = wr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for (o, (&wi, &gi)) in d_s.row_mut(i).iter_mut().zip(wr.iter().zip(gr)) {
            *o = wi * (gi - inner);
        }
    }
    // S = E·Eᵀ/τ, so dE += (dS + dSᵀ)·E/τ.
    let mut sym = d_s.transpose();
    sym.add_assign(&d_s)?;
    d_e.add_scaled(&sym.matmul(e)?, 1.0 / temperature)?;
    Ok(d_e)
}

pub fn aa_proxy(emb: &Matrix, cfg: &LossConfig) -> Result<Matrix> {
    Ok(aa_forward(emb, cfg.aa_proxy, cfg.aa_temperature)?.output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, GradCheckConfig};

    fn attention_cfg() -> LossConfig {
        LossConfig {
            aa_proxy: AaProxy::Attention,
            ..Default::default()
        }
    }

    #[test]
    fn identity_is_bit_identical() {
        let e = Matrix::from_rows(&[[0.1, -7.0], [3.0, 1e-9]]).unwrap();
        let cfg = LossConfig {
            aa_proxy: AaProxy::Identity,
            ..Default::default()
        };
        assert_eq!(aa_proxy(&e, &cfg).unwrap(), e);
    }

    #[test]
    fn single_row_unchanged() {
        let e = Matrix::from_rows(&[[0.4, -1.3, 2.0]]).unwrap();
        let out = aa_proxy(&e, &attention_cfg()).unwrap();
        for (a, b) in out.data().iter().zip(e.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_rows_unchanged() {
        let e = Matrix::from_rows(&[[0.5, 2.0], [0.5, 2.0]]).unwrap();
        let out = aa_proxy(&e, &attention_cfg()).unwrap();
        for (a, b) in out.data().iter().zip(e.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn attention_gradient_matches_finite_differences() {
        let e = Matrix::from_vec(5, 3, (0..15).map(|i| ((i * 7 % 11) as f64 / 5.0) - 1.0).collect())
            .unwrap();
        let coeff = Matrix::from_vec(5, 3, (0..15).map(|i| (i as f64 * 0.9).sin()).collect())
            .unwrap();
        for tau in [0.5, 1.0, 2.0] {
            let report = grad_check(
                |p| {
                    let f = aa_forward(&p[0], AaProxy::Attention, tau)?;
                    let v = f.output.data().iter().zip(coeff.data()).map(|(a, b)| a * b).sum();
                    Ok((v, vec![aa_backward(&f, &coeff, tau)?]))
                },
                std::slice::from_ref(&e),
                1e-6,
                &GradCheckConfig::default(),
            )
            .unwrap();
            assert!(report.max_relative_error < 1e-6, "tau {tau}: {}", report.max_relative_error);
        }
    }
}
