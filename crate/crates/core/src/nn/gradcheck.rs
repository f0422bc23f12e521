//! Central finite-difference gradient checker.

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::rng::rng_from;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Coordinates sampled per tensor; tensors smaller than this are checked fully.
    pub max_coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-4,
            max_coords_per_tensor: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub coords_checked: usize,
    /// (tensor index, flat offset) of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compare the analytic gradient returned by `loss` with central differences.
///
/// `loss` maps a full parameter list to `(value, gradient per tensor)` and
/// must be deterministic; two evaluations at the unperturbed point are
/// compared bit-for-bit before any differencing starts.
pub fn grad_check<F>(
    mut loss: F,
    params: &[Matrix],
    tolerance: f64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Matrix]) -> Result<(f64, Vec<Matrix>)>,
{
    let mut work: Vec<Matrix> = params.to_vec();
    let (base, analytic) = loss(&work)?;
    let (again, analytic_again) = loss(&work)?;
    if base.to_bits() != again.to_bits() || analytic != analytic_again {
        return Err(Error::Determinism(format!(
            "loss closure returned {base} then {again} for identical parameters"
        )));
    }
    if analytic.len() != params.len() {
        return Err(Error::shape(format!(
            "closure returned {} gradient tensors for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    for (i, (g, p)) in analytic.iter().zip(params).enumerate() {
        if g.shape() != p.shape() {
            return Err(Error::shape(format!("gradient {i} shape mismatch")));
        }
    }

    let mut max_err = 0.0f64;
    let mut worst = None;
    let mut checked = 0;
    for t in 0..work.len() {
        let len = work[t].data().len();
        let coords: Vec<usize> = if len <= cfg.max_coords_per_tensor {
            (0..len).collect()
        } else {
            let mut rng = rng_from(cfg.seed, &[t as u64]);
            let mut c = sample(&mut rng, len, cfg.max_coords_per_tensor).into_vec();
            c.sort_unstable();
            c
        };
        for k in coords {
            let orig = work[t].data()[k];
            work[t].data_mut()[k] = orig + cfg.step;
            let (plus, _) = loss(&work)?;
            work[t].data_mut()[k] = orig - cfg.step;
            let (minus, _) = loss(&work)?;
            work[t].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let err = relative_error(analytic[t].data()[k], numeric);
            if !err.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient comparison at tensor {t} offset {k}"
                )));
            }
            if err > max_err {
                max_err = err;
                worst = Some((t, k));
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_relative_error: max_err,
        coords_checked: checked,
        worst,
        passed: max_err < tolerance,
    })
}
