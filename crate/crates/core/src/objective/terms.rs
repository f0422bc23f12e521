use crate::encoders::{EmbeddingBatch, EmbeddingGrads};
use crate::error::{Error, Result};
use crate::nn::{l2_norm, Matrix};

pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), n_classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::Data {
                record: i,
                message: format!("label {l} outside [0, {n_classes})"),
            });
        }
        m.set(i, l, 1.0);
    }
    Ok(m)
}

fn is_one_hot(row: &[f64]) -> bool {
    row.iter().all(|&v| v == 0.0 || v == 1.0) && row.iter().filter(|&&v| v == 1.0).count() == 1
}

/// Adds `scale · (x − y)/‖x − y‖` to `out` and returns `‖x − y‖`.
/// The subgradient at `x == y` is taken as zero.
fn distance_with_grad(x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let d = l2_norm(&diff);
    if d > 0.0 {
        for (o, v) in out.iter_mut().zip(&diff) {
            *o += scale * v / d;
        }
    }
    d
}

/// Mean distance of the subset's audio and visual projections to their
/// one-hot labels (audio term plus visual term).
pub fn label_loss(
    emb: &EmbeddingBatch,
    labels: &Matrix,
    subset: &[usize],
) -> Result<(f64, EmbeddingGrads)> {
    if labels.shape() != emb.audio.shape() {
        return Err(Error::shape(format!(
            "labels {:?} vs embeddings {:?}",
            labels.shape(),
            emb.audio.shape()
        )));
    }
    let mut grads = emb.zeros_like();
    if subset.is_empty() {
        return Ok((0.0, grads));
    }
    let scale = 1.0 / subset.len() as f64;
    let mut sum = 0.0;
    for &i in subset {
        if i >= labels.rows() {
            return Err(Error::shape(format!("subset index {i} outside batch")));
        }
        let y = labels.row(i);
        if !is_one_hot(y) {
            return Err(Error::Data {
                record: i,
                message: "label row is not one-hot".into(),
            });
        }
        sum += distance_with_grad(emb.audio.row(i), y, scale, grads.audio.row_mut(i));
        sum += distance_with_grad(emb.visual.row(i), y, scale, grads.visual.row_mut(i));
    }
    Ok((sum * scale, grads))
}

/// Mean distance between paired audio and visual projections.
pub fn pair_distance_loss(emb: &EmbeddingBatch) -> Result<(f64, EmbeddingGrads)> {
    let n = emb.len();
    let mut grads = emb.zeros_like();
    if n == 0 {
        return Ok((0.0, grads));
    }
    let scale = 1.0 / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let mut g = vec![0.0; emb.dim()];
        sum += distance_with_grad(emb.audio.row(i), emb.visual.row(i), scale, &mut g);
        for ((ga, gv), &d) in grads
            .audio
            .row_mut(i)
            .iter_mut()
            .zip(grads.visual.row_mut(i).iter_mut())
            .zip(&g)
        {
            *ga += d;
            *gv -= d;
        }
    }
    Ok((sum * scale, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, GradCheckConfig};

    fn emb(a: Matrix, v: Matrix) -> EmbeddingBatch {
        EmbeddingBatch::new(a, v).unwrap()
    }

    #[test]
    fn exact_labels_give_zero() {
        let y = one_hot(&[0, 2, 1], 3).unwrap();
        let (v, g) = label_loss(&emb(y.clone(), y.clone()), &y, &[0, 1, 2]).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.audio.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_offset_on_audio() {
        let y = one_hot(&[1], 3).unwrap();
        let mut a = y.clone();
        a.set(0, 0, 1.0);
        let (v, _) = label_loss(&emb(a, y.clone()), &y, &[0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_subset() {
        let y = one_hot(&[1, 0], 2).unwrap();
        let (v, g) = label_loss(&emb(Matrix::filled(2, 2, 3.0), y.clone()), &y, &[]).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.visual.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_one_hot_rejected() {
        let bad = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        let e = emb(Matrix::zeros(1, 2), Matrix::zeros(1, 2));
        assert!(matches!(label_loss(&e, &bad, &[0]), Err(Error::Data { record: 0, .. })));
        assert!(one_hot(&[3], 3).is_err());
    }

    #[test]
    fn pair_distance_examples() {
        let a = Matrix::from_rows(&[[0.3, -1.0], [2.0, 0.0]]).unwrap();
        let (v, _) = pair_distance_loss(&emb(a.clone(), a.clone())).unwrap();
        assert_eq!(v, 0.0);
        let (v, _) = pair_distance_loss(&emb(
            Matrix::from_rows(&[[1.0, 0.0]]).unwrap(),
            Matrix::from_rows(&[[0.0, 0.0]]).unwrap(),
        ))
        .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let a = Matrix::from_vec(4, 3, (0..12).map(|i| (i as f64 * 1.3).sin()).collect()).unwrap();
        let v = Matrix::from_vec(4, 3, (0..12).map(|i| (i as f64 * 0.7).cos()).collect()).unwrap();
        let y = one_hot(&[0, 1, 2, 1], 3).unwrap();
        let report = grad_check(
            |p| {
                let e = EmbeddingBatch::new(p[0].clone(), p[1].clone())?;
                let (l1, g1) = label_loss(&e, &y, &[0, 2, 3])?;
                let (l2, g2) = pair_distance_loss(&e)?;
                let mut ga = g1.audio;
                ga.add_assign(&g2.audio)?;
                let mut gv = g1.visual;
                gv.add_assign(&g2.visual)?;
                Ok((l1 + l2, vec![ga, gv]))
            },
            &[a, v],
            1e-4,
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }
}
