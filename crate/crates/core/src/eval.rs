//! Bidirectional cross-modal retrieval: rank the other modality's
//! embeddings by distance and score with mean average precision.

use std::fmt;

use serde::Serialize;

use crate::dataset::PairedBatch;
use crate::encoders::{EmbeddingBatch, TwoTowerModel};
use crate::error::{Error, Result};
use crate::nn::{dot, l2_norm, Matrix};
use crate::objective::normalized_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    /// Euclidean distance between L2-normalized vectors.
    Normalized,
    Euclidean,
    /// `1 − cos(x, y)`
    Cosine,
}

impl std::str::FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(DistanceKind::Normalized),
            "euclidean" => Ok(DistanceKind::Euclidean),
            "cosine" => Ok(DistanceKind::Cosine),
            _ => Err(Error::Config(format!("unknown distance '{s}'"))),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Normalized => "normalized",
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Cosine => "cosine",
        })
    }
}

pub fn distance(x: &[f64], y: &[f64], kind: DistanceKind) -> Result<f64> {
    match kind {
        DistanceKind::Normalized => normalized_distance(x, y),
        DistanceKind::Euclidean => {
            if x.len() != y.len() {
                return Err(Error::Shape("vector dims differ".into()));
            }
            Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        }
        DistanceKind::Cosine => {
            if x.len() != y.len() {
                return Err(Error::Shape("vector dims differ".into()));
            }
            let (nx, ny) = (l2_norm(x), l2_norm(y));
            if nx == 0.0 || ny == 0.0 {
                return Err(Error::Normalization("cosine of a zero vector".into()));
            }
            Ok(1.0 - dot(x, y) / (nx * ny))
        }
    }
}

/// Gallery indices by ascending distance; ties keep the lower index first.
pub fn rank_gallery(query: &[f64], gallery: &Matrix, kind: DistanceKind) -> Result<Vec<usize>> {
    if gallery.rows() == 0 {
        return Err(Error::Shape("empty gallery".into()));
    }
    if gallery.cols() != query.len() {
        return Err(Error::Shape(format!(
            "query dim {} vs gallery dim {}",
            query.len(),
            gallery.cols()
        )));
    }
    let d: Vec<f64> = gallery
        .iter_rows()
        .map(|g| distance(query, g, kind))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..gallery.rows()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    Ok(order)
}

/// `(1/R) Σ_k rel_k · precision@k` over a full ranked list.
pub fn average_precision(relevance: &[bool]) -> Result<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::Data {
            record: 0,
            message: "average precision undefined without relevant items".into(),
        });
    }
    Ok(sum / hits as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionReport {
    pub map: f64,
    pub n_queries: usize,
    pub excluded_queries: usize,
    /// (k, mean precision@k)
    pub precision_at_k: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub map_a2v: f64,
    pub map_v2a: f64,
    pub map_avg: f64,
    pub a2v: DirectionReport,
    pub v2a: DirectionReport,
    pub distance: DistanceKind,
}

impl RetrievalReport {
    /// Key-value text form.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "map_a2v = {:.6}\nmap_v2a = {:.6}\nmap_avg = {:.6}\ndistance = {}\n",
            self.map_a2v, self.map_v2a, self.map_avg, self.distance
        );
        for (name, d) in [("a2v", &self.a2v), ("v2a", &self.v2a)] {
            s.push_str(&format!(
                "{name}.queries = {}\n{name}.excluded = {}\n",
                d.n_queries, d.excluded_queries
            ));
            for (k, p) in &d.precision_at_k {
                s.push_str(&format!("{name}.precision_at_{k} = {p:.6}\n"));
            }
        }
        s
    }
}

pub const PRECISION_KS: [usize; 4] = [1, 5, 10, 20];

fn direction(
    queries: &Matrix,
    gallery: &Matrix,
    labels: &[usize],
    kind: DistanceKind,
) -> Result<DirectionReport> {
    let ks: Vec<usize> = PRECISION_KS
        .iter()
        .copied()
        .filter(|&k| k <= gallery.rows())
        .collect();
    let mut ap_sum = 0.0;
    let mut p_sum = vec![0.0; ks.len()];
    let mut used = 0;
    let mut excluded = 0;
    for q in 0..queries.rows() {
        let order = rank_gallery(queries.row(q), gallery, kind)?;
        let rel: Vec<bool> = order.iter().map(|&g| labels[g] == labels[q]).collect();
        if !rel.contains(&true) {
            excluded += 1;
            continue;
        }
        ap_sum += average_precision(&rel)?;
        for (slot, &k) in p_sum.iter_mut().zip(&ks) {
            *slot += rel[..k].iter().filter(|&&r| r).count() as f64 / k as f64;
        }
        used += 1;
    }
    let denom = used.max(1) as f64;
    Ok(DirectionReport {
        map: ap_sum / denom,
        n_queries: used,
        excluded_queries: excluded,
        precision_at_k: ks.into_iter().zip(p_sum.into_iter().map(|p| p / denom)).collect(),
    })
}

/// Evaluate precomputed embeddings; the paired counterpart of every query
/// stays in the gallery.
pub fn evaluate_embeddings(
    emb: &EmbeddingBatch,
    labels: &[usize],
    kind: DistanceKind,
) -> Result<RetrievalReport> {
    if emb.is_empty() {
        return Err(Error::Shape("evaluation needs a nonempty test set".into()));
    }
    if labels.len() != emb.len() {
        return Err(Error::Shape("label count does not match embeddings".into()));
    }
    let a2v = direction(&emb.audio, &emb.visual, labels, kind)?;
    let v2a = direction(&emb.visual, &emb.audio, labels, kind)?;
    Ok(RetrievalReport {
        map_a2v: a2v.map,
        map_v2a: v2a.map,
        map_avg: (a2v.map + v2a.map) / 2.0,
        a2v,
        v2a,
        distance: kind,
    })
}

pub fn evaluate(
    model: &TwoTowerModel,
    test: &PairedBatch,
    kind: DistanceKind,
) -> Result<RetrievalReport> {
    let emb = model.encode(&test.audio, &test.visual)?;
    evaluate_embeddings(&emb, &test.labels, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[true, false, false]).unwrap(), 1.0);
        let ap = average_precision(&[true, false, true]).unwrap();
        assert!((ap - 0.5 * (1.0 + 2.0 / 3.0)).abs() < 1e-15);
        assert!((average_precision(&[false, false, true]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(average_precision(&[true; 5]).unwrap(), 1.0);
        assert!(average_precision(&[false, false]).is_err());
    }

    #[test]
    fn ranking_examples() {
        let g = Matrix::from_rows(&[[1.0, 0.1], [-1.0, 0.0]]).unwrap();
        assert_eq!(rank_gallery(&[1.0, 0.1], &g, DistanceKind::Normalized).unwrap(), vec![0, 1]);
        let same = Matrix::filled(4, 2, 0.5);
        assert_eq!(
            rank_gallery(&[0.3, 0.9], &same, DistanceKind::Normalized).unwrap(),
            vec![0, 1, 2, 3]
        );
        assert!(rank_gallery(&[1.0], &Matrix::zeros(0, 1), DistanceKind::Euclidean).is_err());
    }

    #[test]
    fn one_hot_embeddings_are_perfect() {
        let labels = vec![0, 1, 2, 0, 1, 2, 1];
        let mut m = Matrix::zeros(labels.len(), 3);
        for (i, &l) in labels.iter().enumerate() {
            m.set(i, l, 1.0);
        }
        let emb = EmbeddingBatch::new(m.clone(), m).unwrap();
        let r = evaluate_embeddings(&emb, &labels, DistanceKind::Normalized).unwrap();
        assert_eq!(r.map_a2v, 1.0);
        assert_eq!(r.map_v2a, 1.0);
        assert_eq!(r.a2v.precision_at_k[0], (1, 1.0));
        assert!(r.to_text().contains("map_avg = 1.000000"));
    }

    #[test]
    fn distance_kinds() {
        let x = [3.0, 4.0];
        let y = [6.0, 8.0];
        assert!(distance(&x, &y, DistanceKind::Normalized).unwrap().abs() < 1e-15);
        assert!((distance(&x, &y, DistanceKind::Euclidean).unwrap() - 5.0).abs() < 1e-15);
        assert!(distance(&x, &y, DistanceKind::Cosine).unwrap().abs() < 1e-15);
    }
}
