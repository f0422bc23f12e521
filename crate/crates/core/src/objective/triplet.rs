use crate::align::Adjacency;
use crate::encoders::{EmbeddingBatch, EmbeddingGrads};
use crate::error::{Error, Result};
use crate::nn::{l2_norm, Matrix};
use crate::objective::aa::{aa_backward, aa_forward, AaForward};
use crate::objective::{AnchorMode, LossConfig, TripletStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Audio,
    Visual,
}

/// Anchor from `modality`; positive and negative index the other modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    pub modality: Modality,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletSet {
    pub triples: Vec<Triplet>,
}

impl TripletSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn extend(&mut self, other: TripletSet) {
        self.triples.extend(other.triples);
    }

    /// Map subset-local indices back to batch positions.
    pub fn remap(self, positions: &[usize]) -> TripletSet {
        TripletSet {
            triples: self
                .triples
                .into_iter()
                .map(|t| Triplet {
                    anchor: positions[t.anchor],
                    positive: positions[t.positive],
                    negative: positions[t.negative],
                    modality: t.modality,
                })
                .collect(),
        }
    }
}

/// `‖x/‖x‖ − y/‖y‖‖₂`, in `[0, 2]`.
pub fn normalized_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("vector dims {} vs {}", x.len(), y.len())));
    }
    let (nx, ny) = (l2_norm(x), l2_norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Normalization("cannot normalize a zero vector".into()));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a / nx - b / ny;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

fn normalize_rows(m: &Matrix, what: &str) -> Result<(Matrix, Vec<f64>)> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let n = l2_norm(m.row(r));
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Normalization(format!(
                "{what} embedding row {r} has norm {n}"
            )));
        }
        out.row_mut(r).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    Ok((out, norms))
}

/// Backward through `u = x / ‖x‖`.
fn normalize_backward(u: &Matrix, norms: &[f64], du: &Matrix) -> Matrix {
    let mut dx = Matrix::zeros(u.rows(), u.cols());
    for (r, &norm) in norms.iter().enumerate() {
        let ur = u.row(r);
        let gr = du.row(r);
        let proj: f64 = ur.iter().zip(gr).map(|(a, b)| a * b).sum();
        for (o, (&ui, &gi)) in dx.row_mut(r).iter_mut().zip(ur.iter().zip(gr)) {
            *o = (gi - ui * proj) / norm;
        }
    }
    dx
}

struct Geometry {
    aa_audio: AaForward,
    aa_visual: AaForward,
    unit_audio: Matrix,
    unit_visual: Matrix,
    norms_audio: Vec<f64>,
    norms_visual: Vec<f64>,
    /// `dist[i][j] = d(AA(a_i), AA(v_j))`
    dist: Matrix,
}

fn geometry(emb: &EmbeddingBatch, cfg: &LossConfig) -> Result<Geometry> {
    let aa_audio = aa_forward(&emb.audio, cfg.aa_proxy, cfg.aa_temperature)?;
    let aa_visual = aa_forward(&emb.visual, cfg.aa_proxy, cfg.aa_temperature)?;
    let (unit_audio, norms_audio) = normalize_rows(&aa_audio.output, "audio")?;
    let (unit_visual, norms_visual) = normalize_rows(&aa_visual.output, "visual")?;
    let n = emb.len();
    let mut dist = Matrix::zeros(n, n);
    for i in 0..n {
        let u = unit_audio.row(i);
        for j in 0..n {
            let d2: f64 = u
                .iter()
                .zip(unit_visual.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist.set(i, j, d2.sqrt());
        }
    }
    Ok(Geometry {
        aa_audio,
        aa_visual,
        unit_audio,
        unit_visual,
        norms_audio,
        norms_visual,
        dist,
    })
}

/// Audio × visual matrix of normalized distances between AA-proxied rows.
pub fn pairwise_distances(emb: &EmbeddingBatch, cfg: &LossConfig) -> Result<Matrix> {
    Ok(geometry(emb, cfg)?.dist)
}

fn anchored_triplets(
    adj: &Adjacency,
    adj_not: &Adjacency,
    dist: impl Fn(usize, usize) -> f64,
    strategy: TripletStrategy,
    modality: Modality,
    out: &mut Vec<Triplet>,
) {
    let n = adj.size();
    for a in 0..n {
        let pos: Vec<usize> = (0..n).filter(|&j| adj.get(a, j)).collect();
        let neg: Vec<usize> = (0..n).filter(|&j| adj_not.get(a, j)).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        match strategy {
            TripletStrategy::All => {
                for &p in &pos {
                    for &q in &neg {
                        out.push(Triplet {
                            anchor: a,
                            positive: p,
                            negative: q,
                            modality,
                        });
                    }
                }
            }
            TripletStrategy::Hard => {
                let mut p = pos[0];
                for &j in &pos[1..] {
                    if dist(a, j) > dist(a, p) {
                        p = j;
                    }
                }
                let mut q = neg[0];
                for &j in &neg[1..] {
                    if dist(a, j) < dist(a, q) {
                        q = j;
                    }
                }
                out.push(Triplet {
                    anchor: a,
                    positive: p,
                    negative: q,
                    modality,
                });
            }
        }
    }
}

/// Enumerate triplets from an (audio row × visual column) adjacency.
/// Visual anchors read the transposed adjacency and distances. Anchors
/// without a positive or a negative are skipped.
pub fn build_triplets(
    adj: &Adjacency,
    adj_not: &Adjacency,
    strategy: TripletStrategy,
    anchor_mode: AnchorMode,
    distances: &Matrix,
) -> Result<TripletSet> {
    let n = adj.size();
    if adj_not.size() != n || distances.shape() != (n, n) {
        return Err(Error::shape(format!(
            "adjacency {n}x{n}, adjacency-not {0}x{0}, distances {1:?}",
            adj_not.size(),
            distances.shape()
        )));
    }
    let mut triples = Vec::new();
    if matches!(anchor_mode, AnchorMode::Audio | AnchorMode::Symmetric) {
        anchored_triplets(
            adj,
            adj_not,
            |a, j| distances.get(a, j),
            strategy,
            Modality::Audio,
            &mut triples,
        );
    }
    if matches!(anchor_mode, AnchorMode::Visual | AnchorMode::Symmetric) {
        anchored_triplets(
            &adj.transpose(),
            &adj_not.transpose(),
            |a, j| distances.get(j, a),
            strategy,
            Modality::Visual,
            &mut triples,
        );
    }
    Ok(TripletSet { triples })
}

/// Mean hinge `max(0, d⁺ − d⁻ + α)` over the triplets, with gradients
/// through normalization and the AA proxy.
pub fn cross_modal_triplet_loss(
    emb: &EmbeddingBatch,
    triplets: &TripletSet,
    cfg: &LossConfig,
) -> Result<(f64, EmbeddingGrads)> {
    let n = emb.len();
    if triplets.is_empty() {
        return Ok((0.0, emb.zeros_like()));
    }
    if let Some(t) = triplets
        .triples
        .iter()
        .find(|t| t.anchor >= n || t.positive >= n || t.negative >= n)
    {
        return Err(Error::shape(format!("triplet {t:?} outside batch of {n}")));
    }
    let g = geometry(emb, cfg)?;
    let scale = 1.0 / triplets.len() as f64;
    let mut d_dist = Matrix::zeros(n, n);
    let mut total = 0.0;
    for t in &triplets.triples {
        // (audio index, visual index) of the positive and negative pairs
        let (pos, neg) = match t.modality {
            Modality::Audio => ((t.anchor, t.positive), (t.anchor, t.negative)),
            Modality::Visual => ((t.positive, t.anchor), (t.negative, t.anchor)),
        };
        let hinge = g.dist.get(pos.0, pos.1) - g.dist.get(neg.0, neg.1) + cfg.margin;
        if hinge > 0.0 {
            total += hinge;
            let i = pos.0 * n + pos.1;
            d_dist.data_mut()[i] += scale;
            let i = neg.0 * n + neg.1;
            d_dist.data_mut()[i] -= scale;
        }
    }
    let c = emb.dim();
    let mut d_unit_a = Matrix::zeros(n, c);
    let mut d_unit_v = Matrix::zeros(n, c);
    for i in 0..n {
        for j in 0..n {
            let gd = d_dist.get(i, j);
            let d = g.dist.get(i, j);
            if gd == 0.0 || d == 0.0 {
                continue;
            }
            let k = gd / d;
            let u = g.unit_audio.row(i);
            let w = g.unit_visual.row(j);
            for ((da, &ua), &wa) in d_unit_a.row_mut(i).iter_mut().zip(u).zip(w) {
                *da += k * (ua - wa);
            }
            for ((dv, &ua), &wa) in d_unit_v.row_mut(j).iter_mut().zip(u).zip(w) {
                *dv -= k * (ua - wa);
            }
        }
    }
    let d_aa_a = normalize_backward(&g.unit_audio, &g.norms_audio, &d_unit_a);
    let d_aa_v = normalize_backward(&g.unit_visual, &g.norms_visual, &d_unit_v);
    let grads = EmbeddingBatch {
        audio: aa_backward(&g.aa_audio, &d_aa_a, cfg.aa_temperature)?,
        visual: aa_backward(&g.aa_visual, &d_aa_v, cfg.aa_temperature)?,
    };
    Ok((total * scale, grads))
}
