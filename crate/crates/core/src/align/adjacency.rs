use crate::encoders::EmbeddingBatch;
use crate::error::{Error, Result};
use crate::nn::{argmax, softmax_rows, Matrix};

/// Dense boolean matrix; row = audio position, column = visual position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    bits: Vec<bool>,
}

impl Adjacency {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                bits.push(f(i, j));
            }
        }
        Adjacency { n, bits }
    }

    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::shape("adjacency must be square"));
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j] != 0))
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn complement(&self) -> Adjacency {
        Adjacency {
            n: self.n,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn transpose(&self) -> Adjacency {
        Adjacency::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.n,
            self.n,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("square")
    }
}

#[derive(Debug, Clone)]
pub struct SoftAlignment {
    /// `softmax_rows(V̂·Âᵀ / τ)`: row j is visual j's distribution over audio positions.
    pub la: Matrix,
    /// `softmax_rows(Â·V̂ᵀ / τ)`: row i is audio i's distribution over visual positions.
    pub lv: Matrix,
    pub adj: Adjacency,
    pub adj_not: Adjacency,
}

pub fn soft_alignment(emb: &EmbeddingBatch, temperature: f64) -> Result<SoftAlignment> {
    if emb.is_empty() {
        return Err(Error::shape("soft alignment of an empty batch"));
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::config(format!(
            "softmax temperature must be positive, got {temperature}"
        )));
    }
    let mut av = emb.audio.matmul_nt(&emb.visual)?;
    av.scale(1.0 / temperature);
    let lv = softmax_rows(&av)?;
    let la = softmax_rows(&av.transpose())?;
    let (adj, adj_not) = adjacency_from(&la, &lv)?;
    Ok(SoftAlignment {
        la,
        lv,
        adj,
        adj_not,
    })
}

/// Mutual-pointing adjacency: audio i and visual j are adjacent when the
/// visual position audio i points at equals the audio position visual j
/// points at. Argmax ties go to the lowest index.
pub fn adjacency_from(la: &Matrix, lv: &Matrix) -> Result<(Adjacency, Adjacency)> {
    let n = la.rows();
    if la.shape() != (n, n) || lv.shape() != (n, n) {
        return Err(Error::shape(format!(
            "soft labels must be square and equal: {:?} vs {:?}",
            la.shape(),
            lv.shape()
        )));
    }
    let p: Vec<usize> = lv.iter_rows().map(argmax).collect();
    let q: Vec<usize> = la.iter_rows().map(argmax).collect();
    let adj = Adjacency::from_fn(n, |i, j| p[i] == q[j]);
    let adj_not = adj.complement();
    Ok((adj, adj_not))
}

pub fn adjacency_from_labels(labels: &[usize]) -> (Adjacency, Adjacency) {
    let adj = Adjacency::from_fn(labels.len(), |i, j| labels[i] == labels[j]);
    let adj_not = adj.complement();
    (adj, adj_not)
}
