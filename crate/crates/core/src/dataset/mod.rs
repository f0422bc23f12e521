//! Paired audio-visual features: in-memory types, synthetic generation,
//! AVFD/CSV ingestion, stratified splitting and epoch batching.

mod io;
mod synthetic;

pub use io::{
    load_features, read_avfd, read_csv, save_features, write_avfd, write_csv, FeatureFormat,
    AVFD_MAGIC, AVFD_VERSION,
};
pub use synthetic::{apply_label_noise, generate_synthetic, SyntheticSpec};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub n_pairs: usize,
    pub audio_dim: usize,
    pub visual_dim: usize,
    pub n_classes: usize,
    pub class_names: Option<Vec<String>>,
}

impl DatasetMeta {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::config(format!("need >= 2 classes, got {}", self.n_classes)));
        }
        if self.audio_dim == 0 || self.visual_dim == 0 {
            return Err(Error::config("feature dims must be positive"));
        }
        Ok(())
    }
}

/// Aligned audio rows, visual rows and class ids. `indices` holds each
/// row's position in the originating dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedBatch {
    pub audio: Matrix,
    pub visual: Matrix,
    pub labels: Vec<usize>,
    pub indices: Vec<usize>,
}

impl PairedBatch {
    pub fn new(audio: Matrix, visual: Matrix, labels: Vec<usize>) -> Result<Self> {
        let n = labels.len();
        if audio.rows() != n || visual.rows() != n {
            return Err(Error::shape(format!(
                "{} audio rows, {} visual rows, {n} labels",
                audio.rows(),
                visual.rows()
            )));
        }
        Ok(PairedBatch {
            audio,
            visual,
            labels,
            indices: (0..n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows at `idx`, carrying their original indices along.
    pub fn select(&self, idx: &[usize]) -> PairedBatch {
        PairedBatch {
            audio: self.audio.select_rows(idx),
            visual: self.visual.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            indices: idx.iter().map(|&i| self.indices[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub pairs: PairedBatch,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, pairs: PairedBatch) -> Result<Self> {
        meta.validate()?;
        if pairs.len() != meta.n_pairs
            || pairs.audio.cols() != meta.audio_dim
            || pairs.visual.cols() != meta.visual_dim
        {
            return Err(Error::shape("pairs do not match dataset metadata"));
        }
        if let Some(i) = pairs.labels.iter().position(|&l| l >= meta.n_classes) {
            return Err(Error::Data {
                record: i,
                message: format!("label {} outside [0, {})", pairs.labels[i], meta.n_classes),
            });
        }
        Ok(Dataset { meta, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            meta: DatasetMeta {
                n_pairs: idx.len(),
                ..self.meta.clone()
            },
            pairs: self.pairs.select(idx),
        }
    }

    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for &l in &self.pairs.labels {
            *m.entry(l).or_insert(0) += 1;
        }
        m
    }
}

/// Class-stratified split. Every class needs at least two samples so both
/// sides get one.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in data.pairs.labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut idx) in by_class {
        if idx.len() < 2 {
            return Err(Error::Split(format!(
                "class {class} has {} sample(s); need at least 2",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng_from(seed, &[class as u64]));
        let k = ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

/// Epoch-seeded shuffle into `ceil(n / batch_size)` batches; the last one may
/// be short.
pub fn batches(
    data: &PairedBatch,
    batch_size: usize,
    epoch: usize,
    seed: u64,
) -> Result<Vec<PairedBatch>> {
    if batch_size < 2 {
        return Err(Error::config(format!("batch size must be >= 2, got {batch_size}")));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng_from(seed, &[0xba7c, epoch as u64]));
    Ok(order
        .chunks(batch_size)
        .map(|c| data.select(c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(per_class: usize, classes: usize) -> Dataset {
        let n = per_class * classes;
        let labels: Vec<usize> = (0..n).map(|i| i / per_class).collect();
        let audio = Matrix::from_vec(n, 2, (0..2 * n).map(|i| i as f64).collect()).unwrap();
        let visual = Matrix::from_vec(n, 3, (0..3 * n).map(|i| -(i as f64)).collect()).unwrap();
        Dataset::new(
            DatasetMeta {
                n_pairs: n,
                audio_dim: 2,
                visual_dim: 3,
                n_classes: classes,
                class_names: None,
            },
            PairedBatch::new(audio, visual, labels).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn stratified_split_counts() {
        let d = toy(10, 2);
        let (train, test) = split(&d, 0.8, 1).unwrap();
        assert_eq!(train.class_counts().into_values().collect::<Vec<_>>(), vec![8, 8]);
        assert_eq!(test.class_counts().into_values().collect::<Vec<_>>(), vec![2, 2]);
        assert!(train.pairs.indices.iter().all(|i| !test.pairs.indices.contains(i)));
        assert_eq!(split(&d, 0.8, 1).unwrap(), (train, test));
    }

    #[test]
    fn split_rejects_singleton_class() {
        let mut d = toy(3, 2);
        d.pairs.labels[0] = 1;
        d.pairs.labels[1] = 1;
        assert!(matches!(split(&d, 0.5, 0), Err(Error::Split(_))));
        assert!(matches!(split(&toy(3, 2), 1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn batch_sizes_and_alignment() {
        let d = toy(5, 2);
        let bs = batches(&d.pairs, 4, 0, 9).unwrap();
        assert_eq!(bs.iter().map(PairedBatch::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        for b in &bs {
            for (r, &orig) in b.indices.iter().enumerate() {
                assert_eq!(b.audio.row(r), d.pairs.audio.row(orig));
                assert_eq!(b.visual.row(r), d.pairs.visual.row(orig));
                assert_eq!(b.labels[r], d.pairs.labels[orig]);
            }
        }
        let mut all: Vec<usize> = bs.iter().flat_map(|b| b.indices.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn short_tail_kept() {
        let d = toy(5, 2);
        let bs = batches(&d.pairs, 3, 0, 9).unwrap();
        assert_eq!(bs.iter().map(PairedBatch::len).collect::<Vec<_>>(), vec![3, 3, 3, 1]);
        assert!(matches!(batches(&d.pairs, 1, 0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn epochs_reshuffle() {
        let d = toy(20, 2);
        let order = |e| -> Vec<usize> {
            batches(&d.pairs, 8, e, 3).unwrap().into_iter().flat_map(|b| b.indices).collect()
        };
        assert_ne!(order(0), order(1));
        assert_eq!(order(0), order(0));
    }
}
