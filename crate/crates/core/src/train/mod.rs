//! Progressive self-distillation training loop, run outputs and the
//! ablation grid.

mod bench;
mod check;
mod config;

pub use bench::{format_table, run_bench, variant_config, BenchRow, VARIANTS};
pub use check::{composite_grad_check, GRAD_CHECK_TOLERANCE};
pub use config::{DataSource, RunConfig};

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::align::{partition_batch, schedule_r};
use crate::dataset::{
    apply_label_noise, batches, generate_synthetic, load_features, split, Dataset, FeatureFormat,
};
use crate::encoders::{checkpoint_save, Precision, TowerSpec, TwoTowerModel};
use crate::error::{Error, Result};
use crate::eval::{evaluate, RetrievalReport};
use crate::objective::{composite_loss, LossBreakdown, StepContext};
use crate::rng::derive_seed;

const SEED_MODEL: u64 = 1;
const SEED_SPLIT: u64 = 2;
const SEED_NOISE: u64 = 3;
const SEED_SHUFFLE: u64 = 4;
const SEED_PARTITION: u64 = 5;
const SEED_DROPOUT: u64 = 6;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "model.xmdl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Step,
    Eval,
}

/// One line of the metrics stream. Step records carry per-batch losses;
/// eval records carry the epoch-mean loss and a retrieval report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub kind: RecordKind,
    pub epoch: usize,
    /// Global optimizer step. Eval records carry the number of steps taken.
    pub step: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    pub r: f64,
    pub loss: LossBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_labeled: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_soft: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triplets: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<RetrievalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

impl MetricsRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics records always serialize")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TwoTowerModel,
    pub records: Vec<MetricsRecord>,
    pub final_report: RetrievalReport,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub n_classes: usize,
}

impl TrainOutcome {
    pub fn steps(&self) -> impl Iterator<Item = &MetricsRecord> {
        self.records.iter().filter(|r| r.kind == RecordKind::Step)
    }

    pub fn evals(&self) -> impl Iterator<Item = &MetricsRecord> {
        self.records.iter().filter(|r| r.kind == RecordKind::Eval)
    }
}

fn load(path: &Path, format: Option<FeatureFormat>) -> Result<Dataset> {
    load_features(path, format.unwrap_or_else(|| FeatureFormat::from_path(path)))
        .map_err(|e| e.at(path.display().to_string()))
}

/// Load or generate the data and return `(train, test)`. Label noise, if
/// configured, touches the training split only.
pub fn prepare_data(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let full = match &cfg.data {
        DataSource::File { path, format } => load(path, *format)?,
        DataSource::Synthetic(_) => generate_synthetic(&cfg.synthetic_spec().unwrap())?,
    };
    let (mut train, mut test) = match &cfg.test_path {
        Some(p) => {
            let format = match &cfg.data {
                DataSource::File { format, .. } => *format,
                DataSource::Synthetic(_) => None,
            };
            (full, load(p, format)?)
        }
        None => split(&full, cfg.train_fraction, derive_seed(cfg.seed, &[SEED_SPLIT]))?,
    };
    if (train.meta.audio_dim, train.meta.visual_dim) != (test.meta.audio_dim, test.meta.visual_dim)
    {
        return Err(Error::Data {
            record: 0,
            message: "train and test feature widths differ".into(),
        });
    }
    let c = train.meta.n_classes.max(test.meta.n_classes);
    train.meta.n_classes = c;
    test.meta.n_classes = c;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split("train and test sets must both be nonempty".into()));
    }
    if cfg.label_noise_rate > 0.0 {
        apply_label_noise(
            &mut train.pairs.labels,
            cfg.label_noise_rate,
            c,
            derive_seed(cfg.seed, &[SEED_NOISE]),
        );
    }
    Ok((train, test))
}

/// Fresh model for the given data widths; the embedding has one dimension
/// per class.
pub fn build_model(cfg: &RunConfig, data: &Dataset) -> Result<TwoTowerModel> {
    let spec = |input| {
        TowerSpec::new(input, data.meta.n_classes)
            .with_hidden(cfg.hidden_dims.clone())
            .with_dropout(cfg.dropout)
    };
    TwoTowerModel::init(
        spec(data.meta.audio_dim),
        spec(data.meta.visual_dim),
        derive_seed(cfg.seed, &[SEED_MODEL]),
    )
}

fn mean_breakdown(sum: &LossBreakdown, n: usize) -> LossBreakdown {
    let k = n.max(1) as f64;
    LossBreakdown {
        l_lab: sum.l_lab / k,
        l_cross: sum.l_cross / k,
        l_dis: sum.l_dis / k,
        total: sum.total / k,
    }
}

/// Train on prepared data, handing each record to `sink` as it is produced.
pub fn train_on(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    sink: &mut dyn FnMut(&MetricsRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let wall = |on: bool| on.then(|| started.elapsed().as_millis() as u64);
    let mut model = build_model(cfg, train)?;
    let mut opt = crate::nn::OptimizerState::new(cfg.optimizer, cfg.learning_rate)?;
    let ctx_classes = train.meta.n_classes;
    let shuffle_seed = derive_seed(cfg.seed, &[SEED_SHUFFLE]);
    let mut records = Vec::new();
    let mut step: u64 = 0;
    let mut final_report = None;

    for epoch in 0..cfg.epochs {
        let r = schedule_r(&cfg.schedule, epoch)?;
        let mut sum = LossBreakdown { l_lab: 0.0, l_cross: 0.0, l_dis: 0.0, total: 0.0 };
        let epoch_batches = batches(&train.pairs, cfg.batch_size, epoch, shuffle_seed)?;
        for (bi, batch) in epoch_batches.iter().enumerate() {
            let at = || format!("epoch {epoch}, batch {bi}");
            let key = [epoch as u64, bi as u64];
            let plan = partition_batch(
                batch.len(),
                r,
                derive_seed(cfg.seed, &[SEED_PARTITION, key[0], key[1]]),
            )
            .map_err(|e| e.at(at()))?;
            let ctx = StepContext {
                n_classes: ctx_classes,
                dropout_seed: derive_seed(cfg.seed, &[SEED_DROPOUT, key[0], key[1]]),
            };
            let out = composite_loss(&mut model, batch, &plan, &cfg.loss, &ctx)
                .map_err(|e| e.at(at()))?;
            model.clear_cache();
            if out.grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric("non-finite gradient".into()).at(at()));
            }
            opt.apply(&mut model.params_mut(), &out.grads)
                .map_err(|e| e.at(at()))?;
            let b = &out.breakdown;
            sum.l_lab += b.l_lab;
            sum.l_cross += b.l_cross;
            sum.l_dis += b.l_dis;
            sum.total += b.total;
            let rec = MetricsRecord {
                kind: RecordKind::Step,
                epoch,
                step,
                batch: Some(bi),
                r,
                loss: *b,
                n_labeled: Some(plan.labeled_idx.len()),
                n_soft: Some(plan.soft_idx.len()),
                triplets: Some(out.labeled_triplets + out.soft_triplets),
                eval: None,
                wall_ms: wall(cfg.wall_clock),
            };
            sink(&rec)?;
            records.push(rec);
            step += 1;
        }
        let last = epoch + 1 == cfg.epochs;
        if (epoch + 1) % cfg.eval_every == 0 || last {
            let report = evaluate(&model, &test.pairs, cfg.distance)
                .map_err(|e| e.at(format!("evaluation after epoch {epoch}")))?;
            let rec = MetricsRecord {
                kind: RecordKind::Eval,
                epoch,
                step,
                batch: None,
                r,
                loss: mean_breakdown(&sum, epoch_batches.len()),
                n_labeled: None,
                n_soft: None,
                triplets: None,
                eval: Some(report.clone()),
                wall_ms: wall(cfg.wall_clock),
            };
            sink(&rec)?;
            records.push(rec);
            if last {
                final_report = Some(report);
            }
        }
    }
    Ok(TrainOutcome {
        model,
        records,
        final_report: final_report.expect("at least one epoch runs"),
        train_pairs: train.len(),
        test_pairs: test.len(),
        n_classes: ctx_classes,
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    variant: Option<&'a str>,
    config: serde_json::Map<String, serde_json::Value>,
    train_pairs: usize,
    test_pairs: usize,
    n_classes: usize,
    param_count: usize,
    steps: usize,
    checkpoint: &'a str,
    checksum: String,
    final_report: &'a RetrievalReport,
}

fn write_outputs(cfg: &RunConfig, dir: &Path, out: &TrainOutcome, variant: Option<&str>) -> Result<()> {
    checkpoint_save(&out.model, dir.join(CHECKPOINT_FILE), Precision::F64)?;
    fs::write(dir.join(REPORT_FILE), out.final_report.to_text())?;
    let manifest = Manifest {
        variant,
        config: cfg
            .entries()
            .into_iter()
            .map(|(k, v)| (k, serde_json::Value::String(v)))
            .collect(),
        train_pairs: out.train_pairs,
        test_pairs: out.test_pairs,
        n_classes: out.n_classes,
        param_count: out.model.param_count(),
        steps: out.steps().count(),
        checkpoint: CHECKPOINT_FILE,
        checksum: format!("{:016x}", out.model.checksum()),
        final_report: &out.final_report,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST_FILE), json + "\n")?;
    Ok(())
}

pub(crate) fn train_variant(cfg: &RunConfig, variant: Option<&str>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train, test) = prepare_data(cfg)?;
    let Some(dir) = &cfg.out_dir else {
        return train_on(cfg, &train, &test, &mut |_| Ok(()));
    };
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(METRICS_FILE))?);
    let result = train_on(cfg, &train, &test, &mut |rec| {
        writeln!(w, "{}", rec.to_json())?;
        Ok(())
    });
    w.flush()?;
    let out = result?;
    write_outputs(cfg, dir, &out, variant)?;
    Ok(out)
}

/// Full run: load data, train, and when `out_dir` is set write the metrics
/// stream, checkpoint, final report and manifest there.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    train_variant(cfg, None)
}
