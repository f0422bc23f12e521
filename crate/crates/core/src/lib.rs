//! Cross-modal self-distillation for audio-visual retrieval.
//!
//! Two MLP towers project audio and visual features into a shared space of
//! one dimension per class. Training mixes a cross-modal triplet loss over
//! labelled and model-pseudo-labelled pairs with a label-regression term and
//! a paired-distance term; retrieval is scored by MAP in both directions.

pub mod align;
pub mod dataset;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod nn;
pub mod objective;
pub mod rng;
pub mod train;

pub use align::{
    partition_batch, schedule_r, soft_alignment, Adjacency, PartitionPlan, ScheduleKind,
    ScheduleSpec, SoftAlignment,
};
pub use dataset::{Dataset, DatasetMeta, PairedBatch};
pub use encoders::{EmbeddingBatch, EmbeddingGrads, TowerSpec, TwoTowerModel};
pub use error::{Error, ErrorClass, Result};
pub use eval::{evaluate, DistanceKind, RetrievalReport};
pub use nn::{Matrix, OptimizerKind, OptimizerState};
pub use objective::{AaProxy, AnchorMode, LossBreakdown, LossConfig, TripletStrategy};
pub use train::{train, BenchRow, MetricsRecord, RunConfig, TrainOutcome};
