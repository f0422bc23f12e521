//! Soft-alignment labels, adjacency matrices, batch partitioning and the
//! supervised-ratio schedules.

mod adjacency;
mod partition;
mod schedule;

pub use adjacency::{adjacency_from, adjacency_from_labels, soft_alignment, Adjacency, SoftAlignment};
pub use partition::{partition_batch, PartitionPlan};
pub use schedule::{schedule_r, ScheduleKind, ScheduleSpec};
