use crate::align::{adjacency_from_labels, soft_alignment, Adjacency, PartitionPlan};
use crate::dataset::PairedBatch;
use crate::encoders::TwoTowerModel;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::objective::{
    build_triplets, cross_modal_triplet_loss, label_loss, one_hot, pair_distance_loss,
    pairwise_distances, LossBreakdown, LossConfig, TripletSet,
};

#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    pub n_classes: usize,
    /// Seed for this step's dropout masks.
    pub dropout_seed: u64,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub breakdown: LossBreakdown,
    /// Parameter gradients in [`TwoTowerModel::params`] order.
    pub grads: Vec<Matrix>,
    pub labeled_triplets: usize,
    pub soft_triplets: usize,
}

fn sub_distances(dist: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), idx.len());
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out.set(a, b, dist.get(i, j));
        }
    }
    out
}

fn subset_triplets(
    adj: &Adjacency,
    adj_not: &Adjacency,
    idx: &[usize],
    dist: &Matrix,
    cfg: &LossConfig,
) -> Result<TripletSet> {
    let local = build_triplets(
        adj,
        adj_not,
        cfg.strategy,
        cfg.anchor_mode,
        &sub_distances(dist, idx),
    )?;
    Ok(local.remap(idx))
}

/// One self-distillation step.
///
/// The soft subset is pseudo-labelled by an inference-mode pass of the same
/// model; those outputs only feed argmaxes, so no gradient reaches them.
/// The student pass then runs in training mode over the whole batch:
/// `l_cross` covers label-adjacency triplets inside the labelled subset and
/// soft-adjacency triplets inside the soft subset, `l_lab` covers the
/// labelled subset, and `l_dis` every pair.
pub fn composite_loss(
    model: &mut TwoTowerModel,
    batch: &PairedBatch,
    plan: &PartitionPlan,
    cfg: &LossConfig,
    ctx: &StepContext,
) -> Result<StepOutput> {
    if plan.len() != batch.len() {
        return Err(Error::shape(format!(
            "partition covers {} of {} pairs",
            plan.len(),
            batch.len()
        )));
    }
    if model.embed_dim() != ctx.n_classes {
        return Err(Error::config(format!(
            "model projects to {} dims but data has {} classes",
            model.embed_dim(),
            ctx.n_classes
        )));
    }

    let teacher = if plan.soft_idx.is_empty() {
        None
    } else {
        let soft = batch.select(&plan.soft_idx);
        let emb = model.encode(&soft.audio, &soft.visual)?;
        Some(soft_alignment(&emb, cfg.softmax_temperature)?)
    };

    let student = model.encode_train(&batch.audio, &batch.visual, ctx.dropout_seed)?;
    if !student.audio.is_finite() || !student.visual.is_finite() {
        return Err(Error::Numeric("non-finite embeddings in student pass".into()));
    }
    let dist = pairwise_distances(&student, cfg)?;

    let labeled_labels: Vec<usize> = plan.labeled_idx.iter().map(|&i| batch.labels[i]).collect();
    let (ladj, ladj_not) = adjacency_from_labels(&labeled_labels);
    let mut triplets = subset_triplets(&ladj, &ladj_not, &plan.labeled_idx, &dist, cfg)?;
    let labeled_triplets = triplets.len();
    if let Some(t) = &teacher {
        triplets.extend(subset_triplets(&t.adj, &t.adj_not, &plan.soft_idx, &dist, cfg)?);
    }
    let soft_triplets = triplets.len() - labeled_triplets;

    let (l_cross, g_cross) = cross_modal_triplet_loss(&student, &triplets, cfg)?;
    let labels = one_hot(&batch.labels, ctx.n_classes)?;
    let (l_lab, g_lab) = label_loss(&student, &labels, &plan.labeled_idx)?;
    let (l_dis, g_dis) = pair_distance_loss(&student)?;

    let breakdown = LossBreakdown::weighted(l_lab, l_cross, l_dis, cfg);
    if !breakdown.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {breakdown:?}")));
    }

    let mut g = student.zeros_like();
    for (w, part) in [(cfg.w_lab, &g_lab), (cfg.w_cross, &g_cross), (cfg.w_dis, &g_dis)] {
        if w != 0.0 {
            g.add_scaled(part, w)?;
        }
    }
    let grads = model.backward(&g)?;
    Ok(StepOutput {
        breakdown,
        grads,
        labeled_triplets,
        soft_triplets,
    })
}
