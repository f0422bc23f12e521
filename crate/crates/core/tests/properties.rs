use proptest::prelude::*;
use xmsd_core::align::{adjacency_from_labels, partition_batch, soft_alignment};
use xmsd_core::eval::{average_precision, evaluate_embeddings, DistanceKind};
use xmsd_core::nn::Matrix;
use xmsd_core::objective::{
    build_triplets, cross_modal_triplet_loss, label_loss, one_hot, pair_distance_loss,
    pairwise_distances, AaProxy, AnchorMode, LossConfig, Modality, TripletStrategy,
};
use xmsd_core::EmbeddingBatch;

fn batch(n: usize, c: usize, a: &[f64], v: &[f64]) -> EmbeddingBatch {
    EmbeddingBatch::new(
        Matrix::from_vec(n, c, a[..n * c].to_vec()).unwrap(),
        Matrix::from_vec(n, c, v[..n * c].to_vec()).unwrap(),
    )
    .unwrap()
}

fn nonzero() -> impl Strategy<Value = f64> {
    prop_oneof![-2.0f64..-0.05, 0.05f64..2.0]
}

proptest! {
    #[test]
    fn partition_sizes_and_cover(n in 1usize..200, r in 0.0f64..=1.0, seed: u64) {
        let p = partition_batch(n, r, seed).unwrap();
        prop_assert_eq!(p.labeled_idx.len(), (r * n as f64).floor() as usize);
        let mut all: Vec<usize> = p.labeled_idx.iter().chain(&p.soft_idx).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(partition_batch(n, r, seed).unwrap(), p);
    }

    #[test]
    fn triplets_respect_adjacency(
        n in 2usize..8,
        a in proptest::collection::vec(nonzero(), 24),
        v in proptest::collection::vec(nonzero(), 24),
        hard: bool,
        tau in 0.3f64..3.0,
    ) {
        let emb = batch(n, 3, &a, &v);
        let s = soft_alignment(&emb, tau).unwrap();
        let cfg = LossConfig {
            strategy: if hard { TripletStrategy::Hard } else { TripletStrategy::All },
            ..LossConfig::default()
        };
        let d = pairwise_distances(&emb, &cfg).unwrap();
        let set = build_triplets(&s.adj, &s.adj_not, cfg.strategy, AnchorMode::Symmetric, &d).unwrap();
        for t in &set.triples {
            let (pos, neg) = match t.modality {
                Modality::Audio => ((t.anchor, t.positive), (t.anchor, t.negative)),
                Modality::Visual => ((t.positive, t.anchor), (t.negative, t.anchor)),
            };
            prop_assert!(s.adj.get(pos.0, pos.1));
            prop_assert!(s.adj_not.get(neg.0, neg.1));
        }
        if hard {
            prop_assert!(set.len() <= 2 * n);
        }
        let (loss, g) = cross_modal_triplet_loss(&emb, &set, &cfg).unwrap();
        prop_assert!(loss >= 0.0 && loss.is_finite());
        prop_assert!(g.audio.is_finite() && g.visual.is_finite());
    }

    #[test]
    fn distances_are_bounded(
        n in 1usize..8,
        a in proptest::collection::vec(nonzero(), 24),
        v in proptest::collection::vec(nonzero(), 24),
        attention: bool,
    ) {
        let cfg = LossConfig {
            aa_proxy: if attention { AaProxy::Attention } else { AaProxy::Identity },
            ..LossConfig::default()
        };
        let d = pairwise_distances(&batch(n, 3, &a, &v), &cfg).unwrap();
        prop_assert!(d.data().iter().all(|&x| (0.0..=2.0 + 1e-12).contains(&x)));
    }

    #[test]
    fn auxiliary_terms_nonnegative(
        n in 1usize..8,
        a in proptest::collection::vec(-2.0f64..2.0, 24),
        v in proptest::collection::vec(-2.0f64..2.0, 24),
        labels in proptest::collection::vec(0usize..3, 8),
    ) {
        let emb = batch(n, 3, &a, &v);
        let y = one_hot(&labels[..n], 3).unwrap();
        let subset: Vec<usize> = (0..n).step_by(2).collect();
        let (lab, _) = label_loss(&emb, &y, &subset).unwrap();
        let (dis, _) = pair_distance_loss(&emb).unwrap();
        prop_assert!(lab >= 0.0 && dis >= 0.0);
    }

    #[test]
    fn map_in_unit_interval_and_relabel_invariant(
        n in 2usize..12,
        a in proptest::collection::vec(nonzero(), 36),
        v in proptest::collection::vec(nonzero(), 36),
        labels in proptest::collection::vec(0usize..3, 12),
        shift in 1usize..3,
    ) {
        let emb = batch(n, 3, &a, &v);
        let r = evaluate_embeddings(&emb, &labels[..n], DistanceKind::Normalized).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.map_a2v) && (0.0..=1.0).contains(&r.map_v2a));
        // Renaming classes changes nothing.
        let renamed: Vec<usize> = labels[..n].iter().map(|l| (l + shift) % 3).collect();
        let r2 = evaluate_embeddings(&emb, &renamed, DistanceKind::Normalized).unwrap();
        prop_assert_eq!(r.map_a2v, r2.map_a2v);
        prop_assert_eq!(r.map_v2a, r2.map_v2a);
    }

    #[test]
    fn ap_bounds(rel in proptest::collection::vec(any::<bool>(), 1..30)) {
        prop_assume!(rel.contains(&true));
        let ap = average_precision(&rel).unwrap();
        // Lowest when every relevant item ranks last.
        let (n, r) = (rel.len(), rel.iter().filter(|&&x| x).count());
        let floor = (1..=r).map(|k| k as f64 / (n - r + k) as f64).sum::<f64>() / r as f64;
        prop_assert!(ap <= 1.0 && ap >= floor - 1e-15);
    }

    #[test]
    fn label_adjacency_is_symmetric(labels in proptest::collection::vec(0usize..5, 1..20)) {
        let (adj, not) = adjacency_from_labels(&labels);
        prop_assert_eq!(adj.transpose(), adj.clone());
        prop_assert_eq!(not.complement(), adj);
    }
}
