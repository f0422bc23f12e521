use xmsd_core::align::schedule_r;
use xmsd_core::dataset::{save_features, FeatureFormat};
use xmsd_core::encoders::checkpoint_load;
use xmsd_core::eval::evaluate;
use xmsd_core::train::{
    prepare_data, run_bench, train, RecordKind, RunConfig, CHECKPOINT_FILE, VARIANTS,
};

const DESK: &str = "seed = 7\nsynthetic.classes = 10\nsynthetic.per_class = 40\nsynthetic.noise = 0.05\n\
                    train.batch = 64\nmodel.hidden = 64,64,64\noptim.lr = 0.001\n";

fn desk(epochs: usize) -> RunConfig {
    let mut c = RunConfig::from_text(DESK).unwrap();
    c.set("train.epochs", &epochs.to_string()).unwrap();
    c
}

#[test]
fn desk_loss_falls_over_sixty_epochs() {
    let out = train(&desk(60)).unwrap();
    let epoch_loss = |e: usize| {
        let v: Vec<f64> = out.steps().filter(|r| r.epoch == e).map(|r| r.loss.total).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(epoch_loss(59) < epoch_loss(0));
}

#[test]
fn stream_contract() {
    let cfg = desk(12);
    let out = train(&cfg).unwrap();
    // 320 training pairs at batch 64: five full batches per epoch.
    assert_eq!(out.steps().count(), cfg.epochs * out.train_pairs.div_ceil(cfg.batch_size));
    assert_eq!(out.evals().count(), 2);
    let mut last = (0, 0);
    for r in &out.records {
        assert!((r.epoch, r.step) >= last);
        last = (r.epoch, r.step);
        assert_eq!(r.r, schedule_r(&cfg.schedule, r.epoch).unwrap());
        assert_eq!(r.eval.is_some(), r.kind == RecordKind::Eval);
    }
}

#[test]
fn ragged_batches_still_counted() {
    let mut cfg = desk(3);
    cfg.set("train.batch", "100").unwrap();
    let out = train(&cfg).unwrap();
    assert_eq!(out.train_pairs, 320);
    assert_eq!(out.steps().count(), 3 * 4);
}

#[test]
fn checkpoint_replays_final_eval() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = desk(8);
    cfg.out_dir = Some(dir.path().to_path_buf());
    let out = train(&cfg).unwrap();
    let (model, _) = checkpoint_load(dir.path().join(CHECKPOINT_FILE)).unwrap();
    let (_, test) = prepare_data(&cfg).unwrap();
    let r = evaluate(&model, &test.pairs, cfg.distance).unwrap();
    assert!((r.map_a2v - out.final_report.map_a2v).abs() < 1e-9);
    assert!((r.map_v2a - out.final_report.map_v2a).abs() < 1e-9);
}

#[test]
fn external_train_and_test_files() {
    let dir = tempfile::tempdir().unwrap();
    let (train_set, test_set) = prepare_data(&desk(1)).unwrap();
    let tr = dir.path().join("train.avfd");
    let te = dir.path().join("test.csv");
    save_features(&train_set, &tr, FeatureFormat::Binary).unwrap();
    save_features(&test_set, &te, FeatureFormat::Csv).unwrap();
    let mut cfg = desk(20);
    cfg.set("data.path", tr.to_str().unwrap()).unwrap();
    cfg.set("data.test_path", te.to_str().unwrap()).unwrap();
    let out = train(&cfg).unwrap();
    assert_eq!((out.train_pairs, out.test_pairs), (320, 80));
    assert!(out.final_report.map_avg > 0.9, "{}", out.final_report.map_avg);
}

#[test]
fn full_grid_emits_one_row_per_variant() {
    let mut cfg = desk(5);
    cfg.set("model.hidden", "32,32").unwrap();
    let rows = run_bench(&cfg, &VARIANTS).unwrap();
    assert_eq!(rows.len(), VARIANTS.len());
    for (row, name) in rows.iter().zip(VARIANTS) {
        assert_eq!(row.variant, name);
        for m in [row.map_a2v, row.map_v2a, row.map_avg] {
            assert!((0.0..=1.0).contains(&m), "{name}: {m}");
        }
    }
}
