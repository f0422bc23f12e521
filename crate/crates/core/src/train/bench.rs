use serde::Serialize;

use crate::align::{ScheduleKind, ScheduleSpec};
use crate::error::{Error, Result};
use crate::objective::{AaProxy, TripletStrategy};
use crate::train::{train_variant, RunConfig};

pub const VARIANTS: [&str; 9] = [
    "full",
    "no-ldis",
    "no-self-dis",
    "no-aa",
    "no-ldis-no-aa",
    "linear",
    "cosine",
    "triplet",
    "hard-triplet",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub variant: String,
    pub map_a2v: f64,
    pub map_v2a: f64,
    pub map_avg: f64,
}

/// Derive a variant from the base config. Seeds are left untouched so the
/// variants share data, initialization and batch order.
pub fn variant_config(base: &RunConfig, name: &str) -> Result<RunConfig> {
    let mut c = base.clone();
    match name {
        "full" | "triplet" => c.loss.strategy = TripletStrategy::All,
        "hard-triplet" => c.loss.strategy = TripletStrategy::Hard,
        "no-ldis" => c.loss.w_dis = 0.0,
        "no-self-dis" => c.schedule = ScheduleSpec::constant(c.epochs, 1.0),
        "no-aa" => c.loss.aa_proxy = AaProxy::Identity,
        "no-ldis-no-aa" => {
            c.loss.w_dis = 0.0;
            c.loss.aa_proxy = AaProxy::Identity;
        }
        "linear" => c.schedule.kind = ScheduleKind::Linear,
        "cosine" => c.schedule.kind = ScheduleKind::Cosine,
        _ => {
            return Err(Error::config(format!(
                "unknown variant '{name}' (known: {})",
                VARIANTS.join(", ")
            )))
        }
    }
    if let Some(dir) = &base.out_dir {
        c.out_dir = Some(dir.join(name));
    }
    Ok(c)
}

/// Run each named variant in order. Names are checked before any training.
pub fn run_bench(base: &RunConfig, variants: &[&str]) -> Result<Vec<BenchRow>> {
    let configs: Vec<(&str, RunConfig)> = variants
        .iter()
        .map(|&v| variant_config(base, v).map(|c| (v, c)))
        .collect::<Result<_>>()?;
    configs
        .into_iter()
        .map(|(name, cfg)| {
            let out = train_variant(&cfg, Some(name)).map_err(|e| e.at(format!("variant {name}")))?;
            let r = &out.final_report;
            Ok(BenchRow {
                variant: name.to_string(),
                map_a2v: r.map_a2v,
                map_v2a: r.map_v2a,
                map_avg: r.map_avg,
            })
        })
        .collect()
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut s = format!("{:<16} {:>8} {:>8} {:>8}\n", "variant", "a2v", "v2a", "avg");
    for r in rows {
        s.push_str(&format!(
            "{:<16} {:>8.4} {:>8.4} {:>8.4}\n",
            r.variant, r.map_a2v, r.map_v2a, r.map_avg
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_change_one_thing() {
        let base = RunConfig::from_text("train.epochs = 20").unwrap();
        let v = |n| variant_config(&base, n).unwrap();
        assert_eq!(v("full"), base);
        assert_eq!(v("no-ldis").loss.w_dis, 0.0);
        assert_eq!(v("no-aa").loss.aa_proxy, AaProxy::Identity);
        assert_eq!(v("hard-triplet").loss.strategy, TripletStrategy::Hard);
        let nsd = v("no-self-dis").schedule;
        assert_eq!((nsd.r_start, nsd.r_end, nsd.total_epochs), (1.0, 1.0, 20));
        assert_eq!(v("cosine").schedule.kind, ScheduleKind::Cosine);
        for name in VARIANTS {
            v(name).validate().unwrap();
        }
    }

    #[test]
    fn unknown_variant_is_config_error() {
        let base = RunConfig::default();
        assert!(matches!(variant_config(&base, "no-such"), Err(Error::Config(_))));
        assert!(matches!(run_bench(&base, &["full", "bogus"]), Err(Error::Config(_))));
    }

    #[test]
    fn no_self_dis_never_has_soft_subset() {
        let base = RunConfig::from_text(
            "synthetic.classes = 3\nsynthetic.per_class = 8\nsynthetic.audio_dim = 6\n\
             synthetic.visual_dim = 6\nmodel.hidden = 8\ntrain.epochs = 5\ntrain.batch = 7\n",
        )
        .unwrap();
        let cfg = variant_config(&base, "no-self-dis").unwrap();
        let out = crate::train::train(&cfg).unwrap();
        assert!(out.steps().all(|r| r.n_soft == Some(0)));
        let full = crate::train::train(&base).unwrap();
        assert!(full.steps().any(|r| r.n_soft.unwrap() > 0));
    }

    #[test]
    fn table_layout() {
        let t = format_table(&[BenchRow {
            variant: "full".into(),
            map_a2v: 0.5,
            map_v2a: 0.25,
            map_avg: 0.375,
        }]);
        assert_eq!(t.lines().count(), 2);
        assert!(t.lines().nth(1).unwrap().starts_with("full"));
        assert!(t.contains("0.3750"));
    }
}
