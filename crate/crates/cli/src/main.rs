use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xmsd_core::dataset::{generate_synthetic, load_features, save_features, FeatureFormat, SyntheticSpec};
use xmsd_core::encoders::checkpoint_load;
use xmsd_core::eval::{evaluate, DistanceKind};
use xmsd_core::objective::LossConfig;
use xmsd_core::train::{composite_grad_check, format_table, run_bench, train, RunConfig, VARIANTS};
use xmsd_core::{Error, ErrorClass, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "xmsd", version, about = "Audio-visual retrieval with progressive self-distillation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic paired dataset.
    GenData(GenDataArgs),
    /// Train a two-tower model and write metrics, checkpoint and report.
    Train(RunArgs),
    /// Score a checkpoint on a feature file.
    Eval(EvalArgs),
    /// Run the ablation grid and print a MAP table.
    Bench(BenchArgs),
    /// Finite-difference check of the composite loss gradient.
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 40)]
    per_class: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    audio_dim: usize,
    #[arg(long, default_value_t = 1024)]
    visual_dim: usize,
    /// Per-coordinate noise standard deviation.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0.9)]
    correlation: f64,
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
    /// Output format; inferred from the extension when omitted.
    #[arg(long, value_parser = ["binary", "avfd", "csv"])]
    format: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// AVFD or CSV feature file. Synthetic data is used when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Separate test file; otherwise `--data` is split stratified.
    #[arg(long)]
    test_data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, value_parser = ["step", "linear", "cosine"])]
    schedule: Option<String>,
    #[arg(long)]
    r_start: Option<f64>,
    #[arg(long)]
    r_end: Option<f64>,
    #[arg(long, value_parser = ["all", "hard"])]
    strategy: Option<String>,
    #[arg(long, value_parser = ["identity", "attention"])]
    aa: Option<String>,
    /// Drop the paired-distance term.
    #[arg(long)]
    no_ldis: bool,
    #[arg(long, value_parser = ["audio", "visual", "symmetric"])]
    anchor: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    /// Hidden widths, comma separated.
    #[arg(long)]
    hidden: Option<String>,
    /// Any config key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = ["normalized", "euclidean", "cosine"], default_value = "normalized")]
    distance: String,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated variant names; all variants when omitted.
    #[arg(long)]
    variants: Option<String>,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    pairs: usize,
    #[arg(long, value_parser = ["all", "hard"])]
    strategy: Option<String>,
    #[arg(long, value_parser = ["identity", "attention"])]
    aa: Option<String>,
    #[arg(long, value_parser = ["audio", "visual", "symmetric"])]
    anchor: Option<String>,
}

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &a.config {
        cfg.apply_text(&fs::read_to_string(path)?)
            .map_err(|e| e.at(path.display().to_string()))?;
    }
    let mut set = |k: &str, v: String| cfg.set(k, &v).map_err(|e| e.at(format!("flag for {k}")));
    if let Some(v) = a.seed {
        set("seed", v.to_string())?;
    }
    if let Some(v) = &a.data {
        set("data.path", v.display().to_string())?;
    }
    if let Some(v) = &a.test_data {
        set("data.test_path", v.display().to_string())?;
    }
    if let Some(v) = &a.out {
        set("output.dir", v.display().to_string())?;
    }
    if let Some(v) = a.epochs {
        set("train.epochs", v.to_string())?;
    }
    if let Some(v) = a.batch {
        set("train.batch", v.to_string())?;
    }
    if let Some(v) = &a.schedule {
        set("schedule.kind", v.clone())?;
    }
    if let Some(v) = a.r_start {
        set("schedule.r_start", v.to_string())?;
    }
    if let Some(v) = a.r_end {
        set("schedule.r_end", v.to_string())?;
    }
    if let Some(v) = &a.strategy {
        set("loss.strategy", v.clone())?;
    }
    if let Some(v) = &a.aa {
        set("loss.aa", v.clone())?;
    }
    if a.no_ldis {
        set("loss.w_dis", "0".into())?;
    }
    if let Some(v) = &a.anchor {
        set("loss.anchor", v.clone())?;
    }
    if let Some(v) = a.lr {
        set("optim.lr", v.to_string())?;
    }
    if let Some(v) = &a.hidden {
        set("model.hidden", v.clone())?;
    }
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        set(k.trim(), v.trim().to_string())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_classes: a.classes,
        pairs_per_class: a.per_class,
        audio_dim: a.audio_dim,
        visual_dim: a.visual_dim,
        noise: a.noise,
        correlation: a.correlation,
        label_noise_rate: a.label_noise,
        seed: a.seed,
    };
    let data = generate_synthetic(&spec)?;
    let format = match &a.format {
        Some(f) => f.parse()?,
        None => FeatureFormat::from_path(&a.out),
    };
    save_features(&data, &a.out, format)?;
    println!(
        "wrote {} pairs ({} classes, audio {} / visual {}) to {}",
        data.len(),
        data.meta.n_classes,
        data.meta.audio_dim,
        data.meta.visual_dim,
        a.out.display()
    );
    Ok(())
}

fn train_cmd(a: &RunArgs) -> Result<()> {
    let cfg = run_config(a)?;
    let out = train(&cfg)?;
    print!("{}", out.final_report.to_text());
    println!(
        "steps = {}\ntrain_pairs = {}\ntest_pairs = {}",
        out.steps().count(),
        out.train_pairs,
        out.test_pairs
    );
    if let Some(dir) = &cfg.out_dir {
        println!("output = {}", dir.display());
    }
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let (model, _) = checkpoint_load(&a.checkpoint).map_err(|e| e.at(a.checkpoint.display().to_string()))?;
    let data = load_features(&a.data, FeatureFormat::from_path(&a.data))
        .map_err(|e| e.at(a.data.display().to_string()))?;
    let kind: DistanceKind = a.distance.parse()?;
    let report = evaluate(&model, &data.pairs, kind)?;
    let text = report.to_text();
    print!("{text}");
    if let Some(p) = &a.out {
        fs::write(p, text)?;
    }
    Ok(())
}

fn bench_cmd(a: &BenchArgs) -> Result<()> {
    let cfg = run_config(&a.run)?;
    let names: Vec<&str> = match &a.variants {
        Some(v) => v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect(),
        None => VARIANTS.to_vec(),
    };
    let rows = run_bench(&cfg, &names)?;
    let table = format_table(&rows);
    print!("{table}");
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("bench.txt"), &table)?;
        let json = serde_json::to_string_pretty(&rows).expect("rows serialize");
        fs::write(dir.join("bench.json"), json + "\n")?;
    }
    Ok(())
}

fn grad_check_cmd(a: &GradCheckArgs) -> Result<()> {
    let mut loss = LossConfig::default();
    if let Some(v) = &a.strategy {
        loss.strategy = v.parse()?;
    }
    if let Some(v) = &a.aa {
        loss.aa_proxy = v.parse()?;
    }
    if let Some(v) = &a.anchor {
        loss.anchor_mode = v.parse()?;
    }
    let r = composite_grad_check(a.seed, a.pairs, &loss)?;
    println!("max relative error = {:.3e}", r.max_relative_error);
    println!("coordinates checked = {}", r.coords_checked);
    if r.passed {
        println!("grad check passed");
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "grad check failed: max relative error {:.3e} at {:?}",
            r.max_relative_error, r.worst
        )))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::GradCheck(a) => grad_check_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Numeric => EXIT_NUMERIC,
                ErrorClass::DataOrConfig | ErrorClass::Internal => EXIT_DATA,
            })
        }
    }
}
