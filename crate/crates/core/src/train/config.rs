//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! seed = 7
//! data.path = features.avfd
//! loss.margin = 1.2
//! schedule.kind = cosine
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use crate::align::{ScheduleKind, ScheduleSpec};
use crate::dataset::{FeatureFormat, SyntheticSpec};
use crate::encoders::TowerSpec;
use crate::error::{Error, Result};
use crate::eval::DistanceKind;
use crate::nn::OptimizerKind;
use crate::objective::LossConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File {
        path: PathBuf,
        /// Inferred from the extension when absent.
        format: Option<FeatureFormat>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSource,
    /// Separate test file; otherwise the data is split stratified.
    pub test_path: Option<PathBuf>,
    pub train_fraction: f64,
    /// Fraction of training labels reassigned to a wrong class. The test
    /// split is left clean.
    pub label_noise_rate: f64,
    /// Synthetic generator seed; follows `seed` unless set.
    pub synthetic_seed: Option<u64>,
    pub hidden_dims: Vec<usize>,
    pub dropout: f64,
    pub loss: LossConfig,
    /// `total_epochs` always equals `epochs`.
    pub schedule: ScheduleSpec,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub eval_every: usize,
    pub distance: DistanceKind,
    pub out_dir: Option<PathBuf>,
    /// Record wall-clock milliseconds in the metrics stream.
    pub wall_clock: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            data: DataSource::Synthetic(SyntheticSpec::default()),
            test_path: None,
            train_fraction: 0.8,
            label_noise_rate: 0.0,
            synthetic_seed: None,
            hidden_dims: vec![1024; 3],
            dropout: 0.1,
            loss: LossConfig::default(),
            schedule: ScheduleSpec::new(ScheduleKind::Step, 1000),
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-4,
            batch_size: 400,
            epochs: 1000,
            eval_every: 10,
            distance: DistanceKind::Normalized,
            out_dir: None,
            wall_clock: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{value}'")))
}

fn parse_enum<T: FromStr<Err = Error>>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e: Error| Error::config(format!("{key}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn parse_dims(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    /// Parse a config file body on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| e.at(format!("config line {}", n + 1)))?;
        }
        Ok(())
    }

    fn synthetic_mut(&mut self) -> &mut SyntheticSpec {
        if !matches!(self.data, DataSource::Synthetic(_)) {
            self.data = DataSource::Synthetic(SyntheticSpec::default());
        }
        match &mut self.data {
            DataSource::Synthetic(s) => s,
            DataSource::File { .. } => unreachable!(),
        }
    }

    /// Set one key. Unknown keys are configuration errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "data.path" => {
                let format = match &self.data {
                    DataSource::File { format, .. } => *format,
                    DataSource::Synthetic(_) => None,
                };
                self.synthetic_seed = None;
                self.data = DataSource::File {
                    path: PathBuf::from(value),
                    format,
                }
            }
            "data.format" => {
                let f = parse_enum(key, value)?;
                match &mut self.data {
                    DataSource::File { format, .. } => *format = Some(f),
                    DataSource::Synthetic(_) => {
                        return Err(Error::config("data.format needs data.path set first"))
                    }
                }
            }
            "data.test_path" => self.test_path = Some(PathBuf::from(value)),
            "data.train_fraction" => self.train_fraction = parse(key, value)?,
            "data.label_noise" => self.label_noise_rate = parse(key, value)?,
            "synthetic.classes" => self.synthetic_mut().n_classes = parse(key, value)?,
            "synthetic.per_class" => self.synthetic_mut().pairs_per_class = parse(key, value)?,
            "synthetic.audio_dim" => self.synthetic_mut().audio_dim = parse(key, value)?,
            "synthetic.visual_dim" => self.synthetic_mut().visual_dim = parse(key, value)?,
            "synthetic.noise" => self.synthetic_mut().noise = parse(key, value)?,
            "synthetic.correlation" => self.synthetic_mut().correlation = parse(key, value)?,
            "synthetic.seed" => {
                self.synthetic_mut();
                self.synthetic_seed = Some(parse(key, value)?)
            }
            "model.hidden" => self.hidden_dims = parse_dims(key, value)?,
            "model.dropout" => self.dropout = parse(key, value)?,
            "loss.margin" => self.loss.margin = parse(key, value)?,
            "loss.strategy" => self.loss.strategy = parse_enum(key, value)?,
            "loss.anchor" => self.loss.anchor_mode = parse_enum(key, value)?,
            "loss.aa" => self.loss.aa_proxy = parse_enum(key, value)?,
            "loss.aa_temperature" => self.loss.aa_temperature = parse(key, value)?,
            "loss.softmax_temperature" => self.loss.softmax_temperature = parse(key, value)?,
            "loss.w_lab" => self.loss.w_lab = parse(key, value)?,
            "loss.w_cross" => self.loss.w_cross = parse(key, value)?,
            "loss.w_dis" => self.loss.w_dis = parse(key, value)?,
            "schedule.kind" => self.schedule.kind = parse_enum(key, value)?,
            "schedule.r_start" => self.schedule.r_start = parse(key, value)?,
            "schedule.r_end" => self.schedule.r_end = parse(key, value)?,
            "schedule.steps" => self.schedule.steps = parse(key, value)?,
            "optim.kind" => self.optimizer = parse_enum(key, value)?,
            "optim.lr" => self.learning_rate = parse(key, value)?,
            "train.epochs" => {
                self.epochs = parse(key, value)?;
                self.schedule.total_epochs = self.epochs;
            }
            "train.batch" => self.batch_size = parse(key, value)?,
            "train.eval_every" => self.eval_every = parse(key, value)?,
            "eval.distance" => self.distance = parse_enum(key, value)?,
            "output.dir" => self.out_dir = Some(PathBuf::from(value)),
            "metrics.wall_clock" => self.wall_clock = parse_bool(key, value)?,
            _ => return Err(Error::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a fixed order. Feeding these back
    /// through [`RunConfig::set`] reproduces the config.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut e: Vec<(&str, String)> = vec![("seed", self.seed.to_string())];
        match &self.data {
            DataSource::File { path, format } => {
                e.push(("data.path", path.display().to_string()));
                if let Some(f) = format {
                    let f = match f {
                        FeatureFormat::Binary => "binary",
                        FeatureFormat::Csv => "csv",
                    };
                    e.push(("data.format", f.to_string()));
                }
            }
            DataSource::Synthetic(s) => {
                e.push(("synthetic.classes", s.n_classes.to_string()));
                e.push(("synthetic.per_class", s.pairs_per_class.to_string()));
                e.push(("synthetic.audio_dim", s.audio_dim.to_string()));
                e.push(("synthetic.visual_dim", s.visual_dim.to_string()));
                e.push(("synthetic.noise", s.noise.to_string()));
                e.push(("synthetic.correlation", s.correlation.to_string()));
                if let Some(seed) = self.synthetic_seed {
                    e.push(("synthetic.seed", seed.to_string()));
                }
            }
        }
        if let Some(p) = &self.test_path {
            e.push(("data.test_path", p.display().to_string()));
        }
        let hidden: Vec<String> = self.hidden_dims.iter().map(usize::to_string).collect();
        let l = &self.loss;
        let s = &self.schedule;
        e.extend([
            ("data.train_fraction", self.train_fraction.to_string()),
            ("data.label_noise", self.label_noise_rate.to_string()),
            ("model.hidden", hidden.join(",")),
            ("model.dropout", self.dropout.to_string()),
            ("loss.margin", l.margin.to_string()),
            ("loss.strategy", l.strategy.to_string()),
            ("loss.anchor", l.anchor_mode.to_string()),
            ("loss.aa", l.aa_proxy.to_string()),
            ("loss.aa_temperature", l.aa_temperature.to_string()),
            ("loss.softmax_temperature", l.softmax_temperature.to_string()),
            ("loss.w_lab", l.w_lab.to_string()),
            ("loss.w_cross", l.w_cross.to_string()),
            ("loss.w_dis", l.w_dis.to_string()),
            ("schedule.kind", s.kind.to_string()),
            ("schedule.r_start", s.r_start.to_string()),
            ("schedule.r_end", s.r_end.to_string()),
            ("schedule.steps", s.steps.to_string()),
            ("optim.kind", self.optimizer.to_string()),
            ("optim.lr", self.learning_rate.to_string()),
            ("train.epochs", self.epochs.to_string()),
            ("train.batch", self.batch_size.to_string()),
            ("train.eval_every", self.eval_every.to_string()),
            ("eval.distance", self.distance.to_string()),
        ]);
        if let Some(d) = &self.out_dir {
            e.push(("output.dir", d.display().to_string()));
        }
        e.push(("metrics.wall_clock", self.wall_clock.to_string()));
        e.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("data.train_fraction must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.label_noise_rate) {
            return Err(Error::config("data.label_noise must lie in [0, 1]"));
        }
        // Dims are placeholders; this checks hidden widths and dropout.
        TowerSpec::new(1, 2)
            .with_hidden(self.hidden_dims.clone())
            .with_dropout(self.dropout)
            .validate()?;
        self.loss.validate()?;
        if self.schedule.total_epochs != self.epochs {
            return Err(Error::config("schedule length differs from train.epochs"));
        }
        self.schedule.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("optim.lr must be positive"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("train.batch must be at least 2"));
        }
        if self.epochs == 0 {
            return Err(Error::config("train.epochs must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("train.eval_every must be at least 1"));
        }
        Ok(())
    }

    /// The synthetic spec with its seed resolved.
    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        match &self.data {
            DataSource::Synthetic(s) => Some(SyntheticSpec {
                seed: self.synthetic_seed.unwrap_or(self.seed),
                label_noise_rate: 0.0,
                ..s.clone()
            }),
            DataSource::File { .. } => None,
        }
    }
}
