//! Loss terms: the cross-modal triplet loss over AA-proxied, normalized
//! embeddings, the label-regression term, the paired-distance term and the
//! composite objective that ties them to a self-distillation partition.

mod aa;
mod composite;
mod terms;
mod triplet;

pub use aa::{aa_backward, aa_forward, aa_proxy, AaForward};
pub use composite::{composite_loss, StepContext, StepOutput};
pub use terms::{label_loss, one_hot, pair_distance_loss};
pub use triplet::{
    build_triplets, cross_modal_triplet_loss, normalized_distance, pairwise_distances, Modality,
    Triplet, TripletSet,
};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripletStrategy {
    /// Every (anchor, positive, negative) combination in the batch.
    All,
    /// Farthest positive and nearest negative per anchor.
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorMode {
    Audio,
    Visual,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AaProxy {
    Identity,
    /// Within-modality softmax attention over the batch.
    Attention,
}

macro_rules! text_enum {
    ($ty:ty, $what:literal, $($name:literal => $variant:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(Error::config(format!(concat!("unknown ", $what, " '{}'"), s))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

text_enum!(TripletStrategy, "triplet strategy", "all" => TripletStrategy::All, "hard" => TripletStrategy::Hard);
text_enum!(AnchorMode, "anchor mode",
    "audio" => AnchorMode::Audio, "visual" => AnchorMode::Visual, "symmetric" => AnchorMode::Symmetric);
text_enum!(AaProxy, "AA proxy", "identity" => AaProxy::Identity, "attention" => AaProxy::Attention);

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub margin: f64,
    pub strategy: TripletStrategy,
    pub anchor_mode: AnchorMode,
    pub aa_proxy: AaProxy,
    pub aa_temperature: f64,
    /// Temperature of the soft-alignment softmax.
    pub softmax_temperature: f64,
    pub w_lab: f64,
    pub w_cross: f64,
    pub w_dis: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: 1.2,
            strategy: TripletStrategy::All,
            anchor_mode: AnchorMode::Symmetric,
            aa_proxy: AaProxy::Attention,
            aa_temperature: 1.0,
            softmax_temperature: 1.0,
            w_lab: 1.0,
            w_cross: 1.0,
            w_dis: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin.is_nan() || self.margin <= 0.0 {
            return Err(Error::config(format!("margin must be positive, got {}", self.margin)));
        }
        if [self.aa_temperature, self.softmax_temperature].iter().any(|t| t.is_nan() || *t <= 0.0) {
            return Err(Error::config("temperatures must be positive"));
        }
        for (name, w) in [("w_lab", self.w_lab), ("w_cross", self.w_cross), ("w_dis", self.w_dis)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config(format!("loss weight {name} must be >= 0, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub l_lab: f64,
    pub l_cross: f64,
    pub l_dis: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn weighted(l_lab: f64, l_cross: f64, l_dis: f64, cfg: &LossConfig) -> Self {
        LossBreakdown {
            l_lab,
            l_cross,
            l_dis,
            total: cfg.w_lab * l_lab + cfg.w_cross * l_cross + cfg.w_dis * l_dis,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_lab.is_finite() && self.l_cross.is_finite() && self.l_dis.is_finite() && self.total.is_finite()
    }
}
