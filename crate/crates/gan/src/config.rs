//! Run configuration, read from and written to TOML.

use std::path::Path;

use csmri_core::sr::SrOptions;
use csmri_core::AugmentationPlan;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub num_rrdb: usize,
    pub growth_rate: usize,
    /// β, the scale on every dense-block and RRDB residual branch.
    pub residual_scale: f64,
    /// Channel count at the bottleneck; must equal the last encoder width.
    pub rrdb_width: usize,
    pub encoder_widths: Vec<usize>,
    pub leaky_slope: f64,
    pub bn_momentum: f64,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_rrdb: 12,
            growth_rate: 32,
            residual_scale: 0.2,
            rrdb_width: 512,
            encoder_widths: vec![64, 128, 256, 512, 512],
            leaky_slope: 0.2,
            bn_momentum: 0.1,
            in_channels: 2,
            out_channels: 2,
        }
    }
}

impl GeneratorConfig {
    pub const STAGES: usize = 5;

    /// Widths divided by 8, two RRDBs, growth 8.
    pub fn micro() -> Self {
        Self {
            num_rrdb: 2,
            growth_rate: 8,
            rrdb_width: 64,
            encoder_widths: vec![8, 16, 32, 64, 64],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("generator: {m}")));
        if self.encoder_widths.len() != Self::STAGES {
            return bad(format!("{} encoder stages, expected {}", self.encoder_widths.len(), Self::STAGES));
        }
        if self.encoder_widths.contains(&0) || self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.encoder_widths[Self::STAGES - 1] != self.rrdb_width {
            return bad(format!(
                "last encoder width {} differs from rrdb_width {}",
                self.encoder_widths[Self::STAGES - 1],
                self.rrdb_width
            ));
        }
        if self.num_rrdb == 0 || self.growth_rate == 0 {
            return bad("num_rrdb and growth_rate must be at least 1".into());
        }
        if !(self.residual_scale > 0.0 && self.residual_scale <= 1.0) {
            return bad(format!("residual_scale {} outside (0, 1]", self.residual_scale));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky_slope {} outside [0, 1)", self.leaky_slope));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return bad(format!("bn_momentum {} outside (0, 1]", self.bn_momentum));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticConfig {
    pub num_layers: usize,
    pub base_width: usize,
    pub leaky_slope: f64,
    pub bn_momentum: f64,
    pub clip_threshold: f64,
    /// Score the image concatenated with the zero-filled input.
    pub conditioned: bool,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            num_layers: 11,
            base_width: 64,
            leaky_slope: 0.2,
            bn_momentum: 0.1,
            clip_threshold: 0.05,
            conditioned: false,
        }
    }
}

impl CriticConfig {
    pub fn micro() -> Self {
        Self { base_width: 8, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("critic: {m}")));
        if self.num_layers < 11 {
            return bad(format!("{} layers; the stride plan needs at least 11", self.num_layers));
        }
        if self.base_width == 0 {
            return bad("base_width must be positive".into());
        }
        if !(self.clip_threshold > 0.0) {
            return bad(format!("clip_threshold {} must be positive", self.clip_threshold));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky_slope {} outside [0, 1)", self.leaky_slope));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return bad(format!("bn_momentum {} outside (0, 1]", self.bn_momentum));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha1: 20.0, alpha2: 1.0, alpha3: 0.01 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha1, self.alpha2, self.alpha3].iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config(format!("loss weights must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// Switches for the ablation configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub rrdb_enabled: bool,
    pub bn_in_rrdb: bool,
    pub augmentation: bool,
    /// Wasserstein objective; `false` selects binary cross-entropy.
    pub wasserstein: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self { rrdb_enabled: true, bn_in_rrdb: true, augmentation: true, wasserstein: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Critic updates per generator update.
    pub critic_steps_per_gen: usize,
    pub lr_gen: f64,
    pub lr_critic: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub total_gen_steps: u64,
    /// Generator steps between checkpoints; 0 writes only the final one.
    pub checkpoint_every: u64,
    pub seed: u64,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            critic_steps_per_gen: 3,
            lr_gen: 1e-4,
            lr_critic: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            total_gen_steps: 500,
            checkpoint_every: 0,
            seed: 0,
            ablation: Ablation::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("train: {m}")));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.critic_steps_per_gen == 0 {
            return bad("critic_steps_per_gen must be at least 1".into());
        }
        if !(self.lr_gen >= 0.0 && self.lr_critic >= 0.0) {
            return bad("learning rates must be non-negative".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} {b} outside [0, 1)"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive".into());
        }
        Ok(())
    }
}

/// Acquisition and evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Image side N; must be a multiple of 32.
    pub side: usize,
    pub retain_fraction: f64,
    pub mask_seed: u64,
    pub eval_noise_levels: Vec<f64>,
    pub eval_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            side: 256,
            retain_fraction: 0.2,
            mask_seed: 0,
            eval_noise_levels: vec![0.0, 10.0, 20.0],
            eval_seed: 1,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.side == 0 || self.side % 32 != 0 {
            return Err(Error::Config(format!("data: side {} is not a positive multiple of 32", self.side)));
        }
        if !(self.retain_fraction > 0.0 && self.retain_fraction <= 1.0) {
            return Err(Error::Config(format!("data: retain_fraction {} outside (0, 1]", self.retain_fraction)));
        }
        if self.eval_noise_levels.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Config("data: eval noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub generator: GeneratorConfig,
    pub critic: CriticConfig,
    pub loss: LossWeights,
    pub augmentation: AugmentationPlan,
    pub train: TrainConfig,
    pub sr: SrOptions,
}

impl RunConfig {
    /// Full-size settings.
    pub fn full() -> Self {
        Self::default()
    }

    /// Micro model on 64x64 phantoms, batch 4, learning rates 1e-3 / 2e-3.
    pub fn desk() -> Self {
        Self {
            data: DataConfig { side: 64, retain_fraction: 0.3, ..DataConfig::default() },
            generator: GeneratorConfig::micro(),
            critic: CriticConfig::micro(),
            train: TrainConfig { batch_size: 4, lr_gen: 1e-3, lr_critic: 2e-3, ..TrainConfig::default() },
            ..Self::default()
        }
    }

    /// Micro model on 4x bicubic super-resolution patches.
    pub fn sr_desk() -> Self {
        let mut cfg = Self::desk();
        cfg.data.side = 192;
        cfg.data.eval_noise_levels = vec![0.0];
        cfg.train.ablation.augmentation = false;
        cfg.augmentation = AugmentationPlan::noise_free(0);
        cfg
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "desk" => Ok(Self::desk()),
            "sr" => Ok(Self::sr_desk()),
            other => Err(Error::Config(format!("unknown profile {other:?} (expected full, desk or sr)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.generator.validate()?;
        self.critic.validate()?;
        self.loss.validate()?;
        self.train.validate()?;
        self.augmentation.validate()?;
        Ok(())
    }

    /// Augmentation actually applied: the configured plan, or noise-free
    /// when the augmentation switch is off.
    pub fn effective_augmentation(&self) -> AugmentationPlan {
        if self.train.ablation.augmentation {
            self.augmentation.clone()
        } else {
            AugmentationPlan::noise_free(self.augmentation.seed)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}
