//! Conditional Wasserstein GAN for compressive-sensing MRI reconstruction:
//! an RRDB U-net generator, an 11-layer patch critic, the composite
//! MAE + SSIM + adversarial objective, and the alternating training loop.

pub mod checkpoint;
pub mod config;
pub mod critic;
pub mod data;
pub mod error;
pub mod eval;
pub mod generator;
pub mod layers;
pub mod losses;
pub mod ops;
pub mod optim;
pub mod params;
pub mod trainer;

pub use config::{Ablation, CriticConfig, DataConfig, GeneratorConfig, LossWeights, RunConfig, TrainConfig};
pub use critic::Critic;
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport, EvalRow};
pub use generator::{count_params, Generator};
pub use layers::Mode;
pub use losses::AdversarialMode;
pub use trainer::{Event, StepRecord, Trainer};
