//! Acquisition simulation, metrics and data construction for compressive-sensing
//! MRI reconstruction.
//!
//! The k-space model is `u = U F y + noise`: `F` is a centered unitary 2-D DFT
//! ([`kspace::fft2c`]), `U` keeps a subset of phase-encode columns drawn from a
//! Gaussian density ([`mask::make_gaussian_1d_mask`]). The network input is the
//! zero-filled reconstruction `F^H U^H u` ([`kspace::zero_filled_recon`]).

pub mod dataset;
pub mod error;
pub mod exec;
pub mod kspace;
pub mod mask;
pub mod metrics;
pub mod phantom;
pub mod raster;
pub mod rawio;
pub mod sr;

pub use dataset::{AugmentationPlan, Group, SamplePair, SourceImage};
pub use error::{Error, Result};
pub use exec::Exec;
pub use kspace::{ComplexImage, KSpaceObservation};
pub use mask::SamplingMask;
pub use metrics::SsimConstants;
