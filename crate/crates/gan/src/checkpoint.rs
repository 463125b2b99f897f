//! Single-file archives: named tensors plus string metadata, stored as safetensors.

use std::collections::HashMap;
use std::path::Path;

use candle_core::{Device, Tensor};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::params::ParamStore;

pub const FORMAT: &str = "csmri-gan/1";
pub const GENERATOR_PREFIX: &str = "generator.";
pub const CRITIC_PREFIX: &str = "critic.";

#[derive(Debug, Default)]
pub struct Archive {
    pub tensors: Vec<(String, Tensor)>,
    pub metadata: HashMap<String, String>,
}

impl Archive {
    pub fn add_store(&mut self, prefix: &str, store: &ParamStore) {
        for p in store.params() {
            self.tensors.push((format!("{prefix}{}", p.name), p.var.as_tensor().clone()));
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut metadata = self.metadata.clone();
        metadata.insert("format".into(), FORMAT.into());
        let data: Vec<(&str, &Tensor)> = self.tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
        safetensors::serialize_to_file(data, &Some(metadata), path).map_err(|e| Error::checkpoint(path, e))
    }
}

/// A loaded archive.
#[derive(Debug)]
pub struct LoadedArchive {
    pub tensors: HashMap<String, Tensor>,
    pub metadata: HashMap<String, String>,
}

impl LoadedArchive {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let (_, header) = safetensors::SafeTensors::read_metadata(&bytes).map_err(|e| Error::checkpoint(path, e))?;
        let metadata = header.metadata().clone().unwrap_or_default();
        match metadata.get("format") {
            Some(f) if f == FORMAT => {}
            other => return Err(Error::checkpoint(path, format!("unsupported format {other:?}"))),
        }
        let tensors = candle_core::safetensors::load_buffer(&bytes, &Device::Cpu).map_err(|e| Error::checkpoint(path, e))?;
        Ok(Self { tensors, metadata })
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint { path: Default::default(), reason: format!("missing metadata {key}") })
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta(key)?;
        raw.parse().map_err(|_| Error::Checkpoint { path: Default::default(), reason: format!("bad metadata {key}={raw}") })
    }

    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::from_toml(self.meta("config")?)
    }

    /// Tensors under `prefix`, with the prefix removed.
    pub fn section(&self, prefix: &str) -> HashMap<String, Tensor> {
        self.tensors
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(prefix).map(|n| (n.to_string(), v.clone())))
            .collect()
    }
}

/// Loads only the generator from a training checkpoint.
pub fn load_generator(path: impl AsRef<Path>) -> Result<(RunConfig, Generator)> {
    let path = path.as_ref();
    let archive = LoadedArchive::load(path)?;
    let cfg = archive.config().map_err(|e| Error::checkpoint(path, e))?;
    let generator = Generator::new(&cfg.generator, &cfg.train.ablation, candle_core::DType::F32, 0)?;
    generator
        .store()
        .assign(&archive.section(GENERATOR_PREFIX))
        .map_err(|e| Error::checkpoint(path, e))?;
    Ok((cfg, generator))
}
