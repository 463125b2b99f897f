//! Named parameter storage shared by the generator and the critic.

use std::collections::HashMap;

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    ConvWeight,
    Bias,
    BnScale,
    BnShift,
    BnRunningMean,
    BnRunningVar,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamKind::BnRunningMean | ParamKind::BnRunningVar)
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub var: Var,
}

/// Ordered, named collection of variables. Insertion order is the
/// initialization order and the serialization order.
#[derive(Debug)]
pub struct ParamStore {
    device: Device,
    dtype: DType,
    params: Vec<Param>,
    index: HashMap<String, usize>,
    rng: ChaCha8Rng,
}

impl ParamStore {
    pub fn new(dtype: DType, seed: u64) -> Self {
        Self {
            device: Device::Cpu,
            dtype,
            params: Vec::new(),
            index: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    fn insert(&mut self, name: String, kind: ParamKind, values: Vec<f64>, shape: &[usize]) -> Result<Var> {
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter {name}")));
        }
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param { name, kind, var: var.clone() });
        Ok(var)
    }

    /// Glorot-uniform tensor with the given fans.
    pub fn glorot(&mut self, name: String, shape: &[usize], fan_in: usize, fan_out: usize) -> Result<Var> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = shape.iter().product();
        let values = (0..n).map(|_| self.rng.random_range(-bound..bound)).collect();
        self.insert(name, ParamKind::ConvWeight, values, shape)
    }

    pub fn constant(&mut self, name: String, kind: ParamKind, len: usize, value: f64) -> Result<Var> {
        self.insert(name, kind, vec![value; len], &[len])
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn trainable(&self) -> Vec<Var> {
        self.params.iter().filter(|p| p.kind.trainable()).map(|p| p.var.clone()).collect()
    }

    pub fn trainable_params(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().filter(|p| p.kind.trainable())
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.trainable_params().map(|p| p.var.elem_count()).sum()
    }

    /// Overwrites every parameter with the same-named tensor in `values`.
    pub fn assign(&self, values: &HashMap<String, Tensor>) -> Result<()> {
        for p in &self.params {
            let t = values
                .get(&p.name)
                .ok_or_else(|| Error::Shape(format!("missing parameter {}", p.name)))?;
            if t.dims() != p.var.dims() {
                return Err(Error::Shape(format!(
                    "parameter {}: expected {:?}, found {:?}",
                    p.name,
                    p.var.dims(),
                    t.dims()
                )));
            }
            p.var.set(&t.to_dtype(self.dtype)?)?;
        }
        Ok(())
    }

    /// Detached copies of every parameter, keyed by name.
    pub fn snapshot(&self) -> Result<HashMap<String, Tensor>> {
        self.params
            .iter()
            .map(|p| Ok((p.name.clone(), p.var.as_tensor().copy()?.detach())))
            .collect()
    }

    pub fn copy_from(&self, other: &ParamStore) -> Result<()> {
        self.assign(&other.snapshot()?)
    }
}
