//! Adam with moments that can be saved and restored.

use std::collections::HashMap;

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};

use crate::error::{Error, Result};
use crate::params::Param;

#[derive(Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    names: Vec<String>,
    vars: Vec<Var>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Param>, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        let mut names = Vec::new();
        let mut vars = Vec::new();
        let mut m = Vec::new();
        let mut v = Vec::new();
        for p in params {
            names.push(p.name.clone());
            vars.push(p.var.clone());
            m.push(p.var.as_tensor().zeros_like()?);
            v.push(p.var.as_tensor().zeros_like()?);
        }
        Ok(Self { lr, beta1, beta2, eps, step: 0, names, vars, m, v })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update from the gradients in `grads`; parameters without a
    /// gradient are treated as having a zero gradient.
    pub fn step(&mut self, grads: &GradStore) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..self.vars.len() {
            let var = &self.vars[i];
            let g = match grads.get(var.as_tensor()) {
                Some(g) => g.detach(),
                None => var.as_tensor().zeros_like()?,
            };
            let m = (self.m[i].affine(self.beta1, 0.0)? + g.affine(1.0 - self.beta1, 0.0)?)?;
            let v = (self.v[i].affine(self.beta2, 0.0)? + g.sqr()?.affine(1.0 - self.beta2, 0.0)?)?;
            if self.lr != 0.0 {
                let denom = (v.affine(1.0 / bc2, 0.0)?.sqrt()? + self.eps)?;
                let update = (m.affine(self.lr / bc1, 0.0)? / denom)?;
                var.set(&(var.as_tensor().detach() - update)?)?;
            }
            self.m[i] = m;
            self.v[i] = v;
        }
        Ok(())
    }

    /// Moments keyed as `<prefix>m.<param>` and `<prefix>v.<param>`.
    pub fn state_tensors(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let mut out = Vec::with_capacity(2 * self.names.len());
        for (i, name) in self.names.iter().enumerate() {
            out.push((format!("{prefix}m.{name}"), self.m[i].clone()));
            out.push((format!("{prefix}v.{name}"), self.v[i].clone()));
        }
        out
    }

    pub fn load_state(&mut self, prefix: &str, step: u64, tensors: &HashMap<String, Tensor>) -> Result<()> {
        for i in 0..self.names.len() {
            for (kind, slot) in [("m", &mut self.m[i]), ("v", &mut self.v[i])] {
                let key = format!("{prefix}{kind}.{}", self.names[i]);
                let t = tensors.get(&key).ok_or_else(|| Error::Shape(format!("missing optimizer state {key}")))?;
                if t.dims() != slot.dims() {
                    return Err(Error::Shape(format!("optimizer state {key}: expected {:?}, found {:?}", slot.dims(), t.dims())));
                }
                *slot = t.to_dtype(slot.dtype())?;
            }
        }
        self.step = step;
        Ok(())
    }
}
