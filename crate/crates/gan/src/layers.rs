//! Convolution, transposed convolution and batch normalization over a
//! [`ParamStore`].

use candle_core::{Tensor, Var, D};

use crate::error::Result;
use crate::ops;
use crate::params::{ParamKind, ParamStore};

/// How batch normalization treats statistics during a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Running statistics; no state change.
    Eval,
    /// Batch statistics; running statistics are updated only if `commit`.
    Train { commit: bool },
}

impl Mode {
    pub const TRAIN: Mode = Mode::Train { commit: true };
    pub const TRAIN_NO_COMMIT: Mode = Mode::Train { commit: false };
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(x.maximum(&x.affine(slope, 0.0)?)?)
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: Var,
    pub bias: Option<Var>,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> Result<Self> {
        let k2 = kernel * kernel;
        let weight = store.glorot(format!("{name}.weight"), &[c_out, c_in, kernel, kernel], c_in * k2, c_out * k2)?;
        let bias = if bias {
            Some(store.constant(format!("{name}.bias"), ParamKind::Bias, c_out, 0.0)?)
        } else {
            None
        };
        Ok(Self { weight, bias, stride, padding })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = ops::conv2d(x, &self.weight, self.padding, self.stride)?;
        add_channel_bias(y, self.bias.as_ref())
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }
}

#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    pub weight: Var,
    pub bias: Option<Var>,
    pub stride: usize,
    pub padding: usize,
}

impl ConvTranspose2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> Result<Self> {
        let k2 = kernel * kernel;
        let weight = store.glorot(format!("{name}.weight"), &[c_in, c_out, kernel, kernel], c_in * k2, c_out * k2)?;
        let bias = if bias {
            Some(store.constant(format!("{name}.bias"), ParamKind::Bias, c_out, 0.0)?)
        } else {
            None
        };
        Ok(Self { weight, bias, stride, padding })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = ops::conv_transpose2d(x, &self.weight, self.padding, self.stride)?;
        add_channel_bias(y, self.bias.as_ref())
    }
}

fn add_channel_bias(y: Tensor, bias: Option<&Var>) -> Result<Tensor> {
    match bias {
        Some(b) => Ok(y.broadcast_add(&b.reshape((1, b.elem_count(), 1, 1))?)?),
        None => Ok(y),
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub scale: Var,
    pub shift: Var,
    pub running_mean: Var,
    pub running_var: Var,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new(store: &mut ParamStore, name: &str, channels: usize, momentum: f64) -> Result<Self> {
        Ok(Self {
            scale: store.constant(format!("{name}.scale"), ParamKind::BnScale, channels, 1.0)?,
            shift: store.constant(format!("{name}.shift"), ParamKind::BnShift, channels, 0.0)?,
            running_mean: store.constant(format!("{name}.running_mean"), ParamKind::BnRunningMean, channels, 0.0)?,
            running_var: store.constant(format!("{name}.running_var"), ParamKind::BnRunningVar, channels, 1.0)?,
            momentum,
            eps: Self::EPS,
        })
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let (b, c, h, w) = x.dims4()?;
        let per_channel = |t: &Tensor| t.reshape((1, c, 1, 1));
        let (mean, var) = match mode {
            Mode::Eval => (
                per_channel(self.running_mean.as_tensor())?,
                per_channel(self.running_var.as_tensor())?,
            ),
            Mode::Train { commit } => {
                let flat = x.transpose(0, 1)?.reshape((c, b * h * w))?;
                let mean = flat.mean_keepdim(D::Minus1)?;
                let var = flat.broadcast_sub(&mean)?.sqr()?.mean_keepdim(D::Minus1)?;
                if commit {
                    let n = (b * h * w) as f64;
                    let unbiased = if n > 1.0 { var.affine(n / (n - 1.0), 0.0)? } else { var.clone() };
                    let m = self.momentum;
                    let rm = (self.running_mean.as_tensor().affine(1.0 - m, 0.0)? + mean.flatten_all()?.detach().affine(m, 0.0)?)?;
                    let rv = (self.running_var.as_tensor().affine(1.0 - m, 0.0)? + unbiased.flatten_all()?.detach().affine(m, 0.0)?)?;
                    self.running_mean.set(&rm)?;
                    self.running_var.set(&rv)?;
                }
                (per_channel(&mean)?, per_channel(&var)?)
            }
        };
        let xhat = x.broadcast_sub(&mean)?.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(xhat
            .broadcast_mul(&per_channel(self.scale.as_tensor())?)?
            .broadcast_add(&per_channel(self.shift.as_tensor())?)?)
    }
}

/// Convolution followed by optional batch normalization and leaky ReLU.
#[derive(Clone, Debug)]
pub struct ConvBlock {
    pub conv: Conv2d,
    pub bn: Option<BatchNorm>,
    pub slope: f64,
}

impl ConvBlock {
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut y = self.conv.forward(x)?;
        if let Some(bn) = &self.bn {
            y = bn.forward(&y, mode)?;
        }
        leaky_relu(&y, self.slope)
    }
}
