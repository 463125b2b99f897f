//! Patch critic: a stack of convolutions whose final map holds one score per
//! receptive-field patch; the critic output is the mean of that map.

use candle_core::{DType, Tensor};

use crate::config::CriticConfig;
use crate::error::{Error, Result};
use crate::layers::{BatchNorm, Conv2d, ConvBlock, Mode};
use crate::params::ParamStore;

/// Geometry of one convolution in the layer plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub c_in: usize,
    pub c_out: usize,
}

/// Five 4x4 stride-2 convolutions, each followed by a 3x3 stride-1
/// convolution, extra 3x3 layers when `num_layers > 11`, then a 3x3
/// projection to one channel.
pub fn layer_plan(cfg: &CriticConfig, in_channels: usize) -> Vec<LayerGeometry> {
    let b = cfg.base_width;
    let widths = [b, 2 * b, 4 * b, 8 * b, 8 * b];
    let mut plan = Vec::with_capacity(cfg.num_layers);
    let mut c = in_channels;
    for &w in &widths {
        plan.push(LayerGeometry { kernel: 4, stride: 2, padding: 1, c_in: c, c_out: w });
        plan.push(LayerGeometry { kernel: 3, stride: 1, padding: 1, c_in: w, c_out: w });
        c = w;
    }
    while plan.len() + 1 < cfg.num_layers {
        plan.push(LayerGeometry { kernel: 3, stride: 1, padding: 1, c_in: c, c_out: c });
    }
    plan.push(LayerGeometry { kernel: 3, stride: 1, padding: 1, c_in: c, c_out: 1 });
    plan
}

/// Receptive field of one output score and the input-pixel step between
/// neighbouring scores.
pub fn receptive_field(plan: &[LayerGeometry]) -> (usize, usize) {
    plan.iter().fold((1, 1), |(rf, jump), l| (rf + (l.kernel - 1) * jump, jump * l.stride))
}

/// Input rows (inclusive start, exclusive end, possibly outside the image)
/// seen by score `i` along one axis.
pub fn score_support(plan: &[LayerGeometry], i: usize) -> (i64, i64) {
    let (rf, jump) = receptive_field(plan);
    let mut offset = 0i64;
    let mut j = 1i64;
    for l in plan {
        offset -= l.padding as i64 * j;
        j *= l.stride as i64;
    }
    let start = offset + i as i64 * jump as i64;
    (start, start + rf as i64)
}

/// Side of the score map for an input of side `n`.
pub fn score_side(plan: &[LayerGeometry], n: usize) -> Option<usize> {
    plan.iter().try_fold(n, |n, l| {
        let padded = n + 2 * l.padding;
        (padded >= l.kernel).then(|| (padded - l.kernel) / l.stride + 1)
    })
}

pub struct Critic {
    cfg: CriticConfig,
    in_channels: usize,
    plan: Vec<LayerGeometry>,
    store: ParamStore,
    layers: Vec<ConvBlock>,
    head: Conv2d,
}

impl Critic {
    pub fn new(cfg: &CriticConfig, in_channels: usize, dtype: DType, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if in_channels == 0 {
            return Err(Error::Config("critic: in_channels must be positive".into()));
        }
        let plan = layer_plan(cfg, in_channels);
        let mut store = ParamStore::new(dtype, seed);
        let last = plan.len() - 1;
        let mut layers = Vec::with_capacity(last);
        for (i, g) in plan[..last].iter().enumerate() {
            let name = format!("layer{}", i + 1);
            let with_bn = i > 0;
            let conv = Conv2d::new(&mut store, &format!("{name}.conv"), g.c_in, g.c_out, g.kernel, g.stride, g.padding, !with_bn)?;
            let bn = if with_bn {
                Some(BatchNorm::new(&mut store, &format!("{name}.bn"), g.c_out, cfg.bn_momentum)?)
            } else {
                None
            };
            layers.push(ConvBlock { conv, bn, slope: cfg.leaky_slope });
        }
        let g = plan[last];
        let head = Conv2d::new(&mut store, &format!("layer{}.conv", last + 1), g.c_in, g.c_out, g.kernel, g.stride, g.padding, true)?;
        let critic = Self { cfg: cfg.clone(), in_channels, plan, store, layers, head };
        critic.clip_weights(cfg.clip_threshold)?;
        Ok(critic)
    }

    pub fn config(&self) -> &CriticConfig {
        &self.cfg
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn plan(&self) -> &[LayerGeometry] {
        &self.plan
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    /// Patch size m of one score.
    pub fn patch_size(&self) -> usize {
        receptive_field(&self.plan).0
    }

    pub fn duplicate(&self) -> Result<Self> {
        let copy = Self::new(&self.cfg, self.in_channels, self.store.dtype(), 0)?;
        copy.store.copy_from(&self.store)?;
        Ok(copy)
    }

    /// Un-averaged scores, `[B, P, P]`.
    pub fn score_map(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let dims = x.dims();
        if dims.len() != 4 || dims[1] != self.in_channels || dims[2] != dims[3] {
            return Err(Error::Shape(format!("critic expects [B, {}, N, N], got {dims:?}", self.in_channels)));
        }
        if dims[2] % 32 != 0 || score_side(&self.plan, dims[2]).is_none() {
            return Err(Error::Shape(format!("critic needs a side divisible by 32, got {}", dims[2])));
        }
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(&h, mode)?;
        }
        Ok(self.head.forward(&h)?.squeeze(1)?)
    }

    /// Mean patch score per batch element, `[B]`.
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        Ok(self.score_map(x, mode)?.flatten_from(1)?.mean(1)?)
    }

    /// Clamps every convolution weight into `[-threshold, threshold]`.
    /// Biases and batch-norm parameters are left alone.
    pub fn clip_weights(&self, threshold: f64) -> Result<()> {
        if !(threshold > 0.0) {
            return Err(Error::InvalidArgument(format!("clip threshold {threshold} must be positive")));
        }
        let bound = representable_bound(threshold, self.store.dtype());
        for conv in self.layers.iter().map(|l| &l.conv).chain(std::iter::once(&self.head)) {
            let w = conv.weight.as_tensor().clamp(-bound, bound)?;
            conv.weight.set(&w)?;
        }
        Ok(())
    }

    /// Largest absolute convolution weight.
    pub fn max_abs_weight(&self) -> Result<f64> {
        let mut m = 0.0f64;
        for conv in self.layers.iter().map(|l| &l.conv).chain(std::iter::once(&self.head)) {
            let v = conv.weight.as_tensor().abs()?.max_all()?.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            m = m.max(v);
        }
        Ok(m)
    }

    /// Multiplies the projection weights and bias by `factor`.
    pub fn scale_head(&self, factor: f64) -> Result<()> {
        self.head.weight.set(&self.head.weight.as_tensor().affine(factor, 0.0)?)?;
        if let Some(b) = &self.head.bias {
            b.set(&b.as_tensor().affine(factor, 0.0)?)?;
        }
        Ok(())
    }
}

/// Largest value of `dtype` not above `threshold`, so clipped weights never
/// exceed it after rounding.
fn representable_bound(threshold: f64, dtype: DType) -> f64 {
    if dtype != DType::F32 {
        return threshold;
    }
    let b = threshold as f32;
    if f64::from(b) > threshold {
        f64::from(f32::from_bits(b.to_bits() - 1))
    } else {
        f64::from(b)
    }
}
