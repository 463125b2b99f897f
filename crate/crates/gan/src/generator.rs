//! U-net generator with residual-in-residual dense blocks at the bottleneck.

use candle_core::{DType, Tensor};

use crate::config::{Ablation, GeneratorConfig};
use crate::error::{Error, Result};
use crate::layers::{leaky_relu, BatchNorm, Conv2d, ConvBlock, ConvTranspose2d, Mode};
use crate::params::ParamStore;

/// Convolutions per dense block.
pub const DENSE_CONVS: usize = 4;
/// Dense blocks per RRDB.
pub const DENSE_BLOCKS: usize = 3;

#[derive(Clone, Debug)]
pub struct DenseBlock {
    pub convs: Vec<ConvBlock>,
    pub beta: f64,
}

impl DenseBlock {
    fn new(store: &mut ParamStore, name: &str, cfg: &GeneratorConfig, bn: bool) -> Result<Self> {
        let (c, g) = (cfg.rrdb_width, cfg.growth_rate);
        let mut convs = Vec::with_capacity(DENSE_CONVS);
        for j in 0..DENSE_CONVS {
            let c_out = if j + 1 == DENSE_CONVS { c } else { g };
            let prefix = format!("{name}.conv{j}");
            let conv = Conv2d::new(store, &prefix, c + j * g, c_out, 3, 1, 1, !bn)?;
            let bn = if bn {
                Some(BatchNorm::new(store, &format!("{name}.bn{j}"), c_out, cfg.bn_momentum)?)
            } else {
                None
            };
            convs.push(ConvBlock { conv, bn, slope: cfg.leaky_slope });
        }
        Ok(Self { convs, beta: cfg.residual_scale })
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut feats = vec![x.clone()];
        let mut last = x.clone();
        for (j, conv) in self.convs.iter().enumerate() {
            let input = if j == 0 { x.clone() } else { Tensor::cat(&feats, 1)? };
            last = conv.forward(&input, mode)?;
            if j + 1 < self.convs.len() {
                feats.push(last.clone());
            }
        }
        Ok((x + last.affine(self.beta, 0.0)?)?)
    }
}

#[derive(Clone, Debug)]
pub struct Rrdb {
    pub blocks: Vec<DenseBlock>,
    pub beta: f64,
    pub width: usize,
}

impl Rrdb {
    fn new(store: &mut ParamStore, name: &str, cfg: &GeneratorConfig, bn: bool) -> Result<Self> {
        let blocks = (0..DENSE_BLOCKS)
            .map(|d| DenseBlock::new(store, &format!("{name}.db{d}"), cfg, bn))
            .collect::<Result<_>>()?;
        Ok(Self { blocks, beta: cfg.residual_scale, width: cfg.rrdb_width })
    }

    /// `f + β·(chain(f) − f)`: all-zero parameters give the identity.
    pub fn forward(&self, f: &Tensor, mode: Mode) -> Result<Tensor> {
        let c = f.dims().get(1).copied().unwrap_or(0);
        if f.rank() != 4 || c != self.width {
            return Err(Error::Shape(format!("RRDB expects [B, {}, H, W], got {:?}", self.width, f.dims())));
        }
        let mut h = f.clone();
        for block in &self.blocks {
            h = block.forward(&h, mode)?;
        }
        Ok((f + (h - f)?.affine(self.beta, 0.0)?)?)
    }
}

#[derive(Clone, Debug)]
struct Decoder {
    up: ConvTranspose2d,
    bn: BatchNorm,
    slope: f64,
}

pub struct Generator {
    cfg: GeneratorConfig,
    ablation: Ablation,
    store: ParamStore,
    encoders: Vec<ConvBlock>,
    rrdbs: Vec<Rrdb>,
    decoders: Vec<Decoder>,
    output: ConvTranspose2d,
}

impl Generator {
    pub fn new(cfg: &GeneratorConfig, ablation: &Ablation, dtype: DType, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new(dtype, seed);
        let w = &cfg.encoder_widths;
        let mut encoders = Vec::with_capacity(w.len());
        let mut c_in = cfg.in_channels;
        for (i, &c_out) in w.iter().enumerate() {
            let name = format!("enc{}", i + 1);
            let conv = Conv2d::new(&mut store, &format!("{name}.conv"), c_in, c_out, 4, 2, 1, false)?;
            let bn = BatchNorm::new(&mut store, &format!("{name}.bn"), c_out, cfg.bn_momentum)?;
            encoders.push(ConvBlock { conv, bn: Some(bn), slope: cfg.leaky_slope });
            c_in = c_out;
        }
        let rrdbs = if ablation.rrdb_enabled {
            (0..cfg.num_rrdb)
                .map(|r| Rrdb::new(&mut store, &format!("rrdb{r}"), cfg, ablation.bn_in_rrdb))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let mut decoders = Vec::with_capacity(w.len() - 1);
        let mut c_in = cfg.rrdb_width;
        for i in (1..w.len()).rev() {
            let c_out = w[i - 1];
            let name = format!("dec{}", i + 1);
            let up = ConvTranspose2d::new(&mut store, &format!("{name}.up"), c_in, c_out, 4, 2, 1, false)?;
            let bn = BatchNorm::new(&mut store, &format!("{name}.bn"), c_out, cfg.bn_momentum)?;
            decoders.push(Decoder { up, bn, slope: cfg.leaky_slope });
            c_in = 2 * c_out;
        }
        let output = ConvTranspose2d::new(&mut store, "dec1.up", c_in, cfg.out_channels, 4, 2, 1, true)?;
        Ok(Self { cfg: cfg.clone(), ablation: *ablation, store, encoders, rrdbs, decoders, output })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn ablation(&self) -> &Ablation {
        &self.ablation
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn rrdbs(&self) -> &[Rrdb] {
        &self.rrdbs
    }

    /// Independent copy with the same parameter values.
    pub fn duplicate(&self) -> Result<Self> {
        let copy = Self::new(&self.cfg, &self.ablation, self.store.dtype(), 0)?;
        copy.store.copy_from(&self.store)?;
        Ok(copy)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let dims = x.dims();
        if dims.len() != 4 || dims[1] != self.cfg.in_channels {
            return Err(Error::Shape(format!("generator expects [B, {}, N, N], got {dims:?}", self.cfg.in_channels)));
        }
        let (h, w) = (dims[2], dims[3]);
        if h != w || h == 0 || h % 32 != 0 {
            return Err(Error::Shape(format!("generator needs a square side divisible by 32, got {h}x{w}")));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        self.forward_ablated(x, mode, None)
    }

    /// Forward pass with the skip tensor of encoder `zero_skip` (1-based,
    /// 1..=4) replaced by zeros.
    pub fn forward_ablated(&self, x: &Tensor, mode: Mode, zero_skip: Option<usize>) -> Result<Tensor> {
        self.check_input(x)?;
        let mut skips = Vec::with_capacity(self.encoders.len());
        let mut h = x.clone();
        for enc in &self.encoders {
            h = enc.forward(&h, mode)?;
            skips.push(h.clone());
        }
        for rrdb in &self.rrdbs {
            h = rrdb.forward(&h, mode)?;
        }
        for (k, dec) in self.decoders.iter().enumerate() {
            let y = dec.bn.forward(&dec.up.forward(&h)?, mode)?;
            let y = leaky_relu(&y, dec.slope)?;
            let level = self.encoders.len() - 1 - k;
            let skip = if zero_skip == Some(level) { skips[level - 1].zeros_like()? } else { skips[level - 1].clone() };
            h = Tensor::cat(&[&y, &skip], 1)?;
        }
        Ok(self.output.forward(&h)?.tanh()?)
    }
}

/// Trainable scalar count, in closed form.
pub fn count_params(cfg: &GeneratorConfig, ablation: &Ablation) -> usize {
    let w = &cfg.encoder_widths;
    let mut total = 0;
    let mut c_in = cfg.in_channels;
    for &c in w {
        total += c_in * c * 16 + 2 * c;
        c_in = c;
    }
    if ablation.rrdb_enabled {
        let (c, g) = (cfg.rrdb_width, cfg.growth_rate);
        let per_conv_extra = |out: usize| if ablation.bn_in_rrdb { 2 * out } else { out };
        let block: usize = (0..DENSE_CONVS)
            .map(|j| {
                let out = if j + 1 == DENSE_CONVS { c } else { g };
                (c + j * g) * out * 9 + per_conv_extra(out)
            })
            .sum();
        total += cfg.num_rrdb * DENSE_BLOCKS * block;
    }
    let mut c_in = cfg.rrdb_width;
    for i in (1..w.len()).rev() {
        total += c_in * w[i - 1] * 16 + 2 * w[i - 1];
        c_in = 2 * w[i - 1];
    }
    total + c_in * cfg.out_channels * 16 + cfg.out_channels
}
