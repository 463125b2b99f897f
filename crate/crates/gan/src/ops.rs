//! 2-D convolution and transposed convolution with an explicit backward pass.
//!
//! The forward pass is candle's. The backward pass is computed here from
//! contiguous operands: candle 0.8's CPU convolution returns wrong values for
//! a non-contiguous kernel, which its own backward pass produces when forming
//! kernel gradients.

use candle_core::{CpuStorage, CustomOp2, Device, Layout, Shape, Storage, Tensor};

#[derive(Clone, Copy, Debug)]
enum Kind {
    Conv,
    Transpose,
}

#[derive(Clone, Copy, Debug)]
struct ConvOp {
    kind: Kind,
    padding: usize,
    stride: usize,
}

fn storage_tensor(s: &CpuStorage, l: &Layout) -> candle_core::Result<Tensor> {
    let (start, end) = l
        .contiguous_offsets()
        .ok_or_else(|| candle_core::Error::Msg("convolution operand is not contiguous".into()))?;
    match s {
        CpuStorage::F32(v) => Tensor::from_slice(&v[start..end], l.shape(), &Device::Cpu),
        CpuStorage::F64(v) => Tensor::from_slice(&v[start..end], l.shape(), &Device::Cpu),
        _ => Err(candle_core::Error::Msg("unsupported convolution dtype".into())),
    }
}

fn into_storage(t: &Tensor) -> candle_core::Result<(CpuStorage, Shape)> {
    let shape = t.shape().clone();
    {
        let (storage, layout) = t.storage_and_layout();
        if let Storage::Cpu(c) = &*storage {
            if layout.is_contiguous() && layout.start_offset() == 0 && c_len(c) == shape.elem_count() {
                return Ok((c.clone(), shape));
            }
        }
    }
    let flat = t.flatten_all()?;
    let storage = match t.dtype() {
        candle_core::DType::F32 => CpuStorage::F32(flat.to_vec1()?),
        candle_core::DType::F64 => CpuStorage::F64(flat.to_vec1()?),
        other => return Err(candle_core::Error::Msg(format!("unsupported convolution dtype {other:?}"))),
    };
    Ok((storage, shape))
}

fn c_len(c: &CpuStorage) -> usize {
    match c {
        CpuStorage::F32(v) => v.len(),
        CpuStorage::F64(v) => v.len(),
        _ => usize::MAX,
    }
}

impl ConvOp {
    fn apply(&self, x: &Tensor, k: &Tensor) -> candle_core::Result<Tensor> {
        match self.kind {
            Kind::Conv => x.conv2d(k, self.padding, self.stride, 1, 1),
            Kind::Transpose => x.conv_transpose2d(k, self.padding, 0, self.stride, 1),
        }
    }
}

/// `corr(a, b)` with the batch and channel axes exchanged on every operand,
/// cropped to `k_h × k_w`: the kernel gradient of a strided convolution.
fn kernel_grad(a: &Tensor, b: &Tensor, padding: usize, stride: usize, k_h: usize, k_w: usize) -> candle_core::Result<Tensor> {
    let a = a.transpose(0, 1)?.contiguous()?;
    let b = b.transpose(0, 1)?.contiguous()?;
    let g = a.conv2d(&b, padding, 1, stride, 1)?.transpose(0, 1)?;
    g.narrow(2, 0, k_h)?.narrow(3, 0, k_w)?.contiguous()
}

impl CustomOp2 for ConvOp {
    fn name(&self) -> &'static str {
        match self.kind {
            Kind::Conv => "conv2d-checked",
            Kind::Transpose => "conv-transpose2d-checked",
        }
    }

    fn cpu_fwd(&self, s1: &CpuStorage, l1: &Layout, s2: &CpuStorage, l2: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let y = self.apply(&storage_tensor(s1, l1)?, &storage_tensor(s2, l2)?)?;
        into_storage(&y)
    }

    fn bwd(&self, x: &Tensor, k: &Tensor, _res: &Tensor, grad: &Tensor) -> candle_core::Result<(Option<Tensor>, Option<Tensor>)> {
        let (x, k, grad) = (x.detach().contiguous()?, k.detach().contiguous()?, grad.detach().contiguous()?);
        let (_, _, k_h, k_w) = k.dims4()?;
        let (p, s) = (self.padding, self.stride);
        match self.kind {
            Kind::Conv => {
                let (_, _, g_h, g_w) = grad.dims4()?;
                let (_, _, i_h, i_w) = x.dims4()?;
                let full_h = (g_h - 1) * s + k_h;
                let full_w = (g_w - 1) * s + k_w;
                if i_h + 2 * p < full_h || i_w + 2 * p < full_w {
                    return Err(candle_core::Error::Msg("inconsistent convolution geometry".into()));
                }
                let out_pad_h = i_h + 2 * p - full_h;
                let out_pad_w = i_w + 2 * p - full_w;
                if out_pad_h != out_pad_w {
                    return Err(candle_core::Error::Msg("non-square convolution geometry".into()));
                }
                let dx = grad.conv_transpose2d(&k, p, out_pad_h, s, 1)?;
                let dk = kernel_grad(&x, &grad, p, s, k_h, k_w)?;
                Ok((Some(dx), Some(dk)))
            }
            Kind::Transpose => {
                let dx = grad.conv2d(&k, p, s, 1, 1)?;
                let dk = kernel_grad(&grad, &x, p, s, k_h, k_w)?;
                Ok((Some(dx), Some(dk)))
            }
        }
    }
}

/// Cross-correlation of `x: [B, C_in, H, W]` with `k: [C_out, C_in, kh, kw]`.
pub fn conv2d(x: &Tensor, k: &Tensor, padding: usize, stride: usize) -> candle_core::Result<Tensor> {
    x.contiguous()?
        .apply_op2(&k.contiguous()?, ConvOp { kind: Kind::Conv, padding, stride })
}

/// Transposed convolution of `x: [B, C_in, H, W]` with `k: [C_in, C_out, kh, kw]`.
pub fn conv_transpose2d(x: &Tensor, k: &Tensor, padding: usize, stride: usize) -> candle_core::Result<Tensor> {
    x.contiguous()?
        .apply_op2(&k.contiguous()?, ConvOp { kind: Kind::Transpose, padding, stride })
}
