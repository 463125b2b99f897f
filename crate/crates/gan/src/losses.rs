//! Training objectives on tensors, plus a finite-difference gradient checker.

use candle_core::{DType, Tensor, Var};
use csmri_core::metrics::{gaussian_taps, SsimConstants};

use crate::config::LossWeights;
use crate::error::{Error, Result};
use crate::ops;

/// Added under the square root so the magnitude stays differentiable at 0.
const MAGNITUDE_EPS: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversarialMode {
    Wasserstein,
    /// Binary cross-entropy on sigmoid(score).
    Bce,
}

impl AdversarialMode {
    pub fn from_flag(wasserstein: bool) -> Self {
        if wasserstein {
            Self::Wasserstein
        } else {
            Self::Bce
        }
    }
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!("shape mismatch: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Mean absolute error over every element.
pub fn loss_mae(output: &Tensor, target: &Tensor) -> Result<Tensor> {
    same_shape(output, target)?;
    Ok((output - target)?.abs()?.mean_all()?)
}

/// `[B, C, H, W]` to one intensity plane `[B, 1, H, W]`: magnitude for two
/// channels, BT.601 luma for three, identity for one.
pub fn intensity(x: &Tensor) -> Result<Tensor> {
    let (_, c, _, _) = x.dims4()?;
    match c {
        1 => Ok(x.clone()),
        2 => {
            let sq = x.sqr()?.sum_keepdim(1)?;
            Ok((sq + MAGNITUDE_EPS)?.sqrt()?)
        }
        3 => {
            let ch = |i: usize| x.narrow(1, i, 1);
            let y = ((ch(0)?.affine(65.481, 0.0)? + ch(1)?.affine(128.553, 0.0)?)? + ch(2)?.affine(24.966, 0.0)?)?;
            Ok(y.affine(1.0 / 255.0, 16.0 / 255.0)?)
        }
        other => Err(Error::Shape(format!("cannot reduce {other} channels to intensity"))),
    }
}

/// Separable Gaussian filter over valid positions.
fn blur(x: &Tensor, vertical: &Tensor, horizontal: &Tensor) -> Result<Tensor> {
    Ok(ops::conv2d(&ops::conv2d(x, vertical, 0, 1)?, horizontal, 0, 1)?)
}

/// Mean SSIM over every valid window of every image, `[B, 1, H, W]` inputs.
pub fn mean_ssim_tensor(a: &Tensor, b: &Tensor, k: &SsimConstants) -> Result<Tensor> {
    same_shape(a, b)?;
    k.validate()?;
    let (_, _, h, w) = a.dims4()?;
    let size = k.window_size;
    if h < size || w < size {
        return Err(Error::Shape(format!("{h}x{w} image is smaller than the {size}x{size} SSIM window")));
    }
    let taps = Tensor::new(gaussian_taps(size, k.sigma), a.device())?.to_dtype(a.dtype())?;
    let vertical = taps.reshape((1, 1, size, 1))?;
    let horizontal = taps.reshape((1, 1, 1, size))?;
    let f = |t: &Tensor| blur(t, &vertical, &horizontal);
    let mu_a = f(a)?;
    let mu_b = f(b)?;
    let mu_aa = mu_a.sqr()?;
    let mu_bb = mu_b.sqr()?;
    let mu_ab = (&mu_a * &mu_b)?;
    let var_a = (f(&a.sqr()?)? - &mu_aa)?;
    let var_b = (f(&b.sqr()?)? - &mu_bb)?;
    let cov = (f(&(a * b)?)? - &mu_ab)?;
    let num = (mu_ab.affine(2.0, k.c1)? * cov.affine(2.0, k.c2)?)?;
    let den = ((mu_aa + mu_bb)?.affine(1.0, k.c1)? * (var_a + var_b)?.affine(1.0, k.c2)?)?;
    Ok((num / den)?.mean_all()?)
}

/// `1 − mean SSIM` of the intensity images.
pub fn loss_mssim(output: &Tensor, target: &Tensor, k: &SsimConstants) -> Result<Tensor> {
    same_shape(output, target)?;
    let s = mean_ssim_tensor(&intensity(output)?, &intensity(target)?, k)?;
    Ok(s.affine(-1.0, 1.0)?)
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: &Tensor) -> Result<Tensor> {
    let tail = (x.abs()?.neg()?.exp()? + 1.0)?.log()?;
    Ok((x.relu()? + tail)?)
}

/// The adversarial term as it enters the generator loss with weight α₃:
/// `−mean(D)` for Wasserstein, BCE against the real label otherwise.
pub fn adversarial_term(fake_scores: &Tensor, mode: AdversarialMode) -> Result<Tensor> {
    if fake_scores.elem_count() == 0 {
        return Err(Error::InvalidArgument("empty score batch".into()));
    }
    match mode {
        AdversarialMode::Wasserstein => Ok(fake_scores.mean_all()?.neg()?),
        AdversarialMode::Bce => Ok(softplus(&fake_scores.neg()?)?.mean_all()?),
    }
}

/// Components of the generator loss, each a scalar tensor.
#[derive(Clone, Debug)]
pub struct GeneratorLoss {
    pub mae: Tensor,
    pub mssim: Tensor,
    pub adversarial: Tensor,
    pub total: Tensor,
}

pub fn loss_generator(
    output: &Tensor,
    target: &Tensor,
    fake_scores: &Tensor,
    w: &LossWeights,
    mode: AdversarialMode,
    k: &SsimConstants,
) -> Result<GeneratorLoss> {
    w.validate()?;
    let batch = output.dims().first().copied().unwrap_or(0);
    if fake_scores.elem_count() != batch {
        return Err(Error::Shape(format!("{} scores for a batch of {batch}", fake_scores.elem_count())));
    }
    let mae = loss_mae(output, target)?;
    let mssim = loss_mssim(output, target, k)?;
    let adversarial = adversarial_term(fake_scores, mode)?;
    let total = ((mae.affine(w.alpha1, 0.0)? + mssim.affine(w.alpha2, 0.0)?)? + adversarial.affine(w.alpha3, 0.0)?)?;
    Ok(GeneratorLoss { mae, mssim, adversarial, total })
}

/// Weighted sum of already-computed components.
pub fn compose(w: &LossWeights, mae: f64, mssim: f64, adversarial: f64) -> f64 {
    w.alpha1 * mae + w.alpha2 * mssim + w.alpha3 * adversarial
}

/// `mean(fake) − mean(real)` for Wasserstein; the BCE discriminator loss otherwise.
pub fn loss_critic(real_scores: &Tensor, fake_scores: &Tensor, mode: AdversarialMode) -> Result<Tensor> {
    if real_scores.elem_count() == 0 || fake_scores.elem_count() == 0 {
        return Err(Error::InvalidArgument("empty score batch".into()));
    }
    match mode {
        AdversarialMode::Wasserstein => Ok((fake_scores.mean_all()? - real_scores.mean_all()?)?),
        AdversarialMode::Bce => {
            let real = softplus(&real_scores.neg()?)?.mean_all()?;
            let fake = softplus(fake_scores)?.mean_all()?;
            Ok((real + fake)?)
        }
    }
}

/// Scalar Wasserstein critic loss.
pub fn critic_loss_value(real_scores: &[f64], fake_scores: &[f64]) -> Result<f64> {
    if real_scores.is_empty() || fake_scores.is_empty() {
        return Err(Error::InvalidArgument("empty score batch".into()));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok(mean(fake_scores) - mean(real_scores))
}

pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

/// Largest relative discrepancy between the autograd gradient of `f` at
/// `input` and central finite differences with step `epsilon`.
///
/// Relative error is `|a − n| / max(|a|, |n|, 0.01·max|a|)`, so components far
/// below the gradient's scale are judged against that scale.
pub fn grad_check<F>(f: F, input: &Tensor, epsilon: f64) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
    }
    let input = input.to_dtype(DType::F64)?;
    let var = Var::from_tensor(&input)?;
    let loss = f(var.as_tensor())?;
    let grads = loss.backward()?;
    let analytic: Vec<f64> = match grads.get(var.as_tensor()) {
        Some(g) => g.flatten_all()?.to_vec1()?,
        None => vec![0.0; input.elem_count()],
    };
    let base: Vec<f64> = input.flatten_all()?.to_vec1()?;
    let shape = input.dims().to_vec();
    let eval = |values: Vec<f64>| -> Result<f64> { scalar(&f(&Tensor::from_vec(values, shape.as_slice(), input.device())?)?) };
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = (0.01 * scale).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = base.clone();
        plus[i] += epsilon;
        let mut minus = base.clone();
        minus[i] -= epsilon;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}
