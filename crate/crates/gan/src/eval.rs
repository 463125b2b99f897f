//! Per-noise-level reconstruction metrics against the zero-filled baseline.

use std::fmt::Write as _;

use csmri_core::dataset::intensity;
use csmri_core::metrics::{mean_ssim, psnr, SsimConstants};
use csmri_core::SamplePair;
use ndarray::Array3;

use crate::data::{stack, unstack};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::layers::Mode;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub noise_percent: f64,
    pub count: usize,
    pub zfr_psnr: f64,
    pub zfr_mssim: f64,
    pub psnr: f64,
    pub mssim: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, noise_percent: f64) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.noise_percent == noise_percent)
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>8}  {:>6}  {:>10}  {:>10}  {:>10}  {:>10}\n",
            "noise %", "images", "ZFR PSNR", "ZFR mSSIM", "PSNR", "mSSIM"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>8}  {:>6}  {:>10.3}  {:>10.4}  {:>10.3}  {:>10.4}",
                r.noise_percent, r.count, r.zfr_psnr, r.zfr_mssim, r.psnr, r.mssim
            );
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("noise_percent,count,zfr_psnr,zfr_mssim,psnr,mssim\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.noise_percent, r.count, r.zfr_psnr, r.zfr_mssim, r.psnr, r.mssim
            );
        }
        out
    }
}

/// PSNR (peak 1) and mean SSIM between the intensity images of two arrays.
pub fn image_metrics(output: &Array3<f32>, target: &Array3<f32>) -> Result<(f64, f64)> {
    let a = intensity(output.view())?;
    let b = intensity(target.view())?;
    Ok((psnr(a.view(), b.view(), 1.0)?, mean_ssim(a.view(), b.view(), &SsimConstants::default())?))
}

/// Eval-mode reconstructions, computed `batch_size` inputs at a time.
pub fn reconstruct(generator: &Generator, inputs: &[&Array3<f32>], batch_size: usize) -> Result<Vec<Array3<f32>>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(batch_size.max(1)) {
        let y = generator.forward(&stack(chunk)?, Mode::Eval)?;
        out.extend(unstack(&y)?);
    }
    Ok(out)
}

/// Metrics for each `(noise level, pairs)` set, with `reconstruct` mapping
/// a set's inputs to outputs.
pub fn evaluate_with<F>(sets: &[(f64, Vec<SamplePair>)], mut reconstruct: F) -> Result<EvalReport>
where
    F: FnMut(&[SamplePair]) -> Result<Vec<Array3<f32>>>,
{
    let mut rows = Vec::with_capacity(sets.len());
    for (noise, pairs) in sets {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument(format!("no test pairs at noise {noise}%")));
        }
        let outputs = reconstruct(pairs)?;
        if outputs.len() != pairs.len() {
            return Err(Error::Shape(format!("{} reconstructions for {} pairs", outputs.len(), pairs.len())));
        }
        let (mut zp, mut zs, mut rp, mut rs) = (0.0, 0.0, 0.0, 0.0);
        for (pair, out) in pairs.iter().zip(&outputs) {
            let (p, s) = image_metrics(&pair.input, &pair.target)?;
            zp += p;
            zs += s;
            let (p, s) = image_metrics(out, &pair.target)?;
            rp += p;
            rs += s;
        }
        let n = pairs.len() as f64;
        rows.push(EvalRow {
            noise_percent: *noise,
            count: pairs.len(),
            zfr_psnr: zp / n,
            zfr_mssim: zs / n,
            psnr: rp / n,
            mssim: rs / n,
        });
    }
    Ok(EvalReport { rows })
}

pub fn evaluate(generator: &Generator, sets: &[(f64, Vec<SamplePair>)], batch_size: usize) -> Result<EvalReport> {
    evaluate_with(sets, |pairs| {
        let inputs: Vec<&Array3<f32>> = pairs.iter().map(|p| &p.input).collect();
        reconstruct(generator, &inputs, batch_size)
    })
}
