//! Bicubic degradation for the super-resolution mode.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{derive_seed, Group, SamplePair};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Catmull-Rom cubic (`a = -0.5`).
pub fn cubic_kernel(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (A + 2.0) * x.powi(3) - (A + 3.0) * x.powi(2) + 1.0
    } else if x < 2.0 {
        A * x.powi(3) - 5.0 * A * x.powi(2) + 8.0 * A * x - 4.0 * A
    } else {
        0.0
    }
}

/// Source indices (edge-clamped) and normalized weights for each output sample.
fn resample_weights(in_len: usize, out_len: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = out_len as f64 / in_len as f64;
    // Downscaling stretches the kernel to act as an anti-aliasing filter.
    let stretch = if scale < 1.0 { scale } else { 1.0 };
    let support = 2.0 / stretch;
    (0..out_len)
        .map(|o| {
            let center = (o as f64 + 0.5) / scale - 0.5;
            let lo = (center - support).floor() as i64;
            let hi = (center + support).ceil() as i64;
            let mut taps: Vec<(usize, f64)> = (lo..=hi)
                .filter_map(|j| {
                    let w = cubic_kernel((center - j as f64) * stretch);
                    (w != 0.0).then(|| (j.clamp(0, in_len as i64 - 1) as usize, w))
                })
                .collect();
            let sum: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= sum);
            taps
        })
        .collect()
}

fn resize_rows(img: ArrayView2<f64>, out_w: usize) -> Array2<f64> {
    let (h, w) = img.dim();
    let table = resample_weights(w, out_w);
    let mut out = vec![0.0; h * out_w];
    Exec::default().for_each_row(&mut out, out_w, |r, row| {
        let src = img.row(r);
        for (o, taps) in row.iter_mut().zip(&table) {
            *o = taps.iter().map(|&(j, wt)| wt * src[j]).sum();
        }
    });
    Array2::from_shape_vec((h, out_w), out).expect("sized above")
}

/// Separable bicubic resize with edge replication.
pub fn bicubic_resize(img: ArrayView2<f64>, out_h: usize, out_w: usize) -> Result<Array2<f64>> {
    let (h, w) = img.dim();
    if h == 0 || w == 0 || out_h == 0 || out_w == 0 {
        return Err(Error::Dimension(format!("cannot resize {h}x{w} to {out_h}x{out_w}")));
    }
    let horiz = resize_rows(img, out_w);
    let vert = resize_rows(horiz.t(), out_h);
    Ok(vert.reversed_axes().as_standard_layout().into_owned())
}

/// Downsamples by `scale` and interpolates back: `(low_res, upsampled)`.
pub fn bicubic_degrade(img: ArrayView2<f64>, scale: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let (h, w) = img.dim();
    if scale == 0 || h % scale != 0 || w % scale != 0 {
        return Err(Error::Dimension(format!("{h}x{w} is not divisible by scale {scale}")));
    }
    let lr = bicubic_resize(img, h / scale, w / scale)?;
    let up = bicubic_resize(lr.view(), h, w)?;
    Ok((lr, up))
}

/// BT.601 luma of RGB in `[0, 1]`, on the studio-swing `[16/255, 235/255]` scale.
pub fn luma_bt601(r: f64, g: f64, b: f64) -> f64 {
    (16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0
}

/// An HR image as `[channels, h, w]` with 1 (grayscale) or 3 (RGB) channels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HrImage {
    pub id: String,
    pub planes: Array3<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrOptions {
    pub scale: usize,
    pub hr_patch: usize,
    pub patches_per_image: usize,
    /// Keep three colour channels instead of reducing to a single luma plane.
    pub rgb: bool,
    pub seed: u64,
}

impl Default for SrOptions {
    fn default() -> Self {
        Self {
            scale: 4,
            hr_patch: 192,
            patches_per_image: 1,
            rgb: false,
            seed: 0,
        }
    }
}

fn grayscale(planes: &Array3<f64>) -> Array2<f64> {
    if planes.len_of(Axis(0)) == 3 {
        let (_, h, w) = planes.dim();
        Array2::from_shape_fn((h, w), |(r, c)| luma_bt601(planes[[0, r, c]], planes[[1, r, c]], planes[[2, r, c]]))
    } else {
        planes.index_axis(Axis(0), 0).to_owned()
    }
}

/// Pairs of (bicubic-degraded patch, HR patch). Grayscale mode emits the
/// 2-channel layout with a zero second channel; RGB mode emits 3 channels.
pub fn build_sr_dataset(hr_images: &[HrImage], opts: &SrOptions) -> Result<Vec<SamplePair>> {
    if hr_images.is_empty() {
        return Err(Error::Empty("super-resolution dataset needs images".into()));
    }
    let p = opts.hr_patch;
    if opts.scale == 0 || p % opts.scale != 0 {
        return Err(Error::Dimension(format!("patch {p} is not divisible by scale {}", opts.scale)));
    }
    let mut jobs = Vec::new();
    for (i, img) in hr_images.iter().enumerate() {
        let (ch, h, w) = img.planes.dim();
        if ch != 1 && ch != 3 {
            return Err(Error::Dimension(format!("{}: {ch} channels", img.id)));
        }
        if opts.rgb && ch != 3 {
            return Err(Error::Dimension(format!("{}: RGB mode needs 3 channels", img.id)));
        }
        if h < p || w < p {
            return Err(Error::Dimension(format!("{}: {h}x{w} is smaller than the {p}x{p} patch", img.id)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, i as u64));
        for k in 0..opts.patches_per_image {
            let top = rng.random_range(0..=h - p);
            let left = rng.random_range(0..=w - p);
            jobs.push((img, k, top, left));
        }
    }
    let pairs = Exec::default().map_slice(&jobs, |&(img, k, top, left)| -> Result<SamplePair> {
        let crop = img.planes.slice(s![.., top..top + p, left..left + p]).to_owned();
        let planes: Vec<Array2<f64>> = if opts.rgb {
            crop.outer_iter().map(|c| c.to_owned()).collect()
        } else {
            vec![grayscale(&crop)]
        };
        let channels = if opts.rgb { 3 } else { 2 };
        let mut input = Array3::<f32>::zeros((channels, p, p));
        let mut target = Array3::<f32>::zeros((channels, p, p));
        for (c, plane) in planes.iter().enumerate() {
            let (_, up) = bicubic_degrade(plane.view(), opts.scale)?;
            input
                .index_axis_mut(Axis(0), c)
                .assign(&up.mapv(|v| v.clamp(-1.0, 1.0) as f32));
            target.index_axis_mut(Axis(0), c).assign(&plane.mapv(|v| v as f32));
        }
        Ok(SamplePair {
            input,
            target,
            noise_percent: 0.0,
            noise_seed: 0,
            group: Group::Clean,
            source_id: format!("{}#{k}", img.id),
        })
    });
    pairs.into_iter().collect()
}
