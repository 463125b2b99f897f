//! Structural similarity and PSNR on real-valued (magnitude) images.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Stabilizing constants and window geometry for SSIM.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimConstants {
    pub c1: f64,
    pub c2: f64,
    /// Side of the sliding Gaussian window; odd.
    pub window_size: usize,
    /// Standard deviation of the Gaussian window, in pixels.
    pub sigma: f64,
    pub dynamic_range: f64,
}

impl SsimConstants {
    /// `c1 = (0.01 L)^2`, `c2 = (0.03 L)^2`, 11x11 window with sigma 1.5.
    pub fn for_range(dynamic_range: f64) -> Self {
        Self {
            c1: (0.01 * dynamic_range).powi(2),
            c2: (0.03 * dynamic_range).powi(2),
            window_size: 11,
            sigma: 1.5,
            dynamic_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::Domain("SSIM constants c1 and c2 must be > 0".into()));
        }
        if self.window_size == 0 || self.window_size % 2 == 0 {
            return Err(Error::Domain(format!(
                "SSIM window size {} must be odd",
                self.window_size
            )));
        }
        if !(self.sigma > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::Domain("SSIM sigma and dynamic range must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for SsimConstants {
    fn default() -> Self {
        Self::for_range(1.0)
    }
}

fn check_shapes(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("shape mismatch: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// Combines first and second moments into the SSIM value.
pub fn ssim_from_moments(mu_u: f64, mu_v: f64, var_u: f64, var_v: f64, cov: f64, k: &SsimConstants) -> f64 {
    let luminance = (2.0 * mu_u * mu_v + k.c1) / (mu_u * mu_u + mu_v * mu_v + k.c1);
    let structure = (2.0 * cov + k.c2) / (var_u + var_v + k.c2);
    luminance * structure
}

/// SSIM of two equally shaped patches with uniform weighting and population
/// (1/n) variances.
pub fn ssim_patch(u: ArrayView2<f64>, v: ArrayView2<f64>, k: &SsimConstants) -> Result<f64> {
    check_shapes(u.dim(), v.dim())?;
    if u.is_empty() {
        return Err(Error::Empty("SSIM patch".into()));
    }
    let n = u.len() as f64;
    let mu_u = u.sum() / n;
    let mu_v = v.sum() / n;
    let (mut var_u, mut var_v, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v.iter()) {
        let (da, db) = (a - mu_u, b - mu_v);
        var_u += da * da;
        var_v += db * db;
        cov += da * db;
    }
    Ok(ssim_from_moments(mu_u, mu_v, var_u / n, var_v / n, cov / n, k))
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Normalized 2-D Gaussian window (outer product of [`gaussian_taps`]).
pub fn gaussian_window(size: usize, sigma: f64) -> Array2<f64> {
    let taps = gaussian_taps(size, sigma);
    Array2::from_shape_fn((size, size), |(r, c)| taps[r] * taps[c])
}

/// Valid-mode separable correlation with `taps` along both axes.
fn filter_valid(img: &Array2<f64>, taps: &[f64], exec: Exec) -> Array2<f64> {
    let (h, w) = img.dim();
    let win = taps.len();
    let (oh, ow) = (h - win + 1, w - win + 1);
    let src = img.as_standard_layout();
    let src = src.as_slice().expect("standard layout");

    let mut horiz = vec![0.0; h * ow];
    exec.for_each_row(&mut horiz, ow, |r, row| {
        let line = &src[r * w..(r + 1) * w];
        for (c, out) in row.iter_mut().enumerate() {
            *out = taps.iter().zip(&line[c..c + win]).map(|(t, x)| t * x).sum();
        }
    });

    let mut out = vec![0.0; oh * ow];
    exec.for_each_row(&mut out, ow, |r, row| {
        for (i, t) in taps.iter().enumerate() {
            let line = &horiz[(r + i) * ow..(r + i + 1) * ow];
            for (o, x) in row.iter_mut().zip(line) {
                *o += t * x;
            }
        }
    });
    Array2::from_shape_vec((oh, ow), out).expect("sized above")
}

/// Per-window SSIM over every valid position of the sliding Gaussian window.
pub fn ssim_map(a: ArrayView2<f64>, b: ArrayView2<f64>, k: &SsimConstants, exec: Exec) -> Result<Array2<f64>> {
    check_shapes(a.dim(), b.dim())?;
    k.validate()?;
    let (h, w) = a.dim();
    if h < k.window_size || w < k.window_size {
        return Err(Error::Dimension(format!(
            "image {h}x{w} is smaller than the {0}x{0} SSIM window",
            k.window_size
        )));
    }
    let taps = gaussian_taps(k.window_size, k.sigma);
    let a = a.to_owned();
    let b = b.to_owned();
    let products = [a.clone(), b.clone(), &a * &a, &b * &b, &a * &b];
    let moments: Vec<Array2<f64>> = products.iter().map(|p| filter_valid(p, &taps, exec)).collect();
    let [mu_a, mu_b, ea2, eb2, eab] = &moments[..] else {
        unreachable!()
    };
    Ok(Array2::from_shape_fn(mu_a.dim(), |ix| {
        let (ma, mb) = (mu_a[ix], mu_b[ix]);
        ssim_from_moments(ma, mb, ea2[ix] - ma * ma, eb2[ix] - mb * mb, eab[ix] - ma * mb, k)
    }))
}

/// Mean SSIM over all sliding-window positions.
pub fn mean_ssim(a: ArrayView2<f64>, b: ArrayView2<f64>, k: &SsimConstants) -> Result<f64> {
    mean_ssim_with(a, b, k, Exec::default())
}

pub fn mean_ssim_with(a: ArrayView2<f64>, b: ArrayView2<f64>, k: &SsimConstants, exec: Exec) -> Result<f64> {
    let map = ssim_map(a, b, k, exec)?;
    Ok(map.mean().expect("nonempty map"))
}

pub fn mse(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    check_shapes(a.dim(), b.dim())?;
    if a.is_empty() {
        return Err(Error::Empty("MSE input".into()));
    }
    let sum: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(peak^2 / MSE)` in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: ArrayView2<f64>, b: ArrayView2<f64>, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::Domain(format!("PSNR peak {peak} must be > 0")));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}
