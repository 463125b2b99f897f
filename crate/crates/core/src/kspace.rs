//! Forward acquisition model: centered unitary 2-D Fourier transform, Cartesian
//! line undersampling, complex Gaussian measurement noise and the zero-filled
//! reconstruction.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mask::SamplingMask;

/// Smallest supported image side.
pub const MIN_SIDE: usize = 8;

/// A square complex-valued image (or k-space grid), row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage {
    data: Array2<Complex64>,
}

impl ComplexImage {
    pub fn new(data: Array2<Complex64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows != cols {
            return Err(Error::Dimension(format!(
                "complex image must be square, got {rows}x{cols}"
            )));
        }
        if rows < MIN_SIDE {
            return Err(Error::Dimension(format!(
                "complex image side {rows} is below the minimum of {MIN_SIDE}"
            )));
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
        })
    }

    /// Lifts a real image to a complex one with zero imaginary part.
    pub fn from_real(real: &Array2<f64>) -> Result<Self> {
        Self::new(real.mapv(|v| Complex64::new(v, 0.0)))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(Array2::zeros((n, n)))
    }

    pub fn side(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }

    /// Euclidean norm over all pixels.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self, other> = sum(conj(self) * other)`.
    pub fn inner(&self, other: &ComplexImage) -> Result<Complex64> {
        check_same_side(self.side(), other.side())?;
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

fn check_same_side(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("side mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Circularly shifts both axes so that index `i` moves to `(i + shift) % n`.
fn roll2(data: &Array2<Complex64>, shift: usize) -> Array2<Complex64> {
    let n = data.nrows();
    Array2::from_shape_fn((n, n), |(r, c)| {
        data[[(r + n - shift) % n, (c + n - shift) % n]]
    })
}

fn fft_rows(data: &mut Array2<Complex64>, inverse: bool, exec: Exec) {
    let n = data.ncols();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let slice = data
        .as_slice_mut()
        .expect("complex images are kept in standard layout");
    exec.for_each_row(slice, n, |_, row| fft.process(row));
}

fn centered_transform(img: &ComplexImage, inverse: bool, exec: Exec) -> ComplexImage {
    let n = img.side();
    // ifftshift moves the centre sample to index 0, fftshift moves it back.
    let mut work = roll2(&img.data, n - n / 2);
    fft_rows(&mut work, inverse, exec);
    let mut work = work.reversed_axes().as_standard_layout().into_owned();
    fft_rows(&mut work, inverse, exec);
    let work = work.reversed_axes();
    let scale = 1.0 / n as f64;
    let mut out = roll2(&work.as_standard_layout().into_owned(), n / 2);
    out.mapv_inplace(|c| c * scale);
    ComplexImage { data: out }
}

/// Centered, unitary 2-D DFT. DC lands at index `(n/2, n/2)`.
pub fn fft2c(img: &ComplexImage) -> ComplexImage {
    fft2c_with(img, Exec::default())
}

pub fn fft2c_with(img: &ComplexImage, exec: Exec) -> ComplexImage {
    centered_transform(img, false, exec)
}

/// Inverse of [`fft2c`].
pub fn ifft2c(k: &ComplexImage) -> ComplexImage {
    ifft2c_with(k, Exec::default())
}

pub fn ifft2c_with(k: &ComplexImage, exec: Exec) -> ComplexImage {
    centered_transform(k, true, exec)
}

/// Undersampled (and possibly noisy) k-space measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceObservation {
    samples: ComplexImage,
    mask: SamplingMask,
    noise_percent: f64,
}

impl KSpaceObservation {
    /// Wraps externally acquired k-space. Samples on non-retained lines must be zero.
    pub fn new(samples: ComplexImage, mask: SamplingMask, noise_percent: f64) -> Result<Self> {
        check_same_side(samples.side(), mask.len())?;
        if !(noise_percent >= 0.0) {
            return Err(Error::Domain(format!("noise percent {noise_percent} must be >= 0")));
        }
        let lines = mask.lines();
        let leaks = samples
            .data
            .indexed_iter()
            .any(|((_, c), v)| !lines[c] && *v != Complex64::new(0.0, 0.0));
        if leaks {
            return Err(Error::Domain(
                "k-space samples are nonzero on non-retained lines".into(),
            ));
        }
        Ok(Self {
            samples,
            mask,
            noise_percent,
        })
    }

    pub fn samples(&self) -> &ComplexImage {
        &self.samples
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn noise_percent(&self) -> f64 {
        self.noise_percent
    }
}

/// `u = U F y`: transform and keep only the retained phase-encode columns.
pub fn undersample(img: &ComplexImage, mask: &SamplingMask) -> Result<KSpaceObservation> {
    check_same_side(img.side(), mask.len())?;
    let mut k = fft2c(img);
    apply_mask(&mut k.data, mask);
    Ok(KSpaceObservation {
        samples: k,
        mask: mask.clone(),
        noise_percent: 0.0,
    })
}

fn apply_mask(data: &mut Array2<Complex64>, mask: &SamplingMask) {
    let lines = mask.lines();
    for ((_, c), v) in data.indexed_iter_mut() {
        if !lines[c] {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

/// Root-mean-square magnitude of the samples on retained lines.
pub fn retained_rms(obs: &KSpaceObservation) -> f64 {
    let lines = obs.mask.lines();
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((_, c), v) in obs.samples.data.indexed_iter() {
        if lines[c] {
            sum += v.norm_sqr();
            count += 1;
        }
    }
    (sum / count as f64).sqrt()
}

/// Adds i.i.d. complex Gaussian noise on the retained lines. Each of the real
/// and imaginary components has standard deviation `percent/100` times the RMS
/// magnitude of the retained clean samples.
pub fn add_kspace_noise(obs: &KSpaceObservation, percent: f64, seed: u64) -> Result<KSpaceObservation> {
    if !(percent >= 0.0) || !percent.is_finite() {
        return Err(Error::Domain(format!("noise percent {percent} must be finite and >= 0")));
    }
    if percent == 0.0 {
        return Ok(obs.clone());
    }
    if obs.noise_percent > 0.0 {
        return Err(Error::Domain(
            "observation already carries noise; add noise to clean samples only".into(),
        ));
    }
    let sigma = percent / 100.0 * retained_rms(obs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = obs.mask.lines();
    let mut samples = obs.samples.clone();
    for ((_, c), v) in samples.data.indexed_iter_mut() {
        if lines[c] {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }
    Ok(KSpaceObservation {
        samples,
        mask: obs.mask.clone(),
        noise_percent: percent,
    })
}

/// `x = G^H u`: zero-filled inverse transform of the masked measurements.
pub fn zero_filled_recon(obs: &KSpaceObservation) -> ComplexImage {
    let mut grid = obs.samples.data.clone();
    apply_mask(&mut grid, &obs.mask);
    ifft2c(&ComplexImage { data: grid })
}
