//! Brute-force reference computations, independent of the library code paths.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

/// Centered unitary DFT by direct O(N^4) summation.
pub fn dft2c(x: &Array2<Complex64>, inverse: bool) -> Array2<Complex64> {
    let n = x.nrows();
    let c = (n / 2) as f64;
    let sign = if inverse { 1.0 } else { -1.0 };
    let tau = std::f64::consts::TAU;
    Array2::from_shape_fn((n, n), |(k, l)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..n {
            for q in 0..n {
                let phase = sign * tau * ((k as f64 - c) * (m as f64 - c) + (l as f64 - c) * (q as f64 - c)) / n as f64;
                acc += x[[m, q]] * Complex64::from_polar(1.0, phase);
            }
        }
        acc / n as f64
    })
}

/// Mean SSIM by explicitly visiting every window position and forming the
/// Gaussian-weighted moments from scratch.
pub fn mean_ssim_naive(a: ArrayView2<f64>, b: ArrayView2<f64>, win: usize, sigma: f64, c1: f64, c2: f64) -> f64 {
    let half = (win / 2) as f64;
    let mut w = Array2::from_shape_fn((win, win), |(i, j)| {
        let (di, dj) = (i as f64 - half, j as f64 - half);
        (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp()
    });
    let total = w.sum();
    w.mapv_inplace(|v| v / total);

    let (h, wd) = a.dim();
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in 0..=h - win {
        for c in 0..=wd - win {
            let (mut mu_a, mut mu_b) = (0.0, 0.0);
            for i in 0..win {
                for j in 0..win {
                    mu_a += w[[i, j]] * a[[r + i, c + j]];
                    mu_b += w[[i, j]] * b[[r + i, c + j]];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..win {
                for j in 0..win {
                    let da = a[[r + i, c + j]] - mu_a;
                    let db = b[[r + i, c + j]] - mu_b;
                    va += w[[i, j]] * da * da;
                    vb += w[[i, j]] * db * db;
                    cov += w[[i, j]] * da * db;
                }
            }
            let l = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
            let s = (2.0 * cov + c2) / (va + vb + c2);
            sum += l * s;
            count += 1;
        }
    }
    sum / count as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Group sizes from exact integer arithmetic on plan fractions given in
/// parts per ten thousand: clean/disjoint split by largest remainder over the
/// sources, overlap by round-half-up.
pub fn group_sizes_integer(n: u64, clean_bp: u64, disjoint_bp: u64, overlap_bp: u64) -> (u64, u64, u64) {
    let used = clean_bp + disjoint_bp;
    let c_num = n * clean_bp;
    let d_num = n * disjoint_bp;
    let (mut c, mut d) = (c_num / used, d_num / used);
    if c + d < n {
        // remainders compared exactly; ties go to clean
        if c_num % used >= d_num % used {
            c += 1;
        } else {
            d += 1;
        }
    }
    let o = ((2 * n * overlap_bp + used) / (2 * used)).min(c);
    (c, d, o)
}
