//! Randomized Shepp-Logan-style phantoms for desk-scale experiments.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kspace::{ComplexImage, MIN_SIDE};

/// An ellipse in normalized coordinates (the image spans `[-1, 1]` on both axes).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    pub angle: f64,
    pub intensity: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.angle.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_axes.0).powi(2) + (v / self.semi_axes.1).powi(2) <= 1.0
    }
}

/// Draws 5 to 10 ellipses: an outer "skull", an inner "brain" that darkens it,
/// and 3 to 8 smaller structures inside.
pub fn random_ellipses(seed: u64) -> Vec<Ellipse> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = rng.random_range(5..=10);
    let outer = Ellipse {
        center: (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)),
        semi_axes: (rng.random_range(0.6..0.8), rng.random_range(0.75..0.92)),
        angle: rng.random_range(-0.2..0.2),
        intensity: rng.random_range(0.8..1.0),
    };
    let inner = Ellipse {
        center: (outer.center.0, outer.center.1 - 0.02),
        semi_axes: (outer.semi_axes.0 * 0.9, outer.semi_axes.1 * 0.9),
        angle: outer.angle,
        intensity: -rng.random_range(0.4..0.6),
    };
    let mut out = vec![outer, inner];
    for _ in 2..total {
        let r: f64 = rng.random_range(0.0..0.45);
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let sign = if rng.random_bool(0.6) { 1.0 } else { -1.0 };
        out.push(Ellipse {
            center: (outer.center.0 + r * t.cos(), outer.center.1 + r * t.sin()),
            semi_axes: (rng.random_range(0.04..0.25), rng.random_range(0.04..0.25)),
            angle: rng.random_range(0.0..std::f64::consts::PI),
            intensity: sign * rng.random_range(0.1..0.4),
        });
    }
    out
}

/// Rasterizes ellipses by summing intensities, clamped to `[0, 1]`.
pub fn rasterize(ellipses: &[Ellipse], n: usize, exec: Exec) -> Array2<f64> {
    let mut data = vec![0.0; n * n];
    exec.for_each_row(&mut data, n, |r, row| {
        let y = (2 * r + 1) as f64 / n as f64 - 1.0;
        for (c, px) in row.iter_mut().enumerate() {
            let x = (2 * c + 1) as f64 / n as f64 - 1.0;
            let v: f64 = ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.intensity)
                .sum();
            *px = v.clamp(0.0, 1.0);
        }
    });
    Array2::from_shape_vec((n, n), data).expect("sized above")
}

/// Deterministic random phantom with zero imaginary part and magnitudes in `[0, 1]`.
pub fn make_phantom(n: usize, seed: u64) -> Result<ComplexImage> {
    if n < MIN_SIDE {
        return Err(Error::Dimension(format!("phantom side {n} is below {MIN_SIDE}")));
    }
    ComplexImage::from_real(&rasterize(&random_ellipses(seed), n, Exec::default()))
}
