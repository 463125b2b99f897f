//! Variable-density 1-D Cartesian sampling masks.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Retained phase-encode columns. Column `n/2` is the DC line of the centered
/// k-space grid and is always retained.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    lines: Vec<bool>,
    retain_fraction: f64,
    seed: u64,
}

/// Number of lines a mask of side `n` retains at `retain_fraction`.
pub fn retained_count(n: usize, retain_fraction: f64) -> usize {
    (retain_fraction * n as f64).round() as usize
}

pub fn dc_index(n: usize) -> usize {
    n / 2
}

/// Unnormalized Gaussian line density, centred on the DC line with
/// standard deviation `n/6`.
pub fn gaussian_density(n: usize) -> Vec<f64> {
    let sigma = n as f64 / 6.0;
    let center = dc_index(n) as f64;
    (0..n)
        .map(|c| {
            let d = c as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

fn validate(n: usize, retain_fraction: f64) -> Result<usize> {
    if n < crate::kspace::MIN_SIDE {
        return Err(Error::Dimension(format!("mask side {n} is below {}", crate::kspace::MIN_SIDE)));
    }
    if !(retain_fraction > 0.0 && retain_fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "retain fraction {retain_fraction} must lie in (0, 1]"
        )));
    }
    let k = retained_count(n, retain_fraction);
    if k == 0 {
        return Err(Error::Domain(format!(
            "retain fraction {retain_fraction} keeps no line of {n}"
        )));
    }
    Ok(k)
}

/// Draws `round(retain_fraction * n)` distinct columns without replacement,
/// weighted by [`gaussian_density`], with the DC line forced in.
pub fn make_gaussian_1d_mask(n: usize, retain_fraction: f64, seed: u64) -> Result<SamplingMask> {
    let k = validate(n, retain_fraction)?;
    let dc = dc_index(n);
    let mut lines = vec![false; n];
    lines[dc] = true;
    if k == n {
        lines.fill(true);
    } else if k > 1 {
        let density = gaussian_density(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = rand::seq::index::sample_weighted(
            &mut rng,
            n,
            |c| if c == dc { 0.0 } else { density[c] },
            k - 1,
        )
        .map_err(|e| Error::Domain(format!("weighted line sampling failed: {e}")))?;
        for c in picked {
            lines[c] = true;
        }
    }
    Ok(SamplingMask {
        lines,
        retain_fraction,
        seed,
    })
}

impl SamplingMask {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn lines(&self) -> &[bool] {
        &self.lines
    }

    pub fn retain_fraction(&self) -> f64 {
        self.retain_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn retained(&self) -> usize {
        self.lines.iter().filter(|&&b| b).count()
    }

    /// Expands the column pattern to the full `n x n` grid (the matrix form of U).
    pub fn to_grid(&self) -> Array2<bool> {
        let n = self.len();
        Array2::from_shape_fn((n, n), |(_, c)| self.lines[c])
    }

    /// Text form: a `N retain_fraction seed` header line, then N space-separated 0/1 flags.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.len(), self.retain_fraction, self.seed);
        for (i, &b) in self.lines.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push(if b { '1' } else { '0' });
        }
        out.push('\n');
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::format("mask file", origin, reason);
        let mut parts = text.lines();
        let header = parts.next().ok_or_else(|| bad("missing header line".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad(format!("header needs 3 fields, found {}", fields.len())));
        }
        let n: usize = fields[0].parse().map_err(|e| bad(format!("side: {e}")))?;
        let retain_fraction: f64 = fields[1].parse().map_err(|e| bad(format!("retain fraction: {e}")))?;
        let seed: u64 = fields[2].parse().map_err(|e| bad(format!("seed: {e}")))?;
        let expected = validate(n, retain_fraction)?;

        let mut lines = Vec::with_capacity(n);
        for tok in parts.flat_map(str::split_whitespace) {
            match tok {
                "0" => lines.push(false),
                "1" => lines.push(true),
                other => return Err(bad(format!("flag {other:?} is not 0 or 1"))),
            }
        }
        if lines.len() != n {
            return Err(bad(format!("expected {n} flags, found {}", lines.len())));
        }
        if !lines[dc_index(n)] {
            return Err(bad("DC line is not retained".into()));
        }
        let retained = lines.iter().filter(|&&b| b).count();
        if retained != expected {
            return Err(bad(format!(
                "{retained} lines retained, header implies {expected}"
            )));
        }
        Ok(Self {
            lines,
            retain_fraction,
            seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

impl std::fmt::Display for SamplingMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::with_capacity(self.len());
        for &b in &self.lines {
            s.write_char(if b { '|' } else { '.' })?;
        }
        f.write_str(&s)
    }
}

/// Per-column selection frequency over masks drawn with seeds `0..trials`.
pub fn selection_frequency(n: usize, retain_fraction: f64, trials: u64, exec: Exec) -> Result<Vec<f64>> {
    validate(n, retain_fraction)?;
    let masks = exec.map_range(trials as usize, |s| make_gaussian_1d_mask(n, retain_fraction, s as u64));
    let mut freq = vec![0.0; n];
    for mask in masks {
        for (f, &b) in freq.iter_mut().zip(mask?.lines()) {
            if b {
                *f += 1.0;
            }
        }
    }
    freq.iter_mut().for_each(|f| *f /= trials as f64);
    Ok(freq)
}
