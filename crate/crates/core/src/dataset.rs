//! Training-set construction: (zero-filled input, ground truth) pairs with the
//! clean / disjoint-noisy / overlapping-noisy augmentation split.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2, Array3, ArrayView3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kspace::{add_kspace_noise, undersample, zero_filled_recon, ComplexImage};
use crate::mask::SamplingMask;

/// Composition of the training set, as fractions of the emitted pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationPlan {
    /// Noise-free pairs (including the clean copy of overlapping sources).
    pub frac_clean: f64,
    /// Noisy pairs whose clean counterpart is absent from the set.
    pub frac_noisy_disjoint: f64,
    /// Noisy pairs whose clean counterpart is also present.
    pub frac_noisy_overlap: f64,
    /// Noise percentages assigned round-robin to noisy pairs.
    pub noise_levels: Vec<f64>,
    pub seed: u64,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        Self {
            frac_clean: 0.6476,
            frac_noisy_disjoint: 0.3048,
            frac_noisy_overlap: 0.0476,
            noise_levels: vec![10.0, 20.0],
            seed: 0,
        }
    }
}

impl AugmentationPlan {
    /// Plan whose fractions are exactly the ratios of the given pair counts.
    pub fn from_counts(clean: usize, noisy_disjoint: usize, noisy_overlap: usize) -> Result<Self> {
        let total = (clean + noisy_disjoint + noisy_overlap) as f64;
        if total == 0.0 {
            return Err(Error::Empty("augmentation counts".into()));
        }
        Ok(Self {
            frac_clean: clean as f64 / total,
            frac_noisy_disjoint: noisy_disjoint as f64 / total,
            frac_noisy_overlap: noisy_overlap as f64 / total,
            ..Self::default()
        })
    }

    /// Every source used once, without noise.
    pub fn noise_free(seed: u64) -> Self {
        Self {
            frac_clean: 1.0,
            frac_noisy_disjoint: 0.0,
            frac_noisy_overlap: 0.0,
            noise_levels: vec![10.0, 20.0],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.frac_clean, self.frac_noisy_disjoint, self.frac_noisy_overlap];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Domain(format!("augmentation fractions {fracs:?} must lie in [0, 1]")));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-4 {
            return Err(Error::Domain(format!("augmentation fractions sum to {sum}, not 1")));
        }
        if self.frac_clean + self.frac_noisy_disjoint <= 0.0 {
            return Err(Error::Domain("plan uses no source image".into()));
        }
        if self.frac_noisy_overlap > self.frac_clean {
            return Err(Error::Domain("overlap fraction exceeds clean fraction".into()));
        }
        let noisy = self.frac_noisy_disjoint + self.frac_noisy_overlap > 0.0;
        if noisy && self.noise_levels.is_empty() {
            return Err(Error::Domain("noisy groups need at least one noise level".into()));
        }
        if self.noise_levels.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::Domain(format!("noise levels {:?} must be > 0", self.noise_levels)));
        }
        Ok(())
    }

    /// Splits `n_sources` images into groups. Every source is used: sources are
    /// apportioned between clean and disjoint-noisy by largest remainder, then
    /// `round(n * f_overlap / (f_clean + f_disjoint))` clean sources also get a
    /// noisy copy, so that the fractions hold over the emitted pairs.
    pub fn group_sizes(&self, n_sources: usize) -> Result<GroupSizes> {
        self.validate()?;
        let used = self.frac_clean + self.frac_noisy_disjoint;
        let split = largest_remainder(n_sources, &[self.frac_clean / used, self.frac_noisy_disjoint / used]);
        let overlap = ((n_sources as f64 * self.frac_noisy_overlap / used).round() as usize).min(split[0]);
        Ok(GroupSizes {
            clean: split[0],
            noisy_disjoint: split[1],
            noisy_overlap: overlap,
        })
    }
}

/// Apportions `total` by `shares` (summing to 1): floors first, then the
/// largest fractional parts get the leftover units; ties go to the lower index.
pub fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupSizes {
    /// Sources emitted without noise (overlapping ones included).
    pub clean: usize,
    pub noisy_disjoint: usize,
    /// Clean sources that additionally get a noisy copy.
    pub noisy_overlap: usize,
}

impl GroupSizes {
    pub fn total_pairs(&self) -> usize {
        self.clean + self.noisy_disjoint + self.noisy_overlap
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Clean,
    NoisyDisjoint,
    NoisyOverlap,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Clean => "clean",
            Group::NoisyDisjoint => "noisy-disjoint",
            Group::NoisyOverlap => "noisy-overlap",
        })
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "clean" => Ok(Group::Clean),
            "noisy-disjoint" => Ok(Group::NoisyDisjoint),
            "noisy-overlap" => Ok(Group::NoisyOverlap),
            other => Err(format!("unknown group {other:?}")),
        }
    }
}

/// A named source image.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceImage {
    pub id: String,
    pub image: ComplexImage,
}

/// One training or test example. Both tensors are `[channels, n, n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub input: Array3<f32>,
    pub target: Array3<f32>,
    pub noise_percent: f64,
    pub noise_seed: u64,
    pub group: Group,
    pub source_id: String,
}

impl SamplePair {
    pub fn manifest_entry(&self) -> ManifestEntry {
        ManifestEntry {
            source_id: self.source_id.clone(),
            group: self.group,
            noise_percent: self.noise_percent,
            seed: self.noise_seed,
        }
    }
}

/// Real and imaginary parts as two channels, clamped to `[-1, 1]`.
pub fn to_channels(img: &ComplexImage) -> Array3<f32> {
    let n = img.side();
    let data = img.data();
    Array3::from_shape_fn((2, n, n), |(ch, r, c)| {
        let v = data[[r, c]];
        let x = if ch == 0 { v.re } else { v.im };
        x.clamp(-1.0, 1.0) as f32
    })
}

/// Collapses channels to one intensity plane: magnitude for 2-channel
/// (real, imaginary) data, BT.601 luma for 3-channel RGB, identity for 1 channel.
pub fn intensity(planes: ArrayView3<f32>) -> Result<Array2<f64>> {
    let (ch, h, w) = planes.dim();
    match ch {
        1 => Ok(planes.slice(s![0, .., ..]).mapv(f64::from)),
        2 => Ok(Array2::from_shape_fn((h, w), |(r, c)| {
            let re = f64::from(planes[[0, r, c]]);
            let im = f64::from(planes[[1, r, c]]);
            (re * re + im * im).sqrt()
        })),
        3 => Ok(Array2::from_shape_fn((h, w), |(r, c)| {
            crate::sr::luma_bt601(
                f64::from(planes[[0, r, c]]),
                f64::from(planes[[1, r, c]]),
                f64::from(planes[[2, r, c]]),
            )
        })),
        other => Err(Error::Dimension(format!("cannot reduce {other} channels to intensity"))),
    }
}

/// Runs the acquisition pipeline on one image: undersample, add noise, zero-fill.
pub fn make_pair_tensors(
    image: &ComplexImage,
    mask: &SamplingMask,
    noise_percent: f64,
    seed: u64,
) -> Result<(Array3<f32>, Array3<f32>)> {
    let obs = undersample(image, mask)?;
    let obs = add_kspace_noise(&obs, noise_percent, seed)?;
    Ok((to_channels(&zero_filled_recon(&obs)), to_channels(image)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-item seed derived from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(1)))
}

struct Job<'a> {
    source: &'a SourceImage,
    group: Group,
    noise_percent: f64,
    seed: u64,
}

fn sorted_sources<'a>(images: &'a [SourceImage], mask: &SamplingMask) -> Result<Vec<&'a SourceImage>> {
    if images.is_empty() {
        return Err(Error::Empty("dataset needs at least one image".into()));
    }
    let mut sorted: Vec<&SourceImage> = images.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for w in sorted.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::Domain(format!("duplicate source id {:?}", w[0].id)));
        }
    }
    for s in &sorted {
        if s.id.is_empty() || s.id.contains(char::is_whitespace) {
            return Err(Error::Domain(format!("source id {:?} must be nonempty without whitespace", s.id)));
        }
        if s.image.side() != mask.len() {
            return Err(Error::Dimension(format!(
                "image {} has side {}, mask has {}",
                s.id,
                s.image.side(),
                mask.len()
            )));
        }
    }
    Ok(sorted)
}

fn run_jobs(jobs: Vec<Job<'_>>, mask: &SamplingMask, exec: Exec) -> Result<Vec<SamplePair>> {
    let pairs = exec.map_slice(&jobs, |job| {
        make_pair_tensors(&job.source.image, mask, job.noise_percent, job.seed).map(|(input, target)| SamplePair {
            input,
            target,
            noise_percent: job.noise_percent,
            noise_seed: job.seed,
            group: job.group,
            source_id: job.source.id.clone(),
        })
    });
    let mut pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    pairs.sort_by(|a, b| {
        a.source_id
            .cmp(&b.source_id)
            .then(a.noise_percent.total_cmp(&b.noise_percent))
    });
    Ok(pairs)
}

/// Builds the augmented training set. The partition is a pure function of the
/// sorted source ids and `plan.seed`; output is sorted by source id, clean
/// before noisy.
pub fn build_dataset(images: &[SourceImage], mask: &SamplingMask, plan: &AugmentationPlan) -> Result<Vec<SamplePair>> {
    build_dataset_with(images, mask, plan, Exec::default())
}

pub fn build_dataset_with(
    images: &[SourceImage],
    mask: &SamplingMask,
    plan: &AugmentationPlan,
    exec: Exec,
) -> Result<Vec<SamplePair>> {
    let sorted = sorted_sources(images, mask)?;
    let sizes = plan.group_sizes(sorted.len())?;

    let mut order: Vec<usize> = (0..sorted.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(plan.seed));
    let (disjoint, clean) = order.split_at(sizes.noisy_disjoint);
    let overlap = &clean[..sizes.noisy_overlap];

    let level = |k: usize| plan.noise_levels[k % plan.noise_levels.len()];
    let mut jobs = Vec::with_capacity(sizes.total_pairs());
    for &i in clean {
        jobs.push(Job {
            source: sorted[i],
            group: Group::Clean,
            noise_percent: 0.0,
            seed: 0,
        });
    }
    for (k, &i) in disjoint.iter().enumerate() {
        jobs.push(Job {
            source: sorted[i],
            group: Group::NoisyDisjoint,
            noise_percent: level(k),
            seed: derive_seed(plan.seed, i as u64),
        });
    }
    for (k, &i) in overlap.iter().enumerate() {
        jobs.push(Job {
            source: sorted[i],
            group: Group::NoisyOverlap,
            noise_percent: level(k),
            seed: derive_seed(plan.seed, i as u64),
        });
    }
    run_jobs(jobs, mask, exec)
}

/// Every image at one fixed noise level, for evaluation.
pub fn build_eval_set(images: &[SourceImage], mask: &SamplingMask, noise_percent: f64, seed: u64) -> Result<Vec<SamplePair>> {
    let sorted = sorted_sources(images, mask)?;
    let group = if noise_percent > 0.0 { Group::NoisyDisjoint } else { Group::Clean };
    let jobs = sorted
        .iter()
        .enumerate()
        .map(|(i, s)| Job {
            source: s,
            group,
            noise_percent,
            seed: if noise_percent > 0.0 { derive_seed(seed, i as u64) } else { 0 },
        })
        .collect();
    run_jobs(jobs, mask, Exec::default())
}

/// One manifest line: enough to regenerate the pair from its source image.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub source_id: String,
    pub group: Group,
    pub noise_percent: f64,
    pub seed: u64,
}

const MANIFEST_HEADER: &str = "# source_id\tgroup\tnoise_percent\tseed";

pub fn manifest_text(pairs: &[SamplePair]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for p in pairs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            p.source_id, p.group, p.noise_percent, p.noise_seed
        ));
    }
    out
}

pub fn write_manifest(path: impl AsRef<Path>, pairs: &[SamplePair]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, manifest_text(pairs)).map_err(|e| Error::io(path, e))
}

pub fn parse_manifest(text: &str, origin: &Path) -> Result<Vec<ManifestEntry>> {
    let bad = |line: usize, reason: String| Error::format("manifest", origin, format!("line {line}: {reason}"));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, group, noise, seed] = fields[..] else {
            return Err(bad(i + 1, format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        out.push(ManifestEntry {
            source_id: id.to_string(),
            group: group.parse().map_err(|e| bad(i + 1, e))?,
            noise_percent: noise.parse().map_err(|e| bad(i + 1, format!("noise: {e}")))?,
            seed: seed.parse().map_err(|e| bad(i + 1, format!("seed: {e}")))?,
        });
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}
