//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. `ACCEPTANCE_ONLY=1,5,8` runs a subset.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use candle_core::{DType, Device, Tensor};
use csmri_core::dataset::{build_dataset, build_eval_set, SamplePair, SourceImage};
use csmri_core::kspace::{fft2c, ifft2c, undersample, zero_filled_recon, KSpaceObservation};
use csmri_core::mask::{make_gaussian_1d_mask, selection_frequency};
use csmri_core::metrics::{mean_ssim, psnr, ssim_patch, SsimConstants};
use csmri_core::phantom::make_phantom;
use csmri_core::{AugmentationPlan, ComplexImage, Exec, SamplingMask};
use csmri_gan::config::{Ablation, CriticConfig, GeneratorConfig};
use csmri_gan::critic::score_support;
use csmri_gan::losses::{grad_check, loss_generator, loss_mae, loss_mssim, scalar, AdversarialMode};
use csmri_gan::trainer::{history_csv, moving_average};
use csmri_gan::{evaluate, Critic, Event, Generator, LossWeights, Mode, RunConfig, StepRecord, Trainer};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn values(t: &Tensor) -> Vec<f64> {
    t.to_dtype(DType::F64).unwrap().flatten_all().unwrap().to_vec1().unwrap()
}

fn random_tensor(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

// ---------------------------------------------------------------------------

fn transforms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_rt, mut worst_parseval, mut worst_adj, mut worst_dft) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..50u64 {
        let n = rng.random_range(16..=64usize);
        let x = Array2::from_shape_fn((n, n), |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let img = ComplexImage::new(x.clone()).map_err(err)?;
        let k = fft2c(&img);
        let back = ifft2c(&k);
        let diff: f64 = back.data().iter().zip(x.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        worst_rt = worst_rt.max(diff / img.norm());
        worst_parseval = worst_parseval.max(rel(k.norm(), img.norm()));

        let mask = make_gaussian_1d_mask(n, 0.3, i).map_err(err)?;
        let gy = undersample(&img, &mask).map_err(err)?;
        let lines = mask.lines();
        let u = Array2::from_shape_fn((n, n), |(_, c)| {
            let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if lines[c] {
                v
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let u = ComplexImage::new(u).map_err(err)?;
        let ghu = zero_filled_recon(&KSpaceObservation::new(u.clone(), mask.clone(), 0.0).map_err(err)?);
        let lhs = gy.samples().inner(&u).map_err(err)?;
        let rhs = img.inner(&ghu).map_err(err)?;
        worst_adj = worst_adj.max((lhs - rhs).norm() / (gy.samples().norm() * u.norm()));

        if n <= 32 {
            let direct = oracle::dft2c(&x, false);
            let d: f64 = direct.iter().zip(k.data().iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            worst_dft = worst_dft.max(d / img.norm());
        }
    }
    let detail = format!("round-trip {worst_rt:.1e}, Parseval {worst_parseval:.1e}, adjoint {worst_adj:.1e}, direct DFT {worst_dft:.1e}");
    ensure(worst_rt <= 1e-6 && worst_parseval <= 1e-6 && worst_adj <= 1e-6 && worst_dft <= 1e-6, detail.clone())?;
    Ok(detail)
}

fn masks() -> Check {
    let mut checked = 0;
    for rf in [0.2, 0.3, 0.5] {
        for n in [16usize, 63, 64, 100, 256, 257] {
            for seed in 0..100 {
                let m = make_gaussian_1d_mask(n, rf, seed).map_err(err)?;
                let want = (rf * n as f64).round() as usize;
                let got = m.lines().iter().filter(|&&b| b).count();
                ensure(got == want, format!("n={n} rf={rf} seed={seed}: {got} lines, want {want}"))?;
                ensure(m.lines()[n / 2], format!("n={n} rf={rf} seed={seed}: DC line missing"))?;
                checked += 1;
            }
        }
    }
    let n = 256;
    let sigma = n as f64 / 6.0;
    let profile: Vec<f64> = (0..n).map(|c| (-((c as f64 - 128.0).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let mut rs = Vec::new();
    for rf in [0.2, 0.3, 0.5] {
        let freq = selection_frequency(n, rf, 1000, Exec::default()).map_err(err)?;
        let r = oracle::pearson(&freq, &profile);
        ensure(r > 0.9, format!("rf={rf}: correlation {r:.4}"))?;
        rs.push(format!("{r:.3}"));
    }
    Ok(format!("{checked} masks exact with DC; profile correlation {} (rf 0.2/0.3/0.5)", rs.join("/")))
}

fn metric_oracles() -> Check {
    let k = SsimConstants::default();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..20u64 {
        let n = 16 + 4 * (i as usize % 5);
        let a = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..1.0));
        let noise = 0.02 * (i + 1) as f64;
        let b = a.mapv(|v| (v + noise * rng.random_range(-1.0..1.0f64)).clamp(0.0, 1.0));
        let got = mean_ssim(a.view(), b.view(), &k).map_err(err)?;
        let want = oracle::mean_ssim_naive(a.view(), b.view(), k.window_size, k.sigma, k.c1, k.c2);
        worst = worst.max((got - want).abs());
    }
    ensure(worst <= 1e-6, format!("mean_ssim differs from the sliding-window oracle by {worst:.2e}"))?;
    for seed in 0..5 {
        let u = Array2::from_shape_fn((8, 8), |(r, c)| ((r * 13 + c * 7 + seed * 3) % 17) as f64 / 16.0);
        let s = ssim_patch(u.view(), u.view(), &k).map_err(err)?;
        ensure((s - 1.0).abs() < 1e-12, format!("ssim_patch(u, u) = {s}"))?;
    }
    let flat = Array2::from_elem((8, 8), 0.4);
    ensure((ssim_patch(flat.view(), flat.view(), &k).map_err(err)? - 1.0).abs() < 1e-12, "constant patch")?;
    let mut psnrs = Vec::new();
    for delta in [0.1, 0.01] {
        let a = Array2::from_shape_fn((16, 16), |(r, c)| (r + c) as f64 / 40.0);
        let b = a.mapv(|v| v + delta);
        let got = psnr(a.view(), b.view(), 1.0).map_err(err)?;
        let want = 20.0 * (1.0 / delta).log10();
        ensure((got - want).abs() < 1e-9, format!("psnr offset {delta}: {got} vs {want}"))?;
        psnrs.push(format!("{got:.6}"));
    }
    Ok(format!("ssim oracle error {worst:.1e} over 20 pairs; psnr {} dB", psnrs.join(" / ")))
}

fn architecture() -> Check {
    let gcfg = GeneratorConfig::micro();
    let g = Generator::new(&gcfg, &Ablation::default(), DType::F32, 1).map_err(err)?;

    let zeroed = g.duplicate().map_err(err)?;
    for p in zeroed.store().params().iter().filter(|p| p.name.starts_with("rrdb")) {
        p.var.set(&p.var.as_tensor().zeros_like().map_err(err)?).map_err(err)?;
    }
    let f = random_tensor(&[2, gcfg.rrdb_width, 4, 4], -3.0, 3.0, 2).to_dtype(DType::F32).map_err(err)?;
    for rrdb in zeroed.rrdbs() {
        for mode in [Mode::Eval, Mode::TRAIN_NO_COMMIT] {
            let out = rrdb.forward(&f, mode).map_err(err)?;
            ensure(values(&out) == values(&f), "zero-parameter RRDB is not the identity")?;
        }
    }

    for n in [64usize, 128, 256] {
        let x = random_tensor(&[1, 2, n, n], -4.0, 4.0, n as u64).to_dtype(DType::F32).map_err(err)?;
        let y = g.forward(&x, Mode::Eval).map_err(err)?;
        ensure(y.dims() == [1, 2, n, n], format!("N={n}: output {:?}", y.dims()))?;
        ensure(values(&y).iter().all(|v| v.abs() <= 1.0), format!("N={n}: output leaves [-1, 1]"))?;
    }

    let critic = Critic::new(&CriticConfig::micro(), 2, DType::F32, 3).map_err(err)?;
    let x = random_tensor(&[2, 2, 128, 128], -1.0, 1.0, 4).to_dtype(DType::F32).map_err(err)?;
    let map = values(&critic.score_map(&x, Mode::Eval).map_err(err)?);
    let scores = values(&critic.forward(&x, Mode::Eval).map_err(err)?);
    let p = 128 / 32;
    for (b, s) in scores.iter().enumerate() {
        let mean = map[b * p * p..(b + 1) * p * p].iter().sum::<f64>() / (p * p) as f64;
        ensure((mean - s).abs() < 1e-6, format!("score {s} vs map mean {mean}"))?;
    }

    let n = 512;
    let p = n / 32;
    let base = random_tensor(&[1, 2, n, n], -0.5, 0.5, 5).to_dtype(DType::F32).map_err(err)?;
    let base_map = values(&critic.score_map(&base, Mode::Eval).map_err(err)?);
    let (r0, c0, size) = (240usize, 240usize, 16usize);
    let mut pert = values(&base);
    for ch in 0..2 {
        for r in r0..r0 + size {
            for c in c0..c0 + size {
                pert[(ch * n + r) * n + c] += 1.0;
            }
        }
    }
    let pert = Tensor::from_vec(pert, (1, 2, n, n), &Device::Cpu).map_err(err)?.to_dtype(DType::F32).map_err(err)?;
    let pert_map = values(&critic.score_map(&pert, Mode::Eval).map_err(err)?);
    let plan = critic.plan();
    let sees = |i: usize, lo: usize| {
        let (s, e) = score_support(plan, i);
        s < (lo + size) as i64 && e > lo as i64
    };
    let (mut inside, mut changed) = (0, 0);
    for i in 0..p {
        for j in 0..p {
            let moved = base_map[i * p + j] != pert_map[i * p + j];
            if sees(i, r0) && sees(j, c0) {
                inside += 1;
                changed += usize::from(moved);
            } else {
                ensure(!moved, format!("score ({i}, {j}) responds outside its receptive field"))?;
            }
        }
    }
    ensure(changed > 0, "no score responds to the perturbation")?;
    Ok(format!(
        "RRDB identity exact; shapes 64/128/256 ok; patch {} px; {changed}/{inside} in-field scores moved, {} out-of-field unchanged",
        critic.patch_size(),
        p * p - inside
    ))
}

fn losses_and_gradients() -> Check {
    let k = SsimConstants::default();
    let tgt = random_tensor(&[2, 2, 16, 16], -1.0, 1.0, 6);
    let x = (&tgt + random_tensor(&[2, 2, 16, 16], -0.4, 0.4, 7)).map_err(err)?;
    let w = LossWeights::default();
    let mae = grad_check(|t| loss_mae(t, &tgt), &x, 1e-6).map_err(err)?;
    let mssim = grad_check(|t| loss_mssim(t, &tgt, &k), &x, 1e-6).map_err(err)?;
    let head = random_tensor(&[1, 2, 3, 3], -0.5, 0.5, 8);
    let gen = grad_check(
        |t| {
            let scores = csmri_gan::ops::conv2d(t, &head, 1, 2)?.tanh()?.mean((1, 2, 3))?;
            Ok(loss_generator(t, &tgt, &scores, &w, AdversarialMode::Wasserstein, &k)?.total)
        },
        &x,
        1e-6,
    )
    .map_err(err)?;
    ensure(mae < 1e-3 && mssim < 1e-3 && gen < 1e-3, format!("gradient errors MAE {mae:.1e}, mSSIM {mssim:.1e}, L_GEN {gen:.1e}"))?;

    let d = [0.37, -1.25];
    let scores = Tensor::new(&d, &Device::Cpu).map_err(err)?;
    let l = loss_generator(&x, &tgt, &scores, &w, AdversarialMode::Wasserstein, &k).map_err(err)?;
    let (xv, tv) = (values(&x), values(&tgt));
    let mae_ref = xv.iter().zip(&tv).map(|(a, b)| (a - b).abs()).sum::<f64>() / xv.len() as f64;
    let magnitude = |v: &[f64], b: usize| {
        Array2::from_shape_fn((16, 16), |(r, c)| {
            let re = v[(b * 2 * 16 + r) * 16 + c];
            let im = v[((b * 2 + 1) * 16 + r) * 16 + c];
            (re * re + im * im + 1e-20).sqrt()
        })
    };
    let mut ssim_sum = 0.0;
    for b in 0..2 {
        let (m1, m2) = (magnitude(&xv, b), magnitude(&tv, b));
        ssim_sum += oracle::mean_ssim_naive(m1.view(), m2.view(), k.window_size, k.sigma, k.c1, k.c2);
    }
    let mssim_ref = 1.0 - ssim_sum / 2.0;
    let want = 20.0 * mae_ref + mssim_ref - 0.01 * (d[0] + d[1]) / 2.0;
    let got = scalar(&l.total).map_err(err)?;
    ensure((got - want).abs() <= 1e-6, format!("L_GEN {got} vs composed {want}"))?;
    Ok(format!("max gradient error {:.1e}; composition error {:.1e}", mae.max(mssim).max(gen), (got - want).abs()))
}

fn desk_config(seed: u64, augmentation: bool) -> RunConfig {
    let mut cfg = RunConfig::desk();
    cfg.train.seed = seed;
    cfg.augmentation.seed = seed;
    cfg.train.ablation.augmentation = augmentation;
    cfg.train.checkpoint_every = 250;
    cfg
}

struct DeskData {
    mask: SamplingMask,
    train: Vec<SourceImage>,
    test: Vec<SourceImage>,
}

impl DeskData {
    fn new(cfg: &RunConfig) -> Self {
        let side = cfg.data.side;
        let img = |i: u64| SourceImage { id: format!("phantom{i:03}"), image: make_phantom(side, i).unwrap() };
        Self {
            mask: make_gaussian_1d_mask(side, cfg.data.retain_fraction, cfg.data.mask_seed).unwrap(),
            train: (0..32).map(img).collect(),
            test: (32..40).map(img).collect(),
        }
    }

    fn pairs(&self, plan: &AugmentationPlan) -> Vec<SamplePair> {
        build_dataset(&self.train, &self.mask, plan).unwrap()
    }

    fn eval_sets(&self, cfg: &RunConfig, levels: &[f64]) -> Vec<(f64, Vec<SamplePair>)> {
        levels.iter().map(|&l| (l, build_eval_set(&self.test, &self.mask, l, cfg.data.eval_seed).unwrap())).collect()
    }
}

struct DeskRun {
    history: Vec<StepRecord>,
    params: HashMap<String, Vec<f64>>,
    report: csmri_gan::EvalReport,
    elapsed: Duration,
}

fn store_values(store: &csmri_gan::params::ParamStore) -> HashMap<String, Vec<f64>> {
    store.params().iter().map(|p| (p.name.clone(), values(p.var.as_tensor()))).collect()
}

fn desk_run(cfg: &RunConfig, data: &DeskData, out_dir: Option<&Path>) -> Result<DeskRun, String> {
    let start = Instant::now();
    let mut t = Trainer::new(cfg).map_err(err)?;
    t.train(&data.pairs(&cfg.effective_augmentation()), out_dir, &mut |e| {
        if let Event::Generator(r) = e {
            if r.gen_step % 100 == 0 {
                eprintln!("    step {:>3}  L_GEN {:.4}  critic {:+.5}", r.gen_step, r.total, r.critic_loss);
            }
        }
    })
    .map_err(err)?;
    let elapsed = start.elapsed();
    let report = evaluate(t.generator(), &data.eval_sets(cfg, &[0.0, 20.0]), 8).map_err(err)?;
    Ok(DeskRun {
        history: t.history().to_vec(),
        params: store_values(t.generator().store()),
        report,
        elapsed,
    })
}

#[derive(Default)]
struct Runs {
    cache: HashMap<(u64, bool), DeskRun>,
    checkpoints: Option<tempfile::TempDir>,
}

impl Runs {
    fn get(&mut self, seed: u64, augmentation: bool) -> Result<&DeskRun, String> {
        if !self.cache.contains_key(&(seed, augmentation)) {
            let cfg = desk_config(seed, augmentation);
            let data = DeskData::new(&cfg);
            let dir = if (seed, augmentation) == (0, true) {
                let d = tempfile::tempdir().map_err(err)?;
                let p = d.path().to_path_buf();
                self.checkpoints = Some(d);
                Some(p)
            } else {
                None
            };
            eprintln!("  training seed {seed}, augmentation {augmentation}");
            let run = desk_run(&cfg, &data, dir.as_deref())?;
            self.cache.insert((seed, augmentation), run);
        }
        Ok(&self.cache[&(seed, augmentation)])
    }
}

fn wgan_discipline() -> Check {
    let mut cfg = desk_config(0, true);
    cfg.train.total_gen_steps = 200;
    cfg.train.checkpoint_every = 0;
    let data = DeskData::new(&cfg);
    let mut t = Trainer::new(&cfg).map_err(err)?;
    let mut since_gen = 0;
    let mut bad_counts = Vec::new();
    let mut worst = 0.0f64;
    let mut critic_events = 0;
    t.train(&data.pairs(&cfg.effective_augmentation()), None, &mut |e| match e {
        Event::Critic { max_abs_weight, .. } => {
            since_gen += 1;
            critic_events += 1;
            worst = worst.max(max_abs_weight);
        }
        Event::Generator(r) => {
            if since_gen != 3 {
                bad_counts.push(r.gen_step);
            }
            since_gen = 0;
        }
        Event::Checkpoint(_) => {}
    })
    .map_err(err)?;
    let direct = t
        .critic()
        .store()
        .params()
        .iter()
        .filter(|p| p.kind == csmri_gan::params::ParamKind::ConvWeight)
        .flat_map(|p| values(p.var.as_tensor()))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(t.gen_step() == 200 && critic_events == 600, format!("{} generator / {critic_events} critic steps", t.gen_step()))?;
    ensure(bad_counts.is_empty(), format!("generator steps without exactly 3 critic steps: {bad_counts:?}"))?;
    ensure(worst <= 0.05 && direct <= 0.05, format!("max |w| {worst} (final scan {direct})"))?;
    Ok(format!("200 generator / 600 critic steps, 3:1 throughout; max |w| after any critic step {worst:.4}"))
}

fn augmentation_counts() -> Check {
    let plan = AugmentationPlan::from_counts(13_462, 6_335, 990).map_err(err)?;
    let g = plan.group_sizes(13_462 + 6_335).map_err(err)?;
    ensure((g.clean, g.noisy_disjoint, g.noisy_overlap) == (13_462, 6_335, 990), format!("reference counts gave {g:?}"))?;
    let plan = AugmentationPlan::default();
    let g = plan.group_sizes(1000).map_err(err)?;
    let want = oracle::group_sizes_integer(1000, 6476, 3048, 476);
    ensure((g.clean as u64, g.noisy_disjoint as u64, g.noisy_overlap as u64) == want, format!("n=1000 gave {g:?}, oracle {want:?}"))?;
    let total = g.total_pairs() as f64;
    let fr = [g.clean as f64 / total, g.noisy_disjoint as f64 / total, g.noisy_overlap as f64 / total];
    for (f, target) in fr.iter().zip([0.6476, 0.3048, 0.0476]) {
        ensure((f - target).abs() <= 0.005, format!("fraction {f:.4} vs {target}"))?;
    }
    Ok(format!(
        "13462/6335/990 exact; n=1000 gives {}/{}/{} = {:.2}/{:.2}/{:.2} %",
        g.clean,
        g.noisy_disjoint,
        g.noisy_overlap,
        100.0 * fr[0],
        100.0 * fr[1],
        100.0 * fr[2]
    ))
}

fn end_to_end(runs: &mut Runs) -> Check {
    let run = runs.get(0, true)?;
    let row = run.report.row(0.0).ok_or("no noise-free evaluation row")?;
    let totals: Vec<f64> = run.history.iter().map(|r| r.total).collect();
    ensure(totals.len() == 500, format!("{} generator steps", totals.len()))?;
    let smooth = moving_average(&totals, 25);
    let (early, late) = (smooth[49], smooth[499]);
    let detail = format!(
        "PSNR {:.2} dB vs ZFR {:.2} dB (+{:.2}); mSSIM {:.4} vs {:.4}; smoothed L_GEN {early:.3} -> {late:.3}; {:.0} s",
        row.psnr,
        row.zfr_psnr,
        row.psnr - row.zfr_psnr,
        row.mssim,
        row.zfr_mssim,
        run.elapsed.as_secs_f64()
    );
    ensure(row.psnr - row.zfr_psnr >= 2.0 && row.mssim > row.zfr_mssim && late < early, detail.clone())?;
    Ok(detail)
}

fn robustness(runs: &mut Runs) -> Check {
    let mut deg = |aug: bool| -> Result<(Vec<f64>, Duration), String> {
        let mut out = Vec::new();
        let mut time = Duration::ZERO;
        for seed in 0..3 {
            let run = runs.get(seed, aug)?;
            let p = |l: f64| run.report.row(l).map(|r| r.psnr).ok_or("missing evaluation row");
            out.push(p(0.0)? - p(20.0)?);
            time += run.elapsed;
        }
        Ok((out, time))
    };
    let (with, t1) = deg(true)?;
    let (without, t2) = deg(false)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let fmt = |v: &[f64]| v.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>().join(", ");
    let detail = format!(
        "0->20% PSNR drop: augmented {:.3} dB [{}], unaugmented {:.3} dB [{}]; {:.0} s training",
        mean(&with),
        fmt(&with),
        mean(&without),
        fmt(&without),
        (t1 + t2).as_secs_f64()
    );
    ensure(mean(&with) < mean(&without) && t1 + t2 < Duration::from_secs(45 * 60), detail.clone())?;
    Ok(detail)
}

fn determinism(runs: &mut Runs) -> Check {
    runs.get(0, true)?;
    let cfg = desk_config(0, true);
    let data = DeskData::new(&cfg);
    eprintln!("  repeating seed 0, augmentation true");
    let again = desk_run(&cfg, &data, None)?;
    let first = &runs.cache[&(0, true)];
    ensure(history_csv(&first.history) == history_csv(&again.history), "repeated run produced a different loss log")?;
    ensure(first.params == again.params, "repeated run produced different weights")?;

    let dir = runs.checkpoints.as_ref().ok_or("first run kept no checkpoints")?;
    eprintln!("  resuming from step 250");
    let mut resumed = Trainer::resume(dir.path().join("step-000250.safetensors"), Some(&cfg)).map_err(err)?;
    resumed.train(&data.pairs(&cfg.effective_augmentation()), None, &mut |_| {}).map_err(err)?;
    ensure(history_csv(resumed.history()) == history_csv(&first.history), "resumed loss log differs")?;
    ensure(store_values(resumed.generator().store()) == first.params, "resumed weights differ")?;
    Ok("repeat run and step-250 resume both bit-identical (500-step loss log and weights)".into())
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut runs = Runs::default();
    type Criterion<'a> = (usize, &'a str, Option<Duration>, Box<dyn FnMut(&mut Runs) -> Check + 'a>);
    let criteria: Vec<Criterion> = vec![
        (1, "transform suite", Some(Duration::from_secs(10)), Box::new(|_| transforms())),
        (2, "mask suite", Some(Duration::from_secs(30)), Box::new(|_| masks())),
        (3, "metric oracle suite", Some(Duration::from_secs(30)), Box::new(|_| metric_oracles())),
        (4, "architecture suite", Some(Duration::from_secs(120)), Box::new(|_| architecture())),
        (5, "loss and gradient suite", Some(Duration::from_secs(120)), Box::new(|_| losses_and_gradients())),
        (6, "WGAN discipline", Some(Duration::from_secs(180)), Box::new(|_| wgan_discipline())),
        (7, "augmentation composition", Some(Duration::from_secs(10)), Box::new(|_| augmentation_counts())),
        (8, "end-to-end desk training", Some(Duration::from_secs(15 * 60)), Box::new(end_to_end)),
        (9, "robustness direction", None, Box::new(robustness)),
        (10, "determinism", None, Box::new(determinism)),
    ];
    let mut failed = 0;
    for (id, name, budget, mut check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check(&mut runs);
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {:.1} s, budget {:.0} s", elapsed.as_secs_f64(), b.as_secs_f64())),
            (o, _) => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {id:>2} {name}: {detail} [{:.1} s]", elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
