use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use csmri_core::dataset::{build_dataset, build_eval_set, intensity, make_pair_tensors, write_manifest, SamplePair};
use csmri_core::mask::make_gaussian_1d_mask;
use csmri_core::phantom::make_phantom;
use csmri_core::raster::{load_hr_dir, load_source, load_source_dir, save_grayscale};
use csmri_core::sr::build_sr_dataset;
use csmri_core::SamplingMask;
use csmri_gan::checkpoint::load_generator;
use csmri_gan::eval::{evaluate_with, image_metrics, reconstruct};
use csmri_gan::trainer::history_csv;
use csmri_gan::{evaluate, EvalReport, Event, Generator, RunConfig, Trainer};
use ndarray::Array3;

#[derive(Parser)]
#[command(name = "csmri", version, about = "Compressive-sensing MRI reconstruction with a Wasserstein conditional GAN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a configuration file for a named profile (full, desk, sr).
    InitConfig {
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic phantoms as 16-bit grayscale PNGs.
    Phantoms {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        count: u64,
        #[arg(long, default_value_t = 64)]
        side: usize,
        /// Seed of the first phantom; the rest follow consecutively.
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
    },
    /// Write a 1-D Gaussian undersampling mask.
    Mask {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        side: usize,
        #[arg(long, default_value_t = 0.3)]
        retain: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train on a directory of source images.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Mask file; defaults to the one the configuration describes.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Continue from a checkpoint written with the same configuration.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Report PSNR and mSSIM of reconstructions and zero-filled inputs.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Noise levels in percent; defaults to the configured ones.
        #[arg(long, value_delimiter = ',')]
        noise: Vec<f64>,
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Also write the table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Reconstruct one image and write reconstruction, ZFR, ground truth and difference PNGs.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
        /// Multiplier applied to the absolute difference images.
        #[arg(long, default_value_t = 5.0)]
        diff_gain: f64,
    },
    /// Train the super-resolution mode on a directory of high-resolution PNGs.
    SrTrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a super-resolution checkpoint; the baseline column is bicubic upsampling.
    SrEval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::InitConfig { profile, out } => {
            RunConfig::profile(&profile)?.save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Phantoms { out, count, side, first_seed } => {
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for seed in first_seed..first_seed + count {
                let img = make_phantom(side, seed)?;
                save_grayscale(out.join(format!("phantom{seed:04}.png")), &img.magnitude())?;
            }
            println!("wrote {count} phantoms to {}", out.display());
        }
        Command::Mask { out, side, retain, seed } => {
            let m = make_gaussian_1d_mask(side, retain, seed)?;
            m.save(&out)?;
            println!("{m}");
            println!("{} of {side} lines -> {}", m.retained(), out.display());
        }
        Command::Train { config, data, out, mask, resume } => train(&config, &data, &out, mask.as_deref(), resume.as_deref())?,
        Command::Eval { checkpoint, data, noise, mask, csv } => {
            let (cfg, g) = load_generator(&checkpoint)?;
            let sources = load_source_dir(&data)?;
            let mask = resolve_mask(&cfg, mask.as_deref())?;
            let levels = if noise.is_empty() { cfg.data.eval_noise_levels.clone() } else { noise };
            let sets = levels
                .iter()
                .map(|&l| Ok((l, build_eval_set(&sources, &mask, l, cfg.data.eval_seed)?)))
                .collect::<Result<Vec<_>>>()?;
            report(&evaluate(&g, &sets, cfg.train.batch_size)?, csv.as_deref())?;
        }
        Command::Infer { checkpoint, input, mask, out, noise, noise_seed, diff_gain } => {
            infer(&checkpoint, &input, &mask, &out, noise, noise_seed, diff_gain)?
        }
        Command::SrTrain { config, data, out } => {
            let cfg = RunConfig::load(&config)?;
            let pairs = sr_pairs(&cfg, &data)?;
            run_training(Trainer::new(&cfg)?, &pairs, &out)?;
        }
        Command::SrEval { checkpoint, data, csv } => {
            let (cfg, g) = load_generator(&checkpoint)?;
            let pairs = sr_pairs(&cfg, &data)?;
            let sets = [(0.0, pairs)];
            let rep = evaluate_with(&sets, |p| {
                let inputs: Vec<&Array3<f32>> = p.iter().map(|x| &x.input).collect();
                reconstruct(&g, &inputs, cfg.train.batch_size)
            })?;
            report(&rep, csv.as_deref())?;
        }
    }
    Ok(())
}

fn resolve_mask(cfg: &RunConfig, path: Option<&Path>) -> Result<SamplingMask> {
    let mask = match path {
        Some(p) => SamplingMask::load(p)?,
        None => make_gaussian_1d_mask(cfg.data.side, cfg.data.retain_fraction, cfg.data.mask_seed)?,
    };
    ensure!(mask.len() == cfg.data.side, "mask has {} lines, configuration expects side {}", mask.len(), cfg.data.side);
    Ok(mask)
}

fn train(config: &Path, data: &Path, out: &Path, mask: Option<&Path>, resume: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let trainer = match resume {
        Some(ckpt) => Trainer::resume(ckpt, Some(&cfg))?,
        None => Trainer::new(&cfg)?,
    };
    let sources = load_source_dir(data)?;
    let mask = resolve_mask(&cfg, mask)?;
    let pairs = build_dataset(&sources, &mask, &cfg.effective_augmentation())?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    mask.save(out.join("mask.txt"))?;
    write_manifest(out.join("manifest.tsv"), &pairs)?;
    cfg.save(out.join("config.toml"))?;
    log::info!("{} training pairs from {} sources", pairs.len(), sources.len());
    run_training(trainer, &pairs, out)
}

fn run_training(mut trainer: Trainer, pairs: &[SamplePair], out: &Path) -> Result<()> {
    let total = trainer.config().train.total_gen_steps;
    let every = (total / 20).max(1);
    trainer.train(pairs, Some(out), &mut |e| match e {
        Event::Generator(r) if r.gen_step % every == 0 || r.gen_step == total => log::info!(
            "step {}/{total}  L_GEN {:.4} (mae {:.4}, mssim {:.4}, adv {:+.4})  critic {:+.5}",
            r.gen_step,
            r.total,
            r.mae,
            r.mssim,
            r.adversarial,
            r.critic_loss
        ),
        Event::Checkpoint(p) => log::info!("checkpoint {}", p.display()),
        _ => {}
    })?;
    let history = out.join("history.csv");
    fs::write(&history, history_csv(trainer.history())).with_context(|| format!("writing {}", history.display()))?;
    println!("final checkpoint {}", out.join("final.safetensors").display());
    Ok(())
}

fn sr_pairs(cfg: &RunConfig, data: &Path) -> Result<Vec<SamplePair>> {
    let pairs = build_sr_dataset(&load_hr_dir(data)?, &cfg.sr)?;
    let channels = pairs[0].input.dim().0;
    if channels != cfg.generator.in_channels || channels != cfg.generator.out_channels {
        bail!(
            "super-resolution pairs have {channels} channels but the generator maps {} to {}",
            cfg.generator.in_channels,
            cfg.generator.out_channels
        );
    }
    Ok(pairs)
}

fn report(rep: &EvalReport, csv: Option<&Path>) -> Result<()> {
    print!("{}", rep.table());
    if let Some(path) = csv {
        fs::write(path, rep.csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn infer(checkpoint: &Path, input: &Path, mask: &Path, out: &Path, noise: f64, seed: u64, diff_gain: f64) -> Result<()> {
    let (cfg, g): (RunConfig, Generator) = load_generator(checkpoint)?;
    let mask = resolve_mask(&cfg, Some(mask))?;
    let image = load_source(input)?;
    ensure!(image.side() == mask.len(), "{} is {} px, mask has {} lines", input.display(), image.side(), mask.len());
    let (zfr, gt) = make_pair_tensors(&image, &mask, noise, seed)?;
    let recon = reconstruct(&g, &[&zfr], 1)?.remove(0);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into());
    let gt_i = intensity(gt.view())?;
    for (name, planes) in [("recon", &recon), ("zfr", &zfr), ("gt", &gt)] {
        let img = intensity(planes.view())?;
        save_grayscale(out.join(format!("{stem}_{name}.png")), &img)?;
        if name != "gt" {
            let diff = (&img - &gt_i).mapv(|v| (v.abs() * diff_gain).min(1.0));
            save_grayscale(out.join(format!("{stem}_{name}_diff.png")), &diff)?;
            let (p, s) = image_metrics(planes, &gt)?;
            println!("{name:<6} PSNR {p:>7.3} dB  mSSIM {s:.4}");
        }
    }
    println!("images written to {}", out.display());
    Ok(())
}
