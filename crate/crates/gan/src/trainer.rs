//! Alternating critic/generator optimization.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use candle_core::{DType, Tensor};
use csmri_core::dataset::derive_seed;
use csmri_core::metrics::SsimConstants;
use csmri_core::SamplePair;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Archive, LoadedArchive, CRITIC_PREFIX, GENERATOR_PREFIX};
use crate::config::RunConfig;
use crate::critic::Critic;
use crate::data::{Batch, TensorDataset};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::layers::Mode;
use crate::losses::{loss_critic, loss_generator, scalar, AdversarialMode};
use crate::optim::Adam;

const GEN_ADAM: &str = "adam.generator.";
const CRITIC_ADAM: &str = "adam.critic.";

/// Losses logged for one generator update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub gen_step: u64,
    pub mae: f64,
    pub mssim: f64,
    /// The adversarial term as weighted by α₃ (`−mean D` in Wasserstein mode).
    pub adversarial: f64,
    pub total: f64,
    /// Mean critic loss over the critic updates preceding this step.
    pub critic_loss: f64,
}

impl StepRecord {
    pub const CSV_HEADER: &'static str = "gen_step,mae,mssim,adversarial,total,critic_loss";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.gen_step, self.mae, self.mssim, self.adversarial, self.total, self.critic_loss
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(Self {
            gen_step: f[0].parse().ok()?,
            mae: f[1].parse().ok()?,
            mssim: f[2].parse().ok()?,
            adversarial: f[3].parse().ok()?,
            total: f[4].parse().ok()?,
            critic_loss: f[5].parse().ok()?,
        })
    }
}

pub fn history_csv(history: &[StepRecord]) -> String {
    let mut out = String::from(StepRecord::CSV_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

/// Trailing moving average with the given window.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Progress notifications from [`Trainer::train`].
#[derive(Debug)]
pub enum Event<'a> {
    Critic { critic_step: u64, gen_step: u64, loss: f64, max_abs_weight: f64 },
    Generator(&'a StepRecord),
    Checkpoint(&'a Path),
}

pub struct Trainer {
    cfg: RunConfig,
    generator: Generator,
    critic: Critic,
    gen_opt: Adam,
    critic_opt: Adam,
    rng: ChaCha8Rng,
    gen_step: u64,
    critic_step: u64,
    history: Vec<StepRecord>,
    mode: AdversarialMode,
    ssim: SsimConstants,
}

impl Trainer {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.train.seed;
        let generator = Generator::new(&cfg.generator, &cfg.train.ablation, DType::F32, derive_seed(seed, 1))?;
        let critic_in = cfg.generator.out_channels + if cfg.critic.conditioned { cfg.generator.in_channels } else { 0 };
        let critic = Critic::new(&cfg.critic, critic_in, DType::F32, derive_seed(seed, 2))?;
        let t = &cfg.train;
        let gen_opt = Adam::new(generator.store().trainable_params(), t.lr_gen, t.adam_beta1, t.adam_beta2, t.adam_eps)?;
        let critic_opt = Adam::new(critic.store().trainable_params(), t.lr_critic, t.adam_beta1, t.adam_beta2, t.adam_eps)?;
        Ok(Self {
            cfg: cfg.clone(),
            generator,
            critic,
            gen_opt,
            critic_opt,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 3)),
            gen_step: 0,
            critic_step: 0,
            history: Vec::new(),
            mode: AdversarialMode::from_flag(t.ablation.wasserstein),
            ssim: SsimConstants::default(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn critic(&self) -> &Critic {
        &self.critic
    }

    pub fn gen_step(&self) -> u64 {
        self.gen_step
    }

    pub fn critic_step(&self) -> u64 {
        self.critic_step
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn adversarial_mode(&self) -> AdversarialMode {
        self.mode
    }

    fn critic_input(&self, image: &Tensor, condition: &Tensor) -> Result<Tensor> {
        if self.cfg.critic.conditioned {
            Ok(Tensor::cat(&[image, condition], 1)?)
        } else {
            Ok(image.clone())
        }
    }

    /// One critic update on the given real and generated images; the
    /// generator is not touched. Returns the critic loss before the update.
    pub fn critic_update(&mut self, real: &Tensor, fake: &Tensor, condition: &Tensor) -> Result<f64> {
        if real.dims() != fake.dims() {
            return Err(Error::Shape(format!("real batch {:?} vs fake batch {:?}", real.dims(), fake.dims())));
        }
        let real_scores = self.critic.forward(&self.critic_input(real, condition)?, Mode::TRAIN)?;
        let fake_scores = self.critic.forward(&self.critic_input(&fake.detach(), condition)?, Mode::TRAIN)?;
        let loss = loss_critic(&real_scores, &fake_scores, self.mode)?;
        let grads = loss.backward()?;
        self.critic_opt.step(&grads)?;
        if self.mode == AdversarialMode::Wasserstein {
            self.critic.clip_weights(self.cfg.critic.clip_threshold)?;
        }
        self.critic_step += 1;
        scalar(&loss)
    }

    /// One generator update on `batch`; the critic is not touched.
    pub fn generator_update(&mut self, batch: &Batch, critic_loss: f64) -> Result<StepRecord> {
        let output = self.generator.forward(&batch.input, Mode::TRAIN)?;
        let scores = self.critic.forward(&self.critic_input(&output, &batch.input)?, Mode::TRAIN_NO_COMMIT)?;
        let loss = loss_generator(&output, &batch.target, &scores, &self.cfg.loss, self.mode, &self.ssim)?;
        let grads = loss.total.backward()?;
        self.gen_opt.step(&grads)?;
        self.gen_step += 1;
        let record = StepRecord {
            gen_step: self.gen_step,
            mae: scalar(&loss.mae)?,
            mssim: scalar(&loss.mssim)?,
            adversarial: scalar(&loss.adversarial)?,
            total: scalar(&loss.total)?,
            critic_loss,
        };
        self.history.push(record);
        Ok(record)
    }

    /// `p` critic updates on fresh batches with freshly generated fakes,
    /// then one generator update.
    pub fn iteration(&mut self, data: &TensorDataset, observer: &mut dyn FnMut(Event<'_>)) -> Result<StepRecord> {
        let p = self.cfg.train.critic_steps_per_gen;
        let b = self.cfg.train.batch_size;
        let mut critic_sum = 0.0;
        for _ in 0..p {
            let batch = data.sample(&mut self.rng, b)?;
            let fake = self.generator.forward(&batch.input, Mode::TRAIN_NO_COMMIT)?.detach();
            let loss = self.critic_update(&batch.target, &fake, &batch.input)?;
            critic_sum += loss;
            observer(Event::Critic {
                critic_step: self.critic_step,
                gen_step: self.gen_step,
                loss,
                max_abs_weight: self.critic.max_abs_weight()?,
            });
        }
        let batch = data.sample(&mut self.rng, b)?;
        let record = self.generator_update(&batch, critic_sum / p as f64)?;
        observer(Event::Generator(&record));
        Ok(record)
    }

    /// Trains until `total_gen_steps`, writing periodic checkpoints and a
    /// final one when `out_dir` is given.
    pub fn train(&mut self, pairs: &[SamplePair], out_dir: Option<&Path>, observer: &mut dyn FnMut(Event<'_>)) -> Result<()> {
        let data = TensorDataset::new(pairs)?;
        if data.channels() != self.cfg.generator.in_channels {
            return Err(Error::Shape(format!(
                "training pairs have {} channels, generator expects {}",
                data.channels(),
                self.cfg.generator.in_channels
            )));
        }
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let every = self.cfg.train.checkpoint_every;
        while self.gen_step < self.cfg.train.total_gen_steps {
            let record = self.iteration(&data, observer)?;
            log::debug!("step {} L_GEN {:.5} critic {:.5}", record.gen_step, record.total, record.critic_loss);
            if let Some(dir) = out_dir {
                if every > 0 && self.gen_step % every == 0 {
                    let path = dir.join(format!("step-{:06}.safetensors", self.gen_step));
                    self.save(&path)?;
                    observer(Event::Checkpoint(&path));
                }
            }
        }
        if let Some(dir) = out_dir {
            let path: PathBuf = dir.join("final.safetensors");
            self.save(&path)?;
            observer(Event::Checkpoint(&path));
        }
        Ok(())
    }

    /// Writes parameters, optimizer moments, counters, RNG position and the
    /// loss history.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut archive = Archive::default();
        archive.add_store(GENERATOR_PREFIX, self.generator.store());
        archive.add_store(CRITIC_PREFIX, self.critic.store());
        archive.tensors.extend(self.gen_opt.state_tensors(GEN_ADAM));
        archive.tensors.extend(self.critic_opt.state_tensors(CRITIC_ADAM));
        let m = &mut archive.metadata;
        m.insert("config".into(), self.cfg.to_toml()?);
        m.insert("gen_step".into(), self.gen_step.to_string());
        m.insert("critic_step".into(), self.critic_step.to_string());
        m.insert("gen_adam_step".into(), self.gen_opt.step_count().to_string());
        m.insert("critic_adam_step".into(), self.critic_opt.step_count().to_string());
        m.insert("rng_word_pos".into(), self.rng.get_word_pos().to_string());
        m.insert("history".into(), history_csv(&self.history));
        archive.save(path)
    }

    /// Restores a trainer from `path`. When `expected` is given, the stored
    /// configuration must equal it.
    pub fn resume(path: impl AsRef<Path>, expected: Option<&RunConfig>) -> Result<Self> {
        let path = path.as_ref();
        let wrap = |e: Error| match e {
            e @ Error::Checkpoint { .. } | e @ Error::Io { .. } => e,
            other => Error::checkpoint(path, other),
        };
        let archive = LoadedArchive::load(path)?;
        let cfg = archive.config().map_err(wrap)?;
        if let Some(exp) = expected {
            if *exp != cfg {
                return Err(Error::checkpoint(path, "configuration differs from the one the checkpoint was written with"));
            }
        }
        let mut t = Self::new(&cfg).map_err(wrap)?;
        t.generator.store().assign(&archive.section(GENERATOR_PREFIX)).map_err(wrap)?;
        t.critic.store().assign(&archive.section(CRITIC_PREFIX)).map_err(wrap)?;
        let parse = |k: &str| archive.meta_parse::<u64>(k).map_err(|e| Error::checkpoint(path, e));
        t.gen_opt.load_state(GEN_ADAM, parse("gen_adam_step")?, &archive.tensors).map_err(wrap)?;
        t.critic_opt.load_state(CRITIC_ADAM, parse("critic_adam_step")?, &archive.tensors).map_err(wrap)?;
        t.gen_step = parse("gen_step")?;
        t.critic_step = parse("critic_step")?;
        let pos: u128 = archive.meta_parse("rng_word_pos").map_err(|e| Error::checkpoint(path, e))?;
        t.rng.set_word_pos(pos);
        let history = archive.meta("history").map_err(|e| Error::checkpoint(path, e))?;
        t.history = history
            .lines()
            .skip(1)
            .map(|l| StepRecord::parse(l).ok_or_else(|| Error::checkpoint(path, format!("bad history line {l:?}"))))
            .collect::<Result<_>>()?;
        Ok(t)
    }
}
