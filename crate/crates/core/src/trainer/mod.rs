//! The alternating three-step update loop.
//!
//! Each iteration runs, in order:
//!
//! 1. encoder + discriminator on `SP(D∘E∘G∘F(z)) + SP(-D∘E(x)) + R1`,
//! 2. mapper + generator on `SP(-D∘E∘G∘F(z))`,
//! 3. encoder + generator on `||F(z) - E∘G∘F(z)||²` with `F(z)` constant,
//!
//! each with a fresh prior draw. Only the groups named for a step are
//! recorded as trainable, so the remaining parameters cannot change.

pub mod adam;
pub mod baseline;
pub mod checkpoint;
pub mod metrics;
pub mod mixing;
pub mod schedule;

use std::path::{Path, PathBuf};

use alae_autodiff::{Array, Float, Tape, Var};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_zoo::{Architecture, GrowthState, ModelError, NetworkBundle, NoiseSource};
use crate::objectives::{
    discriminator_loss, generator_loss, reciprocity_loss, LatentDraw, LossValue, ObjectiveError, PenaltyConfig,
    R1Target, StepContext,
};
use crate::params::{Bound, Group};
use crate::rng::{normal_array, seed_all, RngStreams};

pub use adam::{adam_update, Adam, AdamConfig, Moments};
pub use checkpoint::{checkpoint_load, checkpoint_save, CheckpointData, CheckpointError, ParamRecord};
pub use metrics::{IterationRecord, MetricsLog};
pub use mixing::{assign_sites, draw_crossover, mix_styles, MixingPolicy};
pub use schedule::{growth_schedule, Schedule};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite {step} loss at iteration {iteration}: {detail}")]
    NonFinite {
        step: &'static str,
        iteration: u64,
        detail: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint does not match the configured architecture: {0}")]
    Mismatch(String),
}

/// Optimization hyperparameters shared by every variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub gamma: f64,
    pub r1_target: R1Target,
    pub mixing: MixingPolicy,
    pub schedule: Schedule,
    /// Clear Adam moments whenever new blocks are added.
    pub reset_optimizer_on_growth: bool,
    /// Learning-rate multiplier of the mapper F.
    pub mapper_lr_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            gamma: 10.0,
            r1_target: R1Target::Inputs,
            mixing: MixingPolicy::default(),
            schedule: Schedule::default(),
            reset_optimizer_on_growth: true,
            mapper_lr_scale: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn penalty(&self) -> PenaltyConfig {
        PenaltyConfig {
            gamma: self.gamma,
            target: self.r1_target,
        }
    }
}

/// Position of a batch stream (for checkpointing).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BatchPosition {
    pub epoch: u64,
    pub cursor: u64,
}

/// Supplies real training batches at a requested resolution level.
pub trait BatchSource<T> {
    fn next_batch(&mut self, batch: usize, level: usize) -> Array<T>;
    fn position(&self) -> BatchPosition;
    fn seek(&mut self, pos: BatchPosition);
}

/// Notifications from [`Trainer::run`].
pub enum TrainEvent<'a, T: Float> {
    Iteration(&'a IterationRecord),
    /// Just before new blocks are added.
    BeforeGrowth(&'a NetworkBundle<T>),
    /// Just after new blocks were added (alpha = 0).
    AfterGrowth(&'a NetworkBundle<T>),
    Checkpoint(&'a Path),
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    /// Write `latest.ckpt` every this many iterations (0: only at the end).
    pub checkpoint_every: u64,
    /// Stop early after this many iterations of this call.
    pub max_iterations: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub iterations: u64,
    pub images_seen: u64,
    pub final_growth: GrowthState,
    pub final_checkpoint: Option<PathBuf>,
}

/// Everything needed to continue training bit-exactly.
#[derive(Clone, Debug)]
pub struct Trainer<T: Float> {
    pub cfg: TrainConfig,
    pub bundle: NetworkBundle<T>,
    pub adam: Adam<T>,
    pub streams: RngStreams,
    pub iteration: u64,
    pub images_seen: u64,
    /// Opaque configuration text stored in checkpoints.
    pub config_text: String,
}

fn check_loss<'t, T: Float>(
    step: &'static str,
    iteration: u64,
    r: Result<(Var<'t, T>, LossValue), ObjectiveError>,
) -> Result<(Var<'t, T>, LossValue), TrainError> {
    r.map_err(|e| match e {
        ObjectiveError::Model(m) => TrainError::Model(m),
        other => TrainError::NonFinite {
            step,
            iteration,
            detail: other.to_string(),
        },
    })
}

impl<T: Float> Trainer<T> {
    pub fn new(arch: Architecture, cfg: TrainConfig, seed: u64, config_text: String) -> Self {
        let mut streams = seed_all(seed);
        let bundle = NetworkBundle::new(arch, &mut streams.init);
        let mut adam = Adam::new(cfg.adam);
        adam.sync(bundle.params.iter().map(|p| p.value.shape().to_vec()));
        Trainer {
            cfg,
            bundle,
            adam,
            streams,
            iteration: 0,
            images_seen: 0,
            config_text,
        }
    }

    fn max_level(&self) -> usize {
        match self.bundle.arch() {
            Architecture::Mlp(_) => 0,
            Architecture::Style(a) => self.cfg.schedule.max_level.min(a.max_level),
        }
    }

    /// Growth state the schedule prescribes for the next iteration.
    pub fn target_growth(&self) -> GrowthState {
        let mut g = growth_schedule(self.images_seen, &self.cfg.schedule);
        if g.level > self.max_level() {
            g = GrowthState::stable(self.max_level());
        }
        g
    }

    /// Adds blocks if the schedule has moved to a new level and applies the
    /// scheduled blend factor.
    pub fn sync_growth(&mut self, observer: &mut dyn FnMut(TrainEvent<'_, T>)) -> Result<GrowthState, TrainError> {
        let target = self.target_growth();
        while self.bundle.grown_level() < target.level {
            observer(TrainEvent::BeforeGrowth(&self.bundle));
            let next = self.bundle.grown_level() + 1;
            self.bundle.grow_to_level(next, &mut self.streams.init)?;
            if self.cfg.reset_optimizer_on_growth {
                self.adam.reset();
            }
            self.adam.sync(self.bundle.params.iter().map(|p| p.value.shape().to_vec()));
            observer(TrainEvent::AfterGrowth(&self.bundle));
        }
        self.bundle.set_growth(target)?;
        Ok(target)
    }

    fn draw(&mut self, n: usize, sites: usize, mixing: bool) -> LatentDraw<T> {
        let d = self.bundle.latent_dim();
        let z = normal_array(&[n, d], &mut self.streams.prior);
        let mix = if mixing {
            draw_crossover(sites, &self.cfg.mixing, &mut self.streams.mixing)
                .map(|k| (normal_array(&[n, d], &mut self.streams.prior), k))
        } else {
            None
        };
        LatentDraw { z, mix }
    }

    /// Prior draws for the three steps: mixing applies to Steps I and II.
    pub fn sample_draws(&mut self, n: usize) -> [LatentDraw<T>; 3] {
        let sites = self.bundle.num_sites();
        let d1 = self.draw(n, sites, true);
        let d2 = self.draw(n, sites, true);
        let d3 = self.draw(n, sites, false);
        [d1, d2, d3]
    }

    /// One optimization step on `groups`.
    fn update<F>(&mut self, step: &'static str, groups: &[Group], loss_fn: F) -> Result<LossValue, TrainError>
    where
        F: for<'t> FnOnce(
            &NetworkBundle<T>,
            &Bound<'t, T>,
            &mut NoiseSource<'_, T>,
        ) -> Result<(Var<'t, T>, LossValue), ObjectiveError>,
    {
        let iteration = self.iteration;
        let (ids, grads, value) = {
            let tape = Tape::new();
            let p = self.bundle.bind(&tape, groups);
            let mut noise = NoiseSource::Random(&mut self.streams.noise);
            let (loss, value) = check_loss(step, iteration, loss_fn(&self.bundle, &p, &mut noise))?;
            let vars = p.trainable_vars();
            let grads: Vec<Array<T>> = tape.grad(loss, &vars, false).iter().map(|g| (*g.value()).clone()).collect();
            (p.trainable().to_vec(), grads, value)
        };
        if let Some(i) = grads.iter().position(|g| !g.all_finite()) {
            return Err(TrainError::NonFinite {
                step,
                iteration,
                detail: format!("gradient of {} is not finite", self.bundle.params.get(ids[i]).name),
            });
        }
        let lr = self.cfg.schedule.learning_rate(self.bundle.growth().level);
        for (id, g) in ids.into_iter().zip(&grads) {
            let lr = match self.bundle.params.get(id).group {
                Group::Mapper => lr * self.cfg.mapper_lr_scale,
                _ => lr,
            };
            let mom = &mut self.adam.moments[id.0];
            adam_update(self.bundle.params.value_mut(id), g, mom, &self.cfg.adam, lr);
        }
        Ok(value)
    }

    /// Runs the three steps on one real batch with the given prior draws.
    pub fn train_iteration_with(&mut self, real: &Array<T>, draws: [LatentDraw<T>; 3]) -> Result<IterationRecord, TrainError> {
        let growth = self.bundle.growth();
        let penalty = self.cfg.penalty();
        let [d1, d2, d3] = draws;

        let ld = self.update("discriminator", &[Group::Encoder, Group::Discriminator], |b, p, noise| {
            discriminator_loss(b, p, real, &d1, StepContext { growth, noise }, &penalty)
        })?;
        let lg = self.update("generator", &[Group::Mapper, Group::Generator], |b, p, noise| {
            generator_loss(b, p, &d2, StepContext { growth, noise })
        })?;
        let lr = self.update("reciprocity", &[Group::Encoder, Group::Generator], |b, p, noise| {
            reciprocity_loss(b, p, &d3.z, StepContext { growth, noise })
        })?;

        self.iteration += 1;
        self.images_seen += real.shape()[0] as u64;
        Ok(IterationRecord {
            iteration: self.iteration,
            images_seen: self.images_seen,
            level: growth.level,
            alpha: growth.alpha,
            loss_d: ld.value,
            adv_d: ld.component("adversarial").unwrap_or(0.0),
            r1: ld.component("r1").unwrap_or(0.0),
            loss_g: lg.value,
            loss_rec: lr.value,
        })
    }

    /// Runs the three steps on one real batch with fresh prior draws.
    pub fn train_iteration(&mut self, real: &Array<T>) -> Result<IterationRecord, TrainError> {
        let draws = self.sample_draws(real.shape()[0]);
        self.train_iteration_with(real, draws)
    }

    /// Trains until the image budget is spent (or `max_iterations`).
    pub fn run(
        &mut self,
        source: &mut dyn BatchSource<T>,
        opts: &RunOptions,
        observer: &mut dyn FnMut(TrainEvent<'_, T>),
    ) -> Result<RunSummary, TrainError> {
        let budget = self.cfg.schedule.budget();
        let mut metrics = match &opts.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Some(MetricsLog::open(&dir.join("metrics.csv"))?)
            }
            None => None,
        };
        let mut done = 0u64;
        while self.images_seen < budget && opts.max_iterations.map_or(true, |m| done < m) {
            let growth = self.sync_growth(observer)?;
            let batch = source.next_batch(self.cfg.schedule.batch_size(growth.level), growth.level);
            let rec = match self.train_iteration(&batch) {
                Ok(r) => r,
                Err(e) => {
                    if let (TrainError::NonFinite { .. }, Some(dir)) = (&e, &opts.out_dir) {
                        log::error!("{e}; writing diagnostic snapshot");
                        let _ = checkpoint_save(&self.to_checkpoint(source.position()), &dir.join("fault.ckpt"));
                    }
                    return Err(e);
                }
            };
            done += 1;
            if let Some(m) = metrics.as_mut() {
                m.append(&rec)?;
            }
            observer(TrainEvent::Iteration(&rec));
            if let (Some(dir), true) = (&opts.out_dir, opts.checkpoint_every > 0 && done % opts.checkpoint_every == 0) {
                let path = dir.join("latest.ckpt");
                checkpoint_save(&self.to_checkpoint(source.position()), &path)?;
                observer(TrainEvent::Checkpoint(&path));
            }
        }
        if let Some(m) = metrics.as_mut() {
            m.flush()?;
        }
        let final_checkpoint = match &opts.out_dir {
            Some(dir) => {
                let path = dir.join("final.ckpt");
                checkpoint_save(&self.to_checkpoint(source.position()), &path)?;
                observer(TrainEvent::Checkpoint(&path));
                Some(path)
            }
            None => None,
        };
        Ok(RunSummary {
            iterations: done,
            images_seen: self.images_seen,
            final_growth: self.bundle.growth(),
            final_checkpoint,
        })
    }

    /// Snapshot of the complete training state.
    pub fn to_checkpoint(&self, batch: BatchPosition) -> CheckpointData {
        let growth = self.bundle.growth();
        let f32s = |a: &Array<T>| a.data().iter().map(|v| v.as_f64() as f32).collect::<Vec<f32>>();
        let params = self
            .bundle
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let zeros;
                let mom = match self.adam.moments.get(i) {
                    Some(m) => m,
                    None => {
                        zeros = Moments::zeros(p.value.shape());
                        &zeros
                    }
                };
                ParamRecord {
                    name: p.name.clone(),
                    group: p.group,
                    shape: p.value.shape().to_vec(),
                    value: f32s(&p.value),
                    adam_step: mom.step,
                    m: f32s(&mom.m),
                    v: f32s(&mom.v),
                }
            })
            .collect();
        CheckpointData {
            config: self.config_text.clone(),
            level: growth.level as u32,
            alpha: growth.alpha,
            iteration: self.iteration,
            images_seen: self.images_seen,
            batch_epoch: batch.epoch,
            batch_cursor: batch.cursor,
            streams: self.streams.capture(),
            params,
        }
    }

    /// Rebuilds a trainer from a checkpoint. Returns the stored batch
    /// position so the caller can seek its data source.
    pub fn from_checkpoint(
        arch: Architecture,
        cfg: TrainConfig,
        seed: u64,
        data: &CheckpointData,
    ) -> Result<(Self, BatchPosition), TrainError> {
        let bundle = restore_bundle(arch, data)?;
        let streams = RngStreams::restore(seed, &data.streams)
            .ok_or_else(|| TrainError::Mismatch("missing random stream state".into()))?;
        let mut adam = Adam::new(cfg.adam);
        adam.moments = data
            .params
            .iter()
            .map(|r| Moments {
                step: r.adam_step,
                m: Array::from_vec(r.shape.clone(), r.m.iter().map(|&v| T::from_f64(v as f64)).collect()),
                v: Array::from_vec(r.shape.clone(), r.v.iter().map(|&v| T::from_f64(v as f64)).collect()),
            })
            .collect();
        let trainer = Trainer {
            cfg,
            bundle,
            adam,
            streams,
            iteration: data.iteration,
            images_seen: data.images_seen,
            config_text: data.config.clone(),
        };
        Ok((
            trainer,
            BatchPosition {
                epoch: data.batch_epoch,
                cursor: data.batch_cursor,
            },
        ))
    }
}

/// Rebuilds the networks stored in a checkpoint (parameters and growth).
pub fn restore_bundle<T: Float>(arch: Architecture, data: &CheckpointData) -> Result<NetworkBundle<T>, TrainError> {
    // initial values are overwritten below, so any stream will do
    let mut scratch = crate::rng::stream(0, "restore");
    let mut bundle = NetworkBundle::<T>::new(arch, &mut scratch);
    let level = data.level as usize;
    for l in 1..=level {
        bundle.grow_to_level(l, &mut scratch)?;
    }
    if bundle.params.len() != data.params.len() {
        return Err(TrainError::Mismatch(format!(
            "{} parameters in checkpoint, {} in model",
            data.params.len(),
            bundle.params.len()
        )));
    }
    for rec in &data.params {
        let id = bundle
            .params
            .id_of(&rec.name)
            .ok_or_else(|| TrainError::Mismatch(format!("unknown parameter {}", rec.name)))?;
        let p = bundle.params.get(id);
        if p.value.shape() != rec.shape.as_slice() || p.group != rec.group {
            return Err(TrainError::Mismatch(format!("parameter {} has a different shape", rec.name)));
        }
        let value = Array::from_vec(rec.shape.clone(), rec.value.iter().map(|&v| T::from_f64(v as f64)).collect());
        bundle.params.set(id, value);
    }
    bundle.set_growth(GrowthState {
        level,
        alpha: data.alpha,
    })?;
    Ok(bundle)
}
