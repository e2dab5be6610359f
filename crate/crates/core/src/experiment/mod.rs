//! Configuration-driven experiments: train, evaluate, emit artifacts and
//! inspect checkpoints.
//!
//! Each command is a plain function returning a typed error; errors map to
//! process exit codes through [`ExperimentError::exit_code`]. Reports and
//! images are functions of (checkpoint, options, seed) only, so rerunning a
//! command reproduces its output byte for byte.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use alae_autodiff::Array;
use rand::seq::index::sample;
use thiserror::Error;
use toml::{Table, Value};

pub use config::{
    ConfigError, DatasetConfig, DatasetKind, ExperimentConfig, ModelConfig, ModelKind, OptimizerConfig, RunConfig,
    ScheduleConfig, MNIST_TRAINING_IMAGES,
};

use crate::datasets::{
    load_image, load_image_corpus, load_mnist, make_sw_dw_splits, DataError, ImageBatches, ImageCorpus, VectorBatches,
    VectorDataset,
};
use crate::evaluation::{
    extract_features, fid_export, generate_samples, knn_accuracy, linear_svm_accuracy, perceptual_path_length,
    reconstruct_batch, style_mixing_grid, traversal_grid, EvalError, FeatureKind, ImageGrid, LatentSpace,
    MeanSquaredPixel, PplConfig, PplMode, SiteRange, SvmConfig,
};
use crate::model_zoo::{ModelError, NetworkBundle};
use crate::rng::{normal_array, stream, sub_seed, DATA};
use crate::trainer::{
    checkpoint_load, restore_bundle, BatchSource, CheckpointData, CheckpointError, RunOptions, RunSummary,
    TrainError, TrainEvent, Trainer,
};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "ALAE_OUTPUT_ROOT";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Options that do not fit the checkpoint or each other.
    #[error("{0}")]
    Usage(String),
    #[error("numerical fault: {0}")]
    Numerical(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("I/O error: {0}")]
    Io(String),
}

impl ExperimentError {
    /// 2 for configuration and usage errors, 3 for numerical faults, 4 for
    /// I/O and data faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Usage(_) => 2,
            ExperimentError::Numerical(_) => 3,
            ExperimentError::Data(_) | ExperimentError::Checkpoint(_) | ExperimentError::Io(_) => 4,
        }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        ExperimentError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<TrainError> for ExperimentError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => ExperimentError::Numerical(e.to_string()),
            TrainError::Checkpoint(c) => ExperimentError::Checkpoint(c),
            TrainError::Io(_) => ExperimentError::Io(e.to_string()),
            TrainError::Model(_) | TrainError::Mismatch(_) => ExperimentError::Usage(e.to_string()),
        }
    }
}

impl From<EvalError> for ExperimentError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } => ExperimentError::Io(e.to_string()),
            _ => ExperimentError::Usage(e.to_string()),
        }
    }
}

impl From<ModelError> for ExperimentError {
    fn from(e: ModelError) -> Self {
        ExperimentError::Usage(e.to_string())
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, String)> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    Ok((ExperimentConfig::from_toml_str(&text)?, text))
}

/// Output directory: explicit flag, then the config, then
/// `$ALAE_OUTPUT_ROOT/<name>`, then `runs/<name>`.
pub fn resolve_output_dir(explicit: Option<&Path>, cfg: &ExperimentConfig, name: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(name)
}

/// Training data as described by the dataset block.
pub enum TrainingData {
    Vectors { train: Arc<VectorDataset>, test: Arc<VectorDataset> },
    Images(Arc<ImageCorpus>),
}

impl TrainingData {
    pub fn load(cfg: &ExperimentConfig, path_override: Option<&Path>) -> Result<Self> {
        let path = path_override
            .map(Path::to_path_buf)
            .or_else(|| cfg.dataset.path.clone())
            .ok_or_else(|| ConfigError::Schema(vec!["dataset.path: required".into()]))?;
        match cfg.dataset.kind {
            DatasetKind::Mnist => {
                let (official_train, official_test) = load_mnist(&path)?;
                let (train, test) =
                    make_sw_dw_splits(&official_train, &official_test, cfg.dataset.split, cfg.dataset.split_seed)?;
                Ok(TrainingData::Vectors {
                    train: Arc::new(train),
                    test: Arc::new(test),
                })
            }
            DatasetKind::Images => {
                let corpus = load_image_corpus(&path, cfg.model.style.image_channels)?;
                if corpus.max_level() < cfg.schedule.max_level {
                    return Err(ExperimentError::Usage(format!(
                        "images in {} are {} px; level {} needs {} px",
                        path.display(),
                        4usize << corpus.max_level(),
                        cfg.schedule.max_level,
                        4usize << cfg.schedule.max_level
                    )));
                }
                Ok(TrainingData::Images(Arc::new(corpus)))
            }
        }
    }

    fn batches(&self, seed: u64) -> Box<dyn BatchSource<f32>> {
        match self {
            TrainingData::Vectors { train, .. } => Box::new(VectorBatches::new(train.clone(), seed)),
            TrainingData::Images(c) => Box::new(ImageBatches::new(c.clone(), seed)),
        }
    }
}

pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub summary: RunSummary,
    pub resumed_from: Option<u64>,
}

/// Trains to the configured budget. With `resume`, continues from
/// `out_dir/latest.ckpt` when it exists. Nothing is written before the
/// configuration and data have been validated.
pub fn cmd_train(cfg: &ExperimentConfig, out_dir: &Path, resume: bool) -> Result<TrainOutcome> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(ConfigError::Schema(problems).into());
    }
    let data = TrainingData::load(cfg, None)?;
    let config_text = cfg.to_toml_string();
    let mut source = data.batches(sub_seed(cfg.seed, DATA));

    let latest = out_dir.join("latest.ckpt");
    let (mut trainer, resumed_from) = if resume && latest.exists() {
        let ckpt = checkpoint_load(&latest)?;
        if ckpt.config != config_text {
            return Err(ExperimentError::Usage(format!(
                "{} was written with a different configuration",
                latest.display()
            )));
        }
        let (t, pos) = Trainer::from_checkpoint(cfg.architecture(), cfg.train_config(), cfg.seed, &ckpt)?;
        source.seek(pos);
        let it = t.iteration;
        (t, Some(it))
    } else {
        (
            Trainer::<f32>::new(cfg.architecture(), cfg.train_config(), cfg.seed, config_text.clone()),
            None,
        )
    };

    fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let cfg_path = out_dir.join("config.toml");
    fs::write(&cfg_path, &config_text).map_err(|e| ExperimentError::io(&cfg_path, e))?;

    let log_every = cfg.run.log_every.max(1);
    let mut observer = |ev: TrainEvent<'_, f32>| match ev {
        TrainEvent::Iteration(r) if r.iteration % log_every == 0 => log::info!(
            "iter {} images {} level {} alpha {:.3} | D {:.4} G {:.4} rec {:.5}",
            r.iteration,
            r.images_seen,
            r.level,
            r.alpha,
            r.loss_d,
            r.loss_g,
            r.loss_rec
        ),
        TrainEvent::AfterGrowth(b) => log::info!("grew to level {} ({} px)", b.growth().level, b.growth().resolution()),
        TrainEvent::Checkpoint(p) => log::debug!("wrote {}", p.display()),
        _ => {}
    };
    let opts = RunOptions {
        out_dir: Some(out_dir.to_path_buf()),
        checkpoint_every: cfg.run.checkpoint_every,
        max_iterations: None,
    };
    let summary = trainer.run(source.as_mut(), &opts, &mut observer)?;
    Ok(TrainOutcome {
        out_dir: out_dir.to_path_buf(),
        summary,
        resumed_from,
    })
}

/// A checkpoint with its configuration and networks.
pub struct LoadedCheckpoint {
    pub path: PathBuf,
    pub data: CheckpointData,
    pub config: ExperimentConfig,
    pub bundle: NetworkBundle<f32>,
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let data = checkpoint_load(path)?;
    let config = ExperimentConfig::from_toml_str(&data.config)?;
    let bundle = restore_bundle(config.architecture(), &data)?;
    Ok(LoadedCheckpoint {
        path: path.to_path_buf(),
        data,
        config,
        bundle,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Probes,
    Ppl,
    FidExport,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Probes => "probes",
            Suite::Ppl => "ppl",
            Suite::FidExport => "fid-export",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub seed: u64,
    /// Report directory; defaults to the checkpoint's directory.
    pub out_dir: Option<PathBuf>,
    /// Overrides the dataset path stored in the checkpoint.
    pub data_path: Option<PathBuf>,
    /// Probe feature kinds.
    pub features: Vec<FeatureKind>,
    /// PPL spaces (both by default).
    pub spaces: Vec<LatentSpace>,
    pub ppl_mode: PplMode,
    pub ppl_pairs: usize,
    pub epsilon: f64,
    /// Images written by the FID export.
    pub samples: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            seed: 0,
            out_dir: None,
            data_path: None,
            features: vec![FeatureKind::Short, FeatureKind::Long],
            spaces: vec![LatentSpace::Z, LatentSpace::W],
            ppl_mode: PplMode::Full,
            ppl_pairs: PplConfig::default().n_pairs,
            epsilon: PplConfig::default().epsilon,
            samples: 1000,
        }
    }
}

fn default_dir(ckpt: &Path, explicit: Option<&PathBuf>) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| {
        ckpt.parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    })
}

fn report_header(suite: &str, ck: &LoadedCheckpoint, seed: u64) -> Table {
    let mut t = Table::new();
    t.insert("suite".into(), suite.into());
    t.insert("seed".into(), Value::Integer(seed as i64));
    t.insert("model".into(), ck.bundle.arch().name().into());
    t.insert("iteration".into(), Value::Integer(ck.data.iteration as i64));
    t.insert("images_seen".into(), Value::Integer(ck.data.images_seen as i64));
    t.insert("level".into(), Value::Integer(ck.data.level as i64));
    t.insert("alpha".into(), Value::Float(ck.data.alpha));
    t
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
}

/// Runs an evaluation suite and writes `report-<suite>.toml`; returns the
/// report path and its contents.
pub fn cmd_eval(checkpoint: &Path, suite: Suite, opts: &EvalOptions) -> Result<(PathBuf, Table)> {
    let ck = load_checkpoint(checkpoint)?;
    let out_dir = default_dir(checkpoint, opts.out_dir.as_ref());
    let mut report = report_header(suite.name(), &ck, opts.seed);
    match suite {
        Suite::Probes => {
            if ck.bundle.is_style() {
                return Err(ExperimentError::Usage(
                    "the probes suite needs a checkpoint of the mlp model".into(),
                ));
            }
            let (train, test) = match TrainingData::load(&ck.config, opts.data_path.as_deref())? {
                TrainingData::Vectors { train, test } => (train, test),
                TrainingData::Images(_) => unreachable!("mlp configurations use vector data"),
            };
            report.insert("split".into(), format!("{:?}", ck.config.dataset.split).to_lowercase().into());
            report.insert("train_size".into(), Value::Integer(train.len() as i64));
            report.insert("test_size".into(), Value::Integer(test.len() as i64));
            for &kind in &opts.features {
                let ftr = extract_features(&ck.bundle, &train, kind)?;
                let fte = extract_features(&ck.bundle, &test, kind)?;
                let knn = knn_accuracy(&ftr, &fte, 1)?;
                let svm = linear_svm_accuracy(&ftr, &fte, &SvmConfig::default())?;
                let k = kind.name();
                report.insert(format!("knn_{k}"), Value::Float(knn));
                report.insert(format!("svm_{k}"), Value::Float(svm.accuracy));
                report.insert(format!("svm_{k}_converged"), Value::Boolean(svm.converged));
                report.insert(format!("{k}_dim"), Value::Integer(ftr.dim() as i64));
            }
        }
        Suite::Ppl => {
            for &space in &opts.spaces {
                let cfg = PplConfig {
                    space,
                    mode: opts.ppl_mode,
                    epsilon: opts.epsilon,
                    n_pairs: opts.ppl_pairs,
                    ..PplConfig::default()
                };
                let mut rng = stream(opts.seed, &format!("ppl-{}", space.name()));
                let v = perceptual_path_length(&ck.bundle, &cfg, &MeanSquaredPixel, &mut rng)?;
                report.insert(format!("ppl_{}", space.name()), Value::Float(v));
            }
            report.insert(
                "ppl_mode".into(),
                match opts.ppl_mode {
                    PplMode::Full => "full",
                    PplMode::End => "end",
                }
                .into(),
            );
            report.insert("ppl_pairs".into(), Value::Integer(opts.ppl_pairs as i64));
            report.insert("epsilon".into(), Value::Float(opts.epsilon));
            report.insert("distance".into(), "mean_squared_pixel".into());
        }
        Suite::FidExport => {
            let dir = out_dir.join("fid");
            let mut rng = stream(opts.seed, "fid-export");
            let entries = fid_export(&ck.bundle, opts.samples, &dir, None, &mut rng)?;
            report.insert("samples".into(), Value::Integer(entries.len() as i64));
            report.insert("manifest".into(), "fid/manifest.txt".into());
        }
    }
    let path = out_dir.join(format!("report-{}.toml", suite.name()));
    write_text(&path, &toml::to_string(&report).expect("report tables serialize"))?;
    Ok((path, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Artifact {
    Generate,
    Reconstruct,
    Traverse,
    Mix,
}

impl Artifact {
    pub fn name(self) -> &'static str {
        match self {
            Artifact::Generate => "generate",
            Artifact::Reconstruct => "reconstruct",
            Artifact::Traverse => "traverse",
            Artifact::Mix => "mix",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmitOptions {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub data_path: Option<PathBuf>,
    /// Directory of input images for reconstruct / mix; taken from the
    /// dataset when absent.
    pub input: Option<PathBuf>,
    /// Samples (generate) or inputs (reconstruct).
    pub count: usize,
    pub steps: usize,
    pub sources: usize,
    pub destinations: usize,
    /// Mixing ranges; one grid each.
    pub ranges: Vec<SiteRange>,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            seed: 0,
            out_dir: None,
            data_path: None,
            input: None,
            count: 16,
            steps: 8,
            sources: 3,
            destinations: 5,
            ranges: vec![SiteRange::Coarse, SiteRange::Middle, SiteRange::Fine],
        }
    }
}

/// Reads every PNG in `dir` (sorted by name) at the model's input size.
fn read_input_images(bundle: &NetworkBundle<f32>, dir: &Path) -> Result<Array<f32>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ExperimentError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ExperimentError::Usage(format!("no PNG images in {}", dir.display())));
    }
    let shape = bundle.sample_shape(bundle.growth().level);
    let (side, channels) = match *shape.as_slice() {
        [r, _, c] => (r, c),
        [d] => (((d as f64).sqrt().round()) as usize, 1),
        _ => unreachable!("sample shapes are rank 1 or 3"),
    };
    let mut data = Vec::new();
    for f in &files {
        let img = load_image(f, channels)?;
        if img.shape()[0] != side || img.shape()[1] != side {
            return Err(ExperimentError::Usage(format!(
                "{} is {}x{}; this checkpoint expects {side}x{side} images",
                f.display(),
                img.shape()[1],
                img.shape()[0]
            )));
        }
        data.extend_from_slice(img.data());
    }
    let mut full = vec![files.len()];
    full.extend(shape);
    Ok(Array::from_vec(full, data))
}

/// `n` inputs drawn (without replacement, seeded) from the held-out split
/// or the image corpus.
fn dataset_inputs(ck: &LoadedCheckpoint, opts: &EmitOptions, n: usize, tag: &str) -> Result<Array<f32>> {
    let data = TrainingData::load(&ck.config, opts.data_path.as_deref())?;
    let mut rng = stream(opts.seed, &format!("emit-inputs-{tag}"));
    match data {
        TrainingData::Vectors { test, .. } => {
            let idx = sample(&mut rng, test.len(), n.min(test.len())).into_vec();
            Ok(test.gather(&idx))
        }
        TrainingData::Images(c) => {
            let idx = sample(&mut rng, c.len(), n.min(c.len())).into_vec();
            Ok(c.gather(&idx, ck.bundle.growth().level))
        }
    }
}

fn inputs(ck: &LoadedCheckpoint, opts: &EmitOptions, n: usize, tag: &str) -> Result<Array<f32>> {
    let x = match &opts.input {
        Some(dir) => read_input_images(&ck.bundle, dir)?,
        None => dataset_inputs(ck, opts, n, tag)?,
    };
    if x.shape()[0] < n {
        return Err(ExperimentError::Usage(format!("need {n} input images, found {}", x.shape()[0])));
    }
    let per = x.len() / x.shape()[0];
    let mut shape = x.shape().to_vec();
    shape[0] = n;
    Ok(Array::from_vec(shape, x.data()[..n * per].to_vec()))
}

fn range_name(r: &SiteRange) -> String {
    match r {
        SiteRange::Coarse => "coarse".into(),
        SiteRange::Middle => "middle".into(),
        SiteRange::Fine => "fine".into(),
        SiteRange::Sites(s) => format!("sites{}-{}", s.start, s.end),
    }
}

/// Writes the requested grid(s) plus a `<artifact>.toml` sidecar holding
/// the seed, options and any computed metrics. Returns the written files.
pub fn cmd_emit(checkpoint: &Path, artifact: Artifact, opts: &EmitOptions) -> Result<Vec<PathBuf>> {
    let ck = load_checkpoint(checkpoint)?;
    let bundle = &ck.bundle;
    let out_dir = default_dir(checkpoint, opts.out_dir.as_ref());
    fs::create_dir_all(&out_dir).map_err(|e| ExperimentError::io(&out_dir, e))?;
    let mut sidecar = report_header(artifact.name(), &ck, opts.seed);
    let mut written = Vec::new();
    let save = |grid: &ImageGrid, name: String, written: &mut Vec<PathBuf>| -> Result<()> {
        let path = out_dir.join(name);
        grid.save_png(&path)?;
        written.push(path);
        Ok(())
    };
    match artifact {
        Artifact::Generate => {
            let mut rng = stream(opts.seed, "emit-generate");
            let images = generate_samples(bundle, opts.count, &mut rng)?;
            let cols = (opts.count as f64).sqrt().ceil().max(1.0) as usize;
            let grid = ImageGrid::from_tiles(&crate::evaluation::to_tiles(&images)?, cols);
            save(&grid, "generate.png".into(), &mut written)?;
            sidecar.insert("count".into(), Value::Integer(opts.count as i64));
        }
        Artifact::Reconstruct => {
            let x = inputs(&ck, opts, opts.count, "reconstruct")?;
            let rec = reconstruct_batch(bundle, &x, 4)?;
            save(&rec.grid, "reconstruct.png".into(), &mut written)?;
            sidecar.insert("count".into(), Value::Integer(opts.count as i64));
            sidecar.insert("latent_gap".into(), Value::Float(rec.latent_gap));
            sidecar.insert("output_variance".into(), Value::Float(rec.output_variance));
        }
        Artifact::Traverse => {
            let mut rng = stream(opts.seed, "emit-traverse");
            let d = bundle.latent_dim();
            let z: Array<f32> = normal_array(&[2, d], &mut rng);
            let w = bundle.mapper_forward(&z)?;
            let row = |a: &Array<f32>, i: usize| a.data()[i * d..(i + 1) * d].iter().map(|&v| v as f64).collect::<Vec<_>>();
            let gz = traversal_grid(bundle, LatentSpace::Z, (&row(&z, 0), &row(&z, 1)), opts.steps)?;
            let gw = traversal_grid(bundle, LatentSpace::W, (&row(&w, 0), &row(&w, 1)), opts.steps)?;
            save(&ImageGrid::stack(&[gz, gw])?, "traverse.png".into(), &mut written)?;
            sidecar.insert("steps".into(), Value::Integer(opts.steps as i64));
            sidecar.insert("rows".into(), "z,w".into());
        }
        Artifact::Mix => {
            let src = inputs(&ck, opts, opts.sources, "mix-sources")?;
            let dst = match &opts.input {
                // one directory supplies sources first, then destinations
                Some(_) => {
                    let all = inputs(&ck, opts, opts.sources + opts.destinations, "mix")?;
                    let per = all.len() / all.shape()[0];
                    let mut shape = all.shape().to_vec();
                    shape[0] = opts.destinations;
                    Array::from_vec(shape, all.data()[opts.sources * per..].to_vec())
                }
                None => inputs(&ck, opts, opts.destinations, "mix-destinations")?,
            };
            for r in &opts.ranges {
                let grid = style_mixing_grid(bundle, &src, &dst, r)?;
                save(&grid, format!("mix-{}.png", range_name(r)), &mut written)?;
            }
            sidecar.insert("sources".into(), Value::Integer(opts.sources as i64));
            sidecar.insert("destinations".into(), Value::Integer(opts.destinations as i64));
            sidecar.insert(
                "ranges".into(),
                Value::Array(opts.ranges.iter().map(|r| Value::String(range_name(r))).collect()),
            );
        }
    }
    match &opts.input {
        Some(dir) => sidecar.insert("input".into(), dir.display().to_string().into()),
        None => sidecar.insert("input".into(), "dataset".into()),
    };
    sidecar.insert(
        "files".into(),
        Value::Array(
            written
                .iter()
                .map(|p| Value::String(p.file_name().unwrap_or_default().to_string_lossy().into_owned()))
                .collect(),
        ),
    );
    let path = out_dir.join(format!("{}.toml", artifact.name()));
    write_text(&path, &toml::to_string(&sidecar).expect("sidecar tables serialize"))?;
    written.push(path);
    Ok(written)
}

/// Human-readable summary of a checkpoint.
pub fn inspect_checkpoint(path: &Path) -> Result<String> {
    let ck = load_checkpoint(path)?;
    let d = &ck.data;
    let total: usize = d.params.iter().map(|p| p.value.len()).sum();
    let mut out = format!(
        "checkpoint {}\nmodel: {}\nlevel: {} ({} px), alpha {}\niteration: {}\nimages seen: {}\nbatch position: epoch {}, cursor {}\nparameters: {} arrays, {} values\n",
        path.display(),
        ck.bundle.arch().name(),
        d.level,
        4usize << d.level,
        d.alpha,
        d.iteration,
        d.images_seen,
        d.batch_epoch,
        d.batch_cursor,
        d.params.len(),
        total
    );
    for group in ["F", "G", "E", "D"] {
        let n: usize = d
            .params
            .iter()
            .filter(|p| p.name.starts_with(group))
            .map(|p| p.value.len())
            .sum();
        out.push_str(&format!("  {group}: {n}\n"));
    }
    out.push_str("\nconfiguration:\n");
    out.push_str(&d.config);
    Ok(out)
}
