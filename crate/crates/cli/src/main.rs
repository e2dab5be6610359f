//! `alae`: train, evaluate, emit artifacts, inspect checkpoints.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical
//! fault during training, 4 I/O or data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alae::datasets::synth::generate_faces;
use alae::evaluation::{FeatureKind, LatentSpace, PplMode, SiteRange};
use alae::experiment::{
    cmd_emit, cmd_eval, cmd_train, inspect_checkpoint, load_config, resolve_output_dir, Artifact, EmitOptions,
    EvalOptions, ExperimentConfig, ExperimentError, Suite,
};
use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "alae", version, about = "Adversarial latent autoencoder experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model described by a configuration file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config, then $ALAE_OUTPUT_ROOT/<config name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from <out>/latest.ckpt if present.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a checkpoint and write a report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report directory (default: the checkpoint's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dataset location, if it moved since training.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Restrict PPL to one latent space.
        #[arg(long, value_enum)]
        space: Option<SpaceArg>,
        #[arg(long, value_enum, default_value_t = ModeArg::Full)]
        mode: ModeArg,
        /// Interpolation pairs for PPL.
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        /// Images written by fid-export.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Restrict probes to one feature kind.
        #[arg(long, value_enum)]
        features: Option<FeaturesArg>,
    },
    /// Write image grids from a checkpoint.
    Emit {
        #[arg(value_enum)]
        artifact: ArtifactArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Directory of PNG inputs for reconstruct / mix.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Samples to generate or images to reconstruct.
        #[arg(long, default_value_t = 16)]
        count: usize,
        /// Traversal steps.
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long, default_value_t = 3)]
        sources: usize,
        #[arg(long, default_value_t = 5)]
        destinations: usize,
        /// Mixing range (default: one grid per range).
        #[arg(long, value_enum)]
        range: Option<RangeArg>,
    },
    /// Print a checkpoint's header, sizes and configuration.
    InspectCheckpoint {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Print the default configuration.
    DefaultConfig,
    /// Render a directory of synthetic face-like images with a manifest.
    SynthFaces {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        count: usize,
        #[arg(long, default_value_t = 32)]
        size: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Probes,
    Ppl,
    FidExport,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Z,
    W,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    End,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeaturesArg {
    Short,
    Long,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArtifactArg {
    Generate,
    Reconstruct,
    Traverse,
    Mix,
}

#[derive(Clone, Copy, ValueEnum)]
enum RangeArg {
    Coarse,
    Middle,
    Fine,
}

fn config_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            resume,
        } => {
            let (mut cfg, _) = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out_dir = resolve_output_dir(out.as_deref(), &cfg, &config_name(&config));
            let outcome = cmd_train(&cfg, &out_dir, resume)?;
            if let Some(it) = outcome.resumed_from {
                println!("resumed at iteration {it}");
            }
            let s = &outcome.summary;
            println!(
                "trained {} iterations ({} images), level {}; checkpoint {}",
                s.iterations,
                s.images_seen,
                s.final_growth.level,
                s.final_checkpoint.as_deref().unwrap_or(Path::new("-")).display()
            );
        }
        Command::Eval {
            checkpoint,
            suite,
            seed,
            out,
            data,
            space,
            mode,
            pairs,
            samples,
            features,
        } => {
            let mut opts = EvalOptions {
                seed,
                out_dir: out,
                data_path: data,
                ppl_mode: match mode {
                    ModeArg::Full => PplMode::Full,
                    ModeArg::End => PplMode::End,
                },
                ppl_pairs: pairs,
                samples,
                ..EvalOptions::default()
            };
            if let Some(s) = space {
                opts.spaces = vec![match s {
                    SpaceArg::Z => LatentSpace::Z,
                    SpaceArg::W => LatentSpace::W,
                }];
            }
            if let Some(f) = features {
                opts.features = vec![match f {
                    FeaturesArg::Short => FeatureKind::Short,
                    FeaturesArg::Long => FeatureKind::Long,
                }];
            }
            let suite = match suite {
                SuiteArg::Probes => Suite::Probes,
                SuiteArg::Ppl => Suite::Ppl,
                SuiteArg::FidExport => Suite::FidExport,
            };
            let (path, report) = cmd_eval(&checkpoint, suite, &opts)?;
            print!("{}", toml::to_string(&report)?);
            println!("# written to {}", path.display());
        }
        Command::Emit {
            artifact,
            checkpoint,
            seed,
            out,
            data,
            input,
            count,
            steps,
            sources,
            destinations,
            range,
        } => {
            let mut opts = EmitOptions {
                seed,
                out_dir: out,
                data_path: data,
                input,
                count,
                steps,
                sources,
                destinations,
                ..EmitOptions::default()
            };
            if let Some(r) = range {
                opts.ranges = vec![match r {
                    RangeArg::Coarse => SiteRange::Coarse,
                    RangeArg::Middle => SiteRange::Middle,
                    RangeArg::Fine => SiteRange::Fine,
                }];
            }
            let artifact = match artifact {
                ArtifactArg::Generate => Artifact::Generate,
                ArtifactArg::Reconstruct => Artifact::Reconstruct,
                ArtifactArg::Traverse => Artifact::Traverse,
                ArtifactArg::Mix => Artifact::Mix,
            };
            for path in cmd_emit(&checkpoint, artifact, &opts)? {
                println!("{}", path.display());
            }
        }
        Command::InspectCheckpoint { checkpoint } => print!("{}", inspect_checkpoint(&checkpoint)?),
        Command::DefaultConfig => {
            let mut cfg = ExperimentConfig::default();
            cfg.dataset.path = Some("data/mnist".into());
            print!("{}", cfg.to_toml_string());
        }
        Command::SynthFaces { out, count, size, seed } => {
            generate_faces(&out, count, size, seed)
                .map_err(ExperimentError::from)
                .with_context(|| format!("rendering faces into {}", out.display()))?;
            println!("wrote {count} images to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<ExperimentError>())
                .map_or(1, ExperimentError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
