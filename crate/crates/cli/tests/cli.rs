//! End-to-end runs of the `alae` binary on a tiny synthetic image corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn alae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alae"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn faces(dir: &Path) -> PathBuf {
    let out = dir.join("faces");
    let o = alae(&["synth-faces", "--out", out.to_str().unwrap(), "--count", "24", "--size", "8", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn tiny_config(dir: &Path, data: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"seed = 5
{extra}
[model]
kind = "style"

[model.style]
latent_dim = 8
mapping_layers = 2
disc_layers = 2
image_channels = 3
max_level = 1
base_channels = 8
min_channels = 4
max_channels = 8

[schedule]
max_level = 1
transition_images = 16
stabilization_images = 16
batch_sizes = [4]

[dataset]
kind = "images"
path = "{}"

[run]
checkpoint_every = 3
log_every = 1
"#,
        data.display()
    );
    let path = dir.join("tiny.toml");
    fs::write(&path, text).unwrap();
    path
}

fn train(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    alae(&args)
}

#[test]
fn training_is_byte_reproducible_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let data = faces(dir.path());
    let cfg = tiny_config(dir.path(), &data, "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = train(&cfg, out, &[]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ck_a = fs::read(a.join("final.ckpt")).unwrap();
    assert_eq!(ck_a, fs::read(b.join("final.ckpt")).unwrap());
    assert!(a.join("config.toml").exists());

    // Resuming from an intermediate checkpoint finishes at the same bytes.
    let c = dir.path().join("c");
    fs::create_dir_all(&c).unwrap();
    fs::copy(a.join("latest.ckpt"), c.join("latest.ckpt")).unwrap();
    let o = train(&cfg, &c, &["--resume"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("resumed at iteration"));
    assert_eq!(ck_a, fs::read(c.join("final.ckpt")).unwrap());

    // A different seed gives a different model.
    let d = dir.path().join("d");
    assert!(train(&cfg, &d, &["--seed", "6"]).status.success());
    assert_ne!(ck_a, fs::read(d.join("final.ckpt")).unwrap());

    let ckpt = a.join("final.ckpt");
    let ckpt = ckpt.to_str().unwrap();
    let inspect = alae(&["inspect-checkpoint", "--checkpoint", ckpt]);
    assert!(inspect.status.success());
    assert!(String::from_utf8_lossy(&inspect.stdout).contains("style"));

    // Reports regenerate bit-identically from (checkpoint, seed).
    let mut reports = Vec::new();
    for sub in ["r1", "r2"] {
        let out = dir.path().join(sub);
        let o = alae(&[
            "eval", "--checkpoint", ckpt, "--suite", "ppl", "--pairs", "8", "--seed", "2", "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        reports.push(fs::read(out.join("report-ppl.toml")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: toml::Table = toml::from_str(std::str::from_utf8(&reports[0]).unwrap()).unwrap();
    assert!(report["ppl_z"].as_float().unwrap() >= 0.0);
    assert!(report["ppl_w"].as_float().unwrap() >= 0.0);

    let grids = dir.path().join("grids");
    for artifact in ["generate", "reconstruct", "traverse", "mix"] {
        let o = alae(&["emit", artifact, "--checkpoint", ckpt, "--out", grids.to_str().unwrap(), "--count", "4"]);
        assert!(o.status.success(), "{artifact}: {}", stderr(&o));
    }
    for file in ["generate.png", "reconstruct.png", "traverse.png", "mix-coarse.png", "mix-fine.png"] {
        assert!(grids.join(file).exists(), "{file}");
    }

    let fid = dir.path().join("fid");
    let o = alae(&[
        "eval", "--checkpoint", ckpt, "--suite", "fid-export", "--samples", "5", "--out", fid.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(fid.join("fid/manifest.txt")).unwrap().lines().count(), 5);
}

#[test]
fn resume_refuses_a_changed_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let data = faces(dir.path());
    let cfg = tiny_config(dir.path(), &data, "");
    let out = dir.path().join("run");
    assert!(train(&cfg, &out, &[]).status.success());
    let o = train(&cfg, &out, &["--resume", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_listed_and_nothing_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let data = faces(dir.path());
    let cfg = tiny_config(dir.path(), &data, "learning_rate = 1.0\n[extra]\nfoo = 1\n");
    let out = dir.path().join("never");
    let o = train(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("learning_rate") && err.contains("extra"), "{err}");
    assert!(!out.exists());
}

#[test]
fn invalid_values_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[optimizer]\nlr = -1.0\nbeta2 = 1.5\n[dataset]\nkind = \"images\"\npath = \"nowhere\"\n",
    )
    .unwrap();
    let out = dir.path().join("never");
    let o = train(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("optimizer.lr") && err.contains("optimizer.beta2"), "{err}");
    assert!(!out.exists());
}

#[test]
fn missing_data_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), &dir.path().join("absent"), "");
    let out = dir.path().join("never");
    let o = train(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(!out.exists());

    let o = alae(&["eval", "--checkpoint", "/nonexistent/final.ckpt", "--suite", "ppl"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(alae(&["train"]).status.code(), Some(2));
    assert_eq!(alae(&["emit", "sideways", "--checkpoint", "x"]).status.code(), Some(2));
}

#[test]
fn default_config_round_trips() {
    let o = alae(&["default-config"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut cfg = alae::experiment::ExperimentConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg.dataset.path.take(), Some(PathBuf::from("data/mnist")));
    assert_eq!(cfg, alae::experiment::ExperimentConfig::default());
}
