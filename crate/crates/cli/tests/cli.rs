use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fuznet(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuznet"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(o: &Output, key: &str) -> String {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("no `{key}=` in output:\n{}", stdout(o)))
}

fn small_corpus(out: &Path, seed: &str) -> PathBuf {
    let o = fuznet(
        out,
        &[
            "--seed",
            seed,
            "--scale-divisor",
            "1000",
            "generate",
            "--n-train",
            "6",
            "--n-dev",
            "4",
            "--n-test",
            "2",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    PathBuf::from(field(&o, "manifest"))
        .parent()
        .unwrap()
        .to_path_buf()
}

fn train_small(out: &Path, corpus: &Path, model: &str, extra: &[&str]) -> PathBuf {
    let corpus = corpus.to_str().unwrap();
    let mut args = vec![
        "--scale-divisor",
        "1000",
        "train",
        "--corpus",
        corpus,
        "--model",
        model,
        "--epochs",
        "3",
        "--hidden-size",
        "4",
        "--batch-size",
        "3",
    ];
    args.extend_from_slice(extra);
    let o = fuznet(out, &args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    PathBuf::from(field(&o, "run"))
}

#[test]
fn generate_defaults_writes_full_corpus() {
    let tmp = TempDir::new().unwrap();
    let o = fuznet(tmp.path(), &["generate", "--feature", "text_use"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&o, "sessions"), "275");
    let manifest = fs::read_to_string(field(&o, "manifest")).unwrap();
    assert_eq!(
        manifest.lines().filter(|l| !l.starts_with('#')).count(),
        275
    );
}

#[test]
fn same_seed_same_digest() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "--seed",
        "9",
        "--scale-divisor",
        "1000",
        "generate",
        "--n-train",
        "3",
        "--n-dev",
        "1",
        "--n-test",
        "1",
    ];
    let a = fuznet(tmp.path(), &args);
    let b = fuznet(tmp.path(), &args);
    assert_eq!(field(&a, "digest"), field(&b, "digest"));
    assert_ne!(field(&a, "manifest"), field(&b, "manifest"));
    let mut other = args;
    other[1] = "10";
    assert_ne!(
        field(&a, "digest"),
        field(&fuznet(tmp.path(), &other), "digest")
    );
}

#[test]
fn unwritable_output_exits_2() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = fuznet(
        &blocker.join("sub"),
        &[
            "generate",
            "--n-train",
            "1",
            "--n-dev",
            "1",
            "--n-test",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_3() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path(), "1");
    let o = fuznet(
        tmp.path(),
        &[
            "train",
            "--corpus",
            corpus.to_str().unwrap(),
            "--model",
            "bogus",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("all_fusion") && err.contains("audio_text_fused"),
        "{err}"
    );

    let o = fuznet(
        tmp.path(),
        &[
            "train",
            "--corpus",
            tmp.path().join("nope").to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    let o = fuznet(
        tmp.path(),
        &[
            "eval",
            "--checkpoint",
            "/nonexistent/model.fznet",
            "--corpus",
            corpus.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    let o = fuznet(tmp.path(), &["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(3));
    let o = fuznet(
        tmp.path(),
        &["generate", "--n-train", "0", "--feature", "nope"],
    );
    assert_eq!(o.status.code(), Some(3));
    let o = fuznet(tmp.path(), &["generate", "--feature", "not_a_feature"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("text_use"));
}

#[test]
fn eval_reproduces_best_dev_epoch() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path(), "2");
    let run = train_small(tmp.path(), &corpus, "single", &["--feature", "text_use"]);
    for f in [
        "model.fznet",
        "history.tsv",
        "timings.tsv",
        "metrics.txt",
        "config.toml",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let o = fuznet(
        tmp.path(),
        &[
            "eval",
            "--checkpoint",
            run.join("model.fznet").to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
            "--partition",
            "dev",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let trained = fs::read_to_string(run.join("metrics.txt")).unwrap();
    assert_eq!(stdout(&o), trained);
}

#[test]
fn corrupted_checkpoint_exits_4() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path(), "3");
    let run = train_small(tmp.path(), &corpus, "single", &["--feature", "text_use"]);
    let ckpt = run.join("model.fznet");
    let mut bytes = fs::read(&ckpt).unwrap();
    bytes.truncate(bytes.len() - 5);
    fs::write(&ckpt, bytes).unwrap();
    let o = fuznet(
        tmp.path(),
        &[
            "eval",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn report_attention_requires_all_fusion() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path(), "4");
    let single = train_small(tmp.path(), &corpus, "single", &["--feature", "text_use"]);
    let o = fuznet(
        tmp.path(),
        &[
            "report-attention",
            "--checkpoint",
            single.join("model.fznet").to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(4));

    let fused = train_small(tmp.path(), &corpus, "all_fusion", &[]);
    let o = fuznet(
        tmp.path(),
        &[
            "report-attention",
            "--checkpoint",
            fused.join("model.fznet").to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let total: f64 = ["video", "audio", "text"]
        .iter()
        .map(|m| field(&o, m).parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn gradcheck_passes_and_detects_fault() {
    let tmp = TempDir::new().unwrap();
    let o = fuznet(tmp.path(), &["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("model.all_fusion")));

    let o = fuznet(
        tmp.path(),
        &["gradcheck", "--inject-fault", "tanh-backward"],
    );
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("elementwise.tanh"));
}

#[test]
fn snapshot_rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(tmp.path(), "5");
    let first = train_small(
        tmp.path(),
        &corpus,
        "single",
        &["--feature", "text_use", "--lr", "0.01"],
    );
    let cfg = first.join("config.toml");
    let o = fuznet(tmp.path(), &["--config", cfg.to_str().unwrap(), "train"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let second = PathBuf::from(field(&o, "run"));
    assert_ne!(first, second);
    assert_eq!(
        fs::read(first.join("history.tsv")).unwrap(),
        fs::read(second.join("history.tsv")).unwrap()
    );
    assert_eq!(
        fs::read(first.join("model.fznet")).unwrap(),
        fs::read(second.join("model.fznet")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 3\nscale_divisor = 1000\n[generate]\nn_train = 2\nn_dev = 1\nn_test = 1\n",
    )
    .unwrap();
    let o = fuznet(
        tmp.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "generate",
            "--n-train",
            "5",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(field(&o, "sessions"), "7");
    fs::write(&cfg, "bogus_key = 1\n").unwrap();
    let o = fuznet(tmp.path(), &["--config", cfg.to_str().unwrap(), "generate"]);
    assert_eq!(o.status.code(), Some(3));
}
