//! End-to-end checks of the command-line surface: exit codes, file
//! outputs, determinism, config precedence, seed fallback.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nomanet"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nomanet-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.env_remove("NOMANET_SEED").output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn generate_small(dir: &Path, name: &str, n: usize, k: usize, size: usize, split: &str) {
    let out = run(bin().args([
        "generate",
        "--n",
        &n.to_string(),
        "--k",
        &k.to_string(),
        "--size",
        &size.to_string(),
        "--split",
        split,
        "--name",
        name,
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]));
    assert_code(&out, 0);
}

#[test]
fn generate_invalid_size_is_usage_error() {
    let dir = workdir("gen0");
    let out = run(bin().args([
        "generate",
        "--n",
        "2",
        "--k",
        "2",
        "--size",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ]));
    assert_code(&out, 2);
}

#[test]
fn generate_without_spec_is_usage_error() {
    let out = run(bin().args(["generate"]));
    assert_code(&out, 2);
}

#[test]
fn generate_is_byte_deterministic_and_env_seed_works() {
    let dir = workdir("gen1");
    generate_small(&dir.join("a"), "d", 2, 2, 6, "4,1,1");
    generate_small(&dir.join("b"), "d", 2, 2, 6, "4,1,1");
    let a = fs::read(dir.join("a/d.txt")).unwrap();
    let b = fs::read(dir.join("b/d.txt")).unwrap();
    assert_eq!(a, b);

    // NOMANET_SEED fallback equals the explicit flag.
    let env_dir = dir.join("env");
    let out = bin()
        .args([
            "generate", "--n", "2", "--k", "2", "--size", "6", "--split", "4,1,1", "--name", "d",
            "--out",
            env_dir.to_str().unwrap(),
        ])
        .env("NOMANET_SEED", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let c = fs::read(env_dir.join("d.txt")).unwrap();
    assert_eq!(a, c);
}

#[test]
fn generate_all_writes_ten_files() {
    // Tiny stand-in is not possible for --all (fixed sizes); just check
    // the subcommand validates. Generating 13k samples is fast enough.
    let dir = workdir("gen-all");
    let out = run(bin().args(["generate", "--all", "--seed", "5", "--out", dir.to_str().unwrap()]));
    assert_code(&out, 0);
    let count = fs::read_dir(&dir).unwrap().count();
    assert_eq!(count, 10);
    for i in 1..=10 {
        assert!(dir.join(format!("ds{i}.txt")).exists());
    }
}

#[test]
fn train_then_eval_and_bench_round_trip() {
    let dir = workdir("train1");
    generate_small(&dir, "tiny", 2, 2, 40, "28,6,6");
    let data = dir.join("tiny.txt");
    let ckpt = dir.join("plain.ckpt");

    let out = run(bin().args([
        "train",
        "--variant",
        "plain",
        "--data",
        data.to_str().unwrap(),
        "--epochs",
        "2",
        "--depth",
        "1",
        "--seed",
        "9",
        "--out",
        ckpt.to_str().unwrap(),
    ]));
    assert_code(&out, 0);
    assert!(ckpt.exists());
    let history = dir.join("plain.history.tsv");
    assert!(history.exists());
    let hist_text = fs::read_to_string(&history).unwrap();
    // Header + epoch 0 + 2 epochs.
    assert_eq!(hist_text.lines().count(), 4);

    // Determinism: identical flags and seed give identical checkpoints.
    let ckpt2 = dir.join("plain2.ckpt");
    let out = run(bin().args([
        "train",
        "--variant",
        "plain",
        "--data",
        data.to_str().unwrap(),
        "--epochs",
        "2",
        "--depth",
        "1",
        "--seed",
        "9",
        "--out",
        ckpt2.to_str().unwrap(),
    ]));
    assert_code(&out, 0);
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(&ckpt2).unwrap());

    let report = dir.join("rep");
    let out = run(bin().args([
        "eval",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--limit",
        "4",
        "--warmup",
        "1",
        "--reps",
        "1",
        "--out",
        report.to_str().unwrap(),
    ]));
    assert_code(&out, 0);
    assert!(report.with_extension("tsv").exists());
    assert!(report.with_extension("txt").exists());

    let bench_out = dir.join("bench.txt");
    let out = run(bin().args([
        "bench",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--limit",
        "3",
        "--solver-limit",
        "2",
        "--warmup",
        "1",
        "--reps",
        "1",
        "--out",
        bench_out.to_str().unwrap(),
    ]));
    assert_code(&out, 0);
    let text = fs::read_to_string(&bench_out).unwrap();
    assert!(text.contains("speedup"));
}

#[test]
fn train_missing_dataset_is_usage_error() {
    let out = run(bin().args([
        "train",
        "--variant",
        "res",
        "--data",
        "/nonexistent/ds.txt",
    ]));
    assert_code(&out, 2);
}

#[test]
fn train_on_test_only_dataset_is_usage_error() {
    let dir = workdir("train2");
    let out = run(bin().args([
        "generate", "--n", "2", "--k", "2", "--size", "5", "--name", "t",
        "--out", dir.to_str().unwrap(),
    ]));
    assert_code(&out, 0);
    let out = run(bin().args([
        "train",
        "--variant",
        "plain",
        "--data",
        dir.join("t.txt").to_str().unwrap(),
    ]));
    assert_code(&out, 2);
}

#[test]
fn baseline_solvers_write_results() {
    let dir = workdir("base1");
    generate_small(&dir, "b", 1, 2, 8, "4,2,2");
    let data = dir.join("b.txt");
    for solver in ["sca", "oracle"] {
        let out_path = dir.join(format!("{solver}.tsv"));
        let out = run(bin().args([
            "baseline",
            "--solver",
            solver,
            "--data",
            data.to_str().unwrap(),
            "--limit",
            "2",
            "--grid-step",
            "0.05",
            "--out",
            out_path.to_str().unwrap(),
        ]));
        assert_code(&out, 0);
        let text = fs::read_to_string(&out_path).unwrap();
        assert_eq!(text.lines().count(), 3, "{text}");
    }
    let out = run(bin().args([
        "baseline",
        "--solver",
        "nope",
        "--data",
        data.to_str().unwrap(),
    ]));
    assert_code(&out, 2);
}

#[test]
fn eval_accepts_precomputed_baseline() {
    let dir = workdir("eval1");
    generate_small(&dir, "e", 2, 2, 30, "20,5,5");
    let data = dir.join("e.txt");
    let base = dir.join("base.tsv");
    let out = run(bin().args([
        "baseline",
        "--data",
        data.to_str().unwrap(),
        "--limit",
        "3",
        "--out",
        base.to_str().unwrap(),
    ]));
    assert_code(&out, 0);

    let ckpt = dir.join("m.ckpt");
    let out = run(bin().args([
        "train", "--variant", "res", "--data", data.to_str().unwrap(),
        "--epochs", "1", "--depth", "1", "--seed", "4",
        "--out", ckpt.to_str().unwrap(),
    ]));
    assert_code(&out, 0);

    let report = dir.join("rep");
    let out = run(bin().args([
        "eval",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--baseline",
        base.to_str().unwrap(),
        "--limit",
        "3",
        "--warmup",
        "0",
        "--reps",
        "1",
        "--out",
        report.to_str().unwrap(),
    ]));
    assert_code(&out, 0);
    let tsv = fs::read_to_string(report.with_extension("tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 2);
}

#[test]
fn ablate_tiny_grid() {
    let dir = workdir("abl1");
    generate_small(&dir, "a", 1, 2, 30, "20,5,5");
    let out = run(bin().args([
        "ablate",
        "--data",
        dir.join("a.txt").to_str().unwrap(),
        "--depths",
        "1",
        "--variants",
        "plain",
        "--epochs",
        "1",
        "--eval-limit",
        "3",
        "--seed",
        "2",
        "--out",
        dir.join("abl").to_str().unwrap(),
    ]));
    assert_code(&out, 0);
    let table = fs::read_to_string(dir.join("abl/ablation.txt")).unwrap();
    assert!(table.contains("gat-plain"));
    assert!(table.contains("depth 1"));
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = workdir("cfg1");
    generate_small(&dir, "c", 2, 2, 30, "20,5,5");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "epochs=1\ndepth=1\nseed=6\n").unwrap();
    let ckpt = dir.join("c.ckpt");
    let out = run(bin().args([
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--variant",
        "plain",
        "--data",
        dir.join("c.txt").to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
    ]));
    assert_code(&out, 0);
    // epochs=1 from the config: history has header + epoch0 + 1 epoch.
    let hist = fs::read_to_string(dir.join("c.history.tsv")).unwrap();
    assert_eq!(hist.lines().count(), 3);

    // Explicit flag overrides the config value.
    let out = run(bin().args([
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--variant",
        "plain",
        "--data",
        dir.join("c.txt").to_str().unwrap(),
        "--epochs",
        "2",
        "--out",
        ckpt.to_str().unwrap(),
    ]));
    assert_code(&out, 0);
    let hist = fs::read_to_string(dir.join("c.history.tsv")).unwrap();
    assert_eq!(hist.lines().count(), 4);
}

#[test]
fn help_documents_defaults() {
    for sub in ["generate", "train", "baseline", "eval", "ablate", "bench"] {
        let out = run(bin().args([sub, "--help"]));
        assert_code(&out, 0);
        let text = String::from_utf8_lossy(&out.stdout).to_string();
        assert!(text.contains("--help"));
        if sub == "train" {
            for needle in ["50", "16", "0.001", "10", "0.1"] {
                assert!(text.contains(needle), "train --help missing {needle}: {text}");
            }
        }
    }
}
