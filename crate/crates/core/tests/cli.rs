use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use learned_sensing::cli::RunConfig;
use learned_sensing::data::SyntheticParams;
use learned_sensing::optics::export::{decode_pgm, LED_CSV_HEADER};
use learned_sensing::optics::{MicroscopeConfig, PupilSupport};
use learned_sensing::train::{Regime, SUMMARY_HEADER};

fn lsn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsn")).args(args).output().expect("run lsn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// Writes a small but complete experiment config into `dir`.
fn tiny_config(dir: &Path, regimes: &[Regime], n_seeds: usize) -> PathBuf {
    let mut cfg = RunConfig::default();
    cfg.microscope = MicroscopeConfig::mini();
    cfg.data.dir = PathBuf::from("data");
    cfg.data.synthetic =
        SyntheticParams { n_per_class: 10, augment_translations: 2, grid_n: 64, canvas_n: 32, seed: 4 };
    cfg.data.split = [0.6, 0.2, 0.2];
    cfg.train.epochs = 1;
    cfg.train.batch_size = 8;
    cfg.sweep.regimes = regimes.to_vec();
    cfg.sweep.n_seeds = n_seeds;
    cfg.sweep.out_dir = PathBuf::from("runs");
    let path = dir.join("lsn.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_bad_flags() {
    let o = lsn(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["gen-data", "train", "sweep", "eval", "export-patterns", "gradcheck"] {
        assert!(text(&o.stdout).contains(sub), "{sub} missing from help");
    }
    let o = lsn(&["sweep", "--no-such-flag"]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("Usage"));
    assert_eq!(code(&lsn(&["frobnicate"])), 1);
    assert_eq!(code(&lsn(&["--version"])), 0);
}

#[test]
fn config_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[train]\nlearning_rate = 0.1\n").unwrap();
    let o = lsn(&["gen-data", "--config", s(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("learning_rate"));
    assert_eq!(code(&lsn(&["gen-data", "--config", s(&tmp.path().join("missing.toml"))])), 1);
    let cfg = tiny_config(tmp.path(), &[Regime::DO], 2);
    let o = lsn(&["train", "--config", s(&cfg), "--regime", "XO"]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("DO, PO, IO, PIO"));
    // no dataset generated yet
    let o = lsn(&["train", "--config", s(&cfg), "--regime", "DO"]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("gen-data"));
}

#[test]
fn gen_data_refuses_overwrite_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[Regime::DO], 2);
    let first = lsn(&["gen-data", "--config", s(&cfg)]);
    assert_eq!(code(&first), 0, "{}", text(&first.stderr));
    let out = text(&first.stdout);
    assert!(out.contains("rectangle") && out.contains("triangle") && out.contains("20"));
    let again = lsn(&["gen-data", "--config", s(&cfg)]);
    assert_eq!(code(&again), 1);
    assert!(text(&again.stderr).contains("--force"));
    let forced = lsn(&["gen-data", "--config", s(&cfg), "--force"]);
    assert_eq!(code(&forced), 0);
    let hash = |o: &Output| text(&o.stdout).lines().find(|l| l.starts_with("manifest sha256")).unwrap().to_string();
    assert_eq!(hash(&first), hash(&forced));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = lsn(&["gen-data", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_ne!(code(&o), 0);
    assert!(text(&o.stderr).starts_with("error:"));
}

#[test]
fn sweep_eval_and_export() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[Regime::DO, Regime::PIO], 3);
    assert_eq!(code(&lsn(&["gen-data", "--config", s(&cfg)])), 0);

    let o = lsn(&["sweep", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let runs = tmp.path().join("runs");
    let summary = fs::read_to_string(runs.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], SUMMARY_HEADER);
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("DO,3,") && rows[2].starts_with("PIO,3,"));
    assert!(summary.contains("config_hash"));
    let status = fs::read_to_string(runs.join("status.json")).unwrap();
    assert!(status.contains("\"complete\""));

    // the rerun guard, then an interrupted sweep resumed
    let o = lsn(&["sweep", "--config", s(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("--force"));
    fs::remove_dir_all(runs.join("runs/PIO/seed-1")).unwrap();
    fs::write(runs.join("status.json"), status.replace("\"complete\"", "\"partial\"")).unwrap();
    fs::remove_file(runs.join("summary.csv")).unwrap();
    let kept = fs::metadata(runs.join("runs/DO/seed-0/run.json")).unwrap().modified().unwrap();
    let o = lsn(&["sweep", "--config", s(&cfg), "--resume"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert_eq!(fs::metadata(runs.join("runs/DO/seed-0/run.json")).unwrap().modified().unwrap(), kept);
    assert_eq!(fs::read_to_string(runs.join("summary.csv")).unwrap(), summary);
    let o = lsn(&["sweep", "--config", s(&cfg), "--force"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(runs.join("summary.csv")).unwrap(), summary);

    // eval reproduces the stored test metrics
    let run = runs.join("runs/PIO/seed-2");
    let o = lsn(&["eval", "--config", s(&cfg), "--run", s(&run)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let evaluated: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let stored: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(evaluated, stored["metrics"]["test"]);
    assert_eq!(code(&lsn(&["eval", "--config", s(&cfg), "--run", s(&run), "--split", "dev"])), 1);

    // export of the DO runs: clear disk pupil, only the axial LED lit
    let out = tmp.path().join("export-do");
    let o = lsn(&["export-patterns", "--config", s(&cfg), "--run", s(&runs.join("runs/DO")), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let (w, h, px) = decode_pgm(&fs::read(out.join("pupil_mean.pgm")).unwrap()).unwrap();
    assert_eq!((w, h), (64, 64));
    let support = PupilSupport::from_config(&MicroscopeConfig::mini());
    for (i, &v) in px.iter().enumerate() {
        assert_eq!(v, if support.contains(i) { 255 } else { 0 });
    }
    let (_, _, var) = decode_pgm(&fs::read(out.join("pupil_var.pgm")).unwrap()).unwrap();
    assert!(var.iter().all(|&v| v == 0));
    let csv = fs::read_to_string(out.join("leds.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], LED_CSV_HEADER);
    assert_eq!(rows.len(), 26);
    let lit = rows[1..].iter().filter(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap() != 0.0).count();
    assert_eq!(lit, 1);
    for class in ["rectangle", "triangle"] {
        for j in 0..4 {
            let (w, _, _) = decode_pgm(&fs::read(out.join(format!("example_{class}_{j}.pgm"))).unwrap()).unwrap();
            assert_eq!(w, 16);
        }
    }
    // the whole sweep exports one directory per regime
    let all = tmp.path().join("export-all");
    assert_eq!(code(&lsn(&["export-patterns", "--config", s(&cfg), "--run", s(&runs), "--out", s(&all)])), 0);
    assert!(all.join("DO/pupil_mean.pgm").exists() && all.join("PIO/leds.csv").exists());
    let o = lsn(&["export-patterns", "--config", s(&cfg), "--run", s(&tmp.path().join("nope")), "--out", s(&all)]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("not found"));
}

#[test]
fn train_single_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), &[Regime::IO], 2);
    assert_eq!(code(&lsn(&["gen-data", "--config", s(&cfg)])), 0);
    let o = lsn(&["train", "--config", s(&cfg), "--regime", "io", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let dir = tmp.path().join("runs/runs/IO/seed-7");
    for f in ["run.json", "pupil.f32", "leds.csv", "checkpoint/manifest.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    assert!(fs::read_to_string(dir.join("leds.csv")).unwrap().contains("config_hash"));
    assert_eq!(code(&lsn(&["train", "--config", s(&cfg), "--regime", "IO", "--seed", "7"])), 1);
}

#[test]
fn gradcheck_passes_and_catches_faults() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.csv");
    let o = lsn(&["gradcheck", "--instances", "3", "--report", s(&report)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let csv = text(&o.stdout);
    assert!(csv.contains("\nweights,") && csv.contains("\npupil,") && csv.contains("\nend_to_end,"));
    assert_eq!(fs::read_to_string(&report).unwrap(), csv);
    let o = lsn(&["gradcheck", "--instances", "2", "--fault-scale", "1.1"]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("relative error"));
}
