use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CliError, RunConfig};
use crate::data::{save_dataset, sha256_hex, SaveInfo, ShapeKind, Split, StoredDataset, SyntheticDataset};
use crate::grad::{certify, GradCheckOptions};
use crate::nn::load_checkpoint;
use crate::optics::export::{write_f32_le, write_led_csv, write_pgm, GrayScale};
use crate::optics::{PhysicalParams, RealGrid, TraceRequest};
use crate::train::{
    evaluate, load_run, run_dir, run_sweep, save_run, summary_csv, train_regime_observed, EpochInfo, PreparedDataset,
    Regime, RunSummary, SweepOptions, TrainObserver,
};

fn is_nonempty_dir(p: &Path) -> bool {
    fs::read_dir(p).map(|mut d| d.next().is_some()).unwrap_or(false)
}

fn provenance(cfg: &RunConfig) -> String {
    cfg.meta().iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("\n")
}

fn open_prepared(cfg: &RunConfig) -> Result<PreparedDataset, CliError> {
    let ds = StoredDataset::open(&cfg.data.dir).map_err(|e| match e {
        crate::Error::NotFound(p) => {
            CliError::usage(format!("dataset not found at {} (run `lsn gen-data` first)", p.display()))
        }
        other => other.into(),
    })?;
    Ok(PreparedDataset::new(&ds, &cfg.microscope, cfg.data.split, cfg.data.split_seed)?)
}

pub fn gen_data(cfg: &RunConfig, out: Option<PathBuf>, force: bool) -> Result<(), CliError> {
    let dir = out.unwrap_or_else(|| cfg.data.dir.clone());
    if is_nonempty_dir(&dir) && !force {
        return Err(CliError::usage(format!("{} is not empty; pass --force to overwrite", dir.display())));
    }
    let ds = SyntheticDataset::generate(cfg.data.synthetic.clone())?;
    let info =
        SaveInfo { seed: Some(cfg.data.synthetic.seed), synthetic: Some(cfg.data.synthetic.clone()), meta: cfg.meta() };
    let manifest = save_dataset(&ds, &dir, &info)?;
    let hash = sha256_hex(&fs::read(dir.join("manifest.json")).map_err(crate::Error::from)?);
    println!("wrote {} samples to {}", manifest.entries.len(), dir.display());
    for kind in ShapeKind::ALL {
        println!("  {:<9} {}", kind.name(), manifest.class_counts.get(kind.label()).copied().unwrap_or(0));
    }
    println!("manifest sha256 {hash}");
    Ok(())
}

struct Progress(String);

impl TrainObserver for Progress {
    fn on_epoch(&mut self, info: &EpochInfo) {
        eprintln!(
            "[{}] epoch {:>3}  loss {:.4}  val acc {:.2}",
            self.0,
            info.epoch + 1,
            info.train_loss,
            info.val_accuracy
        );
    }
}

pub fn train(
    cfg: &RunConfig,
    regime: Regime,
    seed: Option<u64>,
    out: Option<PathBuf>,
    force: bool,
) -> Result<(), CliError> {
    let mut hyper = cfg.train.clone();
    if let Some(s) = seed {
        hyper.seed = s;
    }
    let dir = run_dir(&out.unwrap_or_else(|| cfg.sweep.out_dir.clone()), regime, hyper.seed);
    if dir.join("run.json").exists() && !force {
        return Err(CliError::usage(format!(
            "{} already holds a finished run; pass --force to retrain",
            dir.display()
        )));
    }
    let data = open_prepared(cfg)?;
    let run = train_regime_observed(regime, &data, &hyper, &mut Progress(format!("{regime} seed {}", hyper.seed)))?;
    let record = save_run(&dir, &run, &data.leds, &cfg.meta())?;
    println!("{}", serde_json::to_string_pretty(&record.metrics).map_err(crate::Error::from)?);
    println!("saved to {}", dir.display());
    Ok(())
}

/// `status.json` of a sweep directory. A state other than `complete` marks
/// the summary as partial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStatus {
    pub state: String,
    pub config_hash: String,
    pub tool_version: String,
    #[serde(default)]
    pub failures: Vec<String>,
}

fn write_status(dir: &Path, status: &SweepStatus) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(status).map_err(crate::Error::from)? + "\n";
    fs::write(dir.join("status.json"), text).map_err(crate::Error::from)?;
    Ok(())
}

pub fn sweep(cfg: &RunConfig, force: bool, resume: bool) -> Result<(), CliError> {
    let out = &cfg.sweep.out_dir;
    let hash = cfg.hash();
    let status_path = out.join("status.json");
    if status_path.exists() {
        let text = fs::read_to_string(&status_path).map_err(crate::Error::from)?;
        let old: SweepStatus = serde_json::from_str(&text).map_err(crate::Error::from)?;
        if resume && old.config_hash != hash {
            return Err(CliError::usage(format!(
                "cannot resume: {} was produced by config {}, current config is {hash}",
                out.display(),
                old.config_hash
            )));
        }
        if !resume && !force {
            let verb = if old.config_hash == hash { "already ran this config" } else { "holds a different sweep" };
            return Err(CliError::usage(format!(
                "{} {verb} (state {}); pass --resume to continue or --force to rerun",
                out.display(),
                old.state
            )));
        }
    } else if is_nonempty_dir(out) && !force {
        return Err(CliError::usage(format!("{} is not empty; pass --force to use it", out.display())));
    }
    fs::create_dir_all(out).map_err(crate::Error::from)?;
    let mut status = SweepStatus {
        state: "partial".into(),
        config_hash: hash,
        tool_version: super::TOOL_VERSION.into(),
        failures: vec![],
    };
    write_status(out, &status)?;

    let data = open_prepared(cfg)?;
    let opts = SweepOptions {
        workers: cfg.sweep.workers,
        out_dir: Some(out.clone()),
        resume,
        meta: cfg.meta(),
        progress: true,
    };
    let summaries = run_sweep(&cfg.sweep.regimes, cfg.sweep.n_seeds, &data, &cfg.train, &opts)?;
    for s in &summaries {
        for (seed, err) in &s.failures {
            status.failures.push(format!("{} seed {seed}: {err}", s.regime));
        }
    }
    let mut comment = provenance(cfg);
    for f in &status.failures {
        comment.push_str(&format!("\nfailed: {f}"));
    }
    fs::write(out.join("summary.csv"), summary_csv(&summaries, Some(&comment))).map_err(crate::Error::from)?;
    print_summary(&summaries);
    if summaries.iter().any(|s| s.runs.is_empty()) {
        write_status(out, &status)?;
        return Err(CliError { code: super::EXIT_RUNTIME, message: "every run of at least one regime failed".into() });
    }
    status.state = "complete".into();
    write_status(out, &status)?;
    println!("wrote {}", out.join("summary.csv").display());
    Ok(())
}

fn print_summary(summaries: &[RunSummary]) {
    let cell = |v: Option<(f64, f64)>| v.map(|(m, s)| format!("{m:6.2} ± {s:5.2}")).unwrap_or_else(|| "NA".into());
    println!("{:<6}{:>6}  {:<16}{:<16}{:<16}", "regime", "seeds", "accuracy", "sensitivity", "specificity");
    for s in summaries {
        println!(
            "{:<6}{:>6}  {:<16}{:<16}{:<16}",
            s.regime.name(),
            s.n_seeds(),
            cell(s.accuracy),
            cell(s.sensitivity),
            cell(s.specificity)
        );
        for (seed, e) in &s.failures {
            println!("  seed {seed} failed: {e}");
        }
    }
}

fn load_params(
    cfg: &RunConfig,
    data: &PreparedDataset,
    dir: &Path,
) -> Result<(crate::train::RunRecord, PhysicalParams), CliError> {
    let template = PhysicalParams::default_for(&cfg.microscope, data.leds.len(), 0);
    let (record, params) = load_run(dir, &template)?;
    if record.meta.get("config_hash") != cfg.meta().get("config_hash") {
        eprintln!("warning: {} was produced with a different config", dir.display());
    }
    Ok((record, params))
}

pub fn eval(cfg: &RunConfig, dir: &Path, split: &str) -> Result<(), CliError> {
    let split = Split::ALL
        .into_iter()
        .find(|s| s.name() == split)
        .ok_or_else(|| CliError::usage(format!("unknown split '{split}'; valid names are train, val, test")))?;
    if !dir.join("run.json").exists() {
        return Err(crate::Error::NotFound(dir.join("run.json")).into());
    }
    let data = open_prepared(cfg)?;
    let (record, params) = load_params(cfg, &data, dir)?;
    let (model, _) = load_checkpoint(&dir.join("checkpoint"))?;
    let noise = if record.hyper.eval_noise { record.hyper.noise_sigma_frac } else { 0.0 };
    let m = evaluate(&model, &params, &data, split, noise, record.eval_noise_seed)?;
    println!("{}", serde_json::to_string_pretty(&m).map_err(crate::Error::from)?);
    Ok(())
}

/// Groups of seed-run directories under `path`, each with a label.
fn run_groups(path: &Path) -> Result<Vec<(String, Vec<PathBuf>)>, CliError> {
    if path.join("run.json").exists() {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![(name, vec![path.to_path_buf()])]);
    }
    let seeds = |dir: &Path| -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = fs::read_dir(dir)
            .into_iter()
            .flatten()
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.join("run.json").exists())
            .collect();
        v.sort();
        v
    };
    let direct = seeds(path);
    if !direct.is_empty() {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![(name, direct)]);
    }
    let mut groups = Vec::new();
    for regime in Regime::ALL {
        let d = path.join("runs").join(regime.name());
        let s = seeds(&d);
        if !s.is_empty() {
            groups.push((regime.name().to_string(), s));
        }
    }
    if groups.is_empty() {
        return Err(crate::Error::NotFound(path.join("run.json")).into());
    }
    Ok(groups)
}

pub const EXAMPLES_PER_CLASS: usize = 4;

pub fn export_patterns(cfg: &RunConfig, path: &Path, out: &Path) -> Result<(), CliError> {
    let groups = run_groups(path)?;
    let data = open_prepared(cfg)?;
    let comment = provenance(cfg);
    let nested = groups.len() > 1;
    for (name, dirs) in &groups {
        let dest = if nested { out.join(name) } else { out.to_path_buf() };
        fs::create_dir_all(&dest).map_err(crate::Error::from)?;
        let mut all = Vec::new();
        for d in dirs {
            all.push(load_params(cfg, &data, d)?.1);
        }
        let n = all[0].pupil.n();
        let k = all.len() as f64;
        let mean = RealGrid::from_fn(n, |r, c| all.iter().map(|p| p.pupil.get(r, c)).sum::<f64>() / k);
        let var = RealGrid::from_fn(n, |r, c| {
            let m = mean.get(r, c);
            all.iter().map(|p| (p.pupil.get(r, c) - m).powi(2)).sum::<f64>() / k
        });
        let pupil_note = format!("{comment}\nruns: {}", dirs.len());
        write_pgm(&dest.join("pupil_mean.pgm"), &mean, GrayScale::Unit, Some(&pupil_note))?;
        write_pgm(&dest.join("pupil_var.pgm"), &var, GrayScale::Stretch, Some(&pupil_note))?;
        write_f32_le(&dest.join("pupil_mean.f32"), mean.data())?;
        write_f32_le(&dest.join("pupil_var.f32"), var.data())?;
        let weights: Vec<f64> =
            (0..data.leds.len()).map(|i| all.iter().map(|p| p.led_weights[i]).sum::<f64>() / k).collect();
        write_led_csv(&dest.join("leds.csv"), &data.leds, &weights, Some(&pupil_note))?;

        // example sensor images under the first run's physical layer
        let params = &all[0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in ShapeKind::ALL {
            let picks = data.splits.test.iter().chain(&data.splits.val).chain(&data.splits.train);
            for (j, &i) in picks.filter(|&&i| data.labels[i] == kind.label()).take(EXAMPLES_PER_CLASS).enumerate() {
                let img = data.capture(i, params, TraceRequest::default(), 0.0, &mut rng)?.image;
                let note = format!("{comment}\nsample: {}", data.ids[i]);
                write_pgm(
                    &dest.join(format!("example_{}_{j}.pgm", kind.name())),
                    &img,
                    GrayScale::Stretch,
                    Some(&note),
                )?;
            }
        }
        println!("exported {name} ({} runs) to {}", dirs.len(), dest.display());
    }
    Ok(())
}

pub fn gradcheck(
    instances: usize,
    seed: u64,
    fault_scale: f64,
    end_to_end: bool,
    report: Option<&Path>,
) -> Result<(), CliError> {
    if instances == 0 {
        return Err(CliError::usage("--instances must be at least 1"));
    }
    let opts = GradCheckOptions { instances, seed, fault_scale, end_to_end, ..Default::default() };
    let r = certify(&opts)?;
    let csv = r.to_csv();
    print!("{csv}");
    if let Some(p) = report {
        fs::write(p, &csv).map_err(crate::Error::from)?;
    }
    if !r.passed() {
        let w = r.worst().expect("failed report has rows");
        return Err(CliError::check(format!(
            "gradient check failed: {} on instance {} (coordinate {}) has relative error {:.3e} > {:.0e}",
            w.group.name(),
            w.instance,
            w.worst_coord,
            w.max_rel_error,
            w.tolerance
        )));
    }
    Ok(())
}
