use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::metrics::{mean_std, Metrics};
use super::prepare::PreparedDataset;
use super::regime::{Hyperparams, Regime};
use super::run::{train_regime, EpochInfo, SplitMetrics, TrainedRun};
use crate::error::{Error, Result};
use crate::nn::save_checkpoint;
use crate::optics::export::{read_f32_le, write_f32_le, write_led_csv};
use crate::optics::{FieldKind, Led, PhysicalParams, RealGrid};

pub const SUMMARY_HEADER: &str = "regime,n_seeds,acc_mean,acc_std,sens_mean,sens_std,spec_mean,spec_std";

/// Serializable record of one finished run (`run.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub regime: Regime,
    pub seed: u64,
    pub hyper: Hyperparams,
    pub best_epoch: usize,
    pub metrics: SplitMetrics,
    pub history: Vec<EpochInfo>,
    pub eval_noise_seed: u64,
    pub led_weights: Vec<f64>,
    /// Mean pupil transmission over the support.
    pub transmission_fraction: f64,
    /// Mean |w| over all LEDs.
    pub emission_fraction: f64,
    pub bright_field_abs_weight: f64,
    pub dark_field_abs_weight: f64,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl RunRecord {
    pub fn from_run(run: &TrainedRun, leds: &[Led], meta: &BTreeMap<String, String>) -> Self {
        let field_sum = |kind: FieldKind| {
            leds.iter().zip(&run.params.led_weights).filter(|(l, _)| l.field_kind == kind).map(|(_, w)| w.abs()).sum()
        };
        Self {
            regime: run.regime,
            seed: run.hyper.seed,
            hyper: run.hyper.clone(),
            best_epoch: run.best_epoch,
            metrics: run.metrics.clone(),
            history: run.history.clone(),
            eval_noise_seed: run.eval_noise_seed,
            led_weights: run.params.led_weights.clone(),
            transmission_fraction: run.params.transmission_fraction(),
            emission_fraction: run.params.emission_fraction(),
            bright_field_abs_weight: field_sum(FieldKind::BrightField),
            dark_field_abs_weight: field_sum(FieldKind::DarkField),
            meta: meta.clone(),
        }
    }

    pub fn test(&self) -> &Metrics {
        &self.metrics.test
    }
}

/// Aggregate over the seeds of one regime.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub regime: Regime,
    pub runs: Vec<RunRecord>,
    /// Final physical parameters, aligned with `runs`.
    pub final_params: Vec<PhysicalParams>,
    /// Seeds whose run failed, with the error text; excluded from the stats.
    pub failures: Vec<(u64, String)>,
    pub accuracy: Option<(f64, f64)>,
    pub sensitivity: Option<(f64, f64)>,
    pub specificity: Option<(f64, f64)>,
}

impl RunSummary {
    pub fn from_runs(
        regime: Regime,
        runs: Vec<RunRecord>,
        final_params: Vec<PhysicalParams>,
        failures: Vec<(u64, String)>,
    ) -> Self {
        let acc: Vec<f64> = runs.iter().map(|r| r.test().accuracy).collect();
        let sens: Vec<f64> = runs.iter().filter_map(|r| r.test().sensitivity).collect();
        let spec: Vec<f64> = runs.iter().filter_map(|r| r.test().specificity).collect();
        Self {
            regime,
            accuracy: mean_std(&acc),
            sensitivity: mean_std(&sens),
            specificity: mean_std(&spec),
            runs,
            final_params,
            failures,
        }
    }

    pub fn n_seeds(&self) -> usize {
        self.runs.len()
    }
}

/// `summary.csv` text, one row per regime. Undefined statistics print as `NA`.
pub fn summary_csv(summaries: &[RunSummary], comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(text) = comment {
        for line in text.lines() {
            s.push_str(&format!("# {line}\n"));
        }
    }
    s.push_str(SUMMARY_HEADER);
    s.push('\n');
    let cell = |v: Option<(f64, f64)>| match v {
        Some((m, d)) => format!("{m:.4},{d:.4}"),
        None => "NA,NA".to_string(),
    };
    for r in summaries {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.regime,
            r.n_seeds(),
            cell(r.accuracy),
            cell(r.sensitivity),
            cell(r.specificity)
        ));
    }
    s
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Concurrent runs; 0 or 1 runs sequentially.
    pub workers: usize,
    /// Where per-run artifacts go (`<out>/runs/<REGIME>/seed-<seed>/`).
    pub out_dir: Option<PathBuf>,
    /// Reuse `run.json` files already present with identical `meta`.
    pub resume: bool,
    /// Embedded into every artifact.
    pub meta: BTreeMap<String, String>,
    /// Report each finished run on stderr.
    pub progress: bool,
}

pub fn run_dir(out: &Path, regime: Regime, seed: u64) -> PathBuf {
    out.join("runs").join(regime.name()).join(format!("seed-{seed}"))
}

fn provenance(meta: &BTreeMap<String, String>) -> String {
    meta.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("\n")
}

/// Writes `run.json`, `pupil.f32`, `leds.csv` and the model checkpoint.
pub fn save_run(dir: &Path, run: &TrainedRun, leds: &[Led], meta: &BTreeMap<String, String>) -> Result<RunRecord> {
    fs::create_dir_all(dir)?;
    let record = RunRecord::from_run(run, leds, meta);
    write_f32_le(&dir.join("pupil.f32"), run.params.pupil.data())?;
    write_led_csv(&dir.join("leds.csv"), leds, &run.params.led_weights, Some(&provenance(meta)))?;
    save_checkpoint(&run.model, &dir.join("checkpoint"), meta)?;
    // run.json last: its presence marks the run as complete
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&record)? + "\n")?;
    Ok(record)
}

/// Reads back a run's record and final physical parameters.
pub fn load_run(dir: &Path, template: &PhysicalParams) -> Result<(RunRecord, PhysicalParams)> {
    let path = dir.join("run.json");
    if !path.exists() {
        return Err(Error::NotFound(path));
    }
    let record: RunRecord = serde_json::from_str(&fs::read_to_string(&path)?)?;
    let pupil = read_f32_le(&dir.join("pupil.f32"))?;
    let mut params = template.clone();
    if pupil.len() != params.pupil.data().len() || record.led_weights.len() != params.led_weights.len() {
        return Err(Error::Shape(format!("run in {} does not match the microscope geometry", dir.display())));
    }
    params.pupil = RealGrid::new(params.pupil.n(), pupil)?;
    params.led_weights = record.led_weights.clone();
    Ok((record, params))
}

type JobResult = std::result::Result<(RunRecord, PhysicalParams), String>;

/// Trains every `(regime, seed)` pair, seeds `hyper.seed .. hyper.seed + n_seeds`.
/// Failed runs are recorded and excluded; aggregation order is fixed.
pub fn run_sweep(
    regimes: &[Regime],
    n_seeds: usize,
    data: &PreparedDataset,
    hyper: &Hyperparams,
    opts: &SweepOptions,
) -> Result<Vec<RunSummary>> {
    if n_seeds < 2 {
        return Err(Error::Validation(format!("a sweep needs at least 2 seeds, got {n_seeds}")));
    }
    if regimes.is_empty() {
        return Err(Error::Validation("no regimes requested".into()));
    }
    hyper.validate()?;
    let jobs: Vec<(Regime, u64)> =
        regimes.iter().flat_map(|&r| (0..n_seeds as u64).map(move |k| (r, hyper.seed + k))).collect();
    let results: Mutex<Vec<Option<JobResult>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let template = PhysicalParams::default_for(&data.config, data.leds.len(), 0);

    let work = || loop {
        let j = next.fetch_add(1, Ordering::SeqCst);
        if j >= jobs.len() {
            break;
        }
        let (regime, seed) = jobs[j];
        let outcome = run_job(regime, seed, data, hyper, opts, &template);
        results.lock().expect("results lock")[j] = Some(outcome);
    };
    let workers = opts.workers.max(1).min(jobs.len());
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(&work);
            }
        });
    }

    let results = results.into_inner().expect("results lock");
    let mut summaries = Vec::new();
    for &regime in regimes {
        let (mut runs, mut params, mut failures) = (Vec::new(), Vec::new(), Vec::new());
        for ((r, seed), res) in jobs.iter().zip(&results) {
            if *r != regime {
                continue;
            }
            match res.clone().expect("every job ran") {
                Ok((rec, p)) => {
                    runs.push(rec);
                    params.push(p);
                }
                Err(e) => failures.push((*seed, e)),
            }
        }
        summaries.push(RunSummary::from_runs(regime, runs, params, failures));
    }
    Ok(summaries)
}

fn run_job(
    regime: Regime,
    seed: u64,
    data: &PreparedDataset,
    hyper: &Hyperparams,
    opts: &SweepOptions,
    template: &PhysicalParams,
) -> JobResult {
    let dir = opts.out_dir.as_ref().map(|o| run_dir(o, regime, seed));
    if let (true, Some(d)) = (opts.resume, &dir) {
        if let Ok((rec, p)) = load_run(d, template) {
            if rec.meta == opts.meta && rec.regime == regime && rec.seed == seed {
                return Ok((rec, p));
            }
        }
    }
    let h = Hyperparams { seed, ..hyper.clone() };
    let outcome = train_regime(regime, data, &h).and_then(|run| {
        let record = match &dir {
            Some(d) => save_run(d, &run, &data.leds, &opts.meta)?,
            None => RunRecord::from_run(&run, &data.leds, &opts.meta),
        };
        Ok((record, run.params))
    });
    if opts.progress {
        match &outcome {
            Ok((r, _)) => eprintln!(
                "[{regime} seed {seed}] test accuracy {:.2} (best epoch {})",
                r.test().accuracy,
                r.best_epoch + 1
            ),
            Err(e) => eprintln!("[{regime} seed {seed}] failed: {e}"),
        }
    }
    outcome.map_err(|e| e.to_string())
}
