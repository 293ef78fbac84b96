//! Ingests an externally supplied stack of complex objects: writes it in the
//! on-disk dataset format, reopens it, and trains IO on it.
//!
//! Here the stack is two classes of simulated cells (phase disks with and
//! without an absorbing inclusion); a real stack would come from phase
//! retrieval.
//!
//! cargo run --release --example ingest_stack

use std::collections::BTreeMap;

use learned_sensing::data::{save_dataset, ObjectSource, SaveInfo, StoredDataset};
use learned_sensing::optics::{ComplexField, MicroscopeConfig, Plane};
use learned_sensing::train::{train_regime, Hyperparams, PreparedDataset, Regime};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

struct Cells {
    n: usize,
    objects: Vec<ComplexField>,
    labels: Vec<usize>,
    ids: Vec<String>,
}

impl Cells {
    fn simulate(n: usize, per_class: usize, seed: u64) -> learned_sensing::Result<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (mut objects, mut labels, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for label in 0..2 {
            for k in 0..per_class {
                let c = n as f64 / 2.0 + rng.random_range(-4.0..4.0);
                let r = rng.random_range(6.0..9.0);
                let (ir, ic) = (c + rng.random_range(-3.0..3.0), c + rng.random_range(-3.0..3.0));
                let data = (0..n * n)
                    .map(|p| {
                        let (y, x) = ((p / n) as f64, (p % n) as f64);
                        let inside = (y - c).hypot(x - c) < r;
                        let spot = label == 1 && (y - ir).hypot(x - ic) < 3.5;
                        let amp = if spot { 0.3 } else { 1.0 };
                        Complex64::from_polar(amp, if inside { 0.8 } else { 0.0 })
                    })
                    .collect();
                objects.push(ComplexField::new(n, data, Plane::Object)?);
                labels.push(label);
                ids.push(format!("cell-{label}-{k:03}"));
            }
        }
        Ok(Self { n, objects, labels, ids })
    }
}

impl ObjectSource for Cells {
    fn len(&self) -> usize {
        self.objects.len()
    }
    fn grid_n(&self) -> usize {
        self.n
    }
    fn label(&self, i: usize) -> usize {
        self.labels[i]
    }
    fn sample_id(&self, i: usize) -> &str {
        &self.ids[i]
    }
    fn group(&self, i: usize) -> usize {
        i
    }
    fn object(&self, i: usize) -> learned_sensing::Result<ComplexField> {
        Ok(self.objects[i].clone())
    }
}

fn main() -> learned_sensing::Result<()> {
    let dir = std::env::temp_dir().join("lsn-ingest-example");
    let cells = Cells::simulate(64, 60, 1)?;
    let meta = BTreeMap::from([("source".to_string(), "simulated cells".to_string())]);
    let manifest = save_dataset(&cells, &dir, &SaveInfo { meta, ..Default::default() })?;
    println!("wrote {} objects to {}", manifest.entries.len(), dir.display());

    let stored = StoredDataset::open(&dir)?;
    println!("reopened: {} objects, load scale {}", stored.len(), stored.load_scale);
    let data = PreparedDataset::new(&stored, &MicroscopeConfig::mini(), [0.6, 0.2, 0.2], 0)?;
    let run = train_regime(Regime::IO, &data, &Hyperparams { epochs: 15, batch_size: 8, ..Default::default() })?;
    let m = &run.metrics.test;
    println!("IO test accuracy {:.1}%, sensitivity {:?}, specificity {:?}", m.accuracy, m.sensitivity, m.specificity);
    Ok(())
}
