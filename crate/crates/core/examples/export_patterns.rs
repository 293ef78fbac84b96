//! Trains PIO briefly, then writes the learned pupil, the LED weights and a
//! sensor image of each class.
//!
//! cargo run --release --example export_patterns -- [out_dir]

use std::path::PathBuf;

use learned_sensing::data::{ObjectSource, SyntheticDataset, SyntheticParams};
use learned_sensing::optics::export::{write_led_csv, write_pgm, GrayScale};
use learned_sensing::optics::TraceRequest;
use learned_sensing::train::{train_regime, Hyperparams, PreparedDataset, Regime};
use rand::SeedableRng;

fn main() -> learned_sensing::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "patterns-out".into()));
    std::fs::create_dir_all(&out)?;
    let source =
        SyntheticDataset::generate(SyntheticParams { n_per_class: 30, augment_translations: 2, ..Default::default() })?;
    let config = learned_sensing::optics::MicroscopeConfig::desk_scale();
    let data = PreparedDataset::new(&source, &config, [0.7, 0.15, 0.15], 0)?;
    let run = train_regime(Regime::PIO, &data, &Hyperparams { epochs: 3, ..Default::default() })?;

    write_pgm(&out.join("pupil.pgm"), &run.params.pupil, GrayScale::Unit, Some("learned pupil"))?;
    write_led_csv(&out.join("leds.csv"), &data.leds, &run.params.led_weights, None)?;
    for label in 0..2 {
        let i = data.splits.test.iter().copied().find(|&i| data.labels[i] == label).expect("both classes in test");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let cap = data.capture(i, &run.params, TraceRequest::default(), 0.0, &mut rng)?;
        let path = out.join(format!("{}.pgm", source.sample_id(i)));
        write_pgm(&path, &cap.image, GrayScale::Stretch, None)?;
        println!("class {label}: {}", path.display());
    }
    println!(
        "pupil transmission {:.3}, test accuracy {:.1}%",
        run.params.transmission_fraction(),
        run.metrics.test.accuracy
    );
    Ok(())
}
