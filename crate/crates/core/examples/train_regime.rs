//! Trains one regime on a reduced synthetic dataset and reports split
//! metrics and where the illumination energy went.
//!
//! cargo run --release --example train_regime -- [DO|PO|IO|PIO] [epochs]

use learned_sensing::data::{SyntheticDataset, SyntheticParams};
use learned_sensing::optics::{FieldKind, MicroscopeConfig};
use learned_sensing::train::{train_regime, Hyperparams, PreparedDataset, Regime};

fn main() -> learned_sensing::Result<()> {
    let mut args = std::env::args().skip(1);
    let regime: Regime = args.next().as_deref().unwrap_or("PIO").parse()?;
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);

    let synthetic = SyntheticParams { n_per_class: 40, augment_translations: 4, ..Default::default() };
    let data = PreparedDataset::new(
        &SyntheticDataset::generate(synthetic)?,
        &MicroscopeConfig::desk_scale(),
        [0.7, 0.15, 0.15],
        0,
    )?;
    println!("{regime}: {} samples, {} train", data.len(), data.splits.train.len());

    let run = train_regime(regime, &data, &Hyperparams { epochs, ..Default::default() })?;
    for e in &run.history {
        println!("epoch {:>2}  loss {:.4}  val {:.1}%", e.epoch + 1, e.train_loss, e.val_accuracy);
    }
    let m = &run.metrics;
    println!(
        "best epoch {}: train {:.1}%  val {:.1}%  test {:.1}%",
        run.best_epoch + 1,
        m.train.accuracy,
        m.val.accuracy,
        m.test.accuracy
    );
    let (mut bright, mut dark) = (0.0, 0.0);
    for (w, led) in run.params.led_weights.iter().zip(&data.leds) {
        match led.field_kind {
            FieldKind::BrightField => bright += w.abs(),
            FieldKind::DarkField => dark += w.abs(),
        }
    }
    println!(
        "sum |w|: bright-field {bright:.3}, dark-field {dark:.3}; pupil transmission {:.3}",
        run.params.transmission_fraction()
    );
    Ok(())
}
