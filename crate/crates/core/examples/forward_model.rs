//! Simulates one synthetic triangle under three illumination patterns and
//! writes the sensor images as PGM files.
//!
//! cargo run --example forward_model -- [out_dir]

use std::path::PathBuf;

use learned_sensing::data::{ObjectSource, SyntheticDataset, SyntheticParams};
use learned_sensing::optics::export::{write_pgm, GrayScale};
use learned_sensing::optics::{
    build_led_array, center_led, forward_capture, FieldKind, MicroscopeConfig, PhysicalParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> learned_sensing::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "forward-model-out".into()));
    std::fs::create_dir_all(&out)?;

    let config = MicroscopeConfig::desk_scale();
    let leds = build_led_array(&config)?;
    let data =
        SyntheticDataset::generate(SyntheticParams { n_per_class: 10, augment_translations: 1, ..Default::default() })?;
    let triangle = (0..data.len()).find(|&i| data.label(i) == 1).expect("one triangle");
    let object = data.object(triangle)?;

    let center = center_led(&leds).expect("axial LED");
    let mut patterns = vec![("bright", PhysicalParams::default_for(&config, leds.len(), center))];
    let mut dark = PhysicalParams::default_for(&config, leds.len(), center);
    for (w, led) in dark.led_weights.iter_mut().zip(&leds) {
        *w = if led.field_kind == FieldKind::DarkField { 1.0 } else { 0.0 };
    }
    patterns.push(("darkfield", dark.clone()));
    // alternate signs around the outer ring: two captures, subtracted
    for (k, (w, led)) in dark.led_weights.iter_mut().zip(&leds).enumerate() {
        if led.field_kind == FieldKind::DarkField && k % 2 == 1 {
            *w = -1.0;
        }
    }
    patterns.push(("signed", dark));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (name, params) in &patterns {
        let image = forward_capture(&object, params, &config, 0.01, &mut rng)?;
        let path = out.join(format!("{name}.pgm"));
        write_pgm(&path, &image, GrayScale::Stretch, Some(name))?;
        println!("{name:<10} min {:+.4e} max {:+.4e} -> {}", image.min(), image.max(), path.display());
    }
    Ok(())
}
