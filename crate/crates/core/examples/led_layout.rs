//! Prints the desk-scale LED array: ring, angles, spectrum shift and whether
//! each LED lands inside the objective NA.
//!
//! cargo run --example led_layout

use learned_sensing::optics::{build_led_array, FieldKind, MicroscopeConfig};

fn main() -> learned_sensing::Result<()> {
    let config = MicroscopeConfig::desk_scale();
    let leds = build_led_array(&config)?;
    println!(
        "grid {} px, sensor {} px, NA {}, wavelength {} nm, pupil radius {:.2} px",
        config.grid_n,
        config.sensor_n,
        config.na,
        config.wavelength * 1e9,
        config.pupil_radius_px()
    );
    println!("{:>5} {:>4} {:>8} {:>8} {:>10}  kind", "index", "ring", "polar", "azimuth", "shift(x,y)");
    for led in &leds {
        println!(
            "{:>5} {:>4} {:>8.2} {:>8.1} {:>10}  {}",
            led.index,
            led.ring,
            led.polar_deg,
            led.azimuth_deg,
            format!("({},{})", led.shift_px[0], led.shift_px[1]),
            led.field_kind.as_str()
        );
    }
    let dark = leds.iter().filter(|l| l.field_kind == FieldKind::DarkField).count();
    println!("{} LEDs: {} bright-field, {dark} dark-field", leds.len(), leds.len() - dark);
    Ok(())
}
