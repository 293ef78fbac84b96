mod common;

use common::*;
use learned_sensing::optics::{build_led_array, fft2, forward_capture, ifft2, CaptureMode, MicroscopeConfig};
use rand::Rng;

#[test]
fn direct_dft_agrees_with_fft() {
    let mut r = rng(1);
    for n in [4, 8, 16] {
        let obj = random_object(n, &mut r);
        let fast = fft2(&obj).unwrap();
        let slow = direct_dft2(n, obj.data(), -1.0);
        for (a, b) in fast.data().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12, "n = {n}");
        }
        let back = ifft2(&fast).unwrap();
        for (a, b) in back.data().iter().zip(obj.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn forward_capture_matches_direct_summation() {
    let cfg = MicroscopeConfig::micro();
    let leds = build_led_array(&cfg).unwrap();
    let mut r = rng(2);
    for k in 0..10 {
        let obj = random_object(cfg.grid_n, &mut r);
        let params = random_params(&cfg, leds.len(), &mut r);
        let fast = forward_capture(&obj, &params, &cfg, 0.0, &mut r).unwrap();
        let slow = direct_capture(&obj, &params, &leds, cfg.sensor_n);
        let err = rel_max_diff(fast.data(), &slow);
        assert!(err < 1e-8, "instance {k}: relative error {err:.3e}");
    }
}

#[test]
fn signed_and_split_modes_agree_without_noise() {
    let mut cfg = MicroscopeConfig::micro();
    let leds = build_led_array(&cfg).unwrap();
    let mut r = rng(3);
    let obj = random_object(cfg.grid_n, &mut r);
    let params = random_params(&cfg, leds.len(), &mut r);
    let split = forward_capture(&obj, &params, &cfg, 0.0, &mut r).unwrap();
    cfg.capture_mode = CaptureMode::Signed;
    let signed = forward_capture(&obj, &params, &cfg, 0.0, &mut r).unwrap();
    assert!(rel_max_diff(split.data(), signed.data()) < 1e-12);
}

#[test]
fn single_led_image_is_the_direct_coherent_intensity() {
    let cfg = MicroscopeConfig::micro();
    let leds = build_led_array(&cfg).unwrap();
    let mut r = rng(4);
    let obj = random_object(cfg.grid_n, &mut r);
    for i in 0..leds.len() {
        let mut params = random_params(&cfg, leds.len(), &mut r);
        params.led_weights.iter_mut().for_each(|w| *w = 0.0);
        params.led_weights[i] = r.random_range(0.1..1.0);
        let fast = forward_capture(&obj, &params, &cfg, 0.0, &mut r).unwrap();
        let slow = direct_capture(&obj, &params, &leds, cfg.sensor_n);
        assert!(rel_max_diff(fast.data(), &slow) < 1e-8, "LED {i}");
        assert!(fast.data().iter().all(|&v| v >= 0.0));
    }
}
