//! Digital layers of the classifier, written against plain slices with
//! hand-derived adjoints.

mod adam;
mod checkpoint;
pub mod layers;
mod model;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState, ModelAdam};
pub use checkpoint::{load_checkpoint, save_checkpoint, BlobEntry, CheckpointManifest, CHECKPOINT_VERSION};
pub use layers::{cross_entropy, softmax};
pub use model::{DigitalModel, CHANNELS, CLASSES, HIDDEN, PARAM_NAMES};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::RealGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_toy_set_is_learned() {
        // bright blob on the left half is class 0, on the right half class 1
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let data: Vec<(RealGrid, usize)> = (0..20)
            .map(|k| {
                let label = k % 2;
                let col = if label == 0 { rng.random_range(0..3) } else { rng.random_range(5..8) };
                let row = rng.random_range(1..7);
                let img = RealGrid::from_fn(8, |r, c| {
                    let near = r.abs_diff(row) <= 1 && c.abs_diff(col) <= 1;
                    if near {
                        1.0
                    } else {
                        0.05 * rng_free_noise(r, c, k)
                    }
                });
                (img, label)
            })
            .collect();
        let mut model = DigitalModel::init(8, 1).unwrap();
        let mut opt = ModelAdam::new(&model, AdamConfig::new(1e-2).unwrap()).unwrap();
        let mut reached = None;
        for epoch in 0..200 {
            model.zero_grad();
            for (img, y) in &data {
                model.backward_with(img, *y, false).unwrap();
            }
            model.scale_grads(1.0 / data.len() as f64);
            opt.step(&mut model).unwrap();
            let correct = data.iter().filter(|(img, y)| model.predict(img).unwrap() == *y).count();
            if correct == data.len() {
                reached = Some(epoch);
                break;
            }
        }
        assert!(reached.is_some(), "toy set not separated in 200 epochs");
    }

    fn rng_free_noise(r: usize, c: usize, k: usize) -> f64 {
        (((r * 31 + c * 17 + k * 7) % 13) as f64) / 13.0
    }
}
