use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::*;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::optics::RealGrid;

pub const CHANNELS: usize = 6;
pub const HIDDEN: usize = 64;
pub const CLASSES: usize = 2;

/// Four 3×3 convolutions with `CHANNELS` channels, max-pooling after the
/// second and fourth, then dense layers of `HIDDEN` and `CLASSES` units.
/// The input image is standardized per image before the first convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalModel {
    sensor_n: usize,
    params: Vec<Tensor>,
}

pub const PARAM_NAMES: [&str; 12] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "conv3.weight",
    "conv3.bias",
    "conv4.weight",
    "conv4.bias",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
];

fn param_shapes(sensor_n: usize) -> [Vec<usize>; 12] {
    let flat = CHANNELS * (sensor_n / 4) * (sensor_n / 4);
    [
        vec![CHANNELS, 1, 3, 3],
        vec![CHANNELS],
        vec![CHANNELS, CHANNELS, 3, 3],
        vec![CHANNELS],
        vec![CHANNELS, CHANNELS, 3, 3],
        vec![CHANNELS],
        vec![CHANNELS, CHANNELS, 3, 3],
        vec![CHANNELS],
        vec![HIDDEN, flat],
        vec![HIDDEN],
        vec![CLASSES, HIDDEN],
        vec![CLASSES],
    ]
}

/// Intermediate activations kept for the backward pass.
struct Trace {
    xhat: Vec<f64>,
    sigma: f64,
    a: [Vec<f64>; 4],
    pooled: [Vec<f64>; 2],
    argmax: [Vec<usize>; 2],
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("activation of layer {name}")))
    }
}

impl DigitalModel {
    /// All-zero parameters, with gradient buffers.
    pub fn zeros(sensor_n: usize) -> Result<Self> {
        if sensor_n < 4 || sensor_n % 4 != 0 {
            return Err(Error::Shape(format!("sensor size {sensor_n} must be a positive multiple of 4")));
        }
        let params = param_shapes(sensor_n).into_iter().map(|s| Tensor::zeros(s).with_grad()).collect();
        Ok(Self { sensor_n, params })
    }

    /// He-uniform weights, `U(-√(6/fan_in), √(6/fan_in))`; zero biases.
    pub fn init(sensor_n: usize, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(sensor_n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in model.params.iter_mut().step_by(2) {
            let fan_in: usize = t.shape()[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in t.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(model)
    }

    /// Rebuilds a model from named tensors in [`PARAM_NAMES`] order.
    pub fn from_tensors(sensor_n: usize, tensors: Vec<Tensor>) -> Result<Self> {
        let shapes = param_shapes(sensor_n);
        if tensors.len() != shapes.len() {
            return Err(Error::Shape(format!("expected {} tensors, got {}", shapes.len(), tensors.len())));
        }
        let mut params = Vec::with_capacity(shapes.len());
        for ((t, s), name) in tensors.into_iter().zip(&shapes).zip(PARAM_NAMES) {
            if t.shape() != s.as_slice() {
                return Err(Error::Shape(format!("{name}: shape {:?}, expected {s:?}", t.shape())));
            }
            params.push(Tensor::new(s.clone(), t.data().to_vec())?.with_grad());
        }
        Ok(Self { sensor_n, params })
    }

    pub fn sensor_n(&self) -> usize {
        self.sensor_n
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        PARAM_NAMES.iter().position(|&n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        PARAM_NAMES.iter().position(|&n| n == name).map(move |i| &mut self.params[i])
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn scale_grads(&mut self, s: f64) {
        for t in &mut self.params {
            if let Some(g) = t.grad_mut() {
                g.iter_mut().for_each(|v| *v *= s);
            }
        }
    }

    /// Squared L2 norm of all gradient buffers.
    pub fn grad_norm_sq(&self) -> f64 {
        self.params.iter().filter_map(|t| t.grad()).flat_map(|g| g.iter()).map(|v| v * v).sum()
    }

    fn check_input(&self, image: &RealGrid) -> Result<()> {
        if image.n() != self.sensor_n {
            return Err(Error::Shape(format!("image {}x{0} but model expects {}x{1}", image.n(), self.sensor_n)));
        }
        Ok(())
    }

    fn run(&self, image: &RealGrid) -> Result<Trace> {
        self.check_input(image)?;
        let p = &self.params;
        let mut s = self.sensor_n;
        let (xhat, sigma) = standardize(image.data());
        check_finite("input", &xhat)?;
        let conv = |x: &[f64], c_in: usize, s: usize, k: usize, name: &str| -> Result<Vec<f64>> {
            let mut out = vec![0.0; CHANNELS * s * s];
            conv3x3_forward(x, c_in, s, s, p[2 * k].data(), p[2 * k + 1].data(), CHANNELS, &mut out);
            relu_in_place(&mut out);
            check_finite(name, &out)?;
            Ok(out)
        };
        let pool = |x: &[f64], s: usize| {
            let mut out = vec![0.0; CHANNELS * (s / 2) * (s / 2)];
            let mut idx = vec![0; out.len()];
            maxpool2_forward(x, CHANNELS, s, s, &mut out, &mut idx);
            (out, idx)
        };
        let a1 = conv(&xhat, 1, s, 0, "conv1")?;
        let a2 = conv(&a1, CHANNELS, s, 1, "conv2")?;
        let (p1, i1) = pool(&a2, s);
        s /= 2;
        let a3 = conv(&p1, CHANNELS, s, 2, "conv3")?;
        let a4 = conv(&a3, CHANNELS, s, 3, "conv4")?;
        let (p2, i2) = pool(&a4, s);
        let mut hidden = vec![0.0; HIDDEN];
        dense_forward(&p2, p[8].data(), p[9].data(), &mut hidden);
        relu_in_place(&mut hidden);
        check_finite("fc1", &hidden)?;
        let mut logits = vec![0.0; CLASSES];
        dense_forward(&hidden, p[10].data(), p[11].data(), &mut logits);
        check_finite("fc2", &logits)?;
        Ok(Trace { xhat, sigma, a: [a1, a2, a3, a4], pooled: [p1, p2], argmax: [i1, i2], hidden, logits })
    }

    /// Raw pre-softmax scores.
    pub fn logits(&self, image: &RealGrid) -> Result<Vec<f64>> {
        Ok(self.run(image)?.logits)
    }

    /// Class probabilities.
    pub fn forward(&self, image: &RealGrid) -> Result<[f64; CLASSES]> {
        let p = softmax(&self.run(image)?.logits);
        Ok([p[0], p[1]])
    }

    /// Cross-entropy loss for `label`, accumulating parameter gradients.
    /// Returns the loss and `∂loss/∂image`.
    pub fn backward(&mut self, image: &RealGrid, label: usize) -> Result<(f64, RealGrid)> {
        let (loss, g) = self.backward_with(image, label, true)?;
        Ok((loss, g.expect("input gradient requested")))
    }

    /// As [`backward`](Self::backward), skipping the input gradient when it is
    /// not needed.
    pub fn backward_with(
        &mut self,
        image: &RealGrid,
        label: usize,
        want_input: bool,
    ) -> Result<(f64, Option<RealGrid>)> {
        if label >= CLASSES {
            return Err(Error::Validation(format!("label {label} out of range")));
        }
        let t = self.run(image)?;
        let (loss, dlogits) = cross_entropy(&t.logits, label);
        let full = self.sensor_n;
        let half = full / 2;
        let p = &mut self.params;

        let mut dhidden = vec![0.0; HIDDEN];
        {
            let (w, rest) = p[10..].split_at_mut(1);
            let (wd, wg) = w[0].data_and_grad();
            dense_backward(
                &t.hidden,
                wd,
                &dlogits,
                wg.expect("gradient buffer"),
                rest[0].grad_mut().expect("gradient buffer"),
                Some(&mut dhidden),
            );
        }
        relu_backward_in_place(&t.hidden, &mut dhidden);
        let mut dp2 = vec![0.0; t.pooled[1].len()];
        {
            let (w, rest) = p[8..].split_at_mut(1);
            let (wd, wg) = w[0].data_and_grad();
            dense_backward(
                &t.pooled[1],
                wd,
                &dhidden,
                wg.expect("gradient buffer"),
                rest[0].grad_mut().expect("gradient buffer"),
                Some(&mut dp2),
            );
        }
        let mut da4 = vec![0.0; t.a[3].len()];
        maxpool2_backward(&dp2, &t.argmax[1], &mut da4);
        relu_backward_in_place(&t.a[3], &mut da4);

        let conv_back =
            |p: &mut [Tensor], k: usize, x: &[f64], c_in: usize, s: usize, dout: &[f64], dx: Option<&mut [f64]>| {
                let (w, rest) = p[2 * k..].split_at_mut(1);
                let (wd, wg) = w[0].data_and_grad();
                conv3x3_backward(
                    x,
                    c_in,
                    s,
                    s,
                    wd,
                    CHANNELS,
                    dout,
                    wg.expect("gradient buffer"),
                    rest[0].grad_mut().expect("gradient buffer"),
                    dx,
                );
            };
        let mut da3 = vec![0.0; t.a[2].len()];
        conv_back(p, 3, &t.a[2], CHANNELS, half, &da4, Some(&mut da3));
        relu_backward_in_place(&t.a[2], &mut da3);
        let mut dp1 = vec![0.0; t.pooled[0].len()];
        conv_back(p, 2, &t.pooled[0], CHANNELS, half, &da3, Some(&mut dp1));
        let mut da2 = vec![0.0; t.a[1].len()];
        maxpool2_backward(&dp1, &t.argmax[0], &mut da2);
        relu_backward_in_place(&t.a[1], &mut da2);
        let mut da1 = vec![0.0; t.a[0].len()];
        conv_back(p, 1, &t.a[0], CHANNELS, full, &da2, Some(&mut da1));
        relu_backward_in_place(&t.a[0], &mut da1);
        if !want_input {
            conv_back(p, 0, &t.xhat, 1, full, &da1, None);
            return Ok((loss, None));
        }
        let mut dxhat = vec![0.0; full * full];
        conv_back(p, 0, &t.xhat, 1, full, &da1, Some(&mut dxhat));
        let dx = standardize_backward(&t.xhat, t.sigma, &dxhat);
        check_finite("input gradient", &dx)?;
        Ok((loss, Some(RealGrid::new(full, dx)?)))
    }

    /// Index of the most probable class; ties go to class 0.
    pub fn predict(&self, image: &RealGrid) -> Result<usize> {
        let z = self.logits(image)?;
        Ok(if z[1] > z[0] { 1 } else { 0 })
    }
}
