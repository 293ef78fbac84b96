//! Slice-level kernels for the digital layers. Activations are laid out as
//! `[channel][row][col]`; conv weights as `[out][in][3][3]`; dense weights as
//! `[out][in]`.

/// Row span `[lo, hi)` of outputs that read an in-bounds input at offset `d`.
#[inline]
/// `dst[x] += k0·src[x−1] + k1·src[x] + k2·src[x+1]`, zero outside the row.
fn row_taps(dst: &mut [f64], src: &[f64], k0: f64, k1: f64, k2: f64) {
    let w = dst.len();
    if w == 1 {
        dst[0] += k1 * src[0];
        return;
    }
    dst[0] += k1 * src[0] + k2 * src[1];
    dst[w - 1] += k0 * src[w - 2] + k1 * src[w - 1];
    let inner = dst[1..w - 1].iter_mut().zip(&src[..w - 2]).zip(&src[1..w - 1]).zip(&src[2..]);
    for (((d, a), b), c) in inner {
        *d += k0 * a + k1 * b + k2 * c;
    }
}

/// Elementwise accumulation of `g[x]·src[x−1]`, `g[x]·src[x]` and
/// `g[x]·src[x+1]` into three rows of `acc`.
fn row_products(acc: &mut [f64], g: &[f64], src: &[f64]) {
    let w = g.len();
    let (a0, rest) = acc.split_at_mut(w);
    let (a1, a2) = rest.split_at_mut(w);
    for ((a, x), y) in a0[1..].iter_mut().zip(&g[1..]).zip(&src[..w - 1]) {
        *a += x * y;
    }
    for ((a, x), y) in a1.iter_mut().zip(g).zip(src) {
        *a += x * y;
    }
    for ((a, x), y) in a2[..w - 1].iter_mut().zip(&g[..w - 1]).zip(&src[1..]) {
        *a += x * y;
    }
}

/// 3×3 convolution, stride 1, zero padding so the output keeps `h × w`.
#[allow(clippy::too_many_arguments)]
pub fn conv3x3_forward(
    x: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    bias: &[f64],
    c_out: usize,
    out: &mut [f64],
) {
    let plane = h * w;
    debug_assert_eq!(x.len(), c_in * plane);
    debug_assert_eq!(out.len(), c_out * plane);
    for o in 0..c_out {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.fill(bias[o]);
        for i in 0..c_in {
            let src = &x[i * plane..(i + 1) * plane];
            let k = &weight[(o * c_in + i) * 9..(o * c_in + i + 1) * 9];
            for y in 0..h {
                let drow = &mut dst[y * w..(y + 1) * w];
                for ky in 0..3 {
                    let Some(sy) = (y + ky).checked_sub(1).filter(|&sy| sy < h) else {
                        continue;
                    };
                    row_taps(drow, &src[sy * w..(sy + 1) * w], k[ky * 3], k[ky * 3 + 1], k[ky * 3 + 2]);
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients and, if requested, writes the input
/// gradient into `dx`.
#[allow(clippy::too_many_arguments)]
pub fn conv3x3_backward(
    x: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    c_out: usize,
    dout: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let plane = h * w;
    if let Some(d) = dx.as_deref_mut() {
        d.fill(0.0);
    }
    let mut acc = vec![0.0; 9 * w];
    for o in 0..c_out {
        let g = &dout[o * plane..(o + 1) * plane];
        dbias[o] += g.iter().sum::<f64>();
        for i in 0..c_in {
            let src = &x[i * plane..(i + 1) * plane];
            let base = (o * c_in + i) * 9;
            let k = &weight[base..base + 9];
            acc.fill(0.0);
            for y in 0..h {
                let grow = &g[y * w..(y + 1) * w];
                for ky in 0..3 {
                    let Some(sy) = (y + ky).checked_sub(1).filter(|&sy| sy < h) else {
                        continue;
                    };
                    row_products(&mut acc[ky * 3 * w..(ky + 1) * 3 * w], grow, &src[sy * w..(sy + 1) * w]);
                    if let Some(d) = dx.as_deref_mut() {
                        let drow = &mut d[i * plane + sy * w..i * plane + (sy + 1) * w];
                        row_taps(drow, grow, k[ky * 3 + 2], k[ky * 3 + 1], k[ky * 3]);
                    }
                }
            }
            for (t, a) in acc.chunks_exact(w).enumerate() {
                dweight[base + t] += a.iter().sum::<f64>();
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// 2×2 max pool, stride 2. `argmax` receives the flat input index of each
/// winner; ties go to the first position in row-major window order.
pub fn maxpool2_forward(x: &[f64], c: usize, h: usize, w: usize, out: &mut [f64], argmax: &mut [usize]) {
    let (ho, wo) = (h / 2, w / 2);
    for ch in 0..c {
        for y in 0..ho {
            for xo in 0..wo {
                let mut best = ch * h * w + 2 * y * w + 2 * xo;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ch * h * w + (2 * y + dy) * w + 2 * xo + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                let o = ch * ho * wo + y * wo + xo;
                out[o] = x[best];
                argmax[o] = best;
            }
        }
    }
}

/// Routes each output gradient to its recorded argmax; `dx` is overwritten.
pub fn maxpool2_backward(dout: &[f64], argmax: &[usize], dx: &mut [f64]) {
    dx.fill(0.0);
    for (g, &i) in dout.iter().zip(argmax) {
        dx[i] += g;
    }
}

pub fn dense_forward(x: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, y) in out.iter_mut().enumerate() {
        let row = &weight[o * n_in..(o + 1) * n_in];
        *y = bias[o] + dot(row, x);
    }
}

/// Accumulates parameter gradients; writes `dx` if given.
pub fn dense_backward(
    x: &[f64],
    weight: &[f64],
    dout: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n_in = x.len();
    for (o, &g) in dout.iter().enumerate() {
        dbias[o] += g;
        for (a, b) in dweight[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
            *a += g * b;
        }
    }
    if let Some(dx) = dx {
        dx.fill(0.0);
        for (o, &g) in dout.iter().enumerate() {
            for (a, b) in dx.iter_mut().zip(&weight[o * n_in..(o + 1) * n_in]) {
                *a += g * b;
            }
        }
    }
}

pub fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes `grad` where the ReLU output was not positive.
pub fn relu_backward_in_place(output: &[f64], grad: &mut [f64]) {
    for (g, &y) in grad.iter_mut().zip(output) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-log softmax(logits)[label]` and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    (lse - logits[label], grad)
}

/// Per-image standardization `(x - mean) / sqrt(var + 1e-12)`.
/// Returns the standardized values and the divisor.
pub fn standardize(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma = (var + 1e-12).sqrt();
    (x.iter().map(|v| (v - mean) / sigma).collect(), sigma)
}

/// Adjoint of [`standardize`] given its output `xhat` and divisor.
pub fn standardize_backward(xhat: &[f64], sigma: f64, dxhat: &[f64]) -> Vec<f64> {
    let n = xhat.len() as f64;
    let mean_g = dxhat.iter().sum::<f64>() / n;
    let mean_gx = dxhat.iter().zip(xhat).map(|(g, y)| g * y).sum::<f64>() / n;
    dxhat.iter().zip(xhat).map(|(g, y)| (g - mean_g - y * mean_gx) / sigma).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn conv_matches_direct_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (ci, co, h, w) = (2, 3, 5, 4);
        let x = rand_vec(ci * h * w, &mut rng);
        let k = rand_vec(co * ci * 9, &mut rng);
        let b = rand_vec(co, &mut rng);
        let mut out = vec![0.0; co * h * w];
        conv3x3_forward(&x, ci, h, w, &k, &b, co, &mut out);
        for o in 0..co {
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let mut acc = b[o];
                    for i in 0..ci {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let (sy, sx) = (y + ky - 1, xx + kx - 1);
                                if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                                    acc += k[((o * ci + i) * 9) + (ky * 3 + kx) as usize]
                                        * x[i * h * w + sy as usize * w + sx as usize];
                                }
                            }
                        }
                    }
                    let got = out[o * h * w + y as usize * w + xx as usize];
                    assert!((got - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (ci, co, h, w) = (2, 2, 4, 6);
        let x = rand_vec(ci * h * w, &mut rng);
        let k = rand_vec(co * ci * 9, &mut rng);
        let b = rand_vec(co, &mut rng);
        let up = rand_vec(co * h * w, &mut rng);
        let loss = |x: &[f64], k: &[f64], b: &[f64]| {
            let mut out = vec![0.0; co * h * w];
            conv3x3_forward(x, ci, h, w, k, b, co, &mut out);
            out.iter().zip(&up).map(|(a, u)| a * u).sum::<f64>()
        };
        let mut dk = vec![0.0; k.len()];
        let mut db = vec![0.0; co];
        let mut dx = vec![0.0; x.len()];
        conv3x3_backward(&x, ci, h, w, &k, co, &up, &mut dk, &mut db, Some(&mut dx));
        let eps = 1e-5;
        for j in 0..x.len() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p[j] += eps;
            m[j] -= eps;
            assert!(rel((loss(&p, &k, &b) - loss(&m, &k, &b)) / (2.0 * eps), dx[j]) < 1e-6);
        }
        for j in 0..k.len() {
            let (mut p, mut m) = (k.clone(), k.clone());
            p[j] += eps;
            m[j] -= eps;
            assert!(rel((loss(&x, &p, &b) - loss(&x, &m, &b)) / (2.0 * eps), dk[j]) < 1e-6);
        }
        for j in 0..co {
            let (mut p, mut m) = (b.clone(), b.clone());
            p[j] += eps;
            m[j] -= eps;
            assert!(rel((loss(&x, &k, &p) - loss(&x, &k, &m)) / (2.0 * eps), db[j]) < 1e-6);
        }
    }

    #[test]
    fn maxpool_ties_go_to_first_index() {
        let x = vec![
            1.0, 1.0, 0.0, 2.0, //
            1.0, 1.0, 2.0, 0.0, //
            -1.0, -3.0, 5.0, 5.0, //
            -1.0, -2.0, 5.0, 5.0,
        ];
        let mut out = vec![0.0; 4];
        let mut idx = vec![0; 4];
        maxpool2_forward(&x, 1, 4, 4, &mut out, &mut idx);
        assert_eq!(out, vec![1.0, 2.0, -1.0, 5.0]);
        assert_eq!(idx, vec![0, 3, 8, 10]);
        let mut dx = vec![9.0; 16];
        maxpool2_backward(&[1.0, 2.0, 3.0, 4.0], &idx, &mut dx);
        let nonzero: Vec<usize> = (0..16).filter(|&i| dx[i] != 0.0).collect();
        assert_eq!(nonzero, vec![0, 3, 8, 10]);
        assert_eq!(dx[10], 4.0);
    }

    #[test]
    fn dense_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_vec(7, &mut rng);
        let wgt = rand_vec(21, &mut rng);
        let b = rand_vec(3, &mut rng);
        let up = rand_vec(3, &mut rng);
        let loss = |x: &[f64], w: &[f64]| {
            let mut o = vec![0.0; 3];
            dense_forward(x, w, &b, &mut o);
            o.iter().zip(&up).map(|(a, u)| a * u).sum::<f64>()
        };
        let mut dw = vec![0.0; 21];
        let mut db = vec![0.0; 3];
        let mut dx = vec![0.0; 7];
        dense_backward(&x, &wgt, &up, &mut dw, &mut db, Some(&mut dx));
        assert_eq!(db, up);
        let eps = 1e-6;
        for j in 0..7 {
            let (mut p, mut m) = (x.clone(), x.clone());
            p[j] += eps;
            m[j] -= eps;
            assert!(rel((loss(&p, &wgt) - loss(&m, &wgt)) / (2.0 * eps), dx[j]) < 1e-6);
        }
        for j in 0..21 {
            let (mut p, mut m) = (wgt.clone(), wgt.clone());
            p[j] += eps;
            m[j] -= eps;
            assert!(rel((loss(&x, &p) - loss(&x, &m)) / (2.0 * eps), dw[j]) < 1e-6);
        }
    }

    #[test]
    fn softmax_of_ten_and_minus_ten() {
        let p = softmax(&[10.0, -10.0]);
        let tail = 1.0 / (1.0 + 20.0_f64.exp());
        assert!((p[1] - tail).abs() < 1e-20);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
        let (loss, _) = cross_entropy(&[0.0, 0.0], 0);
        assert!((loss - 2.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_gradient() {
        let z = [0.3, -1.2];
        let (_, g) = cross_entropy(&z, 1);
        let eps = 1e-6;
        for j in 0..2 {
            let mut p = z;
            let mut m = z;
            p[j] += eps;
            m[j] -= eps;
            let fd = (cross_entropy(&p, 1).0 - cross_entropy(&m, 1).0) / (2.0 * eps);
            assert!(rel(fd, g[j]) < 1e-7);
        }
    }

    #[test]
    fn standardize_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_vec(16, &mut rng);
        let up = rand_vec(16, &mut rng);
        let f = |x: &[f64]| standardize(x).0.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
        let (xhat, sigma) = standardize(&x);
        let g = standardize_backward(&xhat, sigma, &up);
        let eps = 1e-6;
        for j in 0..16 {
            let (mut p, mut m) = (x.clone(), x.clone());
            p[j] += eps;
            m[j] -= eps;
            assert!(rel((f(&p) - f(&m)) / (2.0 * eps), g[j]) < 1e-6);
        }
        let mean: f64 = xhat.iter().sum::<f64>() / 16.0;
        let var: f64 = xhat.iter().map(|v| v * v).sum::<f64>() / 16.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
    }
}
