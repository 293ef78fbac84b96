use num_complex::Complex64;

use crate::error::{Error, Result};

/// Which domain a [`ComplexField`] lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Plane {
    Object,
    Fourier,
}

/// Square grid of complex samples, row-major.
///
/// Fourier-plane fields use the centered convention: DC sits at `(n/2, n/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    n: usize,
    data: Vec<Complex64>,
    plane: Plane,
}

impl ComplexField {
    pub fn new(n: usize, data: Vec<Complex64>, plane: Plane) -> Result<Self> {
        check_pow2(n)?;
        if data.len() != n * n {
            return Err(Error::Shape(format!("expected {} samples for a {n}x{n} field, got {}", n * n, data.len())));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at ({}, {})", pos / n, pos % n)));
        }
        Ok(Self { n, data, plane })
    }

    pub fn zeros(n: usize, plane: Plane) -> Result<Self> {
        Self::new(n, vec![Complex64::new(0.0, 0.0); n * n], plane)
    }

    pub(crate) fn from_parts_unchecked(n: usize, data: Vec<Complex64>, plane: Plane) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data, plane }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn height(&self) -> usize {
        self.n
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_modulus(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Square grid of real samples, row-major. Used for pupils, intensities and
/// sensor images.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    n: usize,
    data: Vec<f64>,
}

impl RealGrid {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!("expected {} samples for a {n}x{n} grid, got {}", n * n, data.len())));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self { n, data: vec![value; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.n + col] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn dot(&self, other: &RealGrid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

pub(crate) fn check_pow2(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::UnsupportedSize(n));
    }
    Ok(())
}
