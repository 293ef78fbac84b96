//! Centered, unitary 2D FFTs on square power-of-two grids.
//!
//! `fft2` maps `f[y]` to `F[k] = (1/n) Σ_y f[y] e^{-2πi k·y/n}` where both `y`
//! and `k` are measured from the grid center `(n/2, n/2)`. `ifft2` is its
//! inverse and adjoint, so energy is preserved in both directions.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{check_pow2, ComplexField, Plane};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

struct Plans {
    planner: FftPlanner<f64>,
    cache: HashMap<(usize, Direction), Arc<dyn Fft<f64>>>,
    scratch: Vec<Complex64>,
}

thread_local! {
    static PLANS: RefCell<Plans> = RefCell::new(Plans {
        planner: FftPlanner::new(),
        cache: HashMap::new(),
        scratch: Vec::new(),
    });
}

fn with_plan<R>(n: usize, dir: Direction, f: impl FnOnce(&dyn Fft<f64>, &mut Vec<Complex64>) -> R) -> R {
    PLANS.with(|cell| {
        let mut plans = cell.borrow_mut();
        let Plans { planner, cache, scratch } = &mut *plans;
        let fft = cache
            .entry((n, dir))
            .or_insert_with(|| match dir {
                Direction::Forward => planner.plan_fft_forward(n),
                Direction::Inverse => planner.plan_fft_inverse(n),
            })
            .clone();
        let need = fft.get_inplace_scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        f(fft.as_ref(), scratch)
    })
}

fn transpose_square(n: usize, data: &mut [Complex64]) {
    for r in 0..n {
        for c in (r + 1)..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

/// Multiplies by `(-1)^(row+col)`, which moves the origin to the grid center
/// for even `n`.
fn checkerboard(n: usize, data: &mut [Complex64]) {
    if n % 2 != 0 {
        return;
    }
    for r in 0..n {
        let row = &mut data[r * n..(r + 1) * n];
        for z in row.iter_mut().skip(1 - r % 2).step_by(2) {
            *z = -*z;
        }
    }
}

/// Row band hint for [`fft2c_in_place`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Band {
    Full,
    /// Only these input rows are non-zero.
    Input(std::ops::Range<usize>),
    /// Only these output rows are needed; the others are left unspecified.
    Output(std::ops::Range<usize>),
}

/// In-place centered unitary 2D transform of an `n × n` buffer.
pub(crate) fn fft2c_in_place(n: usize, data: &mut [Complex64], dir: Direction, band: Band) {
    debug_assert_eq!(data.len(), n * n);
    if n == 1 {
        return;
    }
    checkerboard(n, data);
    with_plan(n, dir, |fft, scratch| {
        let mut rows = |data: &mut [Complex64], r: std::ops::Range<usize>| {
            let slice = &mut data[r.start * n..r.end * n];
            if !slice.is_empty() {
                fft.process_with_scratch(slice, scratch);
            }
        };
        match band {
            Band::Full => {
                rows(data, 0..n);
                transpose_square(n, data);
                rows(data, 0..n);
                transpose_square(n, data);
            }
            Band::Input(r) => {
                rows(data, r);
                transpose_square(n, data);
                rows(data, 0..n);
                transpose_square(n, data);
            }
            Band::Output(r) => {
                transpose_square(n, data);
                rows(data, 0..n);
                transpose_square(n, data);
                rows(data, r);
            }
        }
    });
    let scale = 1.0 / n as f64;
    for r in 0..n {
        let sign = if r % 2 == 0 { scale } else { -scale };
        let row = &mut data[r * n..(r + 1) * n];
        for (c, z) in row.iter_mut().enumerate() {
            *z *= if c % 2 == 0 { sign } else { -sign };
        }
    }
}

/// Object plane to Fourier plane.
pub fn fft2(field: &ComplexField) -> Result<ComplexField> {
    transform(field, Direction::Forward, Plane::Fourier)
}

/// Fourier plane to object plane.
pub fn ifft2(field: &ComplexField) -> Result<ComplexField> {
    transform(field, Direction::Inverse, Plane::Object)
}

fn transform(field: &ComplexField, dir: Direction, out_plane: Plane) -> Result<ComplexField> {
    let n = field.n();
    check_pow2(n)?;
    let mut data = field.data().to_vec();
    fft2c_in_place(n, &mut data, dir, Band::Full);
    if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("fft2 output".into()));
    }
    Ok(ComplexField::from_parts_unchecked(n, data, out_plane))
}
