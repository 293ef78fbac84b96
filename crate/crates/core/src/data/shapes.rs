use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{ComplexField, Plane, RealGrid};

/// Shape class. The label doubles as the class id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Rectangle,
    Triangle,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 2] = [ShapeKind::Rectangle, ShapeKind::Triangle];

    pub fn label(self) -> usize {
        match self {
            ShapeKind::Rectangle => 0,
            ShapeKind::Triangle => 1,
        }
    }

    pub fn from_label(label: usize) -> Result<Self> {
        match label {
            0 => Ok(ShapeKind::Rectangle),
            1 => Ok(ShapeKind::Triangle),
            _ => Err(Error::Validation(format!("unknown class label {label}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Rectangle => "rectangle",
            ShapeKind::Triangle => "triangle",
        }
    }
}

pub const MIN_CANVAS: usize = 32;
/// Bounding extent of a shape as a fraction of the canvas side.
pub const EXTENT_RANGE: (f64, f64) = (0.2, 0.6);

type Pt = (f64, f64);

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn polygon_area(v: &[Pt]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].0 * v[(i + 1) % n].1 - v[(i + 1) % n].0 * v[i].1).sum::<f64>() / 2.0
}

/// Strictly convex, counter-clockwise, every interior angle within
/// `[min_deg, 180 - min_deg / 2]` and every side at least `min_side`.
fn well_formed(v: &[Pt], min_deg: f64, min_side: f64) -> bool {
    let n = v.len();
    for i in 0..n {
        let (p, q, r) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
        if cross(p, q, r) <= 0.0 {
            return false;
        }
        let a = (p.0 - q.0, p.1 - q.1);
        let b = (r.0 - q.0, r.1 - q.1);
        let la = a.0.hypot(a.1);
        let lb = b.0.hypot(b.1);
        if lb < min_side {
            return false;
        }
        let ang = ((a.0 * b.0 + a.1 * b.1) / (la * lb)).clamp(-1.0, 1.0).acos().to_degrees();
        if ang < min_deg || ang > 180.0 - min_deg / 2.0 {
            return false;
        }
    }
    true
}

fn random_vertices<R: Rng + ?Sized>(kind: ShapeKind, rng: &mut R) -> Vec<Pt> {
    match kind {
        ShapeKind::Rectangle => {
            let aspect = rng.random_range(0.55..1.0);
            let (hw, hh) = (1.0, aspect);
            let mut v = vec![(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)];
            for p in &mut v {
                p.0 += rng.random_range(-0.06..0.06);
                p.1 += rng.random_range(-0.06..0.06);
            }
            v
        }
        ShapeKind::Triangle => {
            let base = rng.random_range(0.0..2.0 * PI);
            (0..3)
                .map(|k| {
                    let a = base + k as f64 * 2.0 * PI / 3.0 + rng.random_range(-0.35..0.35);
                    let r = rng.random_range(0.75..1.0);
                    (r * a.cos(), r * a.sin())
                })
                .collect()
        }
    }
}

fn rotate(v: &mut [Pt], theta: f64) {
    let (s, c) = theta.sin_cos();
    for p in v {
        *p = (c * p.0 - s * p.1, s * p.0 + c * p.1);
    }
}

fn contains(v: &[Pt], p: Pt) -> bool {
    let n = v.len();
    (0..n).all(|i| cross(v[i], v[(i + 1) % n], p) >= 0.0)
}

/// Zero-padded 3×3 mean filter.
fn box_blur(g: &RealGrid) -> RealGrid {
    let n = g.n() as isize;
    RealGrid::from_fn(g.n(), |r, c| {
        let mut acc = 0.0;
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (y, x) = (r as isize + dy, c as isize + dx);
                if y >= 0 && y < n && x >= 0 && x < n {
                    acc += g.get(y as usize, x as usize);
                }
            }
        }
        acc / 9.0
    })
}

/// Random filled convex polygon of `kind`, centered on a `canvas_n` canvas,
/// softened by a 3×3 box blur. Values lie in `[0, 1]`.
pub fn generate_shape<R: Rng + ?Sized>(kind: ShapeKind, canvas_n: usize, rng: &mut R) -> Result<RealGrid> {
    if canvas_n < MIN_CANVAS {
        return Err(Error::Validation(format!("canvas must be at least {MIN_CANVAS} px, got {canvas_n}")));
    }
    let n = canvas_n as f64;
    loop {
        let mut v = random_vertices(kind, rng);
        rotate(&mut v, rng.random_range(0.0..2.0 * PI));
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &v {
            x0 = x0.min(p.0);
            x1 = x1.max(p.0);
            y0 = y0.min(p.1);
            y1 = y1.max(p.1);
        }
        let extent = rng.random_range(EXTENT_RANGE.0..EXTENT_RANGE.1) * n;
        let scale = extent / (x1 - x0).max(y1 - y0);
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        for p in &mut v {
            *p = ((p.0 - cx) * scale + n / 2.0, (p.1 - cy) * scale + n / 2.0);
        }
        if polygon_area(&v) < 0.0 {
            v.reverse();
        }
        let min_deg = if kind == ShapeKind::Triangle { 30.0 } else { 60.0 };
        if !well_formed(&v, min_deg, 0.12 * extent) || polygon_area(&v) < 0.01 * n * n {
            continue;
        }
        let mask =
            RealGrid::from_fn(canvas_n, |r, c| if contains(&v, (c as f64 + 0.5, r as f64 + 0.5)) { 1.0 } else { 0.0 });
        if mask.sum() < 0.01 * n * n {
            continue;
        }
        let mut out = box_blur(&mask);
        out.data_mut().iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
        return Ok(out);
    }
}

/// Complex object `A · e^{2iA}` with `A` placed so its top-left pixel lands
/// at `origin` (row, col) of a `grid_n` field.
pub fn place_amplitude(amplitude: &RealGrid, grid_n: usize, origin: [usize; 2]) -> Result<ComplexField> {
    let a = amplitude.n();
    if origin[0] + a > grid_n || origin[1] + a > grid_n {
        return Err(Error::Shape(format!("{a}x{a} amplitude at {origin:?} exceeds {grid_n}x{grid_n} grid")));
    }
    if amplitude.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Validation("amplitude outside [0, 1]".into()));
    }
    let mut data = vec![Complex64::new(0.0, 0.0); grid_n * grid_n];
    for r in 0..a {
        for c in 0..a {
            let v = amplitude.get(r, c);
            if v > 0.0 {
                data[(origin[0] + r) * grid_n + origin[1] + c] = Complex64::from_polar(v, 2.0 * v);
            }
        }
    }
    ComplexField::new(grid_n, data, Plane::Object)
}

/// Object with modulus `A` and phase `2A`, zero-padded symmetrically to
/// `pad_to`.
pub fn object_from_amplitude(amplitude: &RealGrid, pad_to: usize) -> Result<ComplexField> {
    let a = amplitude.n();
    if pad_to < a {
        return Err(Error::Shape(format!("cannot pad {a} to {pad_to}")));
    }
    let m = (pad_to - a) / 2;
    place_amplitude(amplitude, pad_to, [m, m])
}

#[cfg(test)]
pub(crate) mod hull {
    //! Corner counting on a binarized mask: convex hull of the foreground
    //! pixel corners, simplified with Douglas-Peucker.

    use crate::optics::RealGrid;

    type P = (f64, f64);

    fn cross(o: P, a: P, b: P) -> f64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    }

    pub fn convex_hull(mut pts: Vec<P>) -> Vec<P> {
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        if pts.len() < 3 {
            return pts;
        }
        let mut lower: Vec<P> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<P> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        lower
    }

    fn seg_dist(p: P, a: P, b: P) -> f64 {
        let l = (b.0 - a.0).hypot(b.1 - a.1);
        if l == 0.0 {
            return (p.0 - a.0).hypot(p.1 - a.1);
        }
        cross(a, b, p).abs() / l
    }

    /// Number of corners of the foreground (`> 0.5`). Hull vertices are
    /// dropped greedily while every original hull point stays within
    /// `rel_eps` times the hull diameter (at least 1.5 px) of the outline; corners are then the
    /// edges at least a quarter of the diameter long.
    pub fn corner_count(g: &RealGrid, rel_eps: f64) -> usize {
        let n = g.n();
        let mut pts = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if g.get(r, c) > 0.5 {
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        pts.push(((c + dx) as f64, (r + dy) as f64));
                    }
                }
            }
        }
        let h = convex_hull(pts);
        let m = h.len();
        if m < 4 {
            return m;
        }
        let mut diameter: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                diameter = diameter.max((h[i].0 - h[j].0).hypot(h[i].1 - h[j].1));
            }
        }
        // pixel staircases deviate by up to about one pixel
        let eps = (rel_eps * diameter).max(1.5);
        let mut kept: Vec<usize> = (0..m).collect();
        // worst deviation of the original points covered if kept[k] is removed
        let cost = |kept: &[usize], k: usize| {
            let a = kept[(k + kept.len() - 1) % kept.len()];
            let b = kept[(k + 1) % kept.len()];
            let mut worst: f64 = 0.0;
            let mut i = (a + 1) % m;
            while i != b {
                worst = worst.max(seg_dist(h[i], h[a], h[b]));
                i = (i + 1) % m;
            }
            worst
        };
        while kept.len() > 3 {
            let (k, c) = (0..kept.len()).map(|k| (k, cost(&kept, k))).min_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
            if c > eps {
                break;
            }
            kept.remove(k);
        }
        // Blurring rounds each corner into a few close vertices: group vertices
        // joined by short edges and count groups that turn by at least 30°.
        let pts: Vec<P> = kept.iter().map(|&k| h[k]).collect();
        let q = pts.len();
        let turn = |k: usize| {
            let (a, b, c) = (pts[(k + q - 1) % q], pts[k], pts[(k + 1) % q]);
            let u = (b.0 - a.0, b.1 - a.1);
            let v = (c.0 - b.0, c.1 - b.1);
            (u.0 * v.1 - u.1 * v.0).atan2(u.0 * v.0 + u.1 * v.1).abs().to_degrees()
        };
        let long = |k: usize| {
            let (a, b) = (pts[k], pts[(k + 1) % q]);
            (a.0 - b.0).hypot(a.1 - b.1) >= 0.3 * diameter
        };
        let Some(start) = (0..q).find(|&k| long(k)) else {
            return 1;
        };
        let mut corners = 0;
        let mut acc = 0.0;
        for step in 1..=q {
            let k = (start + step) % q;
            acc += turn(k);
            if long(k) {
                if acc >= 30.0 {
                    corners += 1;
                }
                acc = 0.0;
            }
        }
        corners
    }
}
