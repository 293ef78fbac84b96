use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::shapes::{generate_shape, place_amplitude, ShapeKind};
use crate::error::{Error, Result};
use crate::optics::{ComplexField, RealGrid};

/// Bumped whenever generation output changes for the same parameters.
pub const GENERATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Anything that can hand out labeled complex objects by index.
pub trait ObjectSource: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn grid_n(&self) -> usize;
    fn label(&self, i: usize) -> usize;
    fn sample_id(&self, i: usize) -> &str;
    /// Samples with equal group ids are copies of one original and must share
    /// a split.
    fn group(&self, i: usize) -> usize;
    fn object(&self, i: usize) -> Result<ComplexField>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticParams {
    pub n_per_class: usize,
    pub augment_translations: usize,
    pub grid_n: usize,
    /// Side of the square canvas each shape is drawn on before padding.
    pub canvas_n: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self::desk_scale(0)
    }
}

impl SyntheticParams {
    pub fn desk_scale(seed: u64) -> Self {
        Self { n_per_class: 300, augment_translations: 8, grid_n: 256, canvas_n: 128, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_class < 10 {
            return Err(Error::Validation(format!("need at least 10 shapes per class, got {}", self.n_per_class)));
        }
        if self.augment_translations < 1 {
            return Err(Error::Validation("augment_translations must be >= 1".into()));
        }
        if self.canvas_n > self.grid_n {
            return Err(Error::Validation(format!("canvas {} larger than grid {}", self.canvas_n, self.grid_n)));
        }
        crate::optics::ComplexField::zeros(self.grid_n, crate::optics::Plane::Object).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub id: String,
    pub label: usize,
    pub group: usize,
    /// Top-left placement of the canvas in the object grid (row, col).
    pub origin: [usize; 2],
}

/// Procedural triangle/rectangle set. Shapes are generated once per base;
/// translated objects are built on request.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    params: SyntheticParams,
    bases: Vec<(ShapeKind, RealGrid)>,
    samples: Vec<SampleMeta>,
}

/// Independent generator for `(seed, stream)`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Foreground bounding box `(row0, row1, col0, col1)`, inclusive, or `None`
/// for an empty canvas.
fn support_box(g: &RealGrid) -> Option<(usize, usize, usize, usize)> {
    let n = g.n();
    let mut b: Option<(usize, usize, usize, usize)> = None;
    for r in 0..n {
        for c in 0..n {
            if g.get(r, c) > 0.0 {
                b = Some(match b {
                    None => (r, r, c, c),
                    Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
                });
            }
        }
    }
    b
}

impl SyntheticDataset {
    pub fn generate(params: SyntheticParams) -> Result<Self> {
        params.validate()?;
        let (n, a) = (params.grid_n as i64, params.canvas_n as i64);
        let center = (n - a) / 2;
        let max_shift = n / 8;
        let mut bases = Vec::new();
        let mut samples = Vec::new();
        for kind in ShapeKind::ALL {
            for b in 0..params.n_per_class {
                let group = bases.len();
                let stream = (kind.label() as u64) << 32 | b as u64;
                let mut rng = stream_rng(params.seed, stream);
                let amp = generate_shape(kind, params.canvas_n, &mut rng)?;
                let (r0, r1, c0, c1) = support_box(&amp).unwrap_or((0, 0, 0, 0));
                // shifts that keep the support inside the grid
                let range = |lo: usize, hi: usize| {
                    let min = (-(center + lo as i64)).max(-max_shift);
                    let max = (n - 1 - center - hi as i64).min(max_shift);
                    (min, max)
                };
                let (ry, rx) = (range(r0, r1), range(c0, c1));
                for t in 0..params.augment_translations {
                    let dy = rng.random_range(ry.0..=ry.1);
                    let dx = rng.random_range(rx.0..=rx.1);
                    samples.push(SampleMeta {
                        id: format!("{}-{b:04}-t{t}", kind.name()),
                        label: kind.label(),
                        group,
                        origin: [(center + dy) as usize, (center + dx) as usize],
                    });
                }
                bases.push((kind, amp));
            }
        }
        Ok(Self { params, bases, samples })
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    pub fn samples(&self) -> &[SampleMeta] {
        &self.samples
    }

    /// Canvas-sized amplitude of a sample and its placement.
    pub fn amplitude(&self, i: usize) -> (&RealGrid, [usize; 2]) {
        let s = &self.samples[i];
        (&self.bases[s.group].1, s.origin)
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for s in &self.samples {
            c[s.label] += 1;
        }
        c
    }
}

impl ObjectSource for SyntheticDataset {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn grid_n(&self) -> usize {
        self.params.grid_n
    }

    fn label(&self, i: usize) -> usize {
        self.samples[i].label
    }

    fn sample_id(&self, i: usize) -> &str {
        &self.samples[i].id
    }

    fn group(&self, i: usize) -> usize {
        self.samples[i].group
    }

    fn object(&self, i: usize) -> Result<ComplexField> {
        let (amp, origin) = self.amplitude(i);
        place_amplitude(amp, self.params.grid_n, origin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticParams {
        SyntheticParams { n_per_class: 10, augment_translations: 8, grid_n: 128, canvas_n: 32, seed }
    }

    #[test]
    fn counts_and_balance() {
        let d = SyntheticDataset::generate(small(1)).unwrap();
        assert_eq!(d.len(), 160);
        assert_eq!(d.class_counts(), [80, 80]);
        let mut ids: Vec<&str> = (0..d.len()).map(|i| d.sample_id(i)).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 160);
    }

    #[test]
    fn translations_stay_in_bounds_and_within_an_eighth() {
        let d = SyntheticDataset::generate(small(2)).unwrap();
        let center = (128 - 32) / 2;
        for (i, s) in d.samples().iter().enumerate() {
            assert!(s.origin[0].abs_diff(center) <= 16 && s.origin[1].abs_diff(center) <= 16);
            let o = d.object(i).unwrap();
            let (amp, _) = d.amplitude(i);
            let inside: f64 = o.data().iter().map(|z| z.norm()).sum();
            assert!((inside - amp.sum()).abs() < 1e-9);
        }
    }

    #[test]
    fn phase_is_twice_amplitude() {
        let d = SyntheticDataset::generate(small(3)).unwrap();
        for i in [0, 57, 130] {
            for z in d.object(i).unwrap().data() {
                if z.norm() > 0.0 {
                    let want = wrap(2.0 * z.norm());
                    assert!((z.arg() - want).abs() < 1e-9);
                }
            }
        }
    }

    fn wrap(phase: f64) -> f64 {
        use std::f64::consts::PI;
        (phase + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = SyntheticDataset::generate(small(4)).unwrap();
        let b = SyntheticDataset::generate(small(4)).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_eq!(a.object(33).unwrap(), b.object(33).unwrap());
        let c = SyntheticDataset::generate(small(5)).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn too_few_shapes_rejected() {
        let mut p = small(1);
        p.n_per_class = 9;
        assert!(SyntheticDataset::generate(p).is_err());
    }
}
