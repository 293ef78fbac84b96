//! On-disk datasets: `manifest.json`, `objects.f32` and `labels.csv`.
//!
//! Each entry stores the smallest square block holding the object's nonzero
//! support, as interleaved re/im float32 little-endian values, together with
//! the block's placement in the full grid.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{ObjectSource, Split, SyntheticParams, GENERATOR_VERSION};
use crate::error::{Error, Result};
use crate::optics::{ComplexField, Plane};

pub const DATASET_VERSION: u32 = 1;
pub const LABELS_HEADER: &str = "sample_id,label,group";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub id: String,
    pub label: usize,
    pub group: usize,
    /// Side of the stored square block.
    pub side: usize,
    /// Block placement in the grid (row, col).
    pub origin: [usize; 2],
    /// Byte offset of the block in `objects.f32`.
    pub offset: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub grid_n: usize,
    pub class_counts: Vec<usize>,
    /// Values in `objects.f32` times this factor give the original objects.
    #[serde(default = "one")]
    pub amplitude_scale: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub generator_version: Option<u32>,
    #[serde(default)]
    pub synthetic: Option<SyntheticParams>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub entries: Vec<DatasetEntry>,
}

fn one() -> f64 {
    1.0
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Smallest in-grid square `(origin, side)` covering the nonzero pixels.
fn support_square(obj: &ComplexField) -> ([usize; 2], usize) {
    let n = obj.n();
    let (mut r0, mut r1, mut c0, mut c1) = (n, 0, n, 0);
    for r in 0..n {
        for c in 0..n {
            if obj.get(r, c) != Complex64::new(0.0, 0.0) {
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    if r0 > r1 {
        return ([0, 0], 0);
    }
    let side = (r1 - r0 + 1).max(c1 - c0 + 1);
    ([r0.min(n - side), c0.min(n - side)], side)
}

/// Provenance to embed in a saved dataset.
#[derive(Debug, Clone, Default)]
pub struct SaveInfo {
    pub seed: Option<u64>,
    pub synthetic: Option<SyntheticParams>,
    pub meta: BTreeMap<String, String>,
}

/// Writes `source` under `dir` and returns the manifest.
pub fn save_dataset(source: &dyn ObjectSource, dir: &Path, info: &SaveInfo) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut blob = fs::File::create(dir.join("objects.f32")).map(std::io::BufWriter::new)?;
    let mut labels = format!("{LABELS_HEADER}\n");
    let mut entries = Vec::with_capacity(source.len());
    let mut counts = vec![0usize; 2];
    let mut offset = 0u64;
    for i in 0..source.len() {
        let obj = source.object(i)?;
        let (origin, side) = support_square(&obj);
        let mut bytes = Vec::with_capacity(side * side * 8);
        for r in 0..side {
            for c in 0..side {
                let z = obj.get(origin[0] + r, origin[1] + c);
                bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
                bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
        blob.write_all(&bytes)?;
        let label = source.label(i);
        if counts.len() <= label {
            counts.resize(label + 1, 0);
        }
        counts[label] += 1;
        labels.push_str(&format!("{},{label},{}\n", source.sample_id(i), source.group(i)));
        entries.push(DatasetEntry {
            id: source.sample_id(i).to_string(),
            label,
            group: source.group(i),
            side,
            origin,
            offset,
            sha256: sha256_hex(&bytes),
        });
        offset += bytes.len() as u64;
    }
    blob.flush()?;
    fs::write(dir.join("labels.csv"), labels)?;
    let manifest = DatasetManifest {
        version: DATASET_VERSION,
        grid_n: source.grid_n(),
        class_counts: counts,
        amplitude_scale: 1.0,
        seed: info.seed,
        generator_version: info.synthetic.as_ref().map(|_| GENERATOR_VERSION),
        synthetic: info.synthetic.clone(),
        meta: info.meta.clone(),
        entries,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// A dataset read back from disk, with objects kept as compact blocks.
#[derive(Debug, Clone)]
pub struct StoredDataset {
    pub manifest: DatasetManifest,
    /// Divisor applied at load time so every modulus is at most 1.
    pub load_scale: f64,
    root: PathBuf,
    blocks: Vec<Vec<Complex32>>,
}

fn corrupt(entry: &str, reason: impl Into<String>) -> Error {
    Error::CorruptDataset { entry: entry.to_string(), reason: reason.into() }
}

impl StoredDataset {
    /// Opens a dataset from its directory or from its `manifest.json` path.
    pub fn open(path: &Path) -> Result<Self> {
        let manifest_path = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
        if !manifest_path.exists() {
            return Err(Error::NotFound(manifest_path));
        }
        let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        if manifest.version != DATASET_VERSION {
            return Err(Error::Validation(format!("unsupported dataset version {}", manifest.version)));
        }
        ComplexField::zeros(manifest.grid_n, Plane::Object)?;
        let declared: usize = manifest.class_counts.iter().sum();
        if declared != manifest.entries.len() {
            return Err(corrupt(
                "manifest",
                format!("class counts sum to {declared} but {} entries are listed", manifest.entries.len()),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &manifest.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(corrupt(&e.id, "duplicate sample id"));
            }
            if e.label >= manifest.class_counts.len() {
                return Err(corrupt(&e.id, format!("label {} has no class count", e.label)));
            }
        }
        let bytes = if manifest.entries.is_empty() && !root.join("objects.f32").exists() {
            Vec::new()
        } else {
            fs::read(root.join("objects.f32"))?
        };
        let mut blocks = Vec::with_capacity(manifest.entries.len());
        let mut per_class = vec![0usize; manifest.class_counts.len()];
        for e in &manifest.entries {
            if e.origin[0] + e.side > manifest.grid_n || e.origin[1] + e.side > manifest.grid_n {
                return Err(corrupt(&e.id, "block exceeds the grid"));
            }
            let len = (e.side * e.side * 8) as u64;
            let chunk = bytes
                .get(e.offset as usize..(e.offset + len) as usize)
                .ok_or_else(|| corrupt(&e.id, format!("objects.f32 too short for {len} bytes at {}", e.offset)))?;
            if sha256_hex(chunk) != e.sha256 {
                return Err(corrupt(&e.id, "checksum mismatch"));
            }
            let block: Vec<Complex32> = chunk
                .chunks_exact(8)
                .map(|c| {
                    Complex32::new(
                        f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                        f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                    )
                })
                .collect();
            if block.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(corrupt(&e.id, "non-finite value"));
            }
            per_class[e.label] += 1;
            blocks.push(block);
        }
        if per_class != manifest.class_counts {
            return Err(corrupt(
                "manifest",
                format!("class counts {:?} but entries give {per_class:?}", manifest.class_counts),
            ));
        }
        check_labels(&root, &manifest)?;
        let peak = blocks.iter().flatten().map(|z| z.norm() as f64).fold(0.0, f64::max);
        let load_scale = if peak > 1.0 { peak } else { 1.0 };
        Ok(Self { manifest, load_scale, root, blocks })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Overall factor from the loaded objects back to the source values.
    pub fn total_scale(&self) -> f64 {
        self.manifest.amplitude_scale * self.load_scale
    }
}

fn check_labels(root: &Path, manifest: &DatasetManifest) -> Result<()> {
    let path = root.join("labels.csv");
    if !path.exists() {
        return if manifest.entries.is_empty() { Ok(()) } else { Err(Error::NotFound(path)) };
    }
    let text = fs::read_to_string(&path)?;
    let mut lines = text.lines();
    if lines.next() != Some(LABELS_HEADER) {
        return Err(corrupt("labels.csv", "unexpected header"));
    }
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    if rows.len() != manifest.entries.len() {
        return Err(corrupt("labels.csv", format!("{} rows for {} entries", rows.len(), manifest.entries.len())));
    }
    for (row, e) in rows.iter().zip(&manifest.entries) {
        if *row != format!("{},{},{}", e.id, e.label, e.group) {
            return Err(corrupt(&e.id, format!("labels.csv row '{row}' disagrees with manifest")));
        }
    }
    Ok(())
}

impl ObjectSource for StoredDataset {
    fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    fn grid_n(&self) -> usize {
        self.manifest.grid_n
    }

    fn label(&self, i: usize) -> usize {
        self.manifest.entries[i].label
    }

    fn sample_id(&self, i: usize) -> &str {
        &self.manifest.entries[i].id
    }

    fn group(&self, i: usize) -> usize {
        self.manifest.entries[i].group
    }

    fn object(&self, i: usize) -> Result<ComplexField> {
        let e = &self.manifest.entries[i];
        let n = self.manifest.grid_n;
        let inv = 1.0 / self.load_scale;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..e.side {
            for c in 0..e.side {
                let z = self.blocks[i][r * e.side + c];
                data[(e.origin[0] + r) * n + e.origin[1] + c] = Complex64::new(z.re as f64, z.im as f64) * inv;
            }
        }
        ComplexField::new(n, data, Plane::Object)
    }
}

/// One fully materialized sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub object: ComplexField,
    pub label: usize,
    pub sample_id: String,
    pub group: usize,
    pub split: Option<Split>,
}

/// Loads every object of a stored stack into memory. Amplitudes are divided
/// by the stack's peak modulus when it exceeds 1; the divisor is returned.
pub fn load_object_stack(manifest_path: &Path) -> Result<(Vec<SampleRecord>, f64)> {
    let d = StoredDataset::open(manifest_path)?;
    let records = (0..d.len())
        .map(|i| {
            Ok(SampleRecord {
                object: d.object(i)?,
                label: d.label(i),
                sample_id: d.sample_id(i).to_string(),
                group: d.group(i),
                split: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((records, d.load_scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SyntheticDataset, SyntheticParams};

    fn small() -> SyntheticDataset {
        SyntheticDataset::generate(SyntheticParams {
            n_per_class: 10,
            augment_translations: 2,
            grid_n: 64,
            canvas_n: 32,
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn round_trip_within_float32() {
        let d = small();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&d, dir.path(), &SaveInfo::default()).unwrap();
        let (recs, scale) = load_object_stack(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(scale, 1.0);
        assert_eq!(recs.len(), d.len());
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(r.label, d.label(i));
            assert_eq!(r.sample_id, d.sample_id(i));
            for (a, b) in r.object.data().iter().zip(d.object(i).unwrap().data()) {
                assert!((a - b).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn identical_bytes_for_identical_input() {
        let d = small();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        save_dataset(&d, a.path(), &SaveInfo::default()).unwrap();
        save_dataset(&small(), b.path(), &SaveInfo::default()).unwrap();
        for f in ["manifest.json", "objects.f32", "labels.csv"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn corruption_names_the_entry() {
        let d = small();
        let dir = tempfile::tempdir().unwrap();
        let m = save_dataset(&d, dir.path(), &SaveInfo::default()).unwrap();
        let path = dir.path().join("objects.f32");
        let mut bytes = fs::read(&path).unwrap();
        let e = &m.entries[5];
        bytes[e.offset as usize + 3] ^= 0x40;
        fs::write(&path, bytes).unwrap();
        match StoredDataset::open(dir.path()) {
            Err(Error::CorruptDataset { entry, .. }) => assert_eq!(entry, e.id),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn count_mismatch_is_corrupt() {
        let d = small();
        let dir = tempfile::tempdir().unwrap();
        let mut m = save_dataset(&d, dir.path(), &SaveInfo::default()).unwrap();
        m.class_counts[0] += 1;
        fs::write(dir.path().join("manifest.json"), serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(StoredDataset::open(dir.path()), Err(Error::CorruptDataset { .. })));
    }

    #[test]
    fn empty_manifest_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let m = DatasetManifest {
            version: DATASET_VERSION,
            grid_n: 64,
            class_counts: vec![0, 0],
            amplitude_scale: 1.0,
            seed: None,
            generator_version: None,
            synthetic: None,
            meta: BTreeMap::new(),
            entries: vec![],
        };
        fs::write(dir.path().join("manifest.json"), serde_json::to_string(&m).unwrap()).unwrap();
        let (recs, _) = load_object_stack(&dir.path().join("manifest.json")).unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn bright_stacks_are_renormalized() {
        struct Loud;
        impl ObjectSource for Loud {
            fn len(&self) -> usize {
                2
            }
            fn grid_n(&self) -> usize {
                16
            }
            fn label(&self, i: usize) -> usize {
                i
            }
            fn sample_id(&self, i: usize) -> &str {
                ["a", "b"][i]
            }
            fn group(&self, i: usize) -> usize {
                i
            }
            fn object(&self, i: usize) -> Result<ComplexField> {
                let mut data = vec![Complex64::new(0.0, 0.0); 256];
                data[17 + i] = Complex64::new(0.0, 4.0 * (i + 1) as f64);
                ComplexField::new(16, data, Plane::Object)
            }
        }
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&Loud, dir.path(), &SaveInfo::default()).unwrap();
        let d = StoredDataset::open(dir.path()).unwrap();
        assert_eq!(d.load_scale, 8.0);
        assert!((d.object(1).unwrap().max_modulus() - 1.0).abs() < 1e-12);
        assert!((d.object(0).unwrap().max_modulus() - 0.5).abs() < 1e-12);
    }
}
