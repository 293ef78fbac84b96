use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::dataset::{stream_rng, ObjectSource, Split};
use crate::error::{Error, Result};

/// Sample indices per split, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn get(&self, s: Split) -> &[usize] {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Split tag per sample.
    pub fn tags(&self, n: usize) -> Vec<Option<Split>> {
        let mut t = vec![None; n];
        for s in Split::ALL {
            for &i in self.get(s) {
                t[i] = Some(s);
            }
        }
        t
    }
}

/// Largest-remainder apportionment of `total` by `ratios`.
fn apportion(total: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let ideal: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut out = [0; 3];
    for k in 0..3 {
        out[k] = ideal[k].floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())).then(a.cmp(&b)));
    let mut left = total - out.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[k] += 1;
        left -= 1;
    }
    out
}

/// Stratified split over groups: every group lands whole in one split, the
/// split group totals follow `ratios`, and each class is spread as evenly as
/// the totals allow.
pub fn split_dataset(source: &dyn ObjectSource, ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if ratios.iter().any(|r| !(*r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("split ratios must be positive and sum to 1, got {ratios:?}")));
    }
    // class -> groups (ordered) -> members
    let mut by_class: BTreeMap<usize, BTreeMap<usize, Vec<usize>>> = BTreeMap::new();
    let mut group_label = BTreeMap::new();
    for i in 0..source.len() {
        if *group_label.entry(source.group(i)).or_insert(source.label(i)) != source.label(i) {
            return Err(Error::Validation(format!("group {} mixes class labels", source.group(i))));
        }
        by_class.entry(source.label(i)).or_default().entry(source.group(i)).or_default().push(i);
    }
    let n_groups: usize = by_class.values().map(BTreeMap::len).sum();
    let targets = apportion(n_groups, &ratios);
    let mut floors: Vec<[usize; 3]> = Vec::new();
    let mut deficit = targets;
    for groups in by_class.values() {
        let g = groups.len() as f64;
        let f = [(g * ratios[0]).floor() as usize, (g * ratios[1]).floor() as usize, (g * ratios[2]).floor() as usize];
        for k in 0..3 {
            deficit[k] = deficit[k].saturating_sub(f[k]);
        }
        floors.push(f);
    }
    let mut out = SplitIndices { train: vec![], val: vec![], test: vec![] };
    for (ci, (class, groups)) in by_class.iter().enumerate() {
        let g = groups.len();
        let mut quota = floors[ci];
        let frac: Vec<f64> = (0..3).map(|k| g as f64 * ratios[k] - quota[k] as f64).collect();
        let mut given = [false; 3];
        while quota.iter().sum::<usize>() < g {
            let k = (0..3)
                .filter(|&k| !given[k])
                .max_by(|&a, &b| deficit[a].cmp(&deficit[b]).then(frac[a].total_cmp(&frac[b])).then(b.cmp(&a)))
                .unwrap_or(0);
            quota[k] += 1;
            given[k] = true;
            deficit[k] = deficit[k].saturating_sub(1);
        }
        if let Some(k) = (0..3).find(|&k| quota[k] == 0) {
            return Err(Error::Validation(format!(
                "class {class} has {g} groups; the {} split would receive none",
                Split::ALL[k].name()
            )));
        }
        let mut ids: Vec<usize> = groups.keys().copied().collect();
        ids.shuffle(&mut stream_rng(seed, 0x5EED_0000 + *class as u64));
        let mut start = 0;
        for (k, s) in Split::ALL.into_iter().enumerate() {
            let dst = match s {
                Split::Train => &mut out.train,
                Split::Val => &mut out.val,
                Split::Test => &mut out.test,
            };
            for gid in &ids[start..start + quota[k]] {
                dst.extend_from_slice(&groups[gid]);
            }
            start += quota[k];
        }
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
