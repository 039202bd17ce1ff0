//! Stratified train/validation/test partition.
//!
//! Per class, counts start from a largest-remainder (Hamilton) allocation of
//! the class size. A reconciliation pass then moves single samples between
//! splits, at most once per class, until the global totals equal
//! `round(f * N)` for train and validation. Every per-class count stays at
//! the floor or ceiling of its exact quota.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Sample;
use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.36,
            val_fraction: 0.24,
            test_fraction: 0.40,
            seed: 0x5EED_0003,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = self.fractions();
        if f.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Config("split fractions must each lie in (0, 1)".into()));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    pub fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.val_fraction, self.test_fraction]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn parts(&self) -> [(&'static str, &[Sample]); 3] {
        [("train", &self.train), ("val", &self.val), ("test", &self.test)]
    }
}

/// Largest-remainder allocation of `n` items over `fractions`; ties in the
/// remainder go to the earlier split.
pub fn hamilton(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let quotas = fractions.map(|f| f * n as f64);
    let mut alloc = quotas.map(|q| q.floor() as usize);
    let mut left = n - alloc.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc[k] += 1;
        left -= 1;
    }
    alloc
}

/// Per-class split counts for classes of the given sizes (see module docs).
pub fn allocate(class_sizes: &[usize], fractions: [f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = class_sizes.iter().sum();
    let train_target = (fractions[0] * total as f64).round() as usize;
    let val_target = (fractions[1] * total as f64).round() as usize;
    let targets = [train_target, val_target, total - train_target - val_target];

    let mut alloc: Vec<[usize; 3]> = class_sizes.iter().map(|&n| hamilton(n, fractions)).collect();
    let quota = |c: usize, k: usize| fractions[k] * class_sizes[c] as f64;
    let mut moved = vec![false; class_sizes.len()];

    loop {
        let sums: [usize; 3] = std::array::from_fn(|k| alloc.iter().map(|a| a[k]).sum::<usize>());
        let Some(to) = (0..3).find(|&k| sums[k] < targets[k]) else {
            break;
        };
        // Best donor: a class that can give one sample from a surplus split
        // to `to` while keeping both counts at floor/ceil of their quotas.
        // Prefer the class whose `to` quota has the largest fractional part.
        let mut best: Option<(usize, usize, f64)> = None;
        for from in (0..3).filter(|&k| sums[k] > targets[k]) {
            for c in 0..class_sizes.len() {
                if moved[c] {
                    continue;
                }
                let (qf, qt) = (quota(c, from), quota(c, to));
                if alloc[c][from] as f64 > qf.floor() && (alloc[c][to] as f64) < qt.ceil() {
                    let frac = qt - qt.floor();
                    if best.is_none_or(|(_, _, bf)| frac > bf) {
                        best = Some((c, from, frac));
                    }
                }
            }
        }
        let (c, from) = match best {
            Some((c, from, _)) => (c, from),
            // Infeasible within floor/ceil bounds; fall back to any donor.
            None => {
                let from = (0..3).find(|&k| sums[k] > targets[k]).expect("totals balance");
                let c = (0..class_sizes.len())
                    .find(|&c| alloc[c][from] > 0)
                    .expect("a surplus split has members");
                (c, from)
            }
        };
        alloc[c][from] -= 1;
        alloc[c][to] += 1;
        moved[c] = true;
        if moved.iter().all(|&m| m) {
            moved.iter_mut().for_each(|m| *m = false);
        }
    }
    alloc
}

/// Stratified split. Each class's samples are ordered by
/// (variant, augment), shuffled with the class's own seeded stream, and
/// dealt into train/val/test by [`allocate`].
pub fn split_dataset(samples: &[Sample], spec: &SplitSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let mut by_class: BTreeMap<usize, Vec<&Sample>> = BTreeMap::new();
    for s in samples {
        by_class.entry(s.class_id).or_default().push(s);
    }
    if let Some((c, v)) = by_class.iter().find(|(_, v)| v.len() < 3) {
        return Err(Error::Input(format!(
            "class {c} has {} samples; splitting needs at least 3",
            v.len()
        )));
    }
    let sizes: Vec<usize> = by_class.values().map(Vec::len).collect();
    let alloc = allocate(&sizes, spec.fractions());
    let mut out = DatasetSplit::default();
    for ((&class_id, members), counts) in by_class.iter_mut().zip(alloc) {
        members.sort_by_key(|s| (s.variant_id, s.augment_id));
        let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, class_id as u64));
        members.shuffle(&mut rng);
        let (train, rest) = members.split_at(counts[0]);
        let (val, test) = rest.split_at(counts[1]);
        out.train.extend(train.iter().map(|&s| s.clone()));
        out.val.extend(val.iter().map(|&s| s.clone()));
        out.test.extend(test.iter().map(|&s| s.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::GlyphImage;
    use proptest::prelude::*;

    const TABLE: [f64; 3] = [0.36, 0.24, 0.40];

    fn samples(classes: usize, per_class: usize) -> Vec<Sample> {
        (0..classes)
            .flat_map(|c| {
                (0..per_class).map(move |i| Sample {
                    image: GlyphImage::blank(8),
                    class_id: c,
                    variant_id: i / 6,
                    augment_id: i % 6,
                })
            })
            .collect()
    }

    #[test]
    fn hamilton_sixty() {
        assert_eq!(hamilton(60, TABLE), [22, 14, 24]);
        assert_eq!(hamilton(100, TABLE), [36, 24, 40]);
    }

    #[test]
    fn single_class_hundred() {
        let split = split_dataset(&samples(1, 100), &SplitSpec::default()).unwrap();
        assert_eq!(split.sizes(), (36, 24, 40));
    }

    /// Oracle: with every class at floor or ceiling of (21.6, 14.4, 24),
    /// the global totals fix exactly how many classes take each ceiling.
    #[test]
    fn twenty_classes_of_sixty() {
        let split = split_dataset(&samples(20, 60), &SplitSpec::default()).unwrap();
        assert_eq!(split.sizes(), (432, 288, 480));
        let alloc = allocate(&[60; 20], TABLE);
        for a in &alloc {
            assert!((a[0] as f64 - 21.6).abs() < 1.0);
            assert!((a[1] as f64 - 14.4).abs() < 1.0);
            assert!((a[2] as f64 - 24.0).abs() < 1.0);
        }
        // 432 = 20*21 + 12 ceilings in train; 288 = 20*14 + 8 ceilings in val.
        assert_eq!(alloc.iter().filter(|a| a[0] == 22).count(), 12);
        assert_eq!(alloc.iter().filter(|a| a[1] == 15).count(), 8);
    }

    #[test]
    fn full_corpus_arithmetic() {
        let alloc = allocate(&[60; 235], TABLE);
        let sums: [usize; 3] = std::array::from_fn(|k| alloc.iter().map(|a| a[k]).sum());
        assert_eq!(sums, [5076, 3384, 5640]);
    }

    #[test]
    fn rejects_bad_specs_and_tiny_classes() {
        let bad = SplitSpec {
            train_fraction: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            split_dataset(&samples(1, 10), &bad),
            Err(Error::Config(_))
        ));
        assert!(split_dataset(&samples(2, 2), &SplitSpec::default()).is_err());
    }

    proptest! {
        #[test]
        fn stratified_disjoint_exhaustive(sizes in proptest::collection::vec(3usize..80, 1..12), seed in any::<u64>()) {
            let mut all = Vec::new();
            for (c, &n) in sizes.iter().enumerate() {
                for i in 0..n {
                    all.push(Sample { image: GlyphImage::blank(8), class_id: c, variant_id: i, augment_id: 0 });
                }
            }
            let spec = SplitSpec { seed, ..Default::default() };
            let split = split_dataset(&all, &spec).unwrap();
            prop_assert_eq!(split.len(), all.len());
            let mut keys: Vec<_> = split.parts().iter().flat_map(|(_, v)| v.iter().map(|s| (s.class_id, s.variant_id))).collect();
            keys.sort();
            keys.dedup();
            prop_assert_eq!(keys.len(), all.len());
            let total = all.len() as f64;
            prop_assert_eq!(split.train.len(), (0.36 * total).round() as usize);
            prop_assert_eq!(split.val.len(), (0.24 * total).round() as usize);
            for (c, &n) in sizes.iter().enumerate() {
                for (k, (_, part)) in split.parts().iter().enumerate() {
                    let got = part.iter().filter(|s| s.class_id == c).count() as f64;
                    prop_assert!((got - TABLE[k] * n as f64).abs() < 1.0 + 1e-9,
                        "class {} split {} got {} of {}", c, k, got, n);
                }
            }
            prop_assert_eq!(split_dataset(&all, &spec).unwrap(), split);
        }
    }
}
