//! Episode-level train/val/test split.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::schema::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl SplitSet {
    pub fn get(&self, split: Split) -> &Dataset {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Partitions episodes (a scene together with its shots) by `ratios`; every
/// QA goes with its clip.
pub fn split_dataset(ds: &Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<SplitSet> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| *r < 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios must be non-negative and sum to 1, got ({a}, {b}, {c})")));
    }
    let mut keys: Vec<&str> = ds
        .episodes
        .iter()
        .map(|e| e.episode_key())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = keys.len();
    let n_train = (a * n as f64).round() as usize;
    let n_val = ((b * n as f64).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let groups = [
        (Split::Train, &keys[..n_train]),
        (Split::Val, &keys[n_train..n_train + n_val]),
        (Split::Test, &keys[n_train + n_val..]),
    ];
    let mut parts = BTreeMap::new();
    for (split, group) in groups {
        if group.is_empty() {
            return Err(Error::DegenerateSplit { split: split.name() });
        }
        let keep: HashSet<&str> = group.iter().copied().collect();
        let episodes: Vec<_> = ds
            .episodes
            .iter()
            .filter(|e| keep.contains(e.episode_key()))
            .cloned()
            .collect();
        let ids: HashSet<&str> = episodes.iter().map(|e| e.clip_id.as_str()).collect();
        let qas = ds.qas.iter().filter(|q| ids.contains(q.clip_id.as_str())).cloned().collect();
        parts.insert(split.name(), Dataset::new(ds.roster.clone(), episodes, qas));
    }
    let mut take = |k| parts.remove(k).expect("all splits built");
    Ok(SplitSet {
        train: take("train"),
        val: take("val"),
        test: take("test"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, WorldSpec};

    fn dataset(n: usize) -> Dataset {
        generate_dataset(&WorldSpec {
            seed: 11,
            n_scenes: n,
            qas_per_scene: 4,
            ..Default::default()
        })
        .unwrap()
        .1
    }

    #[test]
    fn ten_episodes_split_six_two_two() {
        let ds = dataset(10);
        let s = split_dataset(&ds, (0.6, 0.2, 0.2), 0).unwrap();
        let count = |d: &Dataset| d.episodes.iter().filter(|e| e.clip_id == e.episode_key()).count();
        assert_eq!((count(&s.train), count(&s.val), count(&s.test)), (6, 2, 2));
        assert_eq!(s.train.qas.len() + s.val.qas.len() + s.test.qas.len(), ds.qas.len());
    }

    #[test]
    fn splits_share_no_clip() {
        let ds = dataset(7);
        let s = split_dataset(&ds, (0.6, 0.2, 0.2), 5).unwrap();
        let ids = |d: &Dataset| d.episodes.iter().map(|e| e.clip_id.clone()).collect::<HashSet<_>>();
        assert!(ids(&s.train).is_disjoint(&ids(&s.val)));
        assert!(ids(&s.train).is_disjoint(&ids(&s.test)));
        assert!(ids(&s.val).is_disjoint(&ids(&s.test)));
    }

    #[test]
    fn degenerate_and_bad_ratios() {
        let ds = dataset(2);
        assert!(matches!(
            split_dataset(&ds, (0.6, 0.2, 0.2), 0),
            Err(Error::DegenerateSplit { .. })
        ));
        assert!(matches!(split_dataset(&ds, (0.5, 0.2, 0.2), 0), Err(Error::Config(_))));
    }
}
