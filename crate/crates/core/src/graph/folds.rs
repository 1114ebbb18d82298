use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Partition of graph indices into `k` disjoint test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    /// `(train, test)` indices with fold `f` held out. Both sorted.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let test = self.folds[f].clone();
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        train.sort_unstable();
        (train, test)
    }
}

/// Shuffles each class's indices with `seed`, then deals them round-robin
/// into `k` folds. The dealing position carries over between classes so
/// fold sizes also stay within one of each other. Classes smaller than `k`
/// simply leave some folds without members of that class.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count must be at least 2, got {k}")));
    }
    if k > ds.len() {
        return Err(Error::invalid(format!(
            "fold count {k} exceeds dataset size {}",
            ds.len()
        )));
    }
    let mut by_class = vec![Vec::new(); ds.num_classes];
    for (i, g) in ds.graphs.iter().enumerate() {
        by_class[g.label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { k, folds, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{FeatureKind, Graph};

    fn labelled(labels: &[usize]) -> Dataset {
        Dataset {
            name: "l".into(),
            graphs: labels.iter().map(|&c| Graph::new(1, [], vec![0], c)).collect(),
            num_classes: labels.iter().max().unwrap() + 1,
            num_node_labels: 1,
            feature_kind: FeatureKind::None,
            raw_class_labels: vec![],
            raw_node_labels: vec![0],
        }
    }

    #[test]
    fn rejects_bad_k() {
        let ds = labelled(&[0, 1, 0]);
        assert!(stratified_folds(&ds, 1, 0).is_err());
        assert!(stratified_folds(&ds, 4, 0).is_err());
        assert!(stratified_folds(&ds, 3, 0).is_ok());
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let ds = labelled(&(0..50).map(|i| i % 3).collect::<Vec<_>>());
        let a = stratified_folds(&ds, 5, 7).unwrap();
        assert_eq!(a, stratified_folds(&ds, 5, 7).unwrap());
        assert_ne!(a, stratified_folds(&ds, 5, 8).unwrap());
    }

    #[test]
    fn mutag_shaped_class_counts() {
        // 125 / 63 split as in MUTAG
        let labels: Vec<_> = (0..188).map(|i| usize::from(i >= 125)).collect();
        let ds = labelled(&labels);
        let plan = stratified_folds(&ds, 10, 0).unwrap();
        let sizes: Vec<_> = plan.folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().all(|s| *s == 18 || *s == 19), "{sizes:?}");
        for c in 0..2 {
            let per: Vec<_> = plan
                .folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == c).count())
                .collect();
            let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
            assert!(hi - lo <= 1, "class {c}: {per:?}");
        }
        let (train, test) = plan.split(3);
        assert_eq!(train.len() + test.len(), 188);
    }
}
