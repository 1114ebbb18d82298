//! In-memory graph data model, TU-format ingestion, batching and
//! stratified fold planning.

mod batch;
mod folds;
mod tu;

pub use batch::{make_batch, GraphBatch};
pub use folds::{stratified_folds, FoldPlan};
pub use tu::{parse_tu_dataset, write_tu_dataset};

use ndarray::Array2;
use serde::Serialize;

/// How node feature rows are encoded. Determines which reconstruction loss
/// is admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeatureKind {
    /// No feature matrix attached yet.
    None,
    /// One basis vector per node, indexed by its node label.
    OneHot,
    /// Arbitrary real-valued attributes.
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub node_count: usize,
    /// Unordered node pairs `(u, v)` with `u <= v`, sorted and de-duplicated.
    pub edges: Vec<(usize, usize)>,
    /// Node labels remapped to `0..T`.
    pub node_labels: Vec<usize>,
    /// Class remapped to `0..C`.
    pub label: usize,
    /// `[node_count x d_i]`, empty (`0` columns) until features are attached.
    pub features: Array2<f64>,
}

impl Graph {
    /// Builds a graph from local edges, canonicalising each pair and
    /// dropping duplicates. Features start empty.
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        node_labels: Vec<usize>,
        label: usize,
    ) -> Self {
        let mut edges: Vec<_> = edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        Graph {
            node_count,
            edges,
            node_labels,
            label,
            features: Array2::zeros((node_count, 0)),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Returns a copy with nodes relabelled so that old node `v` becomes
    /// `perm[v]`. Features, labels and edges follow their nodes.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.node_count);
        let mut node_labels = vec![0; self.node_count];
        let mut features = Array2::zeros(self.features.raw_dim());
        for (old, &new) in perm.iter().enumerate() {
            node_labels[new] = self.node_labels[old];
            features.row_mut(new).assign(&self.features.row(old));
        }
        let mut g = Graph::new(
            self.node_count,
            self.edges.iter().map(|&(a, b)| (perm[a], perm[b])),
            node_labels,
            self.label,
        );
        g.features = features;
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub num_node_labels: usize,
    pub feature_kind: FeatureKind,
    /// Raw file value of each class index, in first-appearance order.
    pub raw_class_labels: Vec<i64>,
    /// Raw file value of each node-label index, in first-appearance order.
    pub raw_node_labels: Vec<i64>,
}

/// Summary statistics in the layout of a dataset overview table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub name: String,
    pub graphs: usize,
    pub classes: usize,
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub node_labels: usize,
    pub class_counts: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Feature width `d_i` (0 before [`one_hot_features`]).
    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, Graph::feature_dim)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    pub fn stats(&self) -> DatasetStats {
        let n = self.graphs.len().max(1) as f64;
        let mut class_counts = vec![0; self.num_classes];
        for g in &self.graphs {
            class_counts[g.label] += 1;
        }
        DatasetStats {
            name: self.name.clone(),
            graphs: self.graphs.len(),
            classes: self.num_classes,
            avg_nodes: self.graphs.iter().map(|g| g.node_count as f64).sum::<f64>() / n,
            avg_edges: self.graphs.iter().map(|g| g.edges.len() as f64).sum::<f64>() / n,
            node_labels: self.num_node_labels,
            class_counts,
        }
    }

    /// Dataset restricted to the given graph indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            name: self.name.clone(),
            graphs: Vec::new(),
            num_classes: self.num_classes,
            num_node_labels: self.num_node_labels,
            feature_kind: self.feature_kind,
            raw_class_labels: self.raw_class_labels.clone(),
            raw_node_labels: self.raw_node_labels.clone(),
        }
    }
}

/// Attaches one-hot node-label features: row `v` of every graph becomes the
/// basis vector of `node_labels[v]` in `R^T`.
pub fn one_hot_features(mut ds: Dataset) -> Dataset {
    let t = ds.num_node_labels;
    for g in &mut ds.graphs {
        let mut x = Array2::zeros((g.node_count, t));
        for (v, &label) in g.node_labels.iter().enumerate() {
            x[(v, label)] = 1.0;
        }
        g.features = x;
    }
    ds.feature_kind = FeatureKind::OneHot;
    ds
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset {
            name: "toy".into(),
            graphs: vec![
                Graph::new(3, [(0, 1), (1, 2), (2, 0)], vec![2, 0, 1], 0),
                Graph::new(2, [(1, 0)], vec![1, 1], 1),
            ],
            num_classes: 2,
            num_node_labels: 7,
            feature_kind: FeatureKind::None,
            raw_class_labels: vec![0, 1],
            raw_node_labels: (0..7).collect(),
        }
    }

    #[test]
    fn one_hot_rows_are_basis_vectors() {
        let ds = one_hot_features(toy());
        let g = &ds.graphs[0];
        assert_eq!(g.features.row(0).to_vec(), vec![0., 0., 1., 0., 0., 0., 0.]);
        for g in &ds.graphs {
            assert_eq!(g.feature_dim(), 7);
            for row in g.features.rows() {
                assert_eq!(row.sum(), 1.0);
            }
        }
        assert_eq!(ds.feature_kind, FeatureKind::OneHot);
    }

    #[test]
    fn edges_are_canonical() {
        let g = Graph::new(3, [(2, 1), (1, 2), (0, 0), (0, 0)], vec![0; 3], 0);
        assert_eq!(g.edges, vec![(0, 0), (1, 2)]);
    }

    #[test]
    fn permutation_moves_labels_and_edges() {
        let ds = one_hot_features(toy());
        let g = ds.graphs[0].permuted(&[2, 0, 1]);
        assert_eq!(g.node_labels, vec![0, 1, 2]);
        assert_eq!(g.features.row(2), ds.graphs[0].features.row(0));
        assert_eq!(g.edges.len(), 3);
    }
}
