#![allow(dead_code)]

use std::path::PathBuf;

use lpdgcn::graph::{one_hot_features, parse_tu_dataset, Dataset, FeatureKind, Graph};
use lpdgcn::model::ModelConfig;
use ndarray::Array2;

pub fn data_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn mutag() -> Dataset {
    one_hot_features(parse_tu_dataset(data_root().join("MUTAG"), "MUTAG").expect("bundled MUTAG"))
}

pub fn one_hot_graph(n: usize, edges: &[(usize, usize)], labels: &[usize], t: usize, class: usize) -> Graph {
    let mut g = Graph::new(n, edges.iter().copied(), labels.to_vec(), class);
    let mut x = Array2::zeros((n, t));
    for (v, &l) in labels.iter().enumerate() {
        x[(v, l)] = 1.0;
    }
    g.features = x;
    g
}

/// A labelled 4-cycle with a pendant node and a 3-node path, three node labels.
pub fn fixture_pair() -> Vec<Graph> {
    vec![
        one_hot_graph(5, &[(0, 1), (1, 2), (2, 3), (3, 0), (3, 4)], &[0, 1, 2, 0, 1], 3, 0),
        one_hot_graph(3, &[(0, 1), (1, 2)], &[2, 2, 1], 3, 1),
    ]
}

pub fn fixture_dataset(graphs: Vec<Graph>, classes: usize, t: usize) -> Dataset {
    Dataset {
        name: "fixture".into(),
        graphs,
        num_classes: classes,
        num_node_labels: t,
        feature_kind: FeatureKind::OneHot,
        raw_class_labels: (0..classes as i64).collect(),
        raw_node_labels: (0..t as i64).collect(),
    }
}

pub fn small_config(input_dim: usize, hidden: usize) -> ModelConfig {
    ModelConfig {
        hidden,
        readout: hidden,
        input_dim,
        ..ModelConfig::default()
    }
}

/// Labelled cycles (class 0) and paths (class 1) of 4 to 7 nodes, three
/// node labels.
pub fn toy_dataset(n: usize) -> Dataset {
    let graphs = (0..n)
        .map(|i| {
            let len = 4 + i % 4;
            let class = (i / 4) % 2;
            let mut edges: Vec<(usize, usize)> = (0..len - 1).map(|v| (v, v + 1)).collect();
            if class == 0 {
                edges.push((len - 1, 0));
            }
            let labels: Vec<usize> = (0..len).map(|v| (v + i) % 3).collect();
            one_hot_graph(len, &edges, &labels, 3, class)
        })
        .collect();
    fixture_dataset(graphs, 2, 3)
}

pub fn tiny_hyper(epochs: usize) -> lpdgcn::nn::Hyper {
    lpdgcn::nn::Hyper {
        epochs,
        batch_size: 4,
        decay_every: 5,
        ..Default::default()
    }
}
