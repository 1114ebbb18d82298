use std::ops::Range;
use std::sync::Arc;

use ndarray::{s, Array2};

use super::{FeatureKind, Graph};
use crate::error::{Error, Result};
use crate::real::Real;

/// Block-concatenation of several graphs into one disconnected graph.
#[derive(Debug, Clone)]
pub struct GraphBatch<T> {
    /// `[N_B x d_i]` node features, graphs stacked in input order.
    pub x: Array2<T>,
    /// Directed `(src, dst)` pairs into the concatenated node space; both
    /// directions of every undirected edge, self-loops once.
    pub edges: Arc<[(usize, usize)]>,
    /// Owning graph of each row, non-decreasing.
    pub node_graph_id: Arc<[usize]>,
    /// Node-label index of each row.
    pub node_labels: Arc<[usize]>,
    /// Class of each graph.
    pub labels: Arc<[usize]>,
    /// First row of each graph plus a trailing `N_B`.
    pub offsets: Vec<usize>,
    pub feature_kind: FeatureKind,
}

impl<T: Real> GraphBatch<T> {
    pub fn num_graphs(&self) -> usize {
        self.labels.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.x.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.x.ncols()
    }

    /// Row range of graph `g`.
    pub fn rows(&self, g: usize) -> Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }
}

/// Stacks graph feature rows in order, offsets edges and emits each
/// undirected edge in both directions.
pub fn make_batch<T: Real>(graphs: &[&Graph], kind: FeatureKind) -> Result<GraphBatch<T>> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::invalid("cannot batch an empty list of graphs"))?;
    let d = first.feature_dim();
    if let Some(g) = graphs.iter().find(|g| g.feature_dim() != d) {
        return Err(Error::shape(
            "make_batch",
            format!("feature width {} differs from {d}", g.feature_dim()),
        ));
    }
    let n_total: usize = graphs.iter().map(|g| g.node_count).sum();
    let mut x = Array2::<T>::zeros((n_total, d));
    let mut edges = Vec::with_capacity(graphs.iter().map(|g| 2 * g.edges.len()).sum());
    let mut node_graph_id = Vec::with_capacity(n_total);
    let mut node_labels = Vec::with_capacity(n_total);
    let mut offsets = Vec::with_capacity(graphs.len() + 1);
    let mut offset = 0;
    for (gi, g) in graphs.iter().enumerate() {
        offsets.push(offset);
        x.slice_mut(s![offset..offset + g.node_count, ..])
            .assign(&g.features.mapv(T::of));
        for &(u, v) in &g.edges {
            edges.push((offset + u, offset + v));
            if u != v {
                edges.push((offset + v, offset + u));
            }
        }
        node_graph_id.extend(std::iter::repeat_n(gi, g.node_count));
        node_labels.extend_from_slice(&g.node_labels);
        offset += g.node_count;
    }
    offsets.push(offset);
    Ok(GraphBatch {
        x,
        edges: edges.into(),
        node_graph_id: node_graph_id.into(),
        node_labels: node_labels.into(),
        labels: graphs.iter().map(|g| g.label).collect::<Vec<_>>().into(),
        offsets,
        feature_kind: kind,
    })
}
