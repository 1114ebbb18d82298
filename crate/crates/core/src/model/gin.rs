use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::GraphBatch;
use crate::nn::{glorot_uniform, mlp_forward, Bound, MlpParams, ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::{BatchNormState, Mode, Tape, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GinLayout {
    pub conv: Vec<MlpParams>,
    /// Self-weight offset per layer, `1 x 1`, starting at zero.
    pub eps: Vec<ParamId>,
    pub cls_w: ParamId,
    pub cls_b: ParamId,
}

/// Graph Isomorphism Network baseline.
#[derive(Debug, Clone)]
pub struct GinParams<T> {
    pub store: ParamStore<T>,
    pub layout: GinLayout,
    pub running: Vec<BatchNormState<T>>,
}

impl<T: Real> GinParams<T> {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let dh = config.hidden;
        let mut conv = Vec::new();
        let mut eps = Vec::new();
        for k in 1..=config.layers {
            let input = if k == 1 { config.input_dim } else { dh };
            conv.push(MlpParams::init(&mut store, &mut rng, &format!("gin.{k}"), (input, dh, dh), true));
            eps.push(store.add(format!("gin.{k}.eps"), Array2::zeros((1, 1))));
        }
        let width = config.input_dim + config.layers * dh;
        let cls_w = store.add("classifier.w", glorot_uniform(&mut rng, width, config.num_classes));
        let cls_b = store.add("classifier.b", Array2::zeros((1, config.num_classes)));
        let running = (0..config.layers)
            .map(|_| BatchNormState::new(dh, T::of(config.bn_momentum), T::of(config.bn_eps)))
            .collect();
        Ok(GinParams {
            store,
            layout: GinLayout { conv, eps, cls_w, cls_b },
            running,
        })
    }
}

/// `h[k] = MLP_k((1 + eps_k) h[k-1] + sum of neighbors of h[k-1])`; the
/// graph vector concatenates the per-graph sums of `h[0..=K]` and feeds a
/// linear classifier (after dropout in train mode).
#[allow(clippy::too_many_arguments)]
pub fn gin_forward<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    bound: &Bound,
    layout: &GinLayout,
    running: &mut [BatchNormState<T>],
    batch: &GraphBatch<T>,
    config: &ModelConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    if batch.feature_dim() != config.input_dim {
        return Err(Error::shape(
            "gin_forward",
            format!("features have width {}, model expects {}", batch.feature_dim(), config.input_dim),
        ));
    }
    if layout.conv.len() != running.len() {
        return Err(Error::invalid("parameters were built for a different layer count"));
    }
    let b = batch.num_graphs();
    let mut h = tape.constant(batch.x.clone());
    let mut pooled = tape.segment_sum(h, &batch.node_graph_id, b)?;
    for ((mlp, &eps), bn) in layout.conv.iter().zip(&layout.eps).zip(running.iter_mut()) {
        let neigh = tape.neighbor_sum(h, &batch.edges)?;
        let scaled = tape.scale_by(h, bound.var(eps))?;
        let own = tape.add(h, scaled)?;
        let input = tape.add(own, neigh)?;
        h = mlp_forward(tape, bound, mlp, input, Some(bn), mode)?;
        let p = tape.segment_sum(h, &batch.node_graph_id, b)?;
        pooled = tape.concat_cols(pooled, p)?;
    }
    let pooled = tape.dropout(pooled, config.dropout, mode, rng)?;
    tape.linear(pooled, bound.var(layout.cls_w), bound.var(layout.cls_b))
}
