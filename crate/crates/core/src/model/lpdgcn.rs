use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, ReconstructionKind};
use crate::error::{Error, Result};
use crate::graph::{FeatureKind, GraphBatch};
use crate::nn::{glorot_uniform, mlp_forward, Bound, MlpParams, ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::{BatchNormState, Mode, Tape, Var};

/// Where each LPD-GCN array lives in the parameter store. Vectors indexed
/// by `k - 1` for layer `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpdgcnLayout {
    pub conv: Vec<MlpParams>,
    pub readout: Vec<MlpParams>,
    /// Raw context scale of layer `k`, mapped through softplus. `None` for
    /// the first layer and when global context is disabled.
    pub eps_raw: Vec<Option<ParamId>>,
    pub att_w1: ParamId,
    pub att_w2: ParamId,
    pub cls_w: ParamId,
    pub cls_b: ParamId,
    pub decoder: Option<MlpParams>,
}

#[derive(Debug, Clone)]
pub struct LpdgcnParams<T> {
    pub store: ParamStore<T>,
    pub layout: LpdgcnLayout,
    /// Running statistics of each conv layer's batch norm.
    pub running: Vec<BatchNormState<T>>,
}

impl<T: Real> LpdgcnParams<T> {
    /// Draws every weight from one seeded stream in a fixed order; the
    /// decoder comes last so toggling reconstruction leaves the rest intact.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (dh, dout) = (config.hidden, config.readout);
        let eps0 = T::of(std::f64::consts::E - 1.0).ln();
        let mut conv = Vec::new();
        let mut readout = Vec::new();
        let mut eps_raw = Vec::new();
        for k in 1..=config.layers {
            let input = match k {
                1 => config.input_dim,
                _ if config.use_gca => dh + dout,
                _ => dh,
            };
            conv.push(MlpParams::init(&mut store, &mut rng, &format!("conv.{k}"), (input, dh, dh), true));
            readout.push(MlpParams::init(&mut store, &mut rng, &format!("readout.{k}"), (dh, dout, dout), false));
            eps_raw.push(
                (k > 1 && config.use_gca)
                    .then(|| store.add(format!("gca.{k}.eps_raw"), Array2::from_elem((1, 1), eps0))),
            );
        }
        let att_w1 = store.add("attention.w1", glorot_uniform(&mut rng, dout, dout));
        let att_w2 = store.add("attention.w2", glorot_uniform(&mut rng, dout, dout));
        let cls_w = store.add("classifier.w", glorot_uniform(&mut rng, dout, config.num_classes));
        let cls_b = store.add("classifier.b", Array2::zeros((1, config.num_classes)));
        let decoder = config.use_lfr.then(|| {
            MlpParams::init(&mut store, &mut rng, "decoder", (dh + dout, dh, config.input_dim), false)
        });
        let running = (0..config.layers)
            .map(|_| BatchNormState::new(dh, T::of(config.bn_momentum), T::of(config.bn_eps)))
            .collect();
        Ok(LpdgcnParams {
            store,
            layout: LpdgcnLayout {
                conv,
                readout,
                eps_raw,
                att_w1,
                att_w2,
                cls_w,
                cls_b,
                decoder,
            },
            running,
        })
    }
}

/// Tape handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardArtifacts {
    pub bound: Bound,
    /// `h[0] = X`, then one `[N_B x d_h]` embedding per layer.
    pub h: Vec<Var>,
    /// Neighborhood aggregate of each layer (before context).
    pub agg: Vec<Var>,
    /// Input of each layer's MLP.
    pub conv_in: Vec<Var>,
    /// `[B x d_o]` readout per layer.
    pub hg: Vec<Var>,
    /// `[B x K]`, rows sum to one.
    pub alpha: Var,
    pub hg_final: Var,
    pub class_logits: Var,
    pub recon_logits: Option<Var>,
    pub loss_gc: Var,
    pub loss_lfr: Option<Var>,
    pub loss: Var,
}

/// Shared inputs of the per-layer operations.
pub struct Env<'a, T, R: ?Sized> {
    pub tape: &'a mut Tape<T>,
    pub bound: &'a Bound,
    pub batch: &'a GraphBatch<T>,
    pub config: &'a ModelConfig,
    pub mode: Mode,
    pub rng: &'a mut R,
}

fn sum_vars<T: Real>(tape: &mut Tape<T>, vars: &[Var]) -> Result<Var> {
    let (&first, rest) = vars
        .split_first()
        .ok_or_else(|| Error::invalid("sum of no embeddings"))?;
    rest.iter().try_fold(first, |acc, &v| tape.add(acc, v))
}

/// Intermediate values of one convolution layer.
#[derive(Debug, Clone, Copy)]
pub struct ConvOut {
    /// Neighborhood sum.
    pub agg: Var,
    /// MLP input: the aggregate, with the scaled graph context appended.
    pub input: Var,
    /// `h[k]`.
    pub out: Var,
}

/// Layer `k >= 1` given `h[0..k]`.
///
/// The aggregate sums neighbors of `h[1] + ... + h[k-1]` with dense
/// connections (of `h[k-1]` without, and of `X` for the first layer). With
/// global context the previous readout, scaled by `softplus(eps_raw)`, is
/// appended to every node of its graph before the MLP.
pub fn conv_layer<T: Real, R: Rng + ?Sized>(
    env: &mut Env<'_, T, R>,
    k: usize,
    h: &[Var],
    hg_prev: Option<Var>,
    mlp: &MlpParams,
    eps_raw: Option<ParamId>,
    bn: Option<&mut BatchNormState<T>>,
) -> Result<ConvOut> {
    if k == 0 || h.len() != k {
        return Err(Error::invalid(format!("conv layer {k} needs {k} earlier embeddings, got {}", h.len())));
    }
    let tape = &mut *env.tape;
    let source = if k >= 2 && env.config.use_dc {
        sum_vars(tape, &h[1..k])?
    } else {
        h[k - 1]
    };
    let agg = tape.neighbor_sum(source, &env.batch.edges)?;
    let input = if k >= 2 && env.config.use_gca {
        let ctx = hg_prev.ok_or_else(|| Error::invalid(format!("layer {k} needs the previous readout")))?;
        let eps = eps_raw.ok_or_else(|| Error::invalid(format!("layer {k} has no context scale")))?;
        let eps = tape.softplus(env.bound.var(eps));
        let ctx = tape.gather_rows(ctx, &env.batch.node_graph_id)?;
        let ctx = tape.scale_by(ctx, eps)?;
        tape.concat_cols(agg, ctx)?
    } else {
        agg
    };
    let out = mlp_forward(tape, env.bound, mlp, input, bn, env.mode)?;
    let out = tape.dropout(out, env.config.dropout, env.mode, &mut *env.rng)?;
    Ok(ConvOut { agg, input, out })
}

/// Readout of layer `k` from `h[0..=k]`: sum-pool `h[1] + ... + h[k]` (or
/// `h[k]` alone without dense connections) per graph, then the MLP.
pub fn readout<T: Real, R: Rng + ?Sized>(
    env: &mut Env<'_, T, R>,
    k: usize,
    h: &[Var],
    mlp: &MlpParams,
) -> Result<Var> {
    if k == 0 || h.len() <= k {
        return Err(Error::invalid(format!("readout {k} needs embeddings 1..={k}")));
    }
    let tape = &mut *env.tape;
    let s = if env.config.use_dc { sum_vars(tape, &h[1..=k])? } else { h[k] };
    let pooled = tape.segment_sum(s, &env.batch.node_graph_id, env.batch.num_graphs())?;
    mlp_forward(tape, env.bound, mlp, pooled, None, env.mode)
}

/// Softmax attention over layer readouts, per graph.
///
/// With `z_k = hg_k W1`, each layer scores `sum_j (relu(z_k) W2)_j`; the
/// scores are normalized across layers into `alpha` (`[B x K]`) and the
/// result is `relu(sum_k alpha_k z_k)`.
pub fn attention_aggregate<T: Real>(tape: &mut Tape<T>, hg: &[Var], w1: Var, w2: Var) -> Result<(Var, Var)> {
    let first = *hg.first().ok_or_else(|| Error::invalid("attention over no layers"))?;
    let shape = tape.shape(first);
    if let Some(&bad) = hg.iter().find(|&&v| tape.shape(v) != shape) {
        return Err(Error::shape("attention_aggregate", format!("{:?} vs {shape:?}", tape.shape(bad))));
    }
    let mut z = Vec::with_capacity(hg.len());
    let mut scores: Option<Var> = None;
    for &g in hg {
        let zk = tape.matmul(g, w1)?;
        let r = tape.relu(zk);
        let s = tape.matmul(r, w2)?;
        let s = tape.row_sum(s);
        scores = Some(match scores {
            None => s,
            Some(acc) => tape.concat_cols(acc, s)?,
        });
        z.push(zk);
    }
    let alpha = tape.softmax_rows(scores.expect("non-empty"));
    let mut acc: Option<Var> = None;
    for (k, &zk) in z.iter().enumerate() {
        let a = tape.select_col(alpha, k)?;
        let term = tape.mul_column(zk, a)?;
        acc = Some(match acc {
            None => term,
            Some(prev) => tape.add(prev, term)?,
        });
    }
    let out = tape.relu(acc.expect("non-empty"));
    Ok((out, alpha))
}

/// Decoder logits per node from `concat(h[1] + ... + h[K], hg_K[graph(v)])`.
pub fn decode_node_features<T: Real, R: Rng + ?Sized>(
    env: &mut Env<'_, T, R>,
    h: &[Var],
    hg_last: Var,
    decoder: Option<&MlpParams>,
) -> Result<Var> {
    let decoder = match decoder {
        Some(d) if env.config.use_lfr => d,
        _ => return Err(Error::invalid("feature reconstruction is disabled")),
    };
    if h.len() < 2 {
        return Err(Error::invalid("decoder needs at least one layer embedding"));
    }
    let tape = &mut *env.tape;
    let s = sum_vars(tape, &h[1..])?;
    let ctx = tape.gather_rows(hg_last, &env.batch.node_graph_id)?;
    let z = tape.concat_cols(s, ctx)?;
    mlp_forward(tape, env.bound, decoder, z, None, env.mode)
}

/// Softmax cross-entropy summed over graphs.
pub fn classification_loss<T: Real>(
    tape: &mut Tape<T>,
    logits: Var,
    labels: &std::sync::Arc<[usize]>,
) -> Result<Var> {
    tape.softmax_cross_entropy(logits, labels)
}

/// Cross-entropy against node labels summed over every node of the batch,
/// or the root-mean-squared feature error for continuous attributes.
pub fn reconstruction_loss<T: Real>(
    tape: &mut Tape<T>,
    recon: Var,
    batch: &GraphBatch<T>,
    kind: ReconstructionKind,
) -> Result<Var> {
    match (kind, batch.feature_kind) {
        (ReconstructionKind::OneHot, FeatureKind::OneHot) => tape.softmax_cross_entropy(recon, &batch.node_labels),
        (ReconstructionKind::Continuous, FeatureKind::Continuous) => tape.rmse(recon, &batch.x),
        (k, f) => Err(Error::invalid(format!("reconstruction {k:?} does not fit {f:?} features"))),
    }
}

/// `loss_gc + lambda * loss_lfr`.
pub fn total_loss<T: Real>(tape: &mut Tape<T>, loss_gc: Var, loss_lfr: Var, lambda: f64) -> Result<Var> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    let weighted = tape.scale(loss_lfr, T::of(lambda));
    tape.add(loss_gc, weighted)
}

/// Binds `params` to `tape` and runs [`model_forward_with`].
pub fn model_forward<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    params: &mut LpdgcnParams<T>,
    batch: &GraphBatch<T>,
    config: &ModelConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardArtifacts> {
    let bound = params.store.bind(tape);
    model_forward_with(tape, bound, &params.layout, &mut params.running, batch, config, mode, rng)
}

/// Full pass: `K` convolutions with readouts, layer attention, dropout and
/// the classifier; the decoder and reconstruction loss when enabled and
/// `lambda > 0`.
#[allow(clippy::too_many_arguments)]
pub fn model_forward_with<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    bound: Bound,
    layout: &LpdgcnLayout,
    running: &mut [BatchNormState<T>],
    batch: &GraphBatch<T>,
    config: &ModelConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardArtifacts> {
    if batch.feature_dim() != config.input_dim {
        return Err(Error::shape(
            "model_forward",
            format!("features have width {}, model expects {}", batch.feature_dim(), config.input_dim),
        ));
    }
    if layout.conv.len() != config.layers || running.len() != config.layers {
        return Err(Error::invalid("parameters were built for a different layer count"));
    }
    let x = tape.constant(batch.x.clone());
    let mut env = Env {
        tape,
        bound: &bound,
        batch,
        config,
        mode,
        rng,
    };
    let mut h = vec![x];
    let mut agg = Vec::with_capacity(config.layers);
    let mut conv_in = Vec::with_capacity(config.layers);
    let mut hg: Vec<Var> = Vec::with_capacity(config.layers);
    for (k, bn) in (1..=config.layers).zip(running.iter_mut()) {
        let c = conv_layer(
            &mut env,
            k,
            &h,
            hg.last().copied(),
            &layout.conv[k - 1],
            layout.eps_raw[k - 1],
            Some(bn),
        )?;
        h.push(c.out);
        agg.push(c.agg);
        conv_in.push(c.input);
        hg.push(readout(&mut env, k, &h, &layout.readout[k - 1])?);
    }
    let (w1, w2) = (bound.var(layout.att_w1), bound.var(layout.att_w2));
    let (hg_final, alpha) = attention_aggregate(env.tape, &hg, w1, w2)?;
    let dropped = env.tape.dropout(hg_final, config.dropout, mode, &mut *env.rng)?;
    let class_logits = env.tape.linear(dropped, bound.var(layout.cls_w), bound.var(layout.cls_b))?;
    let loss_gc = classification_loss(env.tape, class_logits, &batch.labels)?;
    let (recon_logits, loss_lfr, loss) = if config.decodes() {
        let recon = decode_node_features(&mut env, &h, hg[hg.len() - 1], layout.decoder.as_ref())?;
        let lfr = reconstruction_loss(env.tape, recon, batch, config.reconstruction)?;
        let loss = total_loss(env.tape, loss_gc, lfr, config.lambda)?;
        (Some(recon), Some(lfr), loss)
    } else {
        (None, None, loss_gc)
    };
    Ok(ForwardArtifacts {
        bound,
        h,
        agg,
        conv_in,
        hg,
        alpha,
        hg_final,
        class_logits,
        recon_logits,
        loss_gc,
        loss_lfr,
        loss,
    })
}
