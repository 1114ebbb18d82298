use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::lpdgcn::{model_forward_with, LpdgcnParams};
use crate::error::Result;
use crate::graph::{make_batch, FeatureKind, Graph, GraphBatch};
use crate::nn::Bound;
use crate::tensor::{finite_difference_coordinates, Coordinate, GradCheck, Mode, Tape};

/// Two small labelled graphs: a 4-cycle with a pendant node and a 3-node
/// path, three node labels, one graph per class.
pub fn gradcheck_fixture() -> Vec<Graph> {
    let build = |n: usize, edges: &[(usize, usize)], labels: &[usize], class: usize| {
        let mut g = Graph::new(n, edges.iter().copied(), labels.to_vec(), class);
        g.features = ndarray::Array2::from_shape_fn((n, 3), |(v, j)| f64::from(u8::from(labels[v] == j)));
        g
    };
    vec![
        build(5, &[(0, 1), (1, 2), (2, 3), (3, 0), (3, 4)], &[0, 1, 2, 0, 1], 0),
        build(3, &[(0, 1), (1, 2)], &[2, 2, 1], 1),
    ]
}

/// Hidden units of batch-normalized MLPs that are active on every row of the
/// batch, as `(layer, unit)`.
///
/// Batch norm removes any shift shared by all rows, so the first-layer bias
/// of such a unit has an identically zero gradient and central differences
/// in it measure nothing but round-off.
pub fn saturated_units(
    params: &LpdgcnParams<f64>,
    batch: &GraphBatch<f64>,
    config: &ModelConfig,
    dropout_seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let mut tape = Tape::new();
    let bound = params.store.bind(&mut tape);
    let mut running = params.running.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let a = model_forward_with(&mut tape, bound, &params.layout, &mut running, batch, config, Mode::Train, &mut rng)?;
    let mut out = Vec::new();
    for (k, (&input, mlp)) in a.conv_in.iter().zip(&params.layout.conv).enumerate() {
        let pre = tape.value(input).dot(params.store.get(mlp.w1)) + params.store.get(mlp.b1);
        for (j, col) in pre.columns().into_iter().enumerate() {
            if col.iter().all(|&v| v > 0.0) {
                out.push((k + 1, j));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ModelGradCheck {
    pub seed: u64,
    pub mode: Mode,
    pub parameters: usize,
    /// Worst coordinate outside `invariant`.
    pub report: GradCheck,
    /// Train mode only: first-layer biases of [`saturated_units`], whose
    /// exact gradient is zero.
    pub invariant: Vec<Coordinate>,
}

impl ModelGradCheck {
    /// Largest central-difference magnitude among the invariant biases.
    pub fn invariant_max_numeric(&self) -> f64 {
        self.invariant.iter().map(|c| c.numeric.abs()).fold(0.0, f64::max)
    }
}

const DROPOUT_SEED: u64 = 7;

/// Central-difference check of every LPD-GCN parameter on `graphs`.
///
/// Parameters come from `LpdgcnParams::init(config, seed)`; three train-mode
/// passes then populate the batch-norm running statistics. In train mode the
/// dropout masks are fixed across evaluations.
pub fn check_model_gradients(
    graphs: &[Graph],
    config: &ModelConfig,
    seed: u64,
    step: f64,
    mode: Mode,
) -> Result<ModelGradCheck> {
    let batch: GraphBatch<f64> = make_batch(&graphs.iter().collect::<Vec<_>>(), FeatureKind::OneHot)?;
    let mut params = LpdgcnParams::<f64>::init(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(DROPOUT_SEED);
    for _ in 0..3 {
        let mut tape = Tape::new();
        let bound = params.store.bind(&mut tape);
        model_forward_with(&mut tape, bound, &params.layout, &mut params.running, &batch, config, Mode::Train, &mut rng)?;
    }
    let invariant_at: Vec<(usize, usize)> = match mode {
        Mode::Train => saturated_units(&params, &batch, config, DROPOUT_SEED)?
            .into_iter()
            .map(|(k, j)| (params.layout.conv[k - 1].b1.index(), j))
            .collect(),
        Mode::Eval => Vec::new(),
    };
    let coords = finite_difference_coordinates(params.store.values(), step, |tape, vars| {
        let mut running = params.running.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(DROPOUT_SEED);
        let a = model_forward_with(tape, Bound(vars.to_vec()), &params.layout, &mut running, &batch, config, mode, &mut rng)?;
        Ok(a.loss)
    })?;
    let (invariant, checked): (Vec<_>, Vec<_>) = coords
        .into_iter()
        .partition(|c| invariant_at.contains(&(c.param, c.index)));
    Ok(ModelGradCheck {
        seed,
        mode,
        parameters: params.store.numel(),
        report: GradCheck::summarize(&checked),
        invariant,
    })
}
