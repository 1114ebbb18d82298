//! The LPD-GCN classifier, its ablation variants and the GIN baseline.

mod check;
mod config;
mod gin;
mod lpdgcn;

use rand::Rng;

pub use check::{check_model_gradients, gradcheck_fixture, saturated_units, ModelGradCheck};
pub use config::{Architecture, ModelConfig, ReconstructionKind, Variant};
pub use gin::{gin_forward, GinLayout, GinParams};
pub use lpdgcn::{
    attention_aggregate, classification_loss, conv_layer, decode_node_features, model_forward,
    model_forward_with, readout, reconstruction_loss, total_loss, ConvOut, Env, ForwardArtifacts, LpdgcnLayout,
    LpdgcnParams,
};

use crate::error::Result;
use crate::graph::GraphBatch;
use crate::nn::{Bound, Checkpoint, ParamStore};
use crate::real::Real;
use crate::tensor::{BatchNormState, Mode, Tape, Var};

/// Loss terms and logits common to every architecture.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub bound: Bound,
    pub class_logits: Var,
    pub loss: Var,
    pub loss_gc: Var,
    pub loss_lfr: Option<Var>,
    /// `[B x K]` layer attention, LPD-GCN only.
    pub alpha: Option<Var>,
}

/// Either architecture behind one interface for the training harness.
#[derive(Debug, Clone)]
pub enum Model<T> {
    Lpdgcn(LpdgcnParams<T>),
    Gin(GinParams<T>),
}

impl<T: Real> Model<T> {
    /// Deterministic in `(config, seed)`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(match config.arch {
            Architecture::Lpdgcn => Model::Lpdgcn(LpdgcnParams::init(config, seed)?),
            Architecture::Gin => Model::Gin(GinParams::init(config, seed)?),
        })
    }

    pub fn store(&self) -> &ParamStore<T> {
        match self {
            Model::Lpdgcn(p) => &p.store,
            Model::Gin(p) => &p.store,
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        match self {
            Model::Lpdgcn(p) => &mut p.store,
            Model::Gin(p) => &mut p.store,
        }
    }

    fn running(&self) -> &[BatchNormState<T>] {
        match self {
            Model::Lpdgcn(p) => &p.running,
            Model::Gin(p) => &p.running,
        }
    }

    fn running_mut(&mut self) -> &mut [BatchNormState<T>] {
        match self {
            Model::Lpdgcn(p) => &mut p.running,
            Model::Gin(p) => &mut p.running,
        }
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        tape: &mut Tape<T>,
        batch: &GraphBatch<T>,
        config: &ModelConfig,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Outputs> {
        match self {
            Model::Lpdgcn(p) => {
                let a = model_forward(tape, p, batch, config, mode, rng)?;
                Ok(Outputs {
                    bound: a.bound,
                    class_logits: a.class_logits,
                    loss: a.loss,
                    loss_gc: a.loss_gc,
                    loss_lfr: a.loss_lfr,
                    alpha: Some(a.alpha),
                })
            }
            Model::Gin(p) => {
                let bound = p.store.bind(tape);
                let logits = gin_forward(tape, &bound, &p.layout, &mut p.running, batch, config, mode, rng)?;
                let loss = classification_loss(tape, logits, &batch.labels)?;
                Ok(Outputs {
                    bound,
                    class_logits: logits,
                    loss,
                    loss_gc: loss,
                    loss_lfr: None,
                    alpha: None,
                })
            }
        }
    }

    /// Parameters plus batch-norm running statistics.
    pub fn checkpoint(&self) -> Checkpoint<T> {
        let mut ck = Checkpoint::from_store(self.store());
        for (i, s) in self.running().iter().enumerate() {
            ck.add_buffer(format!("bn.{i}.running_mean"), &s.running_mean.clone().insert_axis(ndarray::Axis(0)));
            ck.add_buffer(format!("bn.{i}.running_var"), &s.running_var.clone().insert_axis(ndarray::Axis(0)));
        }
        ck
    }

    pub fn load_checkpoint(&mut self, ck: &Checkpoint<T>) -> Result<()> {
        ck.load_into(self.store_mut())?;
        for i in 0..self.running().len() {
            let mean = ck.buffer(&format!("bn.{i}.running_mean"))?;
            let var = ck.buffer(&format!("bn.{i}.running_var"))?;
            let s = &mut self.running_mut()[i];
            if mean.len() != s.dim() || var.len() != s.dim() {
                return Err(crate::Error::shape("load_checkpoint", format!("bn.{i} width")));
            }
            s.running_mean = mean.row(0).to_owned();
            s.running_var = var.row(0).to_owned();
        }
        Ok(())
    }
}
