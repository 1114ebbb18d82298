use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Lpdgcn,
    Gin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructionKind {
    /// Softmax cross-entropy against node labels.
    OneHot,
    /// Root-mean-squared error against the raw feature rows.
    Continuous,
}

/// The full model and its three ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Full,
    NoLfr,
    NoDc,
    NoGca,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoLfr, Variant::NoDc, Variant::NoGca];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "LPD-GCN",
            Variant::NoLfr => "LPD-GCN(NoLFR)",
            Variant::NoDc => "LPD-GCN(NoDC)",
            Variant::NoGca => "LPD-GCN(NoGCA)",
        }
    }

    /// `config` with exactly one component switched off (none for `Full`).
    pub fn apply(self, config: &ModelConfig) -> ModelConfig {
        let mut c = config.clone();
        c.arch = Architecture::Lpdgcn;
        c.use_lfr = true;
        c.use_dc = true;
        c.use_gca = true;
        match self {
            Variant::Full => {}
            Variant::NoLfr => c.use_lfr = false,
            Variant::NoDc => c.use_dc = false,
            Variant::NoGca => c.use_gca = false,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Architecture,
    /// Number of convolution layers; node embeddings run `h[0] = X` through
    /// `h[layers]`.
    pub layers: usize,
    pub hidden: usize,
    /// Graph-level width; must equal `hidden`.
    pub readout: usize,
    pub num_classes: usize,
    /// Node feature width; equals the node-label count for one-hot features
    /// and is the decoder's output width.
    pub input_dim: usize,
    pub use_lfr: bool,
    pub use_dc: bool,
    pub use_gca: bool,
    pub lambda: f64,
    pub dropout: f64,
    pub reconstruction: ReconstructionKind,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            arch: Architecture::Lpdgcn,
            layers: 5,
            hidden: 64,
            readout: 64,
            num_classes: 2,
            input_dim: 7,
            use_lfr: true,
            use_dc: true,
            use_gca: true,
            lambda: 0.2,
            dropout: 0.5,
            reconstruction: ReconstructionKind::OneHot,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    /// Whether the decoder participates in the forward pass.
    pub fn decodes(&self) -> bool {
        self.arch == Architecture::Lpdgcn && self.use_lfr && self.lambda > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layers < 2 {
            return bad(format!("layers must be at least 2, got {}", self.layers));
        }
        if self.hidden == 0 || self.input_dim == 0 {
            return bad("hidden and input widths must be positive".into());
        }
        if self.hidden != self.readout {
            return bad(format!(
                "hidden ({}) and readout ({}) widths must match",
                self.hidden, self.readout
            ));
        }
        if self.num_classes < 2 {
            return bad("need at least 2 classes".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0 && self.bn_eps > 0.0) {
            return bad("invalid batch-norm constants".into());
        }
        Ok(())
    }
}
