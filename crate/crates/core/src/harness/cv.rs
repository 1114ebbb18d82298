use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_std};
use super::train::{train_fold, AlphaStats, TrainReport};
use crate::error::{Error, Result};
use crate::graph::{stratified_folds, Dataset, FoldPlan};
use crate::model::{ModelConfig, Variant};
use crate::nn::Hyper;
use crate::parallel::map_ordered;
use crate::real::Real;

/// Cross-validation settings shared by every run of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub folds: usize,
    pub fold_seed: u64,
    /// Concurrent fold trainings; `None` uses every core.
    pub jobs: Option<usize>,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            folds: 10,
            fold_seed: 0,
            jobs: None,
        }
    }
}

/// Summary of one cross-validation. Contains no timings, so identical
/// inputs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub name: String,
    pub dataset: String,
    pub precision: String,
    pub folds: usize,
    pub fold_seed: u64,
    /// Final-epoch test accuracy per fold.
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (`k - 1` denominator).
    pub std: f64,
    /// Best test accuracy over epochs per fold, for reference only.
    pub best_epoch_accuracies: Vec<f64>,
    pub best_epochs: Vec<usize>,
    pub final_train_accuracies: Vec<f64>,
    pub model: ModelConfig,
    pub hyper: Hyper,
}

/// A cross-validation summary with the per-fold training curves.
#[derive(Debug, Clone)]
pub struct CvRun {
    pub report: CvReport,
    pub folds: Vec<TrainReport>,
}

impl CvRun {
    pub fn alpha(&self) -> AlphaStats {
        let mut a = AlphaStats::default();
        for f in &self.folds {
            a.merge(&f.alpha);
        }
        a
    }
}

/// Cross-validates each named configuration on the same fold plan, running
/// every (configuration, fold) pair as an independent task.
pub fn cross_validate_many<T: Real>(
    ds: &Dataset,
    runs: &[(String, ModelConfig)],
    hyper: &Hyper,
    cv: &CvSettings,
) -> Result<Vec<CvRun>> {
    if runs.is_empty() {
        return Err(Error::invalid("nothing to cross-validate"));
    }
    let plan = stratified_folds(ds, cv.folds, cv.fold_seed)?;
    let tasks: Vec<(usize, usize)> = (0..runs.len())
        .flat_map(|r| (0..cv.folds).map(move |f| (r, f)))
        .collect();
    let results = map_ordered(tasks, cv.jobs, |(r, f)| {
        let (train, test) = plan.split(f);
        train_fold::<T>(ds, &train, &test, &runs[r].1, hyper, f).map(|(report, _)| report)
    });
    let mut results = results.into_iter();
    runs.iter()
        .map(|(name, config)| {
            let folds = results.by_ref().take(cv.folds).collect::<Result<Vec<_>>>()?;
            Ok(summarize::<T>(name, ds, &plan, config, hyper, folds))
        })
        .collect()
}

fn summarize<T: Real>(
    name: &str,
    ds: &Dataset,
    plan: &FoldPlan,
    config: &ModelConfig,
    hyper: &Hyper,
    folds: Vec<TrainReport>,
) -> CvRun {
    let fold_accuracies: Vec<f64> = folds.iter().map(|f| f.final_test_acc.unwrap_or(0.0)).collect();
    let best: Vec<(usize, f64)> = folds.iter().map(|f| f.best_test.unwrap_or((0, 0.0))).collect();
    let report = CvReport {
        name: name.to_string(),
        dataset: ds.name.clone(),
        precision: T::NAME.to_string(),
        folds: plan.k,
        fold_seed: plan.seed,
        mean: mean(&fold_accuracies),
        std: sample_std(&fold_accuracies),
        fold_accuracies,
        best_epoch_accuracies: best.iter().map(|b| b.1).collect(),
        best_epochs: best.iter().map(|b| b.0).collect(),
        final_train_accuracies: folds.iter().map(|f| f.final_train_acc).collect(),
        model: config.clone(),
        hyper: hyper.clone(),
    };
    CvRun { report, folds }
}

pub fn cross_validate<T: Real>(ds: &Dataset, config: &ModelConfig, hyper: &Hyper, cv: &CvSettings) -> Result<CvRun> {
    let name = match config.arch {
        crate::model::Architecture::Gin => "GIN".to_string(),
        crate::model::Architecture::Lpdgcn => variant_name(config),
    };
    let mut runs = cross_validate_many::<T>(ds, &[(name, config.clone())], hyper, cv)?;
    Ok(runs.remove(0))
}

fn variant_name(c: &ModelConfig) -> String {
    match (c.use_lfr && c.lambda > 0.0, c.use_dc, c.use_gca) {
        (true, true, true) => Variant::Full.name().into(),
        (false, true, true) => Variant::NoLfr.name().into(),
        (true, false, true) => Variant::NoDc.name().into(),
        (true, true, false) => Variant::NoGca.name().into(),
        (lfr, dc, gca) => format!("LPD-GCN(lfr={lfr},dc={dc},gca={gca})"),
    }
}

/// The full model and its three single-component ablations on one fold plan.
pub fn ablate<T: Real>(ds: &Dataset, config: &ModelConfig, hyper: &Hyper, cv: &CvSettings) -> Result<Vec<(Variant, CvRun)>> {
    let runs: Vec<(String, ModelConfig)> = Variant::ALL
        .iter()
        .map(|v| (v.name().to_string(), v.apply(config)))
        .collect();
    let out = cross_validate_many::<T>(ds, &runs, hyper, cv)?;
    Ok(Variant::ALL.into_iter().zip(out).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Lambda,
    Dropout,
}

impl GridKind {
    /// The grids examined for the trade-off weight and the dropout ratio.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            GridKind::Lambda => vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 2.0, 5.0, 10.0],
            GridKind::Dropout => vec![0.0, 0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridKind::Lambda => "lambda",
            GridKind::Dropout => "dropout",
        }
    }

    fn apply(self, config: &ModelConfig, value: f64) -> ModelConfig {
        let mut c = config.clone();
        match self {
            GridKind::Lambda => c.lambda = value,
            GridKind::Dropout => c.dropout = value,
        }
        c
    }
}

/// One cross-validation per grid value, everything else fixed.
pub fn sweep<T: Real>(
    ds: &Dataset,
    config: &ModelConfig,
    hyper: &Hyper,
    cv: &CvSettings,
    kind: GridKind,
    values: &[f64],
) -> Result<Vec<(f64, CvRun)>> {
    if values.is_empty() {
        return Err(Error::invalid("empty sweep grid"));
    }
    let runs: Vec<(String, ModelConfig)> = values
        .iter()
        .map(|&v| (format!("{}={v}", kind.name()), kind.apply(config, v)))
        .collect();
    for (_, c) in &runs {
        c.validate()?;
    }
    let out = cross_validate_many::<T>(ds, &runs, hyper, cv)?;
    Ok(values.iter().copied().zip(out).collect())
}
