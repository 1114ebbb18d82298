use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lpdgcn::graph::{Dataset, FoldPlan, stratified_folds};
use lpdgcn::harness::{
    ablate, cross_validate, emit_reports, emit_train, rank_sum_test, read_summary, results_table, sweep, sweep_csv,
    train_fold, CvRun, Precision, RunConfig,
};
use lpdgcn::model::{check_model_gradients, gradcheck_fixture};
use lpdgcn::tensor::Mode;
use lpdgcn::Real;

/// Graph classification experiments with LPD-GCN and a GIN baseline.
#[derive(Parser)]
#[command(name = "lpdgcn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a configuration key; applied after the file, in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Maximum number of folds trained concurrently.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print dataset statistics.
    Inspect(Common),
    /// Finite-difference check of every model gradient on a small fixture.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Hidden and readout width used for the check.
        #[arg(long, default_value_t = 8)]
        width: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Train once and write the per-epoch curves.
    Train {
        #[command(flatten)]
        common: Common,
        /// Hold out this fold of the fold plan; trains on every graph if absent.
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Stratified k-fold cross-validation.
    Cv(Common),
    /// Cross-validate the full model and its three ablations.
    Ablate(Common),
    /// Cross-validate over the lambda or dropout grid.
    Sweep(Common),
    /// Rank-sum test between the fold accuracies of two summaries.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Report name to pick from the first file (default: its first report).
        #[arg(long)]
        name_a: Option<String>,
        /// Report name to pick from the second file (default: its first report).
        #[arg(long)]
        name_b: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if common.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    cfg.cv.jobs = common.jobs;
    Ok(cfg)
}

fn prepare(common: &Common) -> Result<(RunConfig, Dataset)> {
    let mut cfg = load(common)?;
    let ds = cfg
        .load_dataset()
        .with_context(|| format!("loading {} from {}", cfg.dataset, cfg.data_dir.display()))?;
    print_config(&cfg);
    Ok((cfg, ds))
}

fn print_config(cfg: &RunConfig) {
    println!("# effective configuration");
    print!("{}", cfg.render());
    println!();
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Inspect(common) => {
            let (_, ds) = prepare(&common)?;
            let s = ds.stats();
            println!("dataset      {}", s.name);
            println!("graphs       {}", s.graphs);
            println!("classes      {}", s.classes);
            println!("avg nodes    {:.2}", s.avg_nodes);
            println!("avg edges    {:.2}", s.avg_edges);
            println!("node labels  {}", s.node_labels);
            let counts: Vec<String> = s.class_counts.iter().map(usize::to_string).collect();
            println!("per class    {}", counts.join(" "));
            Ok(())
        }
        Command::Gradcheck { common, width, step, tolerance } => {
            let mut cfg = load(&common)?;
            cfg.model.hidden = width;
            cfg.model.readout = width;
            cfg.model.input_dim = 3;
            cfg.model.num_classes = 2;
            print_config(&cfg);
            let check = check_model_gradients(&gradcheck_fixture(), &cfg.model, cfg.hyper.seed, step, Mode::Eval)?;
            println!("parameters          {}", check.parameters);
            println!("max relative error  {:.3e}", check.report.max_rel_err);
            if check.report.max_rel_err > tolerance {
                bail!("max relative error {:.3e} exceeds {tolerance:e}", check.report.max_rel_err);
            }
            Ok(())
        }
        Command::Train { common, fold } => {
            let (cfg, ds) = prepare(&common)?;
            match cfg.precision {
                Precision::F32 => train::<f32>(&cfg, &ds, fold),
                Precision::F64 => train::<f64>(&cfg, &ds, fold),
            }
        }
        Command::Cv(common) => {
            let (cfg, ds) = prepare(&common)?;
            let run = match cfg.precision {
                Precision::F32 => cross_validate::<f32>(&ds, &cfg.model, &cfg.hyper, &cfg.cv)?,
                Precision::F64 => cross_validate::<f64>(&ds, &cfg.model, &cfg.hyper, &cfg.cv)?,
            };
            finish(&cfg, &[run])
        }
        Command::Ablate(common) => {
            let (cfg, ds) = prepare(&common)?;
            let runs = match cfg.precision {
                Precision::F32 => ablate::<f32>(&ds, &cfg.model, &cfg.hyper, &cfg.cv)?,
                Precision::F64 => ablate::<f64>(&ds, &cfg.model, &cfg.hyper, &cfg.cv)?,
            };
            finish(&cfg, &runs.into_iter().map(|(_, r)| r).collect::<Vec<_>>())
        }
        Command::Sweep(common) => {
            let (cfg, ds) = prepare(&common)?;
            let grid = cfg.sweep_grid();
            let points = match cfg.precision {
                Precision::F32 => sweep::<f32>(&ds, &cfg.model, &cfg.hyper, &cfg.cv, cfg.sweep, &grid)?,
                Precision::F64 => sweep::<f64>(&ds, &cfg.model, &cfg.hyper, &cfg.cv, cfg.sweep, &grid)?,
            };
            let table: Vec<_> = points.iter().map(|(v, r)| (*v, &r.report)).collect();
            let path = cfg.out_dir.join(format!("sweep_{}.csv", cfg.sweep.name()));
            std::fs::create_dir_all(&cfg.out_dir).with_context(|| cfg.out_dir.display().to_string())?;
            std::fs::write(&path, sweep_csv(cfg.sweep.name(), &table)).with_context(|| path.display().to_string())?;
            finish(&cfg, &points.into_iter().map(|(_, r)| r).collect::<Vec<_>>())
        }
        Command::Compare { a, b, name_a, name_b } => {
            let xa = pick(&a, name_a.as_deref())?;
            let xb = pick(&b, name_b.as_deref())?;
            let p = rank_sum_test(&xa.fold_accuracies, &xb.fold_accuracies)?;
            println!("{}: {:.4} ± {:.4}", xa.name, xa.mean, xa.std);
            println!("{}: {:.4} ± {:.4}", xb.name, xb.mean, xb.std);
            println!("rank-sum p = {p:.6}");
            Ok(())
        }
    }
}

fn pick(path: &Path, name: Option<&str>) -> Result<lpdgcn::harness::CvReport> {
    let reports = read_summary(path)?;
    let found = match name {
        Some(n) => reports.into_iter().find(|r| r.name == n),
        None => reports.into_iter().next(),
    };
    found.with_context(|| format!("{}: no matching report", path.display()))
}

fn train<T: Real>(cfg: &RunConfig, ds: &Dataset, fold: Option<usize>) -> Result<()> {
    let (train, test) = match fold {
        Some(f) => {
            let plan: FoldPlan = stratified_folds(ds, cfg.cv.folds, cfg.cv.fold_seed)?;
            if f >= plan.k {
                bail!("fold {f} out of range for {} folds", plan.k);
            }
            plan.split(f)
        }
        None => ((0..ds.len()).collect(), Vec::new()),
    };
    let (report, _) = train_fold::<T>(ds, &train, &test, &cfg.model, &cfg.hyper, fold.unwrap_or(0))?;
    let every = (report.epochs.len() / 10).max(1);
    for (i, e) in report.epochs.iter().enumerate() {
        if (i + 1) % every == 0 || i == 0 {
            let lfr = e.loss_lfr.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!(
                "epoch {:>4}  loss {:.4}  gc {:.4}  lfr {lfr}  train_acc {:.4}  lr {:.2e}  {:.1}s",
                e.epoch + 1,
                e.loss_total,
                e.loss_gc,
                e.train_acc,
                e.lr,
                e.seconds
            );
        }
    }
    if let Some(acc) = report.final_test_acc {
        println!("test accuracy {acc:.4}");
    }
    for p in emit_train(&report, &cfg.out_dir, "train")? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn finish(cfg: &RunConfig, runs: &[CvRun]) -> Result<()> {
    let reports: Vec<_> = runs.iter().map(|r| &r.report).collect();
    print!("{}", results_table(&reports));
    let written = emit_reports(runs, &cfg.out_dir)?;
    println!("wrote {} files to {}", written.len(), cfg.out_dir.display());
    Ok(())
}
