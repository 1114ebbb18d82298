use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn lpdgcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpdgcn"))
        .args(args)
        .arg("--set")
        .arg(format!("data_dir={}", data_dir().display()))
        .output()
        .expect("binary runs")
}

fn raw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpdgcn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn quick(out: &Path) -> Vec<String> {
    let mut v: Vec<String> = ["epochs=2", "hidden=4", "readout=4", "layers=2", "folds=3"]
        .iter()
        .flat_map(|s| ["--set".to_string(), s.to_string()])
        .collect();
    v.push("--out".into());
    v.push(out.display().to_string());
    v
}

fn run(cmd: &str, extra: &[String]) -> Output {
    let mut args = vec![cmd];
    args.extend(extra.iter().map(String::as_str));
    lpdgcn(&args)
}

#[test]
fn inspect_reports_dataset_statistics() {
    let o = lpdgcn(&["inspect"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("graphs       188"), "{s}");
    assert!(s.contains("classes      2"));
    assert!(s.contains("avg nodes    17.93"));
    assert!(s.contains("node labels  7"));
    assert!(s.starts_with("# effective configuration\n"));
    assert!(s.contains("lambda = 0.2") && s.contains("epochs = 350"));
}

#[test]
fn gradcheck_passes() {
    let o = lpdgcn(&["gradcheck"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let line = s.lines().find(|l| l.starts_with("max relative error")).unwrap();
    let err: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn cv_then_compare_identical_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("cv", &quick(dir.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("LPD-GCN"));
    let summary = dir.path().join("summary.json");
    assert!(dir.path().join("results.txt").exists());
    assert!(dir.path().join("lpd_gcn_fold2.csv").exists());
    let s = summary.display().to_string();
    let o = raw(&["compare", &s, &s]);
    assert!(o.status.success());
    let out = stdout(&o);
    let p: f64 = out.lines().last().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(p >= 0.99, "{out}");
}

#[test]
fn train_writes_one_csv_line_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = quick(dir.path());
    args.extend(["--set".into(), "epochs=3".into()]);
    let o = run("train", &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("train.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().next().unwrap(), "epoch,loss_total,loss_gc,loss_lfr,train_acc,lr,seconds");
}

#[test]
fn sweep_and_ablate_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = quick(dir.path());
    args.extend(["--set".into(), "sweep_values=0,0.5".into(), "--jobs".into(), "1".into()]);
    let o = run("sweep", &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep_lambda.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let o = run("ablate", &quick(dir.path()));
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["LPD-GCN ", "LPD-GCN(NoLFR)", "LPD-GCN(NoDC)", "LPD-GCN(NoGCA)"] {
        assert!(s.contains(name), "{s}");
    }
}

#[test]
fn usage_errors_exit_2_and_runtime_errors_exit_1() {
    let o = raw(&["bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = raw(&["cv", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let o = lpdgcn(&["inspect", "--set", "lamda=1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("unknown key `lamda`"));

    let o = lpdgcn(&["inspect", "--set", "dataset=NOPE"]);
    assert_eq!(o.status.code(), Some(1));
    let o = raw(&["compare", "/nonexistent/a.json", "/nonexistent/b.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_is_read_before_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "lambda = 0.6 # heavier reconstruction\nseed = 9\n").unwrap();
    let c = conf.display().to_string();
    let o = lpdgcn(&["inspect", "--config", &c, "--set", "seed=11"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("lambda = 0.6") && s.contains("seed = 11"), "{s}");
}
