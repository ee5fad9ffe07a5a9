use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ltmix(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltmix"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let help = ltmix(&["--help"], dir.path());
    assert_eq!(code(&help), 0);
    let text = String::from_utf8_lossy(&help.stdout);
    for sub in ["synth", "train", "eval", "sweep", "export-boundary", "reproduce-fig1"] {
        assert!(text.contains(sub), "{sub} missing from usage");
    }
    assert_eq!(code(&ltmix(&["train", "--no-such-flag"], dir.path())), 2);
    assert_eq!(code(&ltmix(&["frobnicate"], dir.path())), 2);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_gamma = ltmix(&["train", "--gamma", "-1", "--epochs", "1"], dir.path());
    assert_eq!(code(&bad_gamma), 1);
    assert!(String::from_utf8_lossy(&bad_gamma.stderr).contains("gamma"));
    assert_eq!(code(&ltmix(&["train", "--method", "erm", "--bilateral-mixup", "true"], dir.path())), 1);
    assert_eq!(code(&ltmix(&["train", "--method", "nope"], dir.path())), 1);
}

#[test]
fn train_writes_artifacts_and_eval_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = ltmix(
        &["train", "--method", "dbn-mix", "--gamma", "inf", "--epochs", "2", "--seed", "4", "--out", "run"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    for f in ["checkpoint.dbnm", "record.csv", "record.json", "accuracy.csv"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    assert!(fs::read(run.join("checkpoint.dbnm")).unwrap().starts_with(b"DBNM"));
    let record = fs::read_to_string(run.join("record.csv")).unwrap();
    assert_eq!(record.lines().count(), 3);
    assert!(fs::read_to_string(run.join("record.json")).unwrap().contains("\"seed\": 4"));

    let eval = ltmix(
        &["eval", "--checkpoint", "run/checkpoint.dbnm", "--dataset", "gaussian", "--seed", "4"],
        dir.path(),
    );
    assert_eq!(code(&eval), 0, "{}", String::from_utf8_lossy(&eval.stderr));
    let table = String::from_utf8_lossy(&eval.stdout).to_string();
    assert!(table.starts_with("class,group,accuracy\n"));
    assert_eq!(
        table.lines().find(|l| l.starts_with("all,")),
        fs::read_to_string(run.join("accuracy.csv")).unwrap().lines().find(|l| l.starts_with("all,"))
    );
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = ltmix(&["train", "--epochs", "2", "--seed", "9", "--out", out], dir.path());
        assert_eq!(code(&o), 0);
    }
    assert_eq!(
        fs::read(dir.path().join("a/checkpoint.dbnm")).unwrap(),
        fs::read(dir.path().join("b/checkpoint.dbnm")).unwrap()
    );
    assert_eq!(
        fs::read(dir.path().join("a/record.csv")).unwrap(),
        fs::read(dir.path().join("b/record.csv")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# toy run\nmethod = dbn\nepochs = 3\nseed = 2\n").unwrap();
    let o = ltmix(&["train", "--config", "run.cfg", "--epochs", "1", "--out", "r"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json = fs::read_to_string(dir.path().join("r/record.json")).unwrap();
    assert!(json.contains("method = dbn\\n"));
    assert!(json.contains("epochs = 1\\n"));
    assert!(json.contains("seed = 2\\n"));

    fs::write(dir.path().join("bad.cfg"), "epochs 3\n").unwrap();
    assert_eq!(code(&ltmix(&["train", "--config", "bad.cfg"], dir.path())), 1);
}

#[test]
fn synth_files_feed_training_and_boundary_export() {
    let dir = tempfile::tempdir().unwrap();
    let s = ltmix(
        &["synth", "--dataset", "moons", "--seed", "1", "--out", "train.csv", "--test-out", "test.bin"],
        dir.path(),
    );
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    let csv = fs::read_to_string(dir.path().join("train.csv")).unwrap();
    assert!(csv.starts_with("f0,f1,label\n"));
    assert!(fs::read(dir.path().join("test.bin")).unwrap().starts_with(b"LTDS"));

    let t = ltmix(
        &["train", "--method", "erm", "--dataset", "train.csv", "--test", "test.bin", "--epochs", "2", "--out", "m"],
        dir.path(),
    );
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    let b = ltmix(
        &["export-boundary", "--checkpoint", "m/checkpoint.dbnm", "--dataset", "train.csv", "--resolution", "2", "--out", "g.csv"],
        dir.path(),
    );
    assert_eq!(code(&b), 0, "{}", String::from_utf8_lossy(&b.stderr));
    let grid = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert!(grid.starts_with("x,y,pred,p0\n"));
    assert_eq!(grid.lines().count(), 5);

    assert_eq!(code(&ltmix(&["train", "--dataset", "train.csv"], dir.path())), 1);
}

#[test]
fn boundary_export_rejects_non_planar_data() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ltmix(&["synth", "--dataset", "gaussian", "--out", "g.csv"], dir.path())), 0);
    assert_eq!(code(&ltmix(&["train", "--epochs", "1", "--out", "r"], dir.path())), 0);
    let o = ltmix(
        &["export-boundary", "--checkpoint", "r/checkpoint.dbnm", "--dataset", "g.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsupported feature dimension"));
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = ltmix(
        &["sweep", "--epochs", "1", "--eta-grid", "1,3", "--gamma-grid", "2,inf", "--jobs", "2", "--out", "s.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "eta,epsilon,alpha,gamma,balanced_accuracy,many,medium,few,sampler_p,error");
    assert_eq!(lines.len(), 5);

    let empty = ltmix(&["sweep", "--epochs", "1", "--out", "e.csv"], dir.path());
    assert_eq!(code(&empty), 0);
    assert_eq!(fs::read_to_string(dir.path().join("e.csv")).unwrap().lines().count(), 1);
}

#[test]
fn reproduce_fig1_file_contract() {
    let dir = tempfile::tempdir().unwrap();
    let o = ltmix(
        &["reproduce-fig1", "--seeds", "3,5", "--epochs", "5", "--resolution", "10", "--out", "fig"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fig = dir.path().join("fig");
    let grids = fs::read_dir(&fig)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("boundary_"))
        .count();
    assert_eq!(grids, 6);
    let summary = fs::read_to_string(fig.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "method,seed,majority_recall,minority_recall");
    assert_eq!(lines.len(), 7);
    assert!(fs::read_to_string(fig.join("boundary_bilateral_seed5.csv"))
        .unwrap()
        .starts_with("x,y,pred,p0\n"));
    assert!(fig.join("points_seed3.csv").exists());
}
