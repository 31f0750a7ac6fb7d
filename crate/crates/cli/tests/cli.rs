use std::path::Path;
use std::process::{Command, Output};

fn hazardboost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hazardboost"))
        .args(args)
        .env_remove("HAZARDBOOST_THREADS")
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn simulate_and_train(dir: &Path) -> (String, String, String) {
    let (data, truth, model) = (path(dir, "d.csv"), path(dir, "truth.txt"), path(dir, "m.txt"));
    assert_ok(&hazardboost(&[
        "simulate", "--family", "lambda1", "--n", "200", "--irrelevant", "2", "--seed", "4", "--out", &data, "--truth",
        &truth,
    ]));
    assert_ok(&hazardboost(&["train", "--data", &data, "--m", "20", "--l", "2", "--out", &model]));
    (data, truth, model)
}

#[test]
fn simulate_train_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (data, truth, model) = simulate_and_train(dir.path());

    let eval = hazardboost(&["evaluate", "--model", &model, "--data", &data, "--truth", &truth, "--auc-grid", "5"]);
    assert_ok(&eval);
    let text = String::from_utf8(eval.stdout).unwrap();
    assert!(text.starts_with("metric,t,value,pair_count\nl2,,"));
    assert_eq!(text.lines().filter(|l| l.starts_with("auc,")).count(), 5);
    assert_eq!(text.lines().filter(|l| l.starts_with("auc_truth,")).count(), 5);

    let imp = hazardboost(&["importance", "--model", &model]);
    assert_ok(&imp);
    let text = String::from_utf8(imp.stdout).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["time", "x", "noise1", "noise2"]);

    let points = path(dir.path(), "points.csv");
    std::fs::write(&points, "t,x,noise1,noise2\n0.5,0.3,0,0\n0.9,0.7,1,-1\n").unwrap();
    let pred = hazardboost(&["predict", "--model", &model, "--points", &points]);
    assert_ok(&pred);
    let text = String::from_utf8(pred.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    for line in text.lines().skip(1) {
        let h: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(h > 0.0);
    }

    let surv = hazardboost(&["predict", "--model", &model, "--data", &data, "--times", "0.01,0.2"]);
    assert_ok(&surv);
    let text = String::from_utf8(surv.stdout).unwrap();
    assert_eq!(text.lines().count(), 401);
    // survival is blank past the end of a trajectory
    assert!(text.lines().any(|l| l.ends_with(',')));
    for line in text.lines().skip(1).filter(|l| !l.ends_with(',')) {
        let s: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(s > 0.0 && s <= 1.0);
    }
}

#[test]
fn cross_validation_marks_one_selected_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.csv");
    assert_ok(&hazardboost(&["simulate", "--family", "lambda2", "--n", "100", "--out", &data]));
    let cv = hazardboost(&["cv", "--data", &data, "--l", "1,2", "--m", "5:15:5", "--k", "3"]);
    assert_ok(&cv);
    let text = String::from_utf8(cv.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "l,m,mean_risk,valid_folds,fold_1,fold_2,fold_3,selected");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",true")).count(), 1);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _, model) = simulate_and_train(dir.path());
    let again = path(dir.path(), "m2.txt");
    assert_ok(&hazardboost(&["--threads", "2", "train", "--data", &data, "--m", "20", "--l", "2", "--out", &again]));
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&again).unwrap());

    let data2 = path(dir.path(), "d2.csv");
    assert_ok(&hazardboost(&[
        "simulate", "--family", "lambda1", "--n", "200", "--irrelevant", "2", "--seed", "4", "--out", &data2,
    ]));
    assert_eq!(std::fs::read(&data).unwrap(), std::fs::read(&data2).unwrap());
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _, model) = simulate_and_train(dir.path());
    let config = path(dir.path(), "train.conf");
    std::fs::write(&config, format!("# training\ndata = {data}\nm = 5\nl = 2\n")).unwrap();
    let via_config = path(dir.path(), "m3.txt");
    assert_ok(&hazardboost(&["--config", &config, "train", "--m", "20", "--out", &via_config]));
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&via_config).unwrap());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(hazardboost(&["train", "--m", "5", "--l", "1", "--out", "x"]).status.code(), Some(2));
    assert_eq!(hazardboost(&["simulate", "--family", "lambda9", "--n", "5", "--out", "x"]).status.code(), Some(2));
    assert_eq!(hazardboost(&["cv", "--data", "x", "--k", "1"]).status.code(), Some(2));
    assert_eq!(hazardboost(&["--config", "/nonexistent/conf", "train"]).status.code(), Some(2));
}

#[test]
fn invalid_data_exits_with_one_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "bad.csv");
    std::fs::write(&data, "id,time,x,followup,event\na,0,1,,\na,,,0.5,0\nb,0,2,,\nb,,,0.4,0\n").unwrap();
    let out = hazardboost(&["train", "--data", &data, "--m", "5", "--l", "1", "--out", &path(dir.path(), "m")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no observed events"));
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["simulate", "train", "cv", "predict", "evaluate", "importance"] {
        let out = hazardboost(&[sub, "--help"]);
        assert_ok(&out);
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}
