use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qganf_core::dataprep::synthetic_prices;
use qganf_core::vqc::ceil_log2;
use tempfile::TempDir;

fn write_prices(path: &Path, dates: &[String], prices: &[f64]) {
    let mut text = String::from("date,adj_close\n");
    for (d, p) in dates.iter().zip(prices) {
        text.push_str(&format!("{d},{p}\n"));
    }
    fs::write(path, text).unwrap();
}

fn synthetic_csv(dir: &Path, n: usize) -> PathBuf {
    let s = synthetic_prices(n, 42);
    let dates: Vec<String> = s.dates().iter().map(|d| d.to_string()).collect();
    let path = dir.join("prices.csv");
    write_prices(&path, &dates, s.prices());
    path
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

fn qganf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qganf"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

#[test]
fn prepare_reports_split_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    synthetic_csv(tmp.path(), 2520);
    config(tmp.path(), "input = prices.csv\nb = 4\nf = 2\n");
    ok(&qganf(tmp.path(), &["prepare", "--config", "run.cfg"]));
    let prov = json(&tmp.path().join("out/provenance.json"));
    assert_eq!(prov["train_rows"], 2016);
    assert_eq!(prov["test_rows"], 504);
    assert_eq!(prov["train_pairs"], 2011);
    let first = fs::read(tmp.path().join("out/dataset.json")).unwrap();
    ok(&qganf(tmp.path(), &["prepare", "--config", "run.cfg", "--out", "again"]));
    assert_eq!(first, fs::read(tmp.path().join("again/dataset.json")).unwrap());
}

#[test]
fn config_errors_exit_before_writing() {
    let tmp = TempDir::new().unwrap();
    synthetic_csv(tmp.path(), 200);
    config(tmp.path(), "input = prices.csv\nb = 4\nf = 2\nhp_lambda = -1\n");
    let out = qganf(tmp.path(), &["prepare", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());

    config(tmp.path(), "input = prices.csv\nb = 4\nf = 2\ncolour = blue\n");
    let out = qganf(tmp.path(), &["prepare", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("colour"));
    assert!(!tmp.path().join("out").exists());

    let out = qganf(tmp.path(), &["prepare", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qganf(tmp.path(), &["launch", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_csv_is_a_data_error_with_location() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("prices.csv"), "date,adj_close\n2020-01-02,10\n2020-01-03,abc\n").unwrap();
    config(tmp.path(), "input = prices.csv\nb = 4\nf = 2\n");
    let out = qganf(tmp.path(), &["prepare", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("prices.csv:3"), "{}", stderr(&out));
}

#[test]
fn train_without_dataset_names_prepare() {
    let tmp = TempDir::new().unwrap();
    config(tmp.path(), "kind = fqgan\nb = 4\nf = 2\n");
    let out = qganf(tmp.path(), &["train", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("qganf prepare"));
}

#[test]
fn diverged_training_exits_4() {
    let tmp = TempDir::new().unwrap();
    synthetic_csv(tmp.path(), 300);
    config(
        tmp.path(),
        "input = prices.csv\nkind = simple_gan\nb = 4\nf = 1\nepochs = 3\nlr_g = 1e200\nlr_d = 1e200\n",
    );
    ok(&qganf(tmp.path(), &["prepare", "--config", "run.cfg"]));
    let out = qganf(tmp.path(), &["train", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"));
    assert!(!tmp.path().join("out/model.json").exists());
}

#[test]
fn fqgan_pipeline_end_to_end() {
    let tmp = TempDir::new().unwrap();
    synthetic_csv(tmp.path(), 300);
    config(tmp.path(), "input = prices.csv\nb = 4\nf = 2\nkind = fqgan\nepochs = 5\nseed = 11\n");
    for cmd in ["prepare", "features", "train", "predict", "evaluate"] {
        ok(&qganf(tmp.path(), &[cmd, "--config", "run.cfg"]));
    }
    let out = tmp.path().join("out");
    let (h, rows) = read_csv(&out.join("loss_history.csv"));
    assert_eq!(h, ["epoch", "loss_g", "loss_d"]);
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let loss: f64 = r[1].parse().unwrap();
        assert!((0.0..=0.5).contains(&loss));
        assert_eq!(r[2], "");
    }

    let prov = json(&out.join("provenance.json"));
    let (h, rows) = read_csv(&out.join("predictions.csv"));
    assert_eq!(h, ["split", "window", "horizon", "predicted", "truth"]);
    let pairs = prov["train_pairs"].as_u64().unwrap() + prov["test_pairs"].as_u64().unwrap();
    assert_eq!(rows.len() as u64, pairs * 2);

    let metrics = json(&out.join("metrics.json"));
    for split in ["train", "test"] {
        let m = &metrics[split];
        assert!(m["mae"].as_f64().unwrap() <= m["rmse"].as_f64().unwrap());
    }
    assert_eq!(metrics["train"]["n_pairs"], prov["train_pairs"]);

    let (h, rows) = read_csv(&out.join("features.csv"));
    assert_eq!(h[0], "date");
    assert_eq!(rows.len(), 300 - 20);
}

#[test]
fn invertible_predictions_carry_factors() {
    let tmp = TempDir::new().unwrap();
    synthetic_csv(tmp.path(), 200);
    config(tmp.path(), "input = prices.csv\nb = 8\nf = 2\nkind = invertible_fqgan\nepochs = 1\n");
    for cmd in ["prepare", "train", "predict"] {
        ok(&qganf(tmp.path(), &[cmd, "--config", "run.cfg"]));
    }
    let (h, rows) = read_csv(&tmp.path().join("out/predictions.csv"));
    assert_eq!(h.last().unwrap(), "factor");
    // Training windows scale into [0, 1], so their factors are non-negative.
    for r in &rows {
        let factor: f64 = r[5].parse().unwrap();
        assert!(factor.is_finite());
        if r[0] == "train" {
            assert!(factor >= 0.0);
        }
    }

    // A dataset prepared for another kind is rejected by train.
    let out = qganf(tmp.path(), &["train", "--config", "run.cfg", "kind=fqgan"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("qganf prepare"));
}

#[test]
fn predict_rejects_a_mismatched_dataset() {
    let tmp = TempDir::new().unwrap();
    synthetic_csv(tmp.path(), 200);
    config(tmp.path(), "input = prices.csv\nb = 4\nf = 2\nkind = fqgan\nepochs = 1\n");
    ok(&qganf(tmp.path(), &["prepare", "--config", "run.cfg"]));
    ok(&qganf(tmp.path(), &["train", "--config", "run.cfg"]));
    ok(&qganf(tmp.path(), &["prepare", "--config", "run.cfg", "b=8", "dataset=out/b8.json"]));
    let out = qganf(tmp.path(), &["predict", "--config", "run.cfg", "dataset=out/b8.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("b=4"), "{}", stderr(&out));
}

#[test]
fn simple_gan_learns_a_flat_series() {
    let tmp = TempDir::new().unwrap();
    // Two leading points pin the scaling to [50, 100]; the level 80 scales to 0.6.
    let s = synthetic_prices(1000, 1);
    let dates: Vec<String> = s.dates().iter().map(|d| d.to_string()).collect();
    let mut prices = vec![80.0; 1000];
    prices[0] = 50.0;
    prices[1] = 100.0;
    write_prices(&tmp.path().join("prices.csv"), &dates, &prices);
    config(
        tmp.path(),
        "input = prices.csv\nhp_lambda = 0\nb = 4\nf = 1\nkind = simple_gan\n\
         epochs = 20\nbatch_size = 8\nlr_g = 0.0002\nlr_d = 0.0002\nbeta1 = 0.5\nseed = 3\n",
    );
    for cmd in ["prepare", "train", "predict"] {
        ok(&qganf(tmp.path(), &[cmd, "--config", "run.cfg"]));
    }
    let (_, rows) = read_csv(&tmp.path().join("out/predictions.csv"));
    let test: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] == "test")
        .map(|r| r[3].parse().unwrap())
        .collect();
    assert!(!test.is_empty());
    let worst = test.iter().map(|p| ((p - 50.0) / 50.0 - 0.6).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05, "worst scaled error {worst}");
}

#[test]
fn evaluate_mirrors_metric_examples() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("p.csv"),
        "split,window,horizon,predicted,truth\ntest,0,0,1,2\ntest,1,0,2,2\ntest,2,0,3,2\n",
    )
    .unwrap();
    config(tmp.path(), "predictions = p.csv\n");
    ok(&qganf(tmp.path(), &["evaluate", "--config", "run.cfg"]));
    let m = json(&tmp.path().join("out/metrics.json"));
    assert!((m["test"]["rmse"].as_f64().unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!((m["test"]["mae"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!(m["test"]["r2"].is_null());
    assert_eq!(m["test"]["n_pairs"], 3);

    fs::write(tmp.path().join("p.csv"), "split,window,horizon,predicted\ntest,0,0,1\n").unwrap();
    let out = qganf(tmp.path(), &["evaluate", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("truth"));
}

#[test]
fn sweep_validation_and_repeatability() {
    let tmp = TempDir::new().unwrap();
    synthetic_csv(tmp.path(), 240);
    config(tmp.path(), "input = prices.csv\nkinds = fqgan,hybrid_qgan\nepochs = 1\nbatch_size = 64\n");
    let out = qganf(tmp.path(), &["sweep", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(2));

    let args = ["sweep", "--config", "run.cfg", "windows=4:2,4:1"];
    ok(&qganf(tmp.path(), &args));
    let first = fs::read(tmp.path().join("out/sweep.csv")).unwrap();
    ok(&qganf(tmp.path(), &args));
    assert_eq!(first, fs::read(tmp.path().join("out/sweep.csv")).unwrap());

    let (h, rows) = read_csv(&tmp.path().join("out/sweep.csv"));
    assert_eq!(h, ["kind", "b", "f", "split", "n_pairs", "rmse", "mae", "r2"]);
    // hybrid (4,2) and fqgan (4,1) are unsupported: 2 cells x 2 splits remain.
    assert_eq!(rows.len(), 4);
    let (_, failures) = read_csv(&tmp.path().join("out/sweep_failures.csv"));
    assert_eq!(failures.len(), 2);
    assert_eq!(json(&tmp.path().join("out/sweep.json"))["failures"].as_array().unwrap().len(), 2);
}

#[test]
fn resources_follow_the_ladder() {
    let tmp = TempDir::new().unwrap();
    config(tmp.path(), "windows = 4:2,8:4,16:8,32:16\nansatz_layers = 3\n");
    ok(&qganf(tmp.path(), &["resources", "--config", "run.cfg"]));
    let (h, rows) = read_csv(&tmp.path().join("out/resources.csv"));
    let col = |name: &str| -> Vec<usize> {
        let i = h.iter().position(|c| c == name).unwrap();
        rows.iter().map(|r| r[i].parse().unwrap()).collect()
    };
    assert_eq!(col("qubits"), [4, 6, 8, 10]);
    assert!(col("depth").windows(2).all(|w| w[0] < w[1]));
    let expect: Vec<usize> = col("b").iter().map(|&b| 3 * ceil_log2(b)).collect();
    assert_eq!(col("trainable_params"), expect);
}

#[test]
fn help_lists_config_keys() {
    let tmp = TempDir::new().unwrap();
    let out = qganf(tmp.path(), &["--help"]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    for key in ["hp_lambda", "split_ratio", "ansatz_layers", "windows", "Exit codes"] {
        assert!(text.contains(key), "{key}");
    }
}
