//! End-to-end checks of the `tailgame` binary: exit codes, artifact files,
//! determinism, and the documented failure modes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tailgame"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, value: Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path
}

fn synthetic_config(out_dir: &Path) -> Value {
    json!({
        "data": { "synthetic": {
            "num_labels": 20, "feature_dim": 10, "num_samples": 500,
            "power_exponent": 1.2, "base_prevalence": 0.5,
            "labels_correlated_with_features": true, "noise_rate": 0.0
        } },
        "split_ratios": [0.8, 0.1, 0.1],
        "train": {
            "n_players": 3, "rho": 0.2, "epochs": 4, "batch_size": 32,
            "learning_rate": 0.05
        },
        "out_dir": out_dir,
        "seed": 7
    })
}

/// Config whose data source is the three files a `generate` run wrote.
fn sparse_config(data_dir: &Path, out_dir: &Path, epochs: u64) -> Value {
    json!({
        "data": { "sparse": {
            "train": data_dir.join("train.txt"),
            "val": data_dir.join("val.txt"),
            "test": data_dir.join("test.txt")
        } },
        "train": {
            "n_players": 3, "rho": 0.2, "epochs": epochs, "batch_size": 32,
            "learning_rate": 0.05
        },
        "out_dir": out_dir,
        "seed": 7
    })
}

#[test]
fn generate_writes_files_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("data");
    let config = write_config(tmp.path(), "config.json", synthetic_config(&out));

    let result = run(&["generate", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 0, "{}", stderr(&result));
    for name in ["train.txt", "val.txt", "test.txt", "manifest.json"] {
        assert!(out.join(name).exists(), "missing {name}");
    }

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["split_sizes"]["train"], 400);
    assert_eq!(manifest["split_sizes"]["val"], 50);
    assert_eq!(manifest["split_sizes"]["test"], 50);
    assert_eq!(manifest["per_label_counts"]["train"].as_array().unwrap().len(), 20);
    assert_eq!(manifest["spec"]["num_labels"], 20);
}

#[test]
fn generate_is_byte_deterministic_and_seed_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let out_c = tmp.path().join("c");
    let config = write_config(tmp.path(), "config.json", synthetic_config(Path::new("unused")));
    let config = config.to_str().unwrap();

    assert_eq!(exit_code(&run(&["generate", "--config", config, "--out", out_a.to_str().unwrap()])), 0);
    assert_eq!(exit_code(&run(&["generate", "--config", config, "--out", out_b.to_str().unwrap()])), 0);
    assert_eq!(
        exit_code(&run(&[
            "generate", "--config", config,
            "--out", out_c.to_str().unwrap(),
            "--seed", "8"
        ])),
        0
    );

    for name in ["train.txt", "val.txt", "test.txt", "manifest.json"] {
        assert_eq!(
            fs::read(out_a.join(name)).unwrap(),
            fs::read(out_b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    assert_ne!(
        fs::read(out_a.join("train.txt")).unwrap(),
        fs::read(out_c.join("train.txt")).unwrap(),
        "seed override changed nothing"
    );
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = synthetic_config(tmp.path());
    config["train"]["learning_rte"] = json!(0.1);
    let path = write_config(tmp.path(), "config.json", config);

    let result = run(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 2);
    assert!(stderr(&result).contains("learning_rte"), "{}", stderr(&result));
}

#[test]
fn train_on_generated_files_writes_artifacts_and_prints_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let gen_config = write_config(tmp.path(), "gen.json", synthetic_config(&data));
    assert_eq!(exit_code(&run(&["generate", "--config", gen_config.to_str().unwrap()])), 0);

    let run_a = tmp.path().join("run_a");
    let run_b = tmp.path().join("run_b");
    let train_config =
        write_config(tmp.path(), "train.json", sparse_config(&data, Path::new("unused"), 4));
    let train_config = train_config.to_str().unwrap();

    let first = run(&["train", "--config", train_config, "--out", run_a.to_str().unwrap()]);
    assert_eq!(exit_code(&first), 0, "{}", stderr(&first));
    for name in ["checkpoint.json", "diagnostics.jsonl", "trace_summary.json", "metrics.json"] {
        assert!(run_a.join(name).exists(), "missing {name}");
    }
    let printed = stdout(&first);
    assert!(printed.contains("rare_f1 "), "{printed}");
    assert!(printed.contains("micro_f1 "), "{printed}");

    let metrics: Value =
        serde_json::from_str(&fs::read_to_string(run_a.join("metrics.json")).unwrap()).unwrap();
    let rare = metrics["rare_f1"].as_f64().unwrap();
    let micro = metrics["micro_f1"].as_f64().unwrap();
    assert!(printed.contains(&format!("rare_f1 {rare}")), "{printed}");
    assert!(printed.contains(&format!("micro_f1 {micro}")), "{printed}");

    // Each diagnostics line parses on its own.
    let lines: Vec<Value> = fs::read_to_string(run_a.join("diagnostics.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["epoch"], 1);

    let second = run(&["train", "--config", train_config, "--out", run_b.to_str().unwrap()]);
    assert_eq!(exit_code(&second), 0);
    for name in ["checkpoint.json", "diagnostics.jsonl", "metrics.json"] {
        assert_eq!(
            fs::read(run_a.join(name)).unwrap(),
            fs::read(run_b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    assert_eq!(stdout(&second), printed);
}

#[test]
fn train_with_missing_data_file_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "config.json",
        sparse_config(&tmp.path().join("nowhere"), &tmp.path().join("out"), 2),
    );
    let result = run(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 2);
    assert!(stderr(&result).contains("train.txt"), "{}", stderr(&result));
}

#[test]
fn numerical_divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // One feature at 10 and a huge sgd step overflow the first update.
    let data = tmp.path().join("data.txt");
    fs::write(&data, "4 1 1\n0 0:10.0\n 0:10.0\n0 0:10.0\n 0:10.0\n").unwrap();
    let config = write_config(
        tmp.path(),
        "config.json",
        json!({
            "data": { "sparse": { "train": data, "val": data, "test": data } },
            "train": {
                "n_players": 1, "rho": 0.0, "epochs": 1, "batch_size": 1,
                "learning_rate": 1e308, "optimizer": "sgd",
                "surrogate": { "kind": "neg_bce" },
                "metrics": { "ks": [1] }
            },
            "out_dir": tmp.path().join("out"),
            "seed": 0
        }),
    );
    let result = run(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 3, "{}", stderr(&result));
    assert!(stderr(&result).contains("divergence"), "{}", stderr(&result));
}

#[test]
fn eval_reports_metrics_and_ranks_and_rejects_dimension_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let gen_config = write_config(tmp.path(), "gen.json", synthetic_config(&data));
    assert_eq!(exit_code(&run(&["generate", "--config", gen_config.to_str().unwrap()])), 0);

    let run_dir = tmp.path().join("run");
    let train_config = write_config(tmp.path(), "train.json", sparse_config(&data, &run_dir, 4));
    let train_config = train_config.to_str().unwrap();
    assert_eq!(exit_code(&run(&["train", "--config", train_config])), 0);

    let checkpoint = run_dir.join("checkpoint.json");
    let test_file = data.join("test.txt");
    let result = run(&[
        "eval",
        "--config", train_config,
        "--checkpoint", checkpoint.to_str().unwrap(),
        "--data", test_file.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&result), 0, "{}", stderr(&result));
    let report: Value = serde_json::from_str(&stdout(&result)).unwrap();
    assert!(report["metrics"]["micro_f1"].is_f64());
    assert_eq!(report["specialization"]["head"].as_array().unwrap().len(), 3);
    assert_eq!(report["specialization"]["tail"].as_array().unwrap().len(), 3);

    // Same labels, wrong feature width.
    let narrow = tmp.path().join("narrow.txt");
    fs::write(&narrow, "1 5 20\n0 0:1.0\n").unwrap();
    let mismatch = run(&[
        "eval",
        "--config", train_config,
        "--checkpoint", checkpoint.to_str().unwrap(),
        "--data", narrow.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&mismatch), 2);
    assert!(stderr(&mismatch).contains("features"), "{}", stderr(&mismatch));
}

#[test]
fn eval_with_one_player_ranks_1_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let gen_config = write_config(tmp.path(), "gen.json", synthetic_config(&data));
    assert_eq!(exit_code(&run(&["generate", "--config", gen_config.to_str().unwrap()])), 0);

    let run_dir = tmp.path().join("run");
    let mut config = sparse_config(&data, &run_dir, 3);
    config["train"]["n_players"] = json!(1);
    config["train"]["rho"] = json!(0.0);
    let config = write_config(tmp.path(), "train.json", config);
    let config = config.to_str().unwrap();
    assert_eq!(exit_code(&run(&["train", "--config", config])), 0);

    let result = run(&[
        "eval",
        "--config", config,
        "--checkpoint", run_dir.join("checkpoint.json").to_str().unwrap(),
        "--data", data.join("test.txt").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&result), 0, "{}", stderr(&result));
    let report: Value = serde_json::from_str(&stdout(&result)).unwrap();
    for side in ["head", "tail"] {
        let rows = report["specialization"][side].as_array().unwrap();
        assert_eq!(rows.len(), 1, "{side}");
        assert_eq!(rows[0]["rank"], 1, "{side}");
    }
}

#[test]
fn ablate_emits_three_rows_with_alpha_zero_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut config = synthetic_config(&out);
    config["train"]["epochs"] = json!(2);
    config["seeds"] = json!([0, 1]);
    let config = write_config(tmp.path(), "config.json", config);

    let result = run(&["ablate", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 0, "{}", stderr(&result));

    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let names: Vec<&str> = rows.iter().map(|r| r["variant"].as_str().unwrap()).collect();
    assert_eq!(names, ["full", "no_curiosity", "single_predictor"]);
    assert_eq!(rows[1]["config"]["curiosity"]["alpha"], 0.0);
    assert_eq!(rows[2]["config"]["n_players"], 1);
    for row in rows {
        assert_eq!(row["runs"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn sweep_isolates_invalid_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut config = synthetic_config(&out);
    config["train"]["epochs"] = json!(2);
    let config = write_config(tmp.path(), "config.json", config);

    let result = run(&[
        "sweep",
        "--config", config.to_str().unwrap(),
        "--parameter", "n_players",
        "--values", "2,80",
    ]);
    assert_eq!(exit_code(&result), 0, "{}", stderr(&result));

    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["parameter"], "n_players");
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["error"].is_null());
    assert!(rows[0]["mean_rare_f1"].is_f64());
    assert!(rows[1]["error"].as_str().unwrap().contains("80"), "{}", rows[1]["error"]);

    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("parameter,value,seed,rare_f1,micro_f1,error\n"), "{csv}");
    assert!(csv.contains("n_players,2,7,"), "{csv}");
    assert!(csv.contains("n_players,80,,,,"), "{csv}");
}

#[test]
fn inspect_partition_prints_the_blocks() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "config.json", synthetic_config(tmp.path()));

    let result = run(&["inspect-partition", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 0, "{}", stderr(&result));
    let report: Value = serde_json::from_str(&stdout(&result)).unwrap();
    assert_eq!(report["n_players"], 3);
    assert_eq!(report["num_labels"], 20);
    let mut covered: Vec<usize> = report["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|b| b.as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize))
        .collect();
    covered.sort_unstable();
    covered.dedup();
    assert_eq!(covered, (0..20).collect::<Vec<_>>());
}

#[test]
fn missing_output_dir_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = synthetic_config(tmp.path());
    config.as_object_mut().unwrap().remove("out_dir");
    let path = write_config(tmp.path(), "config.json", config);

    let result = run(&["generate", "--config", path.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 2);
    assert!(stderr(&result).contains("output directory"), "{}", stderr(&result));
}
