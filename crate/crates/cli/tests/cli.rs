use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wavegain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavegain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes a CIFAR-10 layout with `per_file` noise images per file and
/// labels cycling through the classes.
fn fake_cifar10(dir: &Path, per_file: usize) {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let files = [
        "data_batch_1.bin",
        "data_batch_2.bin",
        "data_batch_3.bin",
        "data_batch_4.bin",
        "data_batch_5.bin",
        "test_batch.bin",
    ];
    for name in files {
        let mut bytes = Vec::with_capacity(per_file * 3073);
        for i in 0..per_file {
            bytes.push((i % 10) as u8);
            for _ in 0..3072 {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                bytes.push((state >> 56) as u8);
            }
        }
        fs::write(dir.join(name), bytes).unwrap();
    }
}

#[test]
fn selftest_passes_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = wavegain(&[
        "selftest",
        "--trials",
        "2",
        "--json",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(printed
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == true));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["trials"], 2);
    assert!(manifest["version"]
        .as_str()
        .unwrap()
        .starts_with(env!("CARGO_PKG_VERSION")));
}

#[test]
fn corrupted_filters_fail_the_selftest() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavegain(&[
        "selftest",
        "--trials",
        "1",
        "--inject-fault",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("perfect reconstruction"));
}

#[test]
fn gradcheck_covers_both_layers() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavegain(&[
        "gradcheck",
        "--layer",
        "conv2d",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("gradcheck.json"));
    assert!(report["worst_rel_err"].as_f64().unwrap() <= 1e-6);
    let suites: Vec<&str> = report["finite_difference"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["suite"].as_str().unwrap())
        .collect();
    assert!(suites.contains(&"wavegain") && suites.contains(&"conv2d"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("from-file");
    fs::write(
        &cfg,
        format!(
            r#"{{"num_shapes": 5, "bins": 7, "out_dir": {:?}}}"#,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = wavegain(&[
        "corrdof",
        "--config",
        cfg.to_str().unwrap(),
        "--num-shapes",
        "6",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["num_shapes"], 6);
    assert_eq!(manifest["config"]["bins"], 7);
    assert_eq!(
        fs::read_to_string(out.join("corr_hist.csv"))
            .unwrap()
            .lines()
            .count(),
        8
    );

    fs::write(&cfg, r#"{"num_shape": 5}"#).unwrap();
    assert_eq!(
        code(&wavegain(&["corrdof", "--config", cfg.to_str().unwrap()])),
        2
    );
    assert_eq!(
        code(&wavegain(&["corrdof", "--config", "/nonexistent/cfg.json"])),
        4
    );
    assert_eq!(code(&wavegain(&["corrdof", "--bogus-flag"])), 2);
}

#[test]
fn synthetic_corrdof_recovers_the_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavegain(&[
        "corrdof",
        "--synthetic-dim",
        "12",
        "--num-shapes",
        "1500",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let est = json(&dir.path().join("corrdof.json"));
    assert!((est["dof"].as_f64().unwrap() - 12.0).abs() < 0.5, "{est}");
}

#[test]
fn impulse_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = wavegain(&[
            "impulse",
            "--num-shapes",
            "3",
            "--size",
            "33",
            "--seed",
            "4",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["impulses.npy", "energy.csv", "shapes/shape_002.pgm"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let manifest = json(&a.join("manifest.json"));
    let gains = manifest["scale2_gains"].as_array().unwrap();
    assert_eq!(gains.len(), 3);
    assert_eq!(
        gains[0]["re"].as_array().unwrap().len() + gains[0]["im"].as_array().unwrap().len(),
        12
    );
    let pgm = fs::read(a.join("shapes/shape_000.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n33 33\n255\n"));
    assert_eq!(pgm.len(), 13 + 33 * 33);
}

#[test]
fn bench_overhead_does_not_grow_with_filters() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavegain(&[
        "bench",
        "--channels",
        "2",
        "--filters",
        "1,8",
        "--size",
        "16",
        "--batch",
        "1",
        "--repeats",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][3], rows[1][3]);
    assert_eq!(rows[0][3], "56");
    assert_eq!(rows[1][7], "200");
}

#[test]
fn train_then_eval_reproduces_the_logged_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    fake_cifar10(&data, 200);
    let out = dir.path().join("train");
    let o = wavegain(&[
        "train",
        "--model",
        "wavelenet",
        "--data-dir",
        data.to_str().unwrap(),
        "--train-size",
        "1000",
        "--epochs",
        "1",
        "--val-size",
        "60",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let agg = json(&out.join("aggregate.json"));
    let logged = agg["final_val_acc"][0].as_f64().unwrap();
    assert_eq!(
        fs::read_to_string(out.join("seed_0/metrics.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );

    let ev = dir.path().join("eval");
    let o = wavegain(&[
        "eval",
        "--checkpoint",
        out.join("seed_0/checkpoint").to_str().unwrap(),
        "--data-dir",
        data.to_str().unwrap(),
        "--batch-size",
        "7",
        "--out-dir",
        ev.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&ev.join("eval.json"));
    assert_eq!(report["accuracy"].as_f64().unwrap(), logged);
    assert_eq!(report["reproduced"], true);
}

#[test]
fn train_rejects_bad_settings_and_missing_data() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().to_str().unwrap();
    let o = wavegain(&[
        "train",
        "--train-size",
        "1234",
        "--data-dir",
        empty,
        "--out-dir",
        empty,
    ]);
    assert_eq!(code(&o), 2);
    let o = wavegain(&[
        "train",
        "--model",
        "resnet",
        "--data-dir",
        empty,
        "--out-dir",
        empty,
    ]);
    assert_eq!(code(&o), 2);
    let o = wavegain(&[
        "train",
        "--download-check",
        "--data-dir",
        empty,
        "--out-dir",
        empty,
    ]);
    assert_eq!(code(&o), 4);
    let o = wavegain(&["train", "--data-dir", empty, "--out-dir", empty]);
    assert_eq!(code(&o), 4);
}
