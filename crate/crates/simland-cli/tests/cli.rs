//! Drives the built binary end to end: bench output files, the
//! train/predict/eval round trip, and the documented exit codes.

use std::path::Path;
use std::process::Command;

fn simland() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simland"))
}

fn write_dataset(path: &Path, n: usize) {
    let mut rows = String::new();
    let mut state = 0x2545f4914f6cdd1du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for _ in 0..n {
        let a = next();
        let b = next();
        let y = (0.7 * a - 0.4 * b).tanh() * 0.5 + 0.5;
        rows.push_str(&format!("{a},{b},{y}\n"));
    }
    std::fs::write(path, rows).unwrap();
}

#[test]
fn bench_writes_deterministic_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synth.csv");
    write_dataset(&data, 40);
    let config = dir.path().join("cfg.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"dataset":"{}","kernel":"gaussian","methods":["kr","regland"],"landmarks":[4,8],"num_splits":2,"iters":80,"seed":5}}"#,
            data.display()
        ),
    )
    .unwrap();

    let out1 = dir.path().join("records1.csv");
    let out2 = dir.path().join("records2.csv");
    let summary = dir.path().join("summary.csv");
    for (out, with_summary) in [(&out1, true), (&out2, false)] {
        let mut cmd = simland();
        cmd.args(["bench", "--config"]).arg(&config).arg("--out").arg(out);
        if with_summary {
            cmd.arg("--summary").arg(&summary);
        }
        let status = cmd.status().unwrap();
        assert!(status.success());
    }
    let a = std::fs::read_to_string(&out1).unwrap();
    let b = std::fs::read_to_string(&out2).unwrap();
    assert_eq!(a, b, "bench output is not reproducible");
    assert!(a.starts_with("dataset,kernel,method,landmarks,split,metric,value\n"));
    assert_eq!(a.lines().count(), 1 + 2 * 2 * 2);

    let s = std::fs::read_to_string(&summary).unwrap();
    assert!(s.starts_with("dataset,kernel,method,landmarks,n,mean,std\n"));
    assert_eq!(s.lines().count(), 1 + 4);

    // plotdata format emits one block per method curve
    let plot = dir.path().join("curves.dat");
    let status = simland()
        .args(["bench", "--config"])
        .arg(&config)
        .args(["--format", "plotdata", "--out"])
        .arg(&plot)
        .status()
        .unwrap();
    assert!(status.success());
    let p = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(p.matches('#').count(), 2);
    assert_eq!(p.split("\n\n").count(), 2);
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_dataset(&data, 60);
    let config = dir.path().join("cfg.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"dataset":"{}","kernel":"gaussian","methods":["regland"],"landmarks":[10],"iters":400,"seed":9}}"#,
            data.display()
        ),
    )
    .unwrap();

    let model = dir.path().join("model.txt");
    let status = simland().args(["train", "--config"]).arg(&config).arg("--out").arg(&model).status().unwrap();
    assert!(status.success());
    assert!(model.exists());
    let header = std::fs::read_to_string(&model).unwrap();
    assert!(header.starts_with("simland-linear v1 d=10 B=10 eps=0.01\n"), "header was {header:.60}");
    assert!(dir.path().join("model.txt.pipeline.json").exists());

    let features = dir.path().join("query.csv");
    std::fs::write(&features, "0.1,-0.2\n0.5,0.3\n").unwrap();
    let preds_path = dir.path().join("preds.txt");
    let status = simland()
        .args(["predict", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&features)
        .arg("--out")
        .arg(&preds_path)
        .status()
        .unwrap();
    assert!(status.success());
    let preds = std::fs::read_to_string(&preds_path).unwrap();
    assert_eq!(preds.lines().count(), 2);
    for line in preds.lines() {
        let v: f64 = line.parse().unwrap();
        assert!(v.is_finite());
    }

    let output = simland().args(["eval", "--model"]).arg(&model).arg("--data").arg(&data).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let mse_line = text.lines().find(|l| l.starts_with("mse ")).expect("mse line");
    let value: f64 = mse_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((0.0..0.05).contains(&value), "training-set mse unexpectedly high: {value}");
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();

    // missing config file: data/io error
    let status = simland().args(["bench", "--config", "/no/such/config.json"]).status().unwrap();
    assert_eq!(status.code(), Some(2));

    // malformed config: config error
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"dataset":"x.csv","no_such_key":true}"#).unwrap();
    let status = simland().args(["bench", "--config"]).arg(&config).status().unwrap();
    assert_eq!(status.code(), Some(1));

    // config that validates but points at a broken dataset: data error
    let data = dir.path().join("ragged.csv");
    std::fs::write(&data, "1,2,3\n4,5\n").unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, format!(r#"{{"dataset":"{}","landmarks":[2],"num_splits":1}}"#, data.display())).unwrap();
    let status = simland().args(["bench", "--config"]).arg(&config).status().unwrap();
    assert_eq!(status.code(), Some(2));

    // incompatible method for the task: config error
    let config = dir.path().join("cfg2.json");
    std::fs::write(&config, format!(r#"{{"dataset":"{}","methods":["orland"]}}"#, data.display())).unwrap();
    let status = simland().args(["bench", "--config"]).arg(&config).status().unwrap();
    assert_eq!(status.code(), Some(1));
}
