use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn alp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alp"))
        .args(args)
        .output()
        .unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_small_dataset_creates_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nested/out");
    let start = Instant::now();
    let o = alp(&["generate", "--out", &out_arg(&out), "--set", "synth.n=10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(start.elapsed() < Duration::from_secs(1));
    for f in [
        "source.edges",
        "source.attrs.csv",
        "target.edges",
        "target.attrs.csv",
        "anchors.txt",
        "config.json",
        "diagnostics.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(
        std::fs::read_to_string(out.join("anchors.txt"))
            .unwrap()
            .lines()
            .count(),
        5
    );
}

#[test]
fn zero_candidates_gives_perfect_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let o = alp(&[
        "evaluate",
        "--out",
        &out_arg(tmp.path()),
        "--set",
        "synth.n=60",
        "--set",
        "train.epochs=2",
        "--set",
        "eval.candidates=0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("metrics.json")).unwrap())
            .unwrap();
    for method in ["model", "ac"] {
        for key in ["mrr", "hits1", "hits10"] {
            assert_eq!(m["results"][0][method][key], 1.0, "{method}.{key}");
        }
    }
}

#[test]
fn resume_continues_loss_history() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    let common = [
        "--out",
        &out,
        "--set",
        "synth.n=80",
        "--set",
        "train.early_stop_window=0",
    ];
    let first = alp(&[&["train", "--set", "train.epochs=3"][..], &common].concat());
    assert!(first.status.success(), "{}", stderr(&first));
    let before = std::fs::read_to_string(tmp.path().join("loss.csv")).unwrap();
    let second = alp(&[
        &["train", "--resume", "--set", "train.epochs=5"][..],
        &common,
    ]
    .concat());
    assert!(second.status.success(), "{}", stderr(&second));
    let after = std::fs::read_to_string(tmp.path().join("loss.csv")).unwrap();
    assert!(after.starts_with(&before));
    let epochs: Vec<&str> = after
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(epochs, ["1", "2", "3", "4", "5"]);
}

#[test]
fn export_embeddings_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    let base = [
        "--out",
        &out,
        "--set",
        "synth.n=40",
        "--set",
        "train.epochs=1",
        "--set",
        "train.embed_dim=8",
    ];
    assert!(alp(&[&["train"][..], &base].concat()).status.success());
    let pairs = tmp.path().join("pairs.txt");
    std::fs::write(&pairs, "0 1\n2 3\n5 5\n").unwrap();
    let model = tmp.path().join("model.json");
    let o = alp(&[
        &[
            "export-embeddings",
            "--checkpoint",
            model.to_str().unwrap(),
            "--pairs",
            pairs.to_str().unwrap(),
        ][..],
        &base,
    ]
    .concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("embeddings.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == 8 + 2));
    assert_eq!(&rows[1][..2], ["2", "3"]);
}

#[test]
fn out_of_range_pair_reports_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    let base = [
        "--out",
        &out,
        "--set",
        "synth.n=20",
        "--set",
        "train.epochs=1",
    ];
    assert!(alp(&[&["train"][..], &base].concat()).status.success());
    let pairs = tmp.path().join("pairs.txt");
    std::fs::write(&pairs, "0 0\n1 1\n0 999\n").unwrap();
    let model = tmp.path().join("model.json");
    let o = alp(&[
        &[
            "export-embeddings",
            "--checkpoint",
            model.to_str().unwrap(),
            "--pairs",
            pairs.to_str().unwrap(),
        ][..],
        &base,
    ]
    .concat());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pairs.txt:3"), "{}", stderr(&o));
}

#[test]
fn single_size_benchmark_writes_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let o = alp(&[
        "benchmark",
        "--out",
        &out_arg(tmp.path()),
        "--set",
        "benchmark.sizes=[500]",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("benchmark.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "node_size,per_batch_ms,train_s,test_s,hop1_fanout,hop2_fanout"
    );
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("500,"));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(tmp.path());
    assert_eq!(alp(&["generate", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        alp(&["generate", "--out", &out, "--set", "synth.nope=1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        alp(&["generate", "--out", &out, "--preset", "nowhere"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        alp(&["train", "--out", &out, "--ratio", "0.5,0.8"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(alp(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_data_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = alp(&[
        "train",
        "--out",
        &out_arg(tmp.path()),
        "--data",
        tmp.path().join("absent").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn data_dir_with_categorical_column() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    let ring = "0 1\n1 2\n2 3\n3 0\n";
    std::fs::write(data.join("source.edges"), ring).unwrap();
    std::fs::write(data.join("target.edges"), ring).unwrap();
    std::fs::write(
        data.join("source.attrs.csv"),
        "0.1,m\n0.2,f\n0.3,m\n0.4,f\n",
    )
    .unwrap();
    std::fs::write(
        data.join("target.attrs.csv"),
        "0.1,m\n0.2,x\n0.3,m\n0.4,f\n",
    )
    .unwrap();
    std::fs::write(data.join("anchors.txt"), "0 0\n1 1\n2 2\n").unwrap();
    let o = alp(&[
        "train",
        "--out",
        &out_arg(&tmp.path().join("out")),
        "--data",
        data.to_str().unwrap(),
        "--theta",
        "hadamard",
        "--set",
        "categorical_columns=[1]",
        "--set",
        "train.epochs=1",
        "--ratio",
        "0.67",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/model.json")).unwrap())
            .unwrap();
    assert_eq!(model["model"]["input_dim"], 4);
}
