use std::path::Path;
use std::process::{Command, Output};

fn gplr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gplr"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn gplr")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_eval_and_plots_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for method in ["dr", "samplr"] {
        let out = root.join(method);
        let o = gplr(&[
            "train", "--env", "fruitrooms", "--method", method, "--seed", "3", "--steps", "4096", "--out", path(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let run = out.join("seed_3");
        for f in ["metrics.jsonl", "checkpoint.bin", "config.toml", "eval.json"] {
            assert!(run.join(f).is_file(), "missing {f}");
        }
        assert_eq!(run.join("buffer.tsv").is_file(), method == "samplr");
    }

    let run = root.join("samplr").join("seed_3");
    let o = gplr(&[
        "eval",
        "--config",
        path(&run.join("config.toml")),
        "--checkpoint",
        path(&run.join("checkpoint.bin")),
        "--out",
        path(&root.join("re-eval")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fresh = std::fs::read(root.join("re-eval").join("eval.json")).unwrap();
    let original = std::fs::read(run.join("eval.json")).unwrap();
    assert_eq!(fresh, original, "re-evaluating the final checkpoint reproduces eval.json");

    let o = gplr(&["plots", "--out", path(root)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(root.join("plots").join("training_return.csv")).unwrap();
    assert!(table.starts_with("step,mean,stderr,method,seeds"));
    assert!(table.contains(",samplr,") && table.contains(",dr,"));
}

#[test]
fn oracle_reports_the_exact_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = gplr(&["oracle", "--env", "fruitrooms", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert!((v["indifference_point"].as_f64().unwrap() - 10.0 / 13.0).abs() < 1e-12);
    assert!((v["choice_instance"]["v_star"].as_f64().unwrap() - 3.0).abs() < 1e-9);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "env = \"fruitrooms\"\ngamma = 1.5\n").unwrap();
    let o = gplr(&["train", "--config", path(&bad), "--out", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = gplr(&["train", "--config", path(&dir.path().join("absent.toml"))]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(&bad, "env = \"fruitrooms\"\nunknown_key = 1\n").unwrap();
    let o = gplr(&["train", "--config", path(&bad), "--out", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
}
