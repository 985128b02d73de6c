use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const QUICK: &str = r#"
dataset = "synthetic"
generation_count = 24
surrogate_hidden = [16, 16]
surrogate_epochs = 3
cvae_hidden = [16, 16]
cvae_epochs = 3
"#;

fn genforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> (tempfile::TempDir, String, String) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("campaign.toml");
    fs::write(&config, QUICK).unwrap();
    let out = dir.path().join("out");
    (
        dir,
        config.to_string_lossy().into_owned(),
        out.to_string_lossy().into_owned(),
    )
}

fn run_ok(args: &[&str]) -> String {
    let o = genforge(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(genforge(&[]).status.code(), Some(1));
    assert_eq!(genforge(&["bogus"]).status.code(), Some(1));
    assert_eq!(genforge(&["ingest"]).status.code(), Some(1));
    let (dir, _, out) = setup();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "generation_count = 0\ndataset = \"synthetic\"\n").unwrap();
    let o = genforge(&["ingest", "--config", bad.to_str().unwrap(), "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(genforge(&["--help"]).status.success());
}

#[test]
fn generate_without_checkpoint_is_a_stage_failure() {
    let (_dir, config, out) = setup();
    run_ok(&["ingest", "--config", &config, "--out", &out]);
    let o = genforge(&["generate", "--config", &config, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("train-cvae"), "{err}");
}

#[test]
fn missing_dataset_file_is_a_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "dataset = \"nowhere.dat\"\n").unwrap();
    let o = genforge(&["ingest", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ingest"));
}

fn staged(config: &str, out: &str) {
    for stage in [
        "ingest",
        "train-surrogate",
        "sbo",
        "train-cvae",
        "generate",
        "evaluate",
    ] {
        run_ok(&[stage, "--config", config, "--out", out, "--seed", "5"]);
    }
    run_ok(&[
        "report", "--config", config, "--out", out, "--seed", "5", "--verify",
    ]);
}

#[test]
fn staged_commands_match_single_run() {
    let (dir, config, out) = setup();
    staged(&config, &out);
    let single = dir.path().join("single");
    let single = single.to_str().unwrap();
    let text = run_ok(&[
        "run", "--config", &config, "--out", single, "--seed", "5", "--verify",
    ]);
    assert!(text.contains("report verified"));
    let read = |d: &str, f: &str| fs::read(Path::new(d).join(f)).unwrap();
    let a = String::from_utf8(read(&out, "report.json")).unwrap();
    let b = String::from_utf8(read(single, "report.json")).unwrap();
    // the echoed output directory is the only difference
    assert_eq!(a.replace(&out, "<out>"), b.replace(single, "<out>"));
    for f in [
        "portfolio.tsv",
        "evaluation.tsv",
        "oracle.json",
        "sbo.json",
        "cvae.json",
    ] {
        assert_eq!(read(&out, f), read(single, f), "{f}");
    }
}

#[test]
fn evaluate_and_score_a_hand_written_table() {
    let (dir, config, out) = setup();
    for stage in ["ingest", "train-surrogate"] {
        run_ok(&[stage, "--config", &config, "--out", &out]);
    }
    let table = dir.path().join("three.tsv");
    fs::write(
        &table,
        "# three designs\n\
         800\t0\t0.3048\t71.3\t0.00266337\t115\n\
         2000\t4.2\t0.1016\t39.6\t0.005\t115\n\
         1000000\t0\t0.3048\t71.3\t0.00266337\t115\n",
    )
    .unwrap();
    let table = table.to_str().unwrap();
    let text = run_ok(&[
        "evaluate",
        "--config",
        &config,
        "--out",
        &out,
        "--designs",
        table,
    ]);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][5], "1");
    assert_eq!(rows[1][5], "1");
    assert_eq!(rows[2][5], "0");
    assert_eq!(rows[2][6], "frequency_hz");
    for r in &rows {
        assert!(r[7].parse::<f64>().unwrap().is_finite());
    }
    let scored = run_ok(&[
        "score",
        "--config",
        &config,
        "--out",
        &out,
        "--designs",
        table,
    ]);
    let scored: Vec<Vec<&str>> = scored.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(scored.len(), 3);
    for (s, r) in scored.iter().zip(&rows) {
        assert_eq!(s.len(), 7);
        assert_eq!(s[6], r[7]);
    }
}
