use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polysplit::experiments::{load_test_inputs, SizeCell};
use polysplit::io::{read_csv, read_json};
use polysplit::{ExperimentConfig, Mode};
use polysplit_core::adaptive::TestReport;
use polysplit_core::tdc_test;

fn polysplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polysplit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SIM: &str = r#"{
  "schema_version": 1,
  "mode": "simulate",
  "design": {
    "n_total": 120, "n_variants": 30, "rho": 0.3,
    "sparsity": {"count": 4}, "effect_size": 0.4,
    "family": "binomial-logit", "intercept": 0.0
  }
}"#;

fn simulate(dir: &Path) -> PathBuf {
    let cfg = write_config(dir, "sim.json", SIM);
    let data = dir.join("data");
    let out = polysplit(&["simulate", "--config", s(&cfg), "--seed", "7", "--out", s(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn missing_phenotype_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let out = polysplit(&["test", "--genotypes", s(&data.join("genotypes.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = polysplit(&[
        "test",
        "--genotypes",
        s(&data.join("genotypes.csv")),
        "--phenotype",
        s(&dir.path().join("nope.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"schema_version": 99, "mode": "test"}"#);
    let out = polysplit(&["test", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_test_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let report_path = dir.path().join("report.json");
    let out = polysplit(&[
        "test",
        "--genotypes",
        s(&data.join("genotypes.csv")),
        "--phenotype",
        s(&data.join("phenotype.csv")),
        "--family",
        "binomial",
        "--splits",
        "3",
        "--seed",
        "11",
        "--workers",
        "2",
        "--out",
        s(&report_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: TestReport = read_json(&report_path).unwrap();

    let mut cfg = ExperimentConfig::new(Mode::Test);
    cfg.data.genotypes = Some(data.join("genotypes.csv"));
    cfg.data.phenotype = Some(data.join("phenotype.csv"));
    cfg.test.splits = 3;
    cfg.test.master_seed = 11;
    let inputs = load_test_inputs(&cfg).unwrap();
    let lib = tdc_test(&inputs.y, &inputs.x, &inputs.g, &cfg.test).unwrap();

    assert_eq!(report.per_split.len(), 3);
    assert_eq!(report.p_dc, lib.p_dc);
    assert_eq!(report.t_dc, lib.t_dc);
    for (a, b) in report.per_split.iter().zip(&lib.per_split) {
        assert_eq!(a, b);
    }
}

#[test]
fn csv_report_has_one_row_per_split_plus_combined() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let out = polysplit(&[
        "test",
        "--genotypes",
        s(&data.join("genotypes.csv")),
        "--phenotype",
        s(&data.join("phenotype.csv")),
        "--splits",
        "4",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 4 + 1);
    assert!(lines[0].starts_with("split,"));
    assert!(lines[5].starts_with("combined"));
}

#[test]
fn size_table_round_trips_and_is_worker_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "size.json",
        r#"{
  "schema_version": 1,
  "mode": "calibrate",
  "design": {
    "n_total": 80, "n_variants": 6, "rho": 0.5,
    "sparsity": {"count": 0}, "effect_size": 0.0,
    "family": "binomial-logit", "intercept": 0.5
  },
  "test": {"splits": 2, "accuracy": 1e-5},
  "replicates": 6,
  "size_grid": {"rhos": [0.2], "n_variants": [5, 8]}
}"#,
    );
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        for format in ["json", "csv"] {
            let path = dir.path().join(format!("size-{workers}.{format}"));
            let out = polysplit(&[
                "calibrate", "--config", s(&cfg), "--seed", "5", "--workers", workers, "--format", format, "--out",
                s(&path),
            ]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            outputs.push(std::fs::read(&path).unwrap());
        }
    }
    assert_eq!(outputs[0], outputs[2]);
    assert_eq!(outputs[1], outputs[3]);

    let table: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
    let rows: Vec<SizeCell> = read_csv(&dir.path().join("size-1.csv")).unwrap();
    let cells = table["cells"].as_array().unwrap();
    assert_eq!(rows.len(), cells.len());
    assert_eq!(rows.len(), 2 * 2); // two J values × two alpha levels
    for (row, cell) in rows.iter().zip(cells) {
        let back: SizeCell = serde_json::from_value(cell.clone()).unwrap();
        assert_eq!(*row, back);
        assert_eq!(row.replicates, 6);
        assert!(row.rejections <= row.replicates);
    }
}

#[test]
fn simulate_writes_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let g = polysplit::io::read_genotypes(&data.join("genotypes.csv")).unwrap();
    let y = polysplit::io::read_phenotype(&data.join("phenotype.csv")).unwrap();
    assert_eq!(g.n_variants(), 30);
    assert_eq!(y.len(), 120);
    assert!(y.iter().all(|&v| v == 0.0 || v == 1.0));
    let truth: serde_json::Value = read_json(&data.join("truth.json")).unwrap();
    assert_eq!(truth["support"].as_array().unwrap().len(), 4);
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 6);
}
