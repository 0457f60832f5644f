use scatlab::cli::catalog::{Kind, ALL};
use scatlab::cli::config::ExperimentConfig;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).env("LAB_THREADS", "2").output().unwrap()
}

fn run(dir: &Path, kind: &str, toml: &str, out: &str) -> (i32, Value) {
    let cfg = dir.join(format!("{out}.toml"));
    std::fs::write(&cfg, toml).unwrap();
    let out = dir.join(out);
    let o = lab(&[kind, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let record = std::fs::read_to_string(out.join("record.json")).map(|s| serde_json::from_str(&s).unwrap()).unwrap_or(Value::Null);
    (o.status.code().unwrap(), record)
}

const SMATRIX: &str = r#"kind = "smatrix"
[smatrix]
n = 2
perturbation = { kind = "square_well", depth = 6.0, width = 2.0 }
lambda_min = 0.1
lambda_max = 4.0
lambda_points = 20
"#;

#[test]
fn successful_run_lists_every_artifact_with_its_digest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, record) = run(dir.path(), "smatrix", SMATRIX, "s");
    assert_eq!(code, 0, "{record}");
    assert_eq!(record["exit_code"], 0);
    assert_eq!(record["schema_version"], 1);
    let artifacts = record["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    let on_disk: Vec<String> =
        std::fs::read_dir(dir.path().join("s")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).filter(|f| f != "record.json").collect();
    assert_eq!(on_disk.len(), artifacts.len());
    for a in artifacts {
        let bytes = std::fs::read(dir.path().join("s").join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    let csv = std::fs::read_to_string(dir.path().join("s/smatrix.csv")).unwrap();
    assert!(csv.starts_with("lambda,delta,s_re,s_im,abs_s,oracle_delta\n"));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn identical_configs_reproduce_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "kind = \"equiv-check\"\nseed = 5\n[equiv-check]\ntriples = 4\nk = 1\npoints = 60\n";
    let (c1, r1) = run(dir.path(), "equiv-check", cfg, "a");
    let (c2, r2) = run(dir.path(), "equiv-check", cfg, "b");
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(r1["artifacts"], r2["artifacts"]);
    assert_eq!(r1["checks"], r2["checks"]);
    let (_, r3) = run(dir.path(), "equiv-check", &cfg.replace("seed = 5", "seed = 6"), "c");
    assert_ne!(r1["artifacts"], r3["artifacts"]);
}

#[test]
fn unknown_kind_and_bad_configs_exit_one() {
    let o = lab(&["heat-kernel", "--config", "x.toml"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("heat-kernel") && err.contains("resolvent-cont"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let (code, record) = run(dir.path(), "smatrix", &SMATRIX.replace("lambda_points", "lambda_pts"), "typo");
    assert_eq!(code, 1);
    assert_eq!(record, Value::Null, "config errors stop before any output");
    let (code, _) = run(dir.path(), "spectrum", SMATRIX, "mismatch");
    assert_eq!(code, 1);
    assert_eq!(lab(&["spectrum"]).status.code(), Some(1));
}

#[test]
fn refusals_and_failed_checks_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(dir.path(), "smatrix", &SMATRIX.replace("lambda_min = 0.1", "lambda_min = -1.0"), "negative");
    assert_eq!(code, 1);
    // the packet reaches the truncation boundary long before t = 60
    let escaping = "kind = \"wave-op\"\n[wave-op]\nmodel = { n = 2, x_max = 20.0, points = 399 }\n\
                    perturbation = { kind = \"square_well\", depth = 6.0, width = 2.0 }\nlambda0 = 2.0\nsigma = 0.2\ntimes = [20.0, 40.0, 60.0]\n";
    let (code, record) = run(dir.path(), "wave-op", escaping, "refused");
    assert_eq!(code, 2, "{record}");
    assert!(record["failure"].is_string());
    let strict = "kind = \"propagate\"\n[propagate]\nend = { kind = \"cylinder\", mus = [0.0], multiplicities = [1] }\nmode = 0\n\
                  grid = { x_min = 0.0, x_max = 10.0, points = 199, spacing = \"uniform\" }\nx0 = 5.0\ndelta = 0.2\ns = 0.5\nleakage_tol = 1e-30\n";
    let (code, record) = run(dir.path(), "propagate", strict, "strict");
    assert_eq!(code, 2, "{record}");
    assert_eq!(record["checks"][0]["pass"], false);
    assert!(record["failure"].is_null());
}

#[test]
fn unperturbed_heat_trace_difference_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        "kind = \"heat-trace\"\n[heat-trace]\nend = { kind = \"cylinder\", mus = [0.0], multiplicities = [1] }\ndx = 0.5\nt = 1.0\nlengths = [20.0, 40.0]\n";
    let (code, record) = run(dir.path(), "heat-trace", cfg, "zero");
    assert_eq!(code, 0, "{record}");
    let mut rdr = csv::Reader::from_path(dir.path().join("zero/truncation.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for kind in ALL {
        let cfg = ExperimentConfig::load(&root.join(format!("{}.toml", kind.name()))).unwrap();
        cfg.validate(kind).unwrap();
        assert_eq!(Kind::parse(kind.name()), Some(kind));
    }
}

#[test]
fn list_prints_the_catalog() {
    let o = lab(&["list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for kind in ALL {
        assert!(text.contains(kind.name()));
    }
    assert!(text.contains("csv: eigenvalues.csv: k, eigenvalue"));
}
