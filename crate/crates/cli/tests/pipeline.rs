//! End-to-end pipeline tests against the bundled fixture corpus, driven
//! through the real binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridalign"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let output = run(args);
    assert!(
        output.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn config_arg() -> String {
    fixtures_dir().join("fixture.conf").display().to_string()
}

/// Recursively collect relative path -> file bytes.
fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn read_manifest_summary(out_dir: &Path) -> BTreeMap<String, (usize, usize)> {
    let text = std::fs::read_to_string(out_dir.join("manifest.csv")).unwrap();
    let mut counts = BTreeMap::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == "summary" {
            counts.insert(
                fields[1].to_string(),
                (fields[2].parse().unwrap(), fields[3].parse().unwrap()),
            );
        }
    }
    counts
}

#[test]
fn ingest_empty_tariff_dir_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let tariffs = tmp.path().join("tariffs");
    std::fs::create_dir(&tariffs).unwrap();
    let config = tmp.path().join("run.conf");
    std::fs::write(&config, "tariff_dir = tariffs\n").unwrap();
    let out = tmp.path().join("out");

    let output = run_ok(&[
        "ingest",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let manifest = std::fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1, "header only: {manifest}");
}

#[test]
fn ingest_flags_invalid_tariffs_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let tariffs = tmp.path().join("tariffs");
    std::fs::create_dir(&tariffs).unwrap();
    let header = "kind,charge_family,rate,tier_floor,month_start,month_end,weekday_start,weekday_end,hour_start,hour_end,assessed\n";
    for i in 0..9 {
        std::fs::write(
            tariffs.join(format!("T{i}_bundled.csv")),
            format!("{header}energy,E1,0.1,0,1,12,0,6,0,24,monthly\n"),
        )
        .unwrap();
    }
    // Negative rate: parses as a number but violates validation.
    std::fs::write(
        tariffs.join("T9_bundled.csv"),
        format!("{header}energy,E1,-0.1,0,1,12,0,6,0,24,monthly\n"),
    )
    .unwrap();
    let config = tmp.path().join("run.conf");
    std::fs::write(&config, "tariff_dir = tariffs\n").unwrap();
    let out = tmp.path().join("out");

    let output = run(&[
        "ingest",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let counts = read_manifest_summary(&out);
    assert_eq!(counts["tariff"], (9, 1));
}

#[test]
fn ingest_counts_match_directory_listing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    run_ok(&["ingest", "--config", &config_arg(), "--out", out.to_str().unwrap()]);
    let counts = read_manifest_summary(&out);

    let list = |subdir: &str| {
        std::fs::read_dir(fixtures_dir().join(subdir))
            .unwrap()
            .filter(|e| {
                e.as_ref().unwrap().path().extension().map(|x| x == "csv").unwrap_or(false)
            })
            .count()
    };
    assert_eq!(counts["tariff"].0, list("tariffs"));
    assert_eq!(counts["aef"].0, list("aef"));
    assert_eq!(counts["dam"].0, list("dam"));
    assert_eq!(counts["gen_emis"].0, list("gen_emis"));
    assert_eq!(counts["tariff"].1, 0);
}

#[test]
fn flatten_produces_constant_matrix_for_flat_tariff_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let tariffs = tmp.path().join("tariffs");
    std::fs::create_dir(&tariffs).unwrap();
    let header = "kind,charge_family,rate,tier_floor,month_start,month_end,weekday_start,weekday_end,hour_start,hour_end,assessed\n";
    std::fs::write(
        tariffs.join("FLAT_bundled.csv"),
        format!("{header}energy,E1,0.1,0,1,12,0,6,0,24,monthly\n"),
    )
    .unwrap();
    let config = tmp.path().join("run.conf");
    std::fs::write(&config, "tariff_dir = tariffs\n").unwrap();
    let out = tmp.path().join("out");
    let args = [
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];

    run_ok(&[&["ingest"], &args[..]].concat());
    run_ok(&[&["flatten"], &args[..]].concat());
    let matrix_path = out.join("matrices/tariff_FLAT__usd_per_kwh.csv");
    let first = std::fs::read(&matrix_path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    for line in text.lines().skip(1) {
        for field in line.split(',') {
            let v: f64 = field.parse().unwrap();
            assert!((v - 0.1).abs() < 1e-12, "cell {field}");
        }
    }

    run_ok(&[&["flatten"], &args[..]].concat());
    assert_eq!(first, std::fs::read(&matrix_path).unwrap(), "rerun changed bytes");
}

#[test]
fn analyze_without_flatten_is_fatal_and_names_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join("manifest.csv"), "kind,path,status,detail\n").unwrap();
    let output = run(&["analyze", "--config", &config_arg(), "--out", out.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("flatten"), "stderr: {stderr}");
}

#[test]
fn flatten_without_ingest_is_fatal_and_names_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let output = run(&["flatten", "--config", &config_arg(), "--out", out.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("ingest"), "stderr: {stderr}");
}

#[test]
fn analyze_emits_all_csvs_and_consistent_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = config_arg();
    let args = ["--config", config.as_str(), "--out", out.to_str().unwrap()];
    run_ok(&[&["ingest"], &args[..]].concat());
    run_ok(&[&["flatten"], &args[..]].concat());
    let output = run_ok(&[&["analyze"], &args[..]].concat());

    for file in [
        "correlations.csv",
        "categories.csv",
        "premiums.csv",
        "regime_map.csv",
        "summary_stats.csv",
    ] {
        assert!(out.join("analysis").join(file).is_file(), "{file} missing");
    }

    let stdout = String::from_utf8_lossy(&output.stdout);
    let shares_line = stdout
        .lines()
        .find(|l| l.starts_with("category shares:"))
        .expect("summary prints category shares");
    let total: f64 = shares_line
        .split(['|', ':'])
        .filter_map(|part| {
            part.trim()
                .split_whitespace()
                .last()
                .and_then(|token| token.strip_suffix('%'))
                .and_then(|token| token.parse::<f64>().ok())
        })
        .sum();
    assert!((total - 100.0).abs() < 0.2, "shares sum to {total}: {shares_line}");
    assert!(
        stdout.lines().any(|l| l.contains("sign flips")),
        "summary lacks a flip-fraction line:\n{stdout}"
    );

    // The report concatenates the manifest and the summary.
    let report = run_ok(&[&["report"], &args[..]].concat());
    let report_out = String::from_utf8_lossy(&report.stdout);
    assert!(report_out.contains("manifest"));
    assert!(report_out.contains("category shares:"));
}

#[test]
fn analyze_matches_golden_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = config_arg();
    let args = ["--config", config.as_str(), "--out", out.to_str().unwrap()];
    run_ok(&[&["ingest"], &args[..]].concat());
    run_ok(&[&["flatten"], &args[..]].concat());
    run_ok(&[&["analyze"], &args[..]].concat());

    let golden_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for entry in std::fs::read_dir(&golden_dir).unwrap() {
        let golden_path = entry.unwrap().path();
        let name = golden_path.file_name().unwrap().to_string_lossy().to_string();
        let produced = std::fs::read(out.join("analysis").join(&name)).unwrap();
        let golden = std::fs::read(&golden_path).unwrap();
        assert_eq!(produced, golden, "analysis output '{name}' drifted from golden copy");
    }
}

#[test]
fn criterion_8_pipeline_determinism() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for run_idx in 0..2 {
        let out = tmp.path().join(format!("out{run_idx}"));
        let config = config_arg();
    let args = ["--config", config.as_str(), "--out", out.to_str().unwrap()];
        run_ok(&[&["ingest"], &args[..]].concat());
        run_ok(&[&["flatten"], &args[..]].concat());
        run_ok(&[&["analyze"], &args[..]].concat());
        trees.push(tree_bytes(&out));
    }
    assert_eq!(trees[0].len(), trees[1].len());
    for (path, bytes) in &trees[0] {
        assert_eq!(
            Some(bytes),
            trees[1].get(path),
            "output '{path}' differs between runs"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "two pipeline runs took {elapsed:?}, budget is 2 min"
    );
    println!(
        "PASS criterion 8: two pipeline runs over the fixture corpus are byte-identical \
         ({} files, {elapsed:?})",
        trees[0].len()
    );
}
