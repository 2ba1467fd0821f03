//! Drives the `gaplab` binary: exit codes, artifacts and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaplab::harness::config::schema_violations;
use gaplab::harness::{BUTTERFLY_CSV_HEADER, GAPS_CSV_HEADER};

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("cli")
        .join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn gaplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaplab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_config(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    gaplab(&args)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn header(csv: &str) -> &str {
    csv.lines().next().unwrap_or_default()
}

#[test]
fn freq_succeeds_and_echoes_a_valid_config() {
    let out = scratch("freq");
    let o = run_config("freq", &configs().join("freq_hofstadter.json"), &out, &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "ok");
    assert_eq!(report["result"]["total_generator"], "1/48");
    assert!(
        schema_violations(&report["config"]).is_empty(),
        "{:?}",
        schema_violations(&report["config"])
    );
}

#[test]
fn spectrum_writes_gaps_csv() {
    let out = scratch("spectrum");
    let o = run_config(
        "spectrum",
        &configs().join("spectrum_hofstadter.json"),
        &out,
        &["--jobs", "1"],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(out.join("gaps.csv")).unwrap();
    assert_eq!(header(&csv), GAPS_CSV_HEADER.join(","));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(",1,3,MEMBER,1"), "{}", rows[0]);
    assert!(rows[1].ends_with(",2,3,MEMBER,1"), "{}", rows[1]);
}

#[test]
fn butterfly_writes_band_table() {
    let out = scratch("butterfly");
    let o = run_config("butterfly", &configs().join("butterfly.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("butterfly.csv")).unwrap();
    assert_eq!(header(&csv), BUTTERFLY_CSV_HEADER.join(","));
    assert!(csv.lines().count() > 10);
}

#[test]
fn chern_and_coh_sample_configs_run() {
    for (sub, file) in [
        ("chern", "chern_half_pair.json"),
        ("coh", "coh_dyadic_plane.json"),
    ] {
        let out = scratch(sub);
        let o = run_config(sub, &configs().join(file), &out, &[]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{sub}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(out.join("report.json").exists());
    }
}

#[test]
fn verify_is_deterministic_and_seed_overrides() {
    let config = configs().join("verify.json");
    let (a, b, c) = (
        scratch("verify_a"),
        scratch("verify_b"),
        scratch("verify_c"),
    );
    assert_eq!(
        run_config("verify", &config, &a, &[]).status.code(),
        Some(0)
    );
    assert_eq!(
        run_config("verify", &config, &b, &[]).status.code(),
        Some(0)
    );
    assert_eq!(
        run_config("verify", &config, &c, &["--seed", "7"])
            .status
            .code(),
        Some(0)
    );
    let read = |d: &Path| fs::read(d.join("report.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn configuration_problems_exit_with_2() {
    let dir = scratch("bad");
    let empty = write_config(&dir, "{}");
    let o = run_config("freq", &empty, &dir, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mode"));

    // Subcommand and config disagree.
    assert_eq!(
        run_config("coh", &configs().join("freq_hofstadter.json"), &dir, &[])
            .status
            .code(),
        Some(2)
    );
    // Field-level diagnostics name the offending path.
    let bad = write_config(
        &dir,
        r#"{"schema_version": 1, "mode": "spectrum", "spectral": {"volumes": [10]}}"#,
    );
    let o = run_config("spectrum", &bad, &dir, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/spectral/volumes"));

    assert_eq!(
        run_config("freq", &dir.join("missing.json"), &dir, &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(gaplab(&["warp"]).status.code(), Some(2));
    assert_eq!(gaplab(&["freq"]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_1() {
    let dir = scratch("runtime");
    // The output directory cannot be created over an existing file.
    let blocker = dir.join("blocker");
    fs::write(&blocker, "").unwrap();
    let o = run_config(
        "freq",
        &configs().join("freq_hofstadter.json"),
        &blocker,
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let o = gaplab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["freq", "coh", "chern", "spectrum", "verify", "butterfly"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}
