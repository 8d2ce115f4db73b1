//! End-to-end checks of the command-line surface: row counts, exit codes,
//! header discipline, and the cache round trip.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rootmoments"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rootmoments-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1) // column header
        .collect()
}

#[test]
fn angles_row_count() {
    // φ⁺(101) = 49 rows
    let out = bin().args(["angles", "--q", "101"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(data_rows(&text).len(), 49);
    assert!(text.starts_with("# rootmoments v"));
    assert!(text.contains("config_hash="));
    assert!(text.contains("smoothing_spec_hash="));
}

#[test]
fn nonvanish_carries_c_eta_bound() {
    let out = bin()
        .args(["nonvanish", "--q", "1009", "--eta", "0", "--epsilon", "0.01"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 1); // full circle: one window
    let c_eta: f64 = rows[0].split(',').last().unwrap().parse().unwrap();
    assert!((c_eta - 0.04).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    // composite modulus
    let out = bin().args(["angles", "--q", "1001"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    // invalid moment kind
    let out = bin()
        .args(["moments", "--q", "11", "--kind", "third"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // eta out of the admissible range
    let out = bin()
        .args(["nonvanish", "--q", "11", "--eta", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn q_grid_parsing() {
    let out = bin().args(["angles", "--q", "5,7"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // φ⁺(5) + φ⁺(7) = 1 + 2
    assert_eq!(data_rows(&text).len(), 3);
    // range sampling yields primes only
    let out = bin().args(["moments", "--q", "100..200:3", "--kind", "first"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn moments_csv_schema() {
    let out = bin()
        .args(["moments", "--q", "101", "--kind", "first", "--k", "0,-1,2", "--m", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3);
    let header = text
        .lines()
        .find(|l| !l.starts_with('#'))
        .unwrap();
    assert_eq!(
        header,
        "q,kind,m1,m2,k,alpha,x,bump_id,re_computed,im_computed,re_predicted,im_predicted,re_residual,im_residual,normalizer,envelope"
    );
    for row in rows {
        assert_eq!(row.split(',').count(), 16);
    }
}

#[test]
fn json_format() {
    let out = bin()
        .args(["angles", "--q", "7", "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn mollifier_json_dump() {
    let out = bin()
        .args(["mollifier", "--q", "1009", "--alpha", "0.25"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let set = &doc["mollifiers"][0];
    assert_eq!(set["m_len"], 5);
    let coeffs = set["coefficients"].as_array().unwrap();
    assert_eq!(coeffs[0]["m"], 1);
    assert_eq!(coeffs[0]["num"], "1");
    assert_eq!(coeffs[0]["den"], "1");
}

#[test]
fn cache_round_trip_and_corruption() {
    let dir = tmpdir("cache");
    let cache = dir.join("cache");
    let run = |out_name: &str| {
        let path = dir.join(out_name);
        let status = bin()
            .args(["kloosterman", "--q", "101", "--k", "3"])
            .arg("--cache-dir")
            .arg(&cache)
            .arg("--out")
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(&path).unwrap()
    };
    let cold = run("cold.csv");
    assert!(cache.join("kl_q101_k3.bin").is_file());
    let warm = run("warm.csv");
    assert_eq!(cold, warm, "results identical with and without cache");
    // corrupt the cache: the run must recompute, not crash, and agree
    let kl_file = cache.join("kl_q101_k3.bin");
    let mut bytes = fs::read(&kl_file).unwrap();
    bytes[0] ^= 0xff;
    fs::write(&kl_file, &bytes).unwrap();
    let healed = run("healed.csv");
    assert_eq!(cold, healed);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn central_echoes_smoothing_spec() {
    let out = bin().args(["central", "--q", "11"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("smoothing_spec"));
    assert!(text.contains("\"delta\":0"));
    assert_eq!(data_rows(&text).len(), 4);
}
