use std::path::PathBuf;
use std::process::{Command, Output};

use psdcompress::models::{DataTable, QuantumModel};
use psdcompress::numerics::HermitianMatrix;
use psdcompress_cli::archive::Archive;
use serde_json::Value;
use tempfile::TempDir;

/// Runs the binary inside `dir`, so file arguments can be bare names.
fn cli(dir: &TempDir, line: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psdcompress"))
        .args(line.split_whitespace())
        .current_dir(dir.path())
        .output()
        .expect("binary runs")
}

fn ok(dir: &TempDir, line: &str) -> String {
    let out = cli(dir, line);
    assert!(out.status.success(), "{line}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn file(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn read(dir: &TempDir, name: &str) -> String {
    std::fs::read_to_string(file(dir, name)).unwrap()
}

fn json(dir: &TempDir, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn value_after(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key:?} in {stdout}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn gen_model_reloads_valid_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    for out in ["a.json", "b.json"] {
        ok(&dir, &format!("gen quantum-model --x 4 --y 2 --z 2 --dim 32 --rank 1 --seed 1 --out {out}"));
    }
    let m = Archive::read(&file(&dir, "a.json")).unwrap().to_model().unwrap();
    assert_eq!((m.num_states(), m.num_measurements(), m.num_outcomes(), m.dim()), (4, 2, 2, 32));
    assert_eq!(read(&dir, "a.json"), read(&dir, "b.json"));
}

#[test]
fn gen_identity_table() {
    let dir = TempDir::new().unwrap();
    ok(&dir, "gen data-table --identity 16 --out t.json");
    assert_eq!(Archive::read(&file(&dir, "t.json")).unwrap().to_table().unwrap(), DataTable::identity(16));
}

#[test]
fn lower_bound_command() {
    let dir = TempDir::new().unwrap();
    ok(&dir, "gen data-table --identity 16 --out t.json");
    assert_eq!(value_after(&ok(&dir, "lower-bound --input t.json"), "l = "), 16.0);
    let noisy = value_after(&ok(&dir, "lower-bound --input t.json --eps-noise 0.01"), "noisy l = ");
    assert!((noisy - 15.84).abs() < 1e-12);

    Archive::from_table(&DataTable::constant(5, 3, 4), None).write(&file(&dir, "c.json")).unwrap();
    assert!((value_after(&ok(&dir, "lower-bound --input c.json"), "l = ") - 1.0).abs() < 1e-15);
}

#[test]
fn model_compression_end_to_end() {
    let dir = TempDir::new().unwrap();
    ok(&dir, "gen binary-rank-one --x 6 --y 3 --dim 128 --seed 2 --out m.json");
    ok(&dir, "compress --input m.json --mode model --epsilon 0.25 --seed 7 --d 64 --out out.json --report rep.json");
    let r = json(&dir, "rep.json");
    assert_eq!(r["status"], "accepted");
    assert!(r["report"]["max_violation_ratio"].as_f64().unwrap() <= 1.0);
    assert_eq!(r["certificate"]["formula_satisfied"], false);
    let eps = r["certificate"]["certified_epsilon"].as_f64().unwrap();
    assert!(eps > 0.25);
    let verdict = ok(&dir, &format!("verify --original m.json --compressed out.json --epsilon {eps}"));
    assert!(verdict.ends_with("PASS\n"));

    // An edited entry breaks either validity or a bound.
    let mut text = read(&dir, "out.json");
    let at = text.find("\"effects\":[[[[").unwrap() + 14;
    text.insert_str(at, "1");
    std::fs::write(file(&dir, "tampered.json"), text).unwrap();
    let v = cli(&dir, &format!("verify --original m.json --compressed tampered.json --epsilon {eps}"));
    assert_eq!(v.status.code(), Some(1), "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn psd_compression_at_formula_dimension() {
    let dir = TempDir::new().unwrap();
    ok(&dir, "gen psd-factorization --n 2 --m 2 --dim 16 --rank 2 --seed 4 --out f.json");
    ok(&dir, "compress --input f.json --mode psd --epsilon 0.5 --seed 0 --out out.json --report rep.json");
    let r = json(&dir, "rep.json");
    let d = psdcompress::projection::dim_for_psd(0.5, 4, 16).unwrap();
    assert_eq!(r["certificate"]["dim"].as_u64().unwrap() as usize, d);
    assert_eq!(r["certificate"]["formula_satisfied"], true);
    assert!(ok(&dir, "verify --original f.json --compressed out.json --epsilon 0.5").ends_with("PASS\n"));
}

#[test]
fn tail_mode_needs_a_tail() {
    let dir = TempDir::new().unwrap();
    // The first outcome is the identity, so its spectrum never drops below 1.
    let model = QuantumModel::new(
        3,
        vec![HermitianMatrix::basis_projector(3, 0)],
        vec![vec![HermitianMatrix::identity(3), HermitianMatrix::zeros(3)]],
    )
    .unwrap();
    Archive::from_model(&model, None).write(&file(&dir, "m.json")).unwrap();
    let r = cli(&dir, "compress --input m.json --mode tail --epsilon 0.5 --seed 0 --d 8 --out o.json --report r.json");
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no valid (j*, b)"));
}

#[test]
fn tail_mode_on_a_decaying_model() {
    let dir = TempDir::new().unwrap();
    ok(&dir, "gen tail-model --x 3 --y 2 --z 3 --dim 24 --j-star 2 --b 1 --seed 5 --out m.json");
    ok(
        &dir,
        "compress --input m.json --mode tail --epsilon 0.5 --seed 0 --d 24 --max-retries 256 --out o.json --report r.json",
    );
    assert_eq!(json(&dir, "r.json")["tail_profiles"][0]["j_star"], 2);
    assert!(Archive::read(&file(&dir, "o.json")).unwrap().to_model().is_ok());
}

#[test]
fn exhausted_retries_exit_three_with_report() {
    let dir = TempDir::new().unwrap();
    ok(&dir, "gen equality --bits 3 --out m.json");
    let r = cli(
        &dir,
        "compress --input m.json --mode model --epsilon 0.001 --seed 0 --d 8 --max-retries 1 --out o.json --report r.json",
    );
    assert_eq!(r.status.code(), Some(3));
    assert_eq!(json(&dir, "r.json")["status"], "retries_exhausted");
    assert!(!file(&dir, "o.json").exists());
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    ok(&dir, "gen data-table --identity 4 --out t.json");
    ok(&dir, "gen psd-factorization --n 1 --m 1 --dim 4 --seed 0 --out f.json");
    let code = |line: &str| cli(&dir, line).status.code();
    assert_eq!(code("verify --original t.json --compressed f.json --epsilon 0.5"), Some(2));
    assert_eq!(code("compress --input t.json --mode model --epsilon 0.5 --seed 0 --out x --report y"), Some(2));
    assert_eq!(code("lower-bound --input missing.json"), Some(2));
    assert_eq!(code("frobnicate"), Some(2));
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn sweep_median_falls_with_d() {
    let dir = TempDir::new().unwrap();
    ok(&dir, "gen binary-rank-one --x 6 --y 3 --dim 64 --seed 3 --out m.json");
    for out in ["a.csv", "b.csv"] {
        ok(&dir, &format!("sweep --input m.json --grid 16,32,64,128 --seeds 30 --out {out}"));
    }
    let csv = read(&dir, "a.csv");
    assert_eq!(csv, read(&dir, "b.csv"));
    let med = column(&csv, "median_state_measurement");
    assert_eq!(med.len(), 4);
    assert!(med.windows(2).all(|w| w[1] <= w[0]), "{med:?}");
}

#[test]
fn sweep_single_point_and_single_seed() {
    let dir = TempDir::new().unwrap();
    ok(&dir, "gen binary-rank-one --x 3 --y 2 --dim 16 --seed 0 --out m.json");
    ok(&dir, "sweep --input m.json --grid 8 --seeds 1 --out a.csv --cells c.csv");
    ok(&dir, "sweep --input m.json --grid 8 --seeds 1 --out b.csv");
    let csv = read(&dir, "a.csv");
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv, read(&dir, "b.csv"));
    assert_eq!(read(&dir, "c.csv").lines().count(), 2);
}
