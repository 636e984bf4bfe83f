use serde_json::Value;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_grauert");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

/// Runs the binary with `config` written to a temp dir; returns the exit
/// code and the output directory.
fn run(sub: &str, config: &str, extra: &[&str]) -> (i32, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (status.status.code().unwrap(), dir)
}

fn out_file(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join("out").join(name)
}

/// Header lines and data rows of a CSV output.
fn read_csv(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>, csv::StringRecord) {
    let text = fs::read_to_string(path).unwrap();
    let header: Vec<String> = text.lines().take_while(|l| l.starts_with('#')).map(String::from).collect();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let cols = r.headers().unwrap().clone();
    (header, r.records().map(|x| x.unwrap()).collect(), cols)
}

fn col(cols: &csv::StringRecord, name: &str) -> usize {
    cols.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn f(rec: &csv::StringRecord, i: usize) -> f64 {
    rec[i].parse().unwrap()
}

#[test]
fn flat_flow_to_i_has_constant_energy() {
    let (code, dir) = run("flow", "[model]\nname = \"flat_torus\"\n", &[]);
    assert_eq!(code, 0);
    let (header, rows, cols) = read_csv(&out_file(&dir, "flow.csv"));
    assert!(header.iter().any(|h| h.starts_with("# toolkit: grauert ")));
    assert!(header.iter().any(|h| h.starts_with("# config_sha256: ")));
    assert!(header.iter().any(|h| h.starts_with("# params: period0=")));
    assert!(rows.len() >= 11);
    let (er, ei) = (col(&cols, "E_re"), col(&cols, "E_im"));
    for r in &rows {
        assert!((f(r, er) - 0.5).abs() < 1e-14 && f(r, ei).abs() < 1e-14);
    }
    let last = rows.last().unwrap();
    assert_eq!((f(last, 0), f(last, 1)), (0.0, 1.0));
}

#[test]
fn zero_target_gives_a_single_row() {
    let (code, dir) = run("flow", "[paths]\ntarget = [0.0, 0.0]\n", &[]);
    assert_eq!(code, 0);
    assert_eq!(read_csv(&out_file(&dir, "flow.csv")).1.len(), 1);
}

#[test]
fn sphere_at_speed_two_breaks_down_at_a_quarter_turn() {
    let text = fs::read_to_string(configs().join("sphere_breakdown.toml")).unwrap();
    let (code, dir) = run("flow", &text, &[]);
    assert_eq!(code, 2);
    let recs = read_jsonl(&out_file(&dir, "flow_breakdown.jsonl"));
    assert_eq!(recs[0]["record"], "header");
    let r = recs[1]["breakdown_radius"].as_f64().unwrap();
    assert!((r - FRAC_PI_4).abs() < 1e-3, "{r}");
    assert!((recs[1]["last_good_im"].as_f64().unwrap() - r).abs() < 1e-15);
    assert!(!out_file(&dir, "flow.csv").exists());

    let bare = text.replace("require_disk = true", "require_disk = false");
    let (code, dir) = run("flow", &bare, &[]);
    assert_eq!(code, 0);
    assert!(out_file(&dir, "flow.csv").exists());
}

#[test]
fn step_budget_and_domain_errors_exit_two() {
    let cfg = "[model]\nname = \"surface_of_revolution\"\n[paths]\np0 = [2.0, 0.0]\nrequire_disk = false\n";
    let (code, _) = run("flow", cfg, &[]);
    assert_eq!(code, 2);
}

#[test]
fn flat_jtensor_is_standard_everywhere() {
    let (code, dir) = run("jtensor", "[model]\nname = \"flat_torus\"\n[grids]\njtensor_points = 4\n", &[]);
    assert_eq!(code, 0);
    let (_, rows, cols) = read_csv(&out_file(&dir, "jtensor.csv"));
    assert_eq!(rows.len(), 8);
    let std_j = |r: usize, c: usize| match (r, c) {
        (2, 0) | (3, 1) => 1.0,
        (0, 2) | (1, 3) => -1.0,
        _ => 0.0,
    };
    for row in &rows {
        for r in 0..4 {
            for c in 0..4 {
                assert!((f(row, col(&cols, &format!("j_{r}{c}"))) - std_j(r, c)).abs() < 1e-12);
            }
        }
        assert!(f(row, col(&cols, "positivity_min_eig")) > 0.0);
    }
}

#[test]
fn sphere_zero_section_is_standard_in_the_adapted_frame() {
    let (code, dir) = run("jtensor", "[model]\nname = \"round_sphere\"\n[grids]\njtensor_points = 3\n", &[]);
    assert_eq!(code, 0);
    let (_, rows, cols) = read_csv(&out_file(&dir, "jtensor.csv"));
    let kind = col(&cols, "kind");
    let zs: Vec<_> = rows.iter().filter(|r| &r[kind] == "zero_section").collect();
    assert_eq!(zs.len(), 3);
    for row in zs {
        assert!((f(row, col(&cols, "ja_20")) - 1.0).abs() < 1e-9);
        assert!((f(row, col(&cols, "ja_02")) + 1.0).abs() < 1e-9);
        assert!(f(row, col(&cols, "ja_00")).abs() < 1e-9);
    }
}

#[test]
fn torus_extension_table_agrees_across_methods() {
    let (code, dir) = run("extend", "[model]\nname = \"flat_torus\"\n[grids]\nsamples = 10\n", &[]);
    assert_eq!(code, 0);
    let (_, rows, cols) = read_csv(&out_file(&dir, "extend_exp_ix.csv"));
    assert_eq!(rows.len(), 10);
    for name in ["series_re", "flow_re", "exp_map_re"] {
        col(&cols, name);
    }
    for r in &rows {
        assert!(f(r, col(&cols, "max_abs_dev")) < 1e-10);
    }
}

#[test]
fn constant_extension_columns_are_equal() {
    let cfg = "[model]\nname = \"round_sphere\"\n[checks]\nfunction = \"constant\"\n[grids]\nsamples = 5\n";
    let (code, dir) = run("extend", cfg, &[]);
    assert_eq!(code, 0);
    let (_, rows, cols) = read_csv(&out_file(&dir, "extend_constant.csv"));
    for r in &rows {
        for name in ["series_re", "flow_re", "exp_map_re"] {
            assert!((f(r, col(&cols, name)) - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn surface_extension_notes_the_missing_exponential_map() {
    let (code, dir) = run("extend", "[model]\nname = \"surface_of_revolution\"\n[grids]\nsamples = 3\n", &[]);
    assert_eq!(code, 0);
    let (_, rows, cols) = read_csv(&out_file(&dir, "extend_cos_u.csv"));
    for r in &rows {
        assert!(r[col(&cols, "exp_map_re")].is_empty());
        assert!(r[col(&cols, "notes")].contains("exp_map"));
        assert!(f(r, col(&cols, "max_abs_dev")) < 1e-10);
    }
}

#[test]
fn default_verify_passes_and_broken_sign_fails() {
    let text = fs::read_to_string(configs().join("default.toml")).unwrap().replace("samples = 50", "samples = 10");
    let (code, dir) = run("verify", &text, &[]);
    assert_eq!(code, 0);
    let recs = read_jsonl(&out_file(&dir, "verify.jsonl"));
    assert_eq!(recs.len(), 11);
    for r in &recs[1..] {
        assert_eq!(r["verdict"], "pass", "{r}");
        assert!(r["n_samples"].as_u64().unwrap() >= 10);
    }

    let text = fs::read_to_string(configs().join("broken_sign.toml")).unwrap();
    let (code, dir) = run("verify", &text, &[]);
    assert_eq!(code, 1);
    let recs = read_jsonl(&out_file(&dir, "verify.jsonl"));
    assert_eq!(recs[1]["name"], "kahler_potential");
    assert_eq!(recs[1]["verdict"], "fail");
}

#[test]
fn empty_selection_is_an_empty_report() {
    let (code, dir) = run("verify", "[checks]\nselect = []\n", &[]);
    assert_eq!(code, 0);
    let recs = read_jsonl(&out_file(&dir, "verify.jsonl"));
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["record"], "header");
}

#[test]
fn identical_runs_write_identical_bytes() {
    let cfg = "[model]\nname = \"round_sphere\"\n[checks]\nselect = [\"kahler_potential\", \"scaling\"]\n[grids]\nsamples = 6\n";
    let (_, a) = run("verify", cfg, &[]);
    let (_, b) = run("verify", cfg, &[]);
    let fa = fs::read(out_file(&a, "verify.jsonl")).unwrap();
    assert_eq!(fa, fs::read(out_file(&b, "verify.jsonl")).unwrap());
    let (_, c) = run("verify", cfg, &["--seed", "5"]);
    assert_ne!(fa, fs::read(out_file(&c, "verify.jsonl")).unwrap());
}

#[test]
fn flat_tube_radius_hits_the_cap() {
    let cfg = "[model]\nname = \"flat_torus\"\n[grids]\ncovectors = 2\nsweep_cap = 1.5\nloop_sides = 16\nloop_dense = 8\n";
    let (code, dir) = run("tube-radius", cfg, &[]);
    assert_eq!(code, 0);
    let recs = read_jsonl(&out_file(&dir, "tube_radius.jsonl"));
    assert_eq!(recs.len(), 4);
    for r in &recs[1..] {
        assert_eq!(r["radius"].as_f64().unwrap(), 1.5);
        assert_eq!(r["no_breakdown"], true);
    }
}

#[test]
fn sphere_tube_radius_through_the_cli() {
    let (code, dir) = run("tube-radius", "[model]\nname = \"round_sphere\"\n[grids]\ncovectors = 2\n", &[]);
    assert_eq!(code, 0);
    let recs = read_jsonl(&out_file(&dir, "tube_radius.jsonl"));
    let cont = recs.iter().find(|r| r["kind"] == "continuation").unwrap();
    assert!((cont["radius"].as_f64().unwrap() - FRAC_PI_2).abs() < 0.01);
}

#[test]
fn configuration_errors_exit_three() {
    for cfg in [
        "[grids]\nsweep_cap = 0.0\n",
        "[model]\nname = \"klein_bottle\"\n",
        "[model]\nname = \"flat_torus\"\nradius = 2.0\n",
        "[checks]\nselect = [\"curvature\"]\n",
        "[checks]\ndbar_convention = \"sideways\"\n",
        "colour = \"red\"\n",
        "tol = 0.0\n",
        "[paths]\nv0 = [1.0, 0.0]\np0 = [1.0, 0.0]\n",
    ] {
        let (code, _) = run("tube-radius", cfg, &[]);
        assert_eq!(code, 3, "{cfg}");
    }
    let (code, _) = run("flow", "[paths]\nchart = \"polar\"\n", &[]);
    assert_eq!(code, 3);
    let (code, _) = run("extend", "[checks]\nfunction = \"x3\"\n", &[]);
    assert_eq!(code, 3);
}

#[test]
fn model_flag_overrides_the_file() {
    let (code, dir) = run("flow", "[model]\nname = \"flat_torus\"\nperiods = [1.0, 2.0]\n", &["--model", "round_sphere"]);
    assert_eq!(code, 0);
    let (header, _, _) = read_csv(&out_file(&dir, "flow.csv"));
    assert!(header.contains(&"# model: round_sphere".to_string()));
}
