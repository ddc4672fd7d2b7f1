//! Black-box tests of the command-line interface: exit codes, output
//! files, determinism and the offline analysis round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hcqlink")
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("HCQLINK_OUT")
        .output()
        .expect("spawn hcqlink")
}

fn write_small_config(dir: &Path, base: &str, rounds: u64) -> PathBuf {
    let text = std::fs::read_to_string(preset(base)).unwrap();
    let text = text.replace("10000000", &rounds.to_string());
    let path = dir.join(base);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sim_writes_summary_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), "paper_hbt.json", 100_000);
    let out_dir = dir.path().join("out");
    let out = run(&["sim", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("g2_zero"));
    assert!(out_dir.join("summary.csv").exists());
    let hist = std::fs::read_to_string(out_dir.join("histogram.csv")).unwrap();
    assert!(hist.starts_with("delay_ps,counts\n"));
}

#[test]
fn reruns_are_byte_identical_and_seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), "paper_hbt.json", 100_000);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let out_c = dir.path().join("c");
    for (out, seed) in [(&out_a, "1"), (&out_b, "1"), (&out_c, "7")] {
        let r = run(&[
            "sim",
            config.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(r.status.success());
    }
    let a = std::fs::read(out_a.join("summary.csv")).unwrap();
    let b = std::fs::read(out_b.join("summary.csv")).unwrap();
    let c = std::fs::read(out_c.join("summary.csv")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(
        std::fs::read(out_a.join("histogram.csv")).unwrap(),
        std::fs::read(out_b.join("histogram.csv")).unwrap()
    );
}

#[test]
fn missing_config_is_a_config_error() {
    let out = run(&["sim", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2)); // io error: runtime
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"scenario\": \"hbt\"").unwrap();
    let out = run(&["sim", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(preset("paper_hbt.json"))
        .unwrap()
        .replace("\"seed\": 1,", "\"seed\": 1, \"not_a_key\": 3,");
    let path = dir.path().join("unknown.json");
    std::fs::write(&path, text).unwrap();
    let out = run(&["sim", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_a_key"));
}

#[test]
fn infeasible_physics_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    // 1.26 um sits exactly on the second resonance
    let text = std::fs::read_to_string(preset("paper_hbt.json"))
        .unwrap()
        .replace("\"g2_target\": 0.0214", "\"g2_target\": 0.0214, \"wavelength_um\": 1.26");
    let path = dir.path().join("resonant.json");
    std::fs::write(&path, text).unwrap();
    let out = run(&["sim", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn fiber_subcommand_reports_windows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "fiber",
        preset("paper_fiber.json").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let budget = std::fs::read_to_string(out_dir.join("budget.csv")).unwrap();
    assert!(budget.contains("quantum,3"));
    assert!(budget.contains("classical,2"));
    assert!(out_dir.join("resonances.csv").exists());
}

#[test]
fn qkd_subcommand_requires_bb84_scenario() {
    let out = run(&["qkd", preset("paper_hbt.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), "paper_bb84_pol.json", 200_000);
    let out_dir = dir.path().join("out");
    let out = run(&["qkd", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let qkd = std::fs::read_to_string(out_dir.join("qkd.csv")).unwrap();
    assert!(qkd.starts_with("state,sent,sifted,errors,qber,qber_sigma\n"));
    assert_eq!(qkd.lines().count(), 5);
}

#[test]
fn keyrate_subcommand_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "keyrate",
        preset("paper_keyrate.json").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rates = std::fs::read_to_string(out_dir.join("keyrate.csv")).unwrap();
    assert!(rates.starts_with("loss_db,rate_bits_per_pulse,rate_bits_per_s\n"));
    let distances = std::fs::read_to_string(out_dir.join("distance.csv")).unwrap();
    assert!(distances.starts_with("prop_loss_db_per_km,max_distance_km\n"));
}

#[test]
fn analyze_round_trip_matches_sim() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(preset("paper_hbt.json"))
        .unwrap()
        .replace("10000000", "200000")
        .replace("\"seed\": 1,", "\"seed\": 1, \"dump_time_tags\": true,");
    let config = dir.path().join("hbt.json");
    std::fs::write(&config, text).unwrap();
    let sim_dir = dir.path().join("sim");
    let out = run(&["sim", config.to_str().unwrap(), "--out", sim_dir.to_str().unwrap()]);
    assert!(out.status.success());

    let analyze_dir = dir.path().join("analyze");
    let out = run(&[
        "analyze",
        sim_dir.join("time_tags.csv").to_str().unwrap(),
        "--out",
        analyze_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let sim_summary = std::fs::read_to_string(sim_dir.join("summary.csv")).unwrap();
    let g2_sim: f64 = sim_summary
        .lines()
        .find(|l| l.starts_with("g2_zero,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let an_summary = std::fs::read_to_string(analyze_dir.join("summary.csv")).unwrap();
    let g2_an: f64 = an_summary
        .lines()
        .find(|l| l.starts_with("g2_zero,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((g2_sim - g2_an).abs() < 1e-12);
}

#[test]
fn compare_reports_zero_z_for_identical_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path(), "paper_hbt.json", 100_000);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        assert!(run(&["sim", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status
            .success());
    }
    let cmp_dir = dir.path().join("cmp");
    let out = run(&[
        "compare",
        out_a.join("summary.csv").to_str().unwrap(),
        out_b.join("summary.csv").to_str().unwrap(),
        "--out",
        cmp_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("worst_z = 0"));
    assert!(cmp_dir.join("compare.csv").exists());
}
