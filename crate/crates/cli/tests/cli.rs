//! End-to-end tests of the binary: exit codes, diagnostics, CSV
//! round-trips, determinism, and preset execution.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ringquench");

/// Exact finite-ring proportionality factor at filling 1, L = 3.
const BETA_1_3: f64 = 392.0 / 729.0;
const BETA_TOL: f64 = 1e-9;

/// A scratch directory unique to one test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ringquench-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A fast, valid quench configuration (non-integer fillings, so the
/// theory column stays empty: that path must work too).
const TINY_QUENCH: &str = "mode = quench
L = 3
N_A = 2
N_B = 2
V = 10
J_A = 0.1
U_A = 1
phi_A = 0.3
J_B = 0.2
U_B = 1
phi_B = 0.5
dt = 0.01
t_max = 0.1
sample_stride = 1
";

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Data lines of a CSV (header and `#` metadata stripped).
fn data_lines(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn theory_preset_reproduces_the_exact_factor() {
    let dir = scratch("table1");
    let out = run(&["theory", "--preset", "table1", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr_of(&out));

    let csv = fs::read_to_string(dir.join("table1.csv")).unwrap();
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 6, "six table rows");
    // Row 0 is the 3-site ring at unit filling.
    assert_eq!(rows[0][0], "3");
    assert_eq!(rows[0][1], "1");
    let beta: f64 = rows[0][2].parse().unwrap();
    assert!((beta - BETA_1_3).abs() < BETA_TOL, "beta(1,3) = {beta}");
    // The thermodynamic rows carry the intermediate-time variant.
    let inf_row = rows.iter().find(|r| r[0] == "inf").unwrap();
    let beta_prime: f64 = inf_row[3].parse().unwrap();
    assert!((beta_prime - 0.6032).abs() < 5e-4, "beta'(1) = {beta_prime}");
    // Finite-L rows leave it empty.
    assert!(rows[0][3].is_empty());
}

#[test]
fn quench_run_writes_metadata_and_round_trip_floats() {
    let dir = scratch("quench");
    let cfg = write_config(&dir, "tiny.ini", TINY_QUENCH);
    let out = run(&["quench", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr_of(&out));

    let csv = fs::read_to_string(dir.join("tiny.csv")).unwrap();
    // Metadata echoes the effective parameters, defaults included.
    for key in ["# mode = quench", "# L = 3", "# V = 10", "# dt = 0.01", "# grid_points = 1536"] {
        assert!(csv.contains(key), "metadata line {key:?} missing:\n{csv}");
    }
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 11, "t = 0 plus ten steps");
    // t = 0: no reduction, no entanglement yet.
    let first: Vec<f64> = rows[0][..3].iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[1], 0.0);
    // Non-integer filling: the theory column is empty.
    assert!(rows[0][3].is_empty());
    // Floats are full precision (17 significant digits round-trip).
    assert!(rows[1][1].contains('e'), "scientific notation: {}", rows[1][1]);
}

#[test]
fn reruns_are_byte_identical() {
    let dir_a = scratch("det-a");
    let dir_b = scratch("det-b");
    let cfg = write_config(&dir_a, "tiny.ini", TINY_QUENCH);
    for dir in [&dir_a, &dir_b] {
        let out =
            run(&["quench", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    let a = fs::read(dir_a.join("tiny.csv")).unwrap();
    let b = fs::read(dir_b.join("tiny.csv")).unwrap();
    assert_eq!(a, b, "identical config must give identical bytes");
}

#[test]
fn sweep_preserves_the_listed_value_order() {
    let dir = scratch("sweep");
    let text = format!(
        "{}sweep.key = J_A\nsweep.values = 0.2, 0.05, 0.1\n",
        TINY_QUENCH.replace("mode = quench", "mode = sweep")
    );
    let cfg = write_config(&dir, "order.ini", &text);
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let csv = fs::read_to_string(dir.join("order.csv")).unwrap();
    let rows = data_lines(&csv);
    let values: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(values, vec![0.2, 0.05, 0.1], "axis order is the listed order");
    // Stronger stirring reduces the bath current more.
    let jb: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(jb[0] > jb[2] && jb[2] > jb[1], "reductions {jb:?} ordered by J_A");
}

#[test]
fn parse_errors_carry_line_numbers_and_exit_2() {
    let dir = scratch("diag");
    let bad = TINY_QUENCH.replace("U_A = 1", "U_A = -3");
    let cfg = write_config(&dir, "bad.ini", &bad);
    let out = run(&["quench", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("line 7"), "line number in: {err}");
    assert!(err.contains("U_A"), "offending key in: {err}");

    let unknown = format!("{TINY_QUENCH}turbo = yes\n");
    let cfg = write_config(&dir, "unknown.ini", &unknown);
    let out = run(&["quench", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("unknown key 'turbo'"));
}

#[test]
fn mode_mismatch_and_unknown_preset_exit_2() {
    let out = run(&["theory", "--preset", "fig1b"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("declares mode 'quench'"));

    let out = run(&["quench", "--preset", "fig1z"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("unknown preset"), "{err}");
    assert!(err.contains("fig1b"), "suggests valid names: {err}");
}

#[test]
fn oversized_space_exits_3() {
    let dir = scratch("capacity");
    let text = "mode = ground-state\nL = 40\nN_B = 40\nJ_B = 0.1\n";
    let cfg = write_config(&dir, "huge.ini", text);
    let out = run(&["ground-state", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
}

#[test]
fn zero_phase_quench_warns_and_leaves_current_columns_empty() {
    // At phi_B = 0 the bath carries no persistent current, so the
    // relative reduction is undefined; the entanglement series must
    // still be delivered.
    let dir = scratch("baseline");
    let text = TINY_QUENCH.replace("phi_B = 0.5", "phi_B = 0");
    let cfg = write_config(&dir, "flat.ini", &text);
    let out = run(&["quench", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("baseline"), "warns: {}", stderr_of(&out));
    let csv = fs::read_to_string(dir.join("flat.csv")).unwrap();
    let rows = data_lines(&csv);
    assert!(rows.len() > 5);
    for r in &rows {
        assert!(r[1].is_empty() && r[2].is_empty() && r[3].is_empty(), "{r:?}");
    }
    // K_AB grows from zero once the coupled evolution starts.
    let k_last: f64 = rows.last().unwrap()[4].parse().unwrap();
    assert!(k_last > 1e-6, "entanglement series populated, K(t_max) = {k_last}");
}

#[test]
fn emitted_plot_scripts_reference_only_written_files() {
    let dir = scratch("plots");
    let cfg = write_config(&dir, "tiny.ini", TINY_QUENCH);
    let out = run(&[
        "quench",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--emit-plots",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let script = fs::read_to_string(dir.join("tiny.gp")).unwrap();
    for piece in script.split('\'').skip(1).step_by(2) {
        if piece.ends_with(".csv") {
            assert!(dir.join(piece).is_file(), "{piece} referenced but not written");
        }
    }
    assert!(script.contains("tiny.csv"), "plot uses the emitted CSV");
}

#[test]
fn ground_state_preset_writes_summary_and_momentum_files() {
    let dir = scratch("fig7");
    let out = run(&["ground-state", "--preset", "fig7", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let summary = fs::read_to_string(dir.join("fig7.csv")).unwrap();
    let rows = data_lines(&summary);
    assert_eq!(rows.len(), 8, "eight curves");
    // Zero phase carries no current; a quarter flux does.
    let current_at = |name: &str| -> f64 {
        rows.iter().find(|r| r[0] == name).unwrap()[7].parse().unwrap()
    };
    assert!(current_at("mi_phi_0").abs() < 1e-10);
    assert!(current_at("sf_phi_pi_over_10").abs() > 1e-3);
    for curve in ["mi_phi_0", "sf_phi_pi_over_2"] {
        let path = dir.join(format!("fig7_momentum_{curve}.csv"));
        assert!(path.is_file(), "momentum file for {curve}");
    }
    // Deep Mott gas: distribution close to flat, visibility small.
    let vis_mi: f64 = rows.iter().find(|r| r[0] == "mi_phi_0").unwrap()[8].parse().unwrap();
    let vis_sf: f64 = rows.iter().find(|r| r[0] == "sf_phi_0").unwrap()[8].parse().unwrap();
    assert!(vis_mi < 0.5 && vis_sf > vis_mi, "vis_mi = {vis_mi}, vis_sf = {vis_sf}");
}

#[test]
fn spectrum_projection_probabilities_close_to_one() {
    let dir = scratch("fig9");
    // The fig9 preset itself is heavier (L = 4 product space); a 3-site
    // variant exercises the same path quickly.
    let text = "mode = spectrum-projection
L = 3
N_A = 3
N_B = 3
V = 50
J_A = 0.05
U_A = 1
phi_A = 0.3
J_B = 1
U_B = 1
phi_B = 0.3
";
    let cfg = write_config(&dir, "proj.ini", text);
    let out = run(&[
        "spectrum-projection",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let csv = fs::read_to_string(dir.join("proj.csv")).unwrap();
    let rows = data_lines(&csv);
    let total: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-10, "probabilities sum to {total}");
    let p_star = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(p_star > 0.9, "one eigenstate dominates: p* = {p_star}");
    assert!(csv.contains("# p_star = "), "peak echoed in metadata");
}

#[test]
fn visibility_scan_matches_the_closed_form_in_the_deep_mott_regime() {
    let dir = scratch("vis");
    let text = "mode = visibility-scan
L = 4
N_B = 4
J_B = 0.01
U_B = 1
sweep.key = phi_B
sweep.values = 0.1, 0.3, 0.6
";
    let cfg = write_config(&dir, "scan.ini", text);
    let out = run(&[
        "visibility-scan",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let csv = fs::read_to_string(dir.join("scan.csv")).unwrap();
    for row in data_lines(&csv) {
        let numeric: f64 = row[3].parse().unwrap();
        let formula: f64 = row[4].parse().unwrap();
        assert!(
            (numeric - formula).abs() < 5e-4,
            "phi = {}: numeric {numeric} vs formula {formula}",
            row[0]
        );
    }
}
