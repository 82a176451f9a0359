//! End-to-end checks of the CLI surface: file formats, exit codes, manifests.

use std::path::Path;
use std::process::{Command, Output};

fn stepkit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stepkit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to run stepkit")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

#[test]
fn gen_terrain_roundtrips_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = stepkit(
        &[
            "gen-terrain", "--kind", "pyramid", "--step-height", "0.25", "--tread", "0.30",
            "--width-cells", "81", "--length-cells", "81", "-o", "stairs.emap",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let map = stepkit_core::terrain::ElevationMap::load(&dir.path().join("stairs.emap")).unwrap();
    assert_eq!(map.width_cells, 81);

    let again = stepkit(
        &[
            "gen-terrain", "--kind", "pyramid", "--step-height", "0.25", "--tread", "0.30",
            "--width-cells", "81", "--length-cells", "81", "-o", "stairs2.emap",
        ],
        dir.path(),
    );
    assert!(again.status.success());
    assert_eq!(read(dir.path(), "stairs.emap"), read(dir.path(), "stairs2.emap"));

    // manifest echoes the resolved config
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["subcommand"], "gen-terrain");
    assert_eq!(manifest["config"]["terrain"]["step_height"], 0.25);
}

#[test]
fn gen_terrain_rejects_invalid_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = stepkit(
        &["gen-terrain", "--kind", "pyramid", "--step-height", "-1", "-o", "bad.emap"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("bad.emap").exists());
}

#[test]
fn plan_reports_cell_and_costs() {
    let dir = tempfile::tempdir().unwrap();
    let gen = stepkit(
        &["gen-terrain", "--kind", "flat", "--width-cells", "49", "--length-cells", "37",
          "-o", "flat.emap"],
        dir.path(),
    );
    assert!(gen.status.success());
    let out = stepkit(
        &["plan", "--map", "flat.emap", "--vx", "1.0", "--xi-x", "0.16", "--xi-y", "0.044",
          "--cost-pgm", "cost.pgm"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let plan: serde_json::Value = serde_json::from_slice(&read(dir.path(), "plan.json")).unwrap();
    // near the nominal state the plan lands close to (L_nom, W_nom) = (0.4, 0.2)
    let u = plan["u_t"].as_array().unwrap();
    assert!((u[0].as_f64().unwrap() - 0.4).abs() < 0.06);
    assert!((u[1].as_f64().unwrap() - 0.2).abs() < 0.06);
    assert!(plan["cost"]["total"].as_f64().unwrap() >= 0.0);
    let pgm = read(dir.path(), "cost.pgm");
    assert!(pgm.starts_with(b"P5\n"));
    assert!(pgm.contains(&255u8), "argmin mark missing");
}

#[test]
fn plan_steepness_weight_moves_choice_off_edges() {
    let dir = tempfile::tempdir().unwrap();
    let gen = stepkit(
        &["gen-terrain", "--kind", "pyramid", "--step-height", "0.25", "--tread", "0.30",
          "--width-cells", "121", "--length-cells", "121", "-o", "stairs.emap"],
        dir.path(),
    );
    assert!(gen.status.success());
    let common = [
        "plan", "--map", "stairs.emap", "--vx", "1.0", "--xi-x", "0.16", "--xi-y", "0.044",
        "--support-x", "0.6", "--support-y", "0.0",
    ];
    let run = |alpha3: &str, out: &str| {
        let mut args: Vec<&str> = common.to_vec();
        args.extend_from_slice(&["--alpha3", alpha3, "-o", out]);
        let o = stepkit(&args, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&read(dir.path(), out)).unwrap();
        v["cost"]["steepness"].as_f64().unwrap() / alpha3.parse::<f64>().unwrap()
    };
    let raw_steep_lo = run("0.001", "lo.json");
    let raw_steep_hi = run("100", "hi.json");
    assert!(
        raw_steep_hi <= raw_steep_lo + 1e-12,
        "heavier steepness weight should not pick steeper cells ({raw_steep_hi} vs {raw_steep_lo})"
    );
}

#[test]
fn plan_without_candidates_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let gen = stepkit(&["gen-terrain", "--kind", "flat", "-o", "flat.emap"], dir.path());
    assert!(gen.status.success());
    let out = stepkit(
        &["plan", "--map", "flat.emap", "--support-x", "50"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no_plan"), "stderr: {err}");
}

#[test]
fn plan_missing_map_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = stepkit(&["plan", "--map", "nope.emap"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = stepkit(
        &["simulate", "--terrain", "flat", "--width-cells", "400", "--length-cells", "60",
          "--speed", "1.0", "--goal", "5", "--max-steps", "40"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("success"), "stdout: {stdout}");

    let csv = String::from_utf8(read(dir.path(), "trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        stepkit_core::sim::StepTrace::CSV_HEADER
    );
    assert!(lines.next().unwrap().split(',').count() == 19);
    let metrics: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "metrics.json")).unwrap();
    assert_eq!(metrics["outcome"], "success");
}

#[test]
fn simulate_ensemble_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = stepkit(
        &["simulate", "--terrain", "pyramid", "--step-height", "0.25", "--tread", "0.20",
          "--width-cells", "321", "--length-cells", "321",
          "--ensemble", "8", "--speeds", "0.5,1.5", "--seed", "3"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["speeds"].as_array().unwrap().len(), 2);
    assert_eq!(report["n_walkers"], 8);
    assert!(report["success_ratio"].as_array().unwrap().len() == 2);
    assert!(report["mae_quantiles"]["p50"].as_f64().is_some());
    assert!(report["seeds_digest"].as_str().unwrap().len() == 16);
}

#[test]
fn bench_smoke_and_config_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let out = stepkit(&["bench", "--batch", "64", "--reps", "3", "--workers", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&read(dir.path(), "bench.json")).unwrap();
    assert_eq!(report["batch_size"], 64);
    assert_eq!(report["correctness_checked"], true);
    assert!(report["speedup"].as_f64().unwrap() > 0.0);
    // reference constants are recorded, not asserted
    assert_eq!(report["reference_gpu_ms_per_step"], 4.0);
    assert_eq!(report["reference_gpu_speedup_vs_parallel_mpc"], 25.0);

    // the manifest reproduces the run via --config (config overrides flags,
    // so rerun from a fresh working directory)
    let dir2 = tempfile::tempdir().unwrap();
    std::fs::copy(dir.path().join("manifest.json"), dir2.path().join("m.json")).unwrap();
    let out2 = stepkit(&["bench", "--config", "m.json"], dir2.path());
    assert!(out2.status.success(), "{}", String::from_utf8_lossy(&out2.stderr));
    let rerun: serde_json::Value =
        serde_json::from_slice(&read(dir2.path(), "bench.json")).unwrap();
    assert_eq!(rerun["batch_size"], 64);
}
