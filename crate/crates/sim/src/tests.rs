//! End-to-end command tests, run in-process through the same entry point as `main`.

use std::fs;
use std::path::Path;

use crate::{execute, Outcome};

fn dobc(args: &[&str], out: &Path) -> Outcome {
    let mut argv = vec!["dobc".to_string()];
    argv.extend(args.iter().map(|a| a.to_string()));
    argv.push("--out".into());
    argv.push(out.display().to_string());
    execute(argv)
}

fn stderr(o: &Outcome) -> &str {
    &o.stderr
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn simulate_writes_trace_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = dobc(&["simulate", "--case", "lfc-b", "--horizon", "12"], &out);
    assert!((o.code == 0), "{}", stderr(&o));
    let trace = read(&out, "trace.csv");
    assert!(trace.starts_with("t,delta_f,"));
    assert_eq!(trace.lines().count(), 12_001 + 1);
    assert!(!trace.contains('\r'));
    assert!(read(&out, "report.csv").starts_with("case,ISE,ITSE,IAE,ITAE,MO,Settling Time,settled\nlfc-b/dobc,"));
    assert!(read(&out, "plot_disturbance.csv").starts_with("t,d_hat,d_l\n"));

    let manifest: toml::Table = read(&out, "manifest.toml").parse().unwrap();
    assert_eq!(manifest["command"].as_str(), Some("simulate"));
    assert_eq!(manifest["version"].as_str(), Some(env!("CARGO_PKG_VERSION")));
    assert_eq!(manifest["config"]["scenario"]["case"].as_str(), Some("lfc-b"));
    assert_eq!(manifest["config"]["solver"]["horizon"].as_float(), Some(12.0));
}

#[test]
fn manifest_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let o = dobc(&["simulate", "--case", "lfc-d", "--seed", "3", "--horizon", "4"], &first);
    assert!((o.code == 0), "{}", stderr(&o));
    let manifest: toml::Table = read(&first, "manifest.toml").parse().unwrap();
    let cfg_path = tmp.path().join("replay.toml");
    fs::write(&cfg_path, toml::to_string(manifest["config"].as_table().unwrap()).unwrap()).unwrap();
    let second = tmp.path().join("second");
    let o = dobc(&["--config", cfg_path.to_str().unwrap(), "simulate"], &second);
    assert!((o.code == 0), "{}", stderr(&o));
    assert_eq!(read(&first, "trace.csv"), read(&second, "trace.csv"));
}

#[test]
fn observer_can_be_disabled() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dobc(&["simulate", "--case", "avr-a", "--no-observer"], tmp.path());
    assert!((o.code == 0), "{}", stderr(&o));
    assert!(read(tmp.path(), "report.csv").contains("avr-a/pid,"));
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dobc(&["--profile", "no-such-profile", "simulate", "--case", "lfc-b"], tmp.path());
    assert_eq!(Some(o.code), Some(2));
    assert!(stderr(&o).contains("no-such-profile"));

    let o = dobc(&["simulate", "--case", "lfc-z"], tmp.path());
    assert_eq!(Some(o.code), Some(2));

    let o = dobc(&["simulate", "--case", "lfc-b", "--dt", "0"], tmp.path());
    assert_eq!(Some(o.code), Some(2));
    assert!(stderr(&o).contains("solver.dt"));

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[observer.lfc]\nlambda = 0.01\norder = 3\nsaturaton = 5\n").unwrap();
    let o = dobc(&["--config", cfg.to_str().unwrap(), "simulate", "--case", "lfc-b"], tmp.path());
    assert_eq!(Some(o.code), Some(2));
    assert!(stderr(&o).contains("saturaton"), "{}", stderr(&o));

    let o = dobc(&["simulate", "--bogus-flag"], tmp.path());
    assert_eq!(Some(o.code), Some(2));
}

#[test]
fn config_file_overrides_profile_and_flags_override_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[scenario]\ncase = \"lfc-a\"\n[solver]\ndt = 0.002\nseed = 4\n").unwrap();
    let o = dobc(&["--config", cfg.to_str().unwrap(), "--seed", "9", "config"], tmp.path());
    assert!((o.code == 0), "{}", stderr(&o));
    let resolved: toml::Table = o.stdout.parse().unwrap();
    assert_eq!(resolved["scenario"]["case"].as_str(), Some("lfc-a"));
    assert_eq!(resolved["solver"]["dt"].as_float(), Some(0.002));
    assert_eq!(resolved["solver"]["seed"].as_integer(), Some(9));
    assert_eq!(resolved["controller"]["lfc"]["ki"].as_float(), Some(0.1));
}

#[test]
fn profile_directory_layers_over_its_base() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("slow-governor.toml"), "profile = \"paper-appendix-a\"\n[controller.lfc]\nki = 0.05\n")
        .unwrap();
    let dir = tmp.path().display().to_string();
    let o = execute(["dobc", "--profile-dir", &dir, "--profile", "slow-governor", "config"]);
    assert!((o.code == 0), "{}", stderr(&o));
    let resolved: toml::Table = o.stdout.parse().unwrap();
    assert_eq!(resolved["controller"]["lfc"]["ki"].as_float(), Some(0.05));
    assert!(resolved["plant"]["lfc"].is_table());
}

#[test]
fn sweep_reports_sixteen_rows_in_test_order() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dobc(&["sweep", "--workers", "3", "--horizon", "10"], tmp.path());
    assert!((o.code == 0), "{}", stderr(&o));
    let csv = read(tmp.path(), "sweep.csv");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 16);
    for (i, r) in rows.iter().enumerate() {
        assert!(r.starts_with(&format!("{},", i + 1)));
        assert!(r.ends_with(",ok"));
    }
    assert!(read(tmp.path(), "sweep_summary.txt").starts_with("worst case: test 16"));
}

#[test]
fn sweep_grid_file() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = tmp.path().join("grid.csv");
    fs::write(&grid, "zeta_l_pv,zeta_u_pv,zeta_l_L,zeta_u_L\n0.9,1.1,0.9,1.1\n0.5,1.5,0.5,1.5\n").unwrap();
    let o = dobc(&["sweep", "--grid", grid.to_str().unwrap(), "--horizon", "8"], &tmp.path().join("g"));
    assert!((o.code == 0), "{}", stderr(&o));
    assert_eq!(read(&tmp.path().join("g"), "sweep.csv").lines().count(), 3);
    assert!(o.stdout.contains("test 2"));

    fs::write(&grid, "zeta_l_pv,zeta_u_pv,zeta_l_L,zeta_u_L\n").unwrap();
    let o = dobc(&["sweep", "--grid", grid.to_str().unwrap()], tmp.path());
    assert_eq!(Some(o.code), Some(2));

    fs::write(&grid, "zeta_l_pv,zeta_u_pv,zeta_l_L,zeta_u_L\n1.2,1.1,0.9,1.1\n").unwrap();
    let o = dobc(&["sweep", "--grid", grid.to_str().unwrap()], tmp.path());
    assert_eq!(Some(o.code), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn sweep_where_every_run_diverges_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dobc(&["sweep", "--dt", "0.5"], tmp.path());
    assert_eq!(Some(o.code), Some(1));
    assert!(read(tmp.path(), "sweep.csv").lines().skip(1).all(|l| l.contains("diverged")));
}

#[test]
fn bode_summary_and_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dobc(&["bode"], tmp.path());
    assert!((o.code == 0), "{}", stderr(&o));
    let summary = read(tmp.path(), "filter_summary.csv");
    assert_eq!(summary.lines().count(), 12);
    assert_eq!(read(tmp.path(), "bode.csv").lines().count(), 1 + 11 * 400);

    let o = dobc(&["bode", "--lambda", "0.01", "--order", "2"], tmp.path());
    assert!((o.code == 0));
    let row = read(tmp.path(), "filter_summary.csv").lines().nth(1).unwrap().to_string();
    let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    assert!((cols[4] - 64.359).abs() < 1e-3, "{row}");
    assert!((cols[2] + 8.686e-6).abs() < 1e-8, "{row}");

    let o = dobc(&["bode", "--omega-min", "0.1", "--omega-max", "0.1", "--points", "1", "--lambda", "1"], tmp.path());
    assert!((o.code == 0), "{}", stderr(&o));
    assert_eq!(read(tmp.path(), "bode.csv").lines().count(), 2);

    let o = dobc(&["bode", "--omega-min", "10", "--omega-max", "1"], tmp.path());
    assert_eq!(Some(o.code), Some(2));
    let o = dobc(&["bode", "--omega-min", "0"], tmp.path());
    assert_eq!(Some(o.code), Some(2));

    let o = dobc(&["--profile", "paper-hardware-b", "bode", "--target", "hardware-plant"], tmp.path());
    assert!((o.code == 0), "{}", stderr(&o));
    assert!(read(tmp.path(), "poles.csv").contains("hardware-plant,-16.2"));
}

#[test]
fn sysid_synthetic_round_trip_and_stability() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dobc(&["--profile", "paper-hardware-b", "sysid", "--synthetic", "--ki", "0.01"], tmp.path());
    assert!((o.code == 0), "{}", stderr(&o));
    let profile: toml::Table = read(tmp.path(), "identified_profile.toml").parse().unwrap();
    let hw = &profile["plant"]["hardware"];
    for (k, want) in [("b0", 2.68e5), ("a1", 303.4), ("a0", 4661.0)] {
        let got = hw[k].as_float().unwrap();
        assert!((got / want - 1.0).abs() < 0.02, "{k} = {got}");
    }
    let report = read(tmp.path(), "sysid_report.csv");
    assert!(report.contains("closed_loop_stable_routh,true"));
    assert!(read(tmp.path(), "sysid_poles.csv").lines().filter(|l| l.starts_with("closed_loop")).count() == 3);

    // The written profile identifies the same plant when fed back in.
    let again = tmp.path().join("again");
    let o = dobc(
        &[
            "--profile",
            "paper-hardware-b",
            "--config",
            tmp.path().join("identified_profile.toml").to_str().unwrap(),
            "sysid",
            "--data",
            tmp.path().join("dataset.csv").to_str().unwrap(),
        ],
        &again,
    );
    assert!((o.code == 0), "{}", stderr(&o));
}

#[test]
fn sysid_input_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    fs::write(&data, "t,y\n0,1\n0.1,2\n").unwrap();
    let o = dobc(&["sysid", "--data", data.to_str().unwrap()], tmp.path());
    assert_eq!(Some(o.code), Some(2));

    let mut body = String::from("t,u,y\n");
    for k in 0..50 {
        body.push_str(&format!("{},{},{}\n", k as f64 * 0.01, 1.0, 0.5));
    }
    body.push_str("0.5,oops,1\n");
    fs::write(&data, body).unwrap();
    let o = dobc(&["sysid", "--data", data.to_str().unwrap()], tmp.path());
    assert_eq!(Some(o.code), Some(2));
    assert!(stderr(&o).contains("line 52"), "{}", stderr(&o));

    let o = dobc(&["sysid", "--data", tmp.path().join("missing.csv").to_str().unwrap()], tmp.path());
    assert_eq!(Some(o.code), Some(2));
}

#[test]
fn report_pairs_baseline_and_observer() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dobc(&["report", "--case", "lfc-c"], tmp.path());
    assert!((o.code == 0), "{}", stderr(&o));
    let csv = read(tmp.path(), "report.csv");
    let names: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["lfc-c/integral", "lfc-c/dobc"]);
}

#[test]
fn profiles_are_listed() {
    let o = execute(["dobc", "profiles"]);
    assert_eq!(o.stdout, "paper-appendix-a\npaper-hardware-b\n");
}
