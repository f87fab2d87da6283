use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spinflip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinflip"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

const SMALL_SIM: &[&str] = &[
    "--set",
    "n_traj=6",
    "--set",
    "t_total=40",
    "--set",
    "burn_in=4",
    "--set",
    "segment_len=20",
    "--set",
    "grid_count=64",
    "--set",
    "svg=false",
];

#[test]
fn spectra_writes_csv_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinflip(
        dir.path(),
        &["spectra", "--out-dir", "o", "--set", "grid_count=128"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("o/spectra.csv"));
    assert_eq!(
        header,
        ["omega_ghz", "s11", "s22", "s33", "s23", "c_plus_minus"]
    );
    assert_eq!(rows.len(), 128);
    for r in &rows {
        let c = (r[1] - r[2]) / (r[1] + r[2]);
        assert!((c - r[5]).abs() < 1e-12);
    }
    let meta: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("o/spectra.csv.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["config"]["grid_count"], 128);
    assert_eq!(meta["command"], "spectra");
    assert!(meta["version"].is_string());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinflip(dir.path(), &["spectra", "--set", "grid_count=0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));

    fs::write(
        dir.path().join("c.json"),
        "{\n  \"kappa\": 300,\n  \"kapa\": 1\n}\n",
    )
    .unwrap();
    let out = spinflip(dir.path(), &["spectra", "--config", "c.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kapa") && err.contains("line 3"), "{err}");

    let out = spinflip(dir.path(), &["stability", "--set", "pump_r=0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nonclassical_pump_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--set", "pump_p=1", "--set", "pump_r=6"];
    args.extend_from_slice(SMALL_SIM);
    let out = spinflip(dir.path(), &args);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("positive semidefinite") && err.contains("p·r"),
        "{err}"
    );
    // The analytic route still covers this regime.
    let out = spinflip(
        dir.path(),
        &[
            "detect",
            "--set",
            "pump_p=1",
            "--set",
            "pump_r=6",
            "--set",
            "alpha=0",
            "--set",
            "svg=false",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unstable_operating_point_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--set", "kappa_a=5"];
    args.extend_from_slice(SMALL_SIM);
    let out = spinflip(dir.path(), &args);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_is_reproducible_and_reruns_from_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "simulate",
        "--out-dir",
        "a",
        "--seed",
        "7",
        "--set",
        "dump_trajectories=2",
    ];
    args.extend_from_slice(SMALL_SIM);
    assert_eq!(spinflip(dir.path(), &args).status.code(), Some(0));
    args[2] = "b";
    assert_eq!(spinflip(dir.path(), &args).status.code(), Some(0));
    let out = spinflip(
        dir.path(),
        &[
            "simulate",
            "--from-meta",
            "a/estimate.csv.meta.json",
            "--out-dir",
            "c",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    for name in [
        "estimate.csv",
        "compare.csv",
        "variance.csv",
        "trajectories/traj_00001.csv",
    ] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        assert_eq!(
            a,
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
        assert_eq!(
            a,
            fs::read(dir.path().join("c").join(name)).unwrap(),
            "{name}"
        );
    }
    let (header, rows) = read_csv(&dir.path().join("a/trajectories/traj_00000.csv"));
    assert_eq!(header, ["t", "dS1", "dD", "dS2", "dS3", "dd"]);
    assert_eq!(rows.len(), 20_000);

    args[4] = "8";
    args[2] = "d";
    assert_eq!(spinflip(dir.path(), &args).status.code(), Some(0));
    assert_ne!(
        fs::read(dir.path().join("a/estimate.csv")).unwrap(),
        fs::read(dir.path().join("d/estimate.csv")).unwrap()
    );
}

#[test]
fn every_command_runs() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["stability", "detect", "sweep", "reproduce-figures"] {
        let out = spinflip(
            dir.path(),
            &[cmd, "--out-dir", "o", "--set", "grid_count=64"],
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in [
        "stability.csv",
        "detect_intensity.csv",
        "squeezing.csv",
        "sweep.csv",
        "fig3.csv",
        "fig5.csv",
    ] {
        assert!(dir.path().join("o").join(f).exists(), "{f}");
        assert!(
            dir.path().join("o").join(format!("{f}.meta.json")).exists(),
            "{f}"
        );
    }
    let (header, rows) = read_csv(&dir.path().join("o/squeezing.csv"));
    assert_eq!(
        header,
        ["r", "this_laser", "nondegenerate_ref", "short_lower_ref"]
    );
    assert!(rows.iter().all(|r| (r[1] < 1.0) == (r[0] > 5.0)));
}
