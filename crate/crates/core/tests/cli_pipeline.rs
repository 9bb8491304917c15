use std::fs;
use std::path::Path;
use std::process::Command;

use dlrrf::cli::{run_cli, sidecar_path, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, R_FILE, Y_FILE, Z_FILE};
use dlrrf::io::{read_tensor, write_tensor};
use dlrrf::Tensor3;

fn cli(args: &[&str]) -> i32 {
    run_cli(std::iter::once("dlrrf").chain(args.iter().copied()))
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// synth → degrade → fuse → eval → render in `dir`, returning the produced files.
fn pipeline(dir: &Path, seed: &str) -> Vec<String> {
    let truth = p(dir, "x.tensor");
    assert_eq!(
        cli(&[
            "synth", "--out", &truth, "--W", "16", "--H", "16", "--S", "12", "--endmembers", "3", "--seed", seed,
            "--dr-mag", "0.05", "--change-frac", "0.1",
        ]),
        EXIT_OK
    );
    assert_eq!(
        cli(&["degrade", "--in", &truth, "--sf", "2", "--blur-sigma", "1", "--hsi-snr", "30", "--msi-snr", "40", "--s", "4", "--seed", seed]),
        EXIT_OK
    );
    let config = p(dir, "fuse.cfg");
    fs::write(&config, "max_outer = 30\ns1 = 3\ns2 = 1\n").unwrap();
    let (xh, trace) = (p(dir, "xhat.tensor"), p(dir, "trace.csv"));
    assert_eq!(
        cli(&[
            "fuse", "--y", &p(dir, Y_FILE), "--z", &p(dir, Z_FILE), "--r", &p(dir, R_FILE), "--config", &config,
            "--out", &xh, "--trace", &trace,
        ]),
        EXIT_OK
    );
    let metrics = p(dir, "metrics.csv");
    assert_eq!(
        cli(&["eval", "--ref", &truth, "--est", &xh, "--sf", "2", "--out", &metrics, "--per-band", &p(dir, "bands.csv")]),
        EXIT_OK
    );
    assert_eq!(cli(&["render", "--in", &xh, "--bands", "10,5,1", "--out", &p(dir, "rgb.ppm")]), EXIT_OK);
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn pipeline_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_a = pipeline(a.path(), "7");
    let files_b = pipeline(b.path(), "7");
    assert_eq!(files_a, files_b);
    for name in [
        "x.tensor",
        "x.tensor.scenario",
        "y.tensor",
        "z.tensor",
        "r.tensor",
        "srf_true.tensor",
        "x_changed.tensor",
        "degrade.scenario",
        "xhat.tensor",
        "xhat.tensor.srf",
        "trace.csv",
        "metrics.csv",
        "bands.csv",
        "rgb.ppm",
    ] {
        assert!(files_a.iter().any(|f| f == name), "missing {name}");
        let ba = fs::read(a.path().join(name)).unwrap();
        let bb = fs::read(b.path().join(name)).unwrap();
        assert!(ba == bb, "{name} differs between runs");
    }
    let c = tempfile::tempdir().unwrap();
    pipeline(c.path(), "8");
    assert_ne!(
        fs::read(a.path().join("y.tensor")).unwrap(),
        fs::read(c.path().join("y.tensor")).unwrap()
    );
}

#[test]
fn pipeline_outputs_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), "3");
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next().unwrap(), "psnr_db,ssim,ergas,sam_deg,rmse,uiqi");
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(values.len(), 6);
    assert!(values.iter().all(|v| v.is_finite()));

    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let rows: Vec<&str> = trace.lines().collect();
    assert_eq!(rows[0], "iter,h,f_explicit_or_blank,eta_k");
    assert!(rows[1].starts_with("0,") && rows[1].ends_with(",,"));
    assert_eq!(rows.len(), 2 + 30);
    assert!(rows[2].starts_with("1,"));

    let sidecar = fs::read_to_string(sidecar_path(&dir.path().join("x.tensor"))).unwrap();
    assert!(sidecar.contains("seed = 3"));
    let ppm = fs::read(dir.path().join("rgb.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n16 16\n255\n"));
    assert_eq!(ppm.len(), b"P6\n16 16\n255\n".len() + 3 * 256);
}

#[test]
fn self_evaluation_hits_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let x = p(dir.path(), "x.tensor");
    assert_eq!(cli(&["synth", "--out", &x, "--W", "8", "--H", "8", "--S", "6"]), EXIT_OK);
    let out = p(dir.path(), "m.csv");
    assert_eq!(cli(&["eval", "--ref", &x, "--est", &x, "--sf", "2", "--out", &out]), EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 300.0);
    assert_eq!(row[4], 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&[]), EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(cli(&["synth", "--out", "x", "--W", "4"]), EXIT_USAGE);
    assert_eq!(cli(&["synth", "--out", "x", "--W", "4", "--H", "4", "--S", "4", "--unknown", "1"]), EXIT_USAGE);
    assert_eq!(cli(&["render", "--in", "a", "--bands", "1,2", "--out", "b"]), EXIT_USAGE);
    assert_eq!(cli(&["--help"]), EXIT_OK);
    assert_eq!(cli(&["eval", "--ref", &p(dir.path(), "missing"), "--est", "x", "--sf", "2"]), EXIT_RUNTIME);

    // HSI and MSI disagree with the spectral response
    let y = p(dir.path(), "y.tensor");
    let z = p(dir.path(), "z.tensor");
    let r = p(dir.path(), "r.tensor");
    write_tensor(&y, &Tensor3::filled(4, 4, 6, 1.0)).unwrap();
    write_tensor(&z, &Tensor3::filled(8, 8, 3, 1.0)).unwrap();
    write_tensor(&r, &Tensor3::filled(3, 5, 1, 0.2)).unwrap();
    let code = cli(&["fuse", "--y", &y, "--z", &z, "--r", &r, "--out", &p(dir.path(), "o"), "--trace", &p(dir.path(), "t")]);
    assert_eq!(code, EXIT_RUNTIME);
}

#[test]
fn binary_reports_on_stderr() {
    let exe = env!("CARGO_BIN_EXE_dlrrf");
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(exe)
        .args(["eval", "--ref", &p(dir.path(), "nope"), "--est", "nope", "--sf", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_RUNTIME));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let usage = Command::new(exe).arg("fuse").output().unwrap();
    assert_eq!(usage.status.code(), Some(EXIT_USAGE));
    assert!(!usage.stderr.is_empty());

    let x = p(dir.path(), "x.tensor");
    let ok = Command::new(exe)
        .args(["synth", "--out", &x, "--W", "4", "--H", "4", "--S", "3", "--endmembers", "2"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert_eq!(read_tensor(&x).unwrap().dims(), [4, 4, 3]);
}
