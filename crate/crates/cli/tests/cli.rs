use std::path::Path;
use std::process::{Command, Output};

use hdf::experiments::{read_points, seeded_vector, synth_points};
use hdf::hdf::{factor_with, HdfConfig, TauMode};
use hdf::kernels::IsotropicKernel;

fn hdf_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = hdf_cmd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn code(args: &[&str]) -> i32 {
    hdf_cmd(args).status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_is_reproducible_and_scaled() {
    let a = ok(&["synth", "--n", "3", "--d", "3", "--seed", "7"]);
    let b = ok(&["synth", "--n", "3", "--d", "3", "--seed", "7"]);
    assert_eq!(a, b);
    let x = read_points(&a[..]).unwrap();
    assert_eq!(x.shape(), (3, 3));
    let max = (0..3).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    assert!((max - 1.0).abs() <= 1e-12);
    assert_ne!(a, ok(&["synth", "--n", "3", "--d", "3", "--seed", "8"]));
}

#[test]
fn saved_factorization_matvec_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("k.hdf");
    ok(&[
        "factor", "--n", "400", "--d", "4", "--seed", "3", "--kernel", "gaussian", "--eps", "1e-5", "--mode",
        "strict", "--out", path_str(&file),
    ]);
    let stdout = ok(&["matvec", "--in", path_str(&file), "--seed", "11"]);
    let text = String::from_utf8(stdout).unwrap();
    let from_file: Vec<f64> = text.lines().skip(1).map(|l| l.parse().unwrap()).collect();

    let x = synth_points(400, 4, 3).unwrap();
    let f = factor_with(
        &IsotropicKernel::gaussian(1.0).unwrap(),
        1e-5,
        &x,
        None,
        &HdfConfig::default().with_mode(TauMode::Strict),
    )
    .unwrap();
    let direct = f.matvec(&seeded_vector(400, 11)).unwrap();
    assert_eq!(from_file.len(), direct.len());
    for (a, b) in from_file.iter().zip(&direct) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn matvec_reads_vector_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("k.hdf");
    let vec_path = dir.path().join("w.csv");
    ok(&["factor", "--n", "50", "--d", "3", "--out", path_str(&file)]);
    let mut body = String::from("w\n");
    for v in seeded_vector(50, 5) {
        body.push_str(&format!("{v:.16e}\n"));
    }
    std::fs::write(&vec_path, body).unwrap();
    let a = ok(&["matvec", "--in", path_str(&file), "--vector", path_str(&vec_path)]);
    let b = ok(&["matvec", "--in", path_str(&file), "--seed", "5"]);
    assert_eq!(a, b);
    std::fs::write(&vec_path, "1\n2\n").unwrap();
    assert_eq!(code(&["matvec", "--in", path_str(&file), "--vector", path_str(&vec_path)]), 2);
}

#[test]
fn exit_codes_follow_error_kinds() {
    assert_eq!(code(&["factor", "--n", "20", "--eps", "-1"]), 2);
    assert_eq!(code(&["factor", "--n", "20", "--d", "2"]), 2);
    assert_eq!(code(&["factor", "--n", "20", "--kernel", "laplace"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["factor", "--n", "20", "--kernel", "cauchy", "--sigma", "0.01", "--eps", "1e-300"]), 4);
    assert_eq!(
        code(&["factor", "--n", "200", "--d", "3", "--kernel", "matern15", "--eps", "1e-4", "--mode", "strict"]),
        3
    );
    assert_eq!(code(&["matvec", "--in", "/nonexistent/k.hdf"]), 1);
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "a,b,y\n0.1,0.2,1\n0.3,oops,2\n").unwrap();
    let out = hdf_cmd(&["krr", "--points", path_str(&p), "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn krr_accepts_named_label_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("data.csv");
    let mut body = String::from("target,f0,f1,f2\n");
    for i in 0..120 {
        let t = i as f64 / 120.0;
        body.push_str(&format!("{},{},{},{}\n", (3.0 * t).sin(), t, (t * 7.0).fract(), 1.0 - t));
    }
    std::fs::write(&p, body).unwrap();
    let args = [
        "krr", "--points", path_str(&p), "--labels-col", "target", "--kernel", "gaussian", "--clusters", "3",
        "--trials", "2",
    ];
    let out = String::from_utf8(ok(&args)).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "kernel,method,mse_median,mse_min,mse_max,converged_trials,trials");
    assert_eq!(lines.count(), 2);
}

#[test]
fn every_command_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("k.hdf");
    ok(&["factor", "--n", "200", "--d", "3", "--out", path_str(&file)]);
    let commands: Vec<Vec<&str>> = vec![
        vec!["synth", "--n", "50", "--d", "4", "--seed", "2"],
        vec!["factor", "--n", "200", "--d", "3", "--seed", "2", "--error", "sampled"],
        vec!["matvec", "--in", path_str(&file), "--seed", "2"],
        vec!["bench-rank", "--n", "200", "--d", "3", "--kernel", "cauchy", "--eps", "1e-1,1e-2"],
        vec!["bench-time", "--n", "200,400", "--trials", "1"],
        vec!["bench-errtime", "--n", "200", "--kernel", "matern25", "--eps", "1e-2,1e-3"],
        vec!["nystrom", "--n", "200", "--rank", "20", "--error", "exact"],
        vec!["krr", "--n", "300", "--d", "4", "--kernel", "cauchy", "--clusters", "3", "--trials", "2"],
        vec!["diag-harmonics", "--n", "80", "--d", "3,5", "--k", "0,2"],
    ];
    for cmd in commands {
        let mut args = cmd.clone();
        args.extend(["--threads", "1", "--no-timing"]);
        let a = ok(&args);
        let b = ok(&args);
        assert!(!a.is_empty(), "{cmd:?} produced no output");
        assert_eq!(a, b, "{cmd:?} differs between runs");
    }
}

#[test]
fn outputs_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.csv");
    let blocks = dir.path().join("blocks.csv");
    let trials = dir.path().join("trials.csv");
    let stdout = ok(&[
        "krr", "--n", "300", "--d", "4", "--kernel", "cauchy", "--clusters", "3", "--trials", "2", "--out",
        path_str(&summary), "--blocks-out", path_str(&blocks), "--trials-out", path_str(&trials),
    ]);
    assert!(stdout.is_empty());
    let b = std::fs::read_to_string(&blocks).unwrap();
    assert!(b.starts_with("trial,kernel,method,block,size,rank,rel_error\n"));
    assert_eq!(std::fs::read_to_string(&trials).unwrap().lines().count(), 1 + 2 * 2);
    assert_eq!(std::fs::read_to_string(&summary).unwrap().lines().count(), 3);
}
