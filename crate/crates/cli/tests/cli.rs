use std::path::Path;
use std::process::{Command, Output};

fn tdns(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_tdns"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn column(csv: &str, idx: usize) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn dissipation_only_energy_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tdns(
        tmp.path(),
        "simulate",
        "map.kind = identity\nbasis.m = 4\nsolver.T = 0.1\nsolver.dt = 1e-3\nic.kind = bubble\nic.amplitude = 50\noutput.field_resolution = 4\n",
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let energy = std::fs::read_to_string(tmp.path().join("out/energy.csv")).unwrap();
    assert!(energy.starts_with("t,energy,grad_energy,W\n"));
    let e = column(&energy, 1);
    assert_eq!(e.len(), 101);
    assert!(e.windows(2).all(|w| w[1] < w[0]));
    let field = std::fs::read_to_string(tmp.path().join("out/field_t100.csv")).unwrap();
    assert!(field.starts_with("x1,x2,u1,u2,inside\n"));
    assert_eq!(field.lines().count(), 17);
    let manifest = std::fs::read_to_string(tmp.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("grid.n_time = 100\n"));
    assert!(manifest.contains("coeffs.csv\n"));
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "map.kind = wave_shear\nbasis.m = 5\nsolver.T = 0.05\nsolver.dt = 1e-3\nnoise.kind = mode\nnoise.index = 2\nnoise.amplitude = 0.7\noutput.field_stride = 25\noutput.field_resolution = 6\noutput.tensors = true\n";
    assert!(tdns(tmp.path(), "simulate", cfg, &["--seed", "17"]).status.success());
    let snapshot = |p: &Path| {
        let mut files: Vec<_> = std::fs::read_dir(p).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.into_iter().map(|f| (f.clone(), std::fs::read(f).unwrap())).collect::<Vec<_>>()
    };
    let first = snapshot(&tmp.path().join("out"));
    assert!(tdns(tmp.path(), "simulate", cfg, &["--seed", "17", "--threads", "1"]).status.success());
    let second = snapshot(&tmp.path().join("out"));
    assert_eq!(first.len(), second.len());
    for ((p, a), (_, b)) in first.iter().zip(&second) {
        if p.ends_with("manifest.txt") {
            let strip = |v: &[u8]| String::from_utf8_lossy(v).lines().skip(1).collect::<Vec<_>>().join("\n");
            assert_eq!(strip(a), strip(b));
        } else {
            assert_eq!(a, b, "{}", p.display());
        }
    }
    assert!(tdns(tmp.path(), "simulate", cfg, &["--seed", "18"]).status.success());
    let third = snapshot(&tmp.path().join("out"));
    let coeffs = |s: &Vec<(std::path::PathBuf, Vec<u8>)>| s.iter().find(|(p, _)| p.ends_with("coeffs.csv")).unwrap().1.clone();
    assert_ne!(coeffs(&first), coeffs(&third));
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tdns(tmp.path(), "simulate", "basis.m = 4\nfoo = 1\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("foo"), "{err}");
    let out = tdns(tmp.path(), "simulate", "solver.T = 0.5\nsolver.dt = 1e-3\ngrid.n_time = 10\n", &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    // Δt far beyond the explicit stability limit
    let out = tdns(
        tmp.path(),
        "simulate",
        "map.kind = identity\nbasis.m = 6\nsolver.T = 1\nsolver.dt = 0.05\nic.kind = coefficients\nic.coefficients = 1,1,1,1,1,1\n",
        &[],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_builtins_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tdns(
        tmp.path(),
        "verify",
        "map.kind = shear\nbasis.m = 3\nsolver.T = 1\ngrid.n_time = 20\nverify.samples = 200\n",
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(tmp.path().join("out/report_verify_assembly.csv").exists());
    assert!(tmp.path().join("out/report_verify_geometry_identity.csv").exists());
}

#[test]
fn corrupted_inverse_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "map.kind = user\nmap.forward.y1 = x1/(1+t)\nmap.forward.y2 = x2/(1+t)\nmap.inverse.x1 = y1*(1+t)\nmap.inverse.x2 = y2*(1+0.9*t)\nverify.maps = config\nbasis.m = 2\nsolver.T = 1\ngrid.n_time = 10\nquad.order = 8\nverify.samples = 100\n";
    let out = tdns(tmp.path(), "verify", cfg, &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("inverse_identity"), "{err}");
}
