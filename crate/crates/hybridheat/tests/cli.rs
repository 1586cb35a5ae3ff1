//! The binary end to end on small, fast setups.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybridheat::io::read_averaged;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn hybridheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridheat")).args(args).output().expect("spawn hybridheat")
}

/// Coarse 20 × 1 pack, ten steps, final snapshot only.
const SMALL: [&str; 10] = [
    "--override",
    "numerics.n_steps=10",
    "--override",
    "numerics.h_fine=0.004",
    "--override",
    "output.snapshots=[]",
    "--override",
    "output.vtk=false",
    "--override",
    "numerics.h_up=0.01",
];

fn run(mode: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = config("accuracy.toml");
    let m = format!("mode={mode}");
    let mut args = vec!["run", cfg.to_str().unwrap(), "--quiet", "--out", out.to_str().unwrap(), "--override", &m];
    args.extend(SMALL);
    args.extend(extra);
    hybridheat(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn only_snapshot(dir: &Path) -> PathBuf {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("avg_"))
        .collect();
    assert_eq!(v.len(), 1, "{v:?}");
    v.pop().unwrap()
}

#[test]
fn zero_data_gives_zero_fields() {
    let d = tempfile::tempdir().unwrap();
    let o = run("fine", d.path(), &["--override", "scenario.source=off", "--override", "scenario.q_pw=0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = read_averaged(&only_snapshot(d.path())).unwrap();
    assert_eq!(a.nx, 20);
    assert!(a.tp_y.iter().chain(&a.tc_y).all(|v| *v == 0.0));
    for f in ["manifest.json", "timing.json", "centerline_t0.0003.csv"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
}

#[test]
fn hybrid_tracks_fine_and_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let fine = d.path().join("fine");
    let h1 = d.path().join("h1");
    let h2 = d.path().join("h2");
    assert_eq!(code(&run("fine", &fine, &[])), 0);
    for h in [&h1, &h2] {
        let o = run("hybrid-series", h, &[]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(only_snapshot(&h1)).unwrap();
    let b = std::fs::read(only_snapshot(&h2)).unwrap();
    assert_eq!(a, b);
    assert!(h1.join("iterations.csv").exists());

    let cmp = d.path().join("cmp");
    let o = hybridheat(&["compare", fine.to_str().unwrap(), h1.to_str().unwrap(), "--out", cmp.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    assert!(cmp.join("compare.json").exists());

    // A reference check with an impossible tolerance fails with code 2.
    let r = format!("output.reference=\"{}\"", fine.display());
    let o = run("hybrid-series", &d.path().join("h3"), &["--override", &r, "--override", "output.tolerance=1e-14"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn self_comparison_is_zero() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a");
    assert_eq!(code(&run("upscaled", &a, &[])), 0);
    let cmp = d.path().join("cmp");
    let o = hybridheat(&["compare", a.to_str().unwrap(), a.to_str().unwrap(), "--out", cmp.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(cmp.join("error_t0.0003.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("i,j,x,y,err_Tp,err_Tc"));
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!((f[4], f[5]), ("0.0", "0.0"), "{l}");
    }
}

#[test]
fn closure_mode_reports_invariants() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config("closure.toml");
    let o = hybridheat(&["run", cfg.to_str().unwrap(), "--quiet", "--out", d.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("closure invariants PASS"));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("effective_model.json")).unwrap()).unwrap();
    assert!(m["K_p"][0][0].as_f64().unwrap() > 0.0);
    assert!(d.path().join("closure_report.json").exists());
}

#[test]
fn bad_input_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    assert_eq!(code(&hybridheat(&["run", "/nonexistent.toml", "--out", out])), 1);
    let cfg = config("accuracy.toml");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&hybridheat(&["run", cfg, "--out", out, "--override", "numerics.no_such_key=1"])), 1);
    assert_eq!(code(&hybridheat(&["run", cfg, "--out", out, "--override", "numerics.dt=-1"])), 1);
    assert_eq!(code(&hybridheat(&["run", cfg, "--out", out, "--override", "justtext"])), 1);
    let o = hybridheat(&["compare", out, out]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest.json"));
}

#[test]
fn bench_writes_speedups() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config("efficiency.json");
    let o = hybridheat(&[
        "bench",
        cfg.to_str().unwrap(),
        "--fractions",
        "0.1,0.5",
        "--quiet",
        "--out",
        d.path().to_str().unwrap(),
        "--override",
        "geometry.nx=20",
        "--override",
        "numerics.n_steps=3",
        "--override",
        "numerics.h_fine=0.004",
        "--override",
        "numerics.h_up=0.01",
    ]);
    // Timing decides between 0 and 2.
    assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.path().join("speedup.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    assert!(csv.starts_with("fraction,fine_fraction,scheme,x_hc,t_fine,t_hybrid,speedup"));
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("bench.json")).unwrap()).unwrap();
    assert_eq!(b["n_steps"], 3);
}
