use std::fs;
use std::path::Path;
use std::process::Command;

use avsfe::adapt::{adaptive_loop, AdaptConfig};
use avsfe::bench::{by_name, Provenance};
use avsfe::cli::{run, validate_config, Mode};
use avsfe::mesh::{ElementType, Mesh, Rect};

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap().trim_end().to_string()
}

#[test]
fn uniform_runs_are_deterministic_and_match_the_golden_header() {
    let cfg = validate_config("benchmark = convdiff-pe100\nmode = uniform\nlevels = 3\nestimator = both\n").unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&cfg, a.path()).unwrap();
    run(&cfg, b.path()).unwrap();
    for f in ["uniform_classical.csv", "uniform_alternative.csv", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(header(&a.path().join("uniform_alternative.csv")), golden("uniform_header.csv"));
    let text = fs::read_to_string(a.path().join("uniform_alternative.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("243,"));
    for r in rows {
        assert_eq!(r.split(',').count(), 6);
    }
}

#[test]
fn manifest_echoes_defaults() {
    let cfg = validate_config("benchmark = laplace-bump\nmode = uniform\nlevels = 1\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&cfg, dir.path()).unwrap();
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["run_id"], summary.run_id);
    assert_eq!(m["config"]["delta"], 0.5);
    assert_eq!(m["config"]["dp"], 0);
    assert_eq!(m["config"]["estimator"], "Alternative");
    assert!(m["exact_qoi"]["provenance"]["AdaptiveQuadrature"].is_object());
}

#[test]
fn adaptive_run_writes_history_and_vtk() {
    let cfg = validate_config("benchmark = convdiff-pe100\nmode = adaptive\nmax_steps = 5\n").unwrap();
    assert_eq!(cfg.mode, Mode::Adaptive);
    assert_eq!(cfg.element_type, ElementType::Triangle);
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, dir.path()).unwrap();
    let hist = dir.path().join("adaptive_alternative/history.csv");
    assert_eq!(header(&hist), golden("adaptive_header.csv"));
    assert_eq!(fs::read_to_string(&hist).unwrap().lines().count(), 6);
    let vtk = fs::read_to_string(dir.path().join("adaptive_alternative/step_004.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
    assert!(vtk.contains("SCALARS indicator"));
}

#[test]
fn adaptive_meshes_stay_conforming() {
    let bench = by_name("convdiff-pe100").unwrap();
    let mesh0 = Mesh::build_structured(ElementType::Triangle, 1, Rect::UNIT).unwrap();
    let cfg = AdaptConfig { max_steps: 9, ..Default::default() };
    let h = adaptive_loop(&bench, bench.default_qoi(), mesh0, &cfg).unwrap();
    assert!(h.failure.is_none());
    assert_eq!(h.steps.len(), 9);
    assert!(h.warmup_end.is_some());
    for (i, s) in h.steps.iter().enumerate() {
        assert_eq!(s.step, i);
        s.mesh.audit().unwrap();
    }
}

#[test]
fn binary_lists_benchmarks_and_rejects_bad_configs() {
    let exe = env!("CARGO_BIN_EXE_avsfe");
    let out = Command::new(exe).arg("list-benchmarks").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("convdiff-pe10-lineflux"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "benchmark = laplace-bump\nmode = uniform\ndelta = 1.5\n").unwrap();
    let out = Command::new(exe).arg("run").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");

    fs::write(&cfg, "benchmark = laplace-bump\nmode = uniform\nlevels = 2\n").unwrap();
    let out = Command::new(exe)
        .args(["run", cfg.to_str().unwrap(), "--threads", "2", "--out"])
        .arg(dir.path().join("o"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/uniform_alternative.csv").exists());
}

#[test]
fn exact_qoi_oracles() {
    let lap = by_name("laplace-bump").unwrap();
    let e = lap.exact_qoi(lap.default_qoi()).unwrap();
    // Independent 400-point Gauss-Legendre tensor quadrature.
    assert!((e.value - 5.073572310927143).abs() < 1e-10, "{}", e.value);
    assert!(matches!(e.provenance, Provenance::AdaptiveQuadrature { .. }));

    // Closed forms for the layer solution agree with brute-force quadrature.
    for name in ["convdiff-pe100", "convdiff-pe10-lineflux"] {
        let b = by_name(name).unwrap();
        let eps = b.diffusion;
        for (qn, q) in &b.qois {
            let e = b.exact_qoi(q).unwrap();
            assert!(matches!(e.provenance, Provenance::ClosedForm));
            let an = b.analytic;
            let f = move |p: [f64; 2]| match qn.as_str() {
                "avg-u" => an.u(p),
                "avg-dudx" => an.grad(p)[0],
                _ => eps * an.grad(p)[0],
            };
            let brute = match q.region {
                avsfe::goal::Region::Rect(r) => avsfe::bench::adaptive_integrate_2d(&f, r, 1e-13) / r.area(),
                avsfe::goal::Region::Segment([a, c]) => {
                    avsfe::bench::adaptive_integrate(&|t| f([a[0], a[1] + t * (c[1] - a[1])]), 0.0, 1.0, 1e-13)
                }
            };
            assert!((e.value - brute).abs() <= 1e-10 * (1.0 + brute.abs()), "{name} {qn}: {} vs {brute}", e.value);
        }
    }
}
