mod common;

use common::*;
use radfield_core::dosimetry::error_stats;
use radfield_core::MetaValue;
use serde_json::json;

fn tiny_vacuum(run: &RunDir, out: &str, eps: f64) -> serde_json::Value {
    let mut c = run.base_config(out);
    c["grid"] = json!({"extent_m": [0.5, 0.5, 0.5], "voxel_m": [0.1, 0.1, 0.1], "center_m": [0.0, 0.0, 0.0]});
    c["epsilon_threshold"] = json!(eps);
    c["max_photons"] = json!(10_000_000u64);
    c
}

#[test]
fn tiny_runs_are_reproducible() {
    let run = RunDir::new(VACUUM_SCENE);
    let cfg = run.write_config("a.json", &tiny_vacuum(&run, "a.rf3d", 0.1));
    let o = simulate(&cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("field_epsilon"));
    let cfg_b = run.write_config("b.json", &tiny_vacuum(&run, "b.rf3d", 0.1));
    let o = simulate(&cfg_b, &[("RADFIELD_THREADS", "3")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(run.path("a.rf3d")).unwrap(),
        std::fs::read(run.path("b.rf3d")).unwrap()
    );
}

#[test]
fn exhausted_budget_exits_3_and_still_writes() {
    let run = RunDir::new(VACUUM_SCENE);
    let mut c = tiny_vacuum(&run, "out.rf3d", 1e-9);
    c["max_photons"] = json!(50000);
    let o = simulate(&run.write_config("run.json", &c), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("E_BUDGET: "), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);
    let field = radfield::io::load(&run.path("out.rf3d")).unwrap();
    assert!(field.metadata.epsilon_rel_achieved > 1e-9);
    assert_eq!(field.metadata.primary_count, 50000);
    assert_eq!(
        field.metadata.dynamic_value("termination"),
        Some(&MetaValue::Text("budget_exhausted".into()))
    );
}

#[test]
fn default_grid_and_inspect() {
    let run = RunDir::new(PHANTOM_SCENE);
    let mut c = run.base_config("field.rf3d");
    c["epsilon_threshold"] = json!(1e-6);
    let o = simulate(&run.write_config("run.json", &c), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let field_path = run.path("field.rf3d");
    let (header, _) = radfield::io::load_header(&field_path).unwrap();
    assert_eq!(header.grid.counts, [50, 50, 50]);
    assert_eq!(header.binning.bin_count, 32);

    let o = radfield(&["inspect", field_path.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for ch in ["beam", "patient", "scatter"] {
        for layer in ["spectrum", "hits", "direction"] {
            assert!(
                text.lines()
                    .any(|l| l.split_whitespace().take(2).eq([ch, layer])),
                "missing {ch}/{layer} in\n{text}"
            );
        }
    }
    assert!(text.contains("16000000"));
    // dynamic entries echoed in insertion order
    let keys: Vec<&str> = header
        .metadata
        .dynamic
        .iter()
        .map(|(k, _)| k.as_str())
        .collect();
    let positions: Vec<usize> = keys
        .iter()
        .map(|k| text.find(&format!("  {k}: ")).unwrap())
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));

    let bytes = std::fs::read(&field_path).unwrap();
    let cut = run.path("cut.rf3d");
    std::fs::write(&cut, &bytes[..bytes.len() - 1000]).unwrap();
    let o = radfield(&["inspect", cut.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("E_TRUNCATED: "), "{}", stderr(&o));
}

#[test]
fn config_and_io_failures() {
    let run = RunDir::new(VACUUM_SCENE);
    let mut c = run.base_config("x.rf3d");
    c["epsilon_threshold"] = json!(1.5);
    let o = simulate(&run.write_config("bad.json", &c), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("E_CONFIG: "));

    let mut c = run.base_config("x.rf3d");
    c["max_photons"] = json!(49999);
    assert_eq!(
        simulate(&run.write_config("small.json", &c), &[])
            .status
            .code(),
        Some(2)
    );

    std::fs::write(run.path("broken.json"), "{").unwrap();
    let o = simulate(&run.path("broken.json"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("E_PARSE: "));

    let o = simulate(&run.path("missing.json"), &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("E_IO: "));

    let mut c = run.base_config("x.rf3d");
    c["spectrum_path"] = json!("nope.csv");
    assert_eq!(
        simulate(&run.write_config("nospec.json", &c), &[])
            .status
            .code(),
        Some(4)
    );

    let ok = run.write_config("ok.json", &tiny_vacuum(&run, "x.rf3d", 0.1));
    let o = simulate(&ok, &[("RADFIELD_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("RADFIELD_THREADS"));

    let o = radfield(&["frobnicate"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("E_USAGE: "));
    assert_eq!(radfield(&["--help"], &[]).status.code(), Some(0));
}

/// Vacuum cone along +z, traced well past convergence so the field is smooth.
fn axis_field(run: &RunDir) -> std::path::PathBuf {
    let mut c = run.base_config("axis.rf3d");
    c["source"] = json!({"position_m": [0.0, 0.0, -1.0], "direction": [0.0, 0.0, 1.0],
                         "shape": {"type": "cone", "opening_angle_deg": 10.0}});
    c["grid"] = json!({"extent_m": [0.4, 0.4, 0.4], "voxel_m": [0.02, 0.02, 0.02]});
    c["epsilon_threshold"] = json!(1e-9);
    c["max_photons"] = json!(300000);
    let o = simulate(&run.write_config("axis.json", &c), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    run.path("axis.rf3d")
}

fn read_rows(path: &std::path::Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn scan_and_compare() {
    let run = RunDir::new(VACUUM_SCENE);
    let field = axis_field(&run);
    let f = field.to_str().unwrap();

    let curve = run.path("curve.csv");
    let o = radfield(
        &[
            "scan",
            f,
            "--channels",
            "beam",
            "--center",
            "0,0,0.1",
            "--radius",
            "0.05",
            "--step",
            "10",
            "--out",
            curve.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("angle_deg,value\n"));
    assert_eq!(text.lines().count(), 37);

    // symmetric beam: opposite points agree
    let quarter = run.path("quarter.csv");
    let o = radfield(
        &[
            "scan",
            f,
            "--channels",
            "beam",
            "--center",
            "0,0,0.1",
            "--radius",
            "0.05",
            "--step",
            "90",
            "--out",
            quarter.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let q = read_rows(&quarter);
    assert_eq!(q.len(), 4);
    for (a, b) in [(0, 2), (1, 3)] {
        assert!((q[a][1] / q[b][1] - 1.0).abs() < 0.06, "{:?}", q);
    }

    let o = radfield(
        &[
            "scan",
            f,
            "--channels",
            "beam",
            "--radius",
            "0.25",
            "--out",
            "/dev/null",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("E_BOUNDS: "), "{}", stderr(&o));
    let o = radfield(
        &[
            "scan",
            f,
            "--channels",
            "nope",
            "--radius",
            "0.05",
            "--out",
            "/dev/null",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("E_NOT_FOUND: "), "{}", stderr(&o));

    // self comparison against the exported curve times 2.5
    let rows = read_rows(&curve);
    let measured = run.path("m.csv");
    let mut text = String::from("angle_deg,value\n");
    for r in &rows {
        text.push_str(&format!("{},{}\n", r[0], r[1] * 2.5));
    }
    std::fs::write(&measured, text).unwrap();
    let cmp = run.path("cmp.csv");
    let o = radfield(
        &[
            "compare",
            "--measured",
            measured.to_str().unwrap(),
            "--field",
            f,
            "--channels",
            "beam",
            "--center",
            "0,0,0.1",
            "--radius",
            "0.05",
            "--out",
            cmp.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = stdout(&o);
    let sc: f64 = report
        .lines()
        .next()
        .unwrap()
        .strip_prefix("S_c ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((sc - 2.5).abs() < 1e-12, "{report}");
    assert!(
        report.contains("median_rel=0.000000 mean_rel=0.000000 std_rel=0.000000"),
        "{report}"
    );
    let cmp_text = std::fs::read_to_string(&cmp).unwrap();
    assert!(cmp_text.starts_with("angle_deg,measured,simulated_scaled,e_rel\n"));
    assert_eq!(cmp_text.lines().count(), 37);

    // outlier at 40 degrees: excluding it lowers the mean, the median barely moves
    let mut text = String::from("angle_deg,value\n");
    for r in &rows {
        let k = if r[0] == 40.0 { 1.8 } else { 1.0 };
        text.push_str(&format!("{},{}\n", r[0], r[1] * 2.5 * k));
    }
    std::fs::write(&measured, text).unwrap();
    let o = radfield(
        &[
            "compare",
            "--measured",
            measured.to_str().unwrap(),
            "--field",
            f,
            "--channels",
            "beam",
            "--center",
            "0,0,0.1",
            "--radius",
            "0.05",
            "--exclude",
            "40",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stat = |line: &str, key: &str| -> f64 {
        let tail = &line[line.find(&format!("{key}=")).unwrap() + key.len() + 1..];
        tail.split_whitespace().next().unwrap().parse().unwrap()
    };
    let report = stdout(&o);
    let lines: Vec<&str> = report.lines().collect();
    assert!(lines[2].starts_with("excluding 40:"));
    assert!(stat(lines[2], "mean_rel") < stat(lines[1], "mean_rel"));
    assert!((stat(lines[2], "median_rel") - stat(lines[1], "median_rel")).abs() < 0.01);

    // a single shared angle cannot be integrated
    std::fs::write(&measured, "angle_deg,value\n10,1.0\n").unwrap();
    let o = radfield(
        &[
            "compare",
            "--measured",
            measured.to_str().unwrap(),
            "--field",
            f,
            "--channels",
            "beam",
            "--center",
            "0,0,0.1",
            "--radius",
            "0.05",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("E_DOSIMETRY: "), "{}", stderr(&o));
}

#[test]
fn excluded_outlier_matches_hand_statistics() {
    use radfield_core::dosimetry::PolarScanCurve;
    let m = PolarScanCurve::from_samples(vec![
        (0.0, 1.0),
        (10.0, 1.0),
        (20.0, 1.0),
        (30.0, 1.0),
        (40.0, 1.0),
    ])
    .unwrap();
    let s = PolarScanCurve::from_samples(vec![
        (0.0, 1.01),
        (10.0, 0.98),
        (20.0, 1.03),
        (30.0, 0.99),
        (40.0, 1.5),
    ])
    .unwrap();
    let all = error_stats(&m, &s, &[]).unwrap();
    let kept = error_stats(&m, &s, &[40.0]).unwrap();
    // errors {0.01, 0.02, 0.03, 0.01, 0.5}
    assert!((all.mean_rel - 0.114).abs() < 1e-12);
    assert!((all.median_rel - 0.02).abs() < 1e-12);
    assert!((kept.mean_rel - 0.0175).abs() < 1e-12);
    assert!((kept.median_rel - 0.015).abs() < 1e-12);
}
