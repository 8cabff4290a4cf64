use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mollipath::io::parse_csv;
use mollipath::{Kernel, Polyline};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mollipath"));
    c.env_remove("MOLLIPATH_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn abs_json(dir: &TempDir) -> PathBuf {
    write(
        dir,
        "abs.json",
        r#"{"dimension": 2, "waypoints": [[-1, 1], [0, 0], [1, 1]]}"#,
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows (header included) with the manifest comment removed.
fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn smooth_preserves_the_abs_corner() {
    let dir = TempDir::new().unwrap();
    let input = abs_json(&dir);
    let o = run(&[
        "smooth",
        "--input",
        s(&input),
        "--method",
        "directional",
        "--epsilon",
        "0.5",
        "--samples",
        "1001",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.starts_with("# manifest {"));
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "t,x0,x1,d1_0,d1_1,d2_0,d2_1,kappa"
    );
    let data = rows(&text);
    assert_eq!(data.len(), 1001);
    let mid = &data[500];
    assert_eq!(mid[0], 1.0);
    assert!(mid[1].abs() < 1e-9 && mid[2].abs() < 1e-9);
    assert_eq!(data[1000][0], 2.0);
    // Warning for the vanished coincidence windows.
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps >= 0.5"));
}

#[test]
fn combined_gamma_zero_is_bit_identical_to_conventional() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.csv", "x0,x1\n0,0\n1,2\n3,1\n4,3\n");
    let a = run(&[
        "smooth",
        "--input",
        s(&input),
        "--method",
        "combined",
        "--gamma",
        "0",
        "--epsilon",
        "0.3",
    ]);
    let b = run(&[
        "smooth",
        "--input",
        s(&input),
        "--method",
        "conventional",
        "--epsilon",
        "0.3",
    ]);
    let strip = |o: &Output| {
        stdout(o)
            .lines()
            .skip(1)
            .map(str::to_owned)
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(strip(&a).len(), 1001);
}

#[test]
fn gamma_sweep_agrees_on_coincidence_windows() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "fig.json",
        r#"{"dimension": 2, "waypoints": [[0,0],[1,0],[1.5,1],[2.5,1],[3,0],[4,0.5],[5,-0.5]]}"#,
    );
    let eps = 0.4;
    let mut files = Vec::new();
    for gamma in ["-1", "-0.5", "0", "0.5", "1", "1.5", "2"] {
        let out = dir.path().join(format!("g{gamma}.csv"));
        let o = run(&[
            "smooth",
            "--input",
            s(&input),
            "--method",
            "combined",
            "--gamma",
            gamma,
            "--epsilon",
            "0.4",
            "--samples",
            "601",
            "--output",
            s(&out),
        ]);
        assert_eq!(o.status.code(), Some(0));
        files.push(rows(&fs::read_to_string(&out).unwrap()));
    }
    let pl = Polyline::new(vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![1.5, 1.0],
        vec![2.5, 1.0],
        vec![3.0, 0.0],
        vec![4.0, 0.5],
        vec![5.0, -0.5],
    ])
    .unwrap();
    let mut compared = 0;
    for i in 0..601 {
        let t = files[0][i][0];
        let r = t.floor();
        if t - r >= eps && r + 1.0 - t >= eps {
            let f = pl.eval(t);
            for rows in &files {
                assert!(
                    (rows[i][1] - f[0]).abs() < 1e-9 && (rows[i][2] - f[1]).abs() < 1e-9,
                    "t={t}"
                );
            }
            compared += 1;
        }
    }
    assert!(compared > 50);
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = abs_json(&dir);
    let args = [
        "smooth",
        "--input",
        s(&input),
        "--method",
        "combined",
        "--gamma",
        "0.3",
        "--epsilon",
        "0.2",
    ];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn echo_input_round_trips() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "w.csv",
        "0.1,0.2,0.3\n1e-7,3.141592653589793,-2\n5,6,7.000000000000001\n",
    );
    let original = parse_csv(&fs::read_to_string(&input).unwrap()).unwrap();
    let o = run(&[
        "smooth",
        "--input",
        s(&input),
        "--epsilon",
        "0.3",
        "--echo-input",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(parse_csv(&stdout(&o)).unwrap(), original);
}

#[test]
fn extend_samples_beyond_the_domain() {
    let dir = TempDir::new().unwrap();
    let input = abs_json(&dir);
    let o = run(&[
        "smooth",
        "--input",
        s(&input),
        "--epsilon",
        "0.2",
        "--samples",
        "5",
        "--extend",
        "-1",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let data = rows(&stdout(&o));
    assert_eq!(data[0][..3], [-1.0, -2.0, 2.0]);
    assert_eq!(data[4][0], 3.0);
}

#[test]
fn input_and_parameter_errors() {
    let dir = TempDir::new().unwrap();
    let input = abs_json(&dir);
    let bad = write(
        &dir,
        "bad.json",
        r#"{"dimension": 2, "waypoints": [[0, 0], [1]]}"#,
    );
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        run(&["smooth", "--input", s(&bad), "--epsilon", "0.3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["smooth", "--input", s(&missing), "--epsilon", "0.3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["smooth", "--input", s(&input), "--epsilon", "0"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(&["smooth", "--input", s(&input), "--epsilon", "-1"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(&[
            "smooth",
            "--input",
            s(&input),
            "--epsilon",
            "0.3",
            "--samples",
            "1"
        ])
        .status
        .code(),
        Some(3)
    );
    assert_eq!(
        run(&[
            "smooth",
            "--input",
            s(&input),
            "--epsilon",
            "0.3",
            "--method",
            "spline"
        ])
        .status
        .code(),
        Some(3)
    );
    assert_eq!(
        run(&[
            "smooth",
            "--input",
            s(&input),
            "--epsilon",
            "0.3",
            "--extend",
            "2",
            "1"
        ])
        .status
        .code(),
        Some(3)
    );
    assert_eq!(
        run(&["smooth", "--input", s(&input)]).status.code(),
        Some(3)
    );
    let o = run(&["smooth", "--input", s(&input), "--epsilon", "1.2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps >= 1"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn curvature_column_stays_below_bound() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "three.csv", "0,0\n2,1\n3,-1\n");
    let o = run(&[
        "curvature",
        "--input",
        s(&input),
        "--epsilon",
        "0.25",
        "--samples",
        "801",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().nth(1) == Some("t,kappa,bound"));
    let data = rows(&stdout(&o));
    let bound = data[0][2];
    assert!(bound > 0.0);
    for r in &data {
        assert_eq!(r[2], bound);
        assert!(r[1] <= bound, "{r:?}");
    }
    // At the corner the curvature is 2·φ_ε(0)·‖P̃₂∧P̃₁‖ / ‖F̂′(1)‖³.
    let k = Kernel::bump(1e-12).unwrap();
    let corner = &data[400];
    assert_eq!(corner[0], 1.0);
    let wedge: f64 = (2.0f64 * -2.0 - 1.0 * 1.0).abs();
    let speed: f64 = (1.5f64 * 1.5 + 0.5 * 0.5).sqrt();
    let expected = 2.0 * k.scaled(0.25, 0.0, 0) * wedge / speed.powi(3);
    assert!((corner[1] - expected).abs() < 1e-9 * expected);
}

#[test]
fn select_epsilon_reports() {
    let dir = TempDir::new().unwrap();
    let input = abs_json(&dir);
    let o = run(&[
        "select-epsilon",
        "--input",
        s(&input),
        "--kappa-max",
        "14.4",
        "--gamma",
        "1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let eps = v["report"]["selected_eps"].as_f64().unwrap();
    assert!((eps - 0.5).abs() < 0.005);
    assert_eq!(v["manifest"]["kappa_max"].as_f64(), Some(14.4));

    let line = write(&dir, "line.csv", "0,0\n1,1\n2,2\n");
    let o = run(&["select-epsilon", "--input", s(&line), "--kappa-max", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["selected_eps"].as_f64(), Some(0.25));
    assert_eq!(v["report"]["per_corner"][0]["bound"].as_f64(), Some(0.0));

    let hairpin = write(&dir, "hairpin.csv", "0,0\n1,0\n0,0.05\n");
    let o = run(&[
        "select-epsilon",
        "--input",
        s(&hairpin),
        "--kappa-max",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds the budget"));

    assert_eq!(
        run(&["select-epsilon", "--input", s(&input), "--kappa-max", "0"])
            .status
            .code(),
        Some(3)
    );
    let degenerate = write(&dir, "deg.csv", "0,0\n0,0\n1,0\n");
    assert_eq!(
        run(&[
            "select-epsilon",
            "--input",
            s(&degenerate),
            "--kappa-max",
            "1"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn verify_suites() {
    let o = run(&["verify", "--suite", "all"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let lines: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines[0].get("manifest").is_some());
    assert!(lines[1..].iter().all(|l| l["passed"] == true));
    assert!(lines.len() > 50);

    let o = run(&["verify", "--suite", "counterexamples"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 4);
    assert!(stdout(&o).contains("counterexample_kink_non_monotone"));

    assert_eq!(
        run(&["verify", "--suite", "nonsense"]).status.code(),
        Some(3)
    );
    let o = bin()
        .args(["verify", "--suite", "waypoints"])
        .env("MOLLIPATH_SEED", "banana")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let a = bin()
        .args(["verify", "--suite", "lengths"])
        .env("MOLLIPATH_SEED", "7")
        .output()
        .unwrap();
    let b = bin()
        .args(["verify", "--suite", "lengths"])
        .env("MOLLIPATH_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).contains("\"seed\":7"));
}
