use std::process::{Command, Output};

use fellgeom::cli::NEGATIVE_CONTROLS;

fn fellgeom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fellgeom"))
        .args(args)
        .output()
        .unwrap()
}

fn text(o: &Output) -> (String, String) {
    (
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["--version"], &["check", "--help"]] {
        let o = fellgeom(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn usage_and_config_errors_exit_two() {
    for args in [
        &["check"][..],
        &["bogus", "qubit"],
        &["check", "qubit", "--samples", "many"],
        &["check", "missing_geometry"],
        &["action", "qubit", "--function", "x3"],
        &["check", "one_generation", "--sector", "gauge"],
    ] {
        let o = fellgeom(args);
        let (_, err) = text(&o);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {err}");
        assert!(!err.is_empty(), "{args:?}");
    }
}

#[test]
fn malformed_config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "name = \"bad\"\n\n[[objects]]\nid = \"a\"\ndim = \"two\"\n",
    )
    .unwrap();
    let o = fellgeom(&["check", path.to_str().unwrap()]);
    let (_, err) = text(&o);
    assert_eq!(o.status.code(), Some(2));
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn negative_controls_fail_with_exit_one() {
    for name in NEGATIVE_CONTROLS {
        let o = fellgeom(&["check", name, "--samples", "200"]);
        let (out, _) = text(&o);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(out.trim_end().ends_with("status: FAIL"), "{name}");
        assert!(!out.contains("failed: none"), "{name}");
    }
}

#[test]
fn reports_share_a_header_and_end_with_status() {
    for args in [
        &["check", "two_point", "--samples", "50"][..],
        &["enumerate", "quarks_uncoloured"],
        &["count-params", "quarks_uncoloured"],
        &["exclusions", "quarks_coloured"],
        &["diagonalize", "quarks_uncoloured"],
        &["action", "qubit", "--unitaries", "5"],
        &["distance", "two_point"],
        &["flow", "qubit", "--state", "thermal"],
        &["kms", "qubit", "--state", "thermal", "--samples", "10"],
        &["partition", "two_point"],
        &["generate-dims", "qubit"],
    ] {
        let o = fellgeom(args);
        let (out, err) = text(&o);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {err}");
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], format!("command: {}", args[0]));
        assert_eq!(lines[1], format!("config: {}", args[1]));
        assert!(lines[2].starts_with("reproduces: "));
        assert_eq!(*lines.last().unwrap(), "status: pass");
        assert!(lines.iter().all(|l| l.contains(": ")), "{args:?}");
    }
}

#[test]
fn sector_all_covers_every_object() {
    let o = fellgeom(&["diagonalize", "one_generation", "--sector", "lepton"]);
    assert!(text(&o).0.contains("sector: lepton"));
    let o = fellgeom(&["count-params", "one_generation", "--sector", "all"]);
    let (out, err) = text(&o);
    assert_eq!(o.status.code(), Some(0), "{err}");
    assert!(out.contains("dimension: 30"), "{out}");
}

#[test]
fn sampler_seeds_control_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, file: &str| {
        let path = dir.path().join(file);
        let o = fellgeom(&[
            "sample",
            "two_point",
            "--steps",
            "2000",
            "--chains",
            "2",
            "--thin",
            "2",
            "--burn-in",
            "100",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o).1);
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("3", "a.csv");
    assert_eq!(a, run("3", "b.csv"));
    assert_ne!(a, run("4", "c.csv"));

    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "chain,step,x0,x1,ev0,ev1,action");
    // Two chains of 2000 recorded steps thinned by 2.
    assert_eq!(rows.len() - 1, 2 * 1000);
    for row in &rows[1..] {
        let f: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        let action = f[2] * f[2] + f[3] * f[3];
        assert!((action - f[6]).abs() <= 1e-12 * action.max(1.0), "{row}");
    }
}
