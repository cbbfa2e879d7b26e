use std::fs;
use std::path::Path;
use std::process::Command;

fn feig() -> Command {
    Command::new(env!("CARGO_BIN_EXE_feig"))
}

fn solve_map(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("map.json");
    let st = feig()
        .args(["solve", "--r", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    out
}

#[test]
fn solve_output_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let map = solve_map(dir.path());
    let text = fs::read_to_string(&map).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let obj = v.as_object().unwrap();
    for key in ["r", "order", "alpha", "coeffs", "residual", "radius"] {
        assert!(obj.contains_key(key), "missing key {key}");
    }
    assert!(obj["alpha"].as_f64().unwrap() < -2.0);
    assert!(obj["residual"].as_f64().unwrap() < 1e-10);

    let map2 = dir.path().join("map2.json");
    let st = feig()
        .args(["solve", "--r", "2", "--out"])
        .arg(&map2)
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(fs::read(&map).unwrap(), fs::read(&map2).unwrap());
}

#[test]
fn curve_csv_header_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let map = solve_map(dir.path());
    let csv1 = dir.path().join("a.csv");
    let csv2 = dir.path().join("b.csv");
    for csv in [&csv1, &csv2] {
        let st = feig()
            .args(["curve", "--map"])
            .arg(&map)
            .args(["--depth", "5", "--scales", "-1..1", "--csv"])
            .arg(csv)
            .status()
            .unwrap();
        assert!(st.success());
    }
    let a = fs::read(&csv1).unwrap();
    assert_eq!(a, fs::read(&csv2).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re,im,address"));
    let first = lines.next().unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 3);
    fields[0].parse::<f64>().unwrap();
    fields[1].parse::<f64>().unwrap();
}

#[test]
fn verify_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let map = solve_map(dir.path());
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    for rep in [&r1, &r2] {
        let st = feig()
            .args(["verify", "--map"])
            .arg(&map)
            .args(["--suite", "core", "--seed", "7", "--report"])
            .arg(rep)
            .status()
            .unwrap();
        assert!(st.success());
    }
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let map = solve_map(dir.path());

    let st = feig()
        .args(["curve", "--map"])
        .arg(&map)
        .args(["--depth", "0"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));

    let st = feig()
        .args(["verify", "--map"])
        .arg(&map)
        .args(["--suite", "bogus"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));

    let st = feig()
        .args(["dim", "--map"])
        .arg(&map)
        .args(["--max-depth", "1", "--report"])
        .arg(dir.path().join("d.json"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}
