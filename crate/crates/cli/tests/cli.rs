//! End-to-end runs of the `gslh` binary.

use std::ffi::OsStr;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn gslh<S: AsRef<OsStr>>(args: &[S], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gslh"));
    cmd.args(args).env_remove("GSLH_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_system(dir: &Path, rows: &[&[i64]], rhs: &[f64]) -> (String, String) {
    let nnz: usize = rows.iter().map(|r| r.iter().filter(|v| **v != 0).count()).sum();
    let mut mtx = format!("%%MatrixMarket matrix coordinate integer general\n{} {} {nnz}\n", rows.len(), rows[0].len());
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            if *v != 0 {
                mtx.push_str(&format!("{} {} {v}\n", i + 1, j + 1));
            }
        }
    }
    let a = dir.join("a.mtx");
    let c = dir.join("c.txt");
    fs::write(&a, mtx).unwrap();
    fs::write(&c, rhs.iter().map(|v| format!("{v}\n")).collect::<String>()).unwrap();
    (a.to_str().unwrap().to_owned(), c.to_str().unwrap().to_owned())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn worked_example_args(out: &Path, target: &str) -> Vec<String> {
    let path = |name: &str| golden(name).to_str().unwrap().to_owned();
    vec![
        "reduce".into(),
        "--matrix".into(),
        path("worked_example.mtx"),
        "--rhs".into(),
        path("worked_example_rhs.txt"),
        "--target".into(),
        target.into(),
        "--out-dir".into(),
        out.to_str().unwrap().into(),
    ]
}

#[test]
fn worked_example_edge_list_matches_golden_file() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = gslh(&worked_example_args(&out, "mc2"), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cert = read_json(&out.join("certificate.json"));
    let want = read_json(&golden("worked_example_mc2.json"));
    assert_eq!(cert["schema"], "gslh/1");
    assert_eq!(cert["num_blocks"], want["num_blocks"]);
    assert_eq!(cert["edges"], want["edges"]);
}

#[test]
fn integer_target_writes_an_integer_matrix() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = gslh(&worked_example_args(&out, "mc2_strict_int"), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("system.mtx")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate integer general"));
    let header: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    let entries: Vec<&str> = lines.collect();
    assert_eq!(entries.len(), header[2]);
    for e in entries {
        let v = e.split_whitespace().nth(2).unwrap();
        assert!(v.trim_start_matches('-').bytes().all(|b| b.is_ascii_digit()), "{v}");
    }
}

#[test]
fn verify_on_a_small_random_instance_passes() {
    let tmp = TempDir::new().unwrap();
    let (a, c) = write_system(tmp.path(), &[&[2, -1, 0], &[1, 3, -2], &[0, -4, 1], &[3, 0, 2]], &[1.0, -2.0, 0.0, 3.0]);
    let out = tmp.path().join("out");
    let o =
        gslh(&["reduce", "--matrix", &a, "--rhs", &c, "--verify", "--solve", "--out-dir", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["pass"], true);
    let rows = report["rows"].as_array().unwrap();
    assert!(rows.iter().any(|r| r["name"] == "chain.mapback_ratio" && r["verdict"] == "pass"));
    assert!(rows.iter().all(|r| r["verdict"] != "fail"));
    let x = fs::read_to_string(out.join("solution.txt")).unwrap();
    assert_eq!(x.lines().count(), 3);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let mut args = worked_example_args(d, "truss");
        args.extend(["--seed".into(), "3".into()]);
        gslh(&args, &[]);
    }
    for f in ["system.mtx", "rhs.txt", "certificate.json", "report.json"] {
        assert_eq!(fs::read(dirs[0].join(f)).unwrap(), fs::read(dirs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_environment_variable_overrides_flag() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let mut args = worked_example_args(&out, "truss");
    args.extend(["--seed".into(), "3".into()]);
    let o = gslh(&args, &[("GSLH_SEED", "41")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cert = read_json(&out.join("certificate.json"));
    assert_eq!(cert["config"]["seed"], 41);
    assert_eq!(
        cert["truss"]["seed"].as_u64().unwrap(),
        41 + cert["truss_retries"].as_array().map_or(0, |r| r.len() as u64)
    );
}

#[test]
fn failed_verification_exits_with_one() {
    // the truss members of the final pairing equations are not horizontal
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let mut args = worked_example_args(&out, "truss");
    args.push("--verify".into());
    let o = gslh(&args, &[]);
    assert_eq!(o.status.code(), Some(1));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["pass"], false);
    let gadget = report["rows"].as_array().unwrap().iter().find(|r| r["name"] == "truss.gadget_deviation").cloned();
    assert_eq!(gadget.unwrap()["verdict"], "pass");
}

#[test]
fn input_and_class_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.mtx");
    fs::write(&bad, "not a matrix\n").unwrap();
    let c = tmp.path().join("c.txt");
    fs::write(&c, "1\n").unwrap();
    let o = gslh(&["reduce", "--matrix", bad.to_str().unwrap(), "--rhs", c.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));

    // an empty column is outside class G
    let (a, c) = write_system(tmp.path(), &[&[1, 0], &[2, 0]], &[1.0, 1.0]);
    let out = tmp.path().join("out");
    let o = gslh(&["reduce", "--matrix", &a, "--rhs", &c, "--out-dir", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = gslh(&["reduce", "--matrix", &a, "--rhs", &c, "--epsilon", "1.5"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lsd_answers_on_stdout() {
    let tmp = TempDir::new().unwrap();
    // bidiagonal n = 10: c = e₁ is within 8.5e-4 of the image
    let rows: Vec<Vec<i64>> = (0..11)
        .map(|i| {
            (0..10)
                .map(|j| {
                    if i == j {
                        2
                    } else if i == j + 1 {
                        -1
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    let refs: Vec<&[i64]> = rows.iter().map(Vec::as_slice).collect();
    let mut rhs = vec![0.0; 11];
    rhs[0] = 1.0;
    let (a, c) = write_system(tmp.path(), &refs, &rhs);
    for extra in [&[][..], &["--iterative"][..]] {
        let mut args = vec!["lsd", "--matrix", &a, "--rhs", &c, "--epsilon", "0.01"];
        args.extend_from_slice(extra);
        let o = gslh(&args, &[]);
        assert!(o.status.success());
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["answer"], "yes");
        assert!((v["achieved_ratio"].as_f64().unwrap() - 8.4573e-4).abs() < 1e-7);
    }

    let (a, c) = write_system(tmp.path(), &[&[1], &[0]], &[0.0, 1.0]);
    let o = gslh(&["lsd", "--matrix", &a, "--rhs", &c, "--epsilon", "0.5"], &[]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["answer"], "no");
}
