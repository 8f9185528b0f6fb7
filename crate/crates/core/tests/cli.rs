use std::fs;
use std::process::Command;

fn randabc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_randabc"))
}

#[test]
fn bad_grid_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "dim = 3\nL = 1\n").unwrap();
    let out = randabc().arg("bench").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_recipe_exits_with_config_code() {
    let out = randabc().args(["solve", "--L", "4", "--recipe", "quadrupole"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_with_one() {
    let out = randabc().args(["bench", "--config", "/nonexistent/x.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, "dim = 2\nL = 4, 6, 8\nseeds = 2\ntheta = 4\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = randabc()
        .arg("bench")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["records.csv", "rates.csv", "config.txt", "plot.gp"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(!out_dir.join("records.partial.csv").exists());
    let records = fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 3 * 4 * 2);
}

#[test]
fn optimality_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = randabc()
        .args(["optimality", "--L", "2,3,4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("optimality.csv")).unwrap();
    assert!(csv.starts_with("beta,L,ell,estimate,tail_bound,slope"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn sample_and_solve_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d2.cfg");
    fs::write(&cfg, "dim = 2\nL = 6\ntheta = 4\n").unwrap();
    for cmd in ["sample", "correctors", "solve"] {
        let out = randabc()
            .arg(cmd)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(dir.path().join("a.crhf").exists());
    assert!(dir.path().join("u.crhf").exists());
}
