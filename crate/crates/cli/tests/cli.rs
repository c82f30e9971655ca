use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gridcover(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridcover"))
        .current_dir(dir)
        .env_remove("GRIDCOVER_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn place_static_three_by_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridcover(dir.path(), &["place-static", "--rows", "3", "--cols", "3", "--ns", "1", "--out", "d.txt"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("objective 33"), "{}", stdout(&o));
    assert!(stdout(&o).contains("positions (2,2)"));
    assert_eq!(fs::read_to_string(dir.path().join("d.txt")).unwrap(), "# static 1\n1 2 2\n");
}

#[test]
fn zero_static_nodes_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridcover(dir.path(), &["place-static", "--rows", "3", "--cols", "3", "--ns", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flag_and_bad_backend_combination_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gridcover(dir.path(), &["plan-cov", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(gridcover(dir.path(), &["baseline", "--backend", "export-lp"]).status.code(), Some(2));
    assert_eq!(gridcover(dir.path(), &["export-lp", "--formulation", "cov"]).status.code(), Some(2));
}

#[test]
fn static_then_cov_reaches_full_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridcover(dir.path(), &["place-static", "--rows", "8", "--cols", "8", "--ns", "5", "--out", "d.txt"]);
    assert_eq!(o.status.code(), Some(0));
    let o = gridcover(
        dir.path(),
        &["plan-cov", "--rows", "8", "--cols", "8", "--l", "1", "--kmax", "4", "--deployment", "d.txt", "--out", "p.txt"],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("coverage 100.00% (64/64)"), "{}", stdout(&o));
    let plan = fs::read_to_string(dir.path().join("p.txt")).unwrap();
    assert_eq!(plan.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn plan_mov_five_by_five() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridcover(dir.path(), &["plan-mov", "--rows", "5", "--cols", "5", "--l", "1", "--cr", "1", "--kmax", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("objective 4 "), "{}", stdout(&o));
    assert!(stdout(&o).contains("movements 4 "));
}

#[test]
fn plan_mov_infeasible_hints_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridcover(dir.path(), &["plan-mov", "--rows", "5", "--cols", "5", "--l", "1", "--kmax", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("increase K_max or L"));
}

#[test]
fn fully_covered_grid_has_nothing_to_plan() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.txt"), "1 2 2\n").unwrap();
    let o = gridcover(dir.path(), &["plan-cov", "--rows", "3", "--cols", "3", "--deployment", "d.txt", "--out", "p.txt"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("nothing to plan"));
    let plan = fs::read_to_string(dir.path().join("p.txt")).unwrap();
    assert!(plan.lines().all(|l| l.starts_with('#')));
}

#[test]
fn random_baseline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.txt", "b.txt"] {
        let o = gridcover(dir.path(), &["baseline", "--method", "random", "--seed", "7", "--out", out]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(dir.path().join("a.txt")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.txt")).unwrap());
    assert!(!a.is_empty());
}

#[test]
fn export_lp_declares_closed_form_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridcover(
        dir.path(),
        &["export-lp", "--formulation", "cov", "--rows", "10", "--cols", "10", "--l", "3", "--kmax", "4", "--out", "m.lp"],
    );
    assert_eq!(o.status.code(), Some(0));
    let lp = fs::read_to_string(dir.path().join("m.lp")).unwrap();
    let binaries = lp
        .split("Binary")
        .nth(1)
        .unwrap()
        .split("End")
        .next()
        .unwrap()
        .split_whitespace()
        .count();
    assert_eq!(binaries, 1200);
    let via_backend = gridcover(
        dir.path(),
        &["plan-cov", "--backend", "export-lp", "--rows", "10", "--cols", "10", "--l", "3", "--out", "n.lp"],
    );
    assert_eq!(via_backend.status.code(), Some(0));
    assert_eq!(lp, fs::read_to_string(dir.path().join("n.lp")).unwrap());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), "# desk check\nrows = 3\ncols=3\nns=2\n").unwrap();
    let o = gridcover(dir.path(), &["place-static", "--config", "c.cfg", "--ns", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("objective 33"), "{}", stdout(&o));
    fs::write(dir.path().join("bad.cfg"), "no_such_key=1\n").unwrap();
    assert_eq!(gridcover(dir.path(), &["place-static", "--config", "bad.cfg"]).status.code(), Some(2));
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "sweep", "--deterministic", "--rows", "5", "--cols", "5", "--l", "1", "--kmax", "3", "--seeds", "0,1",
            "--ns-values", "0,1", "--method-values", "milp-cov,greedy,random", "--static-method-values",
            "milp-static,random-static", "--out-dir", out,
        ]
    };
    for out in ["a", "b"] {
        assert_eq!(gridcover(dir.path(), &args(out)).status.code(), Some(0));
    }
    let a = dir.path().join("a");
    let names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1 + 2 * 24);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(dir.path().join("b").join(&name)).unwrap());
    }
    let csv = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 24);
}
