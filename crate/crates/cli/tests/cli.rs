use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn amtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amtl")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// `key=value` pairs from one printed summary line.
fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {line}"))
        .parse()
        .unwrap()
}

fn sweep_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn gen_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let args = ["gen", "--tasks", "5", "--samples", "100", "--dim", "50", "--rank", "2", "--seed", "7", "--out"];
        let mut args = args.to_vec();
        args.push(out.to_str().unwrap());
        stdout(&amtl(&args));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    assert!(names.iter().any(|n| n == "manifest.txt"));
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap());
    }
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(amtl(&["gen", "--rank", "0", "--out", out]).status.code(), Some(2));
    assert_eq!(amtl(&["run", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(amtl(&["bench", "--axis", "dim", "--values", "", "--out", out]).status.code(), Some(2));
    assert_eq!(amtl(&["run", "--eta-scale", "2.5"]).status.code(), Some(2));

    let res = amtl(&["run", "--eta-min", "0.5", "--tasks", "5"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("0.090504"));
}

#[test]
fn staleness_violation_exits_three() {
    let res = amtl(&["run", "--slow-task", "0", "--slow-factor", "20", "--tau-max", "2", "--iterations", "20"]);
    assert_eq!(res.status.code(), Some(3));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("task") && err.contains("update"), "{err}");
}

#[test]
fn amtl_finishes_before_smtl() {
    let common = ["run", "--offset", "5", "--tasks", "5", "--samples", "50", "--dim", "20", "--seed", "3"];
    let a = stdout(&amtl(&[&common[..], &["--mode", "amtl"]].concat()));
    let s = stdout(&amtl(&[&common[..], &["--mode", "smtl"]].concat()));
    assert!(field(&a, "makespan") < field(&s, "makespan"));
    assert_eq!(field(&s, "measured_tau"), 0.0);
}

#[test]
fn dynamic_step_does_not_hurt() {
    let common = ["run", "--offset", "10", "--tasks", "5", "--samples", "50", "--dim", "20", "--iterations", "10"];
    let stat = stdout(&amtl(&common));
    let dynamic = stdout(&amtl(&[&common[..], &["--dynamic-step"]].concat()));
    assert!(field(&dynamic, "final_objective") <= field(&stat, "final_objective"));
}

#[test]
fn printed_summary_is_subset_of_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let line = stdout(&amtl(&["run", "--tasks", "3", "--dim", "8", "--out", out]));
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    for kv in line.split_whitespace() {
        let (k, v) = kv.split_once('=').unwrap();
        let i = header.iter().position(|h| *h == k).unwrap_or_else(|| panic!("{k} not in summary.csv"));
        assert_eq!(v, row[i]);
    }
}

#[test]
fn run_from_generated_directory_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    stdout(&amtl(&["gen", "--tasks", "4", "--samples", "30", "--dim", "10", "--out", data.to_str().unwrap()]));
    let traces: Vec<_> = ["r1", "r2"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            stdout(&amtl(&["run", "--data", data.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]));
            (fs::read(out.join("events.csv")).unwrap(), fs::read(out.join("summary.csv")).unwrap())
        })
        .collect();
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn compare_writes_aligned_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = stdout(&amtl(&["compare", "--tasks", "4", "--dim", "10", "--samples", "30", "--out", out]));
    assert!(field(text.lines().last().unwrap(), "makespan_ratio") < 1.0);
    for sub in ["amtl/events.csv", "amtl/summary.csv", "smtl/events.csv", "smtl/summary.csv"] {
        assert!(dir.path().join(sub).exists(), "{sub}");
    }
    let cmp = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().count(), 1 + 10 * 4);
    assert!(cmp.lines().skip(1).all(|l| l.split(',').all(|c| !c.is_empty())));
}

#[test]
fn task_sweep_pairs_amtl_ahead() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    stdout(&amtl(&["bench", "--axis", "tasks", "--values", "5,10,15", "--offset", "5", "--samples", "50", "--dim", "20", "--out", out]));
    let rows = sweep_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 6);
    for pair in rows.chunks(2) {
        assert_eq!((pair[0][0].as_str(), pair[1][0].as_str()), ("amtl", "smtl"));
        assert_eq!(pair[0][1], pair[1][1]);
        let (a, s): (f64, f64) = (pair[0][5].parse().unwrap(), pair[1][5].parse().unwrap());
        assert!(a < s, "T={}: {a} >= {s}", pair[0][1]);
    }
}

#[test]
fn dimension_sweep_gap_never_shrinks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    stdout(&amtl(&["bench", "--axis", "dim", "--values", "10,30,60,100", "--samples", "50", "--out", out]));
    let rows = sweep_rows(&dir.path().join("sweep.csv"));
    let gaps: Vec<f64> = rows
        .chunks(2)
        .map(|p| p[1][5].parse::<f64>().unwrap() - p[0][5].parse::<f64>().unwrap())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{gaps:?}");
    assert!(gaps.iter().all(|&g| g > 0.0));
}

#[test]
fn selftest_passes() {
    let text = stdout(&amtl(&["selftest"]));
    assert!(!text.contains("FAILED"));
}
