use std::fs;
use std::process::Command;

fn interrl() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_interrl"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn smoke_run_writes_one_row_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    let status = interrl()
        .args(["run", "--env", "cartpole", "--method", "q", "--episodes", "10", "--runs", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "run,episode,method,return");
    assert_eq!(lines.len(), 11);
}

#[test]
fn adaptive_run_has_weight_and_probability_columns() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = dir.path().join("teacher.q");
    let status = interrl()
        .args(["oracle", "train", "--env", "cartpole", "--episodes", "50", "--out"])
        .arg(&oracle)
        .status()
        .unwrap();
    assert!(status.success());

    let out = dir.path().join("al.csv");
    let status = interrl()
        .args([
            "run", "--env", "cartpole", "--method", "al", "--episodes", "5", "--runs", "2", "--L", "0.5", "--C",
            "0.8", "--rh", "10", "--strategy", "early", "--B0", "1", "--seed", "3", "--disable-at", "3", "--oracle",
        ])
        .arg(&oracle)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    let header: Vec<_> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 4 + 2 * 4);
    assert_eq!(text.lines().count(), 1 + 2 * 5);
}

#[test]
fn sweep_writes_a_file_per_combination() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.txt");
    fs::write(
        &spec,
        "env = cartpole\nepisodes = 5\nruns = 2\noracle_episodes = 20\nmethod = q, ab\nL = 0.1, 1\n",
    )
    .unwrap();
    let out = dir.path().join("results");
    let output = interrl().args(["sweep", "--spec"]).arg(&spec).arg("--out").arg(&out).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let csvs = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 4);
    assert_eq!(fs::read_to_string(out.join("summary.txt")).unwrap().lines().count(), 4);
}

#[test]
fn bad_input_fails_with_a_message() {
    let output = interrl()
        .args(["run", "--env", "cartpole", "--method", "xx", "--episodes", "1", "--runs", "1"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown method"));

    let output = interrl()
        .args(["run", "--env", "cartpole", "--L", "2", "--episodes", "1"])
        .output()
        .unwrap();
    assert!(!output.status.success());

    let output = interrl().args(["sweep", "--spec", "/nonexistent/spec", "--out", "/tmp/x"]).output().unwrap();
    assert!(!output.status.success());
}
