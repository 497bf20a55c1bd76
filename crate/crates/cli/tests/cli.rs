//! End-to-end runs of the `madp` binary.

use std::path::Path;
use std::process::Command;

fn madp(args: &[&str], dir: &Path) -> (String, String, bool) {
    let out = Command::new(env!("CARGO_BIN_EXE_madp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.success(),
    )
}

#[test]
fn gen_bound_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (stdout, stderr, ok) = madp(
        &[
            "gen-graph", "--model", "regular", "--edges", "400", "--arity", "2",
            "--degree", "2", "--seed", "7", "--out", "g.txt",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    assert!(stdout.contains("edges=400"), "{stdout}");

    let (stdout, stderr, ok) = madp(
        &[
            "bound", "--algo", "dup", "--k", "2", "--graph", "g.txt", "--out", "sel.txt",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    // Pinned one-line summary format.
    assert!(
        stdout.starts_with("total=") && stdout.contains(" distinct=")
            && stdout.contains(" k=") && stdout.contains(" avg_arity="),
        "{stdout}"
    );
    assert!(dir.path().join("sel.txt").exists());

    let (stdout, stderr, ok) = madp(
        &[
            "gen-data", "--dim", "8", "--seed", "3", "--graph", "g.txt", "--out", "d.madp",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    assert!(stdout.contains("examples=400"), "{stdout}");
}

#[test]
fn minsep_schedule_and_ilp_export() {
    let dir = tempfile::tempdir().unwrap();
    madp(
        &[
            "gen-graph", "--model", "regular", "--edges", "200", "--arity", "2",
            "--degree", "2", "--seed", "9", "--out", "g.txt",
        ],
        dir.path(),
    );
    let (stdout, stderr, ok) = madp(
        &[
            "bound", "--algo", "minsep", "--T", "10", "--B", "4", "--b", "2",
            "--graph", "g.txt", "--out", "sched.txt",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    assert!(stdout.contains("total=40"), "{stdout}");

    let (stdout, stderr, ok) = madp(
        &[
            "ilp", "export-cb", "--graph", "g.txt", "--k", "2", "--out", "cb.lp",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    assert!(stdout.contains("variables=200"));
    let lp = std::fs::read_to_string(dir.path().join("cb.lp")).unwrap();
    assert!(lp.starts_with("Maximize\n"));
    assert!(lp.ends_with("End\n"));

    let (_, stderr, ok) = madp(
        &[
            "ilp", "export-minsep", "--graph", "g.txt", "--T", "4", "--B", "2",
            "--b", "2", "--out", "ms.lp",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    let lp = std::fs::read_to_string(dir.path().join("ms.lp")).unwrap();
    assert!(lp.starts_with("Minimize\n obj: k\n"));
}

#[test]
fn ilp_solve_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.txt"), "users=2\n0\t0\n1\t0,1\n2\t1\n").unwrap();
    let (stdout, stderr, ok) = madp(
        &[
            "ilp", "solve-cb", "--graph", "tiny.txt", "--k", "1",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    assert!(stdout.contains("total=2") && stdout.contains("optimal=true"), "{stdout}");
}

#[test]
fn account_calibrate_both_mechanisms() {
    let dir = tempfile::tempdir().unwrap();
    let (stdout, stderr, ok) = madp(
        &[
            "account", "calibrate", "--mech", "dpsgd", "--eps", "2.0", "--delta", "1e-8",
            "--k", "2", "--p", "0.01", "--steps", "100",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    assert!(stdout.contains("sigma=") && stdout.contains("rdp-subsampled-group-lift"));

    let (stdout, stderr, ok) = madp(
        &[
            "account", "calibrate", "--mech", "dpmf", "--eps", "2.0", "--delta", "1e-8",
            "--k", "4", "--b", "3",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    assert!(stdout.contains("analytic-gaussian-minsep"), "{stdout}");
}

#[test]
fn experiment_run_from_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        r#"
[graph]
model = "regular"
edges = 300
seed = 4

[data]
dim = 6
seed = 5

[bounding]
algo = "dup"
k = 2

[privacy]
epsilons = [2.0]
delta = 1e-8

[hyper]
learning_rates = [0.02]
clip_norms = [1.0]
batch_sizes = [8]
step_product = 160

[run]
seeds = [1]
"#,
    )
    .unwrap();
    let (stdout, stderr, ok) = madp(
        &[
            "experiment", "run", "--config", "exp.toml", "--out", "results",
        ],
        dir.path(),
    );
    assert!(ok, "{stderr}");
    assert!(stdout.contains("rows=1 ok=1"), "{stdout}");
    assert!(dir.path().join("results/results.csv").exists());
    assert!(dir.path().join("results/best.csv").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let (_, stderr, ok) = madp(
        &["bound", "--algo", "dup", "--k", "2", "--graph", "missing.txt", "--out", "x"],
        dir.path(),
    );
    assert!(!ok);
    assert!(stderr.contains("loading graph"), "{stderr}");
}
