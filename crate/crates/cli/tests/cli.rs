use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macpomdp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn certify_null_fixture() {
    let o = run(&["certify", "--model", fixture("null.dcpomdp").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(column(&stdout(&o), "gap"), vec!["0"]);
}

#[test]
fn certify_infeasible_fixture() {
    let o = run(&["certify", "--model", fixture("infeasible.dcpomdp").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(column(&stdout(&o), "verdict"), vec!["INFEASIBLE"]);
}

#[test]
fn certify_generated_seed_7() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("s7.dcpomdp");
    let g = run(&["gen", "--seed", "7", "--out", model.to_str().unwrap()]);
    assert_eq!(g.status.code(), Some(0));
    let o = run(&["certify", "--model", model.to_str().unwrap(), "--tol", "1e-3", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let gap: f64 = column(&stdout(&o), "gap")[0].parse().unwrap();
    assert!(gap.abs() <= 1e-3);
}

#[test]
fn certify_batch_is_ordered_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = |n: &str| dir.path().join(n);
    let models = [fixture("switch.dcpomdp"), fixture("randomization.dcpomdp"), fixture("null.dcpomdp")];
    let mut args = vec!["certify", "--jobs", "3", "--model"];
    args.extend(models.iter().map(|p| p.to_str().unwrap()));
    let (a, b) = (out("a.csv"), out("b.csv"));
    let mut first = args.clone();
    first.extend(["--out", a.to_str().unwrap()]);
    let mut second = args.clone();
    second.extend(["--out", b.to_str().unwrap()]);
    assert_eq!(run(&first).status.code(), Some(0));
    assert_eq!(run(&second).status.code(), Some(0));
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let ids = column(&String::from_utf8(x).unwrap(), "instance_id");
    assert_eq!(ids, vec!["switch", "randomization", "null"]);
}

#[test]
fn coordination_gap_exits_2() {
    let o = run(&["certify", "--model", fixture("coordination.dcpomdp").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(column(&stdout(&o), "verdict"), vec!["UNRESOLVED"]);
}

#[test]
fn minimax_files() {
    let o = run(&["minimax", "--game", fixture("matching_pennies.txt").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().nth(1), Some("matching_pennies,0,0,0,true"));

    let dir = tempfile::tempdir().unwrap();
    let reduced = dir.path().join("inf_row.txt");
    std::fs::write(&reduced, "rows 1 cols 2\n3 4\n").unwrap();
    let a = run(&["minimax", "--game", fixture("inf_row.txt").to_str().unwrap()]);
    let b = run(&["minimax", "--game", reduced.to_str().unwrap()]);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn replication_passes_and_catches_faults() {
    let model = fixture("switch.dcpomdp");
    let m = model.to_str().unwrap();
    let o = run(&["verify-lemma1", "--model", m, "--mixtures", "20", "--horizon", "8", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let single = run(&["verify-lemma1", "--model", m, "--support", "1", "--mixtures", "5"]);
    assert!(column(&stdout(&single), "max_deviation").iter().all(|d| d == "0"));
    let bad = run(&["verify-lemma1", "--model", m, "--inject-fault", "--mixtures", "3"]);
    assert_eq!(bad.status.code(), Some(2));
    let csv = stdout(&bad);
    let dev: f64 = column(&csv, "max_deviation")[0].parse().unwrap();
    assert!(dev > 1e-3);
    assert_eq!(column(&csv, "t")[0], "1");
}

#[test]
fn convergence_commands() {
    let m = fixture("switch.dcpomdp");
    let m = m.to_str().unwrap();
    let same = run(&["verify-convergence", "--model", m, "--identical", "--pairs", "2"]);
    assert_eq!(same.status.code(), Some(0));
    assert!(column(&stdout(&same), "deviation").iter().all(|d| d == "0"));

    let det = run(&["verify-convergence", "--model", m, "--deterministic", "--pairs", "1", "--seed", "1"]);
    let devs: Vec<f64> = column(&stdout(&det), "deviation").iter().map(|d| d.parse().unwrap()).collect();
    // p is a polynomial in 2^-i, so the ratio tends to one half
    let ratio = devs[19] / devs[18];
    assert!((ratio - 0.5).abs() < 1e-3, "{ratio}");

    let random = run(&["verify-convergence", "--model", m, "--pairs", "5"]);
    assert_eq!(random.status.code(), Some(0));
}

#[test]
fn evaluate_and_dump() {
    let m = fixture("switch.dcpomdp");
    let m = m.to_str().unwrap();
    let dump = run(&["dump-lattice", "--model", m, "--horizon", "3"]);
    assert_eq!(stdout(&dump).lines().count(), 1 + 4 + 20);
    let unpruned = run(&["dump-lattice", "--model", m, "--horizon", "2", "--no-prune"]);
    assert_eq!(stdout(&unpruned).lines().count(), 2 + 16);

    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("wait.policy");
    std::fs::write(&policy, "1 1 0 -> 0\n2 1 0 -> 0\n").unwrap();
    let o = run(&["evaluate", "--model", m, "--horizon", "1", "--eval-horizon", "10", "--policy", policy.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c: f64 = column(&stdout(&o), "C_T")[0].parse().unwrap();
    // both agents wait once, then the uniform continuation takes over
    assert!(c > 1.0 && c < 2.0);
}

#[test]
fn usage_and_caps() {
    assert_eq!(run(&["certify", "--model", "/nonexistent.dcpomdp"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["certify", "--model", fixture("null.dcpomdp").to_str().unwrap(), "--tol", "0"]).status.code(), Some(1));
    let capped = Command::new(env!("CARGO_BIN_EXE_macpomdp"))
        .args(["dump-lattice", "--model", fixture("switch.dcpomdp").to_str().unwrap(), "--horizon", "3"])
        .env("MACPOMDP_MAX_HISTORIES", "3")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("cap"));
}
