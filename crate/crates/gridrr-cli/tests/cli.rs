use std::io::Write;
use std::process::{Command, Output, Stdio};

fn gridrr(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gridrr"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_solve_validate_refine_pipeline() {
    let dir = std::env::temp_dir().join(format!("gridrr-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let inst = dir.join("inst.json");
    let gen = gridrr(&["gen", "--dims", "9x12", "--density", "1/3", "--seed", "4", "--out", inst.to_str().unwrap()], "");
    assert!(gen.status.success());

    let solve = gridrr(&["solve", "--algo", "grh", "--matching", "lba", "-"], &std::fs::read_to_string(&inst).unwrap());
    assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));
    let plan = text(&solve);

    let val = gridrr(&["validate", inst.to_str().unwrap()], &plan);
    assert!(val.status.success());
    assert!(text(&val).starts_with("valid"));

    let refined = gridrr(&["refine", inst.to_str().unwrap()], &plan);
    assert!(refined.status.success());

    // robot 1 steps onto robot 2's cell
    let mut broken: serde_json::Value = serde_json::from_str(&plan).unwrap();
    let other = broken["paths"]["2"][1].clone();
    broken["paths"]["1"][1] = other;
    let bad = gridrr(&["validate", inst.to_str().unwrap()], &broken.to_string());
    assert_eq!(bad.status.code(), Some(1));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn bench_writes_csv_and_keeps_going_on_regime_errors() {
    let out = gridrr(&["bench", "--dims", "9x9,8x8", "--algo", "grh,grlm", "--seeds", "2"], "");
    assert!(out.status.success());
    let csv = text(&out);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "spec_digest,algorithm,seed,makespan,soc,lower_bound,ratio,runtime_ms,bound_satisfied,status");
    assert_eq!(lines.len(), 1 + 8);
    assert!(lines.iter().any(|l| l.ends_with(",true,ok")));
}

#[test]
fn solve_reports_regime_errors() {
    let inst = text(&gridrr(&["gen", "--dims", "8x8", "--density", "1/3"], ""));
    let out = gridrr(&["solve", "--algo", "grh"], &inst);
    assert!(!out.status.success());
}
