use std::fs;
use std::path::Path;
use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cqr-bench"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn run_matrix_into(dir: &Path) {
    run_ok(bench().args(["run", "--suite", "random", "--n", "5", "--repeats", "2", "--solver", "cqr_practical_c2,arc", "--trace", "--out"]).arg(dir));
}

#[test]
fn run_writes_reproducible_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_matrix_into(&a);
    run_matrix_into(&b);
    for f in ["detail.csv", "summary.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let detail = fs::read_to_string(a.join("detail.csv")).unwrap();
    assert_eq!(detail.lines().count(), 1 + 4);
    assert_eq!(fs::read_to_string(a.join("summary.csv")).unwrap().lines().count(), 1 + 2);
    let traces: Vec<_> = fs::read_dir(a.join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 4);
    for t in traces {
        let path = t.unwrap().path();
        assert_eq!(fs::read(&path).unwrap(), fs::read(b.join("traces").join(path.file_name().unwrap())).unwrap());
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("iter,f,grad_norm,beta,d,sigma_c,rho,step_norm,success,case,trench,newton_iters\n"));
    }
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"repeats": 1, "solvers": ["cqr_choice1"]}"#).unwrap();
    let out = tmp.path().join("out");
    run_ok(bench().args(["run", "--n", "3", "--repeats", "5", "--config"]).arg(&cfg).arg("--out").arg(&out));
    let detail = fs::read_to_string(out.join("detail.csv")).unwrap();
    assert_eq!(detail.lines().count(), 2);
    assert!(detail.contains("cqr_choice1"));
}

#[test]
fn gen_then_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("p.json");
    run_ok(bench().args(["gen", "--suite", "locally_convex", "--n", "4", "--seed", "7", "--out"]).arg(&p));
    let trace = tmp.path().join("t.csv");
    let stdout = run_ok(bench().args(["solve", "--solver", "cqr_practical_c3", "--problem"]).arg(&p).arg("--trace").arg(&trace));
    assert!(stdout.contains("status converged"), "{stdout}");
    assert!(fs::read_to_string(&trace).unwrap().lines().count() >= 2);
}

#[test]
fn config_errors_exit_nonzero() {
    for args in [
        vec!["run", "--solver", "qqr"],
        vec!["run", "--suite", "nope"],
        vec!["run", "--repeats", "0"],
        vec!["run", "--beta-choice", "7"],
        vec!["run", "--variant", "fast"],
        vec!["solve", "--problem", "/nonexistent/p.json"],
    ] {
        let tmp = tempfile::tempdir().unwrap();
        let out = bench().args(&args).arg("--out").arg(tmp.path()).output().unwrap();
        let out = if args[0] == "solve" { bench().args(&args).output().unwrap() } else { out };
        assert!(!out.status.success(), "{args:?} should fail");
    }
}
