use clap::{CommandFactory, Parser};
use thirdgrade::cli::{run, Cli, EXIT_BLOWUP, EXIT_INVALID, EXIT_OK};
use thirdgrade::config::KEYS;

fn call(args: &[&str]) -> (i32, String, String) {
    let cli = Cli::try_parse_from(std::iter::once("thirdgrade").chain(args.iter().copied())).unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(cli, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn simulate_writes_a_trajectory_and_echoes_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.cfg");
    std::fs::write(&cfg, "n_modes = 2\nt_end = 0.02\nseed = 1\n").unwrap();
    let out = dir.path().join("run");
    let (code, stdout, _) = call(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "7", "-o", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.contains("seed 7"));
    let (h, rec) = thirdgrade::output::read_trajectory(&out.join("trajectory.jsonl")).unwrap();
    assert_eq!((h.seed, rec.summary.seed), (7, 7));
    assert!(out.join("final_field.csv").exists());
}

#[test]
fn constraint_violation_exits_with_one() {
    let (code, _, err) = call(&["simulate", "--alpha2", "5", "--beta", "0", "--nu", "1", "--alpha1", "1"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("constraint violated"));
    let (code, _, err) = call(&["simulate", "--dt", "0"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("dt must be > 0"));
    let (code, _, _) = call(&["simulate", "--config", "/nonexistent/x.cfg"]);
    assert_eq!(code, EXIT_INVALID);
}

#[test]
fn blowup_exit_code_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("b.jsonl");
    let args = [
        "simulate", "--n-modes", "2", "--nu", "0", "--beta", "0", "--alpha2", "-0.5", "--cutoff-M", "1e300", "--initial",
        "random:1000", "--dt", "0.5", "--t-end", "500", "--noise-kind", "off", "-o", o.to_str().unwrap(),
    ];
    let (code, stdout, _) = call(&args);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.contains("numerical blowup at step"));
    let mut fail = args.to_vec();
    fail.push("--fail-on-blowup");
    let (code, _, err) = call(&fail);
    assert_eq!(code, EXIT_BLOWUP);
    assert!(err.contains("step"));
}

#[test]
fn operator_check_passes() {
    let (code, stdout, _) = call(&["check-operators", "--n-modes", "3", "--trials", "10"]);
    assert_eq!(code, EXIT_OK, "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn studies_run_at_small_scale() {
    let small = ["--n-modes", "2", "--t-end", "0.02"];
    for args in [
        vec!["convergence", "--ladder", "1,2", "--paths", "2"],
        vec!["stability", "--paths", "2"],
        vec!["contraction", "--paths", "2", "--steps", "5"],
        vec!["blowup-census", "--paths", "2"],
    ] {
        let mut a = args.clone();
        a.extend(small);
        let (code, stdout, err) = call(&a);
        assert_eq!(code, EXIT_OK, "{args:?}: {stdout} {err}");
        assert!(stdout.contains("seed 0"));
    }
    let (code, _, _) = call(&["convergence", "--ladder", "2,1"]);
    assert_eq!(code, EXIT_INVALID);
}

#[test]
fn ensemble_command_runs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let base = ["--n-modes", "2", "--t-end", "0.02", "--n-paths", "3", "-o", d];
    let mut a = vec!["ensemble"];
    a.extend(base);
    let (code, stdout, _) = call(&a);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.contains("energy audit PASS"));
    a.push("--resume");
    let (code, stdout, _) = call(&a);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.contains("computed 0"));
    a.extend(["--seed", "5"]);
    let (code, _, err) = call(&a);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("manifest corrupt"));
}

#[test]
fn dump_basis_prints_the_table() {
    let (code, stdout, _) = call(&["dump-basis", "--n-modes", "1", "--domain", "channel"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(stdout.lines().count(), 1 + 4);
}

#[test]
fn help_documents_every_key_and_default() {
    let mut cmd = Cli::command();
    let top = cmd.render_long_help().to_string();
    let sim = cmd.find_subcommand_mut("simulate").unwrap().render_long_help().to_string();
    for (k, d, _) in KEYS {
        assert!(top.contains(k) && sim.contains(k), "{k}");
        if !d.is_empty() {
            assert!(sim.contains(d), "{d}");
        }
    }
    assert!(top.contains("Precedence"));
}
