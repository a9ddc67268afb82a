use thirdgrade::config::{read_pairs, Config};
use thirdgrade::ensemble::{path_file, reaggregate, resume, run_ensemble, EnsembleError, EnsembleSpec, PathRunner};

fn cfg(extra: &str, dir: &std::path::Path) -> Config {
    let mut pairs = read_pairs(&format!("n_modes = 2\nt_end = 0.05\nnoise_L = 0.5\noutput_path = {}\n", dir.display())).unwrap();
    pairs.extend(read_pairs(extra).unwrap());
    Config::from_pairs(&pairs).unwrap()
}

#[test]
fn single_path_report_is_the_path_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("n_paths = 1\n", dir.path());
    let out = run_ensemble(&EnsembleSpec::new(c.clone(), dir.path())).unwrap();
    let s = PathRunner::new(&c).run(0).unwrap().record.summary;
    assert_eq!(out.summaries, vec![s.clone()]);
    assert_eq!(out.report.sup_v_sq.mean, s.sup_v_sq);
    assert_eq!(out.report.dissipation.mean, 4.0 * c.fluid.nu * s.int_dy_sq);
    assert_eq!(out.report.lhs.stderr, 0.0);
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = cfg("n_paths = 6\n", a.path());
    let mut one = EnsembleSpec::new(c.clone(), a.path());
    one.threads = Some(1);
    let mut three = EnsembleSpec::new(c, b.path());
    three.threads = Some(3);
    let r1 = run_ensemble(&one).unwrap();
    let r3 = run_ensemble(&three).unwrap();
    assert_eq!(r1.report, r3.report);
    assert_eq!(r1.summaries, r3.summaries);
    assert_eq!(std::fs::read(a.path().join("report.json")).unwrap(), std::fs::read(b.path().join("report.json")).unwrap());
}

#[test]
fn noise_free_ensemble_has_no_spread() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("n_paths = 8\nnoise_kind = off\n", dir.path());
    let r = run_ensemble(&EnsembleSpec::new(c, dir.path())).unwrap().report;
    for row in r.rows() {
        assert!(row.stderr <= 1e-14 * row.value.abs().max(1.0), "{} {}", row.name, row.stderr);
    }
}

#[test]
fn files_reproduce_the_in_memory_report() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("n_paths = 4\n", dir.path());
    let out = run_ensemble(&EnsembleSpec::new(c.clone(), dir.path())).unwrap();
    assert_eq!(reaggregate(&c, dir.path()).unwrap(), out.report);
    let json: thirdgrade_core::diagnostics::EnsembleReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json, out.report);
    for f in ["manifest.json", "report.csv", "path_0.jsonl", "path_3.jsonl"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn resume_completes_missing_paths_only() {
    let fresh_dir = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("n_paths = 6\n", dir.path());
    let fresh = run_ensemble(&EnsembleSpec::new(c.clone(), fresh_dir.path())).unwrap();
    let spec = EnsembleSpec::new(c.clone(), dir.path());
    run_ensemble(&spec).unwrap();

    let again = resume(&spec).unwrap();
    assert_eq!(again.computed, 0);
    assert_eq!(again.report, fresh.report);

    for i in [1, 3, 5] {
        std::fs::remove_file(path_file(dir.path(), i)).unwrap();
    }
    // a half-written file counts as missing
    let p0 = path_file(dir.path(), 0);
    let text = std::fs::read_to_string(&p0).unwrap();
    std::fs::write(&p0, &text[..text.len() / 3]).unwrap();
    let done = resume(&spec).unwrap();
    assert_eq!(done.computed, 4);
    assert_eq!(done.report, fresh.report);

    // growing the ensemble keeps the existing paths
    let bigger = EnsembleSpec::new(cfg("n_paths = 8\n", dir.path()), dir.path());
    assert_eq!(resume(&bigger).unwrap().computed, 2);
}

#[test]
fn resume_refuses_foreign_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("n_paths = 2\n", dir.path());
    assert!(matches!(resume(&EnsembleSpec::new(c.clone(), dir.path())), Err(EnsembleError::ManifestCorrupt { .. })));
    run_ensemble(&EnsembleSpec::new(c, dir.path())).unwrap();
    let other_seed = cfg("n_paths = 2\nseed = 9\n", dir.path());
    match resume(&EnsembleSpec::new(other_seed, dir.path())) {
        Err(EnsembleError::ManifestCorrupt { reason, .. }) => assert!(reason.contains("seed")),
        other => panic!("{other:?}"),
    }
    let other_physics = cfg("n_paths = 2\nnu = 0.3\n", dir.path());
    assert!(matches!(resume(&EnsembleSpec::new(other_physics, dir.path())), Err(EnsembleError::ManifestCorrupt { .. })));
    std::fs::write(dir.path().join("manifest.json"), "{ not json").unwrap();
    let c = cfg("n_paths = 2\n", dir.path());
    assert!(matches!(resume(&EnsembleSpec::new(c, dir.path())), Err(EnsembleError::ManifestCorrupt { .. })));
}

#[test]
fn blowup_paths_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(
        "n_paths = 2\nnu = 0\nbeta = 0\nalpha2 = -0.5\ncutoff_M = 1e300\ninitial = random:1000\ndt = 0.5\nt_end = 500\nnoise_kind = off\nsample_stride = 1000\n",
        dir.path(),
    );
    let out = run_ensemble(&EnsembleSpec::new(c, dir.path())).unwrap();
    assert_eq!(out.report.n_blowup, 2);
    assert!(out.summaries.iter().all(|s| s.blowup.is_some()));
}
