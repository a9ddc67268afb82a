//! Monte Carlo ensembles over independent Wiener paths.
//!
//! Directory layout: `manifest.json`, `path_<i>.jsonl` (one per path, written
//! atomically when the path finishes), `report.csv` and `report.json`.
//! Path `i` is driven by the Brownian keys `(seed, i)`, so every file can be
//! recomputed on its own and the aggregate does not depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thirdgrade_core::basis::GalerkinBasis;
use thirdgrade_core::diagnostics::{EnsembleReport, PathSummary, TrajectoryRecord};
use thirdgrade_core::dynamics::{Integrator, RunOptions, SimError, System};
use thirdgrade_core::noise::WienerState;

use crate::config::Config;
use crate::output::{self, hash_hex, Header, OutputError};

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub config: Config,
    pub dir: PathBuf,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl EnsembleSpec {
    pub fn new(config: Config, dir: impl Into<PathBuf>) -> Self {
        Self { config, dir: dir.into(), threads: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub config_hash: String,
    pub seed: u64,
    pub n_paths: usize,
    pub config: String,
}

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("manifest corrupt in {dir}: {reason}")]
    ManifestCorrupt { dir: String, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub report: EnsembleReport,
    pub summaries: Vec<PathSummary>,
    /// Paths computed by this call (the rest were loaded from disk).
    pub computed: usize,
}

/// Everything needed to run single paths of one configuration.
pub struct PathRunner {
    pub config: Config,
    pub basis: Arc<GalerkinBasis>,
    pub system: System,
    pub header_hash: String,
}

impl PathRunner {
    pub fn new(config: &Config) -> Self {
        let basis = config.basis();
        let system = config.system(&basis);
        Self { config: config.clone(), basis, system, header_hash: hash_hex(config.physics_hash()) }
    }

    pub fn header(&self, path: u64) -> Header {
        Header {
            seed: self.config.run.seed,
            path,
            config_hash: self.header_hash.clone(),
            n_modes: self.config.run.n_modes,
            basis_len: self.basis.len(),
            dt: self.config.run.dt,
        }
    }

    pub fn options(&self) -> RunOptions {
        let mut o = RunOptions::new(self.config.run.t_end);
        o.sample_stride = self.config.sample_stride;
        o.snapshot_stride = self.config.snapshot_stride;
        o.p_exponent = self.config.run.p_exponent;
        o
    }

    pub fn run(&self, path: u64) -> Result<thirdgrade_core::dynamics::RunOutput, SimError> {
        let y0 = self.config.initial_field(&self.basis);
        let w = WienerState::new(self.config.run.seed, path, self.config.run.dt);
        Integrator::new(&self.system, self.options()).run(y0, w)
    }

    pub fn aggregate(&self, summaries: &[PathSummary]) -> EnsembleReport {
        let c = &self.config;
        EnsembleReport::aggregate(summaries, &c.fluid, &self.system.noise, &self.basis, c.run.t_end, c.run.p_exponent)
    }
}

pub fn path_file(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("path_{i}.jsonl"))
}

fn manifest_of(cfg: &Config) -> Manifest {
    Manifest {
        format: 1,
        config_hash: hash_hex(cfg.physics_hash()),
        seed: cfg.run.seed,
        n_paths: cfg.n_paths,
        config: cfg.to_text(),
    }
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(m).expect("manifest serializes");
    output::write_text(&dir.join("manifest.json"), &(text + "\n"))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, EnsembleError> {
    let corrupt = |reason: String| EnsembleError::ManifestCorrupt { dir: dir.display().to_string(), reason };
    let p = dir.join("manifest.json");
    let text = fs::read_to_string(&p).map_err(|e| corrupt(format!("cannot read manifest.json: {e}")))?;
    serde_json::from_str(&text).map_err(|e| corrupt(format!("manifest.json does not parse: {e}")))
}

/// A path file counts as done when it parses completely and belongs to this
/// configuration and path index.
fn load_done(dir: &Path, i: usize, hash: &str) -> Option<TrajectoryRecord> {
    let (h, rec) = output::read_trajectory(&path_file(dir, i)).ok()?;
    (h.config_hash == hash && h.path == i as u64 && rec.summary.path == i as u64).then_some(rec)
}

fn compute(spec: &EnsembleSpec, runner: &PathRunner, todo: &[usize]) -> Result<Vec<PathSummary>, EnsembleError> {
    let work = || -> Result<Vec<PathSummary>, EnsembleError> {
        todo.par_iter()
            .map(|&i| {
                let out = runner.run(i as u64)?;
                output::write_trajectory(&path_file(&spec.dir, i), &runner.header(i as u64), &out.record)?;
                Ok(out.record.summary)
            })
            .collect()
    };
    match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EnsembleError::Pool(e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn finish(spec: &EnsembleSpec, runner: &PathRunner, summaries: Vec<PathSummary>, computed: usize) -> Result<EnsembleOutcome, EnsembleError> {
    let mut summaries = summaries;
    summaries.sort_by_key(|s| s.path);
    let report = runner.aggregate(&summaries);
    output::write_text(&spec.dir.join("report.csv"), &output::report_csv(&report))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    output::write_text(&spec.dir.join("report.json"), &(json + "\n"))?;
    Ok(EnsembleOutcome { report, summaries, computed })
}

/// Runs every path from scratch, overwriting earlier results in `dir`.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleOutcome, EnsembleError> {
    let runner = PathRunner::new(&spec.config);
    fs::create_dir_all(&spec.dir).map_err(output::io_err(&spec.dir)).map_err(EnsembleError::from)?;
    write_manifest(&spec.dir, &manifest_of(&spec.config))?;
    let todo: Vec<usize> = (0..spec.config.n_paths).collect();
    let summaries = compute(spec, &runner, &todo)?;
    finish(spec, &runner, summaries, todo.len())
}

/// Completes the paths missing from `dir`. Refuses to continue when the
/// manifest belongs to a different configuration or seed.
pub fn resume(spec: &EnsembleSpec) -> Result<EnsembleOutcome, EnsembleError> {
    let m = read_manifest(&spec.dir)?;
    let want = manifest_of(&spec.config);
    let corrupt = |reason: String| EnsembleError::ManifestCorrupt { dir: spec.dir.display().to_string(), reason };
    if m.seed != want.seed {
        return Err(corrupt(format!("manifest seed {} differs from requested seed {}", m.seed, want.seed)));
    }
    if m.config_hash != want.config_hash {
        return Err(corrupt(format!("manifest config hash {} differs from requested {}", m.config_hash, want.config_hash)));
    }
    let runner = PathRunner::new(&spec.config);
    let mut summaries = Vec::new();
    let mut todo = Vec::new();
    for i in 0..spec.config.n_paths {
        match load_done(&spec.dir, i, &want.config_hash) {
            Some(r) => summaries.push(r.summary),
            None => todo.push(i),
        }
    }
    if m.n_paths != want.n_paths {
        write_manifest(&spec.dir, &want)?;
    }
    summaries.extend(compute(spec, &runner, &todo)?);
    finish(spec, &runner, summaries, todo.len())
}

/// Re-aggregates the report from the path files alone.
pub fn reaggregate(config: &Config, dir: &Path) -> Result<EnsembleReport, EnsembleError> {
    let runner = PathRunner::new(config);
    let mut summaries = Vec::new();
    for i in 0..config.n_paths {
        let (_, r) = output::read_trajectory(&path_file(dir, i))?;
        summaries.push(r.summary);
    }
    Ok(runner.aggregate(&summaries))
}
