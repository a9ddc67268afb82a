//! Command-line front end. Exit codes: 0 success, 1 invalid input or IO
//! failure, 2 a checked property or estimate failed, 3 numerical blowup
//! (`simulate --fail-on-blowup` only).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thirdgrade_core::diagnostics::energy_audit;

use crate::config::{keys_help, read_pairs, Config, ConfigError};
use crate::ensemble::{self, EnsembleSpec, PathRunner};
use crate::output;
use crate::studies;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "thirdgrade", version, about = "Spectral Galerkin simulator for stochastic third-grade fluids with Navier-slip walls")]
#[command(after_help = after_help())]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn after_help() -> String {
    format!("{}\nPrecedence: built-in defaults < --config file < command-line flags.\n", keys_help())
}

/// Config file and per-key overrides shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` config file
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub nu: Option<String>,
    #[arg(long)]
    pub alpha1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha2: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long = "cutoff-M", alias = "cutoff_M")]
    pub cutoff_m: Option<String>,
    #[arg(long = "n-modes", alias = "n_modes")]
    pub n_modes: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long = "t-end", alias = "t_end")]
    pub t_end: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long = "noise-kind", alias = "noise_kind")]
    pub noise_kind: Option<String>,
    #[arg(long = "noise-L", alias = "noise_L")]
    pub noise_l: Option<String>,
    #[arg(long = "noise-K", alias = "noise_K")]
    pub noise_k: Option<String>,
    #[arg(long = "noise-profile", alias = "noise_profile")]
    pub noise_profile: Option<String>,
    #[arg(long = "noise-additive", alias = "noise_additive", allow_hyphen_values = true)]
    pub noise_additive: Option<String>,
    #[arg(long = "p-exponent", alias = "p_exponent")]
    pub p_exponent: Option<String>,
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long = "dealias-factor", alias = "dealias_factor")]
    pub dealias_factor: Option<String>,
    #[arg(long = "quadrature-oversample", alias = "quadrature_oversample")]
    pub quadrature_oversample: Option<String>,
    #[arg(long = "output-path", alias = "output_path", short)]
    pub output_path: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub forcing: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub initial: Option<String>,
    #[arg(long = "sample-stride", alias = "sample_stride")]
    pub sample_stride: Option<String>,
    #[arg(long = "snapshot-stride", alias = "snapshot_stride")]
    pub snapshot_stride: Option<String>,
    #[arg(long = "n-paths", alias = "n_paths")]
    pub n_paths: Option<String>,
}

impl Common {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("nu", &self.nu),
            ("alpha1", &self.alpha1),
            ("alpha2", &self.alpha2),
            ("beta", &self.beta),
            ("cutoff_M", &self.cutoff_m),
            ("n_modes", &self.n_modes),
            ("dt", &self.dt),
            ("t_end", &self.t_end),
            ("seed", &self.seed),
            ("noise_kind", &self.noise_kind),
            ("noise_L", &self.noise_l),
            ("noise_K", &self.noise_k),
            ("noise_profile", &self.noise_profile),
            ("noise_additive", &self.noise_additive),
            ("p_exponent", &self.p_exponent),
            ("domain", &self.domain),
            ("dealias_factor", &self.dealias_factor),
            ("quadrature_oversample", &self.quadrature_oversample),
            ("output_path", &self.output_path),
            ("forcing", &self.forcing),
            ("initial", &self.initial),
            ("sample_stride", &self.sample_stride),
            ("snapshot_stride", &self.snapshot_stride),
            ("n_paths", &self.n_paths),
        ]
    }

    /// Defaults, then the config file, then flags.
    pub fn load(&self) -> Result<Config, ConfigError> {
        let mut pairs = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?;
                read_pairs(&text)?
            }
            None => Vec::new(),
        };
        for (k, v) in self.overrides() {
            if let Some(v) = v {
                pairs.push((k.to_string(), v.clone(), 0));
            }
        }
        Config::from_pairs(&pairs)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one path and write its trajectory as JSON lines
    #[command(after_help = after_help())]
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Brownian path index
        #[arg(long, default_value_t = 0)]
        path: u64,
        /// Exit with code 3 if the step map blows up
        #[arg(long)]
        fail_on_blowup: bool,
    },
    /// Run (or resume) a Monte Carlo ensemble and audit the energy estimate
    #[command(after_help = after_help())]
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// Complete the paths missing from an existing output directory
        #[arg(long)]
        resume: bool,
        /// Worker threads (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the residual table of the operator identities
    #[command(after_help = after_help())]
    CheckOperators {
        #[command(flatten)]
        common: Common,
        /// Random fields per randomized identity
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Galerkin convergence against the truncation 2 max(ladder)
    #[command(after_help = after_help())]
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Comma-separated truncation ladder
        #[arg(long, default_value = "2,4")]
        ladder: String,
        #[arg(long, default_value_t = 8)]
        paths: usize,
    },
    /// Linear response of coupled solutions to initial perturbations
    #[command(after_help = after_help())]
    Stability {
        #[command(flatten)]
        common: Common,
        /// Comma-separated perturbation sizes (V norm)
        #[arg(long, default_value = "1e-2,1e-3,1e-4")]
        eps: String,
        #[arg(long, default_value_t = 8)]
        paths: usize,
    },
    /// Empirical contraction factor of the Picard map and Picard iteration
    #[command(after_help = after_help())]
    Contraction {
        #[command(flatten)]
        common: Common,
        /// Comma-separated horizons T*
        #[arg(long, default_value = "0.08,0.04,0.02")]
        horizons: String,
        /// Steps per horizon
        #[arg(long, default_value_t = 40)]
        steps: usize,
        #[arg(long, default_value_t = 32)]
        paths: usize,
    },
    /// Stopping times tau_M over a ladder of cut-off levels
    #[command(after_help = after_help())]
    BlowupCensus {
        #[command(flatten)]
        common: Common,
        /// Comma-separated cut-off levels M
        #[arg(long, default_value = "1,2,4,8")]
        ladder: String,
        #[arg(long, default_value_t = 16)]
        paths: usize,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// Print the basis table as CSV
    #[command(after_help = after_help())]
    DumpBasis {
        #[command(flatten)]
        common: Common,
    },
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("bad {what} entry `{t}`")))
        .collect()
}

/// Trajectory file of `simulate`: `output_path` itself when it ends in
/// `.jsonl`, otherwise `output_path/trajectory.jsonl`.
pub fn trajectory_path(output_path: &str) -> PathBuf {
    let p = Path::new(output_path);
    if p.extension().is_some_and(|e| e == "jsonl") {
        p.to_path_buf()
    } else {
        p.join("trajectory.jsonl")
    }
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(cli, out) {
        Ok(code) => code,
        Err((code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

type Outcome = Result<i32, (i32, String)>;

fn invalid(e: impl std::fmt::Display) -> (i32, String) {
    (EXIT_INVALID, e.to_string())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Outcome {
    let w = |out: &mut dyn Write, s: String| {
        let _ = writeln!(out, "{s}");
    };
    match cli.command {
        Command::Simulate { common, path, fail_on_blowup } => {
            let cfg = common.load().map_err(invalid)?;
            let runner = PathRunner::new(&cfg);
            let o = runner.run(path).map_err(invalid)?;
            let file = trajectory_path(&cfg.output_path);
            output::write_trajectory(&file, &runner.header(path), &o.record).map_err(invalid)?;
            let dir = file.parent().unwrap_or(Path::new("."));
            if cfg.snapshot_stride > 0 {
                output::write_coeff_csv(&dir.join("coeffs.csv"), &o.snapshots).map_err(invalid)?;
            }
            output::write_field_csv(&dir.join("final_field.csv"), &o.state.y).map_err(invalid)?;
            let s = &o.record.summary;
            w(out, format!("seed {} path {} config {}", cfg.run.seed, path, runner.header_hash));
            w(out, format!("steps {} t {:?} sup|y|_V^2 {:?} max w24 {:?} tau_M {:?}", s.steps, s.t_end, s.sup_v_sq, s.max_w24, s.tau_m));
            w(out, format!("wrote {}", file.display()));
            if let Some(b) = s.blowup {
                w(out, format!("numerical blowup at step {} (t = {:?})", b.step, b.t));
                if fail_on_blowup {
                    return Err((EXIT_BLOWUP, format!("numerical blowup at step {} (t = {:?})", b.step, b.t)));
                }
            }
            Ok(EXIT_OK)
        }
        Command::Ensemble { common, resume, threads } => {
            let cfg = common.load().map_err(invalid)?;
            let seed = cfg.run.seed;
            let spec = EnsembleSpec { dir: PathBuf::from(&cfg.output_path), config: cfg, threads };
            let res = if resume { ensemble::resume(&spec) } else { ensemble::run_ensemble(&spec) }.map_err(invalid)?;
            let r = &res.report;
            w(out, format!("seed {seed} paths {} (computed {}) blowups {}", r.n_paths, res.computed, r.n_blowup));
            w(out, output::report_csv(r).trim_end().to_string());
            w(out, format!("gronwall c {:?} decay margin {:?}", r.gronwall.c, r.decay_margin));
            match energy_audit(r) {
                Ok(a) => {
                    w(out, format!("energy audit PASS: lhs {:?} +- {:?} <= rhs {:?} (margin {:?})", a.lhs, a.stderr, a.rhs, a.margin));
                    Ok(EXIT_OK)
                }
                Err(e) => Err((EXIT_VIOLATION, e.to_string())),
            }
        }
        Command::CheckOperators { common, trials } => {
            let cfg = common.load().map_err(invalid)?;
            let rows = studies::check_operators(&cfg, trials);
            w(out, format!("seed {}", cfg.run.seed));
            w(out, format!("{:<40} {:>12} {:>10}  status", "identity", "residual", "tol"));
            for r in &rows {
                w(out, format!("{:<40} {:>12.3e} {:>10.0e}  {}", r.name, r.residual, r.tolerance, if r.pass { "ok" } else { "FAIL" }));
            }
            if rows.iter().all(|r| r.pass) {
                Ok(EXIT_OK)
            } else {
                Err((EXIT_VIOLATION, "operator identities out of tolerance".into()))
            }
        }
        Command::Convergence { common, ladder, paths } => {
            let cfg = common.load().map_err(invalid)?;
            let ladder: Vec<usize> = list(&ladder, "ladder").map_err(invalid)?;
            if ladder.is_empty() || ladder.windows(2).any(|p| p[0] >= p[1]) || ladder[0] == 0 {
                return Err(invalid("ladder must be increasing positive integers"));
            }
            let rows = studies::galerkin_convergence(&cfg, &ladder, paths).map_err(invalid)?;
            w(out, format!("seed {} reference n {}", cfg.run.seed, 2 * ladder[ladder.len() - 1]));
            w(out, "n,sup_error,stderr".into());
            for r in &rows {
                w(out, format!("{},{:?},{:?}", r.n, r.sup_error.mean, r.sup_error.stderr));
            }
            if rows.windows(2).all(|p| p[1].sup_error.mean <= p[0].sup_error.mean) {
                Ok(EXIT_OK)
            } else {
                Err((EXIT_VIOLATION, "Galerkin errors do not decrease along the ladder".into()))
            }
        }
        Command::Stability { common, eps, paths } => {
            let cfg = common.load().map_err(invalid)?;
            let eps: Vec<f64> = list(&eps, "eps").map_err(invalid)?;
            if eps.iter().any(|e| !(*e > 0.0)) {
                return Err(invalid("eps entries must be > 0"));
            }
            let rows = studies::linear_response(&cfg, &eps, paths).map_err(invalid)?;
            w(out, format!("seed {}", cfg.run.seed));
            w(out, "eps,ratio,stderr,E_sup_diff_sq,bound,m0,within_bound".into());
            for r in &rows {
                w(out, format!(
                    "{:?},{:?},{:?},{:?},{:?},{:?},{}",
                    r.eps, r.ratio.mean, r.ratio.stderr, r.report.mean_sup_diff_sq.mean, r.report.bound, r.report.m0, r.report.within_bound
                ));
            }
            let ok = rows.iter().all(|r| r.identical_at_zero && r.report.within_bound);
            if ok {
                Ok(EXIT_OK)
            } else {
                Err((EXIT_VIOLATION, "coupled solutions violate the stability bound".into()))
            }
        }
        Command::Contraction { common, horizons, steps, paths } => {
            let cfg = common.load().map_err(invalid)?;
            let hs: Vec<f64> = list(&horizons, "horizon").map_err(invalid)?;
            if steps == 0 || hs.iter().any(|h| !(*h > 0.0)) {
                return Err(invalid("horizons must be > 0 and steps >= 1"));
            }
            let rows = studies::contraction(&cfg, &hs, steps, 1e-3, paths);
            w(out, format!("seed {}", cfg.run.seed));
            w(out, "t_star,factor".into());
            for r in &rows {
                w(out, format!("{:?},{:?}", r.t_star, r.factor));
            }
            let res = studies::picard_residuals(&cfg, steps, 12).map_err(invalid)?;
            w(out, format!("picard residuals {res:?}"));
            Ok(EXIT_OK)
        }
        Command::BlowupCensus { common, ladder, paths, bins } => {
            let cfg = common.load().map_err(invalid)?;
            let ladder: Vec<f64> = list(&ladder, "ladder").map_err(invalid)?;
            if ladder.is_empty() || ladder.iter().any(|m| !(*m > 0.0)) {
                return Err(invalid("ladder levels must be > 0"));
            }
            let c = studies::blowup_census(&cfg, &ladder, paths, bins).map_err(invalid)?;
            w(out, format!("seed {}", cfg.run.seed));
            for (j, m) in c.ladder.iter().enumerate() {
                let hit = c.taus.iter().filter(|r| r[j].is_some()).count();
                w(out, format!("M {m:?}: crossed on {hit}/{} paths, histogram {:?}", c.taus.len(), c.histogram[j]));
            }
            match c.verify_monotone() {
                Ok(()) => {
                    w(out, "tau_M nondecreasing in M on every path".into());
                    Ok(EXIT_OK)
                }
                Err(e) => Err((EXIT_VIOLATION, e.to_string())),
            }
        }
        Command::DumpBasis { common } => {
            let cfg = common.load().map_err(invalid)?;
            let _ = write!(out, "{}", output::basis_csv(&cfg.basis()));
            Ok(EXIT_OK)
        }
    }
}
