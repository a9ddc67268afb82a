//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored,
//! keys may appear at most once. Unknown keys are errors. Every key has a
//! default, listed in [`KEYS`], so an empty file is a valid configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use thirdgrade_core::basis::{DomainKind, DomainSpec, GalerkinBasis};
use thirdgrade_core::dynamics::{CutoffFn, CutoffMode, Forcing, System};
use thirdgrade_core::field::SpectralField;
use thirdgrade_core::noise::{NoiseModel, Profile};
use thirdgrade_core::params::{CutoffConfig, FluidParams, ParamError, RunConfig};
use thirdgrade_core::rng;

/// `(key, default, description)` for every accepted key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("nu", "0.5", "viscosity, >= 0"),
    ("alpha1", "0.5", "first material modulus, > 0"),
    ("alpha2", "-alpha1", "second material modulus; |alpha1 + alpha2| <= sqrt(24 nu beta)"),
    ("beta", "0.5", "third-grade modulus, >= 0"),
    ("cutoff_M", "50", "cut-off threshold M on the W^{2,4} norm, > 0"),
    ("n_modes", "8", "Galerkin truncation per dimension, >= 1"),
    ("dt", "0.001", "time step, > 0"),
    ("t_end", "1", "time horizon T, > 0"),
    ("seed", "0", "64-bit seed of the Brownian keys and of random initial data"),
    ("noise_kind", "diagonal", "off | diagonal | linear_vmap | additive"),
    ("noise_L", "0.1", "Lipschitz constant L of the diagonal family"),
    ("noise_K", "16", "number of retained Wiener modes K (diagonal family)"),
    ("noise_profile", "identity", "diagonal profile g: identity | saturating"),
    ("noise_additive", "", "additive fields as `mode:amp, mode:amp, ...`"),
    ("p_exponent", "6", "moment exponent p reported by ensembles, > 4"),
    ("domain", "torus", "torus | channel"),
    ("dealias_factor", "2", "grid points relative to the band 2n+1, >= 1"),
    ("quadrature_oversample", "4", "grid points relative to n for quartic quadrature, >= 2"),
    ("output_path", "out", "trajectory file (simulate) or output directory (ensemble)"),
    ("forcing", "", "constant body force U as V-coefficients `mode:amp, ...`"),
    ("initial", "random:0.5", "initial data: `random:<scale>` or `mode:amp, ...`"),
    ("sample_stride", "10", "record one trajectory sample every this many steps"),
    ("snapshot_stride", "0", "coefficient snapshot every this many steps (0 = off)"),
    ("n_paths", "16", "ensemble size"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// 1-based line number, 0 when the value did not come from a file line.
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            0 => write!(f, "field `{}`: {}", self.field, self.message),
            l => write!(f, "line {l}: field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Constraint(#[from] ParamError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Off,
    Diagonal { l: f64, k: usize, profile: Profile },
    LinearVmap,
    Additive(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Random { scale: f64 },
    Modes(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub fluid: FluidParams,
    pub cutoff: CutoffConfig,
    pub run: RunConfig,
    pub noise: NoiseSpec,
    pub forcing: Vec<(usize, f64)>,
    pub initial: InitialSpec,
    pub output_path: String,
    pub sample_stride: usize,
    pub snapshot_stride: usize,
    pub n_paths: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config::from_pairs(&[]).expect("defaults are valid")
    }
}

fn parse_pairs(s: &str) -> Result<Vec<(usize, f64)>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (i, a) = item.split_once(':').ok_or_else(|| format!("expected `mode:amp`, got `{item}`"))?;
        let i: usize = i.trim().parse().map_err(|_| format!("bad mode index `{i}`"))?;
        let a: f64 = a.trim().parse().map_err(|_| format!("bad amplitude `{a}`"))?;
        if !a.is_finite() {
            return Err(format!("amplitude `{a}` is not finite"));
        }
        out.push((i, a));
    }
    Ok(out)
}

fn fmt_pairs(p: &[(usize, f64)]) -> String {
    p.iter().map(|(i, a)| format!("{i}:{a:?}")).collect::<Vec<_>>().join(", ")
}

/// Raw `key -> (value, line)` view of a config file.
pub fn read_pairs(text: &str) -> Result<Vec<(String, String, usize)>, ParseError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| ParseError {
            line,
            field: body.to_string(),
            message: "expected `key = value`".into(),
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if !KEYS.iter().any(|(name, _, _)| *name == k) {
            return Err(ParseError { line, field: k, message: "unknown key".into() });
        }
        if let Some(prev) = seen.insert(k.clone(), line) {
            return Err(ParseError { line, field: k, message: format!("duplicate key (first set on line {prev})") });
        }
        out.push((k, v, line));
    }
    Ok(out)
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let pairs = read_pairs(text)?;
        Self::from_pairs(&pairs)
    }

    /// Builds a validated config from `(key, value, line)` triples; later
    /// entries override earlier ones, which is how command-line flags win.
    pub fn from_pairs(pairs: &[(String, String, usize)]) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
        for (k, v, l) in pairs {
            map.insert(k.as_str(), (v.as_str(), *l));
        }
        let get = |key: &'static str| -> (String, usize) {
            match map.get(key) {
                Some((v, l)) => (v.to_string(), *l),
                None => (KEYS.iter().find(|(k, _, _)| *k == key).unwrap().1.to_string(), 0),
            }
        };
        fn num<T: std::str::FromStr>(key: &str, v: &(String, usize)) -> Result<T, ParseError> {
            v.0.parse::<T>().map_err(|_| ParseError { line: v.1, field: key.into(), message: format!("cannot parse `{}`", v.0) })
        }
        let err = |key: &str, v: &(String, usize), m: &str| ParseError { line: v.1, field: key.into(), message: m.into() };

        let nu: f64 = num("nu", &get("nu"))?;
        let alpha1: f64 = num("alpha1", &get("alpha1"))?;
        let a2v = get("alpha2");
        let alpha2: f64 = if a2v.0 == "-alpha1" { -alpha1 } else { num("alpha2", &a2v)? };
        let beta: f64 = num("beta", &get("beta"))?;
        let fluid = FluidParams::new(nu, alpha1, alpha2, beta)?;

        let mv = get("cutoff_M");
        let cutoff = CutoffConfig::new(num("cutoff_M", &mv)?).map_err(|e| err("cutoff_M", &mv, &e.to_string()))?;

        let domain_v = get("domain");
        let domain: DomainKind = domain_v.0.parse().map_err(|_| err("domain", &domain_v, "expected torus | channel"))?;
        let run = RunConfig {
            n_modes: num("n_modes", &get("n_modes"))?,
            dt: num("dt", &get("dt"))?,
            t_end: num("t_end", &get("t_end"))?,
            seed: num("seed", &get("seed"))?,
            noise_truncation: num("noise_K", &get("noise_K"))?,
            p_exponent: num("p_exponent", &get("p_exponent"))?,
            domain,
            dealias_factor: num("dealias_factor", &get("dealias_factor"))?,
            quadrature_oversample: num("quadrature_oversample", &get("quadrature_oversample"))?,
        };
        if let Err(e) = run.validate() {
            let msg = e.to_string();
            let field = ["n_modes", "dt", "t_end", "dealias_factor", "quadrature_oversample"]
                .into_iter()
                .find(|f| msg.starts_with(f))
                .unwrap_or("p_exponent");
            return Err(err(field, &get(field), &msg).into());
        }

        let kind = get("noise_kind");
        let lv = get("noise_L");
        let l: f64 = num("noise_L", &lv)?;
        if !(l.is_finite() && l >= 0.0) {
            return Err(err("noise_L", &lv, "noise_L must be finite and >= 0").into());
        }
        let pv = get("noise_profile");
        let profile = match pv.0.as_str() {
            "identity" => Profile::Identity,
            "saturating" => Profile::Saturating,
            _ => return Err(err("noise_profile", &pv, "expected identity | saturating").into()),
        };
        let av = get("noise_additive");
        let additive = parse_pairs(&av.0).map_err(|m| err("noise_additive", &av, &m))?;
        let noise = match kind.0.as_str() {
            "off" => NoiseSpec::Off,
            "diagonal" => NoiseSpec::Diagonal { l, k: run.noise_truncation, profile },
            "linear_vmap" => NoiseSpec::LinearVmap,
            "additive" => {
                if additive.is_empty() {
                    return Err(err("noise_additive", &av, "additive noise needs at least one `mode:amp` entry").into());
                }
                NoiseSpec::Additive(additive)
            }
            _ => return Err(err("noise_kind", &kind, "expected off | diagonal | linear_vmap | additive").into()),
        };

        let fv = get("forcing");
        let forcing = parse_pairs(&fv.0).map_err(|m| err("forcing", &fv, &m))?;
        let iv = get("initial");
        let initial = if let Some(s) = iv.0.strip_prefix("random:") {
            let scale: f64 = s.trim().parse().map_err(|_| err("initial", &iv, "bad scale in `random:<scale>`"))?;
            InitialSpec::Random { scale }
        } else {
            InitialSpec::Modes(parse_pairs(&iv.0).map_err(|m| err("initial", &iv, &m))?)
        };
        let sample_stride: usize = num("sample_stride", &get("sample_stride"))?;
        let snapshot_stride: usize = num("snapshot_stride", &get("snapshot_stride"))?;
        let npv = get("n_paths");
        let n_paths: usize = num("n_paths", &npv)?;
        if n_paths == 0 {
            return Err(err("n_paths", &npv, "n_paths must be >= 1").into());
        }
        let cfg = Config {
            fluid,
            cutoff,
            run,
            noise,
            forcing,
            initial,
            output_path: get("output_path").0,
            sample_stride: sample_stride.max(1),
            snapshot_stride,
            n_paths,
        };
        cfg.check_indices().map_err(|(f, m)| err(f, &get(f), &m))?;
        Ok(cfg)
    }

    fn check_indices(&self) -> Result<(), (&'static str, String)> {
        let n = self.basis_len();
        let bad = |p: &[(usize, f64)]| p.iter().find(|(i, _)| *i >= n).map(|(i, _)| format!("mode {i} out of range (basis has {n} modes)"));
        if let Some(m) = bad(&self.forcing) {
            return Err(("forcing", m));
        }
        if let InitialSpec::Modes(p) = &self.initial {
            if let Some(m) = bad(p) {
                return Err(("initial", m));
            }
        }
        if let NoiseSpec::Additive(p) = &self.noise {
            if let Some(m) = bad(p) {
                return Err(("noise_additive", m));
            }
        }
        Ok(())
    }

    /// Number of basis modes implied by `n_modes` and `domain`.
    pub fn basis_len(&self) -> usize {
        let n = self.run.n_modes;
        match self.run.domain {
            DomainKind::Torus => (2 * n + 1) * (2 * n + 1) - 1,
            DomainKind::Channel => n * (2 * n + 1) + 1,
        }
    }

    /// Canonical text form; parsing it gives back an identical config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (kind, l, profile, additive) = match &self.noise {
            NoiseSpec::Off => ("off", 0.1, Profile::Identity, Vec::new()),
            NoiseSpec::Diagonal { l, profile, .. } => ("diagonal", *l, *profile, Vec::new()),
            NoiseSpec::LinearVmap => ("linear_vmap", 0.1, Profile::Identity, Vec::new()),
            NoiseSpec::Additive(p) => ("additive", 0.1, Profile::Identity, p.clone()),
        };
        let profile = match profile {
            Profile::Identity => "identity",
            Profile::Saturating => "saturating",
        };
        let initial = match &self.initial {
            InitialSpec::Random { scale } => format!("random:{scale:?}"),
            InitialSpec::Modes(p) => fmt_pairs(p),
        };
        let f = &self.fluid;
        let r = &self.run;
        let lines: Vec<(&str, String)> = vec![
            ("nu", format!("{:?}", f.nu)),
            ("alpha1", format!("{:?}", f.alpha1)),
            ("alpha2", format!("{:?}", f.alpha2)),
            ("beta", format!("{:?}", f.beta)),
            ("cutoff_M", format!("{:?}", self.cutoff.m)),
            ("n_modes", r.n_modes.to_string()),
            ("dt", format!("{:?}", r.dt)),
            ("t_end", format!("{:?}", r.t_end)),
            ("seed", r.seed.to_string()),
            ("noise_kind", kind.into()),
            ("noise_L", format!("{l:?}")),
            ("noise_K", r.noise_truncation.to_string()),
            ("noise_profile", profile.into()),
            ("noise_additive", fmt_pairs(&additive)),
            ("p_exponent", format!("{:?}", r.p_exponent)),
            ("domain", r.domain.name().into()),
            ("dealias_factor", format!("{:?}", r.dealias_factor)),
            ("quadrature_oversample", r.quadrature_oversample.to_string()),
            ("output_path", self.output_path.clone()),
            ("forcing", fmt_pairs(&self.forcing)),
            ("initial", initial),
            ("sample_stride", self.sample_stride.to_string()),
            ("snapshot_stride", self.snapshot_stride.to_string()),
            ("n_paths", self.n_paths.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Hash of everything that determines path results (not output location
    /// or ensemble size).
    pub fn physics_hash(&self) -> u64 {
        let text: String = self
            .to_text()
            .lines()
            .filter(|l| !(l.starts_with("output_path") || l.starts_with("n_paths")))
            .collect::<Vec<_>>()
            .join("\n");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    pub fn domain_spec(&self) -> DomainSpec {
        DomainSpec::for_truncation(self.run.domain, self.run.n_modes, self.run.dealias_factor, self.run.quadrature_oversample)
    }

    pub fn basis(&self) -> Arc<GalerkinBasis> {
        Arc::new(GalerkinBasis::build(self.domain_spec(), self.fluid.alpha1, self.run.n_modes))
    }

    pub fn noise_model(&self) -> NoiseModel {
        match &self.noise {
            NoiseSpec::Off => NoiseModel::off(),
            NoiseSpec::Diagonal { l, k, profile } => NoiseModel::diagonal(*profile, *l, *k),
            NoiseSpec::LinearVmap => NoiseModel::linear_vmap(),
            NoiseSpec::Additive(p) => NoiseModel::additive(p.clone()),
        }
    }

    pub fn cutoff_mode(&self) -> CutoffMode {
        CutoffMode::Smooth(CutoffFn::new(self.cutoff.m).expect("validated"))
    }

    pub fn system(&self, basis: &Arc<GalerkinBasis>) -> System {
        let mut sys = System::new(basis.clone(), self.fluid, self.cutoff_mode(), self.noise_model(), self.run.dt);
        if !self.forcing.is_empty() {
            let mut u = vec![0.0; basis.len()];
            for &(i, a) in &self.forcing {
                u[i] += a;
            }
            sys = sys.with_forcing(Forcing::Constant(u));
        }
        sys
    }

    /// Initial data. Random data depend only on the seed, so every path of an
    /// ensemble starts from the same field.
    pub fn initial_field(&self, basis: &Arc<GalerkinBasis>) -> SpectralField {
        let c = match &self.initial {
            InitialSpec::Random { scale } => basis
                .modes()
                .iter()
                .enumerate()
                .map(|(i, m)| scale * rng::normal(self.run.seed, u64::MAX, i as u64, 0) / (1.0 + m.mu))
                .collect(),
            InitialSpec::Modes(p) => {
                let mut c = vec![0.0; basis.len()];
                for &(i, a) in p {
                    c[i] += a;
                }
                c
            }
        };
        SpectralField::from_coeffs(basis.clone(), c).expect("finite initial data")
    }
}

/// Help text listing every key with its default.
pub fn keys_help() -> String {
    let mut s = String::from("Config keys (flat `key = value` file, `#` comments; flags override file values):\n");
    for (k, d, desc) in KEYS {
        let d = if d.is_empty() { "(empty)" } else { d };
        let _ = writeln!(s, "  {k:<22} default {d:<12} {desc}");
    }
    s
}
