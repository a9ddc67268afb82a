//! File formats: trajectory JSON-lines, coefficient and field CSV, basis
//! CSV and estimate reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, and
//! `serde_json` is built with `float_roundtrip`, so reading a file back gives
//! the exact bits that were written.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thirdgrade_core::basis::{DomainKind, GalerkinBasis};
use thirdgrade_core::diagnostics::{EnsembleReport, PathSummary, TrajectoryRecord, TrajectorySample};
use thirdgrade_core::field::SpectralField;

/// First line of every trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub seed: u64,
    pub path: u64,
    pub config_hash: String,
    pub n_modes: usize,
    pub basis_len: usize,
    pub dt: f64,
}

/// One line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum Line {
    Header(Header),
    Sample(TrajectorySample),
    Summary(PathSummary),
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.display().to_string(), source }
}

pub fn hash_hex(h: u64) -> String {
    format!("{h:016x}")
}

fn write_lines(w: &mut impl Write, header: &Header, record: &TrajectoryRecord) -> io::Result<()> {
    let mut put = |l: &Line| -> io::Result<()> {
        serde_json::to_writer(&mut *w, l)?;
        w.write_all(b"\n")
    };
    put(&Line::Header(header.clone()))?;
    for s in &record.samples {
        put(&Line::Sample(*s))?;
    }
    put(&Line::Summary(record.summary.clone()))
}

/// Writes a trajectory file through a temporary sibling and a rename, so a
/// reader never sees a half-written file.
pub fn write_trajectory(path: &Path, header: &Header, record: &TrajectoryRecord) -> Result<(), OutputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("jsonl.tmp");
    {
        let f = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(f);
        write_lines(&mut w, header, record).map_err(io_err(&tmp))?;
        w.flush().map_err(io_err(&tmp))?;
        w.get_ref().sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Reads a trajectory file. Fails unless it has a header and a summary line.
pub fn read_trajectory(path: &Path) -> Result<(Header, TrajectoryRecord), OutputError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut header = None;
    let mut samples = Vec::new();
    let mut summary = None;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| OutputError::Malformed { path: path.display().to_string(), line: i + 1, message };
        match serde_json::from_str::<Line>(&line).map_err(|e| bad(e.to_string()))? {
            Line::Header(h) => header = Some(h),
            Line::Sample(s) => samples.push(s),
            Line::Summary(s) => summary = Some(s),
        }
    }
    let missing = |what: &str| OutputError::Malformed { path: path.display().to_string(), line: 0, message: format!("missing {what} line") };
    let header = header.ok_or_else(|| missing("header"))?;
    let summary = summary.ok_or_else(|| missing("summary"))?;
    Ok((header, TrajectoryRecord { samples, summary }))
}

fn create(path: &Path) -> Result<BufWriter<File>, OutputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Coefficient CSV with columns `t, i, c`; one block of rows per snapshot.
pub fn write_coeff_csv(path: &Path, snapshots: &[(f64, Vec<f64>)]) -> Result<(), OutputError> {
    let mut w = create(path)?;
    let e = io_err(path);
    let mut body = String::from("t,i,c\n");
    for (t, c) in snapshots {
        for (i, v) in c.iter().enumerate() {
            body.push_str(&format!("{t:?},{i},{v:?}\n"));
        }
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(e)
}

pub fn read_coeff_csv(path: &Path) -> Result<Vec<(f64, Vec<f64>)>, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let bad = || OutputError::Malformed { path: path.display().to_string(), line: n + 1, message: "expected `t,i,c`".into() };
        let mut it = line.split(',');
        let (t, i, c) = (it.next().ok_or_else(bad)?, it.next().ok_or_else(bad)?, it.next().ok_or_else(bad)?);
        let t: f64 = t.parse().map_err(|_| bad())?;
        let i: usize = i.parse().map_err(|_| bad())?;
        let c: f64 = c.parse().map_err(|_| bad())?;
        if i == 0 {
            out.push((t, Vec::new()));
        }
        let last = out.last_mut().ok_or_else(bad)?;
        if last.1.len() != i {
            return Err(bad());
        }
        last.1.push(c);
    }
    Ok(out)
}

/// Velocity on the quadrature grid, columns `x1, x2, u1, u2`. Channel fields
/// are written on the physical strip `0 <= x2 <= pi` only.
pub fn write_field_csv(path: &Path, y: &SpectralField) -> Result<(), OutputError> {
    let u = y.synthesize();
    let g = y.basis().grid();
    let n = g.points();
    let channel = y.basis().kind() == DomainKind::Channel;
    let mut body = String::from("x1,x2,u1,u2\n");
    for l in 0..n {
        for j in 0..n {
            let (x1, x2) = (g.coord(l), g.coord(j));
            if channel && x2 > std::f64::consts::PI + 1e-12 {
                continue;
            }
            let p = l * n + j;
            body.push_str(&format!("{x1:?},{x2:?},{:?},{:?}\n", u.components[0][p], u.components[1][p]));
        }
    }
    let mut w = create(path)?;
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Basis table: `index, kind, k, m, mu, v_factor, lambda`. For the torus
/// `(k, m)` is the wavevector; for the channel it is the signed `x1`
/// wavenumber and the wall-normal index.
pub fn basis_csv(b: &GalerkinBasis) -> String {
    let mut s = String::from("index,kind,k,m,mu,v_factor,lambda\n");
    for m in b.modes() {
        s.push_str(&format!(
            "{},{},{},{},{:?},{:?},{:?}\n",
            m.index,
            m.shape.name(),
            m.label[0],
            m.label[1],
            m.mu,
            m.v_factor,
            m.lambda
        ));
    }
    s
}

/// Estimate table: `name, value, bound, margin, stderr` (empty cells where
/// no bound applies).
pub fn report_csv(r: &EnsembleReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    let mut s = String::from("name,value,bound,margin,stderr\n");
    for row in r.rows() {
        s.push_str(&format!("{},{:?},{},{},{:?}\n", row.name, row.value, opt(row.bound), opt(row.margin), row.stderr));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), OutputError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
}
