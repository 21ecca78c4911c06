//! Text formats: dense matrices, complex signals, traces and instance
//! directories.
//!
//! A matrix file starts with `rows cols` followed by one line per row of
//! whitespace-separated values. Blank lines and lines starting with `#` are
//! ignored. Values are written with Rust's shortest round-trip formatting, so
//! reading a written file gives back the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lowrank_core::measurements::{generate_instance, GaussianSensing, PhaseMeasurements, Sampling};
use lowrank_core::{Ensemble, IterTrace, ProblemInstance, Scenario};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: line {line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Core(#[from] lowrank_core::Error),
}

pub type IoResult<T> = Result<T, IoError>;

fn read(path: &Path) -> IoResult<String> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> IoResult<()> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> IoResult<()> {
    fs::create_dir_all(dir).map_err(|source| IoError::File {
        path: dir.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Scientific notation with 17 significant digits, enough to round-trip any f64.
fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| sci(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, path: &Path) -> IoResult<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(path, 1, "missing `rows cols` header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| parse_err(path, hline, "header must be `rows cols`"))?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(path, hline, "header must be `rows cols`"));
    };
    let mut m = DMatrix::zeros(rows, cols);
    let mut i = 0;
    for (lno, line) in lines {
        if i == rows {
            return Err(parse_err(path, lno, "more rows than declared"));
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(path, lno, "not a number"))?;
        if vals.len() != cols {
            return Err(parse_err(path, lno, format!("expected {cols} values, found {}", vals.len())));
        }
        m.row_mut(i).copy_from_slice(&vals);
        i += 1;
    }
    if i != rows {
        return Err(parse_err(path, hline, format!("declared {rows} rows, found {i}")));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> IoResult<DMatrix<f64>> {
    parse_matrix(&read(path)?, path)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> IoResult<()> {
    write(path, &format_matrix(m))
}

/// A vector file holds one value per line; blank lines and `#` comments are
/// skipped.
pub fn parse_vector(text: &str, path: &Path) -> IoResult<DVector<f64>> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        values.push(line.parse().map_err(|_| parse_err(path, i + 1, "expected one number"))?);
    }
    Ok(DVector::from_vec(values))
}

pub fn format_vector(v: &DVector<f64>) -> String {
    let mut out = String::new();
    for x in v.iter() {
        let _ = writeln!(out, "{}", sci(*x));
    }
    out
}

pub fn read_vector(path: &Path) -> IoResult<DVector<f64>> {
    parse_vector(&read(path)?, path)
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> IoResult<()> {
    write(path, &format_vector(v))
}

/// Complex samples as CSV lines `index,re,im`, with a header row.
pub fn write_signal(path: &Path, entries: &[(usize, Complex64)]) -> IoResult<()> {
    let csv_err = |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["index", "re", "im"]).map_err(csv_err)?;
    for (k, v) in entries {
        w.write_record([k.to_string(), sci(v.re), sci(v.im)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Read `index,re,im` lines; a header row is optional. Entries come back
/// sorted by index.
pub fn read_signal(path: &Path) -> IoResult<Vec<(usize, Complex64)>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if i == 0 && rec.get(0) == Some("index") {
            continue;
        }
        let line = i + 1;
        if rec.len() != 3 {
            return Err(parse_err(path, line, "expected index,re,im"));
        }
        let k: usize = rec[0].parse().map_err(|_| parse_err(path, line, "bad index"))?;
        let re: f64 = rec[1].parse().map_err(|_| parse_err(path, line, "bad real part"))?;
        let im: f64 = rec[2].parse().map_err(|_| parse_err(path, line, "bad imaginary part"))?;
        out.push((k, Complex64::new(re, im)));
    }
    out.sort_by_key(|e| e.0);
    if out.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(parse_err(path, 1, "duplicate index"));
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trace CSV: `iter,rel_residual,rel_error,elapsed_ms`. A missing error is
/// an empty field.
pub fn format_trace(trace: &[IterTrace]) -> String {
    let mut out = String::from("iter,rel_residual,rel_error,elapsed_ms\n");
    for t in trace {
        let _ = writeln!(out, "{},{},{},{:.3}", t.iter, t.rel_residual, opt(t.rel_error), t.elapsed_ms);
    }
    out
}

pub fn write_trace(path: &Path, trace: &[IterTrace]) -> IoResult<()> {
    write(path, &format_trace(trace))
}

/// Write `text` to `dir/name`, creating `dir` when needed.
pub fn write_in(dir: &Path, name: &str, text: &str) -> IoResult<()> {
    create_dir(dir)?;
    write(&dir.join(name), text)
}

/// Store an instance as `meta` (`key=value` lines), `X.mat`, `y.vec` and
/// the ensemble: `omega.idx` (1-based `i j` pairs) for completion,
/// `operator.mat` (one row per measurement) for sensing, `vectors.mat` for
/// phase retrieval.
pub fn write_instance(dir: &Path, p: &ProblemInstance) -> IoResult<()> {
    create_dir(dir)?;
    let meta = format!(
        "model={}\nn={}\nr={}\nm={}\nseed={}\n",
        p.scenario,
        p.n(),
        p.r,
        p.m(),
        p.seed
    );
    write(&dir.join("meta"), &meta)?;
    write_matrix(&dir.join("X.mat"), &p.truth)?;
    write_vector(&dir.join("y.vec"), &p.y)?;
    match &p.ensemble {
        Ensemble::Sensing(s) => write_matrix(&dir.join("operator.mat"), s.operator()),
        Ensemble::Completion(s) => {
            let mut text = String::new();
            for (i, j) in s.omega() {
                let _ = writeln!(text, "{} {}", i + 1, j + 1);
            }
            write(&dir.join("omega.idx"), &text)
        }
        Ensemble::PhaseRetrieval(ph) => write_matrix(&dir.join("vectors.mat"), ph.vectors()),
    }
}

fn meta_value<'a>(meta: &'a str, key: &str, path: &Path) -> IoResult<&'a str> {
    meta.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
        .ok_or_else(|| parse_err(path, 1, format!("missing key `{key}`")))
}

pub fn read_instance(dir: &Path) -> IoResult<ProblemInstance> {
    let meta_path = dir.join("meta");
    let meta = read(&meta_path)?;
    let num = |key: &str| -> IoResult<u64> {
        meta_value(&meta, key, &meta_path)?
            .parse()
            .map_err(|_| parse_err(&meta_path, 1, format!("`{key}` is not an integer")))
    };
    let scenario: Scenario = meta_value(&meta, "model", &meta_path)?
        .parse()
        .map_err(|_| parse_err(&meta_path, 1, "unknown model"))?;
    let (n, r, seed) = (num("n")? as usize, num("r")? as usize, num("seed")?);
    let truth = read_matrix(&dir.join("X.mat"))?;
    let y = read_vector(&dir.join("y.vec"))?;
    let ensemble = match scenario {
        Scenario::Sensing => {
            let op = read_matrix(&dir.join("operator.mat"))?;
            let mats: Vec<DMatrix<f64>> = (0..op.nrows())
                .map(|l| DMatrix::from_iterator(n, n, op.row(l).iter().copied()))
                .collect();
            Ensemble::Sensing(GaussianSensing::new(n, &mats)?)
        }
        Scenario::Completion | Scenario::FullCompletion => {
            let path = dir.join("omega.idx");
            let text = read(&path)?;
            let mut omega = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let bad = || parse_err(&path, i + 1, "expected a 1-based pair `i j`");
                let mut it = line.split_whitespace().map(|t| t.parse::<usize>());
                let (Some(Ok(a)), Some(Ok(b)), None) = (it.next(), it.next(), it.next()) else {
                    return Err(bad());
                };
                if a == 0 || b == 0 {
                    return Err(bad());
                }
                omega.push((a - 1, b - 1));
            }
            Ensemble::Completion(Sampling::new(n, omega)?)
        }
        Scenario::PhaseRetrieval => {
            Ensemble::PhaseRetrieval(PhaseMeasurements::new(read_matrix(&dir.join("vectors.mat"))?)?)
        }
    };
    Ok(ProblemInstance::from_parts(scenario, ensemble, truth, y, r, seed)?)
}

/// Generate an instance and store it in `dir`.
pub fn generate_to(dir: &Path, scenario: Scenario, n: usize, r: usize, m: usize, seed: u64) -> IoResult<ProblemInstance> {
    let p = generate_instance(scenario, n, r, m, seed)?;
    write_instance(dir, &p)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -0.1, 1e-300, std::f64::consts::PI, 0.0, -7.25e12]);
        let text = format_matrix(&m);
        let back = parse_matrix(&text, Path::new("m")).unwrap();
        assert_eq!(back, m);
        assert!(text.starts_with("2 3\n1.0000000000000000e0 -1.0000000000000001e-1 "), "{text}");
    }

    #[test]
    fn matrix_parse_errors() {
        let p = Path::new("m");
        assert!(parse_matrix("", p).is_err());
        assert!(parse_matrix("2 2\n1 2\n", p).is_err());
        assert!(parse_matrix("1 2\n1 x\n", p).is_err());
        assert!(parse_matrix("1 2\n1 2 3\n", p).is_err());
        assert!(parse_matrix("1 1\n1\n2\n", p).is_err());
        let m = parse_matrix("# comment\n1 2\n\n3 4\n", p).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(1, 2, &[3.0, 4.0]));
    }

    #[test]
    fn trace_format() {
        let t = [IterTrace {
            iter: 0,
            rel_residual: 0.5,
            rel_error: None,
            elapsed_ms: 1.0,
            objective: Some(2.0),
        }];
        assert_eq!(format_trace(&t), "iter,rel_residual,rel_error,elapsed_ms\n0,0.5,,1.000\n");
    }

    #[test]
    fn vector_round_trip_and_errors() {
        let v = DVector::from_vec(vec![1.5, -2e-310, 3.0]);
        assert_eq!(parse_vector(&format_vector(&v), Path::new("v")).unwrap(), v);
        assert!(parse_vector("1\n2 3\n", Path::new("v")).is_err());
    }

    #[test]
    fn omega_is_one_based_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = generate_instance(Scenario::Completion, 3, 1, 4, 2).unwrap();
        write_instance(dir.path(), &p).unwrap();
        let text = std::fs::read_to_string(dir.path().join("omega.idx")).unwrap();
        let (i, j) = match &p.ensemble {
            Ensemble::Completion(s) => s.omega()[0],
            _ => unreachable!(),
        };
        assert_eq!(text.lines().next().unwrap(), format!("{} {}", i + 1, j + 1));
        std::fs::write(dir.path().join("omega.idx"), "0 1\n").unwrap();
        assert!(read_instance(dir.path()).is_err());
    }
}
