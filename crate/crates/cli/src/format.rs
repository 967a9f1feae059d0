//! Number formatting and the matrix/vector file formats.

use std::fs;
use std::path::Path;

use cri_core::{ColumnMatrix, Matrix};

use crate::error::CliError;

/// `%.17g`: 17 significant digits, trailing zeros removed, exponent form
/// outside `1e-4 <= |x| < 1e17`. Always round-trips.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp) as usize;
    strip_zeros(&format!("{x:.decimals$}")).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn matrix_to_csv(x: &ColumnMatrix, seed: u64) -> String {
    let (n, p) = (x.n(), x.p());
    let mut out = format!("# n={n} p={p} seed={seed}\n");
    for i in 0..n {
        let row: Vec<String> = (0..p).map(|j| g17(x.column(j)[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn header_value(header: &str, key: &str) -> Option<usize> {
    header
        .trim_start_matches('#')
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
}

fn parse_row(line: &str, path: &Path, lineno: usize) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(line.as_bytes());
    let record = match rdr.records().next() {
        Some(r) => r.map_err(|e| CliError::format(format!("{}:{lineno}: {e}", path.display())))?,
        None => return Ok(Vec::new()),
    };
    record
        .iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| CliError::format(format!("{}:{lineno}: '{f}' is not a number", path.display())))
        })
        .collect()
}

pub fn read_matrix(path: &Path) -> Result<ColumnMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) if h.starts_with('#') => h,
        _ => return Err(CliError::format(format!("{}: missing '# n=.. p=..' header", path.display()))),
    };
    let (n, p) = match (header_value(header, "n"), header_value(header, "p")) {
        (Some(n), Some(p)) if n > 0 && p > 0 => (n, p),
        _ => return Err(CliError::format(format!("{}: header lacks positive n and p", path.display()))),
    };
    let mut rows = Vec::with_capacity(n);
    for (i, line) in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let row = parse_row(line, path, i + 1)?;
        if row.len() != p {
            return Err(CliError::format(format!(
                "{}:{}: expected {p} values, found {}",
                path.display(),
                i + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(CliError::format(format!(
            "{}: expected {n} rows, found {}",
            path.display(),
            rows.len()
        )));
    }
    let m = Matrix::from_fn(n, p, |i, j| rows[i][j]);
    ColumnMatrix::new(m).map_err(|e| CliError::format(format!("{}: {e}", path.display())))
}

/// A direction file: comma- or newline-separated values, `#` comments allowed.
/// The vector is normalized; a zero vector is rejected.
pub fn read_vector(path: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut v = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        v.extend(parse_row(line, path, i + 1)?);
    }
    if v.len() != n {
        return Err(CliError::format(format!(
            "{}: direction has {} entries, the matrix has n = {n} rows",
            path.display(),
            v.len()
        )));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(CliError::format(format!("{}: direction must be a nonzero finite vector", path.display())));
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}
