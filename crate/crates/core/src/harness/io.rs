//! Text formats: matrices, factor pairs, trace CSVs and `key = value` summaries.
//! Every float is written with Rust's shortest round-trip formatting, so
//! reading a file back gives bit-identical values.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use super::HarnessError;
use crate::dense::DenseMatrix;
use crate::objective::FactorPair;
use crate::solver::IterRecord;

pub const TRACE_HEADER: &str = "iter,obj_scaled,obj_paper,resU,resV,nnzU,nnzV,distU_final,distV_final,time_s";

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(contents).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// `rows cols` on the first line, then one line per row.
pub fn matrix_to_text(x: &DenseMatrix) -> String {
    let mut s = format!("{} {}\n", x.rows(), x.cols());
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if j > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:?}", x[(i, j)]);
        }
        s.push('\n');
    }
    s
}

fn parse_matrix<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<DenseMatrix, HarnessError> {
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Format("missing matrix header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| HarnessError::Format(format!("bad matrix header '{header}'")))?;
    let [rows, cols] = dims[..] else {
        return Err(HarnessError::Format(format!("bad matrix header '{header}'")));
    };
    let mut x = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| HarnessError::Format(format!("matrix ends after {i} of {rows} rows")))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| HarnessError::Format(format!("bad number in row {i}")))?;
        if vals.len() != cols {
            return Err(HarnessError::Format(format!(
                "row {i} has {} entries, expected {cols}",
                vals.len()
            )));
        }
        for (j, v) in vals.into_iter().enumerate() {
            x.col_mut(j)[i] = v;
        }
    }
    Ok(x)
}

fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn matrix_from_text(text: &str) -> Result<DenseMatrix, HarnessError> {
    let mut lines = content_lines(text);
    let x = parse_matrix(&mut lines)?;
    if lines.next().is_some() {
        return Err(HarnessError::Format("trailing data after matrix".into()));
    }
    Ok(x)
}

/// `U` block followed by `V` block.
pub fn factors_to_text(w: &FactorPair) -> String {
    format!("# U\n{}# V\n{}", matrix_to_text(&w.u), matrix_to_text(&w.v))
}

pub fn factors_from_text(text: &str) -> Result<FactorPair, HarnessError> {
    let mut lines = content_lines(text);
    let u = parse_matrix(&mut lines)?;
    let v = parse_matrix(&mut lines)?;
    if lines.next().is_some() {
        return Err(HarnessError::Format("trailing data after factors".into()));
    }
    Ok(FactorPair::new(u, v)?)
}

/// Trace CSV; `deterministic` writes `0` in the wall-time column so that
/// identical runs give identical bytes.
pub fn trace_to_csv(records: &[IterRecord], deterministic: bool) -> String {
    let mut s = String::with_capacity(records.len() * 160);
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in records {
        let time = if deterministic { 0.0 } else { r.time_s };
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{},{},{:?},{:?},{:?}",
            r.iter,
            r.obj_scaled,
            r.obj_paper,
            r.res_u,
            r.res_v,
            r.nnz_u,
            r.nnz_v,
            r.dist_u_final,
            r.dist_v_final,
            time
        );
    }
    s
}

pub fn trace_from_csv(text: &str) -> Result<Vec<IterRecord>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        other => {
            return Err(HarnessError::Format(format!(
                "trace header mismatch: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(HarnessError::Format(format!("trace row {k}: {} fields", f.len())));
            }
            let bad = |_| HarnessError::Format(format!("trace row {k}: bad value"));
            let fl = |i: usize| f[i].trim().parse::<f64>().map_err(bad);
            let us = |i: usize| f[i].trim().parse::<usize>().map_err(|_| HarnessError::Format(format!("trace row {k}: bad count")));
            Ok(IterRecord {
                iter: us(0)?,
                obj_scaled: fl(1)?,
                obj_paper: fl(2)?,
                res_u: fl(3)?,
                res_v: fl(4)?,
                nnz_u: us(5)?,
                nnz_v: us(6)?,
                dist_u_final: fl(7)?,
                dist_v_final: fl(8)?,
                time_s: fl(9)?,
            })
        })
        .collect()
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(pub Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, format!("{value:?}"));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut kv = KeyValues::default();
        for line in content_lines(text) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Format(format!("expected key = value, got '{line}'")))?;
            kv.push(k.trim(), v.trim());
        }
        Ok(kv)
    }
}
