use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use applam::gibbs::TraceRecord;

pub type CliResult<T> = Result<T, String>;

pub const TRACE_HEADER: &str = "iter,n_clusters,m_total,accept_mala,labels";

fn reader(path: &Path, headers: bool) -> CliResult<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Numeric CSV without header into an n × p matrix.
pub fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader(path, false)?.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| format!("{}: row {}: not a number: {f:?}", path.display(), i + 1)))
            .collect::<CliResult<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format!("{}: row {} has {} fields, expected {}", path.display(), i + 1, row.len(), first.len()));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format!("{}: no rows", path.display()));
    }
    let p = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse().map_err(|_| format!("{}: line {}: not a label: {l:?}", path.display(), i + 1)))
        .collect()
}

/// One label per line, shifted to 1-based.
pub fn format_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{}\n", l + 1)).collect()
}

fn join_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| (l + 1).to_string()).collect::<Vec<_>>().join(";")
}

pub fn format_trace<'a>(records: impl IntoIterator<Item = &'a TraceRecord>) -> String {
    let mut s = format!("{TRACE_HEADER}\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{},{}", r.iter, r.n_clusters, r.m_total, r.accept_mala, join_labels(&r.labels));
    }
    s
}

/// Saved iterations × observations, no header.
pub fn format_loglik<'a>(records: impl IntoIterator<Item = &'a TraceRecord>) -> String {
    let mut s = String::new();
    for r in records {
        let fields: Vec<String> = r.loglik.iter().map(|v| v.to_string()).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// A trace row as read back: cluster count and 0-based labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n_clusters: usize,
    pub labels: Vec<usize>,
}

pub fn read_trace(path: &Path) -> CliResult<Vec<TraceRow>> {
    let mut rd = reader(path, true)?;
    let header = rd.headers().map_err(|e| format!("{}: {e}", path.display()))?.iter().collect::<Vec<_>>().join(",");
    if header != TRACE_HEADER {
        return Err(format!("{}: expected header {TRACE_HEADER:?}, got {header:?}", path.display()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let bad = |what: &str| format!("{}: row {}: {what}", path.display(), i + 2);
        let rec = rec.map_err(|e| bad(&e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let n_clusters: usize = rec[1].parse().map_err(|_| bad("bad n_clusters"))?;
        let labels = rec[4]
            .split(';')
            .map(|l| match l.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(bad("labels must be positive integers")),
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(TraceRow { n_clusters, labels });
    }
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.labels.len() != first.labels.len()) {
            return Err(format!("{}: rows have different numbers of labels", path.display()));
        }
    }
    Ok(rows)
}

pub fn read_loglik(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let m = read_matrix(path)?;
    Ok(m.row_iter().map(|r| r.iter().copied().collect()).collect())
}
