//! Atomic file writes and the small CSV conventions shared by all outputs.

use crate::diagnostics::DiagnosticRow;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Float formatting used in every CSV: 17 significant digits, exact on read-back.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CsvError> {
    let io = |source| CsvError::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// `t,name,value` rows.
pub fn diagnostics_csv(rows: &[DiagnosticRow]) -> String {
    let mut out = String::from("t,name,value\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", fmt_f64(r.t), r.name, fmt_f64(r.value)));
    }
    out
}

/// Reads the `eps` and `residual` columns of a rate CSV (other columns are ignored).
pub fn read_rate_samples(text: &str) -> Result<Vec<(f64, f64)>, CsvError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let Some((_, header)) = lines.next() else {
        return Err(CsvError::Format { line: 1, message: "empty file".into() });
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter().position(|c| *c == name).ok_or_else(|| CsvError::Format {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (ie, ir) = (find("eps")?, find("residual")?);
    let mut out = Vec::new();
    for (no, line) in lines {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != cols.len() {
            return Err(CsvError::Format {
                line: no + 1,
                message: format!("expected {} columns, got {}", cols.len(), parts.len()),
            });
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|e| CsvError::Format { line: no + 1, message: format!("`{s}`: {e}") })
        };
        out.push((num(parts[ie])?, num(parts[ir])?));
    }
    Ok(out)
}
