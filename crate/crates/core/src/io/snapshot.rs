//! Plain-text snapshots: a `# key = value` header followed by one CSV row per cell.

use super::csv::fmt_f64;
use crate::grid::{Field, Grid};
use crate::kinetics::Parameters;
use crate::trajectory::State;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("snapshot header: {0}")]
    Header(String),
    #[error("snapshot shape: {0}")]
    Shape(String),
    #[error("snapshot line {line}: {message}")]
    Value { line: usize, message: String },
}

const MAGIC: &str = "# fastlim snapshot";

/// SHA-256 of the parameter values in canonical order and formatting.
pub fn param_hash(prm: &Parameters) -> String {
    let mut h = Sha256::new();
    for (name, v) in prm.named() {
        h.update(format!("{name}={}\n", fmt_f64(v)).as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub t: f64,
    pub grid: Grid,
    pub param_hash: String,
    pub fields: Vec<String>,
}

pub fn write_snapshot<S: State>(st: &S, prm: &Parameters) -> String {
    let g = st.grid();
    let join = |v: Vec<String>| v.join(",");
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("# t = {}\n", fmt_f64(st.time())));
    out.push_str(&format!("# dim = {}\n", g.dim()));
    out.push_str(&format!("# extent = {}\n", join(g.extent().iter().map(|&e| fmt_f64(e)).collect())));
    out.push_str(&format!("# cells = {}\n", join(g.cells().iter().map(|c| c.to_string()).collect())));
    out.push_str(&format!("# param_hash = {}\n", param_hash(prm)));
    out.push_str(&format!("# fields = {}\n", S::FIELD_NAMES.join(",")));
    out.push_str(&format!("cell,{}\n", S::FIELD_NAMES.join(",")));
    let fields = st.fields();
    for i in 0..g.len() {
        out.push_str(&i.to_string());
        for f in &fields {
            out.push(',');
            out.push_str(&fmt_f64(f.values()[i]));
        }
        out.push('\n');
    }
    out
}

fn header_value<'a>(lines: &[&'a str], key: &str) -> Result<&'a str, SnapshotError> {
    lines
        .iter()
        .find_map(|l| {
            let (k, v) = l.trim_start_matches('#').split_once('=')?;
            (k.trim() == key).then(|| v.trim())
        })
        .ok_or_else(|| SnapshotError::Header(format!("missing `{key}`")))
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>, SnapshotError> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| SnapshotError::Header(format!("bad `{key}` entry `{p}`"))))
        .collect()
}

/// Parses a snapshot written by [`write_snapshot`]; nothing is returned unless
/// the whole file is consistent.
pub fn read_snapshot<S: State>(text: &str) -> Result<(S, SnapshotHeader), SnapshotError> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.first() != Some(&MAGIC) {
        return Err(SnapshotError::Header("missing snapshot marker".into()));
    }
    let header_len = lines.iter().take_while(|l| l.starts_with('#')).count();
    let head = &lines[..header_len];
    let t: f64 = header_value(head, "t")?.parse().map_err(|_| SnapshotError::Header("bad `t`".into()))?;
    let dim: usize = header_value(head, "dim")?.parse().map_err(|_| SnapshotError::Header("bad `dim`".into()))?;
    let extent: Vec<f64> = parse_list(header_value(head, "extent")?, "extent")?;
    let cells: Vec<usize> = parse_list(header_value(head, "cells")?, "cells")?;
    let hash = header_value(head, "param_hash")?.to_string();
    let fields: Vec<String> = header_value(head, "fields")?.split(',').map(|s| s.trim().to_string()).collect();
    if extent.len() != dim || cells.len() != dim {
        return Err(SnapshotError::Header(format!("dim = {dim} but extent/cells have {}/{} entries", extent.len(), cells.len())));
    }
    if fields != S::FIELD_NAMES {
        return Err(SnapshotError::Header(format!("fields {:?}, expected {:?}", fields, S::FIELD_NAMES)));
    }
    let grid = Grid::new(&extent, &cells).map_err(|e| SnapshotError::Header(e.to_string()))?;
    let expected_columns = format!("cell,{}", S::FIELD_NAMES.join(","));
    if lines.get(header_len) != Some(&expected_columns.as_str()) {
        return Err(SnapshotError::Header("missing column line".into()));
    }
    let body = &lines[header_len + 1..];
    if body.len() != grid.len() {
        return Err(SnapshotError::Shape(format!("grid has {} cells, file has {} rows", grid.len(), body.len())));
    }
    let mut values = vec![Vec::with_capacity(grid.len()); fields.len()];
    for (i, row) in body.iter().enumerate() {
        let line = header_len + 2 + i;
        let parts: Vec<&str> = row.split(',').collect();
        if parts.len() != fields.len() + 1 {
            return Err(SnapshotError::Value { line, message: format!("expected {} columns", fields.len() + 1) });
        }
        if parts[0].parse::<usize>() != Ok(i) {
            return Err(SnapshotError::Value { line, message: format!("expected cell {i}") });
        }
        for (k, p) in parts[1..].iter().enumerate() {
            let v: f64 = p.parse().map_err(|_| SnapshotError::Value { line, message: format!("bad number `{p}`") })?;
            values[k].push(v);
        }
    }
    let fs = values.into_iter().map(|v| Field::new(grid, v).expect("row count checked")).collect();
    let st = S::from_fields(t, fs).map_err(|e| SnapshotError::Shape(e.to_string()))?;
    Ok((st, SnapshotHeader { t, grid, param_hash: hash, fields }))
}
