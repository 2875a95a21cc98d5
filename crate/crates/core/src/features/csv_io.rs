//! Feature matrix CSV: a `#group` metadata line naming each column's group,
//! then a header and one row per borrower. Missing values are empty fields.

use std::io::Write;
use std::path::Path;

use super::{Column, FeatureGroup, FeatureMatrix};
use crate::error::{Error, Result};
use crate::io::atomic_write;

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn write_matrix(path: &Path, matrix: &FeatureMatrix, labels: Option<&[bool]>) -> Result<()> {
    atomic_write(path, |w| {
        let extra = if labels.is_some() { ",label" } else { "" };
        write!(w, "#group,{}", if labels.is_some() { "," } else { "" })?;
        let groups: Vec<&str> = matrix.columns.iter().map(|c| c.group.as_str()).collect();
        writeln!(w, "{}", groups.join(","))?;
        let names: Vec<&str> = matrix.names();
        writeln!(w, "borrower_id{extra},{}", names.join(","))?;
        for (i, id) in matrix.rows.iter().enumerate() {
            write!(w, "{id}")?;
            if let Some(l) = labels {
                write!(w, ",{}", u8::from(l[i]))?;
            }
            for c in &matrix.columns {
                write!(w, ",{}", fmt_value(c.values[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

/// Reads a matrix written by [`write_matrix`]; returns labels when present.
pub fn read_matrix(path: &Path) -> Result<(FeatureMatrix, Option<Vec<bool>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let perr = |line: u64, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines();
    let meta = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
    let header = lines.next().ok_or_else(|| perr(2, "missing header".into()))?;
    let meta: Vec<&str> = meta.split(',').collect();
    let header: Vec<&str> = header.split(',').collect();
    if meta.first() != Some(&"#group") || meta.len() != header.len() {
        return Err(perr(1, "malformed #group line".into()));
    }
    let has_label = header.get(1) == Some(&"label");
    let first_feature = if has_label { 2 } else { 1 };
    let mut columns: Vec<Column> = header[first_feature..]
        .iter()
        .zip(&meta[first_feature..])
        .map(|(name, g)| {
            Ok(Column {
                name: name.to_string(),
                group: g.parse::<FeatureGroup>().map_err(|e| perr(1, e))?,
                values: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, line) in lines.enumerate() {
        let line_no = k as u64 + 3;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(perr(line_no, format!("expected {} fields, got {}", header.len(), fields.len())));
        }
        rows.push(fields[0].parse().map_err(|e| perr(line_no, format!("bad borrower_id: {e}")))?);
        if has_label {
            labels.push(match fields[1] {
                "1" => true,
                "0" => false,
                other => return Err(perr(line_no, format!("bad label {other:?}"))),
            });
        }
        for (c, raw) in columns.iter_mut().zip(&fields[first_feature..]) {
            let v = if raw.is_empty() {
                f64::NAN
            } else {
                raw.parse().map_err(|e| perr(line_no, format!("bad value {raw:?} in {}: {e}", c.name)))?
            };
            c.values.push(v);
        }
    }
    Ok((FeatureMatrix::new(rows, columns)?, has_label.then_some(labels)))
}
