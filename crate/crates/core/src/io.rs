//! CSV formats for panels, cohorts, edge lists and node statistics. The same
//! files are the ingestion contract for real data.
//!
//! Panel: `borrower_id,kind,month,debt_consumer,debt_commercial,debt_mortgage,revolving_amount,dpd_bucket,has_active_loan`
//! Cohort: `borrower_id,kind,origination_month`
//! Edges: `src,dst,edge_type,valid_from,valid_to` (empty validity = unbounded)

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{Edge, NodeStatsTable, SocialGraph};
use crate::panel::{BorrowerPanel, BorrowerRecord, MonthlyFinancialState, NodeId, NodeKind};
use crate::synth::CohortMember;

/// Writes through a temporary sibling file and renames it into place, so
/// readers never observe a half-written file.
pub fn atomic_write<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    fill(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

/// Iterates data records with their 1-based file line numbers.
fn records(path: &Path, expected_header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != expected_header {
        return Err(parse_err(
            path,
            1,
            format!("expected header {}", expected_header.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_err(path: &Path, line: u64, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn field<T: FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<T>()
        .map_err(|e| parse_err(path, line, format!("bad {name} {raw:?}: {e}")))
}

fn optional_month(path: &Path, line: u64, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<Option<u32>> {
    match rec.get(idx).unwrap_or("") {
        "" => Ok(None),
        _ => field(path, line, rec, idx, name).map(Some),
    }
}

const PANEL_HEADER: [&str; 9] = [
    "borrower_id",
    "kind",
    "month",
    "debt_consumer",
    "debt_commercial",
    "debt_mortgage",
    "revolving_amount",
    "dpd_bucket",
    "has_active_loan",
];

pub fn write_panel(path: &Path, panel: &BorrowerPanel) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "{}", PANEL_HEADER.join(","))?;
        for r in panel.records() {
            for s in &r.states {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    r.id,
                    r.kind,
                    s.month,
                    s.debt_consumer,
                    s.debt_commercial,
                    s.debt_mortgage,
                    s.revolving_amount,
                    s.dpd_bucket,
                    s.has_active_loan
                )?;
            }
        }
        Ok(())
    })
}

pub fn read_panel(path: &Path) -> Result<BorrowerPanel> {
    let rows = records(path, &PANEL_HEADER)?;
    let mut parsed: Vec<(NodeId, NodeKind, MonthlyFinancialState, u64)> = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let line = *line;
        let id: NodeId = field(path, line, rec, 0, "borrower_id")?;
        let kind: NodeKind = field(path, line, rec, 1, "kind")?;
        let month: u32 = field(path, line, rec, 2, "month")?;
        if month == 0 {
            return Err(parse_err(path, line, "month must be >= 1"));
        }
        let amount = |idx: usize, name: &str| -> Result<f64> {
            let v: f64 = field(path, line, rec, idx, name)?;
            if !v.is_finite() || v < 0.0 {
                return Err(parse_err(path, line, format!("{name} must be a non-negative number")));
            }
            Ok(v)
        };
        let state = MonthlyFinancialState {
            month,
            debt_consumer: amount(3, "debt_consumer")?,
            debt_commercial: amount(4, "debt_commercial")?,
            debt_mortgage: amount(5, "debt_mortgage")?,
            revolving_amount: amount(6, "revolving_amount")?,
            dpd_bucket: field(path, line, rec, 7, "dpd_bucket")?,
            has_active_loan: field(path, line, rec, 8, "has_active_loan")?,
        };
        parsed.push((id, kind, state, line));
    }
    parsed.sort_by_key(|(id, _, s, _)| (*id, s.month));
    let mut horizon = 0;
    let mut out: Vec<BorrowerRecord> = Vec::new();
    for (id, kind, state, line) in parsed {
        horizon = horizon.max(state.month);
        match out.last_mut() {
            Some(rec) if rec.id == id => {
                if rec.kind != kind {
                    return Err(parse_err(path, line, format!("borrower {id} changes kind")));
                }
                let prev = rec.states.last().unwrap().month;
                if state.month != prev + 1 {
                    return Err(parse_err(
                        path,
                        line,
                        format!("borrower {id}: month {} does not follow month {prev}", state.month),
                    ));
                }
                rec.states.push(state);
            }
            _ => out.push(BorrowerRecord {
                id,
                kind,
                states: vec![state],
            }),
        }
    }
    Ok(BorrowerPanel::new(horizon, out))
}

const COHORT_HEADER: [&str; 3] = ["borrower_id", "kind", "origination_month"];

pub fn write_cohort(path: &Path, cohort: &[CohortMember]) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "{}", COHORT_HEADER.join(","))?;
        for m in cohort {
            writeln!(w, "{},{},{}", m.id, m.kind, m.origination_month)?;
        }
        Ok(())
    })
}

pub fn read_cohort(path: &Path) -> Result<Vec<CohortMember>> {
    let mut out = Vec::new();
    for (line, rec) in records(path, &COHORT_HEADER)? {
        out.push(CohortMember {
            id: field(path, line, &rec, 0, "borrower_id")?,
            kind: field(path, line, &rec, 1, "kind")?,
            origination_month: field(path, line, &rec, 2, "origination_month")?,
        });
    }
    out.sort_by_key(|m| m.id);
    Ok(out)
}

const EDGE_HEADER: [&str; 5] = ["src", "dst", "edge_type", "valid_from", "valid_to"];

pub fn write_edges(path: &Path, graph: &SocialGraph) -> Result<()> {
    let month = |m: Option<u32>| m.map(|v| v.to_string()).unwrap_or_default();
    atomic_write(path, |w| {
        writeln!(w, "{}", EDGE_HEADER.join(","))?;
        for e in &graph.edges {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.src,
                e.dst,
                e.edge_type,
                month(e.valid_from),
                month(e.valid_to)
            )?;
        }
        Ok(())
    })
}

/// Reads an edge list. The node set is every panel node whose kind occurs
/// among the edge endpoints; endpoints missing from the panel are an error.
pub fn read_edges(path: &Path, panel: &BorrowerPanel) -> Result<SocialGraph> {
    let mut edges = Vec::new();
    let mut kinds = BTreeSet::new();
    for (line, rec) in records(path, &EDGE_HEADER)? {
        let e = Edge {
            src: field(path, line, &rec, 0, "src")?,
            dst: field(path, line, &rec, 1, "dst")?,
            edge_type: field(path, line, &rec, 2, "edge_type")?,
            valid_from: optional_month(path, line, &rec, 3, "valid_from")?,
            valid_to: optional_month(path, line, &rec, 4, "valid_to")?,
        };
        for id in [e.src, e.dst] {
            let rec = panel
                .get(id)
                .ok_or_else(|| parse_err(path, line, format!("node {id} is not in the panel")))?;
            kinds.insert(rec.kind);
        }
        if let (Some(f), Some(t)) = (e.valid_from, e.valid_to) {
            if f > t {
                return Err(parse_err(path, line, format!("valid_from {f} > valid_to {t}")));
            }
        }
        edges.push(e);
    }
    let nodes = panel
        .records()
        .iter()
        .filter(|r| kinds.contains(&r.kind))
        .map(|r| (r.id, r.kind))
        .collect();
    SocialGraph::new(nodes, edges)
}

/// Appends node statistics of one month to a CSV keyed by `(node_id, month)`.
pub fn write_node_stats(path: &Path, tables: &[(u32, &NodeStatsTable)]) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(
            w,
            "node_id,month,degree,degree_centrality,triangle_count,pagerank,hits_authority,hits_hub,is_articulation_point"
        )?;
        for (month, table) in tables {
            for r in &table.rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    r.node_id,
                    month,
                    r.degree,
                    r.degree_centrality,
                    r.triangle_count,
                    r.pagerank,
                    r.hits_authority,
                    r.hits_hub,
                    u8::from(r.is_articulation_point)
                )?;
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_population, PopulationConfig};

    #[test]
    fn population_round_trips_through_csv() {
        let pop = generate_population(&PopulationConfig::scaled(0.02)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("panel.csv");
        write_panel(&p, &pop.panel).unwrap();
        assert_eq!(read_panel(&p).unwrap(), pop.panel);
        let e = dir.path().join("eownet.csv");
        write_edges(&e, &pop.eownet).unwrap();
        let g = read_edges(&e, &pop.panel).unwrap();
        assert_eq!(g.edges, pop.eownet.edges);
        assert_eq!(g.nodes, pop.eownet.nodes);
        let f = dir.path().join("familynet.csv");
        write_edges(&f, &pop.familynet).unwrap();
        assert_eq!(read_edges(&f, &pop.panel).unwrap(), pop.familynet);
        let c = dir.path().join("cohort.csv");
        write_cohort(&c, &pop.cohort).unwrap();
        assert_eq!(read_cohort(&c).unwrap(), pop.cohort);
    }

    #[test]
    fn malformed_bucket_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("panel.csv");
        let mut text = PANEL_HEADER.join(",") + "\n";
        for m in 1..=3 {
            text += &format!("1,PERSON,{m},10,0,0,0,CURRENT,true\n");
        }
        text += "1,PERSON,4,10,0,0,0,DPD_45,true\n";
        fs::write(&p, text).unwrap();
        let err = read_panel(&p).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
        assert!(err.contains("dpd_bucket"), "{err}");
    }

    #[test]
    fn missing_file_is_named() {
        let err = read_panel(Path::new("/nonexistent/panel.csv")).unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)));
        assert!(err.to_string().contains("/nonexistent/panel.csv"));
    }
}
