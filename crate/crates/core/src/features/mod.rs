//! Feature matrices over a borrower cohort at an observation month.
//!
//! Five groups: current financial state (`FIN`), its 3- and 6-month history
//! (`FIN_HIST`), node statistics in each network (`NODE_STATS`), egonet
//! aggregates of the neighbours' financial state (`SOC_INT`) and their
//! history (`SOC_INT_HIST`). Missing values are stored as `NaN` and written
//! as empty CSV fields.

mod builder;
mod csv_io;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::NodeId;

pub use builder::{
    fin_features, fin_hist_features, socint_features, socint_hist_features, FeatureBuilder, MonthGraphs,
    FIN_NAMES, HISTORY_WINDOWS,
};
pub use csv_io::{read_matrix, write_matrix};

/// Marker for a missing feature value.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureGroup {
    Fin,
    FinHist,
    NodeStats,
    SocInt,
    SocIntHist,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::Fin,
        FeatureGroup::FinHist,
        FeatureGroup::NodeStats,
        FeatureGroup::SocInt,
        FeatureGroup::SocIntHist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Fin => "FIN",
            FeatureGroup::FinHist => "FIN_HIST",
            FeatureGroup::NodeStats => "NODE_STATS",
            FeatureGroup::SocInt => "SOC_INT",
            FeatureGroup::SocIntHist => "SOC_INT_HIST",
        }
    }

    /// Borrower-side groups, as opposed to those derived from network data.
    pub fn is_borrower(self) -> bool {
        matches!(self, FeatureGroup::Fin | FeatureGroup::FinHist)
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureGroup::ALL
            .iter()
            .copied()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown feature group {s:?}"))
    }
}

/// Feature sets compared in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    E1,
    E2,
    E3,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::E1, Experiment::E2, Experiment::E3];

    pub fn groups(self) -> &'static [FeatureGroup] {
        match self {
            Experiment::E1 => &FeatureGroup::ALL[..1],
            Experiment::E2 => &FeatureGroup::ALL[..2],
            Experiment::E3 => &FeatureGroup::ALL,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::E1 => "E1",
            Experiment::E2 => "E2",
            Experiment::E3 => "E3",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .iter()
            .copied()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub group: FeatureGroup,
    pub values: Vec<f64>,
}

/// Column-major feature matrix.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<NodeId>,
    pub columns: Vec<Column>,
}

impl PartialEq for FeatureMatrix {
    /// Bitwise comparison so that missing values compare equal.
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.columns.len() == other.columns.len()
            && self.columns.iter().zip(&other.columns).all(|(a, b)| {
                a.name == b.name
                    && a.group == b.group
                    && a.values.len() == b.values.len()
                    && a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

impl FeatureMatrix {
    pub fn new(rows: Vec<NodeId>, columns: Vec<Column>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Assembly(format!("duplicate column {:?}", c.name)));
            }
            if c.values.len() != rows.len() {
                return Err(Error::Assembly(format!(
                    "column {:?} has {} values for {} rows",
                    c.name,
                    c.values.len(),
                    rows.len()
                )));
            }
        }
        Ok(FeatureMatrix { rows, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.values[i]).collect()
    }

    /// Columns of the requested groups, concatenated and ordered by
    /// `(group, name)`.
    pub fn assemble(&self, groups: &[FeatureGroup]) -> Result<FeatureMatrix> {
        if groups.is_empty() {
            return Err(Error::Assembly("no feature groups requested".into()));
        }
        let mut cols: Vec<Column> = self
            .columns
            .iter()
            .filter(|c| groups.contains(&c.group))
            .cloned()
            .collect();
        cols.sort_by(|a, b| (a.group, &a.name).cmp(&(b.group, &b.name)));
        FeatureMatrix::new(self.rows.clone(), cols)
    }

    /// Concatenates column blocks over identical rows.
    pub fn concat(parts: Vec<FeatureMatrix>) -> Result<FeatureMatrix> {
        let mut it = parts.into_iter();
        let Some(first) = it.next() else {
            return Err(Error::Assembly("nothing to concatenate".into()));
        };
        let rows = first.rows;
        let mut columns = first.columns;
        for p in it {
            if p.rows != rows {
                return Err(Error::Assembly("row sets differ".into()));
            }
            columns.extend(p.columns);
        }
        FeatureMatrix::new(rows, columns)
    }

    /// Keeps the named columns in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let cols = names
            .iter()
            .map(|n| {
                self.column(n)
                    .cloned()
                    .ok_or_else(|| Error::Schema(format!("no column {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(self.rows.clone(), cols)
    }

    /// Keeps the given rows (by position) in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    group: c.group,
                    values: idx.iter().map(|&i| c.values[i]).collect(),
                })
                .collect(),
        }
    }
}
