//! Monthly financial states of every node in the population.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub type NodeId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NodeKind {
    Person,
    Company,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Person => "PERSON",
            NodeKind::Company => "COMPANY",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PERSON" => Ok(NodeKind::Person),
            "COMPANY" => Ok(NodeKind::Company),
            other => Err(format!("unknown node kind {other:?}")),
        }
    }
}

/// Delinquency bucket. The discriminant is the ordinal code used as a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DpdBucket {
    Current = 0,
    Dpd1To29 = 1,
    Dpd30To59 = 2,
    Dpd60To89 = 3,
    Dpd90Plus = 4,
}

impl DpdBucket {
    pub const ALL: [DpdBucket; 5] = [
        DpdBucket::Current,
        DpdBucket::Dpd1To29,
        DpdBucket::Dpd30To59,
        DpdBucket::Dpd60To89,
        DpdBucket::Dpd90Plus,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn token(self) -> &'static str {
        match self {
            DpdBucket::Current => "CURRENT",
            DpdBucket::Dpd1To29 => "DPD_1_29",
            DpdBucket::Dpd30To59 => "DPD_30_59",
            DpdBucket::Dpd60To89 => "DPD_60_89",
            DpdBucket::Dpd90Plus => "DPD_90_PLUS",
        }
    }

    pub fn is_default(self) -> bool {
        self == DpdBucket::Dpd90Plus
    }

    /// One bucket further into delinquency; 90+ stays 90+.
    pub fn forward(self) -> Self {
        Self::from_code((self.code() + 1).min(4)).unwrap()
    }
}

impl fmt::Display for DpdBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for DpdBucket {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DpdBucket::ALL
            .iter()
            .copied()
            .find(|b| b.token() == s)
            .ok_or_else(|| format!("unknown dpd_bucket {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyFinancialState {
    pub month: u32,
    pub debt_consumer: f64,
    pub debt_commercial: f64,
    pub debt_mortgage: f64,
    pub revolving_amount: f64,
    pub dpd_bucket: DpdBucket,
    pub has_active_loan: bool,
}

impl MonthlyFinancialState {
    pub fn total_debt(&self) -> f64 {
        self.debt_consumer + self.debt_commercial + self.debt_mortgage
    }

    /// Any positive debt or an active loan.
    pub fn has_credit_relationship(&self) -> bool {
        self.has_active_loan || self.total_debt() > 0.0
    }
}

/// All monthly states of one node, contiguous from `first_month`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorrowerRecord {
    pub id: NodeId,
    pub kind: NodeKind,
    pub states: Vec<MonthlyFinancialState>,
}

impl BorrowerRecord {
    pub fn first_month(&self) -> Option<u32> {
        self.states.first().map(|s| s.month)
    }

    pub fn state(&self, month: u32) -> Option<&MonthlyFinancialState> {
        let first = self.first_month()?;
        if month < first {
            return None;
        }
        self.states.get((month - first) as usize)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BorrowerPanel {
    pub horizon_months: u32,
    records: Vec<BorrowerRecord>,
    index: HashMap<NodeId, usize>,
}

impl PartialEq for BorrowerPanel {
    fn eq(&self, other: &Self) -> bool {
        self.horizon_months == other.horizon_months && self.records == other.records
    }
}

impl BorrowerPanel {
    /// Builds a panel; records are sorted by id. States of each record must
    /// already be contiguous and ascending by month.
    pub fn new(horizon_months: u32, mut records: Vec<BorrowerRecord>) -> Self {
        records.sort_by_key(|r| r.id);
        let index = records.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        BorrowerPanel {
            horizon_months,
            records,
            index,
        }
    }

    pub fn records(&self) -> &[BorrowerRecord] {
        &self.records
    }

    pub fn get(&self, id: NodeId) -> Option<&BorrowerRecord> {
        self.index.get(&id).map(|&i| &self.records[i])
    }

    pub fn state(&self, id: NodeId, month: u32) -> Option<&MonthlyFinancialState> {
        self.get(id)?.state(month)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
