//! Typed social graphs with monthly edge validity, and node statistics.

mod stats;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{NodeId, NodeKind};

pub use stats::{
    articulation_points, hits, node_stats, pagerank, triangle_counts, HitsResult, NodeStatsRow,
    NodeStatsTable, PageRankResult, HITS_MAX_ITER, HITS_TOL, PAGERANK_DAMPING, PAGERANK_MAX_ITER,
    PAGERANK_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeType {
    Ownership,
    Employment,
    Transaction,
    Marriage,
    ParentChild,
}

impl EdgeType {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Ownership => "OWNERSHIP",
            EdgeType::Employment => "EMPLOYMENT",
            EdgeType::Transaction => "TRANSACTION",
            EdgeType::Marriage => "MARRIAGE",
            EdgeType::ParentChild => "PARENT_CHILD",
        }
    }

    /// Undirected relations contribute both directions to PageRank and HITS.
    pub fn is_symmetric(self) -> bool {
        matches!(self, EdgeType::Marriage)
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "OWNERSHIP" => EdgeType::Ownership,
            "EMPLOYMENT" => EdgeType::Employment,
            "TRANSACTION" => EdgeType::Transaction,
            "MARRIAGE" => EdgeType::Marriage,
            "PARENT_CHILD" => EdgeType::ParentChild,
            other => return Err(format!("unknown edge_type {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub edge_type: EdgeType,
    /// First month the edge exists; `None` means unbounded.
    pub valid_from: Option<u32>,
    /// Last month the edge exists (inclusive); `None` means unbounded.
    pub valid_to: Option<u32>,
}

impl Edge {
    pub fn is_static(&self) -> bool {
        self.valid_from.is_none() && self.valid_to.is_none()
    }

    pub fn valid_at(&self, month: u32) -> bool {
        self.valid_from.is_none_or(|f| f <= month) && self.valid_to.is_none_or(|t| month <= t)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SocialGraph {
    pub nodes: Vec<(NodeId, NodeKind)>,
    pub edges: Vec<Edge>,
}

impl SocialGraph {
    pub fn new(nodes: Vec<(NodeId, NodeKind)>, edges: Vec<Edge>) -> Result<Self> {
        let g = SocialGraph { nodes, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.nodes.len());
        for (id, _) in &self.nodes {
            if !seen.insert(*id) {
                return Err(Error::InvalidArgument(format!("duplicate node id {id}")));
            }
        }
        for e in &self.edges {
            if !seen.contains(&e.src) || !seen.contains(&e.dst) {
                return Err(Error::InvalidArgument(format!(
                    "edge {}->{} references an unknown node",
                    e.src, e.dst
                )));
            }
            if let (Some(f), Some(t)) = (e.valid_from, e.valid_to) {
                if f > t {
                    return Err(Error::InvalidArgument(format!(
                        "edge {}->{} valid_from {f} > valid_to {t}",
                        e.src, e.dst
                    )));
                }
            }
        }
        Ok(())
    }

    /// The graph as it stands in `month`: edges whose validity interval
    /// contains the month. Static edges are always kept; the node set is
    /// unchanged.
    pub fn slice(&self, month: u32) -> SocialGraph {
        SocialGraph {
            nodes: self.nodes.clone(),
            edges: self.edges.iter().filter(|e| e.valid_at(month)).copied().collect(),
        }
    }

    pub fn is_static(&self) -> bool {
        self.edges.iter().all(Edge::is_static)
    }
}
