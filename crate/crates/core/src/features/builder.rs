use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::{Column, FeatureGroup, FeatureMatrix, MISSING};
use crate::error::{Error, Result};
use crate::graph::{node_stats, NodeStatsRow, NodeStatsTable, SocialGraph};
use crate::panel::{BorrowerPanel, DpdBucket, MonthlyFinancialState, NodeId};

/// History windows in months; each window includes the observation month.
pub const HISTORY_WINDOWS: [u32; 2] = [3, 6];

pub const FIN_NAMES: [&str; 16] = [
    "debt_consumer",
    "debt_commercial",
    "debt_mortgage",
    "revolving",
    "total_debt",
    "consumer_ratio",
    "commercial_ratio",
    "mortgage_ratio",
    "dpd_code",
    "dpd_current",
    "dpd_1_29",
    "dpd_30_59",
    "dpd_60_89",
    "dpd_90_plus",
    "overdue_debt",
    "active_loan",
];

const NODE_STAT_NAMES: [&str; 7] = [
    "degree",
    "degree_centrality",
    "triangles",
    "pagerank",
    "hits_authority",
    "hits_hub",
    "articulation",
];

const NETWORKS: [&str; 2] = ["eow", "fam"];

fn fin_vector(s: &MonthlyFinancialState) -> [f64; 16] {
    let total = s.total_debt();
    let ratio = |x: f64| if total > 0.0 { x / total } else { MISSING };
    let b = s.dpd_bucket;
    let flag = |x: bool| if x { 1.0 } else { 0.0 };
    [
        s.debt_consumer,
        s.debt_commercial,
        s.debt_mortgage,
        s.revolving_amount,
        total,
        ratio(s.debt_consumer),
        ratio(s.debt_commercial),
        ratio(s.debt_mortgage),
        b.code() as f64,
        flag(b == DpdBucket::Current),
        flag(b == DpdBucket::Dpd1To29),
        flag(b == DpdBucket::Dpd30To59),
        flag(b == DpdBucket::Dpd60To89),
        flag(b == DpdBucket::Dpd90Plus),
        if b == DpdBucket::Current { 0.0 } else { total },
        flag(s.has_active_loan),
    ]
}

/// Mean and population SD of the non-missing values; both missing when
/// there are none.
fn mean_sd<I: IntoIterator<Item = f64>>(values: I) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut vals = Vec::new();
    for v in values.into_iter().filter(|v| !v.is_nan()) {
        n += 1;
        sum += v;
        vals.push(v);
    }
    if n == 0 {
        return (MISSING, MISSING);
    }
    let mean = sum / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Current financial state of `borrower` at `month`.
pub fn fin_features(panel: &BorrowerPanel, borrower: NodeId, month: u32) -> Result<[f64; 16]> {
    panel
        .state(borrower, month)
        .map(fin_vector)
        .ok_or(Error::NotObserved { borrower, month })
}

/// Window statistics of a series ordered oldest to newest: for each window
/// `w` and each component, mean and SD over the last `w` entries.
fn window_stats(series: &[Vec<f64>], width: usize, windows: &[u32]) -> Vec<f64> {
    let mut out = Vec::with_capacity(windows.len() * width * 2);
    for &w in windows {
        let tail = &series[series.len().saturating_sub(w as usize)..];
        for k in 0..width {
            let (m, sd) = mean_sd(tail.iter().map(|v| v[k]));
            out.push(m);
            out.push(sd);
        }
    }
    out
}

/// Mean and SD of each financial feature over the last `w` observed months
/// (observation month included), for every window, followed by the number
/// of months observed so far.
pub fn fin_hist_features(panel: &BorrowerPanel, borrower: NodeId, month: u32, windows: &[u32]) -> Result<Vec<f64>> {
    let rec = panel.get(borrower).ok_or(Error::NotObserved { borrower, month })?;
    let first = rec.first_month().ok_or(Error::NotObserved { borrower, month })?;
    if month < first || rec.state(month).is_none() {
        return Err(Error::NotObserved { borrower, month });
    }
    let longest = windows.iter().copied().max().unwrap_or(1);
    let start = first.max(month.saturating_sub(longest - 1)).max(1);
    let series: Vec<Vec<f64>> = (start..=month)
        .map(|m| fin_vector(rec.state(m).expect("contiguous states")).to_vec())
        .collect();
    let mut out = window_stats(&series, FIN_NAMES.len(), windows);
    out.push((month - first + 1) as f64);
    Ok(out)
}

/// Network view of one calendar month: egonet adjacency over both networks
/// and node statistics of each network's slice.
pub struct MonthGraphs {
    pub month: u32,
    neighbors: HashMap<NodeId, Vec<NodeId>>,
    eow_stats: Arc<NodeStatsTable>,
    fam_stats: Arc<NodeStatsTable>,
}

impl MonthGraphs {
    pub fn new(eownet: &SocialGraph, familynet: &SocialGraph, month: u32) -> Self {
        let eow = eownet.slice(month);
        let fam = familynet.slice(month);
        Self::from_slices(month, &eow, &fam, Arc::new(node_stats(&eow)), Arc::new(node_stats(&fam)))
    }

    fn from_slices(
        month: u32,
        eow: &SocialGraph,
        fam: &SocialGraph,
        eow_stats: Arc<NodeStatsTable>,
        fam_stats: Arc<NodeStatsTable>,
    ) -> Self {
        let mut neighbors: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for e in eow.edges.iter().chain(&fam.edges) {
            if e.src == e.dst {
                continue;
            }
            neighbors.entry(e.src).or_default().push(e.dst);
            neighbors.entry(e.dst).or_default().push(e.src);
        }
        for list in neighbors.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        MonthGraphs {
            month,
            neighbors,
            eow_stats,
            fam_stats,
        }
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        self.neighbors.get(&id).map_or(&[], Vec::as_slice)
    }

    fn stats(&self) -> [&NodeStatsTable; 2] {
        [&self.eow_stats, &self.fam_stats]
    }
}

fn stats_vector(row: Option<&NodeStatsRow>) -> [f64; 7] {
    match row {
        None => [MISSING; 7],
        Some(r) => [
            r.degree as f64,
            r.degree_centrality,
            r.triangle_count as f64,
            r.pagerank,
            r.hits_authority,
            r.hits_hub,
            if r.is_articulation_point { 1.0 } else { 0.0 },
        ],
    }
}

fn socint_vector(graphs: &MonthGraphs, panel: &BorrowerPanel, borrower: NodeId) -> Vec<f64> {
    let neighbor_fin: Vec<[f64; 16]> = graphs
        .neighbors(borrower)
        .iter()
        .filter(|&&n| n != borrower)
        .filter_map(|&n| panel.state(n, graphs.month).map(fin_vector))
        .collect();
    let mut out = Vec::with_capacity(32);
    for k in 0..FIN_NAMES.len() {
        let (m, sd) = mean_sd(neighbor_fin.iter().map(|v| v[k]));
        out.push(m);
        out.push(sd);
    }
    out
}

/// Node statistics of the borrower in each network (14 values), and mean/SD
/// of every financial feature over its distance-1 neighbours (32 values).
/// Neighbours come from both networks and both edge directions; the
/// borrower itself is excluded. No observed neighbour means all missing.
pub fn socint_features(graphs: &MonthGraphs, panel: &BorrowerPanel, borrower: NodeId) -> (Vec<f64>, Vec<f64>) {
    let ns = graphs
        .stats()
        .iter()
        .flat_map(|t| stats_vector(t.get(borrower)))
        .collect();
    (ns, socint_vector(graphs, panel, borrower))
}

/// Window statistics over monthly social-interaction vectors ordered oldest
/// to newest and ending at the observation month. Missing months are left
/// out of each statistic.
pub fn socint_hist_features(monthly: &[Vec<f64>], windows: &[u32]) -> Vec<f64> {
    let width = monthly.first().map_or(0, Vec::len);
    window_stats(monthly, width, windows)
}

fn column_names() -> Vec<(String, FeatureGroup)> {
    let mut names = Vec::new();
    for n in FIN_NAMES {
        names.push((format!("fin_{n}"), FeatureGroup::Fin));
    }
    for w in HISTORY_WINDOWS {
        for n in FIN_NAMES {
            names.push((format!("finhist_{n}_mean_{w}"), FeatureGroup::FinHist));
            names.push((format!("finhist_{n}_sd_{w}"), FeatureGroup::FinHist));
        }
    }
    names.push(("finhist_months_available".into(), FeatureGroup::FinHist));
    for net in NETWORKS {
        for s in NODE_STAT_NAMES {
            names.push((format!("ns_{net}_{s}"), FeatureGroup::NodeStats));
        }
    }
    let soc: Vec<String> = FIN_NAMES
        .iter()
        .flat_map(|n| [format!("{n}_mean"), format!("{n}_sd")])
        .collect();
    for s in &soc {
        names.push((format!("soc_{s}"), FeatureGroup::SocInt));
    }
    for w in HISTORY_WINDOWS {
        for s in &soc {
            names.push((format!("sochist_{s}_mean_{w}"), FeatureGroup::SocIntHist));
            names.push((format!("sochist_{s}_sd_{w}"), FeatureGroup::SocIntHist));
        }
    }
    names
}

/// Builds all five feature groups for (borrower, observation month) rows,
/// caching the per-month network views.
pub struct FeatureBuilder<'a> {
    panel: &'a BorrowerPanel,
    eownet: &'a SocialGraph,
    familynet: &'a SocialGraph,
    fam_stats: Mutex<Option<(Arc<NodeStatsTable>, SocialGraph)>>,
    months: Mutex<BTreeMap<u32, Arc<MonthGraphs>>>,
}

impl<'a> FeatureBuilder<'a> {
    pub fn new(panel: &'a BorrowerPanel, eownet: &'a SocialGraph, familynet: &'a SocialGraph) -> Self {
        FeatureBuilder {
            panel,
            eownet,
            familynet,
            fam_stats: Mutex::new(None),
            months: Mutex::new(BTreeMap::new()),
        }
    }

    fn compute_month(&self, month: u32) -> MonthGraphs {
        let eow = self.eownet.slice(month);
        let eow_stats = Arc::new(node_stats(&eow));
        if self.familynet.is_static() {
            let mut guard = self.fam_stats.lock().unwrap();
            let (fs, fam) = guard
                .get_or_insert_with(|| {
                    let fam = self.familynet.clone();
                    (Arc::new(node_stats(&fam)), fam)
                })
                .clone();
            drop(guard);
            MonthGraphs::from_slices(month, &eow, &fam, eow_stats, fs)
        } else {
            let fam = self.familynet.slice(month);
            let fs = Arc::new(node_stats(&fam));
            MonthGraphs::from_slices(month, &eow, &fam, eow_stats, fs)
        }
    }

    /// Network view for a calendar month, computed once.
    pub fn month_graphs(&self, month: u32) -> Arc<MonthGraphs> {
        if let Some(g) = self.months.lock().unwrap().get(&month) {
            return Arc::clone(g);
        }
        let g = Arc::new(self.compute_month(month));
        self.months.lock().unwrap().entry(month).or_insert(g).clone()
    }

    fn history_months(month: u32) -> std::ops::RangeInclusive<u32> {
        let longest = HISTORY_WINDOWS.iter().copied().max().unwrap_or(1);
        month.saturating_sub(longest - 1).max(1)..=month
    }

    fn row(&self, borrower: NodeId, month: u32) -> Result<Vec<f64>> {
        let mut out = fin_features(self.panel, borrower, month)?.to_vec();
        out.extend(fin_hist_features(self.panel, borrower, month, &HISTORY_WINDOWS)?);
        let graphs = self.month_graphs(month);
        let (ns, soc) = socint_features(&graphs, self.panel, borrower);
        out.extend(ns);
        out.extend(&soc);
        let monthly: Vec<Vec<f64>> = Self::history_months(month)
            .map(|t| {
                if t == month {
                    soc.clone()
                } else {
                    socint_vector(&self.month_graphs(t), self.panel, borrower)
                }
            })
            .collect();
        out.extend(socint_hist_features(&monthly, &HISTORY_WINDOWS));
        Ok(out)
    }

    /// Feature matrix with one row per `(borrower, calendar month)`.
    pub fn build(&self, rows: &[(NodeId, u32)]) -> Result<FeatureMatrix> {
        let mut needed: Vec<u32> = rows.iter().flat_map(|&(_, m)| Self::history_months(m)).collect();
        needed.sort_unstable();
        needed.dedup();
        needed.par_iter().for_each(|&m| {
            self.month_graphs(m);
        });
        let values: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|&(b, m)| self.row(b, m))
            .collect::<Result<_>>()?;
        let names = column_names();
        let columns = names
            .into_iter()
            .enumerate()
            .map(|(k, (name, group))| Column {
                name,
                group,
                values: values.iter().map(|r| r[k]).collect(),
            })
            .collect();
        FeatureMatrix::new(rows.iter().map(|&(b, _)| b).collect(), columns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, EdgeType};
    use crate::panel::{BorrowerRecord, NodeKind};

    fn state(month: u32, consumer: f64, revolving: f64) -> MonthlyFinancialState {
        MonthlyFinancialState {
            month,
            debt_consumer: consumer,
            debt_commercial: 0.0,
            debt_mortgage: 0.0,
            revolving_amount: revolving,
            dpd_bucket: DpdBucket::Current,
            has_active_loan: true,
        }
    }

    fn panel(series: &[(NodeId, u32, &[f64])]) -> BorrowerPanel {
        BorrowerPanel::new(
            24,
            series
                .iter()
                .map(|&(id, first, debts)| BorrowerRecord {
                    id,
                    kind: NodeKind::Person,
                    states: debts
                        .iter()
                        .enumerate()
                        .map(|(i, &d)| state(first + i as u32, d, 0.0))
                        .collect(),
                })
                .collect(),
        )
    }

    fn idx(name: &str) -> usize {
        FIN_NAMES.iter().position(|n| *n == name).unwrap()
    }

    #[test]
    fn fin_arithmetic_and_encoding() {
        let mut s = state(1, 100.0, 20.0);
        let v = fin_vector(&s);
        assert_eq!(v[idx("total_debt")], 100.0);
        assert_eq!(v[idx("consumer_ratio")], 1.0);
        assert_eq!(v[idx("revolving")], 20.0);
        s.debt_consumer = 0.0;
        let v = fin_vector(&s);
        assert!(v[idx("consumer_ratio")].is_nan() && v[idx("mortgage_ratio")].is_nan());
        s.dpd_bucket = DpdBucket::Dpd30To59;
        assert_eq!(fin_vector(&s)[idx("dpd_code")], 2.0);
        assert_eq!(fin_vector(&s)[idx("dpd_30_59")], 1.0);
    }

    #[test]
    fn fin_absent_borrower_is_error() {
        let p = panel(&[(1, 3, &[10.0])]);
        assert!(matches!(fin_features(&p, 1, 2), Err(Error::NotObserved { .. })));
        assert!(fin_features(&p, 9, 3).is_err());
    }

    fn hist_value(v: &[f64], w_idx: usize, name: &str, sd: bool) -> f64 {
        v[w_idx * 32 + idx(name) * 2 + usize::from(sd)]
    }

    #[test]
    fn fin_hist_windows() {
        let p = panel(&[(1, 1, &[50.0; 6]), (2, 1, &[10.0, 20.0, 30.0])]);
        let v = fin_hist_features(&p, 1, 6, &HISTORY_WINDOWS).unwrap();
        assert_eq!(hist_value(&v, 0, "debt_consumer", false), 50.0);
        assert_eq!(hist_value(&v, 0, "debt_consumer", true), 0.0);

        let v = fin_hist_features(&p, 1, 1, &HISTORY_WINDOWS).unwrap();
        assert_eq!(hist_value(&v, 1, "debt_consumer", false), 50.0);
        assert_eq!(hist_value(&v, 1, "debt_consumer", true), 0.0);
        assert_eq!(*v.last().unwrap(), 1.0);

        let v = fin_hist_features(&p, 2, 3, &HISTORY_WINDOWS).unwrap();
        // population SD of {10, 20, 30}
        let oracle = ((100.0 + 0.0 + 100.0) / 3.0f64).sqrt();
        assert_eq!(hist_value(&v, 0, "debt_consumer", false), 20.0);
        assert!((hist_value(&v, 0, "debt_consumer", true) - oracle).abs() < 1e-12);
        assert!((oracle - 8.16497).abs() < 1e-5);
    }

    fn edge(src: NodeId, dst: NodeId, from: Option<u32>) -> Edge {
        Edge {
            src,
            dst,
            edge_type: EdgeType::Employment,
            valid_from: from,
            valid_to: from.map(|_| 24),
        }
    }

    #[test]
    fn egonet_mean_and_isolated_node() {
        let p = panel(&[(1, 1, &[5.0]), (2, 1, &[10.0]), (3, 1, &[20.0]), (4, 1, &[7.0])]);
        let nodes: Vec<_> = (1..=4).map(|i| (i, NodeKind::Person)).collect();
        let eow = SocialGraph::new(nodes.clone(), vec![edge(1, 2, None), edge(3, 1, None)]).unwrap();
        let fam = SocialGraph::new(nodes, vec![]).unwrap();
        let g = MonthGraphs::new(&eow, &fam, 1);
        let (ns, soc) = socint_features(&g, &p, 1);
        assert_eq!(soc[idx("total_debt") * 2], 15.0);
        assert_eq!(ns[0], 2.0);
        let (ns, soc) = socint_features(&g, &p, 4);
        assert!(soc.iter().all(|v| v.is_nan()));
        assert_eq!(ns[0], 0.0);
        // single neighbour: mean equals that neighbour's value exactly
        let (_, soc) = socint_features(&g, &p, 2);
        assert_eq!(soc[idx("total_debt") * 2], 5.0);
        assert_eq!(soc[idx("total_debt") * 2 + 1], 0.0);
    }

    #[test]
    fn socint_hist_arithmetic() {
        let monthly: Vec<Vec<f64>> = [12.0, 18.0, 24.0].iter().map(|&v| vec![v]).collect();
        let h = socint_hist_features(&monthly, &[3]);
        assert_eq!(h[0], 18.0);
        let oracle = ((36.0 + 0.0 + 36.0) / 3.0f64).sqrt();
        assert!((h[1] - oracle).abs() < 1e-12 && (h[1] - 4.89898).abs() < 1e-5);
        let with_gap = vec![vec![MISSING], vec![MISSING], vec![6.0]];
        let h = socint_hist_features(&with_gap, &[3]);
        assert_eq!((h[0], h[1]), (6.0, 0.0));
        let h = socint_hist_features(&[vec![MISSING], vec![MISSING]], &[3]);
        assert!(h[0].is_nan() && h[1].is_nan());
    }

    #[test]
    fn dynamic_neighbour_only_counts_from_its_start() {
        let p = panel(&[(1, 1, &[5.0; 6]), (2, 1, &[10.0; 6])]);
        let nodes: Vec<_> = (1..=2).map(|i| (i, NodeKind::Person)).collect();
        let eow = SocialGraph::new(nodes.clone(), vec![edge(1, 2, Some(5))]).unwrap();
        let fam = SocialGraph::new(nodes, vec![]).unwrap();
        let fb = FeatureBuilder::new(&p, &eow, &fam);
        let m = fb.build(&[(1, 6), (1, 4)]).unwrap();
        let mean3 = m.column("sochist_total_debt_mean_mean_3").unwrap();
        assert_eq!(mean3.values[0], 10.0);
        assert!(mean3.values[1].is_nan());
        let mean6 = m.column("sochist_total_debt_mean_mean_6").unwrap();
        assert_eq!(mean6.values[0], 10.0);
        assert_eq!(m.column("soc_total_debt_mean").unwrap().values[0], 10.0);
    }

    #[test]
    fn static_family_gives_zero_history_sd() {
        let p = panel(&[(1, 1, &[5.0; 6]), (2, 1, &[10.0; 6])]);
        let nodes: Vec<_> = (1..=2).map(|i| (i, NodeKind::Person)).collect();
        let eow = SocialGraph::new(nodes.clone(), vec![]).unwrap();
        let fam = SocialGraph::new(
            nodes,
            vec![Edge {
                src: 1,
                dst: 2,
                edge_type: EdgeType::Marriage,
                valid_from: None,
                valid_to: None,
            }],
        )
        .unwrap();
        let fb = FeatureBuilder::new(&p, &eow, &fam);
        let m = fb.build(&[(1, 6)]).unwrap();
        assert_eq!(m.column("sochist_total_debt_mean_sd_6").unwrap().values[0], 0.0);
        assert_eq!(m.column("sochist_total_debt_mean_mean_6").unwrap().values[0], 10.0);
    }
}
