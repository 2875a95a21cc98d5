//! Node statistics: degree, degree centrality, closed triads, PageRank, HITS
//! and articulation points.
//!
//! Degree, triangles and articulation points use the undirected simple
//! projection (parallel edges collapsed, self-loops dropped). PageRank and
//! HITS use the directed graph collapsed to simple edges; symmetric relation
//! types contribute both directions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::SocialGraph;
use crate::panel::NodeId;

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-8;
pub const PAGERANK_MAX_ITER: usize = 200;
pub const HITS_TOL: f64 = 1e-8;
pub const HITS_MAX_ITER: usize = 200;

/// Nodes in ascending id order with sorted, deduplicated adjacency lists.
struct Indexed {
    ids: Vec<NodeId>,
    undirected: Vec<Vec<u32>>,
    out: Vec<Vec<u32>>,
    inc: Vec<Vec<u32>>,
}

impl Indexed {
    fn new(graph: &SocialGraph) -> Self {
        let mut ids: Vec<NodeId> = graph.nodes.iter().map(|(id, _)| *id).collect();
        ids.sort_unstable();
        let pos: HashMap<NodeId, u32> = ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
        let n = ids.len();
        let mut undirected = vec![Vec::new(); n];
        let mut out = vec![Vec::new(); n];
        for e in &graph.edges {
            let (Some(&u), Some(&v)) = (pos.get(&e.src), pos.get(&e.dst)) else {
                continue;
            };
            if u == v {
                continue;
            }
            undirected[u as usize].push(v);
            undirected[v as usize].push(u);
            out[u as usize].push(v);
            if e.edge_type.is_symmetric() {
                out[v as usize].push(u);
            }
        }
        for list in undirected.iter_mut().chain(out.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let mut inc = vec![Vec::new(); n];
        for (u, targets) in out.iter().enumerate() {
            for &v in targets {
                inc[v as usize].push(u as u32);
            }
        }
        Indexed {
            ids,
            undirected,
            out,
            inc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRankResult {
    /// Node ids in ascending order; `scores[i]` belongs to `ids[i]`.
    pub ids: Vec<NodeId>,
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitsResult {
    pub ids: Vec<NodeId>,
    pub authority: Vec<f64>,
    pub hub: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn pagerank_indexed(ix: &Indexed, damping: f64, tol: f64, max_iter: usize) -> (Vec<f64>, usize, bool) {
    let n = ix.ids.len();
    if n == 0 {
        return (Vec::new(), 0, true);
    }
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&u| ix.out[u].is_empty()).map(|u| rank[u]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        for (v, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = ix.inc[v]
                .iter()
                .map(|&u| rank[u as usize] / ix.out[u as usize].len() as f64)
                .sum();
            *slot = base + damping * inflow;
        }
        let diff: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if diff < tol {
            converged = true;
            break;
        }
    }
    let total: f64 = rank.iter().sum();
    rank.iter_mut().for_each(|r| *r /= total);
    (rank, iterations, converged)
}

/// PageRank by power iteration with uniform redistribution of dangling mass.
/// Stops when the L1 distance between successive iterates drops below `tol`;
/// otherwise returns after `max_iter` rounds with `converged == false`.
pub fn pagerank(graph: &SocialGraph, damping: f64, tol: f64, max_iter: usize) -> PageRankResult {
    assert!(damping > 0.0 && damping < 1.0, "damping must lie in (0, 1)");
    let ix = Indexed::new(graph);
    let (scores, iterations, converged) = pagerank_indexed(&ix, damping, tol, max_iter);
    PageRankResult {
        ids: ix.ids,
        scores,
        iterations,
        converged,
    }
}

fn normalize_l2(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

fn hits_indexed(ix: &Indexed, tol: f64, max_iter: usize) -> (Vec<f64>, Vec<f64>, usize, bool) {
    let n = ix.ids.len();
    let mut hub = vec![1.0; n];
    let mut auth = vec![0.0; n];
    if ix.out.iter().all(Vec::is_empty) {
        return (vec![0.0; n], vec![0.0; n], 0, true);
    }
    normalize_l2(&mut hub);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let new_auth: Vec<f64> = (0..n)
            .map(|v| ix.inc[v].iter().map(|&u| hub[u as usize]).sum())
            .collect();
        let mut new_auth = new_auth;
        normalize_l2(&mut new_auth);
        let mut new_hub: Vec<f64> = (0..n)
            .map(|u| ix.out[u].iter().map(|&v| new_auth[v as usize]).sum())
            .collect();
        normalize_l2(&mut new_hub);
        let diff: f64 = auth.iter().zip(&new_auth).map(|(a, b)| (a - b).abs()).sum::<f64>()
            + hub.iter().zip(&new_hub).map(|(a, b)| (a - b).abs()).sum::<f64>();
        auth = new_auth;
        hub = new_hub;
        if diff < tol {
            converged = true;
            break;
        }
    }
    (auth, hub, iterations, converged)
}

/// HITS authority and hub scores, each with unit Euclidean norm. A graph
/// without edges yields all-zero scores.
pub fn hits(graph: &SocialGraph, tol: f64, max_iter: usize) -> HitsResult {
    let ix = Indexed::new(graph);
    let (authority, hub, iterations, converged) = hits_indexed(&ix, tol, max_iter);
    HitsResult {
        ids: ix.ids,
        authority,
        hub,
        iterations,
        converged,
    }
}

fn triangles_indexed(adj: &[Vec<u32>]) -> Vec<u64> {
    let mut tri = vec![0u64; adj.len()];
    for u in 0..adj.len() {
        for &v in adj[u].iter().filter(|&&v| v as usize > u) {
            // common neighbours w > v, by sorted merge
            let (a, b) = (&adj[u], &adj[v as usize]);
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        let w = a[i];
                        if w > v {
                            tri[u] += 1;
                            tri[v as usize] += 1;
                            tri[w as usize] += 1;
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
    tri
}

/// Triangles containing each node, in ascending node-id order.
pub fn triangle_counts(graph: &SocialGraph) -> Vec<(NodeId, u64)> {
    let ix = Indexed::new(graph);
    let tri = triangles_indexed(&ix.undirected);
    ix.ids.into_iter().zip(tri).collect()
}

/// Iterative Tarjan low-link search over the undirected projection.
fn articulation_indexed(adj: &[Vec<u32>]) -> Vec<bool> {
    let n = adj.len();
    const UNSEEN: u32 = u32::MAX;
    let mut disc = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut parent = vec![UNSEEN; n];
    let mut is_ap = vec![false; n];
    let mut timer = 0u32;
    // (node, next neighbour position)
    let mut stack: Vec<(u32, usize)> = Vec::new();
    for root in 0..n as u32 {
        if disc[root as usize] != UNSEEN {
            continue;
        }
        let mut root_children = 0;
        disc[root as usize] = timer;
        low[root as usize] = timer;
        timer += 1;
        stack.push((root, 0));
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            let ui = u as usize;
            if *next < adj[ui].len() {
                let v = adj[ui][*next];
                *next += 1;
                let vi = v as usize;
                if disc[vi] == UNSEEN {
                    parent[vi] = u;
                    disc[vi] = timer;
                    low[vi] = timer;
                    timer += 1;
                    if u == root {
                        root_children += 1;
                    }
                    stack.push((v, 0));
                } else if v != parent[ui] {
                    low[ui] = low[ui].min(disc[vi]);
                }
            } else {
                stack.pop();
                let p = parent[ui];
                if p != UNSEEN {
                    let pi = p as usize;
                    low[pi] = low[pi].min(low[ui]);
                    if p != root && low[ui] >= disc[pi] {
                        is_ap[pi] = true;
                    }
                }
            }
        }
        if root_children > 1 {
            is_ap[root as usize] = true;
        }
    }
    is_ap
}

/// Nodes whose removal increases the number of connected components, in
/// ascending id order.
pub fn articulation_points(graph: &SocialGraph) -> Vec<NodeId> {
    let ix = Indexed::new(graph);
    articulation_indexed(&ix.undirected)
        .into_iter()
        .zip(&ix.ids)
        .filter_map(|(ap, &id)| ap.then_some(id))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStatsRow {
    pub node_id: NodeId,
    pub degree: u64,
    pub degree_centrality: f64,
    pub triangle_count: u64,
    pub pagerank: f64,
    pub hits_authority: f64,
    pub hits_hub: f64,
    pub is_articulation_point: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStatsTable {
    /// Rows in ascending node-id order.
    pub rows: Vec<NodeStatsRow>,
    pub pagerank_converged: bool,
    pub hits_converged: bool,
}

impl NodeStatsTable {
    pub fn get(&self, id: NodeId) -> Option<&NodeStatsRow> {
        self.rows
            .binary_search_by_key(&id, |r| r.node_id)
            .ok()
            .map(|i| &self.rows[i])
    }
}

/// All node statistics with the default PageRank/HITS settings.
pub fn node_stats(graph: &SocialGraph) -> NodeStatsTable {
    let ix = Indexed::new(graph);
    let n = ix.ids.len();
    let (pr, _, pr_ok) = pagerank_indexed(&ix, PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER);
    let (auth, hub, _, hits_ok) = hits_indexed(&ix, HITS_TOL, HITS_MAX_ITER);
    let tri = triangles_indexed(&ix.undirected);
    let ap = articulation_indexed(&ix.undirected);
    let rows = (0..n)
        .map(|i| {
            let degree = ix.undirected[i].len() as u64;
            NodeStatsRow {
                node_id: ix.ids[i],
                degree,
                degree_centrality: if n >= 2 { degree as f64 / (n - 1) as f64 } else { 0.0 },
                triangle_count: tri[i],
                pagerank: pr[i],
                hits_authority: auth[i],
                hits_hub: hub[i],
                is_articulation_point: ap[i],
            }
        })
        .collect();
    NodeStatsTable {
        rows,
        pagerank_converged: pr_ok,
        hits_converged: hits_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, EdgeType};
    use crate::panel::NodeKind;

    fn graph(n: u64, edges: &[(u64, u64)], ty: EdgeType) -> SocialGraph {
        SocialGraph::new(
            (0..n).map(|i| (i, NodeKind::Person)).collect(),
            edges
                .iter()
                .map(|&(src, dst)| Edge {
                    src,
                    dst,
                    edge_type: ty,
                    valid_from: None,
                    valid_to: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn triangle_k3() {
        let g = graph(3, &[(0, 1), (1, 2), (2, 0)], EdgeType::Transaction);
        let t = node_stats(&g);
        for r in &t.rows {
            assert_eq!(r.degree, 2);
            assert_eq!(r.degree_centrality, 1.0);
            assert_eq!(r.triangle_count, 1);
            assert!((r.pagerank - 1.0 / 3.0).abs() < 1e-9);
            assert!(!r.is_articulation_point);
        }
    }

    #[test]
    fn path_articulation_and_cycle() {
        let g = graph(3, &[(0, 1), (1, 2)], EdgeType::Marriage);
        assert_eq!(articulation_points(&g), vec![1]);
        let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], EdgeType::Marriage);
        assert!(articulation_points(&c4).is_empty());
    }

    #[test]
    fn pagerank_small_cases() {
        let g = graph(2, &[(0, 1), (1, 0)], EdgeType::Transaction);
        let pr = pagerank(&g, 0.85, 1e-10, 200);
        assert!(pr.converged);
        assert!((pr.scores[0] - 0.5).abs() < 1e-12 && (pr.scores[1] - 0.5).abs() < 1e-12);
        let iso = graph(4, &[], EdgeType::Transaction);
        assert!(pagerank(&iso, 0.85, 1e-10, 200).scores.iter().all(|&s| (s - 0.25).abs() < 1e-15));
        assert!(pagerank(&graph(0, &[], EdgeType::Transaction), 0.85, 1e-8, 10).scores.is_empty());
    }

    #[test]
    fn hits_single_edge_and_empty() {
        let g = graph(3, &[(0, 1)], EdgeType::Transaction);
        let h = hits(&g, 1e-10, 200);
        assert_eq!(h.hub, vec![1.0, 0.0, 0.0]);
        assert_eq!(h.authority, vec![0.0, 1.0, 0.0]);
        let e = hits(&graph(3, &[], EdgeType::Transaction), 1e-10, 200);
        assert!(e.hub.iter().chain(&e.authority).all(|&x| x == 0.0));
    }

    #[test]
    fn hits_symmetric_complete_digraph_is_uniform() {
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    edges.push((i, j));
                }
            }
        }
        let h = hits(&graph(4, &edges, EdgeType::Transaction), 1e-12, 200);
        for i in 1..4 {
            assert!((h.hub[i] - h.hub[0]).abs() < 1e-12);
            assert!((h.authority[i] - h.authority[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn stats_ignore_self_loops_and_duplicates() {
        let g = graph(3, &[(0, 1), (0, 1), (1, 0), (2, 2)], EdgeType::Transaction);
        let t = node_stats(&g);
        assert_eq!(t.rows[0].degree, 1);
        assert_eq!(t.rows[2].degree, 0);
        assert_eq!(t.rows[2].triangle_count, 0);
    }

    #[test]
    fn degree_centrality_single_node() {
        let t = node_stats(&graph(1, &[], EdgeType::Transaction));
        assert_eq!(t.rows[0].degree_centrality, 0.0);
        assert_eq!(t.rows[0].pagerank, 1.0);
    }
}
