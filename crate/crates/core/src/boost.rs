//! Gradient boosted regression trees for binary classification under
//! logistic loss.
//!
//! Splits are exact: every distinct value of every column is a candidate.
//! Missing values are routed to whichever side gives the larger gain; when a
//! node saw no missing values at training time they follow the child with
//! more rows. Trees grow level by level up to `max_depth`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{auc, make_folds, mean};
use crate::features::{FeatureGroup, FeatureMatrix};
use crate::io::atomic_write;

/// A split must improve the objective by more than this.
pub const MIN_GAIN: f64 = 1e-12;

pub const MODEL_FORMAT: &str = "credyn-gbdt";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub min_data_in_leaf: usize,
    pub max_depth: usize,
    pub l2_leaf_reg: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            n_trees: 100,
            learning_rate: 0.1,
            min_data_in_leaf: 20,
            max_depth: 6,
            l2_leaf_reg: 1.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and non-negative"));
        }
        if self.min_data_in_leaf < 1 {
            return Err(Error::config("min_data_in_leaf", "must be at least 1"));
        }
        if !(self.l2_leaf_reg >= 0.0 && self.l2_leaf_reg.is_finite()) {
            return Err(Error::config("l2_leaf_reg", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Rows with `value <= threshold` go left.
    pub threshold: f64,
    pub default_left: bool,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub split: Option<Split>,
    /// Newton weight of the node; used as the output at leaves.
    pub value: f64,
    /// Training rows that reached the node.
    pub cover: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn leaf_for(&self, row: &[f64]) -> usize {
        self.leaf_by(|f| row[f])
    }

    fn leaf_by(&self, value: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            let v = value(s.feature);
            let left = if v.is_nan() { s.default_left } else { v <= s.threshold };
            i = if left { s.left } else { s.right };
        }
        i
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_for(row)].value
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub name: String,
    pub group: FeatureGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub format: String,
    pub version: u32,
    pub schema: Vec<SchemaEntry>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub params: HyperParams,
    pub trees: Vec<Tree>,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl BoostedModel {
    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.schema.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn predict_margin(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.schema.len() {
            return Err(Error::Schema(format!(
                "row has {} values, model expects {}",
                row.len(),
                self.schema.len()
            )));
        }
        Ok(self.margin_unchecked(row, self.trees.len()))
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        self.predict_margin(row).map(sigmoid)
    }

    fn margin_unchecked(&self, row: &[f64], n_trees: usize) -> f64 {
        let sum: f64 = self.trees[..n_trees].iter().map(|t| t.predict(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    fn check_matrix(&self, matrix: &FeatureMatrix) -> Result<()> {
        let names = matrix.names();
        if names.len() != self.schema.len() || names.iter().zip(&self.schema).any(|(a, b)| *a != b.name) {
            return Err(Error::Schema("matrix columns do not match the model schema".into()));
        }
        Ok(())
    }

    /// Probabilities for every row of a matrix with the model's columns.
    pub fn predict_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_matrix(matrix)?;
        Ok((0..matrix.n_rows())
            .map(|i| sigmoid(self.margin_unchecked(&matrix.row(i), self.trees.len())))
            .collect())
    }

    /// Margins after each of `checkpoints` (ascending tree counts).
    pub fn staged_margins(&self, matrix: &FeatureMatrix, checkpoints: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.check_matrix(matrix)?;
        if checkpoints.windows(2).any(|w| w[0] > w[1]) || checkpoints.last().is_some_and(|&c| c > self.trees.len()) {
            return Err(Error::InvalidArgument("checkpoints must be ascending and within the ensemble".into()));
        }
        let rows: Vec<Vec<f64>> = (0..matrix.n_rows()).map(|i| matrix.row(i)).collect();
        let mut acc = vec![0.0; rows.len()];
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut done = 0;
        for &c in checkpoints {
            for t in &self.trees[done..c] {
                for (a, r) in acc.iter_mut().zip(&rows) {
                    *a += t.predict(r);
                }
            }
            done = c;
            out.push(acc.iter().map(|a| self.base_score + self.learning_rate * a).collect());
        }
        Ok(out)
    }

    /// The first `n` trees of the ensemble.
    pub fn truncated(&self, n: usize) -> BoostedModel {
        let mut m = self.clone();
        m.trees.truncate(n);
        m.params.n_trees = m.trees.len();
        m
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: BoostedModel = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::Serde(format!("unsupported model format {} v{}", m.format, m.version)));
        }
        for t in &m.trees {
            if t.nodes.is_empty() {
                return Err(Error::Serde("tree without nodes".into()));
            }
            for n in &t.nodes {
                if let Some(s) = n.split {
                    if s.feature >= m.schema.len() || s.left >= t.nodes.len() || s.right >= t.nodes.len() {
                        return Err(Error::Serde("split references a missing feature or node".into()));
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        atomic_write(path, |w| w.write_all(text.as_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_json(&text)
    }
}


#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    threshold: f64,
    default_left: bool,
}

#[inline]
fn score_gh(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}

fn weight(s: Stats, lambda: f64) -> f64 {
    let d = s.h + lambda;
    if d > 0.0 {
        -s.g / d
    } else {
        0.0
    }
}

/// Scratch space reused across scans.
#[derive(Default)]
struct Scratch {
    cg: Vec<f64>,
    ch: Vec<f64>,
    gain: Vec<f64>,
}

/// Writes `score(left) + score(right)` for splits after positions
/// `lo..hi` into `out`, with `(ag, ah)` added to the left side and `(bg, bh)`
/// to the right.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn split_scores(cg: &[f64], ch: &[f64], pg: f64, ph: f64, add: [f64; 4], lambda: f64, out: &mut [f64], max: bool) {
    let [ag, ah, bg, bh] = add;
    let m = out.len();
    let (cg, ch) = (&cg[..m], &ch[..m]);
    if lambda > 0.0 {
        for k in 0..m {
            let lg = cg[k] + ag;
            let lh = ch[k] + ah + lambda;
            let rg = pg - cg[k] + bg;
            let rh = ph - ch[k] + bh + lambda;
            let s = lg * lg / lh + rg * rg / rh;
            out[k] = if max { out[k].max(s) } else { s };
        }
    } else {
        for k in 0..m {
            let s = score_gh(cg[k] + ag, ch[k] + ah, lambda) + score_gh(pg - cg[k] + bg, ph - ch[k] + bh, lambda);
            out[k] = if max { out[k].max(s) } else { s };
        }
    }
}

/// Best split of one node on one feature. `vals`/`rows` hold the node's
/// non-missing rows in ascending value order; the node's remaining rows are
/// missing on this feature.
fn scan_node(
    vals: &[f64],
    rows: &[u32],
    gh: &[[f64; 2]],
    node: Stats,
    params: &HyperParams,
    scratch: &mut Scratch,
) -> Option<Candidate> {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: AVX2 support was just checked.
        return unsafe { scan_node_avx2(vals, rows, gh, node, params, scratch) };
    }
    scan_node_impl(vals, rows, gh, node, params, scratch)
}

// Same code compiled for wider vectors; IEEE results are unchanged.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn scan_node_avx2(
    vals: &[f64],
    rows: &[u32],
    gh: &[[f64; 2]],
    node: Stats,
    params: &HyperParams,
    scratch: &mut Scratch,
) -> Option<Candidate> {
    scan_node_impl(vals, rows, gh, node, params, scratch)
}

#[inline(always)]
fn scan_node_impl(
    vals: &[f64],
    rows: &[u32],
    gh: &[[f64; 2]],
    node: Stats,
    params: &HyperParams,
    scratch: &mut Scratch,
) -> Option<Candidate> {
    let len = rows.len();
    if len < 2 {
        return None;
    }
    let lambda = params.l2_leaf_reg;
    let ml = params.min_data_in_leaf;
    let Scratch { cg, ch, gain } = scratch;
    if cg.len() < len {
        cg.resize(len, 0.0);
        ch.resize(len, 0.0);
    }
    let (mut sg, mut sh) = (0.0, 0.0);
    for ((&r, a), b) in rows.iter().zip(cg.iter_mut()).zip(ch.iter_mut()) {
        let [x, y] = gh[r as usize];
        sg += x;
        sh += y;
        *a = sg;
        *b = sh;
    }
    let (pg, ph) = (sg, sh);
    let mn = node.n - len;
    let (mg, mh) = (node.g - pg, node.h - ph);
    let parent = score_gh(node.g, node.h, lambda);
    // a split after position i leaves i + 1 present rows on the left;
    // missing-left is valid on [a_lo, a_hi), missing-right on [b_lo, b_hi)
    let a_lo = ml.saturating_sub(mn).max(1) - 1;
    let a_hi = len.saturating_sub(ml).min(len - 1);
    let b_lo = ml.max(1) - 1;
    let b_hi = (len + mn).saturating_sub(ml).min(len - 1);
    let (lo, hi) = if mn == 0 { (b_lo, a_hi) } else { (a_lo.min(b_lo), a_hi.max(b_hi)) };
    if lo >= hi {
        return None;
    }
    if gain.len() < hi - lo {
        gain.resize(hi - lo, 0.0);
    }
    let gain = &mut gain[..hi - lo];
    if mn == 0 {
        split_scores(&cg[lo..], &ch[lo..], pg, ph, [0.0; 4], lambda, gain, false);
    } else {
        gain.fill(f64::NEG_INFINITY);
        for (from, to, add) in [(a_lo, a_hi, [mg, mh, 0.0, 0.0]), (b_lo, b_hi, [0.0, 0.0, mg, mh])] {
            if from < to {
                split_scores(&cg[from..], &ch[from..], pg, ph, add, lambda, &mut gain[from - lo..to - lo], true);
            }
        }
    }
    let (va, vb) = (&vals[lo..hi], &vals[lo + 1..hi + 1]);
    let mut best = parent + MIN_GAIN;
    let mut at = usize::MAX;
    for k in 0..gain.len() {
        let s = gain[k];
        if s > best && va[k] < vb[k] {
            best = s;
            at = k;
        }
    }
    if at == usize::MAX || best - parent <= MIN_GAIN {
        return None;
    }
    let i = lo + at;
    let nl = i + 1;
    let default_left = if mn == 0 {
        nl >= len - nl
    } else {
        let one = |add: [f64; 4], ok: bool| {
            let mut o = [f64::NEG_INFINITY];
            if ok {
                split_scores(&cg[i..], &ch[i..], pg, ph, add, lambda, &mut o, false);
            }
            o[0]
        };
        let a = one([mg, mh, 0.0, 0.0], (a_lo..a_hi).contains(&i));
        let b = one([0.0, 0.0, mg, mh], (b_lo..b_hi).contains(&i));
        a >= b
    };
    let (a, v) = (vals[i], vals[i + 1]);
    let mut threshold = a + (v - a) / 2.0;
    if threshold >= v {
        threshold = a;
    }
    Some(Candidate {
        gain: best - parent,
        threshold,
        default_left,
    })
}

/// Per-feature row lists in which every open node owns a contiguous segment
/// sorted by the feature's value. Missing rows are not listed.
struct Grower<'a> {
    cols: &'a [Vec<f64>],
    sorted: Vec<Vec<u32>>,
    sorted_vals: Vec<Vec<f64>>,
    params: HyperParams,
}

struct Open {
    node: usize,
    stats: Stats,
    /// Segment of each feature list, then of the all-rows list.
    segs: Vec<(usize, usize)>,
}

/// Stable partition of segment `seg` of `rows` (and `vals` alongside) into
/// side 0 then side 1; returns the boundary.
fn partition(rows: &mut [u32], vals: &mut [f64], seg: (usize, usize), side: &[u8], buf: &mut PartitionBuf) -> usize {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: AVX2 support was just checked.
        return unsafe { partition_avx2(rows, vals, seg, side, buf) };
    }
    partition_impl(rows, vals, seg, side, buf)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn partition_avx2(rows: &mut [u32], vals: &mut [f64], seg: (usize, usize), side: &[u8], buf: &mut PartitionBuf) -> usize {
    partition_impl(rows, vals, seg, side, buf)
}

/// Right-hand rows and values parked during a partition.
#[derive(Default)]
struct PartitionBuf {
    rows: Vec<u32>,
    vals: Vec<f64>,
}

#[inline(always)]
fn partition_impl(rows: &mut [u32], vals: &mut [f64], seg: (usize, usize), side: &[u8], buf: &mut PartitionBuf) -> usize {
    let (a, b) = seg;
    let len = b - a;
    if buf.rows.len() < len {
        buf.rows.resize(len, 0);
        buf.vals.resize(len, 0.0);
    }
    let (rows, vals) = (&mut rows[a..b], &mut vals[a..b]);
    let (br, bv) = (&mut buf.rows[..len], &mut buf.vals[..len]);
    // left entries compact in place (the write index never passes the read
    // index), right entries go to the buffer
    let (mut wl, mut wr) = (0, 0);
    for k in 0..len {
        let (r, v) = (rows[k], vals[k]);
        let s = usize::from(side[r as usize]);
        rows[wl] = r;
        vals[wl] = v;
        br[wr] = r;
        bv[wr] = v;
        wl += 1 - s;
        wr += s;
    }
    rows[wl..].copy_from_slice(&br[..wr]);
    vals[wl..].copy_from_slice(&bv[..wr]);
    a + wl
}

impl<'a> Grower<'a> {
    fn new(cols: &'a [Vec<f64>], params: HyperParams) -> Self {
        let mut sorted = Vec::with_capacity(cols.len());
        let mut sorted_vals = Vec::with_capacity(cols.len());
        for c in cols {
            let mut present: Vec<u32> = (0..c.len() as u32).filter(|&i| !c[i as usize].is_nan()).collect();
            present.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
            sorted_vals.push(present.iter().map(|&i| c[i as usize]).collect());
            sorted.push(present);
        }
        Grower {
            cols,
            sorted,
            sorted_vals,
            params,
        }
    }

    fn grow(&self, g: &[f64], h: &[f64]) -> Tree {
        let n = g.len();
        let p = self.cols.len();
        let lambda = self.params.l2_leaf_reg;
        let min_leaf = self.params.min_data_in_leaf;
        let mut root = Stats::default();
        for i in 0..n {
            root.add(g[i], h[i]);
        }
        let mut nodes = vec![TreeNode {
            split: None,
            value: weight(root, lambda),
            cover: n as f64,
        }];
        if self.params.max_depth == 0 || n < 2 * min_leaf {
            return Tree { nodes };
        }
        let gh: Vec<[f64; 2]> = g.iter().zip(h).map(|(&a, &b)| [a, b]).collect();
        let mut rows = self.sorted.clone();
        let mut vals = self.sorted_vals.clone();
        let mut all: Vec<u32> = (0..n as u32).collect();
        let mut all_vals = vec![0.0; n];
        let mut segs: Vec<(usize, usize)> = rows.iter().map(|r| (0, r.len())).collect();
        segs.push((0, n));
        let mut open = vec![Open {
            node: 0,
            stats: root,
            segs,
        }];
        let mut side = vec![0u8; n];
        for depth in 0..self.params.max_depth {
            open.retain(|o| o.stats.n >= 2 * min_leaf);
            if open.is_empty() {
                break;
            }
            let per_feature: Vec<Vec<Option<Candidate>>> = (0..p)
                .into_par_iter()
                .map_init(Scratch::default, |scratch, f| {
                    open.iter()
                        .map(|o| {
                            let (a, b) = o.segs[f];
                            scan_node(&vals[f][a..b], &rows[f][a..b], &gh, o.stats, &self.params, scratch)
                        })
                        .collect()
                })
                .collect();
            let mut chosen: Vec<Option<(usize, Candidate)>> = vec![None; open.len()];
            for (f, cands) in per_feature.iter().enumerate() {
                for (s, c) in cands.iter().enumerate() {
                    if let Some(c) = c {
                        if chosen[s].is_none_or(|(_, b)| c.gain > b.gain) {
                            chosen[s] = Some((f, *c));
                        }
                    }
                }
            }
            // route every row of a splitting node
            let mut next = Vec::new();
            let mut splitting = Vec::new();
            for (o, c) in open.iter().zip(&chosen) {
                let Some((f, c)) = *c else { continue };
                let col = &self.cols[f];
                let (a, b) = o.segs[p];
                let mut ls = Stats::default();
                let mut rs = Stats::default();
                for &r in &all[a..b] {
                    let v = col[r as usize];
                    let left = if v.is_nan() { c.default_left } else { v <= c.threshold };
                    side[r as usize] = u8::from(!left);
                    if left {
                        ls.add(g[r as usize], h[r as usize]);
                    } else {
                        rs.add(g[r as usize], h[r as usize]);
                    }
                }
                let ids = [nodes.len(), nodes.len() + 1];
                for st in [ls, rs] {
                    nodes.push(TreeNode {
                        split: None,
                        value: weight(st, lambda),
                        cover: st.n as f64,
                    });
                }
                nodes[o.node].split = Some(Split {
                    feature: f,
                    threshold: c.threshold,
                    default_left: c.default_left,
                    left: ids[0],
                    right: ids[1],
                });
                splitting.push((o, ids, ls, rs));
            }
            // children that can never split need no lists
            splitting.retain(|(_, _, ls, rs)| ls.n >= 2 * min_leaf || rs.n >= 2 * min_leaf);
            if splitting.is_empty() || depth + 1 == self.params.max_depth {
                break;
            }
            // partition each list; boundaries[k][j] splits segment j of node k
            let boundaries: Vec<Vec<usize>> = rows
                .par_iter_mut()
                .zip(vals.par_iter_mut())
                .enumerate()
                .map_init(PartitionBuf::default, |buf, (f, (r, v))| {
                    splitting
                        .iter()
                        .map(|(o, ..)| partition(r, v, o.segs[f], &side, buf))
                        .collect()
                })
                .collect();
            let mut buf = PartitionBuf::default();
            let all_bounds: Vec<usize> = splitting
                .iter()
                .map(|(o, ..)| partition(&mut all, &mut all_vals, o.segs[p], &side, &mut buf))
                .collect();
            for (k, (o, ids, ls, rs)) in splitting.iter().enumerate() {
                let mut lsegs = Vec::with_capacity(p + 1);
                let mut rsegs = Vec::with_capacity(p + 1);
                for (f, &(a, b)) in o.segs[..=p].iter().enumerate() {
                    let m = if f < p { boundaries[f][k] } else { all_bounds[k] };
                    lsegs.push((a, m));
                    rsegs.push((m, b));
                }
                next.push(Open {
                    node: ids[0],
                    stats: *ls,
                    segs: lsegs,
                });
                next.push(Open {
                    node: ids[1],
                    stats: *rs,
                    segs: rsegs,
                });
            }
            open = next;
        }
        Tree { nodes }
    }
}

fn logloss(margins: &[f64], labels: &[bool]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            // log(1 + e^-|m|) + max(m, 0) - y m, stable form
            let l = (1.0 + (-m.abs()).exp()).ln() + m.max(0.0);
            if y {
                l - m
            } else {
                l
            }
        })
        .sum();
    total / margins.len() as f64
}

/// Mean training log-loss of `model` on its own training data.
pub fn training_logloss(model: &BoostedModel, matrix: &FeatureMatrix, labels: &[bool]) -> Result<f64> {
    model.check_matrix(matrix)?;
    let margins: Vec<f64> = (0..matrix.n_rows())
        .map(|i| model.margin_unchecked(&matrix.row(i), model.trees.len()))
        .collect();
    Ok(logloss(&margins, labels))
}

pub fn train(matrix: &FeatureMatrix, labels: &[bool], params: &HyperParams) -> Result<BoostedModel> {
    params.validate()?;
    let n = matrix.n_rows();
    if n < 2 {
        return Err(Error::Training(format!("need at least 2 rows, got {n}")));
    }
    if labels.len() != n {
        return Err(Error::Training(format!("{} labels for {n} rows", labels.len())));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == n {
        return Err(Error::Training("labels contain a single class".into()));
    }
    if n > u32::MAX as usize {
        return Err(Error::Training("too many rows".into()));
    }
    let p = positives as f64 / n as f64;
    let base_score = (p / (1.0 - p)).ln();
    let cols: Vec<Vec<f64>> = matrix.columns.iter().map(|c| c.values.clone()).collect();
    let grower = Grower::new(&cols, *params);
    let mut margin = vec![base_score; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        for i in 0..n {
            let q = sigmoid(margin[i]);
            g[i] = q - f64::from(u8::from(labels[i]));
            h[i] = q * (1.0 - q);
        }
        let tree = grower.grow(&g, &h);
        if params.learning_rate != 0.0 {
            for (i, m) in margin.iter_mut().enumerate() {
                *m += params.learning_rate * tree.nodes[tree.leaf_by(|f| cols[f][i])].value;
            }
        }
        trees.push(tree);
    }
    Ok(BoostedModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        schema: matrix
            .columns
            .iter()
            .map(|c| SchemaEntry {
                name: c.name.clone(),
                group: c.group,
            })
            .collect(),
        base_score,
        learning_rate: params.learning_rate,
        params: *params,
        trees,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_trees: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub min_data_in_leaf: Vec<usize>,
    pub max_depth: usize,
    pub l2_leaf_reg: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_trees: vec![50, 100, 200],
            learning_rate: vec![0.05, 0.1],
            min_data_in_leaf: vec![20, 50, 100],
            max_depth: 6,
            l2_leaf_reg: 1.0,
        }
    }
}

impl GridSpec {
    pub fn single(params: HyperParams) -> Self {
        GridSpec {
            n_trees: vec![params.n_trees],
            learning_rate: vec![params.learning_rate],
            min_data_in_leaf: vec![params.min_data_in_leaf],
            max_depth: params.max_depth,
            l2_leaf_reg: params.l2_leaf_reg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, empty) in [
            ("grid.n_trees", self.n_trees.is_empty()),
            ("grid.learning_rate", self.learning_rate.is_empty()),
            ("grid.min_data_in_leaf", self.min_data_in_leaf.is_empty()),
        ] {
            if empty {
                return Err(Error::config(field, "must not be empty"));
            }
        }
        for p in self.points() {
            p.validate()?;
        }
        Ok(())
    }

    /// Every grid point, ordered by trees, then learning rate, then leaf size.
    pub fn points(&self) -> Vec<HyperParams> {
        let mut trees = self.n_trees.clone();
        trees.sort_unstable();
        trees.dedup();
        let mut lrs = self.learning_rate.clone();
        lrs.sort_by(f64::total_cmp);
        lrs.dedup();
        let mut leaves = self.min_data_in_leaf.clone();
        leaves.sort_unstable();
        leaves.dedup();
        let mut out = Vec::new();
        for &t in &trees {
            for &lr in &lrs {
                for &m in &leaves {
                    out.push(HyperParams {
                        n_trees: t,
                        learning_rate: lr,
                        min_data_in_leaf: m,
                        max_depth: self.max_depth,
                        l2_leaf_reg: self.l2_leaf_reg,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: HyperParams,
    pub mean_auc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: HyperParams,
    pub table: Vec<GridPoint>,
}

/// Exhaustive search by `k`-fold CV mean AUC. Ties go to fewer trees, then
/// the lower learning rate, then the smaller leaf size. A point whose
/// training or scoring fails is recorded and skipped.
///
/// Every tree-count choice sharing a learning rate and leaf size is scored
/// from one ensemble of the largest size, since boosting without subsampling
/// makes the smaller ensembles exact prefixes of it.
pub fn grid_search(
    matrix: &FeatureMatrix,
    labels: &[bool],
    grid: &GridSpec,
    k: usize,
    seed: u64,
) -> Result<GridResult> {
    grid.validate()?;
    if labels.len() != matrix.n_rows() {
        return Err(Error::InvalidArgument("labels do not match rows".into()));
    }
    let folds = make_folds(&matrix.rows, k, seed)?;
    let points = grid.points();
    let mut trees = grid.n_trees.clone();
    trees.sort_unstable();
    trees.dedup();
    let max_trees = *trees.last().expect("non-empty grid");
    let mut families: Vec<(f64, usize)> = points.iter().map(|p| (p.learning_rate, p.min_data_in_leaf)).collect();
    families.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    families.dedup();

    let tasks: Vec<(usize, usize)> = (0..families.len()).flat_map(|fam| (0..k).map(move |f| (fam, f))).collect();
    let results: Vec<std::result::Result<Vec<f64>, String>> = tasks
        .par_iter()
        .map(|&(fam, fold)| {
            let (lr, leaf) = families[fam];
            let train_idx: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != fold).collect();
            let test_idx: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == fold).collect();
            let params = HyperParams {
                n_trees: max_trees,
                learning_rate: lr,
                min_data_in_leaf: leaf,
                max_depth: grid.max_depth,
                l2_leaf_reg: grid.l2_leaf_reg,
            };
            let tr_labels: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
            let te_labels: Vec<bool> = test_idx.iter().map(|&i| labels[i]).collect();
            let model = train(&matrix.select_rows(&train_idx), &tr_labels, &params).map_err(|e| e.to_string())?;
            let staged = model
                .staged_margins(&matrix.select_rows(&test_idx), &trees)
                .map_err(|e| e.to_string())?;
            staged
                .iter()
                .map(|m| auc(m, &te_labels).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();

    let mut table = Vec::with_capacity(points.len());
    for p in points {
        let fam = families
            .iter()
            .position(|&(lr, leaf)| lr == p.learning_rate && leaf == p.min_data_in_leaf)
            .expect("family exists");
        let ti = trees.iter().position(|&t| t == p.n_trees).expect("tree count exists");
        let mut aucs = Vec::with_capacity(k);
        let mut error = None;
        for fold in 0..k {
            match &results[fam * k + fold] {
                Ok(v) => aucs.push(v[ti]),
                Err(e) => {
                    error = Some(format!("fold {fold}: {e}"));
                    break;
                }
            }
        }
        table.push(GridPoint {
            params: p,
            mean_auc: error.is_none().then(|| mean(&aucs)),
            error,
        });
    }
    // table is ordered by (trees, lr, leaf), so a strict comparison keeps
    // the tie-break order
    let mut best: Option<&GridPoint> = None;
    for p in &table {
        if let Some(a) = p.mean_auc {
            if best.is_none_or(|b| a > b.mean_auc.expect("scored")) {
                best = Some(p);
            }
        }
    }
    let best = best
        .ok_or_else(|| Error::Training("every grid point failed".into()))?
        .params;
    Ok(GridResult { best, table })
}
