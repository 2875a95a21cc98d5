//! Path-dependent TreeSHAP attributions in margin space, and their
//! aggregation into borrower versus network importance shares.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{BoostedModel, Tree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRow {
    pub values: Vec<f64>,
    pub base_value: f64,
}

impl ShapRow {
    /// `base_value + Σ values`, which equals the model margin.
    pub fn total(&self) -> f64 {
        self.base_value + self.values.iter().sum::<f64>()
    }
}

#[derive(Clone, Copy, Default)]
struct PathElement {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend(path: &mut [PathElement], depth: usize, zero: f64, one: f64, feature: usize) {
    path[depth] = PathElement {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut [PathElement], depth: usize, at: usize) {
    let PathElement { zero, one, .. } = path[at];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in at..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
}

fn unwound_sum(path: &[PathElement], depth: usize, at: usize) -> f64 {
    let PathElement { zero, one, .. } = path[at];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

struct Walker<'a> {
    tree: &'a Tree,
    row: &'a [f64],
    phi: &'a mut [f64],
    scale: f64,
}

impl Walker<'_> {
    /// `arena` starts with the parent's path (`depth` elements); this
    /// node's path is written right after it, and the children receive the
    /// arena from there on.
    fn recurse(&mut self, node: usize, arena: &mut [PathElement], depth: usize, zero: f64, one: f64, feature: usize) {
        let (parent, path) = arena.split_at_mut(depth);
        path[..depth].copy_from_slice(parent);
        extend(path, depth, zero, one, feature);
        let n = &self.tree.nodes[node];
        let Some(s) = n.split else {
            for i in 1..=depth {
                let w = unwound_sum(path, depth, i);
                let el = path[i];
                self.phi[el.feature] += self.scale * w * (el.one - el.zero) * n.value;
            }
            return;
        };
        let v = self.row[s.feature];
        let go_left = if v.is_nan() { s.default_left } else { v <= s.threshold };
        let (hot, cold) = if go_left { (s.left, s.right) } else { (s.right, s.left) };
        let hot_zero = self.tree.nodes[hot].cover / n.cover;
        let cold_zero = self.tree.nodes[cold].cover / n.cover;
        let mut in_zero = 1.0;
        let mut in_one = 1.0;
        let mut depth = depth;
        if let Some(k) = (1..=depth).find(|&k| path[k].feature == s.feature) {
            in_zero = path[k].zero;
            in_one = path[k].one;
            unwind(path, depth, k);
            depth -= 1;
        }
        self.recurse(hot, path, depth + 1, hot_zero * in_zero, in_one, s.feature);
        self.recurse(cold, path, depth + 1, cold_zero * in_zero, 0.0, s.feature);
    }
}

/// Expected value of a tree's output under its training cover.
pub fn tree_expectation(tree: &Tree) -> f64 {
    let root = tree.nodes[0].cover;
    tree.nodes
        .iter()
        .filter(|n| n.split.is_none())
        .map(|n| n.value * n.cover / root)
        .sum()
}

/// Expected margin of the model: the SHAP base value.
pub fn base_value(model: &BoostedModel) -> f64 {
    model.base_score + model.learning_rate * model.trees.iter().map(tree_expectation).sum::<f64>()
}

fn tree_shap_into(tree: &Tree, row: &[f64], scale: f64, phi: &mut [f64], arena: &mut Vec<PathElement>) {
    let d = tree.depth() + 2;
    let need = d * (d + 1);
    if arena.len() < need {
        arena.resize(need, PathElement::default());
    }
    let mut w = Walker { tree, row, phi, scale };
    w.recurse(0, &mut arena[..], 0, 1.0, 1.0, NO_FEATURE);
}

/// SHAP values of one row.
pub fn tree_shap(model: &BoostedModel, row: &[f64]) -> Result<ShapRow> {
    if row.len() != model.n_features() {
        return Err(Error::Schema(format!(
            "row has {} values, model expects {}",
            row.len(),
            model.n_features()
        )));
    }
    let mut phi = vec![0.0; row.len()];
    let mut arena = Vec::new();
    for t in &model.trees {
        tree_shap_into(t, row, model.learning_rate, &mut phi, &mut arena);
    }
    Ok(ShapRow {
        values: phi,
        base_value: base_value(model),
    })
}

/// Mean absolute SHAP value of every feature over `rows`.
pub fn mean_abs_shap(model: &BoostedModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to explain".into()));
    }
    let per_row: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|r| tree_shap(model, r).map(|s| s.values))
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; model.n_features()];
    for v in &per_row {
        for (s, x) in sums.iter_mut().zip(v) {
            *s += x.abs();
        }
    }
    Ok(sums.into_iter().map(|s| s / rows.len() as f64).collect())
}

/// Share of total mean |SHAP| held by borrower features and by network
/// features. Both shares are `None` when the total is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    pub borrower_share: Option<f64>,
    pub network_share: Option<f64>,
    pub total: f64,
}

pub fn group_importance(model: &BoostedModel, rows: &[Vec<f64>]) -> Result<GroupImportance> {
    let imp = mean_abs_shap(model, rows)?;
    let mut borrower = 0.0;
    let mut network = 0.0;
    for (v, s) in imp.iter().zip(&model.schema) {
        if s.group.is_borrower() {
            borrower += v;
        } else {
            network += v;
        }
    }
    let total = borrower + network;
    Ok(if total > 0.0 {
        GroupImportance {
            borrower_share: Some(borrower / total),
            network_share: Some(network / total),
            total,
        }
    } else {
        GroupImportance {
            borrower_share: None,
            network_share: None,
            total,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::{train, HyperParams, Split, TreeNode};
    use crate::features::{Column, FeatureGroup, FeatureMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cover-weighted conditional expectation of a tree given the features
    /// in `known`.
    fn cond_exp(tree: &Tree, i: usize, row: &[f64], known: u32) -> f64 {
        let n = &tree.nodes[i];
        match n.split {
            None => n.value,
            Some(s) => {
                if known & (1 << s.feature) != 0 {
                    let v = row[s.feature];
                    let left = if v.is_nan() { s.default_left } else { v <= s.threshold };
                    cond_exp(tree, if left { s.left } else { s.right }, row, known)
                } else {
                    let (l, r) = (&tree.nodes[s.left], &tree.nodes[s.right]);
                    (l.cover * cond_exp(tree, s.left, row, known) + r.cover * cond_exp(tree, s.right, row, known)) / n.cover
                }
            }
        }
    }

    fn brute_shap(model: &BoostedModel, row: &[f64]) -> Vec<f64> {
        let m = row.len();
        let value = |set: u32| -> f64 {
            model.base_score + model.learning_rate * model.trees.iter().map(|t| cond_exp(t, 0, row, set)).sum::<f64>()
        };
        let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
        (0..m)
            .map(|i| {
                let mut phi = 0.0;
                for set in 0u32..(1 << m) {
                    if set & (1 << i) != 0 {
                        continue;
                    }
                    let s = set.count_ones() as usize;
                    let w = fact(s) * fact(m - s - 1) / fact(m);
                    phi += w * (value(set | (1 << i)) - value(set));
                }
                phi
            })
            .collect()
    }

    fn dataset(n: usize, m: usize, seed: u64) -> (FeatureMatrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| if rng.random::<f64>() < 0.1 { f64::NAN } else { rng.random() })
                    .collect()
            })
            .collect();
        let y = (0..n)
            .map(|i| {
                let z: f64 = cols.iter().enumerate().map(|(j, c)| if c[i].is_nan() { 0.3 } else { c[i] } * (j as f64 - 1.0)).sum();
                rng.random::<f64>() < 1.0 / (1.0 + (-2.0 * z).exp())
            })
            .collect();
        let columns = cols
            .into_iter()
            .enumerate()
            .map(|(j, values)| Column {
                name: format!("f{j}"),
                group: if j % 2 == 0 { FeatureGroup::Fin } else { FeatureGroup::SocInt },
                values,
            })
            .collect();
        (FeatureMatrix::new((0..n as u64).collect(), columns).unwrap(), y)
    }

    #[test]
    fn matches_brute_force_and_is_locally_accurate() {
        for seed in 0..6 {
            let (m, y) = dataset(300, 5, seed);
            let p = HyperParams {
                n_trees: 3,
                learning_rate: 0.3,
                min_data_in_leaf: 10,
                max_depth: 4,
                l2_leaf_reg: 1.0,
            };
            let model = train(&m, &y, &p).unwrap();
            for i in (0..300).step_by(13) {
                let row = m.row(i);
                let fast = tree_shap(&model, &row).unwrap();
                let slow = brute_shap(&model, &row);
                for (a, b) in fast.values.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-9, "seed {seed} row {i}: {a} vs {b}");
                }
                assert!((fast.total() - model.predict_margin(&row).unwrap()).abs() < 1e-9);
            }
        }
    }

    fn stump(feature: usize, n_features: usize) -> BoostedModel {
        let (m, y) = dataset(50, n_features, 1);
        let mut model = train(&m, &y, &HyperParams { n_trees: 0, ..Default::default() }).unwrap();
        model.trees.push(Tree {
            nodes: vec![
                TreeNode {
                    split: Some(Split {
                        feature,
                        threshold: 0.5,
                        default_left: true,
                        left: 1,
                        right: 2,
                    }),
                    value: 0.0,
                    cover: 10.0,
                },
                TreeNode { split: None, value: -1.0, cover: 6.0 },
                TreeNode { split: None, value: 2.0, cover: 4.0 },
            ],
        });
        model
    }

    #[test]
    fn stump_attributes_everything_to_its_feature() {
        let model = stump(1, 3);
        let s = tree_shap(&model, &[0.0, 0.9, 0.0]).unwrap();
        let margin = model.predict_margin(&[0.0, 0.9, 0.0]).unwrap();
        assert!((s.values[1] - (margin - s.base_value)).abs() < 1e-12);
        assert_eq!(s.values[0], 0.0);
        assert_eq!(s.values[2], 0.0);
    }

    #[test]
    fn unused_feature_gets_exactly_zero() {
        let (mut m, y) = dataset(300, 3, 7);
        m.columns.push(Column {
            name: "constant".into(),
            group: FeatureGroup::SocInt,
            values: vec![1.0; 300],
        });
        let model = train(&m, &y, &HyperParams { n_trees: 20, ..Default::default() }).unwrap();
        for i in 0..50 {
            assert_eq!(tree_shap(&model, &m.row(i)).unwrap().values[3], 0.0);
        }
    }

    #[test]
    fn group_shares() {
        let model = stump(0, 2);
        let rows: Vec<Vec<f64>> = vec![vec![0.1, 0.0], vec![0.9, 0.0]];
        let g = group_importance(&model, &rows).unwrap();
        assert_eq!(g.borrower_share, Some(1.0));
        assert_eq!(g.network_share, Some(0.0));

        let flat = train(&dataset(50, 2, 2).0, &dataset(50, 2, 2).1, &HyperParams { n_trees: 0, ..Default::default() }).unwrap();
        let g = group_importance(&flat, &rows).unwrap();
        assert_eq!(g.borrower_share, None);
        assert!(group_importance(&flat, &[]).is_err());
    }

    #[test]
    fn duplicated_column_across_groups_splits_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 2000;
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<bool> = x.iter().map(|&v| rng.random::<f64>() < 0.1 + 0.6 * v).collect();
        let m = FeatureMatrix::new(
            (0..n as u64).collect(),
            vec![
                Column { name: "a".into(), group: FeatureGroup::Fin, values: x.clone() },
                Column { name: "b".into(), group: FeatureGroup::SocInt, values: x },
            ],
        )
        .unwrap();
        let model = train(&m, &y, &HyperParams { n_trees: 30, ..Default::default() }).unwrap();
        let rows: Vec<Vec<f64>> = (0..500).map(|i| m.row(i)).collect();
        let g = group_importance(&model, &rows).unwrap();
        let b = g.borrower_share.unwrap();
        assert!((b + g.network_share.unwrap() - 1.0).abs() < 1e-12);
        // ties go to the lower column index, so a duplicate is never used
        assert_eq!(b, 1.0);
    }
    #[test]
    fn symmetric_features_across_groups_share_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 6000;
        let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<bool> = (0..n).map(|i| rng.random::<f64>() < 0.05 + 0.45 * (a[i] + b[i])).collect();
        let m = FeatureMatrix::new(
            (0..n as u64).collect(),
            vec![
                Column { name: "a".into(), group: FeatureGroup::Fin, values: a },
                Column { name: "b".into(), group: FeatureGroup::SocInt, values: b },
            ],
        )
        .unwrap();
        let model = train(&m, &y, &HyperParams { n_trees: 50, ..Default::default() }).unwrap();
        let rows: Vec<Vec<f64>> = (0..2000).map(|i| m.row(i)).collect();
        let g = group_importance(&model, &rows).unwrap();
        assert!((g.borrower_share.unwrap() - 0.5).abs() < 0.05, "{g:?}");
    }
}
