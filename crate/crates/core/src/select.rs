//! Filter-style feature selection: univariate screening followed by greedy
//! correlation pruning, first within each feature group and then across
//! the survivors of all groups.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{auc, ks};
use crate::features::{Column, FeatureGroup, FeatureMatrix};

/// Pairs with fewer complete rows than this are treated as uncorrelated.
pub const MIN_COMPLETE_ROWS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub ks_min: f64,
    pub auc_min: f64,
    pub rho: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            ks_min: 0.01,
            auc_min: 0.53,
            rho: 0.7,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ks_min) {
            return Err(Error::config("ks_min", "must lie in [0, 1]"));
        }
        if !(0.5..=1.0).contains(&self.auc_min) {
            return Err(Error::config("auc_min", "must lie in [0.5, 1]"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::config("rho", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    PerGroup,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DropReason {
    LowKs,
    LowAuc,
    CorrelatedWith(String),
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::LowKs => f.write_str("LOW_KS"),
            DropReason::LowAuc => f.write_str("LOW_AUC"),
            DropReason::CorrelatedWith(c) => write!(f, "CORRELATED_WITH({c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropped {
    pub column: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub stage: Stage,
    pub kept: Vec<String>,
    pub dropped: Vec<Dropped>,
}

/// Both stages of [`two_stage_select`]; `global.kept` is the final set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageReport {
    pub per_group: SelectionReport,
    pub global: SelectionReport,
}

impl TwoStageReport {
    pub fn kept(&self) -> &[String] {
        &self.global.kept
    }
}

/// Univariate KS and oriented AUC of a column over its non-missing rows.
/// `None` when those rows do not contain both classes.
pub fn univariate(values: &[f64], labels: &[bool]) -> Option<(f64, f64)> {
    let (s, l): (Vec<f64>, Vec<bool>) = values
        .iter()
        .zip(labels)
        .filter(|(v, _)| !v.is_nan())
        .map(|(&v, &l)| (v, l))
        .unzip();
    let k = ks(&s, &l).ok()?;
    let a = auc(&s, &l).ok()?;
    Some((k, a.max(1.0 - a)))
}

/// Pearson correlation over rows where both values are present; 0 when
/// fewer than [`MIN_COMPLETE_ROWS`] such rows exist or either side is
/// constant.
pub fn pearson_complete(a: &[f64], b: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .map(|(&x, &y)| (x, y))
        .collect();
    if pairs.len() < MIN_COMPLETE_ROWS {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

fn check_inputs(matrix: &FeatureMatrix, labels: &[bool]) -> Result<()> {
    if matrix.n_rows() == 0 || matrix.n_cols() == 0 {
        return Err(Error::InvalidArgument("feature matrix is empty".into()));
    }
    if labels.len() != matrix.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.n_rows()
        )));
    }
    Ok(())
}

/// Keeps a column iff its KS exceeds `ks_min` and its oriented AUC exceeds
/// `auc_min`.
pub fn univariate_screen(matrix: &FeatureMatrix, labels: &[bool], config: &SelectionConfig) -> Result<SelectionReport> {
    check_inputs(matrix, labels)?;
    Ok(screen_columns(&matrix.columns.iter().collect::<Vec<_>>(), labels, config))
}

fn screen_columns(columns: &[&Column], labels: &[bool], config: &SelectionConfig) -> SelectionReport {
    let stats: Vec<Option<(f64, f64)>> = columns.par_iter().map(|c| univariate(&c.values, labels)).collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (c, s) in columns.iter().zip(stats) {
        let reason = match s {
            None => Some(DropReason::LowKs),
            Some((k, _)) if k <= config.ks_min => Some(DropReason::LowKs),
            Some((_, a)) if a <= config.auc_min => Some(DropReason::LowAuc),
            _ => None,
        };
        match reason {
            None => kept.push(c.name.clone()),
            Some(reason) => dropped.push(Dropped {
                column: c.name.clone(),
                reason,
            }),
        }
    }
    SelectionReport {
        stage: Stage::PerGroup,
        kept,
        dropped,
    }
}

/// Greedy pruning over columns already ranked best first: keep the head,
/// drop everything correlated with it beyond `rho`, repeat on the rest.
fn prune_ranked(order: &[usize], corr: impl Fn(usize, usize) -> f64, rho: f64) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut remaining: Vec<usize> = order.to_vec();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    while !remaining.is_empty() {
        let head = remaining.remove(0);
        kept.push(head);
        remaining.retain(|&j| {
            let drop = corr(head, j).abs() > rho;
            if drop {
                dropped.push((j, head));
            }
            !drop
        });
    }
    (kept, dropped)
}

fn prune_columns(columns: &[&Column], labels: &[bool], config: &SelectionConfig, stage: Stage) -> SelectionReport {
    let stats: Vec<(f64, f64)> = columns
        .par_iter()
        .map(|c| univariate(&c.values, labels).unwrap_or((0.0, 0.5)))
        .collect();
    let mut order: Vec<usize> = (0..columns.len()).collect();
    order.sort_by(|&i, &j| {
        stats[j]
            .0
            .partial_cmp(&stats[i].0)
            .unwrap_or(Ordering::Equal)
            .then(stats[j].1.partial_cmp(&stats[i].1).unwrap_or(Ordering::Equal))
            .then_with(|| columns[i].name.cmp(&columns[j].name))
    });
    let (kept, dropped) = prune_ranked(
        &order,
        |a, b| pearson_complete(&columns[a].values, &columns[b].values),
        config.rho,
    );
    SelectionReport {
        stage,
        kept: kept.into_iter().map(|i| columns[i].name.clone()).collect(),
        dropped: dropped
            .into_iter()
            .map(|(j, by)| Dropped {
                column: columns[j].name.clone(),
                reason: DropReason::CorrelatedWith(columns[by].name.clone()),
            })
            .collect(),
    }
}

/// Greedy correlation pruning ranked by univariate KS, then oriented AUC,
/// then name.
pub fn correlation_prune(matrix: &FeatureMatrix, labels: &[bool], config: &SelectionConfig) -> Result<SelectionReport> {
    check_inputs(matrix, labels)?;
    let cols: Vec<&Column> = matrix.columns.iter().collect();
    Ok(prune_columns(&cols, labels, config, Stage::PerGroup))
}

/// Screen and prune within each group, then prune across the survivors.
pub fn two_stage_select(matrix: &FeatureMatrix, labels: &[bool], config: &SelectionConfig) -> Result<TwoStageReport> {
    check_inputs(matrix, labels)?;
    config.validate()?;
    let mut per_group = SelectionReport {
        stage: Stage::PerGroup,
        kept: Vec::new(),
        dropped: Vec::new(),
    };
    for g in FeatureGroup::ALL {
        let cols: Vec<&Column> = matrix.columns.iter().filter(|c| c.group == g).collect();
        if cols.is_empty() {
            continue;
        }
        let screened = screen_columns(&cols, labels, config);
        per_group.dropped.extend(screened.dropped);
        let survivors: Vec<&Column> = cols
            .iter()
            .copied()
            .filter(|c| screened.kept.contains(&c.name))
            .collect();
        let pruned = prune_columns(&survivors, labels, config, Stage::PerGroup);
        per_group.kept.extend(pruned.kept);
        per_group.dropped.extend(pruned.dropped);
    }
    let survivors: Vec<&Column> = per_group
        .kept
        .iter()
        .map(|n| matrix.column(n).expect("survivor exists"))
        .collect();
    let global = prune_columns(&survivors, labels, config, Stage::Global);
    if global.kept.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(TwoStageReport { per_group, global })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn col(name: &str, group: FeatureGroup, values: Vec<f64>) -> Column {
        Column {
            name: name.into(),
            group,
            values,
        }
    }

    fn matrix(cols: Vec<Column>) -> FeatureMatrix {
        let n = cols[0].values.len();
        FeatureMatrix::new((0..n as u64).collect(), cols).unwrap()
    }

    fn labels(n: usize, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() < 0.3).collect()
    }

    fn as_f64(l: &[bool]) -> Vec<f64> {
        l.iter().map(|&b| f64::from(u8::from(b))).collect()
    }

    #[test]
    fn screen_label_constant_and_missing() {
        let y = labels(200, 1);
        let m = matrix(vec![
            col("label", FeatureGroup::Fin, as_f64(&y)),
            col("constant", FeatureGroup::Fin, vec![3.0; 200]),
            col("missing", FeatureGroup::Fin, vec![f64::NAN; 200]),
        ]);
        let r = univariate_screen(&m, &y, &SelectionConfig::default()).unwrap();
        assert_eq!(r.kept, vec!["label"]);
        let reasons: Vec<_> = r.dropped.iter().map(|d| (d.column.as_str(), d.reason.clone())).collect();
        assert!(reasons.contains(&("missing", DropReason::LowKs)));
        // a constant has KS 0, so the KS rule fires first
        assert!(reasons.iter().any(|(c, _)| *c == "constant"));
        let (k, a) = univariate(&m.columns[1].values, &y).unwrap();
        assert_eq!((k, a), (0.0, 0.5));
    }

    #[test]
    fn uniform_noise_is_screened_out() {
        let n = 10_000;
        let y = labels(n, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut kept = 0;
        for _ in 0..20 {
            let noise: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let (k, a) = univariate(&noise, &y).unwrap();
            if k > 0.01 && a > 0.53 {
                kept += 1;
            }
        }
        assert_eq!(kept, 0);
    }

    #[test]
    fn duplicate_and_negation() {
        let y = labels(300, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l)) + rng.random::<f64>()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let m = matrix(vec![
            col("a", FeatureGroup::Fin, x.clone()),
            col("b", FeatureGroup::Fin, x),
            col("c", FeatureGroup::Fin, neg),
        ]);
        let r = correlation_prune(&m, &y, &SelectionConfig::default()).unwrap();
        assert_eq!(r.kept, vec!["a"]);
        assert_eq!(r.dropped.len(), 2);
    }

    #[test]
    fn greedy_chain_hand_trace() {
        // r12 = 0.9, r23 = 0.9, r13 = 0.6, ranked x1 > x2 > x3
        let r = [[1.0, 0.9, 0.6], [0.9, 1.0, 0.9], [0.6, 0.9, 1.0]];
        let (kept, dropped) = prune_ranked(&[0, 1, 2], |a, b| r[a][b], 0.7);
        assert_eq!(kept, vec![0, 2]);
        assert_eq!(dropped, vec![(1, 0)]);
    }

    #[test]
    fn greedy_chain_on_data() {
        let n = 5000;
        let y = labels(n, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut noise = |sd: f64| Normal::new(0.0, sd).unwrap().sample(&mut rng);
        let x1: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l)) + noise(0.5)).collect();
        let x2: Vec<f64> = x1.iter().map(|v| v + noise(0.53)).collect();
        let x3: Vec<f64> = x2.iter().map(|v| v + noise(0.663)).collect();
        assert!(pearson_complete(&x1, &x2) > 0.7 && pearson_complete(&x2, &x3) > 0.7);
        assert!(pearson_complete(&x1, &x3) < 0.7);
        let ks_of = |x: &[f64]| univariate(x, &y).unwrap().0;
        assert!(ks_of(&x1) > ks_of(&x2) && ks_of(&x2) > ks_of(&x3));
        let m = matrix(vec![
            col("x1", FeatureGroup::Fin, x1),
            col("x2", FeatureGroup::Fin, x2),
            col("x3", FeatureGroup::Fin, x3),
        ]);
        let r = correlation_prune(&m, &y, &SelectionConfig::default()).unwrap();
        assert_eq!(r.kept, vec!["x1", "x3"]);
    }

    #[test]
    fn cross_group_duplicate_is_removed_globally() {
        let y = labels(400, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l)) + rng.random::<f64>()).collect();
        let z: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l)) + 2.0 * rng.random::<f64>()).collect();
        let m = matrix(vec![
            col("fin_x", FeatureGroup::Fin, x.clone()),
            col("soc_x", FeatureGroup::SocInt, x),
            col("soc_z", FeatureGroup::SocInt, z),
        ]);
        let r = two_stage_select(&m, &y, &SelectionConfig::default()).unwrap();
        assert_eq!(r.per_group.kept.len(), 3);
        assert_eq!(r.global.kept.len(), 2);
        assert!(r.global.kept.contains(&"soc_z".to_string()));
        assert_eq!(r.global.stage, Stage::Global);
    }

    #[test]
    fn nothing_survives_is_an_error() {
        let y = labels(100, 10);
        let m = matrix(vec![col("c", FeatureGroup::Fin, vec![1.0; 100])]);
        assert!(matches!(
            two_stage_select(&m, &y, &SelectionConfig::default()),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn sparse_pairs_count_as_uncorrelated() {
        let a: Vec<f64> = (0..100).map(|i| if i < 29 { i as f64 } else { f64::NAN }).collect();
        assert_eq!(pearson_complete(&a, &a), 0.0);
        let b: Vec<f64> = (0..100).map(|i| if i < 30 { i as f64 } else { f64::NAN }).collect();
        assert!((pearson_complete(&b, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_bounds() {
        assert!(SelectionConfig::default().validate().is_ok());
        let bad = SelectionConfig {
            auc_min: 0.4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SelectionConfig {
            rho: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
