//! The temporal study: twelve monthly snapshots of a fixed cohort, three
//! nested feature sets per month, selection and tuning on a 30% tuning
//! partition and 10-fold cross-validation on the rest.

mod output;
mod smooth;
mod snapshot;

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{grid_search, train, BoostedModel, GridPoint, GridSpec, HyperParams};
use crate::error::{Error, Result};
use crate::eval::{auc, ks, make_folds, paired_ttest, relative_increment, ComparisonResult, CvResult, Metric};
use crate::features::{Experiment, FeatureBuilder, FeatureMatrix};
use crate::graph::SocialGraph;
use crate::hash::keyed;
use crate::panel::{BorrowerPanel, NodeId, NodeKind};
use crate::select::{two_stage_select, univariate_screen, SelectionConfig, TwoStageReport};
use crate::shap::group_importance;

pub use output::{write_report, REPORT_FILES};
pub use smooth::{lowess, minmax_scale};
pub use snapshot::{build_snapshots, build_snapshots_with_window, observation_month, Snapshot, SnapshotRow, OUTCOME_WINDOW};

const SPLIT_SALT: u64 = 0x5eed_0001;
const TUNE_SALT: u64 = 0x5eed_0002;
const FOLD_SALT: u64 = 0x5eed_0003;
const SAMPLE_SALT: u64 = 0x5eed_0004;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    /// Snapshots `1..=months` are studied.
    pub months: u32,
    pub experiments: Vec<Experiment>,
    pub tuning_fraction: f64,
    pub tuning_folds: usize,
    pub cv_folds: usize,
    /// Rows explained per fold for group importance (at most the fold size).
    pub explain_sample: usize,
    pub lowess_frac: f64,
    /// Keep every fold model in the report (not serialised into it).
    pub keep_models: bool,
    pub selection: SelectionConfig,
    pub grid: GridSpec,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: 42,
            months: 12,
            experiments: Experiment::ALL.to_vec(),
            tuning_fraction: 0.3,
            tuning_folds: 3,
            cv_folds: 10,
            explain_sample: 2000,
            lowess_frac: 0.5,
            keep_models: false,
            selection: SelectionConfig::default(),
            grid: GridSpec::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.months == 0 {
            return Err(Error::config("study.months", "must be at least 1"));
        }
        if self.experiments.is_empty() {
            return Err(Error::config("study.experiments", "must not be empty"));
        }
        if !(self.tuning_fraction > 0.0 && self.tuning_fraction < 1.0) {
            return Err(Error::config("study.tuning_fraction", "must lie in (0, 1)"));
        }
        if self.tuning_folds < 2 {
            return Err(Error::config("study.tuning_folds", "must be at least 2"));
        }
        if self.cv_folds < 2 {
            return Err(Error::config("study.cv_folds", "must be at least 2"));
        }
        if self.explain_sample == 0 {
            return Err(Error::config("study.explain_sample", "must be at least 1"));
        }
        if !(self.lowess_frac > 0.0 && self.lowess_frac <= 1.0) {
            return Err(Error::config("study.lowess_frac", "must lie in (0, 1]"));
        }
        self.selection.validate()?;
        self.grid.validate()
    }
}

/// Borrowers of the tuning partition: within each kind, the
/// `fraction` of borrowers with the smallest seeded hash.
pub fn tuning_partition(borrowers: &[(NodeId, NodeKind)], fraction: f64, seed: u64) -> HashSet<NodeId> {
    let mut out = HashSet::new();
    for kind in [NodeKind::Person, NodeKind::Company] {
        let mut ids: Vec<NodeId> = borrowers.iter().filter(|b| b.1 == kind).map(|b| b.0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.sort_by_key(|&id| (keyed(id, seed ^ SPLIT_SALT), id));
        let take = (fraction * ids.len() as f64).round() as usize;
        out.extend(&ids[..take]);
    }
    out
}

/// Feature matrices (all groups) for every snapshot, rows in snapshot order.
pub fn build_feature_matrices(
    panel: &BorrowerPanel,
    eownet: &SocialGraph,
    familynet: &SocialGraph,
    snapshots: &[Snapshot],
) -> Result<Vec<FeatureMatrix>> {
    let builder = FeatureBuilder::new(panel, eownet, familynet);
    snapshots
        .iter()
        .map(|s| {
            let rows: Vec<(NodeId, u32)> = s.rows.iter().map(|r| (r.borrower, r.observation_month)).collect();
            builder.build(&rows)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldImportance {
    pub fold: usize,
    pub explained_rows: usize,
    pub borrower_share: Option<f64>,
    pub network_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub experiment: Experiment,
    pub month: u32,
    pub status: CellStatus,
    pub error: Option<String>,
    pub n_rows: usize,
    pub n_tuning: usize,
    pub n_eval: usize,
    pub candidate_columns: usize,
    /// Columns passing univariate screening, before correlation pruning.
    pub screened: Vec<String>,
    pub selection: Option<TwoStageReport>,
    pub params: Option<HyperParams>,
    pub grid: Vec<GridPoint>,
    pub cv: Option<CvResult>,
    pub importance: Vec<FoldImportance>,
    #[serde(skip)]
    pub models: Vec<BoostedModel>,
}

impl CellReport {
    fn empty(experiment: Experiment, month: u32) -> Self {
        CellReport {
            experiment,
            month,
            status: CellStatus::Failed,
            error: None,
            n_rows: 0,
            n_tuning: 0,
            n_eval: 0,
            candidate_columns: 0,
            screened: Vec::new(),
            selection: None,
            params: None,
            grid: Vec::new(),
            cv: None,
            importance: Vec::new(),
            models: Vec::new(),
        }
    }

    pub fn selected(&self) -> &[String] {
        self.selection.as_ref().map_or(&[], |s| s.kept())
    }

    /// Mean network share over folds with a defined share.
    pub fn mean_network_share(&self) -> Option<f64> {
        let v: Vec<f64> = self.importance.iter().filter_map(|f| f.network_share).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub month: u32,
    pub rows: usize,
    pub defaulters: usize,
    pub default_rate: f64,
    pub tuning_rows: usize,
    pub eval_rows: usize,
}

/// Later month against earlier month within one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthComparison {
    pub experiment: Experiment,
    pub from_month: u32,
    pub to_month: u32,
    pub metric: Metric,
    pub result: Option<ComparisonResult>,
    pub note: Option<String>,
}

/// Larger feature set against the smaller one at one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentComparison {
    pub baseline: Experiment,
    pub candidate: Experiment,
    pub month: u32,
    pub metric: Metric,
    pub baseline_mean: Option<f64>,
    pub candidate_mean: Option<f64>,
    pub result: Option<ComparisonResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportancePoint {
    pub month: u32,
    pub mean_network_share: Option<f64>,
    pub lowess_network_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlaySeries {
    pub name: String,
    pub raw: Vec<Option<f64>>,
    pub scaled: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub months: Vec<u32>,
    pub experiments: Vec<Experiment>,
    pub snapshots: Vec<SnapshotSummary>,
    pub cells: Vec<CellReport>,
    pub month_comparisons: Vec<MonthComparison>,
    pub experiment_comparisons: Vec<ExperimentComparison>,
    pub importance_trend: Vec<ImportancePoint>,
    pub overlay: Vec<OverlaySeries>,
}

impl ExperimentReport {
    pub fn cell(&self, experiment: Experiment, month: u32) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.experiment == experiment && c.month == month)
    }

    pub fn cv(&self, experiment: Experiment, month: u32) -> Option<&CvResult> {
        self.cell(experiment, month).and_then(|c| c.cv.as_ref())
    }

    pub fn month_comparison(&self, experiment: Experiment, from: u32, to: u32, metric: Metric) -> Option<&MonthComparison> {
        self.month_comparisons
            .iter()
            .find(|c| c.experiment == experiment && c.from_month == from && c.to_month == to && c.metric == metric)
    }

    pub fn experiment_comparison(
        &self,
        baseline: Experiment,
        candidate: Experiment,
        month: u32,
        metric: Metric,
    ) -> Option<&ExperimentComparison> {
        self.experiment_comparisons.iter().find(|c| {
            c.baseline == baseline && c.candidate == candidate && c.month == month && c.metric == metric
        })
    }
}

struct CellInput<'a> {
    experiment: Experiment,
    month: u32,
    matrix: &'a FeatureMatrix,
    labels: Vec<bool>,
    tuning: Vec<usize>,
    eval: Vec<usize>,
}

fn pick(labels: &[bool], idx: &[usize]) -> Vec<bool> {
    idx.iter().map(|&i| labels[i]).collect()
}

fn run_cell(input: &CellInput, cfg: &StudyConfig) -> CellReport {
    let mut report = CellReport::empty(input.experiment, input.month);
    report.n_rows = input.matrix.n_rows();
    report.n_tuning = input.tuning.len();
    report.n_eval = input.eval.len();
    if let Err(e) = fill_cell(input, cfg, &mut report) {
        report.status = CellStatus::Failed;
        report.error = Some(format!("{}: {e}", e.kind()));
    }
    report
}

fn fill_cell(input: &CellInput, cfg: &StudyConfig, report: &mut CellReport) -> Result<()> {
    let x = input.matrix.assemble(input.experiment.groups())?;
    report.candidate_columns = x.n_cols();
    let x_tune = x.select_rows(&input.tuning);
    let y_tune = pick(&input.labels, &input.tuning);
    report.screened = univariate_screen(&x_tune, &y_tune, &cfg.selection)?.kept;
    let selection = two_stage_select(&x_tune, &y_tune, &cfg.selection)?;
    let kept = selection.kept().to_vec();
    report.selection = Some(selection);
    let xs = x.select_columns(&kept)?;
    let tuned = grid_search(&xs.select_rows(&input.tuning), &y_tune, &cfg.grid, cfg.tuning_folds, cfg.seed ^ TUNE_SALT)?;
    report.grid = tuned.table;
    let params = tuned.best;
    report.params = Some(params);

    let x_eval = xs.select_rows(&input.eval);
    let y_eval = pick(&input.labels, &input.eval);
    let fold_seed = cfg.seed ^ FOLD_SALT;
    let folds = make_folds(&x_eval.rows, cfg.cv_folds, fold_seed)?;
    let explain = input.experiment == Experiment::E3;
    type FoldOutcome = (f64, f64, Option<FoldImportance>, Option<BoostedModel>);
    let results: Vec<Result<FoldOutcome>> = (0..cfg.cv_folds)
        .into_par_iter()
        .map(|fold| {
            let train_idx: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != fold).collect();
            let test_idx: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == fold).collect();
            let model = train(&x_eval.select_rows(&train_idx), &pick(&y_eval, &train_idx), &params)?;
            let x_test = x_eval.select_rows(&test_idx);
            let y_test = pick(&y_eval, &test_idx);
            let p = model.predict_matrix(&x_test)?;
            let fold_ks = ks(&p, &y_test).map_err(|e| Error::Training(format!("fold {fold}: {e}")))?;
            let fold_auc = auc(&p, &y_test).map_err(|e| Error::Training(format!("fold {fold}: {e}")))?;
            let importance = if explain {
                let mut order: Vec<usize> = (0..x_test.n_rows()).collect();
                order.sort_by_key(|&i| (keyed(x_test.rows[i], cfg.seed ^ SAMPLE_SALT), x_test.rows[i]));
                order.truncate(cfg.explain_sample);
                let rows: Vec<Vec<f64>> = order.iter().map(|&i| x_test.row(i)).collect();
                let g = group_importance(&model, &rows)?;
                Some(FoldImportance {
                    fold,
                    explained_rows: rows.len(),
                    borrower_share: g.borrower_share,
                    network_share: g.network_share,
                })
            } else {
                None
            };
            Ok((fold_ks, fold_auc, importance, cfg.keep_models.then_some(model)))
        })
        .collect();
    let mut fold_ks = Vec::with_capacity(cfg.cv_folds);
    let mut fold_auc = Vec::with_capacity(cfg.cv_folds);
    for r in results {
        let (k, a, imp, model) = r?;
        fold_ks.push(k);
        fold_auc.push(a);
        report.importance.extend(imp);
        report.models.extend(model);
    }
    report.cv = Some(CvResult::from_folds(fold_ks, fold_auc, fold_seed));
    report.status = CellStatus::Ok;
    Ok(())
}

/// Runs every (experiment, month) cell and the derived comparisons.
/// `matrices[i]` holds the features of `snapshots[i]`, row for row.
pub fn run_study(snapshots: &[Snapshot], matrices: &[FeatureMatrix], cfg: &StudyConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if snapshots.len() != matrices.len() {
        return Err(Error::InvalidArgument("one feature matrix per snapshot is required".into()));
    }
    for (s, m) in snapshots.iter().zip(matrices) {
        if m.rows.len() != s.rows.len() || m.rows.iter().zip(&s.rows).any(|(a, b)| *a != b.borrower) {
            return Err(Error::InvalidArgument(format!(
                "feature rows do not match snapshot {}",
                s.month_since_grant
            )));
        }
    }
    let cohort: Vec<(NodeId, NodeKind)> = {
        let mut seen = BTreeSet::new();
        snapshots
            .iter()
            .flat_map(|s| &s.rows)
            .filter(|r| seen.insert(r.borrower))
            .map(|r| (r.borrower, r.kind))
            .collect()
    };
    let tuning_set = tuning_partition(&cohort, cfg.tuning_fraction, cfg.seed);

    let mut experiments = cfg.experiments.clone();
    experiments.sort();
    experiments.dedup();
    let mut summaries = Vec::new();
    let mut inputs = Vec::new();
    for (s, m) in snapshots.iter().zip(matrices) {
        let labels = s.labels();
        let (tuning, eval): (Vec<usize>, Vec<usize>) =
            (0..s.rows.len()).partition(|&i| tuning_set.contains(&s.rows[i].borrower));
        summaries.push(SnapshotSummary {
            month: s.month_since_grant,
            rows: s.rows.len(),
            defaulters: labels.iter().filter(|&&y| y).count(),
            default_rate: s.default_rate(),
            tuning_rows: tuning.len(),
            eval_rows: eval.len(),
        });
        for &e in &experiments {
            inputs.push(CellInput {
                experiment: e,
                month: s.month_since_grant,
                matrix: m,
                labels: labels.clone(),
                tuning: tuning.clone(),
                eval: eval.clone(),
            });
        }
    }
    let mut cells: Vec<CellReport> = inputs.par_iter().map(|i| run_cell(i, cfg)).collect();
    cells.sort_by_key(|c| (c.experiment, c.month));
    let mut report = ExperimentReport {
        seed: cfg.seed,
        months: snapshots.iter().map(|s| s.month_since_grant).collect(),
        experiments,
        snapshots: summaries,
        cells,
        month_comparisons: Vec::new(),
        experiment_comparisons: Vec::new(),
        importance_trend: Vec::new(),
        overlay: Vec::new(),
    };
    compare(&mut report);
    trend_and_overlay(&mut report, cfg.lowess_frac)?;
    Ok(report)
}

fn paired(a: Option<&CvResult>, b: Option<&CvResult>, metric: Metric) -> (Option<ComparisonResult>, Option<String>) {
    match (a, b) {
        (Some(a), Some(b)) => match paired_ttest(a.folds(metric), b.folds(metric)) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        _ => (None, Some("missing cell".into())),
    }
}

/// Fills consecutive-month and E2-vs-E1 / E3-vs-E2 comparisons for KS and
/// AUC. Comparisons touching a failed cell are kept with a note.
pub fn compare(report: &mut ExperimentReport) {
    let mut months_cmp = Vec::new();
    for &e in &report.experiments {
        for w in report.months.windows(2) {
            for metric in [Metric::Ks, Metric::Auc] {
                let (result, note) = paired(report.cv(e, w[0]), report.cv(e, w[1]), metric);
                months_cmp.push(MonthComparison {
                    experiment: e,
                    from_month: w[0],
                    to_month: w[1],
                    metric,
                    result,
                    note,
                });
            }
        }
    }
    let mut exp_cmp = Vec::new();
    for (base, cand) in [(Experiment::E1, Experiment::E2), (Experiment::E2, Experiment::E3)] {
        if !(report.experiments.contains(&base) && report.experiments.contains(&cand)) {
            continue;
        }
        for &m in &report.months {
            for metric in [Metric::Ks, Metric::Auc] {
                let (a, b) = (report.cv(base, m), report.cv(cand, m));
                let (result, note) = paired(a, b, metric);
                exp_cmp.push(ExperimentComparison {
                    baseline: base,
                    candidate: cand,
                    month: m,
                    metric,
                    baseline_mean: a.map(|c| c.mean(metric)),
                    candidate_mean: b.map(|c| c.mean(metric)),
                    result,
                    note,
                });
            }
        }
    }
    report.month_comparisons = months_cmp;
    report.experiment_comparisons = exp_cmp;
}

fn scale_options(raw: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let present: Vec<f64> = raw.iter().flatten().copied().collect();
    if present.is_empty() {
        return Ok(vec![None; raw.len()]);
    }
    let scaled = minmax_scale(&present)?;
    let mut it = scaled.into_iter();
    Ok(raw.iter().map(|v| v.map(|_| it.next().expect("one per value"))).collect())
}

fn trend_and_overlay(report: &mut ExperimentReport, frac: f64) -> Result<()> {
    let months = report.months.clone();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &m in &months {
        if let Some(c) = report.cell(Experiment::E3, m) {
            for f in &c.importance {
                if let Some(s) = f.network_share {
                    xs.push(f64::from(m));
                    ys.push(s);
                }
            }
        }
    }
    let smoothed = if xs.len() >= 3 { Some(lowess(&xs, &ys, frac)?) } else { None };
    report.importance_trend = months
        .iter()
        .map(|&m| ImportancePoint {
            month: m,
            mean_network_share: report.cell(Experiment::E3, m).and_then(CellReport::mean_network_share),
            lowess_network_share: smoothed
                .as_ref()
                .and_then(|s| xs.iter().position(|&x| x == f64::from(m)).map(|i| s[i])),
        })
        .collect();

    let mut series: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    for &e in &report.experiments {
        for metric in [Metric::Ks, Metric::Auc] {
            let name = format!("{}_{}", e.as_str().to_lowercase(), metric_name(metric));
            series.push((name, months.iter().map(|&m| report.cv(e, m).map(|c| c.mean(metric))).collect()));
        }
    }
    for (base, cand) in [(Experiment::E1, Experiment::E2), (Experiment::E2, Experiment::E3)] {
        if !(report.experiments.contains(&base) && report.experiments.contains(&cand)) {
            continue;
        }
        let name = format!(
            "{}_vs_{}_ks_increment",
            cand.as_str().to_lowercase(),
            base.as_str().to_lowercase()
        );
        let v = months
            .iter()
            .map(|&m| match (report.cv(base, m), report.cv(cand, m)) {
                (Some(a), Some(b)) => relative_increment(a.ks_mean, b.ks_mean),
                _ => None,
            })
            .collect();
        series.push((name, v));
    }
    if report.experiments.contains(&Experiment::E3) {
        series.push((
            "network_share".into(),
            report.importance_trend.iter().map(|p| p.mean_network_share).collect(),
        ));
        series.push((
            "network_share_lowess".into(),
            report.importance_trend.iter().map(|p| p.lowess_network_share).collect(),
        ));
    }
    report.overlay = series
        .into_iter()
        .map(|(name, raw)| {
            Ok(OverlaySeries {
                scaled: scale_options(&raw)?,
                name,
                raw,
            })
        })
        .collect::<Result<_>>()?;
    Ok(())
}

pub(crate) fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Ks => "ks",
        Metric::Auc => "auc",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuning_partition_is_stratified_and_stable() {
        let borrowers: Vec<(NodeId, NodeKind)> = (0..1000)
            .map(|i| (i, if i % 5 == 0 { NodeKind::Company } else { NodeKind::Person }))
            .collect();
        let a = tuning_partition(&borrowers, 0.3, 7);
        let companies = a.iter().filter(|&&id| id % 5 == 0).count();
        assert_eq!(companies, 60);
        assert_eq!(a.len(), 300);
        let mut shuffled = borrowers.clone();
        shuffled.reverse();
        assert_eq!(tuning_partition(&shuffled, 0.3, 7), a);
        assert_ne!(tuning_partition(&borrowers, 0.3, 8), a);
    }

    fn cv(ks: [f64; 3]) -> CvResult {
        CvResult::from_folds(ks.to_vec(), ks.to_vec(), 1)
    }

    fn report_with(cells: Vec<(Experiment, u32, Option<CvResult>)>) -> ExperimentReport {
        let months: BTreeSet<u32> = cells.iter().map(|c| c.1).collect();
        let experiments: BTreeSet<Experiment> = cells.iter().map(|c| c.0).collect();
        ExperimentReport {
            seed: 0,
            months: months.into_iter().collect(),
            experiments: experiments.into_iter().collect(),
            snapshots: vec![],
            cells: cells
                .into_iter()
                .map(|(e, m, c)| {
                    let mut r = CellReport::empty(e, m);
                    r.status = if c.is_some() { CellStatus::Ok } else { CellStatus::Failed };
                    r.cv = c;
                    r
                })
                .collect(),
            month_comparisons: vec![],
            experiment_comparisons: vec![],
            importance_trend: vec![],
            overlay: vec![],
        }
    }

    #[test]
    fn identical_adjacent_months_are_not_significant() {
        let mut r = report_with(vec![
            (Experiment::E1, 1, Some(cv([0.3, 0.4, 0.5]))),
            (Experiment::E1, 2, Some(cv([0.3, 0.4, 0.5]))),
        ]);
        compare(&mut r);
        let c = r.month_comparison(Experiment::E1, 1, 2, Metric::Ks).unwrap();
        let res = c.result.as_ref().unwrap();
        assert_eq!(res.delta_mean, 0.0);
        assert_eq!(res.relative_increment, Some(0.0));
        assert!(!res.significant);
    }

    #[test]
    fn increments_use_the_earlier_cell_as_denominator() {
        let mut r = report_with(vec![
            (Experiment::E1, 1, Some(cv([0.2, 0.2, 0.2]))),
            (Experiment::E2, 1, Some(cv([0.3, 0.31, 0.29]))),
            (Experiment::E1, 2, None),
            (Experiment::E2, 2, Some(cv([0.3, 0.3, 0.3]))),
        ]);
        compare(&mut r);
        let c = r.experiment_comparison(Experiment::E1, Experiment::E2, 1, Metric::Ks).unwrap();
        let inc = c.result.as_ref().unwrap().relative_increment.unwrap();
        assert!((inc - 0.5).abs() < 1e-12);
        let gap = r.experiment_comparison(Experiment::E1, Experiment::E2, 2, Metric::Ks).unwrap();
        assert!(gap.result.is_none());
        assert_eq!(gap.note.as_deref(), Some("missing cell"));
    }
}
