use std::io::Write;
use std::path::Path;

use super::{metric_name, CellStatus, ExperimentComparison, ExperimentReport};
use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::features::Experiment;
use crate::io::atomic_write;

pub const REPORT_FILES: [&str; 7] = [
    "report.json",
    "fig3_performance.csv",
    "fig4_e2_vs_e1.csv",
    "fig5_e3_vs_e2.csv",
    "fig6_importance.csv",
    "fig7_overlay.csv",
    "group_importance.csv",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn opt_bool(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

/// Writes the JSON report and the figure tables into `dir`.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Serde(e.to_string()))?;
    atomic_write(&dir.join("report.json"), |w| {
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")
    })?;
    write_performance(&dir.join("fig3_performance.csv"), report)?;
    write_pair(&dir.join("fig4_e2_vs_e1.csv"), report, Experiment::E1, Experiment::E2)?;
    write_pair(&dir.join("fig5_e3_vs_e2.csv"), report, Experiment::E2, Experiment::E3)?;
    write_importance(&dir.join("fig6_importance.csv"), report)?;
    write_overlay(&dir.join("fig7_overlay.csv"), report)?;
    write_group_importance(&dir.join("group_importance.csv"), report)
}

fn write_performance(path: &Path, report: &ExperimentReport) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(
            w,
            "experiment,month,rows,default_rate,status,selected,ks_mean,ks_sd,auc_mean,auc_sd,\
             ks_increment,ks_p_value,ks_significant,auc_increment,auc_p_value,auc_significant"
        )?;
        for c in &report.cells {
            let rate = report.snapshots.iter().find(|s| s.month == c.month).map(|s| s.default_rate);
            let status = match c.status {
                CellStatus::Ok => "OK",
                CellStatus::Failed => "FAILED",
            };
            let prev = report.months.iter().take_while(|&&m| m < c.month).last().copied();
            let step = |metric| {
                prev.and_then(|p| report.month_comparison(c.experiment, p, c.month, metric))
                    .and_then(|m| m.result.as_ref())
            };
            let (ks, auc) = (step(Metric::Ks), step(Metric::Auc));
            write!(
                w,
                "{},{},{},{},{},{},",
                c.experiment.as_str(),
                c.month,
                c.n_rows,
                opt(rate),
                status,
                c.selected().len()
            )?;
            match &c.cv {
                Some(cv) => write!(w, "{},{},{},{},", cv.ks_mean, cv.ks_sd, cv.auc_mean, cv.auc_sd)?,
                None => write!(w, ",,,,")?,
            }
            writeln!(
                w,
                "{},{},{},{},{},{}",
                opt(ks.and_then(|r| r.relative_increment)),
                opt(ks.map(|r| r.p_value)),
                opt_bool(ks.map(|r| r.significant)),
                opt(auc.and_then(|r| r.relative_increment)),
                opt(auc.map(|r| r.p_value)),
                opt_bool(auc.map(|r| r.significant)),
            )?;
        }
        Ok(())
    })
}

fn write_pair(path: &Path, report: &ExperimentReport, base: Experiment, cand: Experiment) -> Result<()> {
    let rows: Vec<&ExperimentComparison> = report
        .experiment_comparisons
        .iter()
        .filter(|c| c.baseline == base && c.candidate == cand)
        .collect();
    atomic_write(path, |w| {
        writeln!(
            w,
            "month,metric,baseline_mean,candidate_mean,delta_mean,relative_increment,t_statistic,p_value,significant,note"
        )?;
        for c in rows {
            let r = c.result.as_ref();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                c.month,
                metric_name(c.metric),
                opt(c.baseline_mean),
                opt(c.candidate_mean),
                opt(r.map(|r| r.delta_mean)),
                opt(r.and_then(|r| r.relative_increment)),
                opt(r.map(|r| r.t_statistic)),
                opt(r.map(|r| r.p_value)),
                opt_bool(r.map(|r| r.significant)),
                c.note.as_deref().unwrap_or("")
            )?;
        }
        Ok(())
    })
}

fn write_importance(path: &Path, report: &ExperimentReport) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "month,mean_network_share,lowess_network_share")?;
        for p in &report.importance_trend {
            writeln!(
                w,
                "{},{},{}",
                p.month,
                opt(p.mean_network_share),
                opt(p.lowess_network_share)
            )?;
        }
        Ok(())
    })
}

fn write_overlay(path: &Path, report: &ExperimentReport) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "series,month,raw,scaled")?;
        for s in &report.overlay {
            for (i, m) in report.months.iter().enumerate() {
                writeln!(w, "{},{},{},{}", s.name, m, opt(s.raw[i]), opt(s.scaled[i]))?;
            }
        }
        Ok(())
    })
}

fn write_group_importance(path: &Path, report: &ExperimentReport) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "experiment,month,fold,explained_rows,borrower_share,network_share")?;
        for c in &report.cells {
            for f in &c.importance {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    c.experiment.as_str(),
                    c.month,
                    f.fold,
                    f.explained_rows,
                    opt(f.borrower_share),
                    opt(f.network_share)
                )?;
            }
        }
        Ok(())
    })
}
