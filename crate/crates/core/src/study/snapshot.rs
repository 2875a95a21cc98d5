use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{BorrowerPanel, NodeId, NodeKind};
use crate::synth::CohortMember;

/// Months after observation in which reaching 90+ DPD makes a defaulter.
pub const OUTCOME_WINDOW: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub borrower: NodeId,
    pub kind: NodeKind,
    /// Calendar month of the observation.
    pub observation_month: u32,
    pub defaulter: bool,
}

/// The cohort observed `month_since_grant` months after origination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub month_since_grant: u32,
    pub rows: Vec<SnapshotRow>,
}

impl Snapshot {
    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.defaulter).collect()
    }

    pub fn default_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.defaulter).count() as f64 / self.rows.len() as f64
    }
}

/// Calendar month at which a member originating in `origination` is seen
/// `i` months after the grant (month 1 is the origination month).
pub fn observation_month(origination: u32, i: u32) -> u32 {
    origination + i - 1
}

/// Builds snapshots `1..=last_month`.
///
/// A member enters snapshot `i` while it is not 90+ DPD at observation and
/// still holds a credit relationship; once either fails it leaves every
/// later snapshot too. The label is whether 90+ DPD occurs in the
/// [`OUTCOME_WINDOW`] months after observation.
pub fn build_snapshots(panel: &BorrowerPanel, cohort: &[CohortMember], last_month: u32) -> Result<Vec<Snapshot>> {
    build_snapshots_with_window(panel, cohort, last_month, OUTCOME_WINDOW)
}

pub fn build_snapshots_with_window(
    panel: &BorrowerPanel,
    cohort: &[CohortMember],
    last_month: u32,
    window: u32,
) -> Result<Vec<Snapshot>> {
    if last_month == 0 || window == 0 {
        return Err(Error::InvalidArgument("snapshot months and outcome window must be positive".into()));
    }
    let latest_origination = cohort.iter().map(|m| m.origination_month).max().unwrap_or(1);
    for i in 1..=last_month {
        let needed = observation_month(latest_origination, i) + window;
        if needed > panel.horizon_months {
            return Err(Error::HorizonTooShort {
                horizon: panel.horizon_months,
                month: i,
                needed,
            });
        }
    }
    let mut members: Vec<&CohortMember> = cohort.iter().collect();
    members.sort_by_key(|m| m.id);
    let mut gone: HashSet<NodeId> = HashSet::new();
    let mut out = Vec::with_capacity(last_month as usize);
    for i in 1..=last_month {
        let mut rows = Vec::new();
        for m in &members {
            if gone.contains(&m.id) {
                continue;
            }
            let obs = observation_month(m.origination_month, i);
            let state = panel.state(m.id, obs).ok_or(Error::NotObserved { borrower: m.id, month: obs })?;
            if state.dpd_bucket.is_default() || !state.has_credit_relationship() {
                gone.insert(m.id);
                continue;
            }
            let mut defaulter = false;
            for t in obs + 1..=obs + window {
                let s = panel.state(m.id, t).ok_or(Error::NotObserved { borrower: m.id, month: t })?;
                if s.dpd_bucket.is_default() {
                    defaulter = true;
                    break;
                }
            }
            rows.push(SnapshotRow {
                borrower: m.id,
                kind: m.kind,
                observation_month: obs,
                defaulter,
            });
        }
        out.push(Snapshot {
            month_since_grant: i,
            rows,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{BorrowerRecord, DpdBucket, MonthlyFinancialState};

    fn state(month: u32, debt: f64, bucket: DpdBucket) -> MonthlyFinancialState {
        MonthlyFinancialState {
            month,
            debt_consumer: debt,
            debt_commercial: 0.0,
            debt_mortgage: 0.0,
            revolving_amount: 0.0,
            dpd_bucket: bucket,
            has_active_loan: debt > 0.0,
        }
    }

    fn record(id: NodeId, f: impl Fn(u32) -> MonthlyFinancialState) -> BorrowerRecord {
        BorrowerRecord {
            id,
            kind: NodeKind::Person,
            states: (1..=24).map(f).collect(),
        }
    }

    fn member(id: NodeId) -> CohortMember {
        CohortMember {
            id,
            kind: NodeKind::Person,
            origination_month: 1,
        }
    }

    fn fixture() -> (BorrowerPanel, Vec<CohortMember>) {
        let healthy = record(1, |m| state(m, 1000.0, DpdBucket::Current));
        // 90+ DPD from relative month 3 on
        let defaulter = record(2, |m| {
            let b = match m {
                1 => DpdBucket::Dpd30To59,
                2 => DpdBucket::Dpd60To89,
                _ => DpdBucket::Dpd90Plus,
            };
            state(m, 1000.0, b)
        });
        // fully repaid at relative month 5: nothing owed from month 6
        let payer = record(3, |m| state(m, if m <= 5 { 100.0 * (6 - m) as f64 } else { 0.0 }, DpdBucket::Current));
        let panel = BorrowerPanel::new(24, vec![healthy, defaulter, payer]);
        (panel, vec![member(1), member(2), member(3)])
    }

    fn ids(s: &Snapshot) -> Vec<NodeId> {
        s.rows.iter().map(|r| r.borrower).collect()
    }

    #[test]
    fn defaulter_labeled_then_excluded() {
        let (panel, cohort) = fixture();
        let snaps = build_snapshots(&panel, &cohort, 12).unwrap();
        for s in &snaps[..2] {
            let r = s.rows.iter().find(|r| r.borrower == 2).unwrap();
            assert!(r.defaulter);
        }
        for s in &snaps[2..] {
            assert!(!ids(s).contains(&2));
        }
    }

    #[test]
    fn payoff_attrition() {
        let (panel, cohort) = fixture();
        let snaps = build_snapshots(&panel, &cohort, 12).unwrap();
        for s in &snaps[..5] {
            assert!(ids(s).contains(&3));
        }
        for s in &snaps[5..] {
            assert!(!ids(s).contains(&3));
        }
        assert!(snaps.iter().all(|s| ids(s).contains(&1)));
        assert!(snaps.iter().flat_map(|s| &s.rows).filter(|r| r.borrower != 2).all(|r| !r.defaulter));
        assert!(snaps.windows(2).all(|w| w[1].rows.len() <= w[0].rows.len()));
    }

    #[test]
    fn horizon_too_short_names_month() {
        let (panel, cohort) = fixture();
        match build_snapshots(&panel, &cohort, 13) {
            Err(Error::HorizonTooShort { month, .. }) => assert_eq!(month, 13),
            other => panic!("{other:?}"),
        }
    }
}
