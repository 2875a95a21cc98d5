//! Constant-installment loan schedules.

use serde::{Deserialize, Serialize};

use crate::panel::{DpdBucket, MonthlyFinancialState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoanKind {
    Consumer,
    Commercial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoanSchedule {
    pub kind: LoanKind,
    pub principal: f64,
    pub term: u32,
    pub monthly_rate: f64,
    pub installments_paid: u32,
}

impl LoanSchedule {
    pub fn new(kind: LoanKind, principal: f64, term: u32, monthly_rate: f64) -> Self {
        LoanSchedule {
            kind,
            principal,
            term,
            monthly_rate,
            installments_paid: 0,
        }
    }

    /// Principal still owed after `installments_paid` annuity payments.
    pub fn outstanding(&self) -> f64 {
        let (n, k) = (self.term as f64, self.installments_paid as f64);
        if self.installments_paid >= self.term {
            return 0.0;
        }
        if self.monthly_rate == 0.0 {
            return self.principal * (1.0 - k / n);
        }
        let g = 1.0 + self.monthly_rate;
        self.principal * (g.powf(n) - g.powf(k)) / (g.powf(n) - 1.0)
    }

    pub fn is_paid_off(&self) -> bool {
        self.installments_paid >= self.term
    }
}

/// Advances a loan by one month.
///
/// An installment is paid in `state.month` only while the borrower is
/// current; delinquent months are missed payments and a defaulted loan never
/// amortises. The returned state belongs to `state.month + 1`: the loan's debt
/// field drops by the principal repaid and `has_active_loan` turns false once
/// the last installment is in. The delinquency bucket is carried over
/// unchanged.
pub fn amortize(
    schedule: &LoanSchedule,
    state: &MonthlyFinancialState,
) -> (LoanSchedule, MonthlyFinancialState) {
    let mut next_sched = *schedule;
    let mut next = *state;
    next.month = state.month + 1;
    if !state.has_active_loan || schedule.is_paid_off() {
        return (next_sched, next);
    }
    if state.dpd_bucket == DpdBucket::Current {
        let before = schedule.outstanding();
        next_sched.installments_paid += 1;
        let repaid = before - next_sched.outstanding();
        let field = match schedule.kind {
            LoanKind::Consumer => &mut next.debt_consumer,
            LoanKind::Commercial => &mut next.debt_commercial,
        };
        *field = (*field - repaid).max(0.0);
        if next_sched.is_paid_off() {
            next.has_active_loan = false;
        }
    }
    (next_sched, next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start(principal: f64) -> MonthlyFinancialState {
        MonthlyFinancialState {
            month: 1,
            debt_consumer: principal,
            debt_commercial: 0.0,
            debt_mortgage: 0.0,
            revolving_amount: 0.0,
            dpd_bucket: DpdBucket::Current,
            has_active_loan: true,
        }
    }

    #[test]
    fn term_twelve_pays_off_at_month_thirteen() {
        let mut sched = LoanSchedule::new(LoanKind::Consumer, 1200.0, 12, 0.02);
        let mut st = start(1200.0);
        for _ in 0..12 {
            assert!(st.has_active_loan, "month {}", st.month);
            (sched, st) = amortize(&sched, &st);
        }
        assert_eq!(st.month, 13);
        assert!(!st.has_active_loan);
        assert!(st.debt_consumer.abs() < 1e-6);
    }

    #[test]
    fn defaulted_loan_never_pays_off() {
        let mut sched = LoanSchedule::new(LoanKind::Consumer, 500.0, 6, 0.01);
        let mut st = start(500.0);
        st.dpd_bucket = DpdBucket::Dpd90Plus;
        for _ in 0..40 {
            (sched, st) = amortize(&sched, &st);
        }
        assert!(st.has_active_loan);
        assert_eq!(st.debt_consumer, 500.0);
    }

    #[test]
    fn principal_declines_strictly() {
        let mut sched = LoanSchedule::new(LoanKind::Consumer, 600.0, 6, 0.015);
        let mut st = start(600.0);
        for _ in 0..2 {
            (sched, st) = amortize(&sched, &st);
        }
        assert_eq!(st.month, 3);
        assert!(st.debt_consumer > 0.0 && st.debt_consumer < 600.0);
        let mut prev = f64::INFINITY;
        let mut s = LoanSchedule::new(LoanKind::Commercial, 600.0, 6, 0.0);
        for _ in 0..6 {
            assert!(s.outstanding() < prev);
            prev = s.outstanding();
            s.installments_paid += 1;
        }
        assert_eq!(s.outstanding(), 0.0);
    }

    #[test]
    fn delinquent_month_skips_payment() {
        let sched = LoanSchedule::new(LoanKind::Consumer, 600.0, 6, 0.015);
        let mut st = start(600.0);
        st.dpd_bucket = DpdBucket::Dpd1To29;
        let (s2, st2) = amortize(&sched, &st);
        assert_eq!(s2.installments_paid, 0);
        assert_eq!(st2.debt_consumer, 600.0);
    }
}
