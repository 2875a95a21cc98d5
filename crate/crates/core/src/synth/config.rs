use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the synthetic population.
///
/// Defaults are desk-scale (20,000 persons / 4,000 companies with cohorts of
/// 8,000 / 2,000); larger populations are a config change away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub n_persons: usize,
    pub n_companies: usize,
    pub cohort_persons: usize,
    pub cohort_companies: usize,
    pub horizon_months: u32,
    pub seed: u64,
    /// Weight of the neighbours' mean in the latent-risk smoothing pass.
    pub homophily_strength: f64,
    /// Monthly forward-delinquency probability of a person at median risk.
    pub base_hazard_person: f64,
    /// Monthly forward-delinquency probability of a company at median risk.
    pub base_hazard_company: f64,
    /// Log-odds change of the forward probability per unit of latent risk.
    pub risk_slope: f64,
    /// Monthly probability that a delinquent borrower returns to current.
    pub cure_probability: f64,
    /// Inclusive range of primary-loan terms.
    pub loan_term_months_range: (u32, u32),
    /// Inclusive calendar-month range in which cohort loans originate.
    pub origination_window: (u32, u32),
    /// Share of non-cohort nodes already holding credit when the study starts.
    pub credit_participation: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            n_persons: 20_000,
            n_companies: 4_000,
            cohort_persons: 8_000,
            cohort_companies: 2_000,
            horizon_months: 24,
            seed: 42,
            homophily_strength: 0.7,
            base_hazard_person: 0.15,
            base_hazard_company: 0.12,
            risk_slope: 8.0,
            cure_probability: 0.35,
            loan_term_months_range: (6, 36),
            origination_window: (1, 1),
            credit_participation: 0.7,
        }
    }
}

impl PopulationConfig {
    /// Scaled-down population keeping every default ratio.
    pub fn scaled(factor: f64) -> Self {
        let d = Self::default();
        let s = |n: usize| ((n as f64 * factor).round() as usize).max(1);
        PopulationConfig {
            n_persons: s(d.n_persons),
            n_companies: s(d.n_companies),
            cohort_persons: s(d.cohort_persons),
            cohort_companies: s(d.cohort_companies),
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cohort_persons > self.n_persons {
            return Err(Error::config(
                "cohort_persons",
                format!("{} exceeds n_persons {}", self.cohort_persons, self.n_persons),
            ));
        }
        if self.cohort_companies > self.n_companies {
            return Err(Error::config(
                "cohort_companies",
                format!("{} exceeds n_companies {}", self.cohort_companies, self.n_companies),
            ));
        }
        if self.cohort_persons + self.cohort_companies == 0 {
            return Err(Error::config("cohort_persons", "cohort is empty"));
        }
        if self.horizon_months < 13 {
            return Err(Error::config(
                "horizon_months",
                format!("{} < 13", self.horizon_months),
            ));
        }
        for (field, p) in [
            ("homophily_strength", self.homophily_strength),
            ("base_hazard_person", self.base_hazard_person),
            ("base_hazard_company", self.base_hazard_company),
            ("cure_probability", self.cure_probability),
            ("credit_participation", self.credit_participation),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(field, format!("{p} outside [0, 1]")));
            }
        }
        if !self.risk_slope.is_finite() {
            return Err(Error::config("risk_slope", "must be finite"));
        }
        let (lo, hi) = self.loan_term_months_range;
        if lo == 0 || lo > hi {
            return Err(Error::config(
                "loan_term_months_range",
                format!("invalid range ({lo}, {hi})"),
            ));
        }
        let (start, end) = self.origination_window;
        if start == 0 || start > end || end > self.horizon_months {
            return Err(Error::config(
                "origination_window",
                format!("({start}, {end}) not within 1..={}", self.horizon_months),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        PopulationConfig::default().validate().unwrap();
        PopulationConfig::scaled(0.1).validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let c = PopulationConfig {
            cohort_persons: 30_000,
            ..Default::default()
        };
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("cohort_persons"), "{e}");
        let c = PopulationConfig {
            base_hazard_company: 1.5,
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("base_hazard_company"));
        let c = PopulationConfig {
            horizon_months: 12,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
