//! Seeded synthetic population: persons and companies with monthly financial
//! behaviour, an economic network (ownership, employment, transactions) with
//! monthly edge validity and a static family network (marriages, parent to
//! child).
//!
//! Each node carries a hidden latent risk, smoothed once over its network
//! neighbours, which drives a delinquency Markov chain. Social features thus
//! carry real signal about a borrower's outcome.

mod config;
mod generate;
mod loan;

pub use config::PopulationConfig;
pub use generate::{
    generate_population, implied_default_rate, probability_of_default_within, CohortMember, Population,
};
pub use loan::{amortize, LoanKind, LoanSchedule};
