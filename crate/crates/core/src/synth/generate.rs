use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::config::PopulationConfig;
use super::loan::{amortize, LoanKind, LoanSchedule};
use crate::error::Result;
use crate::graph::{Edge, EdgeType, SocialGraph};
use crate::panel::{BorrowerPanel, BorrowerRecord, DpdBucket, MonthlyFinancialState, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortMember {
    pub id: NodeId,
    pub kind: NodeKind,
    pub origination_month: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub panel: BorrowerPanel,
    pub eownet: SocialGraph,
    pub familynet: SocialGraph,
    /// Sorted by id.
    pub cohort: Vec<CohortMember>,
    /// Hidden latent risk per node, indexed by node id. Never exported.
    pub latent_risk: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Monthly forward-delinquency probability for a node of the given risk.
fn forward_probability(base_hazard: f64, slope: f64, risk: f64) -> f64 {
    if base_hazard <= 0.0 {
        return 0.0;
    }
    if base_hazard >= 1.0 {
        return 1.0;
    }
    let logit = (base_hazard / (1.0 - base_hazard)).ln();
    sigmoid(logit + slope * (risk - 0.5))
}

/// Probability that the delinquency chain, started current, reaches 90+ DPD
/// within `months` transitions.
pub fn probability_of_default_within(p_forward: f64, p_cure: f64, months: u32) -> f64 {
    let mut dist = [1.0, 0.0, 0.0, 0.0, 0.0];
    for _ in 0..months {
        let mut next = [0.0; 5];
        next[4] = dist[4];
        next[1] += dist[0] * p_forward;
        next[0] += dist[0] * (1.0 - p_forward);
        for k in 1..4 {
            let cure = p_cure.min(1.0 - p_forward);
            next[k + 1] += dist[k] * p_forward;
            next[0] += dist[k] * cure;
            next[k] += dist[k] * (1.0 - p_forward - cure);
        }
        dist = next;
    }
    dist[4]
}

/// Twelve-month default rate the hazard parameters imply for the cohort,
/// averaging the exact chain probability over the cohort's latent risks.
pub fn implied_default_rate(config: &PopulationConfig, population: &Population) -> f64 {
    let total: f64 = population
        .cohort
        .iter()
        .map(|m| {
            let hazard = match m.kind {
                NodeKind::Person => config.base_hazard_person,
                NodeKind::Company => config.base_hazard_company,
            };
            let p = forward_probability(hazard, config.risk_slope, population.latent_risk[m.id as usize]);
            probability_of_default_within(p, config.cure_probability, 12)
        })
        .sum();
    total / population.cohort.len() as f64
}

fn random_interval(rng: &mut ChaCha8Rng, horizon: u32, persistent: f64) -> (u32, u32) {
    if rng.random::<f64>() < persistent {
        return (1, horizon);
    }
    let from = rng.random_range(1..=horizon);
    let to = rng.random_range(from..=horizon);
    (from, to)
}

fn dynamic_edge(src: NodeId, dst: NodeId, edge_type: EdgeType, (from, to): (u32, u32)) -> Edge {
    Edge {
        src,
        dst,
        edge_type,
        valid_from: Some(from),
        valid_to: Some(to),
    }
}

fn static_edge(src: NodeId, dst: NodeId, edge_type: EdgeType) -> Edge {
    Edge {
        src,
        dst,
        edge_type,
        valid_from: None,
        valid_to: None,
    }
}

fn family_edges(rng: &mut ChaCha8Rng, n_persons: usize) -> Vec<Edge> {
    let mut edges = Vec::new();
    let mut order: Vec<u64> = (0..n_persons as u64).collect();
    order.shuffle(rng);
    let married = n_persons / 2;
    for pair in order[..married - married % 2].chunks(2) {
        let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        edges.push(static_edge(a, b, EdgeType::Marriage));
    }
    // parent -> child with the parent always the lower index, so the relation
    // is acyclic; each child has at most two parents
    let children = Poisson::new(0.8).unwrap();
    let mut parents = vec![0u8; n_persons];
    for p in 0..n_persons {
        if p + 1 >= n_persons {
            break;
        }
        let k = children.sample(rng) as usize;
        for _ in 0..k {
            for _attempt in 0..3 {
                let c = rng.random_range(p + 1..n_persons);
                if parents[c] < 2 {
                    parents[c] += 1;
                    edges.push(static_edge(p as u64, c as u64, EdgeType::ParentChild));
                    break;
                }
            }
        }
    }
    edges
}

fn economic_edges(rng: &mut ChaCha8Rng, n_persons: usize, n_companies: usize, horizon: u32) -> Vec<Edge> {
    let mut edges = Vec::new();
    if n_companies == 0 {
        return edges;
    }
    let company = |i: usize| (n_persons + i) as u64;
    let staff = Poisson::new(3.0).unwrap();
    for c in 0..n_companies {
        if n_persons > 0 {
            let owners = rng.random_range(1..=3usize);
            for _ in 0..owners {
                let p = rng.random_range(0..n_persons) as u64;
                let iv = random_interval(rng, horizon, 0.9);
                edges.push(dynamic_edge(p, company(c), EdgeType::Ownership, iv));
            }
            let k = staff.sample(rng) as usize;
            for _ in 0..k {
                let p = rng.random_range(0..n_persons) as u64;
                let iv = random_interval(rng, horizon, 0.7);
                edges.push(dynamic_edge(p, company(c), EdgeType::Employment, iv));
            }
        }
    }
    // preferential attachment: targets drawn from a pool where each company
    // appears once plus once per transaction it already receives
    let mut pool: Vec<usize> = (0..n_companies).collect();
    let extra = Poisson::new(1.0).unwrap();
    for c in 0..n_companies {
        if n_companies < 2 {
            break;
        }
        let m = 1 + extra.sample(rng) as usize;
        for _ in 0..m {
            let t = pool[rng.random_range(0..pool.len())];
            if t == c {
                continue;
            }
            let iv = random_interval(rng, horizon, 0.4);
            edges.push(dynamic_edge(company(c), company(t), EdgeType::Transaction, iv));
            pool.push(t);
        }
    }
    edges
}

fn smooth_risk(base: &[f64], edges: &[&Edge], homophily: f64) -> Vec<f64> {
    let n = base.len();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for e in edges {
        let (a, b) = (e.src as usize, e.dst as usize);
        if a == b {
            continue;
        }
        sum[a] += base[b];
        count[a] += 1;
        sum[b] += base[a];
        count[b] += 1;
    }
    (0..n)
        .map(|i| {
            if count[i] == 0 {
                base[i]
            } else {
                (1.0 - homophily) * base[i] + homophily * sum[i] / count[i] as f64
            }
        })
        .collect()
}

struct Products {
    loan: Option<LoanSchedule>,
    revolving_limit: f64,
    utilisation: f64,
    mortgage: Option<LoanSchedule>,
}

/// Draws the products a node holds at (its) loan origination.
fn draw_products(rng: &mut ChaCha8Rng, kind: NodeKind, risk: f64, config: &PopulationConfig) -> Products {
    let (loan_kind, median, sigma, rate, p_rev, rev_median, p_mort) = match kind {
        NodeKind::Person => (LoanKind::Consumer, 5_000.0f64, 0.6, 0.015, 0.5, 2_000.0f64, 0.15),
        NodeKind::Company => (LoanKind::Commercial, 50_000.0f64, 0.8, 0.010, 0.4, 20_000.0f64, 0.05),
    };
    let amount = LogNormal::new(median.ln(), sigma).unwrap().sample(rng) * (-0.4 * (risk - 0.5)).exp();
    let (lo, hi) = config.loan_term_months_range;
    let term = rng.random_range(lo..=hi);
    let loan = Some(LoanSchedule::new(loan_kind, amount, term, rate));
    let noise = Normal::new(0.0, 0.15).unwrap();
    let (revolving_limit, utilisation) = if rng.random::<f64>() < p_rev {
        let limit = LogNormal::new(rev_median.ln(), 0.5).unwrap().sample(rng);
        let u = (0.3 + 0.3 * (risk - 0.5) + noise.sample(rng)).clamp(0.0, 1.0);
        (limit, u)
    } else {
        (0.0, 0.0)
    };
    let mortgage = (rng.random::<f64>() < p_mort).then(|| {
        let amount = LogNormal::new(80_000f64.ln(), 0.4).unwrap().sample(rng);
        LoanSchedule::new(LoanKind::Consumer, amount, 240, 0.006)
    });
    Products {
        loan,
        revolving_limit,
        utilisation,
        mortgage,
    }
}

fn compose_state(month: u32, kind: NodeKind, p: &Products, bucket: DpdBucket) -> MonthlyFinancialState {
    let loan_debt = p.loan.map_or(0.0, |l| l.outstanding());
    let revolving = p.revolving_limit * p.utilisation;
    let mut st = MonthlyFinancialState {
        month,
        debt_consumer: 0.0,
        debt_commercial: 0.0,
        debt_mortgage: p.mortgage.map_or(0.0, |m| m.outstanding()),
        revolving_amount: revolving,
        dpd_bucket: bucket,
        has_active_loan: p.loan.is_some_and(|l| !l.is_paid_off()),
    };
    match kind {
        NodeKind::Person => st.debt_consumer = loan_debt + revolving,
        NodeKind::Company => st.debt_commercial = loan_debt + revolving,
    }
    st
}

fn empty_state(month: u32) -> MonthlyFinancialState {
    MonthlyFinancialState {
        month,
        debt_consumer: 0.0,
        debt_commercial: 0.0,
        debt_mortgage: 0.0,
        revolving_amount: 0.0,
        dpd_bucket: DpdBucket::Current,
        has_active_loan: false,
    }
}

/// Simulates a node from `start` (possibly before month 1) to the horizon and
/// returns the states of months `max(start, 1)..=horizon`.
fn simulate(
    rng: &mut ChaCha8Rng,
    kind: NodeKind,
    risk: f64,
    start: i64,
    config: &PopulationConfig,
) -> Vec<MonthlyFinancialState> {
    let hazard = match kind {
        NodeKind::Person => config.base_hazard_person,
        NodeKind::Company => config.base_hazard_company,
    };
    let p_fwd = forward_probability(hazard, config.risk_slope, risk);
    let p_cure = config.cure_probability.min(1.0 - p_fwd);
    let drift = Normal::new(0.0, 0.04).unwrap();
    let horizon = config.horizon_months as i64;

    let mut products = draw_products(rng, kind, risk, config);
    let mut bucket = DpdBucket::Current;
    let mut out = Vec::with_capacity(config.horizon_months as usize);
    let mut t = start;
    loop {
        // states before month 1 are simulated but not recorded; month index 0
        // stands in for them inside the state
        let month = t.max(0) as u32;
        let state = compose_state(month, kind, &products, bucket);
        if t >= 1 {
            out.push(state);
        }
        if t == horizon {
            break;
        }
        if let Some(loan) = products.loan {
            let (next_loan, _) = amortize(&loan, &state);
            products.loan = Some(next_loan);
        }
        let current = bucket == DpdBucket::Current;
        if let Some(m) = products.mortgage.as_mut() {
            if current && !m.is_paid_off() {
                m.installments_paid += 1;
            }
        }
        if products.revolving_limit > 0.0 && !bucket.is_default() {
            let stress = if current { 0.0 } else { 0.05 };
            products.utilisation =
                (products.utilisation + 0.06 * (risk - 0.5) + stress + drift.sample(rng)).clamp(0.0, 1.0);
        }
        let holds_product = products.loan.is_some_and(|l| !l.is_paid_off())
            || products.mortgage.is_some_and(|m| !m.is_paid_off())
            || products.revolving_limit * products.utilisation > 0.0;
        bucket = if bucket.is_default() {
            bucket
        } else if !holds_product {
            DpdBucket::Current
        } else {
            let u: f64 = rng.random();
            if u < p_fwd {
                bucket.forward()
            } else if bucket != DpdBucket::Current && u < p_fwd + p_cure {
                DpdBucket::Current
            } else {
                bucket
            }
        };
        t += 1;
    }
    out
}

/// Generates the full synthetic population. Identical configs (including the
/// seed) give identical output.
pub fn generate_population(config: &PopulationConfig) -> Result<Population> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (np, nc) = (config.n_persons, config.n_companies);
    let horizon = config.horizon_months;
    let kind_of = |id: usize| if id < np { NodeKind::Person } else { NodeKind::Company };

    let mut persons: Vec<usize> = (0..np).collect();
    persons.shuffle(&mut rng);
    let mut companies: Vec<usize> = (np..np + nc).collect();
    companies.shuffle(&mut rng);
    let mut in_cohort = vec![false; np + nc];
    for &i in persons[..config.cohort_persons].iter().chain(&companies[..config.cohort_companies]) {
        in_cohort[i] = true;
    }

    let family = family_edges(&mut rng, np);
    let economic = economic_edges(&mut rng, np, nc, horizon);

    let beta = Beta::new(2.0, 2.0).unwrap();
    let base: Vec<f64> = (0..np + nc).map(|_| beta.sample(&mut rng)).collect();
    let all_edges: Vec<&Edge> = family.iter().chain(&economic).collect();
    let latent_risk = smooth_risk(&base, &all_edges, config.homophily_strength);

    let (win_lo, win_hi) = config.origination_window;
    let mut records = Vec::with_capacity(np + nc);
    let mut cohort = Vec::with_capacity(config.cohort_persons + config.cohort_companies);
    for id in 0..np + nc {
        let kind = kind_of(id);
        let risk = latent_risk[id];
        let states = if in_cohort[id] {
            let o = rng.random_range(win_lo..=win_hi);
            cohort.push(CohortMember {
                id: id as u64,
                kind,
                origination_month: o,
            });
            simulate(&mut rng, kind, risk, o as i64, config)
        } else if rng.random::<f64>() < config.credit_participation {
            let age = rng.random_range(1..=36i64);
            simulate(&mut rng, kind, risk, 1 - age, config)
        } else {
            (1..=horizon).map(empty_state).collect()
        };
        records.push(BorrowerRecord {
            id: id as u64,
            kind,
            states,
        });
    }

    let family_nodes = (0..np as u64).map(|i| (i, NodeKind::Person)).collect();
    let eow_nodes = (0..(np + nc) as u64).map(|i| (i, kind_of(i as usize))).collect();
    Ok(Population {
        panel: BorrowerPanel::new(horizon, records),
        eownet: SocialGraph::new(eow_nodes, economic)?,
        familynet: SocialGraph::new(family_nodes, family)?,
        cohort,
        latent_risk,
    })
}
