//! Randomized deviation strategies used as diagnostics.
//!
//! The first sampler bids the optimal fractions times a price vector drawn
//! from the agent's own price distribution. The second applies the same idea
//! to budget-truncated valuations: prices are first truncated on a maximal
//! resource set where the capped valuation is dominated by scaled prices,
//! which keeps every emitted bid inside the budget. Both come with Monte
//! Carlo checkers for their expected-utility lower bounds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mechanism::{utility_against, Allocation, Instance};
use crate::valuation::{truncate, Valuation};
use crate::{Error, Result, FEASIBILITY_TOL};

use super::profile::Strategy;

/// Bids `o_ij * b'_ij` per resource with `b'` drawn uniformly from the given
/// price samples.
#[derive(Clone, Debug)]
pub struct Lemma1Deviation {
    scaled: Vec<Vec<f64>>,
}

impl Lemma1Deviation {
    pub fn new(optimal_fractions: &[f64], price_samples: &[Vec<f64>]) -> Result<Self> {
        if price_samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if optimal_fractions
            .iter()
            .any(|o| !(0.0..=1.0 + FEASIBILITY_TOL).contains(o))
        {
            return Err(Error::InvalidConfig(
                "optimal fractions must lie in [0, 1]".into(),
            ));
        }
        let m = optimal_fractions.len();
        let mut scaled = Vec::with_capacity(price_samples.len());
        for p in price_samples {
            if p.len() != m {
                return Err(Error::DimensionMismatch(
                    "price sample length differs from fraction vector".into(),
                ));
            }
            scaled.push(
                optimal_fractions
                    .iter()
                    .zip(p)
                    .map(|(o, b)| o * b)
                    .collect(),
            );
        }
        Ok(Self { scaled })
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.scaled
    }
}

impl Strategy for Lemma1Deviation {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.scaled[rng.gen_range(0..self.scaled.len())].clone()
    }
}

const SUBSET_GUARD: usize = 20;

/// An inclusion-maximal resource set `T` with
/// `v(1_T) < (1/lambda) * sum_{j in T} o_j p_j` (strict), or the empty set
/// when no nonempty set qualifies.
///
/// Augments one resource at a time, guided by an exhaustive reachability
/// table over subsets, so the returned set has no qualifying superset of any
/// size. A naive greedy walk can strand below a qualifying pair (the
/// qualifying family is not upward-closed), which would break the budget
/// feasibility of the truncated deviation downstream.
pub fn lemma3_truncation_set(
    v_trunc: &Valuation,
    optimal_fractions: &[f64],
    prices: &[f64],
    lambda: f64,
) -> Result<Vec<usize>> {
    let m = optimal_fractions.len();
    if prices.len() != m {
        return Err(Error::DimensionMismatch(
            "price vector length differs from fraction vector".into(),
        ));
    }
    if m > SUBSET_GUARD {
        return Err(Error::SubsetGuard {
            m,
            limit: SUBSET_GUARD,
        });
    }
    if lambda < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be >= 1, got {lambda}"
        )));
    }
    let size = 1usize << m;
    let mut qualifies = vec![false; size];
    let mut indicator = vec![0.0; m];
    for s in 1..size {
        for (j, x) in indicator.iter_mut().enumerate() {
            *x = if s & (1 << j) != 0 { 1.0 } else { 0.0 };
        }
        let mut rhs = 0.0;
        for j in 0..m {
            if s & (1 << j) != 0 {
                rhs += optimal_fractions[j] * prices[j];
            }
        }
        qualifies[s] = v_trunc.eval(&indicator)? < rhs / lambda;
    }
    // reach[s]: some superset of s (possibly s itself) qualifies.
    let mut reach = qualifies.clone();
    for s in (0..size).rev() {
        if reach[s] {
            continue;
        }
        for j in 0..m {
            if s & (1 << j) == 0 && reach[s | (1 << j)] {
                reach[s] = true;
                break;
            }
        }
    }
    if !reach[0] {
        return Ok(Vec::new());
    }
    let mut s = 0usize;
    'walk: loop {
        for j in 0..m {
            if s & (1 << j) == 0 && reach[s | (1 << j)] {
                s |= 1 << j;
                continue 'walk;
            }
        }
        break;
    }
    debug_assert!(qualifies[s]);
    Ok((0..m).filter(|j| s & (1 << j) != 0).collect())
}

/// Bids `(1/lambda) * o_ij * b'_ij` with `b'` drawn uniformly from truncated
/// price samples. Every pure bid in the support satisfies the budget; a
/// violation beyond the feasibility tolerance is an assertion failure,
/// because the truncation argument rules it out.
#[derive(Clone, Debug)]
pub struct Lemma3Deviation {
    bids: Vec<Vec<f64>>,
    budget: f64,
}

impl Lemma3Deviation {
    /// Builds the sampler from already-truncated price samples.
    pub fn new(
        optimal_fractions: &[f64],
        truncated_prices: &[Vec<f64>],
        lambda: f64,
        budget: f64,
    ) -> Result<Self> {
        if truncated_prices.is_empty() {
            return Err(Error::EmptySamples);
        }
        if lambda < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 1, got {lambda}"
            )));
        }
        let m = optimal_fractions.len();
        let mut bids = Vec::with_capacity(truncated_prices.len());
        for p in truncated_prices {
            if p.len() != m {
                return Err(Error::DimensionMismatch(
                    "price sample length differs from fraction vector".into(),
                ));
            }
            let bid: Vec<f64> = optimal_fractions
                .iter()
                .zip(p)
                .map(|(o, b)| o * b / lambda)
                .collect();
            let spend: f64 = bid.iter().sum();
            assert!(
                spend <= budget + FEASIBILITY_TOL,
                "truncated deviation spends {spend} over budget {budget}; \
                 truncation-set computation is broken"
            );
            bids.push(bid);
        }
        Ok(Self { bids, budget })
    }

    /// Truncates each raw price sample on its own maximal set, then builds
    /// the sampler. `v_capped` must already be the budget-suppressed
    /// valuation `min(v, c)`.
    pub fn from_raw_prices(
        v_capped: &Valuation,
        optimal_fractions: &[f64],
        price_samples: &[Vec<f64>],
        lambda: f64,
        budget: f64,
    ) -> Result<Self> {
        if price_samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut truncated = Vec::with_capacity(price_samples.len());
        for p in price_samples {
            let t = lemma3_truncation_set(v_capped, optimal_fractions, p, lambda)?;
            let mut tp = p.clone();
            for j in t {
                tp[j] = 0.0;
            }
            truncated.push(tp);
        }
        Self::new(optimal_fractions, &truncated, lambda, budget)
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.bids
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }
}

impl Strategy for Lemma3Deviation {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.bids[rng.gen_range(0..self.bids.len())].clone()
    }
}

/// Monte-Carlo comparison of a deviation bound: `lhs >= rhs` is the claim,
/// `slack = lhs - rhs` the measured margin.
#[derive(Clone, Debug)]
pub struct DeviationDiagnostic {
    pub per_agent: Vec<AgentDiagnostic>,
    /// Sum of the per-agent deviation utilities.
    pub lhs: f64,
    /// Value of the bound being tested.
    pub rhs: f64,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct AgentDiagnostic {
    pub agent: usize,
    pub deviation_utility: f64,
    pub bound: f64,
}

impl DeviationDiagnostic {
    pub fn slack(&self) -> f64 {
        self.lhs - self.rhs
    }
}

fn draw_price_samples(
    instance: &Instance,
    strategies: &[&dyn Strategy],
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<Vec<f64>>>, f64, Vec<f64>) {
    let n = instance.n();
    let m = instance.m();
    let mut per_agent: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(samples); n];
    let mut total_bids = 0.0;
    let mut column_totals = vec![0.0; m];
    for _ in 0..samples {
        let rows: Vec<Vec<f64>> = strategies.iter().map(|s| s.sample(rng)).collect();
        let mut totals = vec![0.0; m];
        for row in &rows {
            for (t, b) in totals.iter_mut().zip(row) {
                *t += b;
            }
        }
        total_bids += totals.iter().sum::<f64>();
        for (acc, t) in column_totals.iter_mut().zip(&totals) {
            *acc += t;
        }
        for (i, prices) in per_agent.iter_mut().enumerate() {
            prices.push(
                totals
                    .iter()
                    .zip(&rows[i])
                    .map(|(t, b)| (t - b).max(0.0))
                    .collect(),
            );
        }
    }
    let nf = samples as f64;
    (
        per_agent,
        total_bids / nf,
        column_totals.iter().map(|t| t / nf).collect(),
    )
}

fn mean_deviation_utility(
    instance: &Instance,
    i: usize,
    sampler: &dyn Strategy,
    strategies: &[&dyn Strategy],
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let m = instance.m();
    let mut buf = Vec::with_capacity(m);
    let mut total = 0.0;
    for _ in 0..samples {
        let bid = sampler.sample(rng);
        let mut opp = vec![0.0; m];
        for (k, s) in strategies.iter().enumerate() {
            if k == i {
                continue;
            }
            let row = s.sample(rng);
            for (o, b) in opp.iter_mut().zip(&row) {
                *o += b;
            }
        }
        total += utility_against(instance, i, &bid, &opp, &mut buf)?;
    }
    Ok(total / samples as f64)
}

/// Checks the proportional-sharing deviation bound: the summed deviation
/// utilities must cover half the optimal welfare minus the expected total
/// bids. `optimum` is the welfare-optimal allocation for the instance.
pub fn lemma1_diagnostic(
    instance: &Instance,
    strategies: &[&dyn Strategy],
    optimum: &Allocation,
    samples: usize,
    seed: u64,
) -> Result<DeviationDiagnostic> {
    if strategies.len() != instance.n() {
        return Err(Error::DimensionMismatch(
            "one strategy per agent required".into(),
        ));
    }
    if samples == 0 {
        return Err(Error::EmptySamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let (prices, expected_total_bids, _) =
        draw_price_samples(instance, strategies, samples, &mut rng);

    let mut per_agent = Vec::with_capacity(instance.n());
    let mut lhs = 0.0;
    let mut opt_value = 0.0;
    for i in 0..instance.n() {
        let sampler = Lemma1Deviation::new(optimum.agent(i), &prices[i])?;
        let mut eval_rng = ChaCha8Rng::seed_from_u64(seed);
        eval_rng.set_stream(1000 + i as u64);
        let u = mean_deviation_utility(instance, i, &sampler, strategies, samples, &mut eval_rng)?;
        opt_value += instance.valuation(i).eval(optimum.agent(i))?;
        lhs += u;
        per_agent.push(AgentDiagnostic {
            agent: i,
            deviation_utility: u,
            bound: f64::NAN,
        });
    }
    let rhs = 0.5 * opt_value - expected_total_bids;
    Ok(DeviationDiagnostic {
        per_agent,
        lhs,
        rhs,
        samples,
    })
}

/// Checks the budget-truncated deviation bound agent by agent:
/// `u_i(a_i, B_-i) >= v^c(o_i)/(lambda+1) - (1/lambda) sum_j o_ij E[sum_k b_kj]`.
/// Requires budgets; `optimum` should maximize effective welfare.
pub fn lemma3_diagnostic(
    instance: &Instance,
    strategies: &[&dyn Strategy],
    optimum: &Allocation,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<DeviationDiagnostic> {
    let budgets = instance.budgets().ok_or(Error::MissingBudgets)?.to_vec();
    if strategies.len() != instance.n() {
        return Err(Error::DimensionMismatch(
            "one strategy per agent required".into(),
        ));
    }
    if samples == 0 {
        return Err(Error::EmptySamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let (prices, _, expected_column_totals) =
        draw_price_samples(instance, strategies, samples, &mut rng);

    let mut per_agent = Vec::with_capacity(instance.n());
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..instance.n() {
        let capped = truncate(instance.valuation(i), budgets[i])?;
        let o_i = optimum.agent(i);
        let sampler =
            Lemma3Deviation::from_raw_prices(&capped, o_i, &prices[i], lambda, budgets[i])?;
        let mut eval_rng = ChaCha8Rng::seed_from_u64(seed);
        eval_rng.set_stream(2000 + i as u64);
        let u = mean_deviation_utility(instance, i, &sampler, strategies, samples, &mut eval_rng)?;
        let scaled_prices: f64 = o_i
            .iter()
            .zip(&expected_column_totals)
            .map(|(o, p)| o * p)
            .sum();
        let bound = capped.eval(o_i)? / (lambda + 1.0) - scaled_prices / lambda;
        lhs += u;
        rhs += bound;
        per_agent.push(AgentDiagnostic {
            agent: i,
            deviation_utility: u,
            bound,
        });
    }
    Ok(DeviationDiagnostic {
        per_agent,
        lhs,
        rhs,
        samples,
    })
}
