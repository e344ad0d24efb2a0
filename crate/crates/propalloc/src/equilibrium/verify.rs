//! Epsilon-equilibrium verifiers for pure, mixed, and Bayesian profiles.
//!
//! Pure profiles are checked by grid best responses against the fixed
//! opponents. Mixed profiles are checked by seeded Monte Carlo with common
//! random numbers across deviation candidates. Bayesian strategy maps with
//! finite supports are checked by exact enumeration over the product of
//! opponent types and bids, falling back to Monte Carlo when the term count
//! guard trips.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exec;
use crate::mechanism::{utility, utility_against, BidProfile, Instance};
use crate::{Error, Result};

use super::best_response::{best_response_inner, Opponents, ResponseProblem};
use super::profile::{Strategy, StrategyMap, TypeSpace};
use super::{AgentReport, DeviationPlan, EquilibriumReport, SearchConfig};

/// Monte-Carlo sampling parameters for the randomized verifiers.
#[derive(Clone, Copy, Debug)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

const MIN_MC_SAMPLES: usize = 100;

fn plan_description(cfg: &SearchConfig) -> String {
    match &cfg.deviations {
        DeviationPlan::JointGrid => format!(
            "joint grid {} (+{} refinements)",
            cfg.grid.describe(),
            cfg.refinement_rounds
        ),
        DeviationPlan::PerResource => format!(
            "per-resource grid {} (+{} refinements)",
            cfg.grid.describe(),
            cfg.refinement_rounds
        ),
        DeviationPlan::Explicit(lists) => format!(
            "explicit candidates ({})",
            lists.iter().map(|l| l.len()).sum::<usize>()
        ),
    }
}

/// For each agent, the maximum utility gain from deviating to the configured
/// candidate set while the others keep playing `b`. The incumbent bid is
/// always a candidate, so gains are nonnegative up to float noise.
pub fn verify_pure_ne(
    instance: &Instance,
    b: &BidProfile,
    cfg: &SearchConfig,
) -> Result<EquilibriumReport> {
    cfg.validate()?;
    let mut agents = Vec::with_capacity(instance.n());
    for i in 0..instance.n() {
        let u_cur = utility(instance, i, b)?;
        let problem = ResponseProblem::new(instance, i, &Opponents::Profile(b))?;
        let (bid, util) = match &cfg.deviations {
            DeviationPlan::Explicit(lists) => {
                let mut candidates = lists
                    .get(i)
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!("no explicit candidates for agent {i}"))
                    })?
                    .clone();
                candidates.push(b.row(i).to_vec());
                let (idx, util) = problem.argmax(&candidates)?;
                (candidates[idx].clone(), util)
            }
            _ => best_response_inner(instance, i, &problem, Some(b.row(i)), cfg)?,
        };
        agents.push(AgentReport {
            agent: i,
            eps: util - u_cur,
            ci_halfwidth: None,
            best_deviation: Some(bid),
        });
    }
    Ok(EquilibriumReport::from_agents(
        agents,
        plan_description(cfg),
        0,
        cfg.eps_tolerance,
    ))
}

/// Materializes the per-agent deviation candidates for sampled verifiers.
fn candidate_sets(
    instance: &Instance,
    cfg: &SearchConfig,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let m = instance.m();
    let mut sets = Vec::with_capacity(instance.n());
    for i in 0..instance.n() {
        let raw: Vec<Vec<f64>> = match &cfg.deviations {
            DeviationPlan::Explicit(lists) => lists
                .get(i)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("no explicit candidates for agent {i}"))
                })?
                .clone(),
            DeviationPlan::JointGrid => {
                let points = cfg.grid.points();
                let combos = (points.len() as f64).powi(m as i32);
                if combos > 1e7 {
                    return Err(Error::EnumerationGuard(format!(
                        "{combos:.3e} joint candidates for agent {i} (limit 1e7)"
                    )));
                }
                let mut out = Vec::with_capacity(combos as usize);
                let radix = points.len();
                for mut index in 0..combos as usize {
                    let mut bid = Vec::with_capacity(m);
                    for _ in 0..m {
                        bid.push(points[index % radix]);
                        index /= radix;
                    }
                    out.push(bid);
                }
                out
            }
            DeviationPlan::PerResource => {
                return Err(Error::InvalidConfig(
                    "per-resource deviations need a pure incumbent; \
                     use a joint grid or explicit candidates for mixed profiles"
                        .into(),
                ));
            }
        };
        let budget = instance.budget(i);
        let filtered: Vec<Vec<f64>> = raw
            .into_iter()
            .filter(|bid| bid.iter().sum::<f64>() <= budget)
            .collect();
        if filtered.is_empty() {
            return Err(Error::BudgetInfeasibleGrid { agent: i });
        }
        sets.push(filtered);
    }
    Ok(sets)
}

struct ChunkStats {
    /// Per agent: sum of realized equilibrium utilities.
    eq_sum: Vec<f64>,
    /// Per agent, per candidate: sum of (candidate minus realized) utility.
    diff_sum: Vec<Vec<f64>>,
    /// Same, squared, for the normal-approximation interval.
    diff_sq_sum: Vec<Vec<f64>>,
}

/// Monte-Carlo verification of a mixed profile given per-agent samplers.
///
/// One joint draw per sample supplies both the realized utilities and,
/// through common random numbers, every candidate's paired utility
/// difference; `eps_i` is the largest mean difference over the candidate
/// set and the half-width is the 95% normal interval of the best candidate's
/// paired difference.
pub fn verify_mixed_ne(
    instance: &Instance,
    strategies: &[&dyn Strategy],
    mc: McConfig,
    cfg: &SearchConfig,
) -> Result<EquilibriumReport> {
    cfg.validate()?;
    if strategies.len() != instance.n() {
        return Err(Error::DimensionMismatch(
            "one strategy per agent required".into(),
        ));
    }
    if mc.samples < MIN_MC_SAMPLES {
        return Err(Error::TooFewSamples {
            got: mc.samples,
            min: MIN_MC_SAMPLES,
        });
    }
    let n = instance.n();
    let m = instance.m();
    let candidates = candidate_sets(instance, cfg)?;

    let chunk = exec::DEFAULT_CHUNK;
    let partials: Vec<Result<ChunkStats>> = exec::map_chunks(mc.samples, chunk, |c, range| {
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(c as u64 + 1);
        let mut stats = ChunkStats {
            eq_sum: vec![0.0; n],
            diff_sum: candidates.iter().map(|s| vec![0.0; s.len()]).collect(),
            diff_sq_sum: candidates.iter().map(|s| vec![0.0; s.len()]).collect(),
        };
        let mut buf = Vec::with_capacity(m);
        let mut totals = vec![0.0; m];
        let mut opp = vec![0.0; m];
        for _ in range {
            let rows: Vec<Vec<f64>> = strategies.iter().map(|s| s.sample(&mut rng)).collect();
            totals.iter_mut().for_each(|t| *t = 0.0);
            for row in &rows {
                for (t, b) in totals.iter_mut().zip(row) {
                    *t += b;
                }
            }
            for i in 0..n {
                for j in 0..m {
                    opp[j] = (totals[j] - rows[i][j]).max(0.0);
                }
                let u_eq = utility_against(instance, i, &rows[i], &opp, &mut buf)?;
                stats.eq_sum[i] += u_eq;
                for (cidx, cand) in candidates[i].iter().enumerate() {
                    let u = utility_against(instance, i, cand, &opp, &mut buf)?;
                    let d = u - u_eq;
                    stats.diff_sum[i][cidx] += d;
                    stats.diff_sq_sum[i][cidx] += d * d;
                }
            }
        }
        Ok(stats)
    });

    let mut eq_sum = vec![0.0; n];
    let mut diff_sum: Vec<Vec<f64>> = candidates.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut diff_sq_sum: Vec<Vec<f64>> = candidates.iter().map(|s| vec![0.0; s.len()]).collect();
    for partial in partials {
        let stats = partial?;
        for i in 0..n {
            eq_sum[i] += stats.eq_sum[i];
            for c in 0..diff_sum[i].len() {
                diff_sum[i][c] += stats.diff_sum[i][c];
                diff_sq_sum[i][c] += stats.diff_sq_sum[i][c];
            }
        }
    }

    let nf = mc.samples as f64;
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let (mut best_c, mut best_mean) = (0usize, f64::NEG_INFINITY);
        for (c, s) in diff_sum[i].iter().enumerate() {
            let mean = s / nf;
            if mean > best_mean {
                best_mean = mean;
                best_c = c;
            }
        }
        let var = ((diff_sq_sum[i][best_c] - diff_sum[i][best_c].powi(2) / nf)
            / (nf - 1.0))
            .max(0.0);
        agents.push(AgentReport {
            agent: i,
            eps: best_mean,
            ci_halfwidth: Some(1.96 * (var / nf).sqrt()),
            best_deviation: Some(candidates[i][best_c].clone()),
        });
    }
    Ok(EquilibriumReport::from_agents(
        agents,
        plan_description(cfg),
        mc.samples,
        cfg.eps_tolerance,
    ))
}

/// Seeded Monte-Carlo estimate of the expected social welfare of a sampled
/// profile; returns (mean, standard error).
pub fn estimate_expected_welfare(
    instance: &Instance,
    strategies: &[&dyn Strategy],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if strategies.len() != instance.n() {
        return Err(Error::DimensionMismatch(
            "one strategy per agent required".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::TooFewSamples {
            got: samples,
            min: 2,
        });
    }
    let n = instance.n();
    let m = instance.m();
    let partials: Vec<Result<(f64, f64)>> =
        exec::map_chunks(samples, exec::DEFAULT_CHUNK, |c, range| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            let mut buf = Vec::with_capacity(m);
            let mut totals = vec![0.0; m];
            let mut opp = vec![0.0; m];
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in range {
                let rows: Vec<Vec<f64>> = strategies.iter().map(|s| s.sample(&mut rng)).collect();
                totals.iter_mut().for_each(|t| *t = 0.0);
                for row in &rows {
                    for (t, b) in totals.iter_mut().zip(row) {
                        *t += b;
                    }
                }
                let mut sw = 0.0;
                for i in 0..n {
                    for j in 0..m {
                        opp[j] = (totals[j] - rows[i][j]).max(0.0);
                    }
                    // Value = utility + payment.
                    let u = utility_against(instance, i, &rows[i], &opp, &mut buf)?;
                    sw += u + rows[i].iter().sum::<f64>();
                }
                sum += sw;
                sq += sw * sw;
            }
            Ok((sum, sq))
        });
    let (mut sum, mut sq) = (0.0, 0.0);
    for partial in partials {
        let (s, s2) = partial?;
        sum += s;
        sq += s2;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// One opponent context for interim expectations: a weight and the induced
/// column totals.
type OpponentTerm = (f64, Vec<f64>);

const EXACT_TERM_GUARD: usize = 10_000_000;

fn exact_opponent_terms(
    instance: &Instance,
    types: &TypeSpace,
    map: &StrategyMap,
    i: usize,
) -> Result<Vec<OpponentTerm>> {
    let m = instance.m();
    let mut terms: Vec<OpponentTerm> = vec![(1.0, vec![0.0; m])];
    for k in 0..instance.n() {
        if k == i {
            continue;
        }
        let mut options: Vec<(f64, &[f64])> = Vec::new();
        for (t, ty) in types.agent(k).iter().enumerate() {
            for (bid, q) in map.dist(k, t).support() {
                options.push((ty.probability * q, bid));
            }
        }
        let mut next = Vec::with_capacity(terms.len() * options.len());
        if terms.len().saturating_mul(options.len()) > EXACT_TERM_GUARD {
            return Err(Error::EnumerationGuard(format!(
                "more than {EXACT_TERM_GUARD} exact interim terms for agent {i}; \
                 pass Monte-Carlo parameters instead"
            )));
        }
        for (w, totals) in &terms {
            for (q, bid) in &options {
                let mut t = totals.clone();
                for (tj, bj) in t.iter_mut().zip(*bid) {
                    *tj += bj;
                }
                next.push((w * q, t));
            }
        }
        terms = next;
    }
    Ok(terms)
}

fn sampled_opponent_terms(
    instance: &Instance,
    types: &TypeSpace,
    map: &StrategyMap,
    i: usize,
    mc: McConfig,
) -> Result<Vec<OpponentTerm>> {
    if mc.samples < MIN_MC_SAMPLES {
        return Err(Error::TooFewSamples {
            got: mc.samples,
            min: MIN_MC_SAMPLES,
        });
    }
    let m = instance.m();
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(i as u64 + 1);
    let w = 1.0 / mc.samples as f64;
    let mut terms = Vec::with_capacity(mc.samples);
    for _ in 0..mc.samples {
        let mut totals = vec![0.0; m];
        for k in 0..instance.n() {
            if k == i {
                continue;
            }
            // Draw a type, then a bid from its distribution.
            let u: f64 = rand::Rng::gen(&mut rng);
            let mut acc = 0.0;
            let mut chosen = types.agent(k).len() - 1;
            for (t, ty) in types.agent(k).iter().enumerate() {
                acc += ty.probability;
                if u < acc {
                    chosen = t;
                    break;
                }
            }
            let bid = map.dist(k, chosen).sample_ref(&mut rng);
            for (tj, bj) in totals.iter_mut().zip(bid) {
                *tj += bj;
            }
        }
        terms.push((w, totals));
    }
    Ok(terms)
}

/// Interim utility of a fixed bid for agent `i` with valuation already
/// realized on `instance`, against weighted opponent terms.
fn interim_utility(
    instance: &Instance,
    i: usize,
    bid: &[f64],
    terms: &[OpponentTerm],
    buf: &mut Vec<f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for (w, totals) in terms {
        total += w * utility_against(instance, i, bid, totals, buf)?;
    }
    Ok(total)
}

/// Verifies a Bayesian strategy map on a finite type space.
///
/// For every agent and type, the interim utility of the prescribed bid
/// distribution is compared against the best deviation on the configured
/// plan; expectations are exact products over opponent types and supports
/// unless the term guard trips, in which case `mc` supplies a sampled
/// opponent pool. `eps` is the maximum interim gain over agents and types.
pub fn verify_bayesian_ne(
    instance: &Instance,
    types: &TypeSpace,
    map: &StrategyMap,
    cfg: &SearchConfig,
    mc: Option<McConfig>,
) -> Result<EquilibriumReport> {
    cfg.validate()?;
    map.validate_against(types)?;
    if types.n() != instance.n() {
        return Err(Error::DimensionMismatch(
            "type space agent count differs from instance".into(),
        ));
    }
    let m = instance.m();
    let mut agents = Vec::with_capacity(instance.n());
    let mut samples_used = 0usize;
    for i in 0..instance.n() {
        let terms = match (exact_opponent_terms(instance, types, map, i), mc) {
            (Ok(terms), _) => terms,
            (Err(Error::EnumerationGuard(_)), Some(mc)) => {
                samples_used = samples_used.max(mc.samples);
                sampled_opponent_terms(instance, types, map, i, mc)?
            }
            (Err(e), _) => return Err(e),
        };
        let mut worst: (f64, Option<Vec<f64>>) = (f64::NEG_INFINITY, None);
        for (t, ty) in types.agent(i).iter().enumerate() {
            let realized = {
                let mut r = instance.with_valuation(i, ty.valuation.clone());
                if let Some(c) = ty.budget {
                    r = r.with_budget(i, c);
                }
                r
            };
            let budget = realized.budget(i);
            let own = map.dist(i, t);
            let mut buf = Vec::with_capacity(m);
            let mut u_cur = 0.0;
            for (bid, q) in own.support() {
                u_cur += q * interim_utility(&realized, i, bid, &terms, &mut buf)?;
            }
            let (gain, bid) = match &cfg.deviations {
                DeviationPlan::PerResource => {
                    if own.support().len() != 1 {
                        return Err(Error::InvalidConfig(
                            "per-resource deviations need point-mass own strategies".into(),
                        ));
                    }
                    let incumbent = own.support()[0].0.clone();
                    let mut best = (u_cur, incumbent.clone());
                    for j in 0..m {
                        let spent: f64 = incumbent.iter().sum::<f64>() - incumbent[j];
                        let mut probe = incumbent.clone();
                        let (y, u) = super::best_response::search_1d(
                            &cfg.grid,
                            cfg.refinement_rounds,
                            |y| {
                                if spent + y > budget {
                                    return Ok(f64::NEG_INFINITY);
                                }
                                probe[j] = y;
                                interim_utility(&realized, i, &probe, &terms, &mut buf)
                            },
                        )?;
                        probe[j] = incumbent[j];
                        if u > best.0 {
                            let mut b = incumbent.clone();
                            b[j] = y;
                            best = (u, b);
                        }
                    }
                    (best.0 - u_cur, best.1)
                }
                _ => {
                    // Joint grids / explicit lists; own support points are
                    // always candidates so the gain is nonnegative.
                    let mut candidates: Vec<Vec<f64>> = match &cfg.deviations {
                        DeviationPlan::Explicit(lists) => lists
                            .get(i)
                            .ok_or_else(|| {
                                Error::InvalidConfig(format!(
                                    "no explicit candidates for agent {i}"
                                ))
                            })?
                            .clone(),
                        _ => {
                            let points = cfg.grid.points();
                            let combos = (points.len() as f64).powi(m as i32);
                            if combos > 1e7 {
                                return Err(Error::EnumerationGuard(format!(
                                    "{combos:.3e} joint candidates (limit 1e7)"
                                )));
                            }
                            let mut out = Vec::with_capacity(combos as usize);
                            let radix = points.len();
                            for mut index in 0..combos as usize {
                                let mut bid = Vec::with_capacity(m);
                                for _ in 0..m {
                                    bid.push(points[index % radix]);
                                    index /= radix;
                                }
                                out.push(bid);
                            }
                            out
                        }
                    };
                    for (bid, _) in own.support() {
                        candidates.push(bid.clone());
                    }
                    let mut best = (f64::NEG_INFINITY, Vec::new());
                    for cand in candidates {
                        if cand.iter().sum::<f64>() > budget {
                            continue;
                        }
                        let u = interim_utility(&realized, i, &cand, &terms, &mut buf)?;
                        if u > best.0 {
                            best = (u, cand);
                        }
                    }
                    if best.1.is_empty() {
                        return Err(Error::BudgetInfeasibleGrid { agent: i });
                    }
                    (best.0 - u_cur, best.1)
                }
            };
            if gain > worst.0 {
                worst = (gain, Some(bid));
            }
        }
        agents.push(AgentReport {
            agent: i,
            eps: worst.0,
            ci_halfwidth: None,
            best_deviation: worst.1,
        });
    }
    Ok(EquilibriumReport::from_agents(
        agents,
        plan_description(cfg),
        samples_used,
        cfg.eps_tolerance,
    ))
}
