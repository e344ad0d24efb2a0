//! Multiplicative-weights (hedge) learning with full-information feedback.
//!
//! Each round every player samples an action from her current weights, then
//! observes the counterfactual utility of *every* grid action against the
//! realized play of the others and updates multiplicatively. The empirical
//! distribution of the sampled joint actions is returned together with each
//! player's external regret, so a low-regret run is an approximate
//! coarse-correlated equilibrium by construction.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::mechanism::{utility_against, BidProfile, Instance};
use crate::{Error, Result};

use super::profile::CorrelatedProfile;
use super::Grid;

/// Learning-rate schedule. `Auto` is the horizon-aware choice
/// `eta = sqrt(8 ln K / T)` per player with `K` grid actions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    Auto,
    Fixed(f64),
}

const ACTION_GUARD: usize = 100_000;

/// Result of a hedge run on a bid game.
#[derive(Clone, Debug)]
pub struct HedgeOutcome {
    /// Empirical distribution of the sampled joint bid profiles.
    pub profile: CorrelatedProfile,
    /// Total external regret per agent over the run.
    pub regrets: Vec<f64>,
    pub rounds: usize,
    /// Realized average utility per agent.
    pub avg_utilities: Vec<f64>,
}

impl HedgeOutcome {
    /// Average per-round regret of agent `i`.
    pub fn regret_rate(&self, i: usize) -> f64 {
        self.regrets[i] / self.rounds as f64
    }
}

pub(crate) struct HedgeCoreOutcome {
    pub counts: BTreeMap<Vec<u32>, u32>,
    pub regrets: Vec<f64>,
    pub realized_avg: Vec<f64>,
    /// Per player, how many rounds each action was played.
    pub play_counts: Vec<Vec<u32>>,
}

/// Generic hedge loop over indexed action sets. `fill(player, joint, out)`
/// writes the counterfactual utility of each of `player`'s actions against
/// the joint action profile (which includes the player's own sampled index;
/// implementations ignore it for their own column).
pub(crate) fn hedge_core<F>(
    action_counts: &[usize],
    fill: F,
    rounds: usize,
    schedule: StepSchedule,
    seed: u64,
) -> Result<HedgeCoreOutcome>
where
    F: Fn(usize, &[usize], &mut [f64]) -> Result<()>,
{
    if rounds == 0 {
        return Err(Error::InvalidConfig("need at least one round".into()));
    }
    for (p, k) in action_counts.iter().enumerate() {
        if *k == 0 {
            return Err(Error::InvalidConfig(format!("player {p} has no actions")));
        }
        if *k > ACTION_GUARD {
            return Err(Error::ActionGuard {
                agent: p,
                actions: *k,
                limit: ACTION_GUARD,
            });
        }
    }
    let players = action_counts.len();
    let etas: Vec<f64> = action_counts
        .iter()
        .map(|k| match schedule {
            StepSchedule::Auto => (8.0 * (*k as f64).ln().max(1.0) / rounds as f64).sqrt(),
            StepSchedule::Fixed(eta) => eta,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores: Vec<Vec<f64>> = action_counts.iter().map(|k| vec![0.0; *k]).collect();
    let mut cumulative: Vec<Vec<f64>> = action_counts.iter().map(|k| vec![0.0; *k]).collect();
    let mut realized: Vec<f64> = vec![0.0; players];
    let mut play_counts: Vec<Vec<u32>> = action_counts.iter().map(|k| vec![0u32; *k]).collect();
    let mut counts: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut joint = vec![0usize; players];
    let mut utilities: Vec<Vec<f64>> = action_counts.iter().map(|k| vec![0.0; *k]).collect();

    for _ in 0..rounds {
        for p in 0..players {
            let s = &scores[p];
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            probs.clear();
            probs.extend(s.iter().map(|v| (v - max).exp()));
            let total: f64 = probs.iter().sum();
            let u: f64 = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = s.len() - 1;
            for (a, w) in probs.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = a;
                    break;
                }
            }
            joint[p] = chosen;
        }
        counts
            .entry(joint.iter().map(|a| *a as u32).collect())
            .and_modify(|c| *c += 1)
            .or_insert(1);
        for (p, chosen) in joint.iter().enumerate() {
            play_counts[p][*chosen] += 1;
        }
        for p in 0..players {
            fill(p, &joint, &mut utilities[p])?;
            let u = &utilities[p];
            realized[p] += u[joint[p]];
            let eta = etas[p];
            for ((c, s), v) in cumulative[p].iter_mut().zip(&mut scores[p]).zip(u) {
                *c += v;
                *s += eta * v;
            }
        }
    }

    let regrets = (0..players)
        .map(|p| {
            let best = cumulative[p]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            best - realized[p]
        })
        .collect();
    Ok(HedgeCoreOutcome {
        counts,
        regrets,
        realized_avg: realized.iter().map(|r| r / rounds as f64).collect(),
        play_counts,
    })
}

/// Outcome of a hedge run on the agent form of a finite Bayesian game: one
/// learning player per (agent, type) pair, utilities taken in interim
/// expectation over the opponents' types each round.
#[derive(Clone, Debug)]
pub struct BayesianHedgeOutcome {
    /// Per agent, per type: average interim expected value of the received
    /// allocation under the realized play.
    pub interim_values: Vec<Vec<f64>>,
    /// Per agent, per type: average interim utility.
    pub interim_utilities: Vec<Vec<f64>>,
    /// Per agent, per type: total external regret of the (agent, type)
    /// player.
    pub regrets: Vec<Vec<f64>>,
    pub rounds: usize,
}

impl BayesianHedgeOutcome {
    pub fn max_regret_rate(&self) -> f64 {
        self.regrets
            .iter()
            .flatten()
            .map(|r| r / self.rounds as f64)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Hedge on the agent form of a Bayesian bid game. `action_sets[i][t]` is
/// the bid grid of agent `i`'s type `t` (already clipped to the type's
/// budget by the caller). Counterfactual utilities average over the full
/// product of opponent types, with opponents playing their sampled actions.
pub fn bayesian_hedge_learn(
    instance: &Instance,
    types: &crate::equilibrium::profile::TypeSpace,
    action_sets: &[Vec<Vec<Vec<f64>>>],
    rounds: usize,
    schedule: StepSchedule,
    seed: u64,
) -> Result<BayesianHedgeOutcome> {
    let n = instance.n();
    if types.n() != n || action_sets.len() != n {
        return Err(Error::DimensionMismatch(
            "types and action sets must cover every agent".into(),
        ));
    }
    let m = instance.m();
    // Flatten (agent, type) into player indices.
    let mut base = vec![0usize; n];
    let mut players = 0usize;
    for i in 0..n {
        if action_sets[i].len() != types.agent(i).len() {
            return Err(Error::DimensionMismatch(format!(
                "agent {i}: one action set per type required"
            )));
        }
        base[i] = players;
        players += types.agent(i).len();
    }
    let mut counts = Vec::with_capacity(players);
    let mut realized_instances = Vec::with_capacity(players);
    let mut owner = Vec::with_capacity(players);
    for i in 0..n {
        for (t, ty) in types.agent(i).iter().enumerate() {
            counts.push(action_sets[i][t].len());
            realized_instances.push(instance.with_valuation(i, ty.valuation.clone()));
            owner.push((i, t));
        }
    }
    // Opponent type profiles per agent: (joint probability, type per agent).
    let mut opponent_profiles: Vec<Vec<(f64, Vec<usize>)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut combos: Vec<(f64, Vec<usize>)> = vec![(1.0, vec![0; n])];
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut next = Vec::with_capacity(combos.len() * types.agent(k).len());
            for (w, choice) in &combos {
                for (t, ty) in types.agent(k).iter().enumerate() {
                    let mut c = choice.clone();
                    c[k] = t;
                    next.push((w * ty.probability, c));
                }
            }
            combos = next;
        }
        opponent_profiles.push(combos);
    }

    let fill = |p: usize, joint: &[usize], out: &mut [f64]| -> Result<()> {
        let (i, t) = owner[p];
        let realized = &realized_instances[p];
        let actions = &action_sets[i][t];
        // Pre-compute opponent totals per type combo.
        let combos = &opponent_profiles[i];
        let mut contexts: Vec<(f64, Vec<f64>)> = Vec::with_capacity(combos.len());
        for (w, choice) in combos {
            let mut totals = vec![0.0; m];
            for k in 0..n {
                if k == i {
                    continue;
                }
                let tk = choice[k];
                let bid = &action_sets[k][tk][joint[base[k] + tk]];
                for (tj, bj) in totals.iter_mut().zip(bid) {
                    *tj += bj;
                }
            }
            contexts.push((*w, totals));
        }
        let utilities: Vec<Result<f64>> = exec::map_indexed(actions.len(), 64, |a| {
            let mut buf = Vec::with_capacity(m);
            let mut acc = 0.0;
            for (w, totals) in &contexts {
                acc += w * utility_against(realized, i, &actions[a], totals, &mut buf)?;
            }
            Ok(acc)
        });
        for (slot, u) in out.iter_mut().zip(utilities) {
            *slot = u?;
        }
        Ok(())
    };

    let core = hedge_core(&counts, fill, rounds, schedule, seed)?;
    let mut interim_values = Vec::with_capacity(n);
    let mut interim_utilities = Vec::with_capacity(n);
    let mut regrets = Vec::with_capacity(n);
    for i in 0..n {
        let mut values = Vec::new();
        let mut utils = Vec::new();
        let mut regs = Vec::new();
        for t in 0..types.agent(i).len() {
            let p = base[i] + t;
            let avg_payment: f64 = core.play_counts[p]
                .iter()
                .zip(&action_sets[i][t])
                .map(|(c, bid)| *c as f64 * bid.iter().sum::<f64>())
                .sum::<f64>()
                / rounds as f64;
            utils.push(core.realized_avg[p]);
            values.push(core.realized_avg[p] + avg_payment);
            regs.push(core.regrets[p]);
        }
        interim_values.push(values);
        interim_utilities.push(utils);
        regrets.push(regs);
    }
    Ok(BayesianHedgeOutcome {
        interim_values,
        interim_utilities,
        regrets,
        rounds,
    })
}

/// Cartesian bid grid over `m` resources, clipped to the budget simplex.
pub fn bid_grid_actions(grid: &Grid, m: usize, budget: f64) -> Result<Vec<Vec<f64>>> {
    let points = grid.points();
    let combos = (points.len() as f64).powi(m as i32);
    if combos > ACTION_GUARD as f64 {
        return Err(Error::EnumerationGuard(format!(
            "{combos:.3e} grid actions (limit {ACTION_GUARD})"
        )));
    }
    let radix = points.len();
    let mut out = Vec::new();
    for mut index in 0..combos as usize {
        let mut bid = Vec::with_capacity(m);
        for _ in 0..m {
            bid.push(points[index % radix]);
            index /= radix;
        }
        if bid.iter().sum::<f64>() <= budget {
            out.push(bid);
        }
    }
    if out.is_empty() {
        return Err(Error::EnumerationGuard(
            "budget excludes every grid action".into(),
        ));
    }
    Ok(out)
}

/// Hedge on the bid game: each agent's action set is a finite list of bid
/// vectors. Returns the empirical joint distribution and per-agent regrets.
pub fn hedge_learn(
    instance: &Instance,
    action_sets: &[Vec<Vec<f64>>],
    rounds: usize,
    schedule: StepSchedule,
    seed: u64,
) -> Result<HedgeOutcome> {
    if action_sets.len() != instance.n() {
        return Err(Error::DimensionMismatch(
            "one action set per agent required".into(),
        ));
    }
    let m = instance.m();
    for (i, set) in action_sets.iter().enumerate() {
        if set.iter().any(|b| b.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "agent {i} has actions of the wrong length"
            )));
        }
        let budget = instance.budget(i);
        if set.iter().any(|b| b.iter().sum::<f64>() > budget) {
            return Err(Error::InvalidConfig(format!(
                "agent {i} has budget-infeasible actions in her grid"
            )));
        }
    }
    let counts: Vec<usize> = action_sets.iter().map(|s| s.len()).collect();

    let fill = |p: usize, joint: &[usize], out: &mut [f64]| -> Result<()> {
        let mut totals = vec![0.0; m];
        for (k, set) in action_sets.iter().enumerate() {
            if k == p {
                continue;
            }
            for (t, b) in totals.iter_mut().zip(&set[joint[k]]) {
                *t += b;
            }
        }
        let actions = &action_sets[p];
        let utilities: Vec<Result<f64>> = exec::map_indexed(actions.len(), 256, |a| {
            let mut buf = Vec::with_capacity(m);
            utility_against(instance, p, &actions[a], &totals, &mut buf)
        });
        for (slot, u) in out.iter_mut().zip(utilities) {
            *slot = u?;
        }
        Ok(())
    };

    let core = hedge_core(&counts, fill, rounds, schedule, seed)?;
    let mut support = Vec::with_capacity(core.counts.len());
    for (key, count) in &core.counts {
        let rows: Vec<Vec<f64>> = key
            .iter()
            .enumerate()
            .map(|(i, a)| action_sets[i][*a as usize].clone())
            .collect();
        support.push((BidProfile::new(rows)?, *count as f64 / rounds as f64));
    }
    Ok(HedgeOutcome {
        profile: CorrelatedProfile::new(support)?,
        regrets: core.regrets,
        rounds,
        avg_utilities: core.realized_avg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::Valuation;

    fn linear(w: &[f64]) -> Valuation {
        Valuation::Linear {
            weights: w.to_vec(),
        }
    }

    #[test]
    fn single_agent_converges_to_argmax() {
        // Alone on the resource every positive bid wins everything, so the
        // argmax is the cheapest positive bid; regret rate vanishes.
        let inst = Instance::standard(vec![linear(&[1.0])], 1).unwrap();
        let actions = bid_grid_actions(&Grid::range(0.0, 0.5, 0.05).unwrap(), 1, f64::INFINITY)
            .unwrap();
        let out = hedge_learn(&inst, &[actions], 20_000, StepSchedule::Auto, 3).unwrap();
        assert!(out.regret_rate(0) < 5e-3, "rate {}", out.regret_rate(0));
        // Mass concentrates on the cheapest positive bid (0.05): under the
        // split-equally tie-break a zero bid still wins the whole resource
        // for a lone agent, so both 0 and 0.05 are near-optimal; the argmax
        // of realized utility must be within one grid step of zero.
        let mean_bid: f64 = out
            .profile
            .support()
            .iter()
            .map(|(b, p)| p * b.get(0, 0))
            .sum();
        assert!(mean_bid < 0.1, "mean bid {mean_bid}");
    }

    #[test]
    fn symmetric_duopoly_concentrates_near_quarter() {
        let inst = Instance::standard(vec![linear(&[1.0]), linear(&[1.0])], 1).unwrap();
        let grid = Grid::range(0.0, 0.5, 0.01).unwrap();
        let actions = bid_grid_actions(&grid, 1, f64::INFINITY).unwrap();
        let out = hedge_learn(
            &inst,
            &[actions.clone(), actions],
            100_000,
            StepSchedule::Auto,
            7,
        )
        .unwrap();
        for i in 0..2 {
            assert!(
                out.regret_rate(i) <= 5e-3,
                "agent {i} regret rate {}",
                out.regret_rate(i)
            );
        }
        let mean_bid: f64 = out
            .profile
            .support()
            .iter()
            .map(|(b, p)| p * (b.get(0, 0) + b.get(1, 0)) / 2.0)
            .sum();
        assert!(
            (mean_bid - 0.25).abs() < 0.02,
            "mean bid {mean_bid} should be near 0.25"
        );
    }

    #[test]
    fn action_guard_trips() {
        let inst = Instance::standard(vec![linear(&[1.0, 1.0, 1.0])], 3).unwrap();
        let grid = Grid::range(0.0, 1.0, 0.01).unwrap();
        assert!(matches!(
            bid_grid_actions(&grid, 3, f64::INFINITY),
            Err(Error::EnumerationGuard(_))
        ));
        let huge = vec![vec![vec![0.0; 3]; ACTION_GUARD + 1]];
        assert!(matches!(
            hedge_learn(&inst, &huge, 10, StepSchedule::Auto, 0),
            Err(Error::ActionGuard { .. })
        ));
    }

    #[test]
    fn identical_seeds_reproduce_identical_outcomes() {
        let inst = Instance::standard(vec![linear(&[1.0]), linear(&[0.7])], 1).unwrap();
        let actions = bid_grid_actions(&Grid::range(0.0, 0.3, 0.03).unwrap(), 1, f64::INFINITY)
            .unwrap();
        let a = hedge_learn(&inst, &[actions.clone(), actions.clone()], 5_000, StepSchedule::Auto, 11)
            .unwrap();
        let b = hedge_learn(&inst, &[actions.clone(), actions], 5_000, StepSchedule::Auto, 11)
            .unwrap();
        assert_eq!(a.regrets, b.regrets);
        assert_eq!(a.avg_utilities, b.avg_utilities);
        assert_eq!(a.profile.support().len(), b.profile.support().len());
    }
}
