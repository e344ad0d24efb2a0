//! Numeric best responses: a closed form for linear single-resource agents
//! and coarse-to-fine grid search for everything else.

use crate::exec;
use crate::mechanism::{utility_against, BidProfile, Instance};
use crate::{Error, Result};

use super::{DeviationPlan, Grid, SearchConfig};

/// Closed-form best response of a linear agent on one resource: maximizing
/// `v * b/(b+p) - b` gives `b* = sqrt(v p) - p` when positive.
///
/// At `p = 0` the supremum is approached as the bid tends to zero from above
/// and no maximizer exists; this returns the degenerate convention `0`
/// (utility at an exact zero bid depends on the tie-break rule).
pub fn best_response_linear(v_slope: f64, p: f64) -> f64 {
    assert!(v_slope >= 0.0 && p >= 0.0, "slope and price must be >= 0");
    if p == 0.0 {
        return 0.0;
    }
    ((v_slope * p).sqrt() - p).max(0.0)
}

/// What the responding agent plays against: a fixed pure profile or a set of
/// pre-drawn opponent price vectors (column totals of the other agents),
/// in which case expected utility is the sample average.
pub enum Opponents<'a> {
    Profile(&'a BidProfile),
    PriceSamples(&'a [Vec<f64>]),
}

pub(crate) struct ResponseProblem<'a> {
    instance: &'a Instance,
    agent: usize,
    prices: Vec<Vec<f64>>,
    budget: f64,
}

impl<'a> ResponseProblem<'a> {
    pub(crate) fn new(instance: &'a Instance, agent: usize, opp: &Opponents) -> Result<Self> {
        let prices = match opp {
            Opponents::Profile(b) => {
                if b.n() != instance.n() || b.m() != instance.m() {
                    return Err(Error::DimensionMismatch(
                        "opponent profile shape differs from instance".into(),
                    ));
                }
                vec![b.opponent_totals(agent)]
            }
            Opponents::PriceSamples(samples) => {
                if samples.is_empty() {
                    return Err(Error::EmptySamples);
                }
                if samples.iter().any(|p| p.len() != instance.m()) {
                    return Err(Error::DimensionMismatch(
                        "price sample length differs from instance".into(),
                    ));
                }
                samples.to_vec()
            }
        };
        Ok(Self {
            instance,
            agent,
            prices,
            budget: instance.budget(agent),
        })
    }

    pub(crate) fn feasible(&self, bid: &[f64]) -> bool {
        bid.iter().sum::<f64>() <= self.budget
    }

    /// Mean utility of `bid` over the stored price vectors.
    pub(crate) fn mean_utility(&self, bid: &[f64]) -> Result<f64> {
        let mut buf = Vec::with_capacity(self.instance.m());
        let mut total = 0.0;
        for p in &self.prices {
            total += utility_against(self.instance, self.agent, bid, p, &mut buf)?;
        }
        Ok(total / self.prices.len() as f64)
    }

    /// Evaluates candidates in parallel and returns `(index, utility)` of the
    /// best one, first index winning ties. Infeasible candidates score
    /// negative infinity.
    pub(crate) fn argmax(&self, candidates: &[Vec<f64>]) -> Result<(usize, f64)> {
        let utilities: Vec<Result<f64>> = exec::map_indexed(candidates.len(), 16, |c| {
            if !self.feasible(&candidates[c]) {
                return Ok(f64::NEG_INFINITY);
            }
            self.mean_utility(&candidates[c])
        });
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (c, u) in utilities.into_iter().enumerate() {
            let u = u?;
            if u > best.1 {
                best = (c, u);
            }
        }
        if best.0 == usize::MAX {
            return Err(Error::BudgetInfeasibleGrid { agent: self.agent });
        }
        Ok(best)
    }
}

fn refined_grid(center: f64, step: f64, lower: f64, upper: f64) -> Vec<f64> {
    let lo = (center - step).max(lower);
    let hi = (center + step).min(upper.max(center));
    let fine = step / 10.0;
    let count = ((hi - lo) / fine).round() as usize;
    (0..=count).map(|c| lo + c as f64 * fine).collect()
}

/// One-dimensional maximization of `f` over the grid, with local refinement.
pub(crate) fn search_1d<F>(grid: &Grid, refinement_rounds: usize, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (lower, upper) = match grid {
        Grid::Range { lower, upper, .. } => (*lower, *upper),
        Grid::Points(pts) => (
            pts.iter().copied().fold(f64::INFINITY, f64::min),
            pts.iter().copied().fold(0.0, f64::max),
        ),
    };
    let mut points = grid.points();
    let mut step = grid.step();
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for round in 0..=refinement_rounds {
        for &y in &points {
            let u = f(y)?;
            if u > best.1 {
                best = (y, u);
            }
        }
        if round < refinement_rounds {
            points = refined_grid(best.0, step, lower, upper);
            step /= 10.0;
        }
    }
    Ok(best)
}

/// Cartesian product of `grid` over `m` coordinates, capped by a guard.
fn joint_candidates(points: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
    let combos = (points.len() as f64).powi(m as i32);
    if combos > 1e7 {
        return Err(Error::EnumerationGuard(format!(
            "{combos:.3e} joint deviation candidates (limit 1e7); use a per-resource plan"
        )));
    }
    let combos = combos as usize;
    let mut out = Vec::with_capacity(combos);
    let radix = points.len();
    for mut index in 0..combos {
        let mut bid = Vec::with_capacity(m);
        for _ in 0..m {
            bid.push(points[index % radix]);
            index /= radix;
        }
        out.push(bid);
    }
    Ok(out)
}

/// Grid-search best response for agent `agent` against `opp`.
///
/// Additive valuations without budget caps decompose into independent
/// per-resource searches (exact). Otherwise the deviation plan in `cfg`
/// picks joint enumeration or cyclic coordinate descent, both followed by
/// `cfg.refinement_rounds` of tenfold local grid refinement. When budgets
/// are active every candidate is clipped to the budget simplex.
pub fn best_response(
    instance: &Instance,
    agent: usize,
    opp: &Opponents,
    cfg: &SearchConfig,
) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    let problem = ResponseProblem::new(instance, agent, opp)?;
    best_response_inner(instance, agent, &problem, None, cfg)
}

pub(crate) fn best_response_inner(
    instance: &Instance,
    agent: usize,
    problem: &ResponseProblem,
    start: Option<&[f64]>,
    cfg: &SearchConfig,
) -> Result<(Vec<f64>, f64)> {
    let m = instance.m();
    if let DeviationPlan::Explicit(lists) = &cfg.deviations {
        let candidates = lists.get(agent).ok_or_else(|| {
            Error::InvalidConfig(format!("no explicit candidates for agent {agent}"))
        })?;
        let (idx, util) = problem.argmax(candidates)?;
        return Ok((candidates[idx].clone(), util));
    }

    let additive = !instance.is_polyhedral()
        && instance.valuation(agent).is_additive()
        && instance.budget(agent).is_infinite();
    if additive {
        // Independent 1-D searches per resource; exact for additive utility.
        let mut bid = vec![0.0; m];
        let mut buf = Vec::with_capacity(m);
        for j in 0..m {
            let (y, _) = search_1d(&cfg.grid, cfg.refinement_rounds, |y| {
                let mut probe = vec![0.0; m];
                probe[j] = y;
                // Only resource j matters for the additive component; holding
                // the other coordinates at zero isolates it up to a constant.
                let mut total = 0.0;
                for p in &problem.prices {
                    total += utility_against(instance, agent, &probe, p, &mut buf)?;
                }
                Ok(total / problem.prices.len() as f64)
            })?;
            bid[j] = y;
        }
        let util = problem.mean_utility(&bid)?;
        return Ok((bid, util));
    }

    match cfg.deviations {
        DeviationPlan::JointGrid => {
            let points = cfg.grid.points();
            let mut candidates = joint_candidates(&points, m)?;
            if let Some(s) = start {
                candidates.push(s.to_vec());
            }
            let (idx, mut util) = problem.argmax(&candidates)?;
            let mut best = candidates[idx].clone();
            let mut step = cfg.grid.step();
            for _ in 0..cfg.refinement_rounds {
                let mut axes: Vec<Vec<f64>> = Vec::with_capacity(m);
                for &y in &best {
                    axes.push(refined_grid(y, step, 0.0, f64::INFINITY));
                }
                let mut local = Vec::new();
                cartesian(&axes, &mut local);
                let (idx, u) = problem.argmax(&local)?;
                if u > util {
                    util = u;
                    best = local[idx].clone();
                }
                step /= 10.0;
            }
            Ok((best, util))
        }
        DeviationPlan::PerResource => {
            coordinate_descent(problem, start.map(|s| s.to_vec()), m, cfg)
        }
        DeviationPlan::Explicit(_) => unreachable!("handled above"),
    }
}

fn cartesian(axes: &[Vec<f64>], out: &mut Vec<Vec<f64>>) {
    let total: usize = axes.iter().map(|a| a.len()).product();
    out.reserve(total);
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(axes).map(|(i, a)| a[*i]).collect());
        for k in 0..axes.len() {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Cyclic coordinate descent over the bid vector: each resource's bid is
/// maximized on a 1-D grid holding the others fixed, sweeping until stable,
/// then the grid is refined around the incumbent.
fn coordinate_descent(
    problem: &ResponseProblem,
    start: Option<Vec<f64>>,
    m: usize,
    cfg: &SearchConfig,
) -> Result<(Vec<f64>, f64)> {
    let mut bid = start.unwrap_or_else(|| vec![0.0; m]);
    if !problem.feasible(&bid) {
        bid = vec![0.0; m];
    }
    let base_points = cfg.grid.points();
    let mut step = cfg.grid.step();
    let (lower, upper) = match &cfg.grid {
        Grid::Range { lower, upper, .. } => (*lower, *upper),
        Grid::Points(pts) => (
            pts.iter().copied().fold(f64::INFINITY, f64::min),
            pts.iter().copied().fold(0.0, f64::max),
        ),
    };
    let mut util = problem.mean_utility(&bid)?;
    let mut points = base_points;
    for round in 0..=cfg.refinement_rounds {
        for _sweep in 0..16 {
            let mut improved = false;
            for j in 0..m {
                let incumbent = bid[j];
                let spent_elsewhere: f64 = bid.iter().sum::<f64>() - incumbent;
                let headroom = problem.budget - spent_elsewhere;
                let mut best_here = (incumbent, util);
                let mut probe = bid.clone();
                for &y in points.iter().chain(std::iter::once(&incumbent)) {
                    if y > headroom {
                        continue;
                    }
                    probe[j] = y;
                    let u = problem.mean_utility(&probe)?;
                    if u > best_here.1 {
                        best_here = (y, u);
                    }
                }
                if best_here.0 != incumbent {
                    bid[j] = best_here.0;
                    util = best_here.1;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        if round < cfg.refinement_rounds {
            // Refine each coordinate's grid around its incumbent value.
            points = bid
                .iter()
                .flat_map(|&y| refined_grid(y, step, lower, upper.max(y)))
                .collect();
            points.sort_by(|a, b| a.partial_cmp(b).unwrap());
            points.dedup();
            step /= 10.0;
        }
    }
    Ok((bid, util))
}
