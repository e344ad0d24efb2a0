//! Social and effective welfare, plus brute-force optimal-allocation oracles.
//!
//! The oracle enumerates per-resource simplex grids `{0, 1/K, ..., 1}` and is
//! exact for instances whose optimum lies on the grid. When every valuation
//! is additive across resources the search decomposes into independent
//! per-resource enumerations (same answer, exponentially cheaper); otherwise
//! the joint grid is enumerated under an explicit budget guard. Enumeration
//! is chunked so the parallel and sequential builds return identical reports,
//! with ties broken toward the lexicographically smallest grid point.

use serde::{Deserialize, Serialize};

use crate::equilibrium::profile::{CorrelatedProfile, TypeSpace};
use crate::exec;
use crate::mechanism::{allocate_any, Allocation, BidProfile, Instance};
use crate::{Error, Result, FEASIBILITY_TOL};

/// Which objective the oracle maximizes and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Social,
    Effective,
}

/// Best grid allocation found by [`optimal_welfare`].
#[derive(Clone, Debug, Serialize)]
pub struct WelfareReport {
    pub value: f64,
    pub allocation: Allocation,
    pub resolution: usize,
    pub mode: Benchmark,
}

/// Sum of the agents' valuations at a feasible allocation.
pub fn social_welfare(instance: &Instance, x: &Allocation) -> Result<f64> {
    x.validate(instance)?;
    let mut total = 0.0;
    for i in 0..instance.n() {
        total += instance.valuation(i).eval(x.agent(i))?;
    }
    Ok(total)
}

/// Sum of budget-capped valuations `min(v_i(x_i), c_i)`; requires budgets.
pub fn effective_welfare(instance: &Instance, x: &Allocation) -> Result<f64> {
    let budgets = instance.budgets().ok_or(Error::MissingBudgets)?;
    x.validate(instance)?;
    let mut total = 0.0;
    for i in 0..instance.n() {
        total += instance.valuation(i).eval(x.agent(i))?.min(budgets[i]);
    }
    Ok(total)
}

/// Social welfare of the allocation induced by a bid profile.
pub fn profile_social_welfare(instance: &Instance, b: &BidProfile) -> Result<f64> {
    let x = allocate_any(instance, b)?;
    social_welfare(instance, &x)
}

/// Expected social welfare over a finite joint distribution of profiles.
pub fn expected_social_welfare(instance: &Instance, dist: &CorrelatedProfile) -> Result<f64> {
    dist.expect(|b| profile_social_welfare(instance, b))
}

/// Expected effective welfare with the cap applied outside the expectation,
/// per agent: `sum_i min(E[v_i(x_i)], c_i)`.
pub fn expected_effective_welfare(instance: &Instance, dist: &CorrelatedProfile) -> Result<f64> {
    let budgets = instance.budgets().ok_or(Error::MissingBudgets)?;
    let n = instance.n();
    let mut expected_values = vec![0.0; n];
    for (b, p) in dist.support() {
        if *p == 0.0 {
            continue;
        }
        let x = allocate_any(instance, b)?;
        for (i, acc) in expected_values.iter_mut().enumerate() {
            *acc += p * instance.valuation(i).eval(x.agent(i))?;
        }
    }
    Ok(expected_values
        .iter()
        .zip(budgets)
        .map(|(v, c)| v.min(*c))
        .sum())
}

/// All nonnegative integer vectors of length `parts` summing to `total`,
/// in lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=total {
            prefix.push(v);
            rec(total - v, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::new(), &mut out);
    out
}

const GUARD_LIMIT: f64 = 1e8;
const COMBO_LIMIT: f64 = 2e8;

struct Objective<'a> {
    instance: &'a Instance,
    budgets: Option<&'a [f64]>,
}

impl<'a> Objective<'a> {
    fn new(instance: &'a Instance, mode: Benchmark) -> Result<Self> {
        let budgets = match mode {
            Benchmark::Social => None,
            Benchmark::Effective => Some(instance.budgets().ok_or(Error::MissingBudgets)?),
        };
        Ok(Self { instance, budgets })
    }

    fn agent_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        let v = self.instance.valuation(i).eval(x)?;
        Ok(match self.budgets {
            Some(c) => v.min(c[i]),
            None => v,
        })
    }
}

/// Brute-force grid maximization of social or effective welfare.
///
/// Standard mode enumerates, for every resource, the allocations on the
/// simplex grid with denominator `k`; polyhedral mode enumerates agent
/// fractions on `{0, 1/k, ..., 1}^n` filtered by the constraints. Errors with
/// an enumeration guard when the implied grid is too large.
pub fn optimal_welfare(instance: &Instance, k: usize, mode: Benchmark) -> Result<WelfareReport> {
    if k == 0 {
        return Err(Error::InvalidConfig("grid resolution must be >= 1".into()));
    }
    if instance.is_polyhedral() {
        return optimal_welfare_polyhedral(instance, k, mode);
    }
    let objective = Objective::new(instance, mode)?;
    let n = instance.n();
    let m = instance.m();
    let all_additive = instance.valuations().iter().all(|v| v.is_additive());
    // Effective-mode caps couple resources even for additive valuations.
    let budget_free = matches!(mode, Benchmark::Social)
        || instance
            .budgets()
            .is_some_and(|c| c.iter().all(|c| c.is_infinite()));
    let comps = compositions(k, n);

    let fractions = if all_additive && budget_free {
        optimal_additive(instance, k, &comps)?
    } else {
        let spec_guard = (k as f64).powi((m * (n - 1)) as i32);
        let combos = (comps.len() as f64).powi(m as i32);
        if spec_guard > GUARD_LIMIT || combos > COMBO_LIMIT {
            return Err(Error::EnumerationGuard(format!(
                "K^(m(n-1)) = {spec_guard:.3e}, grid points = {combos:.3e} \
                 (limits {GUARD_LIMIT:.0e} / {COMBO_LIMIT:.0e})"
            )));
        }
        optimal_joint(&objective, k, &comps, m, n, combos as usize)?
    };

    let allocation = Allocation::PerResource(fractions);
    let mut value = 0.0;
    for i in 0..n {
        value += objective.agent_value(i, allocation.agent(i))?;
    }
    Ok(WelfareReport {
        value,
        allocation,
        resolution: k,
        mode,
    })
}

/// Per-resource exact search for additive valuations.
fn optimal_additive(
    instance: &Instance,
    k: usize,
    comps: &[Vec<usize>],
) -> Result<Vec<Vec<f64>>> {
    let n = instance.n();
    let m = instance.m();
    if comps.len().saturating_mul(m) as f64 > GUARD_LIMIT {
        return Err(Error::EnumerationGuard(format!(
            "{} grid points per resource over {m} resources",
            comps.len()
        )));
    }
    let mut fractions = vec![vec![0.0; m]; n];
    for j in 0..m {
        let mut best = f64::NEG_INFINITY;
        let mut best_comp = &comps[0];
        for comp in comps {
            let mut value = 0.0;
            for (i, c) in comp.iter().enumerate() {
                value += instance
                    .valuation(i)
                    .eval_single(j, *c as f64 / k as f64)
                    .expect("additive valuation");
            }
            if value > best {
                best = value;
                best_comp = comp;
            }
        }
        for (i, c) in best_comp.iter().enumerate() {
            fractions[i][j] = *c as f64 / k as f64;
        }
    }
    Ok(fractions)
}

/// Joint enumeration over one composition choice per resource, chunked with
/// a deterministic (value, index) max-reduce.
fn optimal_joint(
    objective: &Objective,
    k: usize,
    comps: &[Vec<usize>],
    m: usize,
    n: usize,
    combos: usize,
) -> Result<Vec<Vec<f64>>> {
    let radix = comps.len();
    let decode = |mut index: usize, digits: &mut Vec<usize>| {
        digits.clear();
        for _ in 0..m {
            digits.push(index % radix);
            index /= radix;
        }
    };
    let evaluate = |digits: &[usize], x: &mut [Vec<f64>]| -> Result<f64> {
        for (j, d) in digits.iter().enumerate() {
            for (i, xi) in x.iter_mut().enumerate() {
                xi[j] = comps[*d][i] as f64 / k as f64;
            }
        }
        let mut value = 0.0;
        for (i, xi) in x.iter().enumerate() {
            value += objective.agent_value(i, xi)?;
        }
        Ok(value)
    };

    let partials: Vec<Result<(f64, usize)>> = exec::map_chunks(combos, 8192, |_, range| {
        let mut digits = Vec::with_capacity(m);
        let mut x = vec![vec![0.0; m]; n];
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for index in range {
            decode(index, &mut digits);
            let value = evaluate(&digits, &mut x)?;
            if value > best.0 {
                best = (value, index);
            }
        }
        Ok(best)
    });

    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for partial in partials {
        let (value, index) = partial?;
        if value > best.0 || (value == best.0 && index < best.1) {
            best = (value, index);
        }
    }
    let mut digits = Vec::with_capacity(m);
    decode(best.1, &mut digits);
    let mut x = vec![vec![0.0; m]; n];
    evaluate(&digits, &mut x)?;
    Ok(x)
}

fn optimal_welfare_polyhedral(
    instance: &Instance,
    k: usize,
    mode: Benchmark,
) -> Result<WelfareReport> {
    let objective = Objective::new(instance, mode)?;
    let constraints = instance.constraints().expect("polyhedral mode");
    let n = instance.n();
    let levels = k + 1;
    let combos = (levels as f64).powi(n as i32);
    if combos > GUARD_LIMIT {
        return Err(Error::EnumerationGuard(format!(
            "{combos:.3e} polyhedral grid points (limit {GUARD_LIMIT:.0e})"
        )));
    }
    let combos = combos as usize;
    let decode = |mut index: usize, x: &mut Vec<f64>| {
        x.clear();
        for _ in 0..n {
            x.push((index % levels) as f64 / k as f64);
            index /= levels;
        }
    };
    let feasible = |x: &[f64]| {
        constraints.iter().all(|row| {
            row.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() <= 1.0 + FEASIBILITY_TOL
        })
    };
    let evaluate = |x: &[f64]| -> Result<f64> {
        let mut value = 0.0;
        for (i, xi) in x.iter().enumerate() {
            value += objective.agent_value(i, std::slice::from_ref(xi))?;
        }
        Ok(value)
    };

    let partials: Vec<Result<(f64, usize)>> = exec::map_chunks(combos, 8192, |_, range| {
        let mut x = Vec::with_capacity(n);
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for index in range {
            decode(index, &mut x);
            if !feasible(&x) {
                continue;
            }
            let value = evaluate(&x)?;
            if value > best.0 {
                best = (value, index);
            }
        }
        Ok(best)
    });

    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for partial in partials {
        let (value, index) = partial?;
        if value > best.0 || (value == best.0 && index < best.1) {
            best = (value, index);
        }
    }
    if best.1 == usize::MAX {
        return Err(Error::InfeasibleAllocation(
            "no feasible grid point (constraints exclude the origin?)".into(),
        ));
    }
    let mut x = Vec::with_capacity(n);
    decode(best.1, &mut x);
    let value = evaluate(&x)?;
    Ok(WelfareReport {
        value,
        allocation: Allocation::Scalar(x),
        resolution: k,
        mode,
    })
}

/// Exact expectation of the per-profile optimal welfare over a finite type
/// space: every type profile is realized and solved on the grid.
pub fn expected_optimal_welfare(
    instance: &Instance,
    types: &TypeSpace,
    k: usize,
    mode: Benchmark,
) -> Result<f64> {
    let profiles = types.profiles();
    if profiles.len() > 10_000 {
        return Err(Error::EnumerationGuard(format!(
            "{} type profiles",
            profiles.len()
        )));
    }
    let mut total = 0.0;
    for (ids, p) in profiles {
        if p == 0.0 {
            continue;
        }
        let mut realized = instance.clone();
        for (i, t) in ids.iter().enumerate() {
            let ty = &types.agent(i)[*t];
            realized = realized.with_valuation(i, ty.valuation.clone());
            if let Some(c) = ty.budget {
                realized = realized.with_budget(i, c);
            }
        }
        total += p * optimal_welfare(&realized, k, mode)?.value;
    }
    Ok(total)
}
