//! The proportional allocation mechanism and its polyhedral variant.
//!
//! In standard mode each agent submits one bid per resource and receives the
//! fraction `b_ij / sum_k b_kj` of resource `j`; her payment is the sum of her
//! bids. In polyhedral mode the allocation is a single fraction per agent,
//! the bottleneck ratio over the constraint rows, and feasibility means
//! `A * x <= 1` componentwise. Columns (rows) where nobody bids are resolved
//! by the instance's tie-break rule, consistently across calls.

use serde::{Deserialize, Serialize};

use crate::valuation::Valuation;
use crate::{Error, Result, FEASIBILITY_TOL};

/// How a resource with zero total bid is allocated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Every agent receives an equal share.
    SplitEqually,
    /// The named agent (0-based) receives the whole resource.
    ToAgent(usize),
}

/// Which mechanism variant an instance runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Standard { resources: usize },
    /// Rows are resources, columns are agents: entry `[j][i]` is the
    /// coefficient of agent `i` in constraint row `j`.
    Polyhedral { constraints: Vec<Vec<f64>> },
}

/// A game instance: one valuation per agent, optional budgets, the mechanism
/// mode, and the zero-bid tie-break rule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    valuations: Vec<Valuation>,
    budgets: Option<Vec<f64>>,
    mode: Mode,
    tie_break: TieBreak,
}

impl Instance {
    pub fn standard(valuations: Vec<Valuation>, resources: usize) -> Result<Self> {
        if valuations.is_empty() {
            return Err(Error::InvalidInstance("need at least one agent".into()));
        }
        if resources == 0 {
            return Err(Error::InvalidInstance("need at least one resource".into()));
        }
        Ok(Self {
            valuations,
            budgets: None,
            mode: Mode::Standard { resources },
            tie_break: TieBreak::SplitEqually,
        })
    }

    pub fn polyhedral(valuations: Vec<Valuation>, constraints: Vec<Vec<f64>>) -> Result<Self> {
        let n = valuations.len();
        if n == 0 {
            return Err(Error::InvalidInstance("need at least one agent".into()));
        }
        if constraints.is_empty() {
            return Err(Error::InvalidInstance(
                "need at least one constraint row".into(),
            ));
        }
        for (j, row) in constraints.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "constraint row {j} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(a) = row.iter().find(|a| !a.is_finite() || **a < 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "constraint row {j} contains invalid coefficient {a}"
                )));
            }
        }
        Ok(Self {
            valuations,
            budgets: None,
            mode: Mode::Polyhedral { constraints },
            tie_break: TieBreak::SplitEqually,
        })
    }

    pub fn with_budgets(mut self, budgets: Vec<f64>) -> Result<Self> {
        if budgets.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} budgets for {} agents",
                budgets.len(),
                self.n()
            )));
        }
        if let Some(c) = budgets.iter().find(|c| c.is_nan() || **c < 0.0) {
            return Err(Error::InvalidInstance(format!("invalid budget {c}")));
        }
        self.budgets = Some(budgets);
        Ok(self)
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Result<Self> {
        if let TieBreak::ToAgent(k) = tie_break {
            if k >= self.n() {
                return Err(Error::InvalidInstance(format!(
                    "tie-break agent {k} out of range for {} agents",
                    self.n()
                )));
            }
        }
        self.tie_break = tie_break;
        Ok(self)
    }

    /// Clone of this instance with agent `i`'s valuation replaced. Used when
    /// realizing one draw of a Bayesian type space.
    pub fn with_valuation(&self, i: usize, valuation: Valuation) -> Self {
        let mut out = self.clone();
        out.valuations[i] = valuation;
        out
    }

    /// Clone with agent `i`'s budget replaced (budgets are created as
    /// unbounded for the other agents if absent).
    pub fn with_budget(&self, i: usize, budget: f64) -> Self {
        let mut out = self.clone();
        let mut budgets = out
            .budgets
            .unwrap_or_else(|| vec![f64::INFINITY; self.n()]);
        budgets[i] = budget;
        out.budgets = Some(budgets);
        out
    }

    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    /// Number of resources in standard mode, constraint rows in polyhedral
    /// mode. Bid profiles are `n x m()` either way.
    pub fn m(&self) -> usize {
        match &self.mode {
            Mode::Standard { resources } => *resources,
            Mode::Polyhedral { constraints } => constraints.len(),
        }
    }

    pub fn is_polyhedral(&self) -> bool {
        matches!(self.mode, Mode::Polyhedral { .. })
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn constraints(&self) -> Option<&[Vec<f64>]> {
        match &self.mode {
            Mode::Polyhedral { constraints } => Some(constraints),
            Mode::Standard { .. } => None,
        }
    }

    pub fn valuation(&self, i: usize) -> &Valuation {
        &self.valuations[i]
    }

    pub fn valuations(&self) -> &[Valuation] {
        &self.valuations
    }

    pub fn budgets(&self) -> Option<&[f64]> {
        self.budgets.as_deref()
    }

    /// Agent `i`'s budget, `+inf` when budgets are absent.
    pub fn budget(&self, i: usize) -> f64 {
        self.budgets.as_ref().map_or(f64::INFINITY, |c| c[i])
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }
}

/// An n x m matrix of nonnegative finite bids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidProfile {
    bids: Vec<Vec<f64>>,
}

impl BidProfile {
    pub fn new(bids: Vec<Vec<f64>>) -> Result<Self> {
        if bids.is_empty() || bids[0].is_empty() {
            return Err(Error::DimensionMismatch("empty bid profile".into()));
        }
        let m = bids[0].len();
        for (i, row) in bids.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "agent {i} has {} bids, expected {m}",
                    row.len()
                )));
            }
            for (j, b) in row.iter().enumerate() {
                if !b.is_finite() || *b < 0.0 {
                    return Err(Error::InvalidBid {
                        agent: i,
                        index: j,
                        value: *b,
                    });
                }
            }
        }
        Ok(Self { bids })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            bids: vec![vec![0.0; m]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.bids.len()
    }

    pub fn m(&self) -> usize {
        self.bids[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.bids[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.bids[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.bids
    }

    /// Overwrites agent `i`'s bid vector. Callers are expected to pass
    /// nonnegative finite bids (grid points, sampled strategies).
    pub fn set_row(&mut self, i: usize, row: &[f64]) {
        debug_assert_eq!(row.len(), self.m());
        debug_assert!(row.iter().all(|b| b.is_finite() && *b >= 0.0));
        self.bids[i].copy_from_slice(row);
    }

    pub fn with_row(&self, i: usize, row: Vec<f64>) -> Self {
        let mut out = self.clone();
        out.set_row(i, &row);
        out
    }

    pub fn column_total(&self, j: usize) -> f64 {
        self.bids.iter().map(|row| row[j]).sum()
    }

    /// Sum of all bids on column `j` except agent `i`'s.
    pub fn total_except(&self, i: usize, j: usize) -> f64 {
        self.bids
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, row)| row[j])
            .sum()
    }

    /// Column totals of all agents except `i`, i.e. the price vector agent
    /// `i` faces.
    pub fn opponent_totals(&self, i: usize) -> Vec<f64> {
        (0..self.m()).map(|j| self.total_except(i, j)).collect()
    }

    /// Agent `i`'s payment: the sum of her bids.
    pub fn payment(&self, i: usize) -> f64 {
        self.bids[i].iter().sum()
    }
}

/// Fractions received by each agent: per-resource in standard mode, a single
/// scalar per agent in polyhedral mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Allocation {
    PerResource(Vec<Vec<f64>>),
    Scalar(Vec<f64>),
}

impl Allocation {
    pub fn n(&self) -> usize {
        match self {
            Allocation::PerResource(x) => x.len(),
            Allocation::Scalar(x) => x.len(),
        }
    }

    /// Agent `i`'s fraction vector (length 1 in polyhedral mode), in the shape
    /// `Valuation::eval` expects.
    pub fn agent(&self, i: usize) -> &[f64] {
        match self {
            Allocation::PerResource(x) => &x[i],
            Allocation::Scalar(x) => std::slice::from_ref(&x[i]),
        }
    }

    /// Checks the mode-specific feasibility invariants against `instance`.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        match (self, instance.mode()) {
            (Allocation::PerResource(x), Mode::Standard { resources }) => {
                if x.len() != instance.n() || x.iter().any(|r| r.len() != *resources) {
                    return Err(Error::DimensionMismatch("allocation shape".into()));
                }
                for j in 0..*resources {
                    let total: f64 = x.iter().map(|r| r[j]).sum();
                    if total > 1.0 + FEASIBILITY_TOL {
                        return Err(Error::InfeasibleAllocation(format!(
                            "resource {j} oversubscribed: {total}"
                        )));
                    }
                }
                for (i, row) in x.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        if !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(v) {
                            return Err(Error::InfeasibleAllocation(format!(
                                "fraction x[{i}][{j}] = {v}"
                            )));
                        }
                    }
                }
                Ok(())
            }
            (Allocation::Scalar(x), Mode::Polyhedral { constraints }) => {
                if x.len() != instance.n() {
                    return Err(Error::DimensionMismatch("allocation shape".into()));
                }
                for (j, row) in constraints.iter().enumerate() {
                    let load: f64 = row.iter().zip(x).map(|(a, xi)| a * xi).sum();
                    if load > 1.0 + FEASIBILITY_TOL {
                        return Err(Error::InfeasibleAllocation(format!(
                            "constraint row {j} violated: {load}"
                        )));
                    }
                }
                Ok(())
            }
            _ => Err(Error::ModeMismatch {
                expected: if instance.is_polyhedral() {
                    "polyhedral"
                } else {
                    "standard"
                },
            }),
        }
    }
}

/// Payments, one per agent; `q_i` equals agent `i`'s bid sum exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payments {
    totals: Vec<f64>,
}

impl Payments {
    pub fn agent(&self, i: usize) -> f64 {
        self.totals[i]
    }

    pub fn totals(&self) -> &[f64] {
        &self.totals
    }
}

pub fn payments(b: &BidProfile) -> Payments {
    Payments {
        totals: (0..b.n()).map(|i| b.payment(i)).collect(),
    }
}

fn check_dims(instance: &Instance, b: &BidProfile) -> Result<()> {
    if b.n() != instance.n() || b.m() != instance.m() {
        return Err(Error::DimensionMismatch(format!(
            "bid profile is {}x{}, instance expects {}x{}",
            b.n(),
            b.m(),
            instance.n(),
            instance.m()
        )));
    }
    Ok(())
}

/// Share of column `j` going to agent `i` when her own bid is `own`, the
/// other agents bid `opp_total` combined, and zero columns fall to the
/// tie-break rule.
#[inline]
fn column_share(own: f64, opp_total: f64, i: usize, n: usize, tie_break: TieBreak) -> f64 {
    let total = own + opp_total;
    if total > 0.0 {
        own / total
    } else {
        match tie_break {
            TieBreak::SplitEqually => 1.0 / n as f64,
            TieBreak::ToAgent(k) => {
                if k == i {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Proportional shares for every agent and resource (standard mode).
pub fn allocate(instance: &Instance, b: &BidProfile) -> Result<Allocation> {
    if instance.is_polyhedral() {
        return Err(Error::ModeMismatch {
            expected: "standard",
        });
    }
    check_dims(instance, b)?;
    let n = instance.n();
    let m = instance.m();
    let mut fractions = vec![vec![0.0; m]; n];
    for j in 0..m {
        let total = b.column_total(j);
        for (i, row) in fractions.iter_mut().enumerate() {
            row[j] = column_share(b.get(i, j), total - b.get(i, j), i, n, instance.tie_break());
        }
    }
    Ok(Allocation::PerResource(fractions))
}

/// Bottleneck allocation for polyhedral instances: agent `i` receives
/// `min_j b_ij / (a_ij * sum_k b_kj)` over the rows where her coefficient is
/// positive. Rows with zero total bid fall to the tie-break rule like zero
/// columns in standard mode.
pub fn allocate_polyhedral(instance: &Instance, b: &BidProfile) -> Result<Allocation> {
    let constraints = instance.constraints().ok_or(Error::ModeMismatch {
        expected: "polyhedral",
    })?;
    check_dims(instance, b)?;
    let n = instance.n();
    let mut fractions = vec![0.0; n];
    let totals: Vec<f64> = (0..instance.m()).map(|j| b.column_total(j)).collect();
    for (i, x) in fractions.iter_mut().enumerate() {
        let mut best: Option<f64> = None;
        for (j, row) in constraints.iter().enumerate() {
            let a = row[i];
            if a == 0.0 {
                continue;
            }
            let share = column_share(
                b.get(i, j),
                totals[j] - b.get(i, j),
                i,
                n,
                instance.tie_break(),
            );
            let candidate = share / a;
            best = Some(best.map_or(candidate, |v: f64| v.min(candidate)));
        }
        *x = best.ok_or(Error::AllocationUndefined { agent: i })?;
    }
    Ok(Allocation::Scalar(fractions))
}

/// Allocation under whichever mode the instance runs.
pub fn allocate_any(instance: &Instance, b: &BidProfile) -> Result<Allocation> {
    if instance.is_polyhedral() {
        allocate_polyhedral(instance, b)
    } else {
        allocate(instance, b)
    }
}

/// Quasilinear utility of agent `i`: valuation of her fractions minus her
/// total payment. May be negative.
pub fn utility(instance: &Instance, i: usize, b: &BidProfile) -> Result<f64> {
    let x = allocate_any(instance, b)?;
    let value = instance.valuation(i).eval(x.agent(i))?;
    Ok(value - b.payment(i))
}

/// Writes agent `i`'s fractions into `buf` given her own bids and the
/// opponents' column totals, without materializing the full allocation.
/// `buf` gets length `m` in standard mode and length 1 in polyhedral mode.
pub(crate) fn agent_fractions(
    instance: &Instance,
    i: usize,
    own: &[f64],
    opp_totals: &[f64],
    buf: &mut Vec<f64>,
) -> Result<()> {
    let n = instance.n();
    buf.clear();
    match instance.mode() {
        Mode::Standard { resources } => {
            debug_assert_eq!(own.len(), *resources);
            for j in 0..*resources {
                buf.push(column_share(own[j], opp_totals[j], i, n, instance.tie_break()));
            }
            Ok(())
        }
        Mode::Polyhedral { constraints } => {
            let mut best: Option<f64> = None;
            for (j, row) in constraints.iter().enumerate() {
                let a = row[i];
                if a == 0.0 {
                    continue;
                }
                let share = column_share(own[j], opp_totals[j], i, n, instance.tie_break());
                let candidate = share / a;
                best = Some(best.map_or(candidate, |v: f64| v.min(candidate)));
            }
            buf.push(best.ok_or(Error::AllocationUndefined { agent: i })?);
            Ok(())
        }
    }
}

/// Utility of agent `i` bidding `own` against fixed opponent column totals.
/// Equivalent to [`utility`] on the assembled profile, but O(m).
pub(crate) fn utility_against(
    instance: &Instance,
    i: usize,
    own: &[f64],
    opp_totals: &[f64],
    buf: &mut Vec<f64>,
) -> Result<f64> {
    agent_fractions(instance, i, own, opp_totals, buf)?;
    let value = instance.valuation(i).eval(buf)?;
    Ok(value - own.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::Valuation;

    fn linear(slopes: &[f64]) -> Valuation {
        Valuation::Linear {
            weights: slopes.to_vec(),
        }
    }

    fn two_agent_instance(m: usize) -> Instance {
        Instance::standard(vec![linear(&vec![1.0; m]), linear(&vec![1.0; m])], m).unwrap()
    }

    #[test]
    fn equal_bids_split_equally() {
        let inst = two_agent_instance(1);
        let b = BidProfile::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let x = allocate(&inst, &b).unwrap();
        assert_eq!(x.agent(0), &[0.5]);
        assert_eq!(x.agent(1), &[0.5]);
    }

    #[test]
    fn contested_resource_shares_are_proportional() {
        // Two bids 1/18 and 1/9 on the same resource split 1/3 vs 2/3.
        let inst = two_agent_instance(4);
        let mut rows = vec![vec![0.0; 4]; 2];
        rows[0][2] = 1.0 / 18.0;
        rows[1][2] = 1.0 / 9.0;
        let b = BidProfile::new(rows).unwrap();
        let x = allocate(&inst, &b).unwrap();
        assert!((x.agent(0)[2] - 1.0 / 3.0).abs() < 1e-15);
        assert!((x.agent(1)[2] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_column_goes_to_designated_agent() {
        let inst = two_agent_instance(2)
            .with_tie_break(TieBreak::ToAgent(1))
            .unwrap();
        let b = BidProfile::zeros(2, 2);
        let x = allocate(&inst, &b).unwrap();
        assert_eq!(x.agent(0), &[0.0, 0.0]);
        assert_eq!(x.agent(1), &[1.0, 1.0]);
        // Deterministic: same input, same output.
        assert_eq!(allocate(&inst, &b).unwrap(), x);
    }

    #[test]
    fn polyhedral_shared_row_splits() {
        let inst = Instance::polyhedral(
            vec![
                Valuation::PolyJump { epsilon: 0.2 },
                linear(&[0.2]),
            ],
            vec![vec![1.0, 1.0]],
        )
        .unwrap();
        let b = BidProfile::new(vec![vec![0.05], vec![0.05]]).unwrap();
        let x = allocate_polyhedral(&inst, &b).unwrap();
        assert_eq!(x.agent(0), &[0.5]);
        assert_eq!(x.agent(1), &[0.5]);
        x.validate(&inst).unwrap();
    }

    #[test]
    fn polyhedral_single_agent_coefficient_two() {
        let inst = Instance::polyhedral(vec![linear(&[1.0])], vec![vec![2.0]]).unwrap();
        for bid in [0.1, 1.0, 7.5] {
            let b = BidProfile::new(vec![vec![bid]]).unwrap();
            let x = allocate_polyhedral(&inst, &b).unwrap();
            assert!((x.agent(0)[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn polyhedral_disjoint_rows_allocate_fully() {
        let inst = Instance::polyhedral(
            vec![linear(&[1.0]), linear(&[1.0])],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let b = BidProfile::new(vec![vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let x = allocate_polyhedral(&inst, &b).unwrap();
        assert_eq!(x.agent(0), &[1.0]);
        assert_eq!(x.agent(1), &[1.0]);
        x.validate(&inst).unwrap();
    }

    #[test]
    fn polyhedral_all_zero_coefficients_is_undefined() {
        let inst = Instance::polyhedral(
            vec![linear(&[1.0]), linear(&[1.0])],
            vec![vec![0.0, 1.0]],
        )
        .unwrap();
        let b = BidProfile::new(vec![vec![0.1], vec![0.1]]).unwrap();
        match allocate_polyhedral(&inst, &b) {
            Err(Error::AllocationUndefined { agent: 0 }) => {}
            other => panic!("expected AllocationUndefined, got {other:?}"),
        }
    }

    #[test]
    fn utility_is_value_minus_payment() {
        let inst = Instance::standard(vec![linear(&[1.0])], 1).unwrap();
        let b = BidProfile::new(vec![vec![0.3]]).unwrap();
        let u = utility(&inst, 0, &b).unwrap();
        assert!((u - 0.7).abs() < 1e-15);
    }

    #[test]
    fn polyhedral_lower_bound_profile_utility() {
        let inst = Instance::polyhedral(
            vec![Valuation::PolyJump { epsilon: 0.2 }, linear(&[0.2])],
            vec![vec![1.0, 1.0]],
        )
        .unwrap();
        let b = BidProfile::new(vec![vec![0.05], vec![0.05]]).unwrap();
        let u2 = utility(&inst, 1, &b).unwrap();
        assert!((u2 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn negative_bid_rejected() {
        match BidProfile::new(vec![vec![-0.1]]) {
            Err(Error::InvalidBid { agent: 0, .. }) => {}
            other => panic!("expected InvalidBid, got {other:?}"),
        }
        assert!(BidProfile::new(vec![vec![f64::NAN]]).is_err());
        assert!(BidProfile::new(vec![vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let inst = two_agent_instance(2);
        let b = BidProfile::new(vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(
            allocate(&inst, &b),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn payments_are_exact_bid_sums() {
        let b = BidProfile::new(vec![vec![0.1, 0.2, 0.3], vec![0.0, 0.5, 0.0]]).unwrap();
        let q = payments(&b);
        assert_eq!(q.agent(0), 0.1 + 0.2 + 0.3);
        assert_eq!(q.agent(1), 0.5);
    }

    #[test]
    fn utility_against_matches_full_profile() {
        let inst = Instance::standard(
            vec![
                Valuation::MinCoordinate { scale: 1.0 },
                linear(&[0.4, 0.7]),
            ],
            2,
        )
        .unwrap();
        let b = BidProfile::new(vec![vec![0.1, 0.05], vec![0.2, 0.0]]).unwrap();
        let mut buf = Vec::new();
        for i in 0..2 {
            let direct = utility(&inst, i, &b).unwrap();
            let fast =
                utility_against(&inst, i, b.row(i), &b.opponent_totals(i), &mut buf).unwrap();
            assert!((direct - fast).abs() < 1e-15);
        }
    }
}
