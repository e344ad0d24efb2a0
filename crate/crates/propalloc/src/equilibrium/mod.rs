//! Best responses, best-response dynamics, no-regret learning, and
//! epsilon-equilibrium verifiers.
//!
//! Every verifier is grid-relative: an epsilon report certifies that no
//! deviation *from the stated candidate set* (a joint grid, single-coordinate
//! moves, or an explicit list, plus local refinement) gains more than
//! epsilon. The underlying bid spaces are continuous, so this is the
//! strongest statement a finite procedure makes; grids and step sizes are
//! always part of the report.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub mod best_response;
pub mod deviation;
pub mod dynamics;
pub mod hedge;
pub mod profile;
pub mod verify;

pub use best_response::{best_response, best_response_linear, Opponents};
pub use deviation::{
    lemma1_diagnostic, lemma3_diagnostic, lemma3_truncation_set, DeviationDiagnostic,
    Lemma1Deviation, Lemma3Deviation,
};
pub use dynamics::{br_dynamics, BrDynamicsOutcome};
pub use hedge::{bid_grid_actions, hedge_learn, HedgeOutcome, StepSchedule};
pub use profile::{
    AgentType, CorrelatedProfile, FiniteDist, MixedProfile, Strategy, StrategyMap, TypeSpace,
};
pub use verify::{
    estimate_expected_welfare, verify_bayesian_ne, verify_mixed_ne, verify_pure_ne, McConfig,
};

/// The golden ratio; default deviation scale for the budget-truncation
/// arguments.
pub const GOLDEN_RATIO: f64 = 1.618033988749895;

/// A one-dimensional bid grid, either a uniform range or explicit points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    Range { lower: f64, upper: f64, step: f64 },
    Points(Vec<f64>),
}

impl Grid {
    pub fn range(lower: f64, upper: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(lower >= 0.0) || upper < lower {
            return Err(Error::InvalidConfig(format!(
                "grid needs step > 0 and upper >= lower >= 0, got [{lower}, {upper}] step {step}"
            )));
        }
        Ok(Grid::Range { lower, upper, step })
    }

    /// Materializes the grid points in increasing order; a range always
    /// includes its upper endpoint.
    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::Points(pts) => pts.clone(),
            Grid::Range { lower, upper, step } => {
                let count = ((upper - lower) / step).floor() as usize;
                let mut pts: Vec<f64> = (0..=count).map(|c| lower + c as f64 * step).collect();
                if let Some(last) = pts.last() {
                    if upper - last > step * 1e-9 {
                        pts.push(*upper);
                    }
                }
                pts
            }
        }
    }

    pub fn step(&self) -> f64 {
        match self {
            Grid::Range { step, .. } => *step,
            Grid::Points(pts) => pts
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Grid::Range { lower, upper, step } => format!("[{lower}, {upper}] step {step}"),
            Grid::Points(pts) => format!("{} explicit points", pts.len()),
        }
    }
}

/// Which deviation candidates a verifier evaluates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationPlan {
    /// Full cartesian product of the grid over the resources.
    #[default]
    JointGrid,
    /// Single-coordinate modifications of the incumbent bid, one resource at
    /// a time. Exact for additive utilities; for the paper constructions the
    /// proofs establish that these deviations dominate.
    PerResource,
    /// Caller-supplied candidate bid vectors, one list per agent.
    Explicit(Vec<Vec<Vec<f64>>>),
}

/// Search and verification parameters: the base bid grid, local refinement
/// depth, the lambda scale for truncation deviations, the seed for any
/// sampling, and the epsilon threshold a verdict is stated at.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    pub grid: Grid,
    pub refinement_rounds: usize,
    pub lambda: f64,
    pub seed: u64,
    pub eps_tolerance: f64,
    pub deviations: DeviationPlan,
}

impl SearchConfig {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            refinement_rounds: 3,
            lambda: GOLDEN_RATIO,
            seed: 0,
            eps_tolerance: 1e-6,
            deviations: DeviationPlan::JointGrid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 1, got {}",
                self.lambda
            )));
        }
        match &self.grid {
            Grid::Range { lower, upper, step } => {
                if !(*step > 0.0) || *lower < 0.0 || upper < lower {
                    return Err(Error::InvalidConfig("malformed grid range".into()));
                }
            }
            Grid::Points(pts) => {
                if pts.is_empty() || pts.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidConfig("malformed grid points".into()));
                }
            }
        }
        Ok(())
    }

    pub fn with_refinement(mut self, rounds: usize) -> Self {
        self.refinement_rounds = rounds;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_eps_tolerance(mut self, tol: f64) -> Self {
        self.eps_tolerance = tol;
        self
    }

    pub fn with_deviations(mut self, plan: DeviationPlan) -> Self {
        self.deviations = plan;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self::new(Grid::Range {
            lower: 0.0,
            upper: 1.0,
            step: 0.01,
        })
    }
}

/// Per-agent deviation summary inside an [`EquilibriumReport`].
#[derive(Clone, Debug, Serialize)]
pub struct AgentReport {
    pub agent: usize,
    pub eps: f64,
    pub ci_halfwidth: Option<f64>,
    pub best_deviation: Option<Vec<f64>>,
}

/// Outcome of an equilibrium verification.
#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumReport {
    /// Agent attaining the maximum deviation gain.
    pub agent: usize,
    /// Maximum deviation gain over agents (and types, for Bayesian runs).
    pub eps: f64,
    /// Description of the deviation grid the certificate is relative to.
    pub grid: String,
    /// Monte-Carlo samples used (0 for exact enumeration).
    pub samples: usize,
    /// Normal-approximation confidence half-width of `eps`, when sampled.
    pub ci_halfwidth: Option<f64>,
    /// Whether `eps <= tolerance`.
    pub verdict: bool,
    pub tolerance: f64,
    pub agents: Vec<AgentReport>,
}

impl EquilibriumReport {
    pub(crate) fn from_agents(
        agents: Vec<AgentReport>,
        grid: String,
        samples: usize,
        tolerance: f64,
    ) -> Self {
        let (argmax, eps, ci) = agents.iter().fold(
            (0usize, f64::NEG_INFINITY, None),
            |(a, e, ci), r| {
                if r.eps > e {
                    (r.agent, r.eps, r.ci_halfwidth)
                } else {
                    (a, e, ci)
                }
            },
        );
        EquilibriumReport {
            agent: argmax,
            eps,
            grid,
            samples,
            ci_halfwidth: ci,
            verdict: eps <= tolerance,
            tolerance,
            agents,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_include_endpoints() {
        let g = Grid::range(0.0, 0.1, 0.01).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[0], 0.0);
        assert!((pts[10] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        assert!(Grid::range(0.0, 1.0, 0.0).is_err());
        assert!(Grid::range(-0.1, 1.0, 0.1).is_err());
        assert!(Grid::range(0.5, 0.4, 0.1).is_err());
    }

    #[test]
    fn config_validates_lambda() {
        let cfg = SearchConfig::default().with_lambda(0.5);
        assert!(cfg.validate().is_err());
        assert!(SearchConfig::default().validate().is_ok());
    }

    #[test]
    fn report_argmax_over_agents() {
        let report = EquilibriumReport::from_agents(
            vec![
                AgentReport {
                    agent: 0,
                    eps: 1e-9,
                    ci_halfwidth: None,
                    best_deviation: None,
                },
                AgentReport {
                    agent: 1,
                    eps: 0.2,
                    ci_halfwidth: None,
                    best_deviation: None,
                },
            ],
            "test".into(),
            0,
            1e-6,
        );
        assert_eq!(report.agent, 1);
        assert!(!report.verdict);
        assert_eq!(report.eps, 0.2);
    }
}
