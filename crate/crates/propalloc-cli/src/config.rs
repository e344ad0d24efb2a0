//! Scenario configuration: what to build, how to solve it, how to verify it,
//! and which benchmark to report against. Configs round-trip through JSON.

use serde::{Deserialize, Serialize};

use propalloc::welfare::Benchmark;

/// Which instance(s) a run operates on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    /// Min-coordinate Bayesian lower bound with `m` resources.
    Thm1 { m: usize },
    /// Scale-free mixed lower bound with `m` resources and scale `v_high`.
    Scalefree { m: usize, v_high: f64 },
    /// Polyhedral lower bound at the given epsilon.
    PolyLb { eps: f64 },
    /// Complete-information single-resource game with `n` unit-slope agents.
    Linear { n: usize },
    /// The two-resource threshold pair from the subadditive suite.
    ThresholdPair,
    /// Seeded random budgeted instances.
    BudgetSuite { count: usize },
    /// Seeded random concave single-resource instances.
    ConcaveSuite { count: usize },
    /// Seeded random polyhedral instances.
    PolyhedralSuite { count: usize },
    /// The fixed subadditive no-regret suite.
    SubadditiveSuite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    BrDynamics,
    Hedge,
}

/// How an equilibrium candidate is produced before verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub kind: SolverKind,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_grid_upper")]
    pub grid_upper: f64,
}

fn default_rounds() -> usize {
    100_000
}

fn default_grid_step() -> f64 {
    0.01
}

fn default_grid_upper() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifierKind {
    Pure,
    Mixed,
    Bayesian,
}

/// Deviation-grid and sampling parameters for the verifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierSpec {
    pub kind: VerifierKind,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub grid_step: Option<f64>,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
}

fn default_samples() -> usize {
    100_000
}

fn default_refinement() -> usize {
    3
}

/// A full scenario description; the JSON schema of `propalloc run --config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub solver: Option<SolverSpec>,
    #[serde(default)]
    pub verifier: Option<VerifierSpec>,
    #[serde(default = "default_resolution")]
    pub welfare_resolution: usize,
    #[serde(default = "default_benchmark")]
    pub benchmark: Benchmark,
    #[serde(default)]
    pub seed: u64,
}

fn default_resolution() -> usize {
    20
}

fn default_benchmark() -> Benchmark {
    Benchmark::Social
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            solver: None,
            verifier: None,
            welfare_resolution: default_resolution(),
            benchmark: default_benchmark(),
            seed: 0,
        }
    }
}
