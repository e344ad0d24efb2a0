//! Strategy and profile representations: finite bid distributions, product
//! (mixed) profiles, weighted joint distributions, and finite Bayesian type
//! spaces with their strategy maps.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mechanism::BidProfile;
use crate::valuation::Valuation;
use crate::{Error, Result, FEASIBILITY_TOL};

/// A seeded sampler of one agent's bid vector. Implementations must be
/// deterministic given the RNG state.
pub trait Strategy: Send + Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

/// A finite weighted distribution over bid vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDist {
    support: Vec<(Vec<f64>, f64)>,
}

impl FiniteDist {
    pub fn new(support: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let m = support[0].0.len();
        let mut total = 0.0;
        for (bid, p) in &support {
            if bid.len() != m {
                return Err(Error::InvalidDistribution(
                    "support bid vectors must share one length".into(),
                ));
            }
            if bid.iter().any(|b| !b.is_finite() || *b < 0.0) {
                return Err(Error::InvalidDistribution("invalid bid in support".into()));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidDistribution(format!("invalid weight {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > FEASIBILITY_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { support })
    }

    pub fn point(bid: Vec<f64>) -> Self {
        Self {
            support: vec![(bid, 1.0)],
        }
    }

    pub fn support(&self) -> &[(Vec<f64>, f64)] {
        &self.support
    }

    pub fn sample_ref(&self, rng: &mut ChaCha8Rng) -> &[f64] {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (bid, p) in &self.support {
            acc += p;
            if u < acc {
                return bid;
            }
        }
        &self.support.last().unwrap().0
    }
}

impl Strategy for FiniteDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.sample_ref(rng).to_vec()
    }
}

/// A product of independent per-agent finite distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    agents: Vec<FiniteDist>,
}

impl MixedProfile {
    pub fn new(agents: Vec<FiniteDist>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidDistribution("no agents".into()));
        }
        Ok(Self { agents })
    }

    pub fn point_profile(profile: &BidProfile) -> Self {
        Self {
            agents: (0..profile.n())
                .map(|i| FiniteDist::point(profile.row(i).to_vec()))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, i: usize) -> &FiniteDist {
        &self.agents[i]
    }

    pub fn strategies(&self) -> Vec<&dyn Strategy> {
        self.agents.iter().map(|d| d as &dyn Strategy).collect()
    }

    /// Expands the product into an explicit joint distribution. Guarded so a
    /// careless call cannot blow up memory.
    pub fn to_correlated(&self, max_support: usize) -> Result<CorrelatedProfile> {
        let mut size = 1usize;
        for d in &self.agents {
            size = size.saturating_mul(d.support.len());
            if size > max_support {
                return Err(Error::EnumerationGuard(format!(
                    "joint support exceeds {max_support}"
                )));
            }
        }
        let m = self.agents[0].support[0].0.len();
        let mut support = Vec::with_capacity(size);
        let mut idx = vec![0usize; self.n()];
        loop {
            let mut rows = Vec::with_capacity(self.n());
            let mut p = 1.0;
            for (i, d) in self.agents.iter().enumerate() {
                let (bid, w) = &d.support[idx[i]];
                rows.push(bid.clone());
                p *= w;
            }
            support.push((BidProfile::new(rows)?, p));
            // odometer increment
            let mut k = 0;
            loop {
                if k == self.n() {
                    let _ = m;
                    return CorrelatedProfile::new(support);
                }
                idx[k] += 1;
                if idx[k] < self.agents[k].support.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

/// A finite weighted distribution over joint bid profiles.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelatedProfile {
    support: Vec<(BidProfile, f64)>,
}

impl CorrelatedProfile {
    pub fn new(support: Vec<(BidProfile, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let (n, m) = (support[0].0.n(), support[0].0.m());
        let mut total = 0.0;
        for (b, p) in &support {
            if b.n() != n || b.m() != m {
                return Err(Error::InvalidDistribution(
                    "support profiles must share one shape".into(),
                ));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidDistribution(format!("invalid weight {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > FEASIBILITY_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { support })
    }

    pub fn point_mass(profile: BidProfile) -> Self {
        Self {
            support: vec![(profile, 1.0)],
        }
    }

    pub fn support(&self) -> &[(BidProfile, f64)] {
        &self.support
    }

    pub fn n(&self) -> usize {
        self.support[0].0.n()
    }

    pub fn m(&self) -> usize {
        self.support[0].0.m()
    }

    /// Expected value of `f` over the joint distribution.
    pub fn expect<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&BidProfile) -> Result<f64>,
    {
        let mut acc = 0.0;
        for (b, p) in &self.support {
            if *p > 0.0 {
                acc += p * f(b)?;
            }
        }
        Ok(acc)
    }

    /// Expected column totals of all agents except `i`.
    pub fn expected_opponent_bids(&self, i: usize) -> Vec<f64> {
        let m = self.m();
        let mut out = vec![0.0; m];
        for (b, p) in &self.support {
            for (j, o) in out.iter_mut().enumerate() {
                *o += p * b.total_except(i, j);
            }
        }
        out
    }
}

/// One Bayesian type: a valuation, its prior probability, and an optional
/// budget that binds the agent's payments when present.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgentType {
    pub valuation: Valuation,
    pub probability: f64,
    pub budget: Option<f64>,
}

/// Finite independent type spaces, one list of types per agent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeSpace {
    agents: Vec<Vec<AgentType>>,
}

impl TypeSpace {
    pub fn new(agents: Vec<Vec<AgentType>>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidDistribution("no agents".into()));
        }
        for (i, types) in agents.iter().enumerate() {
            if types.is_empty() {
                return Err(Error::InvalidDistribution(format!(
                    "agent {i} has no types"
                )));
            }
            let total: f64 = types.iter().map(|t| t.probability).sum();
            if (total - 1.0).abs() > FEASIBILITY_TOL
                || types.iter().any(|t| t.probability < 0.0)
            {
                return Err(Error::InvalidDistribution(format!(
                    "agent {i} type probabilities sum to {total}"
                )));
            }
        }
        Ok(Self { agents })
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, i: usize) -> &[AgentType] {
        &self.agents[i]
    }

    /// Iterates over full type profiles with their joint probabilities.
    pub fn profiles(&self) -> Vec<(Vec<usize>, f64)> {
        let mut out = vec![(Vec::new(), 1.0)];
        for types in &self.agents {
            let mut next = Vec::with_capacity(out.len() * types.len());
            for (prefix, p) in &out {
                for (t, ty) in types.iter().enumerate() {
                    let mut ids = prefix.clone();
                    ids.push(t);
                    next.push((ids, p * ty.probability));
                }
            }
            out = next;
        }
        out
    }
}

/// Per agent, one bid distribution per type.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrategyMap {
    agents: Vec<Vec<FiniteDist>>,
}

impl StrategyMap {
    pub fn new(agents: Vec<Vec<FiniteDist>>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidDistribution("no agents".into()));
        }
        Ok(Self { agents })
    }

    /// Checks that every type of every agent has a distribution.
    pub fn validate_against(&self, types: &TypeSpace) -> Result<()> {
        if self.agents.len() != types.n() {
            return Err(Error::DimensionMismatch(
                "strategy map agent count differs from type space".into(),
            ));
        }
        for (i, dists) in self.agents.iter().enumerate() {
            if dists.len() != types.agent(i).len() {
                return Err(Error::DimensionMismatch(format!(
                    "agent {i} has {} strategies for {} types",
                    dists.len(),
                    types.agent(i).len()
                )));
            }
        }
        Ok(())
    }

    pub fn agent(&self, i: usize) -> &[FiniteDist] {
        &self.agents[i]
    }

    pub fn dist(&self, i: usize, type_index: usize) -> &FiniteDist {
        &self.agents[i][type_index]
    }
}
