//! Executable builders for the lower-bound instances, with their closed-form
//! equilibrium profiles, welfare values, and tailored deviation candidate
//! sets. The closed forms bypass the grid oracle where enumeration is out of
//! reach and are cross-checked against it at small sizes in the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::profile::{AgentType, FiniteDist, Strategy, StrategyMap, TypeSpace};
use crate::equilibrium::{DeviationPlan, Grid, SearchConfig};
use crate::mechanism::{allocate, BidProfile, Instance, TieBreak};
use crate::valuation::{PiecewiseConcave, Valuation};
use crate::{Error, Result};

/// The Bayesian min-coordinate construction: agent 1 values the minimum
/// fraction across resources, agent 2 draws one resource uniformly and
/// values it at `1/sqrt(m)`. The uniform bid `beta` against the single bid
/// `delta` forms a pure Bayesian equilibrium with welfare `2/(sqrt(m)+1)`
/// against an optimum of 1, so the ratio is `(sqrt(m)+1)/2`.
#[derive(Clone, Debug)]
pub struct Thm1Construction {
    pub m: usize,
    pub delta: f64,
    pub beta: f64,
    pub equilibrium_welfare: f64,
    pub optimal_welfare: f64,
    pub ratio: f64,
    /// At m = 1 the construction collapses and the bound is vacuous.
    pub degenerate: bool,
}

impl Thm1Construction {
    /// Verification config on per-resource grids covering both agents'
    /// relevant bid ranges (`beta <= delta` for every m).
    pub fn search_config(&self, step: f64, refinement_rounds: usize) -> Result<SearchConfig> {
        Ok(SearchConfig::new(Grid::range(0.0, 4.0 * self.delta, step)?)
            .with_refinement(refinement_rounds)
            .with_deviations(DeviationPlan::PerResource))
    }

    /// Marginal bid distributions: agent 1 bids `beta` everywhere, agent 2
    /// bids `delta` on a uniformly drawn resource.
    pub fn marginal_profile(&self) -> (FiniteDist, FiniteDist) {
        let a1 = FiniteDist::point(vec![self.beta; self.m]);
        let support = (0..self.m)
            .map(|j| {
                let mut bid = vec![0.0; self.m];
                bid[j] = self.delta;
                (bid, 1.0 / self.m as f64)
            })
            .collect();
        (a1, FiniteDist::new(support).expect("valid uniform support"))
    }

    /// Monte-Carlo estimate of the equilibrium welfare: agent 2's type and
    /// bid are drawn jointly (her valuation follows the drawn resource).
    /// Returns (mean, standard error).
    pub fn sampled_equilibrium_welfare(
        &self,
        instance: &Instance,
        types: &TypeSpace,
        samples: usize,
        seed: u64,
    ) -> Result<(f64, f64)> {
        if samples < 2 {
            return Err(Error::TooFewSamples {
                got: samples,
                min: 2,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..samples {
            let j = rng.gen_range(0..self.m);
            let ty = &types.agent(1)[j];
            let realized = instance.with_valuation(1, ty.valuation.clone());
            let mut rows = vec![vec![self.beta; self.m], vec![0.0; self.m]];
            rows[1][j] = self.delta;
            let b = BidProfile::new(rows)?;
            let x = allocate(&realized, &b)?;
            let mut sw = 0.0;
            for i in 0..2 {
                sw += realized.valuation(i).eval(x.agent(i))?;
            }
            sum += sw;
            sq += sw * sw;
        }
        let nf = samples as f64;
        let mean = sum / nf;
        let var = ((sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
        Ok((mean, (var / nf).sqrt()))
    }

    /// Expected equilibrium welfare computed through the mechanism, exactly
    /// enumerating agent 2's type.
    pub fn exact_equilibrium_welfare(&self, instance: &Instance, types: &TypeSpace) -> Result<f64> {
        let mut total = 0.0;
        for (j, ty) in types.agent(1).iter().enumerate() {
            let mut rows = vec![vec![self.beta; self.m], vec![0.0; self.m]];
            rows[1][j] = self.delta;
            let realized = instance.with_valuation(1, ty.valuation.clone());
            let b = BidProfile::new(rows)?;
            let x = allocate(&realized, &b)?;
            let mut sw = 0.0;
            for i in 0..2 {
                sw += realized.valuation(i).eval(x.agent(i))?;
            }
            total += ty.probability * sw;
        }
        Ok(total)
    }
}

/// Builds the min-coordinate Bayesian instance for `m` resources.
pub fn build_thm1(m: usize) -> Result<(Instance, TypeSpace, StrategyMap, Thm1Construction)> {
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one resource".into()));
    }
    let mf = m as f64;
    let delta = 1.0 / (mf.sqrt() + 1.0).powi(2);
    let beta = (delta / mf).sqrt() - delta;
    let scale = 1.0 / mf.sqrt();

    let instance = Instance::standard(
        vec![
            Valuation::MinCoordinate { scale: 1.0 },
            Valuation::ScaledCoordinate {
                resource: 0,
                scale,
            },
        ],
        m,
    )?;

    let agent2_types: Vec<AgentType> = (0..m)
        .map(|j| AgentType {
            valuation: Valuation::ScaledCoordinate { resource: j, scale },
            probability: 1.0 / mf,
            budget: None,
        })
        .collect();
    let types = TypeSpace::new(vec![
        vec![AgentType {
            valuation: Valuation::MinCoordinate { scale: 1.0 },
            probability: 1.0,
            budget: None,
        }],
        agent2_types,
    ])?;

    let agent2_strategies: Vec<FiniteDist> = (0..m)
        .map(|j| {
            let mut bid = vec![0.0; m];
            bid[j] = delta;
            FiniteDist::point(bid)
        })
        .collect();
    let map = StrategyMap::new(vec![
        vec![FiniteDist::point(vec![beta; m])],
        agent2_strategies,
    ])?;

    let construction = Thm1Construction {
        m,
        delta,
        beta,
        equilibrium_welfare: 2.0 / (mf.sqrt() + 1.0),
        optimal_welfare: 1.0,
        ratio: (mf.sqrt() + 1.0) / 2.0,
        degenerate: m == 1,
    };
    Ok((instance, types, map, construction))
}

/// The scale-free lower bound specialized to the proportional mechanism
/// (per-resource payment equals the bid): threshold valuations at `h = 1/2`,
/// `v = V/sqrt(m)`, `T2 = V/m`, agent 1 bidding one uniformly drawn resource
/// with CDF `G(y) = m y / V` on `[0, T2]`, agent 2 bidding a common value
/// with CDF `F(z) = (v - T2 + z)/v` carrying an atom of `1 - 1/sqrt(m)` at
/// zero, ties on dead resources to agent 2.
#[derive(Clone, Debug)]
pub struct ScaleFreeConstruction {
    pub m: usize,
    /// The high valuation scale `V`.
    pub v_high: f64,
    /// `v = V / sqrt(m)`.
    pub v_low: f64,
    /// Common bid ceiling `T2 = V / m`.
    pub t2: f64,
    /// Mass of agent 2's atom at zero, `1 - 1/sqrt(m)`.
    pub atom_at_zero: f64,
    pub threshold: f64,
    /// `2 (1 + 1/sqrt(m)) / (1 + 3/sqrt(m))`, increasing to 2.
    pub ratio_bound: f64,
    /// `V (1 + 3/sqrt(m))`, the proof's bound on expected welfare at play.
    pub equilibrium_welfare_upper: f64,
    /// `2 (V + v)`.
    pub optimal_welfare: f64,
    /// Expected utility of agent 1 bidding any `y` in `(0, T2]`: `2v - T2`.
    pub agent1_pure_utility: f64,
}

impl ScaleFreeConstruction {
    /// Deviation candidates per agent: single-resource bids across every
    /// resource (coarse) plus a fine sweep on the first resource for agent
    /// 1; common-bid sweeps plus per-resource probes for agent 2. Bids up
    /// to `2 T2` are included; beyond that payments dominate both values.
    pub fn deviation_candidates(&self) -> Vec<Vec<Vec<f64>>> {
        let m = self.m;
        let axis = |j: usize, y: f64| {
            let mut bid = vec![0.0; m];
            bid[j] = y;
            bid
        };
        let mut agent1: Vec<Vec<f64>> = vec![vec![0.0; m]];
        for j in 0..m {
            for k in 1..=3 {
                agent1.push(axis(j, k as f64 * self.t2 / 2.0));
            }
        }
        for k in 1..=20 {
            agent1.push(axis(0, k as f64 * self.t2 / 10.0));
        }
        let mut agent2: Vec<Vec<f64>> = (0..=20)
            .map(|k| vec![k as f64 * self.t2 / 10.0; m])
            .collect();
        for j in 0..m {
            agent2.push(axis(j, self.t2));
            agent2.push(axis(j, 2.0 * self.t2));
        }
        for k in 1..=10 {
            agent2.push(axis(0, k as f64 * self.t2 / 5.0));
        }
        vec![agent1, agent2]
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig::new(Grid::Range {
            lower: 0.0,
            upper: 2.0 * self.t2,
            step: self.t2 / 10.0,
        })
        .with_deviations(DeviationPlan::Explicit(self.deviation_candidates()))
        .with_eps_tolerance(0.01)
    }
}

/// Agent 1's strategy: one uniformly drawn resource, bid uniform on
/// `(0, T2]` (the inverse of `G` under identity payments).
#[derive(Clone, Debug)]
pub struct ScaleFreeAgent1 {
    m: usize,
    t2: f64,
}

impl Strategy for ScaleFreeAgent1 {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let resource = rng.gen_range(0..self.m);
        let u = 1.0 - rng.gen::<f64>(); // (0, 1]
        let mut bid = vec![0.0; self.m];
        bid[resource] = u * self.t2;
        bid
    }
}

/// Agent 2's strategy: a common bid on every resource, zero with the atom's
/// mass and otherwise the inverse of `F`'s continuous part. The `with_atom`
/// flag exists so tests can knock the atom out and watch the equilibrium
/// break.
#[derive(Clone, Debug)]
pub struct ScaleFreeAgent2 {
    m: usize,
    t2: f64,
    v_low: f64,
    atom: f64,
    with_atom: bool,
}

impl Strategy for ScaleFreeAgent2 {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z = if self.with_atom {
            let u: f64 = rng.gen();
            if u < self.atom {
                0.0
            } else {
                self.t2 - self.v_low * (1.0 - u)
            }
        } else {
            // Atomless fixture: the continuous part alone, uniform on (0, T2].
            (1.0 - rng.gen::<f64>()) * self.t2
        };
        vec![z; self.m]
    }
}

/// Sampler pair for the scale-free construction.
#[derive(Clone, Debug)]
pub struct ScaleFreeSamplers {
    pub agent1: ScaleFreeAgent1,
    pub agent2: ScaleFreeAgent2,
}

impl ScaleFreeSamplers {
    pub fn strategies(&self) -> Vec<&dyn Strategy> {
        vec![&self.agent1, &self.agent2]
    }

    /// Fixture with agent 2's atom at zero removed; no longer an equilibrium.
    pub fn without_atom(&self) -> ScaleFreeSamplers {
        let mut out = self.clone();
        out.agent2.with_atom = false;
        out
    }
}

/// Builds the scale-free lower-bound instance for `m >= 2` resources.
pub fn build_scalefree(
    m: usize,
    v_high: f64,
) -> Result<(Instance, ScaleFreeSamplers, ScaleFreeConstruction)> {
    if m < 2 {
        return Err(Error::InvalidConfig(
            "the scale-free construction needs m >= 2".into(),
        ));
    }
    if !(v_high > 0.0) {
        return Err(Error::InvalidConfig("V must be positive".into()));
    }
    let mf = m as f64;
    let v_low = v_high / mf.sqrt();
    let t2 = v_high / mf;
    let threshold = 0.5;
    let instance = Instance::standard(
        vec![
            Valuation::ThresholdLow {
                threshold,
                low: v_low,
            },
            Valuation::ThresholdHigh {
                threshold,
                high: v_high,
            },
        ],
        m,
    )?
    .with_tie_break(TieBreak::ToAgent(1))?;

    let samplers = ScaleFreeSamplers {
        agent1: ScaleFreeAgent1 { m, t2 },
        agent2: ScaleFreeAgent2 {
            m,
            t2,
            v_low,
            atom: 1.0 - 1.0 / mf.sqrt(),
            with_atom: true,
        },
    };
    let construction = ScaleFreeConstruction {
        m,
        v_high,
        v_low,
        t2,
        atom_at_zero: 1.0 - 1.0 / mf.sqrt(),
        threshold,
        ratio_bound: 2.0 * (1.0 + 1.0 / mf.sqrt()) / (1.0 + 3.0 / mf.sqrt()),
        equilibrium_welfare_upper: v_high * (1.0 + 3.0 / mf.sqrt()),
        optimal_welfare: 2.0 * (v_high + v_low),
        agent1_pure_utility: 2.0 * v_low - t2,
    };
    Ok((instance, samplers, construction))
}

/// The polyhedral lower bound: one constraint row `x_1 + x_2 <= 1`, a
/// jump-at-one valuation against a linear one, and the pure equilibrium at
/// `(eps/4, eps/4)` with welfare `1 + eps` against an optimum of 2.
#[derive(Clone, Debug)]
pub struct PolyLbConstruction {
    pub epsilon: f64,
    pub equilibrium_welfare: f64,
    pub optimal_welfare: f64,
    pub ratio: f64,
}

impl PolyLbConstruction {
    pub fn search_config(&self, step: f64, refinement_rounds: usize) -> Result<SearchConfig> {
        Ok(
            SearchConfig::new(Grid::range(0.0, 2.0 * self.epsilon, step)?)
                .with_refinement(refinement_rounds)
                .with_deviations(DeviationPlan::PerResource),
        )
    }
}

/// Builds the polyhedral lower-bound instance for `0 < eps < 1`.
pub fn build_poly_lb(epsilon: f64) -> Result<(Instance, BidProfile, PolyLbConstruction)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let instance = Instance::polyhedral(
        vec![
            Valuation::PolyJump { epsilon },
            Valuation::Linear {
                weights: vec![epsilon],
            },
        ],
        vec![vec![1.0, 1.0]],
    )?;
    let profile = BidProfile::new(vec![vec![epsilon / 4.0], vec![epsilon / 4.0]])?;
    let construction = PolyLbConstruction {
        epsilon,
        equilibrium_welfare: 1.0 + epsilon,
        optimal_welfare: 2.0,
        ratio: 2.0 / (1.0 + epsilon),
    };
    Ok((instance, profile, construction))
}

/// Seeded random budgeted instances: single-resource and two-resource games
/// with concave or threshold (subadditive) valuations and budgets spanning
/// binding, moderate, and inactive regimes. Deterministic per seed.
pub fn build_budget_suite(seed: u64, count: usize) -> Result<Vec<Instance>> {
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        let single_resource = idx % 10 < 7;
        let instance = if single_resource {
            let n = rng.gen_range(2..=3);
            let valuations = (0..n)
                .map(|_| random_concave_curve(&mut rng, 1.2))
                .collect::<Result<Vec<_>>>()?;
            Instance::standard(valuations, 1)?
        } else {
            let v0 = Valuation::AdditiveConcavePiecewise {
                curves: vec![
                    random_curve(&mut rng, 0.8)?,
                    random_curve(&mut rng, 0.8)?,
                ],
            };
            let v1 = if rng.gen::<f64>() < 0.5 {
                Valuation::ThresholdLow {
                    threshold: 0.5,
                    low: 0.2 + 0.3 * rng.gen::<f64>(),
                }
            } else {
                Valuation::ThresholdHigh {
                    threshold: 0.5,
                    high: 0.2 + 0.3 * rng.gen::<f64>(),
                }
            };
            Instance::standard(vec![v0, v1], 2)?
        };
        let n = instance.n();
        let mut budgets = Vec::with_capacity(n);
        for i in 0..n {
            let u: f64 = rng.gen();
            let c = if idx % 10 == 9 && i == 0 {
                0.0
            } else if u < 0.35 {
                0.05 + 0.25 * rng.gen::<f64>()
            } else if u < 0.7 {
                0.3 + 0.5 * rng.gen::<f64>()
            } else {
                1e9
            };
            budgets.push(c);
        }
        out.push(instance.with_budgets(budgets)?);
    }
    Ok(out)
}

fn random_curve(rng: &mut ChaCha8Rng, top_slope: f64) -> Result<PiecewiseConcave> {
    let mut slope = top_slope * (0.5 + 0.5 * rng.gen::<f64>());
    let mut slopes = Vec::with_capacity(4);
    for _ in 0..4 {
        slopes.push(slope);
        slope *= 0.3 + 0.6 * rng.gen::<f64>();
    }
    PiecewiseConcave::from_slopes(&slopes)
}

fn random_concave_curve(rng: &mut ChaCha8Rng, top_slope: f64) -> Result<Valuation> {
    Ok(Valuation::AdditiveConcavePiecewise {
        curves: vec![random_curve(rng, top_slope)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::welfare::{expected_optimal_welfare, optimal_welfare, Benchmark};

    #[test]
    fn thm1_m4_closed_forms() {
        let (_, _, _, c) = build_thm1(4).unwrap();
        assert!((c.delta - 1.0 / 9.0).abs() < 1e-15);
        assert!((c.beta - 1.0 / 18.0).abs() < 1e-15);
        assert!((c.equilibrium_welfare - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.ratio - 1.5).abs() < 1e-15);
        assert!(!c.degenerate);
    }

    #[test]
    fn thm1_m1_is_degenerate() {
        let (_, _, _, c) = build_thm1(1).unwrap();
        assert!(c.degenerate);
        assert!((c.ratio - 1.0).abs() < 1e-15);
        assert!(c.beta > 0.0);
    }

    #[test]
    fn thm1_m64_ratio_exceeds_bound() {
        let (_, _, _, c) = build_thm1(64).unwrap();
        assert!((c.ratio - 4.5).abs() < 1e-12);
        assert!(c.ratio >= 64f64.sqrt() / 2.0);
        assert!(c.beta > 0.0 && c.delta > 0.0 && c.delta <= 0.25);
    }

    #[test]
    fn thm1_exact_equilibrium_welfare_matches_closed_form() {
        for m in [2, 4, 16] {
            let (instance, types, _, c) = build_thm1(m).unwrap();
            let exact = c.exact_equilibrium_welfare(&instance, &types).unwrap();
            assert!(
                (exact - c.equilibrium_welfare).abs() < 1e-12,
                "m={m}: {exact} vs {}",
                c.equilibrium_welfare
            );
        }
    }

    #[test]
    fn thm1_grid_oracle_agrees_with_closed_form_optimum_at_small_m() {
        let (instance, types, _, c) = build_thm1(4).unwrap();
        let opt = expected_optimal_welfare(&instance, &types, 2, Benchmark::Social).unwrap();
        assert!((opt - c.optimal_welfare).abs() < 1e-12);
    }

    #[test]
    fn scalefree_m100_fields() {
        let (_, _, c) = build_scalefree(100, 1.0).unwrap();
        assert!((c.v_low - 0.1).abs() < 1e-15);
        assert!((c.t2 - 0.01).abs() < 1e-15);
        assert!((c.atom_at_zero - 0.9).abs() < 1e-15);
        assert!((c.ratio_bound - 2.0 * 1.1 / 1.3).abs() < 1e-12);
        assert!((c.optimal_welfare - 2.2).abs() < 1e-15);
        assert!((c.agent1_pure_utility - 0.19).abs() < 1e-15);
        assert!((c.equilibrium_welfare_upper - 1.3).abs() < 1e-15);
    }

    #[test]
    fn scalefree_ratio_bound_increases_to_two() {
        let bounds: Vec<f64> = [25, 100, 400, 2500]
            .iter()
            .map(|m| build_scalefree(*m, 1.0).unwrap().2.ratio_bound)
            .collect();
        for w in bounds.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(bounds[3] < 2.0);
    }

    #[test]
    fn scalefree_grid_oracle_matches_closed_form_optimum_at_small_m() {
        let (instance, _, c) = build_scalefree(4, 1.0).unwrap();
        let report = optimal_welfare(&instance, 2, Benchmark::Social).unwrap();
        assert!(
            (report.value - c.optimal_welfare).abs() < 1e-12,
            "grid {} vs closed {}",
            report.value,
            c.optimal_welfare
        );
    }

    #[test]
    fn scalefree_cdf_samplers_reproduce_f_and_g() {
        use rand::SeedableRng;
        // Kolmogorov-Smirnov distance of the empirical CDFs against the
        // target CDFs at 1e5 draws.
        let (_, samplers, c) = build_scalefree(100, 1.0).unwrap();
        let draws = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ys = Vec::with_capacity(draws);
        let mut zs = Vec::with_capacity(draws);
        for _ in 0..draws {
            let b1 = samplers.agent1.sample(&mut rng);
            ys.push(b1.iter().copied().fold(0.0, f64::max));
            let b2 = samplers.agent2.sample(&mut rng);
            zs.push(b2[0]);
        }
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let g = |y: f64| (y / c.t2).clamp(0.0, 1.0);
        let f = |z: f64| {
            if z < 0.0 {
                0.0
            } else {
                ((c.v_low - c.t2 + z) / c.v_low).clamp(0.0, 1.0)
            }
        };
        // Tie-aware KS distance: the empirical CDF jumps once per distinct
        // value, so compare the target CDF (and its left limit, which
        // differs at the atom) against the pre- and post-jump heights.
        let ks = |sorted: &[f64], cdf: &dyn Fn(f64) -> f64, cdf_left: &dyn Fn(f64) -> f64| {
            let n = sorted.len() as f64;
            let mut d: f64 = 0.0;
            let mut start = 0usize;
            while start < sorted.len() {
                let v = sorted[start];
                let mut end = start;
                while end < sorted.len() && sorted[end] == v {
                    end += 1;
                }
                d = d
                    .max((cdf(v) - end as f64 / n).abs())
                    .max((cdf_left(v) - start as f64 / n).abs());
                start = end;
            }
            d
        };
        assert!(ks(&ys, &g, &g) <= 0.01, "G KS distance too large");
        let f_left = |z: f64| if z <= 0.0 { 0.0 } else { f(z) };
        assert!(ks(&zs, &f, &f_left) <= 0.01, "F KS distance too large");
        // The atom at zero has the right mass.
        let zero_mass = zs.iter().filter(|z| **z == 0.0).count() as f64 / draws as f64;
        assert!((zero_mass - c.atom_at_zero).abs() < 0.01);
    }

    #[test]
    fn poly_lb_fields_and_profile() {
        let (instance, profile, c) = build_poly_lb(0.2).unwrap();
        assert!((c.equilibrium_welfare - 1.2).abs() < 1e-15);
        assert!((c.ratio - 2.0 / 1.2).abs() < 1e-15);
        let x = crate::mechanism::allocate_polyhedral(&instance, &profile).unwrap();
        assert_eq!(x.agent(0), &[0.5]);
        let sw = crate::welfare::social_welfare(&instance, &x).unwrap();
        assert!((sw - c.equilibrium_welfare).abs() < 1e-12);

        let (_, _, c) = build_poly_lb(0.01).unwrap();
        assert!((c.ratio - 2.0 / 1.01).abs() < 1e-12);
        assert!(build_poly_lb(0.0).is_err());
        assert!(build_poly_lb(1.0).is_err());
    }

    #[test]
    fn budget_suite_is_deterministic_and_spans_regimes() {
        let a = build_budget_suite(7, 50).unwrap();
        let b = build_budget_suite(7, 50).unwrap();
        assert_eq!(a.len(), 50);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.budgets(), y.budgets());
            assert_eq!(
                serde_json::to_string(x.valuations()).unwrap(),
                serde_json::to_string(y.valuations()).unwrap()
            );
        }
        let budgets: Vec<f64> = a.iter().flat_map(|i| i.budgets().unwrap().to_vec()).collect();
        assert!(budgets.iter().any(|c| *c == 0.0));
        assert!(budgets.iter().any(|c| *c < 0.31 && *c > 0.0));
        assert!(budgets.iter().any(|c| *c >= 1e9));
    }
}
