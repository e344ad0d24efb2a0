//! Seeded random instance suites for the property gates: concave
//! single-resource games, polyhedral games with subadditive single-variable
//! valuations, the subadditive hedge scenarios, and small Bayesian budget
//! scenarios. All generation is deterministic per seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::profile::{AgentType, TypeSpace};
use crate::equilibrium::Grid;
use crate::mechanism::Instance;
use crate::valuation::{PiecewiseConcave, Valuation};
use crate::Result;

fn stream_rng(seed: u64, idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx as u64);
    rng
}

fn concave_curve(rng: &mut ChaCha8Rng, top: f64) -> Result<PiecewiseConcave> {
    let mut slope = top * (0.4 + 0.6 * rng.gen::<f64>());
    let mut slopes = Vec::with_capacity(4);
    for _ in 0..4 {
        slopes.push(slope);
        slope *= 0.35 + 0.6 * rng.gen::<f64>();
    }
    PiecewiseConcave::from_slopes(&slopes)
}

/// Single-resource instances with 2 to 4 agents and random concave
/// piecewise-linear valuations (breakpoints on quarters).
pub fn concave_single_resource_suite(seed: u64, count: usize) -> Result<Vec<Instance>> {
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rng = stream_rng(seed, idx);
        let n = rng.gen_range(2..=4);
        let valuations = (0..n)
            .map(|_| {
                Ok(Valuation::AdditiveConcavePiecewise {
                    curves: vec![concave_curve(&mut rng, 1.3)?],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Instance::standard(valuations, 1)?);
    }
    Ok(out)
}

/// Polyhedral instances with up to 3 agents, up to 2 constraint rows, and
/// single-variable subadditive valuations (concave curves, linear slopes,
/// or jump-at-one curves). Every agent has at least one positive
/// coefficient, and coefficients are at least 1 so the bottleneck
/// allocation stays inside the valuation domain [0, 1].
pub fn polyhedral_subadditive_suite(seed: u64, count: usize) -> Result<Vec<Instance>> {
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rng = stream_rng(seed, idx);
        let n = rng.gen_range(2..=3);
        let rows = rng.gen_range(1..=2);
        let mut constraints = vec![vec![0.0; n]; rows];
        for row in constraints.iter_mut() {
            for a in row.iter_mut() {
                let zero = rng.gen::<f64>() < 0.25 && rows > 1;
                *a = if zero { 0.0 } else { 1.0 + 1.5 * rng.gen::<f64>() };
            }
        }
        // Guarantee every agent appears in some row.
        for i in 0..n {
            if constraints.iter().all(|row| row[i] == 0.0) {
                constraints[0][i] = 1.0 + 1.5 * rng.gen::<f64>();
            }
        }
        let valuations = (0..n)
            .map(|_| {
                let pick: f64 = rng.gen();
                Ok(if pick < 0.4 {
                    Valuation::AdditiveConcavePiecewise {
                        curves: vec![concave_curve(&mut rng, 1.2)?],
                    }
                } else if pick < 0.7 {
                    Valuation::Linear {
                        weights: vec![0.3 + 0.9 * rng.gen::<f64>()],
                    }
                } else {
                    Valuation::PolyJump {
                        epsilon: 0.1 + 0.8 * rng.gen::<f64>(),
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Instance::polyhedral(valuations, constraints)?)
    }
    Ok(out)
}

/// One hedge scenario: an instance plus the per-resource bid grid its
/// action sets are built from.
#[derive(Clone, Debug)]
pub struct HedgeScenario {
    pub id: String,
    pub instance: Instance,
    pub grid: Grid,
}

/// The fixed subadditive suite for no-regret runs: linear and concave
/// single-resource games plus two-resource games pairing threshold and
/// additive-concave valuations. Grid step is 0.01 throughout.
pub fn subadditive_hedge_suite(seed: u64) -> Result<Vec<HedgeScenario>> {
    let mut out = Vec::new();
    let mut push = |id: String, instance: Instance, upper: f64| -> Result<()> {
        out.push(HedgeScenario {
            id,
            instance,
            grid: Grid::range(0.0, upper, 0.01)?,
        });
        Ok(())
    };

    for idx in 0..4 {
        let mut rng = stream_rng(seed, idx);
        let w0 = 0.5 + 0.5 * rng.gen::<f64>();
        let w1 = 0.5 + 0.5 * rng.gen::<f64>();
        push(
            format!("hedge-linear-{idx}"),
            Instance::standard(
                vec![
                    Valuation::Linear { weights: vec![w0] },
                    Valuation::Linear { weights: vec![w1] },
                ],
                1,
            )?,
            0.3,
        )?;
    }
    for idx in 4..6 {
        let mut rng = stream_rng(seed, idx);
        let n = 2 + (idx % 2);
        let valuations = (0..n)
            .map(|_| {
                Ok(Valuation::AdditiveConcavePiecewise {
                    curves: vec![concave_curve(&mut rng, 1.2)?],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        push(
            format!("hedge-concave-{idx}"),
            Instance::standard(valuations, 1)?,
            0.3,
        )?;
    }
    // Two-resource threshold pair, scales small enough that 25 grid points
    // per resource cover the profitable bid range.
    let v_high = 0.4;
    let v_low = v_high / 2f64.sqrt();
    push(
        "hedge-threshold-pair".into(),
        Instance::standard(
            vec![
                Valuation::ThresholdLow {
                    threshold: 0.5,
                    low: v_low,
                },
                Valuation::ThresholdHigh {
                    threshold: 0.5,
                    high: v_high,
                },
            ],
            2,
        )?,
        0.24,
    )?;
    {
        let mut rng = stream_rng(seed, 7);
        push(
            "hedge-additive-pair".into(),
            Instance::standard(
                vec![
                    Valuation::AdditiveConcavePiecewise {
                        curves: vec![concave_curve(&mut rng, 1.0)?, concave_curve(&mut rng, 1.0)?],
                    },
                    Valuation::AdditiveConcavePiecewise {
                        curves: vec![concave_curve(&mut rng, 1.0)?, concave_curve(&mut rng, 1.0)?],
                    },
                ],
                2,
            )?,
            0.2,
        )?;
    }
    Ok(out)
}

/// A Bayesian budget scenario: a single-resource instance shell plus a
/// finite type space (at most 4 types per agent) carrying concave
/// valuations and per-type budgets.
#[derive(Clone, Debug)]
pub struct BayesianBudgetScenario {
    pub id: String,
    pub instance: Instance,
    pub types: TypeSpace,
    pub grid: Grid,
}

/// Small Bayesian single-resource concave scenarios with budgets.
pub fn bayesian_budget_scenarios(seed: u64, count: usize) -> Result<Vec<BayesianBudgetScenario>> {
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rng = stream_rng(seed, 100 + idx);
        let n = 2;
        let mut agents = Vec::with_capacity(n);
        for _ in 0..n {
            let k = rng.gen_range(2..=4);
            let mut weights = vec![0.0; k];
            let mut total = 0.0;
            for w in weights.iter_mut() {
                *w = 0.2 + rng.gen::<f64>();
                total += *w;
            }
            let types = (0..k)
                .map(|t| {
                    let budget = if rng.gen::<f64>() < 0.5 {
                        0.05 + 0.3 * rng.gen::<f64>()
                    } else {
                        10.0
                    };
                    Ok(AgentType {
                        valuation: Valuation::AdditiveConcavePiecewise {
                            curves: vec![concave_curve(&mut rng, 1.2)?],
                        },
                        probability: weights[t] / total,
                        budget: Some(budget),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            agents.push(types);
        }
        let types = TypeSpace::new(agents)?;
        let shell = Instance::standard(
            vec![
                types.agent(0)[0].valuation.clone(),
                types.agent(1)[0].valuation.clone(),
            ],
            1,
        )?;
        out.push(BayesianBudgetScenario {
            id: format!("bayes-budget-{idx}"),
            instance: shell,
            types,
            grid: Grid::range(0.0, 0.3, 0.01)?,
        });
    }
    Ok(out)
}
