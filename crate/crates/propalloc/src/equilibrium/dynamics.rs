//! Round-robin best-response dynamics.

use crate::mechanism::{BidProfile, Instance};
use crate::Result;

use super::best_response::{best_response_inner, Opponents, ResponseProblem};
use super::SearchConfig;

/// Trace and verdict of a best-response run. Non-convergence is a verdict,
/// not an error.
#[derive(Clone, Debug)]
pub struct BrDynamicsOutcome {
    /// Profile after each completed round, starting with the initial one.
    pub trace: Vec<BidProfile>,
    pub final_profile: BidProfile,
    pub converged: bool,
    pub rounds: usize,
    /// Maximum absolute bid change during the last completed round.
    pub residual: f64,
}

/// Gauss-Seidel best-response dynamics: agents update in index order within
/// a round, each against the current profile; the run converges when the
/// largest bid change over a full round drops below `tol`.
pub fn br_dynamics(
    instance: &Instance,
    init: &BidProfile,
    max_rounds: usize,
    tol: f64,
    cfg: &SearchConfig,
) -> Result<BrDynamicsOutcome> {
    cfg.validate()?;
    let mut current = init.clone();
    let mut trace = vec![current.clone()];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut rounds = 0usize;
    for _ in 0..max_rounds {
        let mut round_delta: f64 = 0.0;
        for i in 0..instance.n() {
            let problem = ResponseProblem::new(instance, i, &Opponents::Profile(&current))?;
            let (bid, _) = best_response_inner(instance, i, &problem, Some(current.row(i)), cfg)?;
            let delta = bid
                .iter()
                .zip(current.row(i))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            round_delta = round_delta.max(delta);
            current.set_row(i, &bid);
        }
        rounds += 1;
        trace.push(current.clone());
        residual = round_delta;
        if round_delta < tol {
            converged = true;
            break;
        }
    }
    Ok(BrDynamicsOutcome {
        trace,
        final_profile: current,
        converged,
        rounds,
        residual,
    })
}
