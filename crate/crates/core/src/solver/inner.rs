//! Box-constrained maximization of `g(w) - lambda ||w - anchor||` by
//! multistart projected gradient ascent.

use super::{BoxDomain, Objective, SolverConfig, SolverError};
use crate::probability::CounterRng;
use nalgebra::DVector;

/// Outcome of one inner maximization.
#[derive(Debug, Clone)]
pub struct InnerSupResult {
    pub value: f64,
    pub maximizer: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Approximate `sup_{w in box} g(w) - lambda ||w - anchor||`.
///
/// Starts: the anchor first (so a dominating penalty returns `g(anchor)`
/// exactly), then alternating box vertices and uniform points. The best run
/// wins; ties keep the earliest start.
pub fn inner_sup(
    g: &dyn Objective,
    lambda: f64,
    anchor: &DVector<f64>,
    domain: &BoxDomain,
    cfg: &SolverConfig,
) -> Result<InnerSupResult, SolverError> {
    cfg.validate()?;
    if anchor.len() != domain.dim() {
        return Err(SolverError::Dimension {
            expected: domain.dim(),
            got: anchor.len(),
        });
    }
    let lambda = lambda.max(0.0);
    let mut rng = CounterRng::new(cfg.seed ^ 0x77aa_11ee, 0);
    let mut starts: Vec<DVector<f64>> = Vec::with_capacity(cfg.multistarts);
    starts.push(domain.project(anchor));
    while starts.len() < cfg.multistarts {
        if starts.len() % 2 == 1 {
            starts.push(domain.random_vertex(&mut rng));
        } else {
            starts.push(domain.sample(&mut rng));
        }
    }
    ascend_from_starts(g, lambda, anchor, domain, cfg, &starts)
}

/// Same maximization from caller-chosen starts (used for warm restarts).
pub(crate) fn ascend_from_starts(
    g: &dyn Objective,
    lambda: f64,
    anchor: &DVector<f64>,
    domain: &BoxDomain,
    cfg: &SolverConfig,
    starts: &[DVector<f64>],
) -> Result<InnerSupResult, SolverError> {
    let phi = |w: &DVector<f64>| g.value(w) - lambda * (w - anchor).norm();
    let phi_grad = |w: &DVector<f64>| {
        let mut grad = g.gradient(w, cfg.fd_step);
        let delta = w - anchor;
        let norm = delta.norm();
        if norm > 1e-12 {
            grad.axpy(-lambda / norm, &delta, 1.0);
        }
        grad
    };

    let mut best: Option<InnerSupResult> = None;
    let mut total_iters = 0usize;
    for start in starts {
        let mut w = domain.project(start);
        let mut value = phi(&w);
        let mut step = 1.0f64;
        let mut converged = false;
        let mut stalled = 0usize;
        for _ in 0..cfg.max_inner_iters {
            total_iters += 1;
            let grad = phi_grad(&w);
            // Projected ascent step with backtracking.
            let mut accepted = false;
            let mut t = step;
            for _ in 0..40 {
                let candidate = domain.project(&(&w + t * &grad));
                let moved = &candidate - &w;
                let moved_norm = moved.norm();
                if moved_norm <= 1e-14 {
                    break;
                }
                let new_value = phi(&candidate);
                if new_value > value + 1e-4 * moved.dot(&grad).max(0.0) && new_value > value {
                    if new_value - value <= 1e-13 * (1.0 + value.abs()) {
                        stalled += 1;
                    } else {
                        stalled = 0;
                    }
                    w = candidate;
                    value = new_value;
                    step = (t * 2.0).min(1e6);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted || stalled >= 8 {
                // No useful ascent left within the box: stationary.
                converged = true;
                break;
            }
            let residual = (&domain.project(&(&w + &grad)) - &w).norm();
            if residual <= cfg.gradient_tol * (1.0 + value.abs()) {
                converged = true;
                break;
            }
        }
        let candidate = InnerSupResult {
            value,
            maximizer: w,
            converged,
            iterations: 0,
        };
        best = Some(match best.take() {
            None => candidate,
            Some(current) => {
                if candidate.value > current.value {
                    candidate
                } else {
                    current
                }
            }
        });
    }
    let mut result = best.expect("at least one start");
    result.iterations = total_iters;
    Ok(result)
}
