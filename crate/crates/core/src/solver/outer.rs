//! Augmented-Lagrangian minimization over a box with inequality constraints
//! `h_i(x) >= 0`, multistarted projected gradient descent inside.

use super::{BoxDomain, Objective, SolverConfig, SolverError};
use crate::probability::CounterRng;
use nalgebra::DVector;

/// Feasibility threshold on constraint violation.
pub const CONSTRAINT_TOL: f64 = 1e-6;

const INITIAL_PENALTY: f64 = 10.0;

/// Best point found by [`outer_minimize`].
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub point: DVector<f64>,
    pub objective: f64,
    /// Constraint values `h_i(x)`; negative entries are violations.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub feasible: bool,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Final augmented-Lagrangian multiplier estimates.
    pub multipliers: Vec<f64>,
}

fn violation(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| (-r).max(0.0)).fold(0.0, f64::max)
}

/// Minimize `objective` subject to `constraints[i](x) >= 0` and `x` in the
/// box. Residuals are reported even on non-convergence; infeasibility (no
/// start reaching violation <= 1e-6) is an error distinct from running out
/// of iterations.
pub fn outer_minimize(
    objective: &dyn Objective,
    constraints: &[&dyn Objective],
    domain: &BoxDomain,
    cfg: &SolverConfig,
    hints: &[DVector<f64>],
) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    for h in hints {
        if h.len() != domain.dim() {
            return Err(SolverError::Dimension {
                expected: domain.dim(),
                got: h.len(),
            });
        }
    }
    let mut rng = CounterRng::new(cfg.seed ^ 0x5151_abcd, 0);
    let mut starts: Vec<DVector<f64>> = hints.iter().map(|h| domain.project(h)).collect();
    if starts.is_empty() {
        starts.push(domain.center());
    }
    while starts.len() < cfg.multistarts {
        starts.push(domain.sample(&mut rng));
    }

    let mut best: Option<SolveResult> = None;
    for start in &starts {
        let run = single_start(objective, constraints, domain, cfg, start);
        best = Some(match best.take() {
            None => run,
            Some(current) => pick_better(current, run),
        });
    }
    let best = best.expect("at least one start");
    if !best.feasible {
        return Err(SolverError::Infeasible {
            best: violation(&best.residuals),
            tol: CONSTRAINT_TOL,
        });
    }
    Ok(best)
}

fn pick_better(a: SolveResult, b: SolveResult) -> SolveResult {
    match (a.feasible, b.feasible) {
        (true, false) => a,
        (false, true) => b,
        (true, true) => {
            if b.objective < a.objective {
                b
            } else {
                a
            }
        }
        (false, false) => {
            if violation(&b.residuals) < violation(&a.residuals) {
                b
            } else {
                a
            }
        }
    }
}

fn single_start(
    objective: &dyn Objective,
    constraints: &[&dyn Objective],
    domain: &BoxDomain,
    cfg: &SolverConfig,
    start: &DVector<f64>,
) -> SolveResult {
    let m = constraints.len();
    let mut x = domain.project(start);
    let mut multipliers = vec![0.0f64; m];
    let mut penalty = INITIAL_PENALTY;
    let mut inner_total = 0usize;
    let mut last_violation = f64::INFINITY;
    let mut converged = false;
    let mut outer_done = 0usize;

    for outer in 0..cfg.max_outer_iters {
        outer_done = outer + 1;
        let (new_x, inner_iters, stationary) =
            minimize_al(objective, constraints, domain, cfg, &x, &multipliers, penalty);
        x = new_x;
        inner_total += inner_iters;
        let residuals: Vec<f64> = constraints.iter().map(|c| c.value(&x)).collect();
        let viol = violation(&residuals);
        // Multiplier update for h(x) >= 0 written as -h(x) <= 0.
        for (mu, r) in multipliers.iter_mut().zip(&residuals) {
            *mu = (*mu + penalty * (-r)).max(0.0);
        }
        if viol <= CONSTRAINT_TOL && stationary {
            converged = true;
            break;
        }
        if viol > 0.25 * last_violation {
            penalty = (penalty * cfg.penalty_growth).min(1e12);
        }
        last_violation = viol;
    }

    let residuals: Vec<f64> = constraints.iter().map(|c| c.value(&x)).collect();
    let feasible = violation(&residuals) <= CONSTRAINT_TOL;
    SolveResult {
        objective: objective.value(&x),
        point: x,
        residuals,
        converged,
        feasible,
        outer_iters: outer_done,
        inner_iters: inner_total,
        multipliers,
    }
}

/// Projected gradient descent on the augmented Lagrangian.
fn minimize_al(
    objective: &dyn Objective,
    constraints: &[&dyn Objective],
    domain: &BoxDomain,
    cfg: &SolverConfig,
    start: &DVector<f64>,
    multipliers: &[f64],
    penalty: f64,
) -> (DVector<f64>, usize, bool) {
    let al_value = |x: &DVector<f64>| {
        let mut total = objective.value(x);
        for (c, &mu) in constraints.iter().zip(multipliers) {
            let viol = -c.value(x); // <= 0 when feasible
            let active = (mu + penalty * viol).max(0.0);
            total += (active * active - mu * mu) / (2.0 * penalty);
        }
        total
    };
    let al_grad = |x: &DVector<f64>| {
        let mut grad = objective.gradient(x, cfg.fd_step);
        for (c, &mu) in constraints.iter().zip(multipliers) {
            let viol = -c.value(x);
            let active = (mu + penalty * viol).max(0.0);
            if active > 0.0 {
                let cg = c.gradient(x, cfg.fd_step);
                grad.axpy(-active, &cg, 1.0);
            }
        }
        grad
    };

    let mut x = start.clone();
    let mut value = al_value(&x);
    let mut step = 1.0f64;
    let mut iters = 0usize;
    let mut stationary = false;
    let mut stalled = 0usize;
    for _ in 0..cfg.max_inner_iters {
        iters += 1;
        let grad = al_grad(&x);
        let mut accepted = false;
        let mut t = step;
        for _ in 0..40 {
            let candidate = domain.project(&(&x - t * &grad));
            let moved = &candidate - &x;
            if moved.norm() <= 1e-14 {
                break;
            }
            let new_value = al_value(&candidate);
            if new_value < value - 1e-4 * moved.dot(&grad).abs().min(1e30) || new_value < value {
                if value - new_value <= 1e-13 * (1.0 + value.abs()) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                x = candidate;
                value = new_value;
                step = (t * 2.0).min(1e6);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || stalled >= 8 {
            stationary = true;
            break;
        }
        let residual = (&domain.project(&(&x - &grad)) - &x).norm();
        if residual <= cfg.gradient_tol * (1.0 + value.abs()) {
            stationary = true;
            break;
        }
    }
    (x, iters, stationary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::TestRng;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn projects_onto_halfspace() {
        let objective = |x: &DVector<f64>| x.norm_squared();
        let constraint = |x: &DVector<f64>| x[0] - 1.0; // x1 >= 1
        let domain = BoxDomain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let res = outer_minimize(
            &objective,
            &[&constraint],
            &domain,
            &SolverConfig::default(),
            &[],
        )
        .unwrap();
        assert!(res.feasible);
        assert_relative_eq!(res.point[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(res.point[1], 0.0, epsilon = 1e-5);
    }

    #[test]
    fn unconstrained_quadratic_reaches_analytic_minimum() {
        let target = DVector::from_vec(vec![0.7, -0.3, 0.1]);
        let t = target.clone();
        let objective = move |x: &DVector<f64>| (x - &t).norm_squared();
        let domain = BoxDomain::new(vec![-2.0; 3], vec![2.0; 3]).unwrap();
        let res =
            outer_minimize(&objective, &[], &domain, &SolverConfig::default(), &[]).unwrap();
        assert!((res.point - target).norm() <= 1e-6);
        assert!(res.converged);
    }

    #[test]
    fn beats_random_search_on_nonconvex_instance() {
        let objective = |x: &DVector<f64>| {
            (3.0 * x[0]).sin() + (2.0 * x[1]).cos() + 0.5 * x.norm_squared()
        };
        let constraint = |x: &DVector<f64>| 1.5 - x[0] - x[1]; // x0 + x1 <= 1.5
        let domain = BoxDomain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let res = outer_minimize(
            &objective,
            &[&constraint],
            &domain,
            &SolverConfig::default(),
            &[],
        )
        .unwrap();
        let mut rng = TestRng::new(17);
        let mut best_random = f64::INFINITY;
        for _ in 0..100_000 {
            let x = DVector::from_vec(vec![rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)]);
            if constraint.value(&x) >= 0.0 {
                best_random = best_random.min(objective.value(&x));
            }
        }
        assert!(
            res.objective <= best_random + 1e-4,
            "solver {} vs random search {best_random}",
            res.objective
        );
    }

    #[test]
    fn result_stays_inside_box() {
        let objective = |x: &DVector<f64>| -x[0] - 2.0 * x[1];
        let domain = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let res =
            outer_minimize(&objective, &[], &domain, &SolverConfig::default(), &[]).unwrap();
        assert!(domain.contains(&res.point));
        assert_relative_eq!(res.point[0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(res.point[1], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn infeasible_constraint_is_distinct_error() {
        let objective = |x: &DVector<f64>| x.norm_squared();
        let constraint = |x: &DVector<f64>| x[0] - 10.0; // impossible inside the box
        let domain = BoxDomain::new(vec![-1.0], vec![1.0]).unwrap();
        match outer_minimize(
            &objective,
            &[&constraint],
            &domain,
            &SolverConfig::default(),
            &[],
        ) {
            Err(SolverError::Infeasible { best, .. }) => {
                assert_relative_eq!(best, 9.0, epsilon = 1e-5)
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn residuals_reported_with_hint_start() {
        let objective = |x: &DVector<f64>| x[0];
        let constraint = |x: &DVector<f64>| x[0] + 0.5;
        let domain = BoxDomain::new(vec![-1.0], vec![1.0]).unwrap();
        let res = outer_minimize(
            &objective,
            &[&constraint],
            &domain,
            &SolverConfig::default(),
            &[DVector::from_vec(vec![0.9])],
        )
        .unwrap();
        assert_eq!(res.residuals.len(), 1);
        assert_relative_eq!(res.point[0], -0.5, epsilon = 1e-5);
        assert!(res.residuals[0].abs() <= 1e-5);
    }
}
