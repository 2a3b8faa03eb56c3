//! Nominal and sample-average solves of the expectation-constrained program:
//! minimize the sample-average cost subject to the sample-average smoothed
//! robustness clearing `r0` plus the concentration tightening.

use super::{
    check_samples, Method, ProgramSolution, ProgramsError, Scenario, TrajectoryOps,
};
use crate::probability::EmpiricalDistribution;
use crate::solver::{outer_minimize, Objective, SolverConfig, SolverError};
use nalgebra::DVector;

/// Sample-average cost. The cost is quadratic in the disturbance, so the
/// average equals the cost at the mean disturbance plus a constant; the
/// constant is carried so reported objectives match the true average.
struct SaaCost<'a> {
    ops: &'a TrajectoryOps,
    w_mean: DVector<f64>,
    spread: f64,
}

impl<'a> SaaCost<'a> {
    fn new(ops: &'a TrajectoryOps, samples: &EmpiricalDistribution) -> Self {
        let m = samples.len() as f64;
        let dim = samples.sample_dim();
        let mut w_mean = DVector::zeros(dim);
        for w in samples.samples() {
            w_mean += w;
        }
        w_mean /= m;
        // (1/M) sum (Phi_w d_i)' Q_bar (Phi_w d_i) for deviations d_i.
        let mut spread = 0.0;
        let zero_u = DVector::zeros(ops.horizon * ops.m);
        let base = ops.cost(&zero_u, &w_mean);
        for w in samples.samples() {
            // J(0, w) - J(0, mean) averages to the pure quadratic spread plus
            // a linear term that averages out.
            spread += ops.cost(&zero_u, w);
        }
        spread = spread / m - base;
        SaaCost { ops, w_mean, spread }
    }
}

impl Objective for SaaCost<'_> {
    fn value(&self, u: &DVector<f64>) -> f64 {
        self.ops.cost(u, &self.w_mean) + self.spread
    }

    fn gradient(&self, u: &DVector<f64>, _fd_step: f64) -> DVector<f64> {
        self.ops.cost_with_grads(u, &self.w_mean).1
    }
}

/// Sample-average smoothed robustness minus the required level.
struct SaaRobustness<'a> {
    ops: &'a TrajectoryOps,
    samples: &'a EmpiricalDistribution,
    required: f64,
}

impl Objective for SaaRobustness<'_> {
    fn value(&self, u: &DVector<f64>) -> f64 {
        let m = self.samples.len() as f64;
        let total: f64 = self
            .samples
            .samples()
            .iter()
            .map(|w| self.ops.smooth_rob(u, w))
            .sum();
        total / m - self.required
    }

    fn gradient(&self, u: &DVector<f64>, _fd_step: f64) -> DVector<f64> {
        let m = self.samples.len() as f64;
        let mut grad = DVector::zeros(u.len());
        for w in self.samples.samples() {
            let (_, gu, _) = self.ops.smooth_rob_with_grads(u, w);
            grad += gu;
        }
        grad / m
    }
}

pub(crate) fn solve_expectation(
    scn: &Scenario,
    samples: &EmpiricalDistribution,
    tightening: f64,
    cfg: &SolverConfig,
    method: Method,
) -> Result<ProgramSolution, ProgramsError> {
    scn.validate()?;
    check_samples(scn, samples)?;
    let ops = TrajectoryOps::new(scn)?;
    let required = scn.r0 + tightening;
    let objective = SaaCost::new(&ops, samples);
    let constraint = SaaRobustness {
        ops: &ops,
        samples,
        required,
    };
    let domain = scn.input_box()?;
    let hints = vec![DVector::zeros(domain.dim()), domain.center()];
    let result = outer_minimize(&objective, &[&constraint], &domain, cfg, &hints);
    let result = match result {
        Ok(r) => r,
        Err(SolverError::Infeasible { best, .. }) => {
            return Err(ProgramsError::InfeasibleTightening {
                required,
                best: required - best,
            });
        }
        Err(other) => return Err(other.into()),
    };
    let u_hat = scn.input_seq(&result.point)?;
    // Honest sample-average cost at the solution.
    let m = samples.len() as f64;
    let j_hat = samples
        .samples()
        .iter()
        .map(|w| ops.cost(&result.point, w))
        .sum::<f64>()
        / m;
    let achieved = constraint.value(&result.point) + required;
    Ok(ProgramSolution {
        method,
        u_hat,
        j_hat,
        lambda1: 0.0,
        lambda2: 0.0,
        y1: Vec::new(),
        y2: Vec::new(),
        feasible: result.feasible,
        tightening,
        robustness_residual: achieved - required,
        radius: 0.0,
        converged: result.converged,
        solver_iterations: result.inner_iters,
        lipschitz: scn.lipschitz()?,
        sample_count: samples.len(),
    })
}

/// Sample-average expectation-constrained program with the concentration
/// tightening `L_phi h^{-1}(epsilon)`.
pub fn solve_ecp(
    scn: &Scenario,
    samples: &EmpiricalDistribution,
    cfg: &SolverConfig,
) -> Result<ProgramSolution, ProgramsError> {
    let tightening = scn.tightening()?;
    solve_expectation(scn, samples, tightening, cfg, Method::Ecp)
}

/// Deterministic solve at `w = 0`: smoothed robustness constrained by `r0`
/// with no tightening.
pub fn solve_nominal(scn: &Scenario, cfg: &SolverConfig) -> Result<ProgramSolution, ProgramsError> {
    scn.validate()?;
    let dim = scn.horizon * scn.sys.state_dim();
    let zero = EmpiricalDistribution::new(vec![DVector::zeros(dim)])?;
    solve_expectation(scn, &zero, 0.0, cfg, Method::Nominal)
}

#[cfg(test)]
mod tests {
    use super::super::test_scenarios;
    use super::*;
    use crate::probability::sample;
    use crate::stl::robustness;
    use approx::assert_relative_eq;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn zero_variance_reduces_to_deterministic_lqr() {
        // Trivially satisfied formula, zero noise: the constraint is inactive
        // and the optimum matches the unconstrained quadratic solve (u = 0).
        let scn = test_scenarios::toy_scalar(0.0, 5.0);
        let samples = sample(&scn.model, scn.horizon, 8, 1).unwrap();
        let sol = solve_ecp(&scn, &samples, &cfg()).unwrap();
        assert!(sol.feasible);
        assert!(sol.tightening == 0.0, "zero covariance has zero tightening");
        assert!(sol.u_hat.stacked().norm() <= 1e-5);
        assert_relative_eq!(sol.j_hat, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn single_zero_sample_equals_nominal_solve() {
        let scn = test_scenarios::toy_scalar(0.1, 5.0);
        let zero = EmpiricalDistribution::new(vec![nalgebra::DVector::zeros(1)]).unwrap();
        let via_expectation =
            solve_expectation(&scn, &zero, 0.0, &cfg(), Method::Ecp).unwrap();
        let nominal = solve_nominal(&scn, &cfg()).unwrap();
        assert_relative_eq!(
            via_expectation.j_hat,
            nominal.j_hat,
            epsilon = 1e-8,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            (via_expectation.u_hat.stacked() - nominal.u_hat.stacked()).norm(),
            0.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn nominal_toy_satisfies_formula_exactly() {
        let scn = test_scenarios::toy_scalar(0.05, 5.0);
        let sol = solve_nominal(&scn, &cfg()).unwrap();
        assert!(sol.feasible);
        let ops = TrajectoryOps::new(&scn).unwrap();
        let trace = ops.trace(&sol.u_hat.stacked(), &nalgebra::DVector::zeros(1));
        assert!(robustness(&scn.formula, &trace, 0).unwrap() > 0.0);
    }

    #[test]
    fn infeasible_tightening_is_reported() {
        // Robustness can never exceed ~5, but demand r0 = 50.
        let mut scn = test_scenarios::toy_scalar(0.1, 5.0);
        scn.r0 = 50.0;
        let samples = sample(&scn.model, scn.horizon, 8, 1).unwrap();
        match solve_ecp(&scn, &samples, &cfg()) {
            Err(ProgramsError::InfeasibleTightening { required, best }) => {
                assert!(required >= 50.0);
                assert!(best < required);
            }
            other => panic!("expected infeasible tightening, got {other:?}"),
        }
    }

    #[test]
    fn active_constraint_is_respected() {
        // The constraint pushes the final state up while the cost pulls it to
        // zero, so the tightened constraint binds at the optimum.
        let mut scn = test_scenarios::toy_scalar_push(0.1);
        scn.r0 = 0.2;
        let samples = sample(&scn.model, scn.horizon, 64, 5).unwrap();
        let sol = solve_ecp(&scn, &samples, &cfg()).unwrap();
        assert!(sol.feasible);
        assert!(
            sol.robustness_residual >= -1e-6,
            "residual {}",
            sol.robustness_residual
        );
        // Active: the residual sits at the boundary, not in the interior.
        assert!(
            sol.robustness_residual <= 1e-2,
            "constraint unexpectedly slack: {}",
            sol.robustness_residual
        );
        assert!(sol.u_hat.stacked()[0] > 0.3, "input was not pushed up");
    }
}
