//! The three synthesis programs over one scenario: the nominal deterministic
//! solve, the sample-average expectation-constrained program with
//! concentration tightening, and the data-driven distributionally robust dual.

mod drp;
mod expectation;

pub use drp::{drp_dual_bound_check, solve_drp};
pub use expectation::{solve_ecp, solve_nominal};

use crate::linsys::{rollout, DisturbanceSeq, InputSeq, LinearSystem, LinsysError, SensitivityMaps};
use crate::lipschitz::{formula_lipschitz, LipschitzError, LipschitzReport, Region};
use crate::probability::{
    h_inverse, sample, DisturbanceModel, EmpiricalDistribution, ProbabilityError,
};
use crate::solver::SolverError;
use crate::stl::{
    eval_boolean, robustness, smooth_robustness, smooth_robustness_gradient, to_nnf, Formula,
    SmoothingConfig, StlError, Trace,
};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProgramsError {
    #[error("tightened robustness constraint unreachable: need {required:.6}, best multistart achieved {best:.6}; lower epsilon conservatism or shrink the region")]
    InfeasibleTightening { required: f64, best: f64 },
    #[error("program infeasible: {0}")]
    Infeasible(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("sample dimension {got} does not match horizon x state dimension {expected}")]
    SampleShape { expected: usize, got: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Linsys(#[from] LinsysError),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Lipschitz(#[from] LipschitzError),
}

/// Quadratic cost `J(u, w) = x_N' Qf x_N + sum_k (x_k' Q x_k + u_k' R u_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub state_weight: DMatrix<f64>,
    pub input_weight: DMatrix<f64>,
    pub terminal_weight: DMatrix<f64>,
}

impl CostSpec {
    pub fn new(
        state_weight: DMatrix<f64>,
        input_weight: DMatrix<f64>,
        terminal_weight: DMatrix<f64>,
    ) -> Result<Self, ProgramsError> {
        let check_psd = |m: &DMatrix<f64>, name: &str, strict: bool| {
            if m.nrows() != m.ncols() {
                return Err(ProgramsError::InvalidScenario(format!("{name} not square")));
            }
            let eig = nalgebra::SymmetricEigen::new(m.clone());
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if strict && min <= 0.0 {
                return Err(ProgramsError::InvalidScenario(format!(
                    "{name} must be positive definite"
                )));
            }
            if !strict && min < -1e-9 {
                return Err(ProgramsError::InvalidScenario(format!(
                    "{name} must be positive semidefinite"
                )));
            }
            Ok(())
        };
        check_psd(&state_weight, "state weight Q", false)?;
        check_psd(&terminal_weight, "terminal weight Qf", false)?;
        check_psd(&input_weight, "input weight R", true)?;
        Ok(CostSpec {
            state_weight,
            input_weight,
            terminal_weight,
        })
    }

    /// Scalar weights on identity matrices.
    pub fn isotropic(n: usize, m: usize, q: f64, r: f64, qf: f64) -> Result<Self, ProgramsError> {
        CostSpec::new(
            DMatrix::identity(n, n) * q,
            DMatrix::identity(m, m) * r,
            DMatrix::identity(n, n) * qf,
        )
    }
}

/// One complete synthesis problem instance.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sys: LinearSystem,
    pub x0: DVector<f64>,
    pub horizon: usize,
    pub formula: Formula,
    pub r0: f64,
    pub epsilon: f64,
    pub cost: CostSpec,
    pub model: DisturbanceModel,
    pub region: Region,
    pub smoothing: SmoothingConfig,
    pub input_lo: DVector<f64>,
    pub input_hi: DVector<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ProgramsError> {
        let n = self.sys.state_dim();
        let m = self.sys.input_dim();
        if self.x0.len() != n {
            return Err(ProgramsError::InvalidScenario(format!(
                "x0 has dimension {}, system state is {n}",
                self.x0.len()
            )));
        }
        if self.formula.horizon() > self.horizon {
            return Err(ProgramsError::InvalidScenario(format!(
                "formula horizon {} exceeds scenario horizon {}",
                self.formula.horizon(),
                self.horizon
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ProgramsError::InvalidScenario(format!(
                "epsilon must lie in (0,1), got {}",
                self.epsilon
            )));
        }
        if self.input_lo.len() != m || self.input_hi.len() != m {
            return Err(ProgramsError::InvalidScenario(
                "input bounds must match the input dimension".into(),
            ));
        }
        if self.region.dim() != n {
            return Err(ProgramsError::InvalidScenario(
                "region dimension must match the state dimension".into(),
            ));
        }
        if self.cost.state_weight.nrows() != n
            || self.cost.terminal_weight.nrows() != n
            || self.cost.input_weight.nrows() != m
        {
            return Err(ProgramsError::InvalidScenario(
                "cost weight dimensions must match the system".into(),
            ));
        }
        if self.model.step_dim(self.horizon) != n {
            return Err(ProgramsError::InvalidScenario(
                "disturbance dimension must match the state dimension".into(),
            ));
        }
        Ok(())
    }

    /// Stacked input box over all steps.
    pub fn input_box(&self) -> Result<crate::solver::BoxDomain, SolverError> {
        crate::solver::BoxDomain::repeated(
            self.input_lo.as_slice(),
            self.input_hi.as_slice(),
            self.horizon,
        )
    }

    /// Lipschitz constants of the scenario formula over its region.
    pub fn lipschitz(&self) -> Result<LipschitzReport, ProgramsError> {
        Ok(formula_lipschitz(
            &self.formula,
            &self.sys,
            self.horizon,
            &self.region,
        )?)
    }

    /// Concentration tightening `L_phi h^{-1}(epsilon)`.
    pub fn tightening(&self) -> Result<f64, ProgramsError> {
        let report = self.lipschitz()?;
        Ok(report.l_phi * h_inverse(&self.model, self.horizon, self.epsilon)?)
    }

    pub fn input_seq(&self, stacked: &DVector<f64>) -> Result<InputSeq, ProgramsError> {
        Ok(InputSeq::from_stacked(
            stacked,
            self.horizon,
            self.input_lo.clone(),
            self.input_hi.clone(),
        )?)
    }
}

/// Which program produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Nominal,
    Ecp,
    Drp,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Nominal => "nominal",
            Method::Ecp => "ecp",
            Method::Drp => "drp",
        }
    }
}

/// Synthesis output: input sequence, dual data, and feasibility certificates.
#[derive(Debug, Clone)]
pub struct ProgramSolution {
    pub method: Method,
    pub u_hat: InputSeq,
    /// Certified upper bound on the expected cost (dual objective for the
    /// robust program, achieved sample average otherwise).
    pub j_hat: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub feasible: bool,
    pub tightening: f64,
    /// Robustness-constraint residual: the certified expectation lower bound
    /// minus `r0 + tightening`; feasibility requires >= -1e-6.
    pub robustness_residual: f64,
    pub radius: f64,
    pub converged: bool,
    pub solver_iterations: usize,
    pub lipschitz: LipschitzReport,
    /// Number of samples the program was solved against.
    pub sample_count: usize,
}

/// Shared trajectory algebra: stacked maps, quadratic cost, and smoothed
/// robustness with gradients in the stacked input and disturbance.
pub(crate) struct TrajectoryOps {
    pub sys: LinearSystem,
    pub x0: DVector<f64>,
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub phi_u: DMatrix<f64>,
    pub phi_w: DMatrix<f64>,
    pub x_free: DVector<f64>,
    q_bar: DMatrix<f64>,
    r_bar: DMatrix<f64>,
    stage0: f64,
    pub nnf: Formula,
    pub smoothing: SmoothingConfig,
}

impl TrajectoryOps {
    pub fn new(scn: &Scenario) -> Result<Self, ProgramsError> {
        scn.validate()?;
        let n = scn.sys.state_dim();
        let m = scn.sys.input_dim();
        let horizon = scn.horizon;
        let SensitivityMaps { phi_x, phi_u, phi_w } =
            crate::linsys::sensitivity_maps(&scn.sys, horizon);
        let x_free = &phi_x * &scn.x0;
        let mut q_bar = DMatrix::zeros(horizon * n, horizon * n);
        for k in 1..=horizon {
            let block = if k == horizon {
                &scn.cost.terminal_weight
            } else {
                &scn.cost.state_weight
            };
            q_bar
                .view_mut(((k - 1) * n, (k - 1) * n), (n, n))
                .copy_from(block);
        }
        let mut r_bar = DMatrix::zeros(horizon * m, horizon * m);
        for k in 0..horizon {
            r_bar
                .view_mut((k * m, k * m), (m, m))
                .copy_from(&scn.cost.input_weight);
        }
        let stage0 = (&scn.cost.state_weight * &scn.x0).dot(&scn.x0);
        Ok(TrajectoryOps {
            sys: scn.sys.clone(),
            x0: scn.x0.clone(),
            horizon,
            n,
            m,
            phi_u,
            phi_w,
            x_free,
            q_bar,
            r_bar,
            stage0,
            nnf: to_nnf(&scn.formula),
            smoothing: scn.smoothing.clone(),
        })
    }

    /// Stacked states `[x_1; ...; x_N]`.
    pub fn stacked_states(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.x_free + &self.phi_u * u + &self.phi_w * w
    }

    pub fn trace(&self, u: &DVector<f64>, w: &DVector<f64>) -> Trace {
        let stacked = self.stacked_states(u, w);
        let mut states = Vec::with_capacity(self.horizon + 1);
        states.push(self.x0.clone());
        for k in 0..self.horizon {
            states.push(DVector::from_iterator(
                self.n,
                (0..self.n).map(|i| stacked[k * self.n + i]),
            ));
        }
        Trace::new(states).expect("stacked states are finite")
    }

    pub fn cost(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let x = self.stacked_states(u, w);
        self.stage0 + (&self.q_bar * &x).dot(&x) + (&self.r_bar * u).dot(u)
    }

    /// Cost with gradients in the stacked input and disturbance.
    pub fn cost_with_grads(
        &self,
        u: &DVector<f64>,
        w: &DVector<f64>,
    ) -> (f64, DVector<f64>, DVector<f64>) {
        let x = self.stacked_states(u, w);
        let qx = &self.q_bar * &x;
        let value = self.stage0 + qx.dot(&x) + (&self.r_bar * u).dot(u);
        let grad_u = 2.0 * (self.phi_u.transpose() * &qx) + 2.0 * (&self.r_bar * u);
        let grad_w = 2.0 * (self.phi_w.transpose() * &qx);
        (value, grad_u, grad_w)
    }

    pub fn smooth_rob(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        smooth_robustness(&self.nnf, &self.trace(u, w), 0, &self.smoothing)
            .expect("scenario validated")
    }

    /// Smoothed robustness with gradients in the stacked input/disturbance.
    pub fn smooth_rob_with_grads(
        &self,
        u: &DVector<f64>,
        w: &DVector<f64>,
    ) -> (f64, DVector<f64>, DVector<f64>) {
        let trace = self.trace(u, w);
        let (value, grad) =
            smooth_robustness_gradient(&self.nnf, &trace, 0, &self.smoothing)
                .expect("scenario validated");
        // Stack the per-state derivatives for k = 1..N (x0 is fixed).
        let mut g = DVector::zeros(self.horizon * self.n);
        for k in 1..=self.horizon {
            g.rows_mut((k - 1) * self.n, self.n)
                .copy_from(&grad.per_state[k]);
        }
        let grad_u = self.phi_u.transpose() * &g;
        let grad_w = self.phi_w.transpose() * &g;
        (value, grad_u, grad_w)
    }

    pub fn exact_rob(&self, formula: &Formula, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        robustness(formula, &self.trace(u, w), 0).expect("scenario validated")
    }
}

/// Empirical satisfaction rate of the chance constraint.
#[derive(Debug, Clone, Copy)]
pub struct CcpRate {
    pub rate: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Monte-Carlo estimate of `P{rho_0(u, w) >= r0}` on fresh draws.
pub fn empirical_ccp_rate(
    scn: &Scenario,
    u: &InputSeq,
    trials: usize,
    seed: u64,
) -> Result<CcpRate, ProgramsError> {
    scn.validate()?;
    if trials == 0 {
        return Err(ProgramsError::InvalidScenario(
            "empirical rate needs at least one trial".into(),
        ));
    }
    let draws = sample(&scn.model, scn.horizon, trials, seed)?;
    let n = scn.sys.state_dim();
    let mut hits = 0usize;
    for i in 0..trials {
        let w = draws.disturbance_seq(i, scn.horizon, n)?;
        let trace = rollout(&scn.sys, &scn.x0, u, &w)?;
        if robustness(&scn.formula, &trace, 0)? >= scn.r0 {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    Ok(CcpRate {
        rate,
        std_err: (rate * (1.0 - rate) / trials as f64).sqrt(),
        trials,
    })
}

/// Out-of-sample evaluation of a solution against fresh disturbances.
#[derive(Debug, Clone)]
pub struct OutOfSampleReport {
    pub cost_estimate: f64,
    pub cost_std_err: f64,
    pub j_hat: f64,
    /// `estimate - 2 stderr <= j_hat`.
    pub bound_holds: bool,
    pub satisfaction: CcpRate,
    pub trials: usize,
}

pub fn out_of_sample_report(
    scn: &Scenario,
    sol: &ProgramSolution,
    trials: usize,
    seed: u64,
) -> Result<OutOfSampleReport, ProgramsError> {
    scn.validate()?;
    if !sol.feasible {
        return Err(ProgramsError::Infeasible(
            "out-of-sample report needs a feasible solution".into(),
        ));
    }
    if trials == 0 {
        return Err(ProgramsError::InvalidScenario(
            "out-of-sample report needs at least one trial".into(),
        ));
    }
    let ops = TrajectoryOps::new(scn)?;
    let draws = sample(&scn.model, scn.horizon, trials, seed)?;
    let u = sol.u_hat.stacked();
    let costs: Vec<f64> = draws
        .samples()
        .iter()
        .map(|w| ops.cost(&u, w))
        .collect();
    let mean = costs.iter().sum::<f64>() / trials as f64;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>()
        / (trials as f64 - 1.0).max(1.0);
    let std_err = (var / trials as f64).sqrt();
    let satisfaction = empirical_ccp_rate(scn, &sol.u_hat, trials, seed ^ 0x00ff_55aa)?;
    Ok(OutOfSampleReport {
        cost_estimate: mean,
        cost_std_err: std_err,
        j_hat: sol.j_hat,
        bound_holds: mean - 2.0 * std_err <= sol.j_hat,
        satisfaction,
        trials,
    })
}

/// Check that a sample set matches the scenario shape.
pub(crate) fn check_samples(
    scn: &Scenario,
    samples: &EmpiricalDistribution,
) -> Result<(), ProgramsError> {
    let expected = scn.horizon * scn.sys.state_dim();
    if samples.sample_dim() != expected {
        return Err(ProgramsError::SampleShape {
            expected,
            got: samples.sample_dim(),
        });
    }
    Ok(())
}

/// Fraction of Boolean satisfactions on fresh draws (diagnostic twin of
/// [`empirical_ccp_rate`] that uses the Boolean semantics directly).
pub fn empirical_boolean_rate(
    scn: &Scenario,
    u: &InputSeq,
    trials: usize,
    seed: u64,
) -> Result<f64, ProgramsError> {
    scn.validate()?;
    let draws = sample(&scn.model, scn.horizon, trials, seed)?;
    let n = scn.sys.state_dim();
    let mut hits = 0usize;
    for i in 0..trials {
        let w = draws.disturbance_seq(i, scn.horizon, n)?;
        let trace = rollout(&scn.sys, &scn.x0, u, &w)?;
        if eval_boolean(&scn.formula, &trace, 0)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

#[cfg(test)]
pub(crate) mod test_scenarios;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::TestRng;
    use approx::assert_relative_eq;

    #[test]
    fn trajectory_ops_cost_matches_direct_rollout() {
        let scn = test_scenarios::toy_scalar(0.5, 0.1);
        let ops = TrajectoryOps::new(&scn).unwrap();
        let mut rng = TestRng::new(3);
        for _ in 0..50 {
            let u = rng.vector(scn.horizon, -1.0, 1.0);
            let w = rng.vector(scn.horizon, -0.3, 0.3);
            let useq = scn.input_seq(&u).unwrap();
            let wseq = DisturbanceSeq::from_stacked(&w, scn.horizon, 1).unwrap();
            let trace = rollout(&scn.sys, &scn.x0, &useq, &wseq).unwrap();
            let mut direct = (&scn.cost.terminal_weight * trace.state(scn.horizon))
                .dot(trace.state(scn.horizon));
            for k in 0..scn.horizon {
                direct += (&scn.cost.state_weight * trace.state(k)).dot(trace.state(k));
                direct += (&scn.cost.input_weight * &useq.steps()[k]).dot(&useq.steps()[k]);
            }
            assert_relative_eq!(ops.cost(&u, &w), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn trajectory_ops_gradients_match_finite_differences() {
        let scn = test_scenarios::case_study(1e-4, 20, 1);
        let ops = TrajectoryOps::new(&scn).unwrap();
        let mut rng = TestRng::new(5);
        let u = rng.vector(15, -0.9, 0.9);
        let w = rng.vector(30, -0.02, 0.02);
        let (_, cu, cw) = ops.cost_with_grads(&u, &w);
        let (_, ru, rw) = ops.smooth_rob_with_grads(&u, &w);
        let h = 1e-6;
        for i in [0usize, 7, 14] {
            let mut up = u.clone();
            up[i] += h;
            let mut down = u.clone();
            down[i] -= h;
            assert_relative_eq!(
                cu[i],
                (ops.cost(&up, &w) - ops.cost(&down, &w)) / (2.0 * h),
                max_relative = 1e-5
            );
            assert_relative_eq!(
                ru[i],
                (ops.smooth_rob(&up, &w) - ops.smooth_rob(&down, &w)) / (2.0 * h),
                epsilon = 1e-6,
                max_relative = 1e-4
            );
        }
        for i in [0usize, 13, 29] {
            let mut up = w.clone();
            up[i] += h;
            let mut down = w.clone();
            down[i] -= h;
            assert_relative_eq!(
                cw[i],
                (ops.cost(&u, &up) - ops.cost(&u, &down)) / (2.0 * h),
                max_relative = 1e-5
            );
            assert_relative_eq!(
                rw[i],
                (ops.smooth_rob(&u, &up) - ops.smooth_rob(&u, &down)) / (2.0 * h),
                epsilon = 1e-6,
                max_relative = 1e-4
            );
        }
    }

    #[test]
    fn ccp_rate_zero_variance_satisfying() {
        let scn = test_scenarios::toy_scalar(0.0, 0.5);
        let u = scn.input_seq(&DVector::zeros(1)).unwrap();
        let rate = empirical_ccp_rate(&scn, &u, 200, 1).unwrap();
        assert_eq!(rate.rate, 1.0);
        assert_eq!(rate.std_err, 0.0);
    }

    #[test]
    fn ccp_rate_unsatisfiable_level() {
        let mut scn = test_scenarios::toy_scalar(0.1, 0.5);
        scn.r0 = crate::stl::TRUE_ROBUSTNESS_SENTINEL;
        let u = scn.input_seq(&DVector::zeros(1)).unwrap();
        let rate = empirical_ccp_rate(&scn, &u, 200, 1).unwrap();
        assert_eq!(rate.rate, 0.0);
    }

    #[test]
    fn scenario_validation_catches_horizon_mismatch() {
        let mut scn = test_scenarios::toy_scalar(0.1, 0.5);
        scn.horizon = 0;
        assert!(matches!(
            scn.validate(),
            Err(ProgramsError::InvalidScenario(_))
        ));
    }
}
