//! Smooth constrained-optimization machinery: box-constrained inner
//! maximization for the per-sample sup subproblems and an augmented-Lagrangian
//! outer minimization with multistart projected gradient descent.

mod inner;
mod outer;

pub(crate) use inner::ascend_from_starts;
pub use inner::{inner_sup, InnerSupResult};
pub use outer::{outer_minimize, SolveResult, CONSTRAINT_TOL};

use crate::probability::CounterRng;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("box bounds must be finite with lo <= hi componentwise")]
    InvalidBox,
    #[error("solver configuration field {0} must be positive")]
    InvalidConfig(&'static str),
    #[error("no start reached constraint violation <= {tol:.1e}; best violation {best:.3e}")]
    Infeasible { best: f64, tol: f64 },
    #[error("dimension mismatch between start point ({got}) and box ({expected})")]
    Dimension { expected: usize, got: usize },
}

/// Axis-aligned box, used both for input sequences and truncated disturbance
/// supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, SolverError> {
        if lo.len() != hi.len()
            || lo.iter().zip(&hi).any(|(l, h)| l > h)
            || !lo.iter().chain(hi.iter()).all(|v| v.is_finite())
        {
            return Err(SolverError::InvalidBox);
        }
        Ok(BoxDomain { lo, hi })
    }

    /// Repeat a per-step box `count` times (stacked sequence domain).
    pub fn repeated(lo: &[f64], hi: &[f64], count: usize) -> Result<Self, SolverError> {
        let mut full_lo = Vec::with_capacity(lo.len() * count);
        let mut full_hi = Vec::with_capacity(hi.len() * count);
        for _ in 0..count {
            full_lo.extend_from_slice(lo);
            full_hi.extend_from_slice(hi);
        }
        BoxDomain::new(full_lo, full_hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lo[i] - 1e-12 && v <= self.hi[i] + 1e-12)
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| x[i].clamp(self.lo[i], self.hi[i]))
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| 0.5 * (self.lo[i] + self.hi[i]))
    }

    pub fn sample(&self, rng: &mut CounterRng) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| rng.uniform(self.lo[i], self.hi[i]))
    }

    pub fn random_vertex(&self, rng: &mut CounterRng) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| {
            if rng.unit() < 0.5 {
                self.lo[i]
            } else {
                self.hi[i]
            }
        })
    }

    /// Concatenate two boxes (e.g. decision vector extended by multipliers).
    pub fn concat(&self, other: &BoxDomain) -> BoxDomain {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        BoxDomain { lo, hi }
    }
}

/// Knobs shared by the inner and outer solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Augmented-Lagrangian outer iterations.
    pub max_outer_iters: usize,
    /// Projected-gradient iterations per subproblem.
    pub max_inner_iters: usize,
    /// Stationarity tolerance on the projected gradient step.
    pub gradient_tol: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Multistart count K.
    pub multistarts: usize,
    /// Penalty growth factor when constraint violation stalls.
    pub penalty_growth: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer_iters: 25,
            max_inner_iters: 400,
            gradient_tol: 1e-7,
            fd_step: 1e-6,
            multistarts: 16,
            penalty_growth: 10.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_outer_iters == 0 {
            return Err(SolverError::InvalidConfig("max_outer_iters"));
        }
        if self.max_inner_iters == 0 {
            return Err(SolverError::InvalidConfig("max_inner_iters"));
        }
        if !(self.gradient_tol > 0.0) {
            return Err(SolverError::InvalidConfig("gradient_tol"));
        }
        if !(self.fd_step > 0.0) {
            return Err(SolverError::InvalidConfig("fd_step"));
        }
        if self.multistarts == 0 {
            return Err(SolverError::InvalidConfig("multistarts"));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(SolverError::InvalidConfig("penalty_growth"));
        }
        Ok(())
    }
}

/// Scalar field with an optional analytic gradient; closures fall back to
/// central finite differences.
pub trait Objective {
    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>, fd_step: f64) -> DVector<f64> {
        finite_diff_gradient(&|y| self.value(y), x, fd_step)
    }
}

impl<F: Fn(&DVector<f64>) -> f64> Objective for F {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self(x)
    }
}

/// Central finite differences with a relative step per coordinate.
pub fn finite_diff_gradient(
    f: &dyn Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    step: f64,
) -> DVector<f64> {
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}
