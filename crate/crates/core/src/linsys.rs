//! Stochastic discrete-time linear dynamics `x_{k+1} = A x_k + B u_k + w_k`
//! and the explicit trajectory map used by the synthesis programs.

use crate::stl::{StlError, Trace};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinsysError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("length mismatch: expected {expected} steps, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("input outside its box bounds at step {step}, coordinate {coord}")]
    InputOutOfBounds { step: usize, coord: usize },
}

/// Time-invariant pair `(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, LinsysError> {
        if a.nrows() != a.ncols() {
            return Err(LinsysError::Dimension(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(LinsysError::Dimension(format!(
                "B has {} rows but A is {}x{}",
                b.nrows(),
                a.nrows(),
                a.ncols()
            )));
        }
        if !a.iter().all(|v| v.is_finite()) || !b.iter().all(|v| v.is_finite()) {
            return Err(LinsysError::NonFinite("system matrices"));
        }
        Ok(LinearSystem { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension `m`.
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// Powers `A^0 ... A^count-1`, computed iteratively.
pub fn matrix_powers(a: &DMatrix<f64>, count: usize) -> Vec<DMatrix<f64>> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(count);
    let mut current = DMatrix::identity(n, n);
    for _ in 0..count {
        out.push(current.clone());
        current = a * &current;
    }
    out
}

/// Input sequence `u_0 ... u_{N-1}` with per-coordinate box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSeq {
    inputs: Vec<DVector<f64>>,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl InputSeq {
    pub fn new(
        inputs: Vec<DVector<f64>>,
        lo: DVector<f64>,
        hi: DVector<f64>,
    ) -> Result<Self, LinsysError> {
        let m = lo.len();
        if hi.len() != m {
            return Err(LinsysError::Dimension(
                "input bounds have different lengths".into(),
            ));
        }
        for (step, u) in inputs.iter().enumerate() {
            if u.len() != m {
                return Err(LinsysError::Dimension(format!(
                    "input at step {step} has dimension {}, expected {m}",
                    u.len()
                )));
            }
            if !u.iter().all(|v| v.is_finite()) {
                return Err(LinsysError::NonFinite("input sequence"));
            }
            for coord in 0..m {
                if u[coord] < lo[coord] - 1e-12 || u[coord] > hi[coord] + 1e-12 {
                    return Err(LinsysError::InputOutOfBounds { step, coord });
                }
            }
        }
        Ok(InputSeq { inputs, lo, hi })
    }

    pub fn steps(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lo, &self.hi)
    }

    /// Flatten to the stacked vector `[u_0; ...; u_{N-1}]`.
    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.inputs)
    }

    /// Rebuild from a stacked vector.
    pub fn from_stacked(
        stacked: &DVector<f64>,
        steps: usize,
        lo: DVector<f64>,
        hi: DVector<f64>,
    ) -> Result<Self, LinsysError> {
        let m = lo.len();
        if stacked.len() != steps * m {
            return Err(LinsysError::Length {
                expected: steps * m,
                got: stacked.len() / m.max(1),
            });
        }
        let inputs = (0..steps)
            .map(|k| DVector::from_iterator(m, (0..m).map(|j| stacked[k * m + j])))
            .collect();
        InputSeq::new(inputs, lo, hi)
    }
}

/// Disturbance sequence `w_0 ... w_{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSeq {
    steps: Vec<DVector<f64>>,
}

impl DisturbanceSeq {
    pub fn new(steps: Vec<DVector<f64>>) -> Result<Self, LinsysError> {
        if let Some(first) = steps.first() {
            let n = first.len();
            for w in &steps {
                if w.len() != n {
                    return Err(LinsysError::Dimension(
                        "disturbance steps have inconsistent dimensions".into(),
                    ));
                }
                if !w.iter().all(|v| v.is_finite()) {
                    return Err(LinsysError::NonFinite("disturbance sequence"));
                }
            }
        }
        Ok(DisturbanceSeq { steps })
    }

    pub fn zeros(steps: usize, dim: usize) -> Self {
        DisturbanceSeq {
            steps: vec![DVector::zeros(dim); steps],
        }
    }

    pub fn steps(&self) -> &[DVector<f64>] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.steps)
    }

    /// Split a stacked `N*n` vector into per-step disturbances.
    pub fn from_stacked(stacked: &DVector<f64>, steps: usize, dim: usize) -> Result<Self, LinsysError> {
        if stacked.len() != steps * dim {
            return Err(LinsysError::Length {
                expected: steps * dim,
                got: stacked.len(),
            });
        }
        DisturbanceSeq::new(
            (0..steps)
                .map(|k| DVector::from_iterator(dim, (0..dim).map(|j| stacked[k * dim + j])))
                .collect(),
        )
    }
}

fn stack(vectors: &[DVector<f64>]) -> DVector<f64> {
    let total: usize = vectors.iter().map(|v| v.len()).sum();
    let mut out = DVector::zeros(total);
    let mut offset = 0;
    for v in vectors {
        out.rows_mut(offset, v.len()).copy_from(v);
        offset += v.len();
    }
    out
}

/// Simulate the recursion from `x0` under the given input and disturbance.
pub fn rollout(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    u: &InputSeq,
    w: &DisturbanceSeq,
) -> Result<Trace, LinsysError> {
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(LinsysError::Dimension(format!(
            "x0 has dimension {}, expected {n}",
            x0.len()
        )));
    }
    if u.len() != w.len() {
        return Err(LinsysError::Length {
            expected: u.len(),
            got: w.len(),
        });
    }
    if !u.is_empty() && u.steps()[0].len() != sys.input_dim() {
        return Err(LinsysError::Dimension(format!(
            "inputs have dimension {}, expected {}",
            u.steps()[0].len(),
            sys.input_dim()
        )));
    }
    if !w.is_empty() && w.steps()[0].len() != n {
        return Err(LinsysError::Dimension(format!(
            "disturbances have dimension {}, expected {n}",
            w.steps()[0].len()
        )));
    }
    let mut states = Vec::with_capacity(u.len() + 1);
    states.push(x0.clone());
    let mut x = x0.clone();
    for (uk, wk) in u.steps().iter().zip(w.steps()) {
        x = &sys.a * &x + &sys.b * uk + wk;
        states.push(x.clone());
    }
    Trace::new(states).map_err(|e| match e {
        StlError::NonFinite(_) => LinsysError::NonFinite("rollout states"),
        other => LinsysError::Dimension(other.to_string()),
    })
}

/// Stacked sensitivity of `[x_1; ...; x_N]` to `x0`, the stacked input, and
/// the stacked disturbance: `X = Phi_x x0 + Phi_u U + Phi_w W`.
pub struct SensitivityMaps {
    pub phi_x: DMatrix<f64>,
    pub phi_u: DMatrix<f64>,
    pub phi_w: DMatrix<f64>,
}

pub fn sensitivity_maps(sys: &LinearSystem, horizon: usize) -> SensitivityMaps {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let powers = matrix_powers(sys.a(), horizon + 1);
    let mut phi_x = DMatrix::zeros(horizon * n, n);
    let mut phi_u = DMatrix::zeros(horizon * n, horizon * m);
    let mut phi_w = DMatrix::zeros(horizon * n, horizon * n);
    for k in 1..=horizon {
        let row = (k - 1) * n;
        phi_x.view_mut((row, 0), (n, n)).copy_from(&powers[k]);
        for i in 0..k {
            let factor = &powers[k - i - 1];
            phi_u
                .view_mut((row, i * m), (n, m))
                .copy_from(&(factor * sys.b()));
            phi_w.view_mut((row, i * n), (n, n)).copy_from(factor);
        }
    }
    SensitivityMaps { phi_x, phi_u, phi_w }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::TestRng;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn free_inputs(steps: usize, dim: usize, values: Vec<DVector<f64>>) -> InputSeq {
        let big = 1e9;
        assert_eq!(values.len(), steps);
        InputSeq::new(
            values,
            DVector::from_element(dim, -big),
            DVector::from_element(dim, big),
        )
        .unwrap()
    }

    #[test]
    fn identity_dynamics_hold_state() {
        let sys = LinearSystem::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1)).unwrap();
        let x0 = DVector::from_vec(vec![3.0, -1.5]);
        let u = free_inputs(4, 1, vec![DVector::zeros(1); 4]);
        let w = DisturbanceSeq::zeros(4, 2);
        let trace = rollout(&sys, &x0, &u, &w).unwrap();
        for k in 0..=4 {
            assert_eq!(trace.state(k), &x0);
        }
    }

    #[test]
    fn memoryless_dynamics_follow_input() {
        let sys = LinearSystem::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let u = free_inputs(3, 2, vec![e1.clone(); 3]);
        let w = DisturbanceSeq::zeros(3, 2);
        let trace = rollout(&sys, &DVector::zeros(2), &u, &w).unwrap();
        for k in 1..=3 {
            assert_eq!(trace.state(k), &e1);
        }
    }

    #[test]
    fn case_study_system_rests_at_startpoint() {
        let sys = LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 1, &[0.5, 1.0]),
        )
        .unwrap();
        let x0 = DVector::from_vec(vec![-8.0, 0.0]);
        let u = free_inputs(15, 1, vec![DVector::zeros(1); 15]);
        let w = DisturbanceSeq::zeros(15, 2);
        let trace = rollout(&sys, &x0, &u, &w).unwrap();
        for k in 0..=15 {
            assert_eq!(trace.state(k), &x0);
        }
    }

    #[test]
    fn closed_form_matches_recursion() {
        let mut rng = TestRng::new(12);
        let sys = LinearSystem::new(
            DMatrix::from_fn(3, 3, |_, _| rng.uniform(-1.0, 1.0)),
            DMatrix::from_fn(3, 2, |_, _| rng.uniform(-1.0, 1.0)),
        )
        .unwrap();
        let horizon = 6;
        let powers = matrix_powers(sys.a(), horizon + 1);
        let x0 = rng.vector(3, -2.0, 2.0);
        let u = free_inputs(
            horizon,
            2,
            (0..horizon).map(|_| rng.vector(2, -1.0, 1.0)).collect(),
        );
        let w = DisturbanceSeq::new((0..horizon).map(|_| rng.vector(3, -0.5, 0.5)).collect())
            .unwrap();
        let trace = rollout(&sys, &x0, &u, &w).unwrap();
        for k in 0..=horizon {
            let mut expected = &powers[k] * &x0;
            for i in 0..k {
                expected += &powers[k - i - 1] * (sys.b() * &u.steps()[i] + &w.steps()[i]);
            }
            assert_relative_eq!(
                (trace.state(k) - &expected).norm(),
                0.0,
                epsilon = 1e-9 * expected.norm().max(1.0)
            );
        }
    }

    #[test]
    fn sensitivity_one_step() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -0.25, 0.75]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let sys = LinearSystem::new(a.clone(), b.clone()).unwrap();
        let maps = sensitivity_maps(&sys, 1);
        assert_eq!(maps.phi_x, a);
        assert_eq!(maps.phi_u, b);
        assert_eq!(maps.phi_w, DMatrix::identity(2, 2));
    }

    #[test]
    fn sensitivity_cumulative_for_identity() {
        let sys = LinearSystem::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        let maps = sensitivity_maps(&sys, 2);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                1.0, 0.0, 1.0, 0.0, //
                0.0, 1.0, 0.0, 1.0,
            ],
        );
        assert_eq!(maps.phi_w, expected);
    }

    #[test]
    fn sensitivity_reproduces_rollout() {
        let mut rng = TestRng::new(77);
        let sys = LinearSystem::new(
            DMatrix::from_fn(2, 2, |_, _| rng.uniform(-1.0, 1.0)),
            DMatrix::from_fn(2, 1, |_, _| rng.uniform(-1.0, 1.0)),
        )
        .unwrap();
        let horizon = 5;
        let maps = sensitivity_maps(&sys, horizon);
        for _ in 0..100 {
            let x0 = rng.vector(2, -2.0, 2.0);
            let u = free_inputs(
                horizon,
                1,
                (0..horizon).map(|_| rng.vector(1, -1.0, 1.0)).collect(),
            );
            let w = DisturbanceSeq::new((0..horizon).map(|_| rng.vector(2, -1.0, 1.0)).collect())
                .unwrap();
            let trace = rollout(&sys, &x0, &u, &w).unwrap();
            let stacked = &maps.phi_x * &x0 + &maps.phi_u * u.stacked() + &maps.phi_w * w.stacked();
            for k in 1..=horizon {
                let from_map = stacked.rows((k - 1) * 2, 2);
                assert_relative_eq!(
                    (trace.state(k) - from_map).norm(),
                    0.0,
                    epsilon = 1e-9 * trace.state(k).norm().max(1.0)
                );
            }
        }
    }

    #[test]
    fn superposition_of_input_and_disturbance() {
        let mut rng = TestRng::new(3);
        let sys = LinearSystem::new(
            DMatrix::from_fn(2, 2, |_, _| rng.uniform(-1.0, 1.0)),
            DMatrix::from_fn(2, 1, |_, _| rng.uniform(-1.0, 1.0)),
        )
        .unwrap();
        let horizon = 6;
        for _ in 0..50 {
            let x0 = rng.vector(2, -1.0, 1.0);
            let u = free_inputs(
                horizon,
                1,
                (0..horizon).map(|_| rng.vector(1, -1.0, 1.0)).collect(),
            );
            let zero_u = free_inputs(horizon, 1, vec![DVector::zeros(1); horizon]);
            let w = DisturbanceSeq::new((0..horizon).map(|_| rng.vector(2, -1.0, 1.0)).collect())
                .unwrap();
            let full = rollout(&sys, &x0, &u, &w).unwrap();
            let input_only = rollout(&sys, &x0, &u, &DisturbanceSeq::zeros(horizon, 2)).unwrap();
            let noise_only = rollout(&sys, &DVector::zeros(2), &zero_u, &w).unwrap();
            for k in 0..=horizon {
                let sum = input_only.state(k) + noise_only.state(k);
                assert_relative_eq!(
                    (full.state(k) - sum).norm(),
                    0.0,
                    epsilon = 1e-9 * full.state(k).norm().max(1.0)
                );
            }
        }
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let sys = LinearSystem::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1)).unwrap();
        let u = free_inputs(3, 1, vec![DVector::zeros(1); 3]);
        let w = DisturbanceSeq::zeros(2, 2);
        assert!(matches!(
            rollout(&sys, &DVector::zeros(2), &u, &w),
            Err(LinsysError::Length { .. })
        ));
    }

    #[test]
    fn input_box_is_enforced() {
        let err = InputSeq::new(
            vec![DVector::from_vec(vec![2.0])],
            DVector::from_vec(vec![-1.0]),
            DVector::from_vec(vec![1.0]),
        );
        assert!(matches!(err, Err(LinsysError::InputOutOfBounds { .. })));
    }
}
