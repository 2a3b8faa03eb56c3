//! Lipschitz constant of the robustness function with respect to the
//! disturbance sequence: `L_phi = L1 * L2`, where `L1` is the largest
//! predicate constant over a compact operating region and
//! `L2 = sqrt(sum_{i=0}^{N-1} ||A^i||^2)` bounds the sensitivity of any state
//! to the stacked disturbance.

use crate::linsys::{matrix_powers, LinearSystem};
use crate::stl::{Formula, Predicate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LipschitzError {
    #[error("region is empty: lower bound exceeds upper bound at coordinate {0}")]
    EmptyRegion(usize),
    #[error("region bounds must be finite")]
    NonFiniteRegion,
    #[error("region dimension {got} does not match state dimension {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Compact box of state space over which predicate constants are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, LipschitzError> {
        if lo.len() != hi.len() {
            return Err(LipschitzError::Dimension {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if !lo.iter().chain(hi.iter()).all(|v| v.is_finite()) {
            return Err(LipschitzError::NonFiniteRegion);
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if l > h {
                return Err(LipschitzError::EmptyRegion(i));
            }
        }
        Ok(Region { lo, hi })
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
                .all(|(i, &v)| v >= self.lo[i] && v <= self.hi[i])
    }

    /// Grow the box symmetrically about its center by `factor` (0.2 = +20%).
    pub fn inflate(&self, factor: f64) -> Region {
        let lo = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let c = 0.5 * (l + h);
                let half = 0.5 * (h - l) * (1.0 + factor);
                c - half
            })
            .collect();
        let hi = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let c = 0.5 * (l + h);
                let half = 0.5 * (h - l) * (1.0 + factor);
                c + half
            })
            .collect();
        Region { lo, hi }
    }
}

/// Constants reported by [`formula_lipschitz`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// Largest predicate constant.
    pub l1: f64,
    /// Trajectory sensitivity bound from the matrix powers.
    pub l2: f64,
    /// `l1 * l2`.
    pub l_phi: f64,
    /// Constant of each predicate leaf, in formula pre-order.
    pub per_predicate: Vec<f64>,
}

/// Spectral norm of a 1x1 or 2x2 matrix in closed form.
pub fn spectral_norm_closed_form(a: &DMatrix<f64>) -> Option<f64> {
    match a.nrows() {
        1 if a.ncols() == 1 => Some(a[(0, 0)].abs()),
        2 if a.ncols() == 2 => {
            let m = a.transpose() * a;
            let (p, q, r) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mid = 0.5 * (p + r);
            let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            Some((mid + rad).max(0.0).sqrt())
        }
        _ => None,
    }
}

/// Spectral norm by power iteration on `A' A`, deterministically seeded with
/// the all-ones vector plus fixed pseudo-random restarts.
pub fn spectral_norm_power_iteration(a: &DMatrix<f64>) -> f64 {
    let m = a.transpose() * a;
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let frob = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob == 0.0 {
        return 0.0;
    }
    let mut best = 0.0f64;
    let starts = deterministic_starts(n);
    for start in starts {
        let mut v = start;
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        v /= norm;
        let mut lambda = 0.0f64;
        for _ in 0..20_000 {
            let mv = &m * &v;
            let new_lambda = v.dot(&mv);
            let mv_norm = mv.norm();
            if mv_norm == 0.0 {
                lambda = 0.0;
                break;
            }
            v = mv / mv_norm;
            if (new_lambda - lambda).abs() <= 1e-10 * new_lambda.abs().max(1e-300) {
                lambda = new_lambda;
                break;
            }
            lambda = new_lambda;
        }
        best = best.max(lambda);
    }
    best.max(0.0).sqrt()
}

fn deterministic_starts(n: usize) -> Vec<DVector<f64>> {
    let ones = DVector::from_element(n, 1.0);
    // Fixed linear-congruential stream; only used to break symmetry when the
    // ones vector is orthogonal to the top eigenvector.
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut pseudo = |len: usize| {
        DVector::from_fn(len, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    };
    vec![ones, pseudo(n), pseudo(n)]
}

/// Spectral norm; closed form for n <= 2, power iteration otherwise.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    spectral_norm_closed_form(a).unwrap_or_else(|| spectral_norm_power_iteration(a))
}

/// `L2 = sqrt(sum_{i=0}^{N-1} ||A^i||^2)`.
pub fn l2_bound(a: &DMatrix<f64>, horizon: usize) -> f64 {
    assert!(horizon >= 1, "horizon must be at least 1");
    matrix_powers(a, horizon)
        .iter()
        .map(|p| {
            let s = spectral_norm(p);
            s * s
        })
        .sum::<f64>()
        .sqrt()
}

/// Lipschitz constant of a predicate over the region.
///
/// Affine predicates are globally Lipschitz with `||c||`. Quadratic predicates
/// get a region-restricted constant `2 sup_{x in R} ||Q (x - p)||`, attained at
/// a box vertex because the norm is convex; vertices are enumerated up to
/// dimension 16, beyond which the product bound `2 ||Q|| sup ||x - p||` is used.
pub fn predicate_lipschitz(pred: &Predicate, region: &Region) -> f64 {
    match pred {
        Predicate::Affine { c, .. } => c.norm(),
        Predicate::QuadraticCap {
            center, weights, ..
        }
        | Predicate::QuadraticFloor {
            center, weights, ..
        } => {
            let n = region.dim();
            if n <= 16 {
                let mut best = 0.0f64;
                for mask in 0u32..(1u32 << n) {
                    let vertex = DVector::from_fn(n, |i, _| {
                        if mask & (1 << i) != 0 {
                            region.hi[i]
                        } else {
                            region.lo[i]
                        }
                    });
                    best = best.max((weights * (&vertex - center)).norm());
                }
                2.0 * best
            } else {
                let far = DVector::from_fn(n, |i, _| {
                    (region.lo[i] - center[i])
                        .abs()
                        .max((region.hi[i] - center[i]).abs())
                });
                2.0 * spectral_norm(weights) * far.norm()
            }
        }
    }
}

/// Constants for a whole formula over a system with the given horizon.
pub fn formula_lipschitz(
    formula: &Formula,
    sys: &LinearSystem,
    horizon: usize,
    region: &Region,
) -> Result<LipschitzReport, LipschitzError> {
    if region.dim() != sys.state_dim() {
        return Err(LipschitzError::Dimension {
            expected: sys.state_dim(),
            got: region.dim(),
        });
    }
    let per_predicate: Vec<f64> = formula
        .predicates()
        .iter()
        .map(|p| predicate_lipschitz(p, region))
        .collect();
    let l1 = per_predicate.iter().cloned().fold(0.0, f64::max);
    let l2 = l2_bound(sys.a(), horizon);
    Ok(LipschitzReport {
        l1,
        l2,
        l_phi: l1 * l2,
        per_predicate,
    })
}
