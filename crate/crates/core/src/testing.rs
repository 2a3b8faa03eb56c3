//! Seeded generators shared by the unit, property, and acceptance suites.

use crate::stl::{Formula, Predicate, Trace};
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Deterministic RNG for tests.
pub struct TestRng {
    inner: ChaCha12Rng,
}

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng {
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.inner.next_u64() % n.max(1) as u64) as usize
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.unit().max(f64::MIN_POSITIVE);
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn vector(&mut self, dim: usize, lo: f64, hi: f64) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| self.uniform(lo, hi))
    }
}

/// Random affine predicate over an `n`-dimensional state.
pub fn random_affine(rng: &mut TestRng, dim: usize, scale: f64) -> Predicate {
    let c = rng.vector(dim, -scale, scale);
    let d = rng.uniform(-scale, scale);
    Predicate::affine(c, d).unwrap()
}

/// Random PSD quadratic-cap predicate.
pub fn random_quadratic(rng: &mut TestRng, dim: usize, scale: f64) -> Predicate {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.uniform(-1.0, 1.0));
    let q = &a * a.transpose();
    let center = rng.vector(dim, -scale, scale);
    let level = rng.uniform(-scale, scale);
    Predicate::quadratic_cap(center, q, level).unwrap()
}

/// Random formula with bounded operator depth and small temporal windows.
pub fn random_formula(rng: &mut TestRng, depth: usize, dim: usize) -> Formula {
    if depth == 0 || rng.chance(0.25) {
        return if rng.chance(0.05) {
            Formula::True
        } else if rng.chance(0.15) {
            Formula::pred(random_quadratic(rng, dim, 2.0))
        } else {
            Formula::pred(random_affine(rng, dim, 2.0))
        };
    }
    let lo = rng.below(3);
    let hi = lo + rng.below(3);
    match rng.below(6) {
        0 => Formula::not(random_formula(rng, depth - 1, dim)),
        1 => Formula::and(
            random_formula(rng, depth - 1, dim),
            random_formula(rng, depth - 1, dim),
        ),
        2 => Formula::or(
            random_formula(rng, depth - 1, dim),
            random_formula(rng, depth - 1, dim),
        ),
        3 => Formula::until(
            lo,
            hi,
            random_formula(rng, depth - 1, dim),
            random_formula(rng, depth - 1, dim),
        )
        .unwrap(),
        4 => Formula::eventually(lo, hi, random_formula(rng, depth - 1, dim)).unwrap(),
        _ => Formula::always(lo, hi, random_formula(rng, depth - 1, dim)).unwrap(),
    }
}

/// Random formula without `True` leaves (for smoothing-focused suites).
pub fn random_formula_no_true(rng: &mut TestRng, depth: usize, dim: usize) -> Formula {
    loop {
        let f = random_formula(rng, depth, dim);
        if !contains_true(&f) {
            return f;
        }
    }
}

fn contains_true(f: &Formula) -> bool {
    match f {
        Formula::True => true,
        Formula::Pred { .. } => false,
        Formula::Not(g) => contains_true(g),
        Formula::And(l, r) | Formula::Or(l, r) => contains_true(l) || contains_true(r),
        Formula::Until { lhs, rhs, .. } => contains_true(lhs) || contains_true(rhs),
        Formula::Eventually { arg, .. } | Formula::Always { arg, .. } => contains_true(arg),
    }
}

/// Random trace of `len` states with entries uniform in `[-scale, scale]`.
pub fn random_trace(rng: &mut TestRng, len: usize, dim: usize, scale: f64) -> Trace {
    Trace::new(
        (0..len.max(1))
            .map(|_| rng.vector(dim, -scale, scale))
            .collect(),
    )
    .unwrap()
}
