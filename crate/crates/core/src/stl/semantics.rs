//! Boolean satisfaction and exact quantitative robustness.

use super::{Formula, StlError, Trace, TRUE_ROBUSTNESS_SENTINEL};

fn check_length(f: &Formula, trace: &Trace, k: usize) -> Result<(), StlError> {
    let needed = k + f.horizon() + 1;
    if trace.len() < needed {
        return Err(StlError::TraceTooShort {
            needed,
            actual: trace.len(),
        });
    }
    Ok(())
}

/// Boolean satisfaction `(xi, k) |= f`.
pub fn eval_boolean(f: &Formula, trace: &Trace, k: usize) -> Result<bool, StlError> {
    check_length(f, trace, k)?;
    Ok(eval_bool_rec(f, trace, k))
}

fn eval_bool_rec(f: &Formula, trace: &Trace, t: usize) -> bool {
    match f {
        Formula::True => true,
        Formula::Pred { pred, .. } => pred.eval(trace.state(t)) >= 0.0,
        Formula::Not(g) => !eval_bool_rec(g, trace, t),
        Formula::And(l, r) => eval_bool_rec(l, trace, t) && eval_bool_rec(r, trace, t),
        Formula::Or(l, r) => eval_bool_rec(l, trace, t) || eval_bool_rec(r, trace, t),
        Formula::Until { lo, hi, lhs, rhs } => {
            let mut lhs_holds = true;
            for j in 0..=*hi {
                lhs_holds = lhs_holds && eval_bool_rec(lhs, trace, t + j);
                if j >= *lo && lhs_holds && eval_bool_rec(rhs, trace, t + j) {
                    return true;
                }
                if !lhs_holds {
                    return false;
                }
            }
            false
        }
        Formula::Eventually { lo, hi, arg } => {
            (*lo..=*hi).any(|j| eval_bool_rec(arg, trace, t + j))
        }
        Formula::Always { lo, hi, arg } => (*lo..=*hi).all(|j| eval_bool_rec(arg, trace, t + j)),
    }
}

/// Exact quantitative robustness with the default sentinel for `T`.
pub fn robustness(f: &Formula, trace: &Trace, k: usize) -> Result<f64, StlError> {
    robustness_with_sentinel(f, trace, k, TRUE_ROBUSTNESS_SENTINEL)
}

/// Exact quantitative robustness; positive values imply Boolean satisfaction.
pub fn robustness_with_sentinel(
    f: &Formula,
    trace: &Trace,
    k: usize,
    sentinel: f64,
) -> Result<f64, StlError> {
    check_length(f, trace, k)?;
    Ok(rob_rec(f, trace, k, sentinel))
}

fn rob_rec(f: &Formula, trace: &Trace, t: usize, sentinel: f64) -> f64 {
    match f {
        Formula::True => sentinel,
        Formula::Pred { pred, .. } => pred.eval(trace.state(t)),
        Formula::Not(g) => -rob_rec(g, trace, t, sentinel),
        Formula::And(l, r) => rob_rec(l, trace, t, sentinel).min(rob_rec(r, trace, t, sentinel)),
        Formula::Or(l, r) => rob_rec(l, trace, t, sentinel).max(rob_rec(r, trace, t, sentinel)),
        Formula::Until { lo, hi, lhs, rhs } => {
            let mut best = f64::NEG_INFINITY;
            let mut lhs_prefix = f64::INFINITY;
            for j in 0..=*hi {
                lhs_prefix = lhs_prefix.min(rob_rec(lhs, trace, t + j, sentinel));
                if j >= *lo {
                    let cand = rob_rec(rhs, trace, t + j, sentinel).min(lhs_prefix);
                    best = best.max(cand);
                }
            }
            best
        }
        Formula::Eventually { lo, hi, arg } => (*lo..=*hi)
            .map(|j| rob_rec(arg, trace, t + j, sentinel))
            .fold(f64::NEG_INFINITY, f64::max),
        Formula::Always { lo, hi, arg } => (*lo..=*hi)
            .map(|j| rob_rec(arg, trace, t + j, sentinel))
            .fold(f64::INFINITY, f64::min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::Predicate;
    use nalgebra::DVector;

    fn x1_pred() -> Formula {
        Formula::pred(Predicate::affine(DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap())
    }

    fn trace_from_x1(vals: &[f64]) -> Trace {
        Trace::new(
            vals.iter()
                .map(|&v| DVector::from_vec(vec![v, 0.0]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn horizon_examples() {
        let p = x1_pred();
        assert_eq!(p.horizon(), 0);
        assert_eq!(Formula::always(0, 15, p.clone()).unwrap().horizon(), 15);
        let nested = Formula::eventually(2, 4, Formula::always(1, 3, p).unwrap()).unwrap();
        assert_eq!(nested.horizon(), 7);
    }

    #[test]
    fn horizon_dependency_scan() {
        // The value must not depend on states beyond k + horizon, must be
        // computable with exactly horizon + 1 states, and must fail with one
        // fewer. Checked over seeded random formulas and traces.
        use crate::testing::{random_formula, random_trace, TestRng};
        let mut rng = TestRng::new(2024);
        for _ in 0..200 {
            let f = random_formula(&mut rng, 3, 2);
            let h = f.horizon();
            let base = random_trace(&mut rng, h + 6, 2, 5.0);
            let value = robustness(&f, &base, 0).unwrap();
            for _ in 0..3 {
                let mut states = base.states().to_vec();
                for s in states.iter_mut().skip(h + 1) {
                    *s = DVector::from_vec(vec![rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)]);
                }
                let perturbed = Trace::new(states).unwrap();
                assert_eq!(robustness(&f, &perturbed, 0).unwrap(), value);
            }
            let exact = Trace::new(base.states()[..h + 1].to_vec()).unwrap();
            assert_eq!(robustness(&f, &exact, 0).unwrap(), value);
            if h > 0 {
                let short = Trace::new(base.states()[..h].to_vec()).unwrap();
                assert!(matches!(
                    robustness(&f, &short, 0),
                    Err(StlError::TraceTooShort { .. })
                ));
            }
        }
    }

    #[test]
    fn boolean_sign_test() {
        let f = x1_pred();
        let trace = trace_from_x1(&[1.0]);
        assert!(eval_boolean(&f, &trace, 0).unwrap());
    }

    #[test]
    fn boolean_always_with_violation() {
        let f = Formula::always(0, 2, x1_pred()).unwrap();
        let trace = trace_from_x1(&[1.0, -1.0, 1.0]);
        assert!(!eval_boolean(&f, &trace, 0).unwrap());
    }

    #[test]
    fn boolean_until_matches_exhaustive_definition() {
        use crate::testing::{random_trace, TestRng};
        let mut rng = TestRng::new(7);
        let p = x1_pred();
        let q = Formula::pred(Predicate::affine(DVector::from_vec(vec![0.0, 1.0]), 0.0).unwrap());
        for _ in 0..500 {
            let lo = rng.below(3);
            let hi = lo + rng.below(3);
            let f = Formula::until(lo, hi, p.clone(), q.clone()).unwrap();
            let trace = random_trace(&mut rng, f.horizon() + 2, 2, 1.0);
            let got = eval_boolean(&f, &trace, 0).unwrap();
            // Exhaustive: exists j in [lo,hi] with q at j and p on 0..=j.
            let expected = (lo..=hi).any(|j| {
                eval_boolean(&q, &trace, j).unwrap()
                    && (0..=j).all(|i| eval_boolean(&p, &trace, i).unwrap())
            });
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn robustness_constant_safety_margin() {
        let pred =
            Formula::pred(Predicate::affine(DVector::from_vec(vec![0.0, -1.0]), 0.75).unwrap());
        let f = Formula::always(0, 15, pred).unwrap();
        let trace = Trace::new(
            (0..16)
                .map(|k| DVector::from_vec(vec![k as f64, 0.0]))
                .collect(),
        )
        .unwrap();
        assert_eq!(robustness(&f, &trace, 0).unwrap(), 0.75);
    }

    #[test]
    fn robustness_negation_flips_sign() {
        use crate::testing::{random_formula, random_trace, TestRng};
        let mut rng = TestRng::new(11);
        for _ in 0..200 {
            let g = random_formula(&mut rng, 3, 2);
            let f = Formula::not(g.clone());
            let trace = random_trace(&mut rng, f.horizon() + 1, 2, 3.0);
            assert_eq!(
                robustness(&f, &trace, 0).unwrap(),
                -robustness(&g, &trace, 0).unwrap()
            );
        }
    }

    #[test]
    fn robustness_eventually_is_window_max() {
        let f = Formula::eventually(0, 2, x1_pred()).unwrap();
        let trace = trace_from_x1(&[-1.0, 3.0, 2.0]);
        assert_eq!(robustness(&f, &trace, 0).unwrap(), 3.0);
    }

    #[test]
    fn trace_too_short_is_reported() {
        let f = Formula::always(0, 5, x1_pred()).unwrap();
        let trace = trace_from_x1(&[0.0, 1.0]);
        match robustness(&f, &trace, 0) {
            Err(StlError::TraceTooShort { needed: 6, actual: 2 }) => {}
            other => panic!("expected trace-too-short, got {other:?}"),
        }
    }

    #[test]
    fn sign_soundness_on_random_instances() {
        use crate::testing::{random_formula, random_trace, TestRng};
        let mut rng = TestRng::new(99);
        let mut checked = 0usize;
        while checked < 10_000 {
            let f = random_formula(&mut rng, 3, 2);
            let extra = rng.below(3);
            let trace = random_trace(&mut rng, f.horizon() + 1 + extra, 2, 4.0);
            let rho = robustness(&f, &trace, 0).unwrap();
            if rho == 0.0 {
                continue;
            }
            let sat = eval_boolean(&f, &trace, 0).unwrap();
            assert_eq!(rho > 0.0, sat, "formula {f} rho {rho} sat {sat}");
            checked += 1;
        }
    }

    #[test]
    fn fg_duality_exact() {
        use crate::testing::{random_trace, TestRng};
        let mut rng = TestRng::new(5);
        let p = x1_pred();
        for _ in 0..200 {
            let lo = rng.below(4);
            let hi = lo + rng.below(4);
            let g = Formula::always(lo, hi, p.clone()).unwrap();
            let f_neg = Formula::eventually(lo, hi, Formula::not(p.clone())).unwrap();
            let trace = random_trace(&mut rng, hi + 1, 2, 2.0);
            assert_eq!(
                robustness(&g, &trace, 0).unwrap(),
                -robustness(&f_neg, &trace, 0).unwrap()
            );
        }
    }
}
