//! Negation normal form: negations pushed to the leaves.
//!
//! A negated `Until` has no dual operator in the grammar; since windows are
//! finite it is expanded exactly through the identity
//! `phi U[a,b] psi  ==  OR_j (F[j,j] psi & G[0,j] phi)`, whose negation is an
//! `AND` chain of `G[j,j] !psi | F[0,j] !phi`. Both Boolean satisfaction and
//! exact robustness are preserved bit-for-bit because min/max chains are
//! order-insensitive and leaf negation is exact in IEEE arithmetic.

use super::{Formula, StlError};

/// True when `Not` appears only directly above predicate or `T` leaves.
pub fn is_nnf(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::Pred { .. } => true,
        Formula::Not(g) => matches!(**g, Formula::True | Formula::Pred { .. }),
        Formula::And(l, r) | Formula::Or(l, r) => is_nnf(l) && is_nnf(r),
        Formula::Until { lhs, rhs, .. } => is_nnf(lhs) && is_nnf(rhs),
        Formula::Eventually { arg, .. } | Formula::Always { arg, .. } => is_nnf(arg),
    }
}

/// Semantically equivalent formula in negation normal form.
pub fn to_nnf(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::Pred { .. } => f.clone(),
        Formula::Not(g) => negate(g),
        Formula::And(l, r) => Formula::and(to_nnf(l), to_nnf(r)),
        Formula::Or(l, r) => Formula::or(to_nnf(l), to_nnf(r)),
        Formula::Until { lo, hi, lhs, rhs } => Formula::Until {
            lo: *lo,
            hi: *hi,
            lhs: Box::new(to_nnf(lhs)),
            rhs: Box::new(to_nnf(rhs)),
        },
        Formula::Eventually { lo, hi, arg } => Formula::Eventually {
            lo: *lo,
            hi: *hi,
            arg: Box::new(to_nnf(arg)),
        },
        Formula::Always { lo, hi, arg } => Formula::Always {
            lo: *lo,
            hi: *hi,
            arg: Box::new(to_nnf(arg)),
        },
    }
}

fn negate(f: &Formula) -> Formula {
    match f {
        Formula::True => Formula::not(Formula::True),
        Formula::Pred { pred, .. } => Formula::pred(pred.negated()),
        Formula::Not(g) => to_nnf(g),
        Formula::And(l, r) => Formula::or(negate(l), negate(r)),
        Formula::Or(l, r) => Formula::and(negate(l), negate(r)),
        Formula::Eventually { lo, hi, arg } => Formula::Always {
            lo: *lo,
            hi: *hi,
            arg: Box::new(negate(arg)),
        },
        Formula::Always { lo, hi, arg } => Formula::Eventually {
            lo: *lo,
            hi: *hi,
            arg: Box::new(negate(arg)),
        },
        Formula::Until { lo, hi, lhs, rhs } => {
            let not_rhs = negate(rhs);
            let not_lhs = negate(lhs);
            let mut acc: Option<Formula> = None;
            for j in *lo..=*hi {
                let miss_rhs = Formula::Always {
                    lo: j,
                    hi: j,
                    arg: Box::new(not_rhs.clone()),
                };
                let break_lhs = Formula::Eventually {
                    lo: 0,
                    hi: j,
                    arg: Box::new(not_lhs.clone()),
                };
                let clause = Formula::or(miss_rhs, break_lhs);
                acc = Some(match acc {
                    None => clause,
                    Some(prev) => Formula::and(prev, clause),
                });
            }
            acc.expect("until interval is nonempty")
        }
    }
}

/// Guard used by smoothed evaluation.
pub(super) fn require_nnf(f: &Formula) -> Result<(), StlError> {
    if is_nnf(f) {
        Ok(())
    } else {
        Err(StlError::NotInNnf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{eval_boolean, robustness, Predicate};
    use crate::testing::{random_formula, random_trace, TestRng};
    use nalgebra::DVector;

    fn p() -> Formula {
        Formula::pred(Predicate::affine(DVector::from_vec(vec![1.0, 0.0]), 0.5).unwrap())
    }

    fn q() -> Formula {
        Formula::pred(Predicate::affine(DVector::from_vec(vec![0.0, 1.0]), -0.25).unwrap())
    }

    #[test]
    fn de_morgan() {
        let f = Formula::not(Formula::and(p(), q()));
        let nnf = to_nnf(&f);
        match &nnf {
            Formula::Or(l, r) => {
                assert!(matches!(**l, Formula::Pred { .. }));
                assert!(matches!(**r, Formula::Pred { .. }));
            }
            other => panic!("expected disjunction, got {other:?}"),
        }
        assert!(is_nnf(&nnf));
    }

    #[test]
    fn always_eventually_duality() {
        let f = Formula::not(Formula::always(1, 4, p()).unwrap());
        let nnf = to_nnf(&f);
        match &nnf {
            Formula::Eventually { lo: 1, hi: 4, arg } => {
                assert!(matches!(**arg, Formula::Pred { .. }))
            }
            other => panic!("expected eventually, got {other:?}"),
        }
    }

    #[test]
    fn double_negation() {
        let f = Formula::not(Formula::not(p()));
        assert_eq!(to_nnf(&f), p());
    }

    #[test]
    fn negated_affine_leaf_is_exact() {
        let f = Formula::not(p());
        match to_nnf(&f) {
            Formula::Pred {
                pred: Predicate::Affine { c, d },
                ..
            } => {
                assert_eq!(c, DVector::from_vec(vec![-1.0, 0.0]));
                assert_eq!(d, -0.5);
            }
            other => panic!("expected affine leaf, got {other:?}"),
        }
    }

    #[test]
    fn quadratic_negation_swaps_cap_and_floor() {
        let cap = Predicate::quadratic_cap(
            DVector::zeros(2),
            nalgebra::DMatrix::identity(2, 2),
            1.0,
        )
        .unwrap();
        let f = Formula::not(Formula::pred(cap.clone()));
        match to_nnf(&f) {
            Formula::Pred {
                pred: pred @ Predicate::QuadraticFloor { .. },
                ..
            } => {
                let x = DVector::from_vec(vec![0.5, -0.25]);
                assert_eq!(pred.eval(&x), -cap.eval(&x));
            }
            other => panic!("expected quadratic floor, got {other:?}"),
        }
    }

    #[test]
    fn nnf_preserves_semantics_on_random_instances() {
        let mut rng = TestRng::new(321);
        for _ in 0..10_000 {
            let f = random_formula(&mut rng, 3, 2);
            let nnf = to_nnf(&f);
            assert!(is_nnf(&nnf), "not NNF: {nnf}");
            let len = f.horizon().max(nnf.horizon()) + 1;
            let trace = random_trace(&mut rng, len, 2, 3.0);
            assert_eq!(
                eval_boolean(&f, &trace, 0).unwrap(),
                eval_boolean(&nnf, &trace, 0).unwrap(),
                "boolean mismatch for {f}"
            );
            assert_eq!(
                robustness(&f, &trace, 0).unwrap(),
                robustness(&nnf, &trace, 0).unwrap(),
                "robustness mismatch for {f}"
            );
        }
    }

    #[test]
    fn negated_until_expands_within_same_horizon() {
        let f = Formula::not(Formula::until(1, 3, p(), q()).unwrap());
        let nnf = to_nnf(&f);
        assert!(is_nnf(&nnf));
        assert_eq!(nnf.horizon(), f.horizon());
    }
}
