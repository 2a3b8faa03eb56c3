//! Smoothed quantitative semantics.
//!
//! Min sites use the soft minimum `-(1/C) log sum exp(-C a_i)` and max sites
//! the exponentially weighted average `sum a_i exp(C a_i) / sum exp(C a_i)`.
//! Both never exceed the exact operator, so the smoothed robustness of an NNF
//! formula is a lower bound on the exact robustness and certifying it above a
//! level certifies the exact semantics too. Gradients with respect to every
//! trace state are propagated alongside values.

use super::nnf::require_nnf;
use super::{Formula, SmoothingConfig, StlError, Trace, TRUE_ROBUSTNESS_SENTINEL};
use nalgebra::DVector;
use std::collections::HashMap;

/// Derivative of the smoothed robustness with respect to each trace state.
#[derive(Debug, Clone)]
pub struct SmoothGradient {
    /// `per_state[t]` is `d rho / d x_t`.
    pub per_state: Vec<DVector<f64>>,
}

impl SmoothGradient {
    fn zeros(len: usize, dim: usize) -> Self {
        SmoothGradient {
            per_state: vec![DVector::zeros(dim); len],
        }
    }

    fn axpy(&mut self, weight: f64, other: &SmoothGradient) {
        for (acc, g) in self.per_state.iter_mut().zip(&other.per_state) {
            acc.axpy(weight, g, 1.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for g in &mut self.per_state {
            *g *= factor;
        }
    }
}

/// Soft minimum value and its partial derivatives.
fn softmin(vals: &[f64], c: f64) -> (f64, Vec<f64>) {
    let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = vals.iter().map(|&v| (-c * (v - m)).exp()).collect();
    let z: f64 = exps.iter().sum();
    let value = m - z.ln() / c;
    let weights = exps.iter().map(|e| e / z).collect();
    (value, weights)
}

/// Weighted soft maximum value and its partial derivatives.
fn softmax(vals: &[f64], c: f64) -> (f64, Vec<f64>) {
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = vals.iter().map(|&v| (c * (v - m)).exp()).collect();
    let z: f64 = exps.iter().sum();
    let value = vals.iter().zip(&exps).map(|(v, e)| v * e).sum::<f64>() / z;
    let partials = vals
        .iter()
        .zip(&exps)
        .map(|(&v, &e)| e / z * (1.0 + c * (v - value)))
        .collect();
    (value, partials)
}

struct Evaluator<'a> {
    trace: &'a Trace,
    cfg: &'a SmoothingConfig,
    want_grad: bool,
    memo: HashMap<(usize, usize), (f64, Option<SmoothGradient>)>,
}

impl<'a> Evaluator<'a> {
    fn zero_grad(&self) -> SmoothGradient {
        SmoothGradient::zeros(self.trace.len(), self.trace.dim())
    }

    fn combine(
        &self,
        parts: &[(f64, &(f64, Option<SmoothGradient>))],
    ) -> Option<SmoothGradient> {
        if !self.want_grad {
            return None;
        }
        let mut acc = self.zero_grad();
        for (w, (_, grad)) in parts {
            acc.axpy(*w, grad.as_ref().expect("gradient requested"));
        }
        Some(acc)
    }

    fn eval(&mut self, f: &Formula, id: usize, t: usize) -> (f64, Option<SmoothGradient>) {
        if let Some(hit) = self.memo.get(&(id, t)) {
            return hit.clone();
        }
        let result = self.eval_uncached(f, id, t);
        self.memo.insert((id, t), result.clone());
        result
    }

    fn eval_uncached(&mut self, f: &Formula, id: usize, t: usize) -> (f64, Option<SmoothGradient>) {
        match f {
            Formula::True => (
                TRUE_ROBUSTNESS_SENTINEL,
                self.want_grad.then(|| self.zero_grad()),
            ),
            Formula::Pred { pred, .. } => {
                let value = pred.eval(self.trace.state(t));
                let grad = self.want_grad.then(|| {
                    let mut g = self.zero_grad();
                    g.per_state[t] = pred.gradient(self.trace.state(t));
                    g
                });
                (value, grad)
            }
            // NNF admits negation only directly above leaves.
            Formula::Not(leaf) => {
                let (value, grad) = self.eval(leaf, id + 1, t);
                let grad = grad.map(|mut g| {
                    g.scale(-1.0);
                    g
                });
                (-value, grad)
            }
            Formula::And(l, r) => {
                let c = self.cfg.constant_for(id, f);
                let left = self.eval(l, id + 1, t);
                let right = self.eval(r, id + 1 + l.node_count(), t);
                let (value, w) = softmin(&[left.0, right.0], c);
                let grad = self.combine(&[(w[0], &left), (w[1], &right)]);
                (value, grad)
            }
            Formula::Or(l, r) => {
                let c = self.cfg.constant_for(id, f);
                let left = self.eval(l, id + 1, t);
                let right = self.eval(r, id + 1 + l.node_count(), t);
                let (value, w) = softmax(&[left.0, right.0], c);
                let grad = self.combine(&[(w[0], &left), (w[1], &right)]);
                (value, grad)
            }
            Formula::Always { lo, hi, arg } => {
                let c = self.cfg.constant_for(id, f);
                let children: Vec<_> = (*lo..=*hi).map(|j| self.eval(arg, id + 1, t + j)).collect();
                let vals: Vec<f64> = children.iter().map(|c| c.0).collect();
                let (value, w) = softmin(&vals, c);
                let parts: Vec<_> = w.iter().cloned().zip(children.iter()).collect();
                let grad = self.combine(&parts.iter().map(|(w, c)| (*w, *c)).collect::<Vec<_>>());
                (value, grad)
            }
            Formula::Eventually { lo, hi, arg } => {
                let c = self.cfg.constant_for(id, f);
                let children: Vec<_> = (*lo..=*hi).map(|j| self.eval(arg, id + 1, t + j)).collect();
                let vals: Vec<f64> = children.iter().map(|c| c.0).collect();
                let (value, w) = softmax(&vals, c);
                let parts: Vec<_> = w.iter().cloned().zip(children.iter()).collect();
                let grad = self.combine(&parts.iter().map(|(w, c)| (*w, *c)).collect::<Vec<_>>());
                (value, grad)
            }
            Formula::Until { lo, hi, lhs, rhs } => {
                let c = self.cfg.constant_for(id, f);
                let rhs_id = id + 1 + lhs.node_count();
                // Flat soft minimum over { rhs at t+j, lhs on t..=t+j }, then a
                // soft maximum over the witness offsets.
                let mut inner: Vec<(f64, Vec<(f64, (f64, Option<SmoothGradient>))>)> = Vec::new();
                for j in *lo..=*hi {
                    let mut parts: Vec<(f64, Option<SmoothGradient>)> =
                        vec![self.eval(rhs, rhs_id, t + j)];
                    for i in 0..=j {
                        parts.push(self.eval(lhs, id + 1, t + i));
                    }
                    let vals: Vec<f64> = parts.iter().map(|p| p.0).collect();
                    let (m_j, w) = softmin(&vals, c);
                    inner.push((m_j, w.into_iter().zip(parts).collect()));
                }
                let m_vals: Vec<f64> = inner.iter().map(|(m, _)| *m).collect();
                let (value, outer_w) = softmax(&m_vals, c);
                let grad = if self.want_grad {
                    let mut acc = self.zero_grad();
                    for (ow, (_, parts)) in outer_w.iter().zip(&inner) {
                        for (iw, (_, grad)) in parts {
                            acc.axpy(ow * iw, grad.as_ref().expect("gradient requested"));
                        }
                    }
                    Some(acc)
                } else {
                    None
                };
                (value, grad)
            }
        }
    }
}

fn check(f: &Formula, trace: &Trace, k: usize) -> Result<(), StlError> {
    require_nnf(f)?;
    let needed = k + f.horizon() + 1;
    if trace.len() < needed {
        return Err(StlError::TraceTooShort {
            needed,
            actual: trace.len(),
        });
    }
    Ok(())
}

/// Smoothed robustness; a differentiable lower bound on [`super::robustness`].
pub fn smooth_robustness(
    f: &Formula,
    trace: &Trace,
    k: usize,
    cfg: &SmoothingConfig,
) -> Result<f64, StlError> {
    check(f, trace, k)?;
    let mut eval = Evaluator {
        trace,
        cfg,
        want_grad: false,
        memo: HashMap::new(),
    };
    Ok(eval.eval(f, 0, k).0)
}

/// Smoothed robustness together with its gradient in the trace states.
pub fn smooth_robustness_gradient(
    f: &Formula,
    trace: &Trace,
    k: usize,
    cfg: &SmoothingConfig,
) -> Result<(f64, SmoothGradient), StlError> {
    check(f, trace, k)?;
    let mut eval = Evaluator {
        trace,
        cfg,
        want_grad: true,
        memo: HashMap::new(),
    };
    let (value, grad) = eval.eval(f, 0, k);
    Ok((value, grad.expect("gradient requested")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{robustness, to_nnf, Predicate};
    use crate::testing::{random_formula_no_true, random_trace, TestRng};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn x1_pred() -> Formula {
        Formula::pred(Predicate::affine(DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap())
    }

    fn constant_trace(value: f64, len: usize) -> Trace {
        Trace::new((0..len).map(|_| DVector::from_vec(vec![value, 0.0])).collect()).unwrap()
    }

    #[test]
    fn softmin_of_equal_values_has_log_gap() {
        let m = 6usize;
        let c = 10.0;
        let f = Formula::always(0, m - 1, x1_pred()).unwrap();
        let trace = constant_trace(2.5, m);
        let cfg = SmoothingConfig::uniform(c).unwrap();
        let got = smooth_robustness(&f, &trace, 0, &cfg).unwrap();
        assert_relative_eq!(got, 2.5 - (m as f64).ln() / c, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_windows_are_exact() {
        let cfg = SmoothingConfig::uniform(10.0).unwrap();
        let trace = constant_trace(1.25, 4);
        let g = Formula::always(2, 2, x1_pred()).unwrap();
        assert_eq!(smooth_robustness(&g, &trace, 0, &cfg).unwrap(), 1.25);
        let f = Formula::eventually(3, 3, x1_pred()).unwrap();
        assert_eq!(smooth_robustness(&f, &trace, 0, &cfg).unwrap(), 1.25);
    }

    fn case_study_formula() -> (Formula, SmoothingConfig) {
        let reach = Predicate::quadratic_cap(
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 0.04])),
            1.0,
        )
        .unwrap();
        let safe = Predicate::affine(DVector::from_vec(vec![0.0, -1.0]), 0.75).unwrap();
        let f = Formula::and(
            Formula::eventually(0, 15, Formula::pred(reach)).unwrap(),
            Formula::always(0, 15, Formula::pred(safe)).unwrap(),
        );
        // Sites: 0 = outer min (and), 1 = max (eventually), 3 = inner min (always).
        let cfg = SmoothingConfig::uniform(10.0)
            .unwrap()
            .with_site(0, 10.0)
            .unwrap()
            .with_site(1, 10.0)
            .unwrap()
            .with_site(3, 100.0)
            .unwrap();
        (f, cfg)
    }

    #[test]
    fn case_study_smoothing_close_under_exact() {
        let (f, cfg) = case_study_formula();
        let mut rng = TestRng::new(17);
        for _ in 0..1000 {
            let trace = random_trace(&mut rng, 16, 2, 3.0);
            let exact = robustness(&f, &trace, 0).unwrap();
            let smooth = smooth_robustness(&f, &trace, 0, &cfg).unwrap();
            assert!(smooth <= exact + 1e-12, "smooth {smooth} > exact {exact}");
            assert!(exact - smooth <= 0.5, "gap too large: {}", exact - smooth);
        }
    }

    #[test]
    fn rejects_non_nnf_input() {
        let f = Formula::not(Formula::and(x1_pred(), x1_pred()));
        let cfg = SmoothingConfig::default();
        let trace = constant_trace(0.0, 2);
        assert!(matches!(
            smooth_robustness(&f, &trace, 0, &cfg),
            Err(StlError::NotInNnf)
        ));
    }

    #[test]
    fn soundness_on_random_nnf_instances() {
        let mut rng = TestRng::new(4242);
        let cfg = SmoothingConfig::uniform(20.0).unwrap();
        for _ in 0..10_000 {
            let f = to_nnf(&random_formula_no_true(&mut rng, 3, 2));
            let trace = random_trace(&mut rng, f.horizon() + 1, 2, 3.0);
            let exact = robustness(&f, &trace, 0).unwrap();
            let smooth = smooth_robustness(&f, &trace, 0, &cfg).unwrap();
            assert!(
                smooth <= exact + 1e-9,
                "smooth {smooth} > exact {exact} for {f}"
            );
        }
    }

    #[test]
    fn gap_shrinks_with_c_and_obeys_min_site_bound() {
        // Pure min-site formula so the log-sum bound applies exactly.
        let f = Formula::and(
            Formula::always(0, 5, x1_pred()).unwrap(),
            Formula::always(2, 8, x1_pred()).unwrap(),
        );
        let mut rng = TestRng::new(9);
        let trace = random_trace(&mut rng, 9, 2, 2.0);
        let exact = robustness(&f, &trace, 0).unwrap();
        let mut prev_gap = f64::INFINITY;
        for &c in &[1.0, 10.0, 100.0, 1000.0] {
            let cfg = SmoothingConfig::uniform(c).unwrap();
            let smooth = smooth_robustness(&f, &trace, 0, &cfg).unwrap();
            let gap = exact - smooth;
            assert!(gap >= -1e-12);
            assert!(gap <= prev_gap + 1e-12, "gap grew from {prev_gap} to {gap}");
            // total window size 15, largest window 7
            assert!(gap <= 15.0 * 7f64.ln() / c);
            prev_gap = gap;
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (f, cfg) = case_study_formula();
        let mut rng = TestRng::new(33);
        for _ in 0..25 {
            let trace = random_trace(&mut rng, 16, 2, 2.0);
            let (_, grad) = smooth_robustness_gradient(&f, &trace, 0, &cfg).unwrap();
            for t in [0usize, 7, 15] {
                for coord in 0..2 {
                    let h = 1e-6;
                    let bump = |delta: f64| {
                        let mut states = trace.states().to_vec();
                        states[t][coord] += delta;
                        smooth_robustness(&f, &Trace::new(states).unwrap(), 0, &cfg).unwrap()
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    assert_relative_eq!(grad.per_state[t][coord], fd, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn until_smoothing_is_sound_and_differentiable() {
        let p = x1_pred();
        let q = Formula::pred(Predicate::affine(DVector::from_vec(vec![0.0, 1.0]), 0.1).unwrap());
        let f = Formula::until(0, 3, p, q).unwrap();
        let cfg = SmoothingConfig::uniform(15.0).unwrap();
        let mut rng = TestRng::new(55);
        for _ in 0..500 {
            let trace = random_trace(&mut rng, 4, 2, 2.0);
            let exact = robustness(&f, &trace, 0).unwrap();
            let (smooth, grad) = smooth_robustness_gradient(&f, &trace, 0, &cfg).unwrap();
            assert!(smooth <= exact + 1e-12);
            assert!(grad.per_state.iter().all(|g| g.iter().all(|v| v.is_finite())));
        }
    }
}
