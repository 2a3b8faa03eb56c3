//! Signal temporal logic over discrete-time vector traces.
//!
//! Formulas follow the grammar `T | pred | !f | f & g | f | g | f U[a,b] g`
//! with `F[a,b]` and `G[a,b]` as derived operators kept as first-class nodes.
//! Three semantics are provided: Boolean satisfaction, exact quantitative
//! robustness, and a differentiable smoothed robustness that never exceeds
//! the exact value.

mod nnf;
mod parse;
mod semantics;
mod smooth;

pub use parse::{parse, PredicateRegistry};

use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Stand-in for the infinite robustness of the `true` formula, kept finite so
/// downstream arithmetic stays well-defined.
pub const TRUE_ROBUSTNESS_SENTINEL: f64 = 1e12;

#[derive(Debug, Error)]
pub enum StlError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown predicate name `{0}`")]
    UnknownPredicate(String),
    #[error("invalid interval [{lo},{hi}]: upper bound below lower bound")]
    InvalidInterval { lo: usize, hi: usize },
    #[error("trace too short: evaluation needs {needed} states, trace has {actual}")]
    TraceTooShort { needed: usize, actual: usize },
    #[error("smoothed robustness requires negation normal form")]
    NotInNnf,
    #[error("smoothing constants must be positive, got {0}")]
    NonPositiveSmoothing(f64),
    #[error("predicate weight matrix must be symmetric positive semidefinite")]
    NotPsd,
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("trace must contain at least one state")]
    EmptyTrace,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Atomic predicate function whose sign decides satisfaction.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    /// `alpha(x) = c' x + d`
    Affine { c: DVector<f64>, d: f64 },
    /// `alpha(x) = level - (x - center)' Q (x - center)`
    QuadraticCap {
        center: DVector<f64>,
        weights: DMatrix<f64>,
        level: f64,
    },
    /// `alpha(x) = (x - center)' Q (x - center) - level`; arises as the
    /// negation of a cap when pushing negations to the leaves.
    QuadraticFloor {
        center: DVector<f64>,
        weights: DMatrix<f64>,
        level: f64,
    },
}

const PSD_TOL: f64 = 1e-9;

fn check_quadratic(center: &DVector<f64>, weights: &DMatrix<f64>) -> Result<(), StlError> {
    let n = center.len();
    if weights.nrows() != n || weights.ncols() != n {
        return Err(StlError::DimensionMismatch {
            expected: n,
            got: weights.nrows().max(weights.ncols()),
        });
    }
    if !weights.iter().all(|v| v.is_finite()) || !center.iter().all(|v| v.is_finite()) {
        return Err(StlError::NonFinite("predicate weights"));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (weights[(i, j)] - weights[(j, i)]).abs() > PSD_TOL {
                return Err(StlError::NotPsd);
            }
        }
    }
    let sym = nalgebra::SymmetricEigen::new(weights.clone());
    if sym.eigenvalues.iter().any(|&l| l < -PSD_TOL) {
        return Err(StlError::NotPsd);
    }
    Ok(())
}

impl Predicate {
    pub fn affine(c: DVector<f64>, d: f64) -> Result<Self, StlError> {
        if !c.iter().all(|v| v.is_finite()) || !d.is_finite() {
            return Err(StlError::NonFinite("affine predicate coefficients"));
        }
        Ok(Predicate::Affine { c, d })
    }

    pub fn quadratic_cap(
        center: DVector<f64>,
        weights: DMatrix<f64>,
        level: f64,
    ) -> Result<Self, StlError> {
        check_quadratic(&center, &weights)?;
        Ok(Predicate::QuadraticCap {
            center,
            weights,
            level,
        })
    }

    pub fn quadratic_floor(
        center: DVector<f64>,
        weights: DMatrix<f64>,
        level: f64,
    ) -> Result<Self, StlError> {
        check_quadratic(&center, &weights)?;
        Ok(Predicate::QuadraticFloor {
            center,
            weights,
            level,
        })
    }

    /// State dimension the predicate expects.
    pub fn dim(&self) -> usize {
        match self {
            Predicate::Affine { c, .. } => c.len(),
            Predicate::QuadraticCap { center, .. } | Predicate::QuadraticFloor { center, .. } => {
                center.len()
            }
        }
    }

    /// Evaluate `alpha(x)`.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Predicate::Affine { c, d } => c.dot(x) + d,
            Predicate::QuadraticCap {
                center,
                weights,
                level,
            } => {
                let delta = x - center;
                level - (weights * &delta).dot(&delta)
            }
            Predicate::QuadraticFloor {
                center,
                weights,
                level,
            } => {
                let delta = x - center;
                (weights * &delta).dot(&delta) - level
            }
        }
    }

    /// Gradient of `alpha` at `x`.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Predicate::Affine { c, .. } => c.clone(),
            Predicate::QuadraticCap {
                center, weights, ..
            } => (weights * (x - center)) * -2.0,
            Predicate::QuadraticFloor {
                center, weights, ..
            } => (weights * (x - center)) * 2.0,
        }
    }

    /// Predicate whose value is the exact negation `-alpha(x)`.
    pub fn negated(&self) -> Predicate {
        match self {
            Predicate::Affine { c, d } => Predicate::Affine { c: -c, d: -d },
            Predicate::QuadraticCap {
                center,
                weights,
                level,
            } => Predicate::QuadraticFloor {
                center: center.clone(),
                weights: weights.clone(),
                level: *level,
            },
            Predicate::QuadraticFloor {
                center,
                weights,
                level,
            } => Predicate::QuadraticCap {
                center: center.clone(),
                weights: weights.clone(),
                level: *level,
            },
        }
    }
}

/// STL formula syntax tree. Temporal bounds are discrete step offsets.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Pred {
        name: Option<String>,
        pred: Predicate,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Until {
        lo: usize,
        hi: usize,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
    Eventually {
        lo: usize,
        hi: usize,
        arg: Box<Formula>,
    },
    Always {
        lo: usize,
        hi: usize,
        arg: Box<Formula>,
    },
}

impl Formula {
    pub fn pred(pred: Predicate) -> Self {
        Formula::Pred { name: None, pred }
    }

    pub fn named_pred(name: impl Into<String>, pred: Predicate) -> Self {
        Formula::Pred {
            name: Some(name.into()),
            pred,
        }
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or(Box::new(lhs), Box::new(rhs))
    }

    pub fn until(lo: usize, hi: usize, lhs: Formula, rhs: Formula) -> Result<Self, StlError> {
        if hi < lo {
            return Err(StlError::InvalidInterval { lo, hi });
        }
        Ok(Formula::Until {
            lo,
            hi,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        })
    }

    pub fn eventually(lo: usize, hi: usize, arg: Formula) -> Result<Self, StlError> {
        if hi < lo {
            return Err(StlError::InvalidInterval { lo, hi });
        }
        Ok(Formula::Eventually {
            lo,
            hi,
            arg: Box::new(arg),
        })
    }

    pub fn always(lo: usize, hi: usize, arg: Formula) -> Result<Self, StlError> {
        if hi < lo {
            return Err(StlError::InvalidInterval { lo, hi });
        }
        Ok(Formula::Always {
            lo,
            hi,
            arg: Box::new(arg),
        })
    }

    /// Steps beyond the evaluation time needed to decide the formula.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Pred { .. } => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(l, r) | Formula::Or(l, r) => l.horizon().max(r.horizon()),
            Formula::Until { hi, lhs, rhs, .. } => hi + lhs.horizon().max(rhs.horizon()),
            Formula::Eventually { hi, arg, .. } | Formula::Always { hi, arg, .. } => {
                hi + arg.horizon()
            }
        }
    }

    /// Number of nodes in the syntax tree (used for pre-order site ids).
    pub fn node_count(&self) -> usize {
        1 + match self {
            Formula::True | Formula::Pred { .. } => 0,
            Formula::Not(f) => f.node_count(),
            Formula::And(l, r) | Formula::Or(l, r) => l.node_count() + r.node_count(),
            Formula::Until { lhs, rhs, .. } => lhs.node_count() + rhs.node_count(),
            Formula::Eventually { arg, .. } | Formula::Always { arg, .. } => arg.node_count(),
        }
    }

    /// Predicates at the leaves, in pre-order.
    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.collect_predicates(&mut out);
        out
    }

    fn collect_predicates<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            Formula::True => {}
            Formula::Pred { pred, .. } => out.push(pred),
            Formula::Not(f) => f.collect_predicates(out),
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.collect_predicates(out);
                r.collect_predicates(out);
            }
            Formula::Until { lhs, rhs, .. } => {
                lhs.collect_predicates(out);
                rhs.collect_predicates(out);
            }
            Formula::Eventually { arg, .. } | Formula::Always { arg, .. } => {
                arg.collect_predicates(out)
            }
        }
    }

    /// Operator sites eligible for smoothing constants: pre-order node id and
    /// a short description, for `And`/`Or`/temporal nodes.
    pub fn smoothing_sites(&self) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        self.collect_sites(0, &mut out);
        out
    }

    fn collect_sites(&self, id: usize, out: &mut Vec<(usize, String)>) -> usize {
        let label = match self {
            Formula::And(..) => Some("and"),
            Formula::Or(..) => Some("or"),
            Formula::Until { .. } => Some("until"),
            Formula::Eventually { .. } => Some("eventually"),
            Formula::Always { .. } => Some("always"),
            _ => None,
        };
        if let Some(label) = label {
            out.push((id, format!("{label}: {self}")));
        }
        let mut next = id + 1;
        match self {
            Formula::True | Formula::Pred { .. } => {}
            Formula::Not(f) | Formula::Eventually { arg: f, .. } | Formula::Always { arg: f, .. } => {
                next = f.collect_sites(next, out);
            }
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until { lhs: l, rhs: r, .. } => {
                next = l.collect_sites(next, out);
                next = r.collect_sites(next, out);
            }
        }
        next
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "T"),
            Formula::Pred { name: Some(n), .. } => write!(f, "{n}"),
            Formula::Pred {
                name: None,
                pred: Predicate::Affine { c, d },
            } => {
                write!(f, "(")?;
                let mut first = true;
                for (i, ci) in c.iter().enumerate() {
                    if *ci == 0.0 {
                        continue;
                    }
                    if first {
                        if *ci < 0.0 {
                            write!(f, "-")?;
                        }
                    } else if *ci < 0.0 {
                        write!(f, " - ")?;
                    } else {
                        write!(f, " + ")?;
                    }
                    write!(f, "{}*x{}", ci.abs(), i + 1)?;
                    first = false;
                }
                if first {
                    write!(f, "{d}")?;
                } else if *d < 0.0 {
                    write!(f, " - {}", d.abs())?;
                } else {
                    write!(f, " + {d}")?;
                }
                write!(f, " >= 0)")
            }
            Formula::Pred { name: None, .. } => write!(f, "<quadratic>"),
            Formula::Not(g) => write!(f, "!{g}"),
            Formula::And(l, r) => write!(f, "({l} & {r})"),
            Formula::Or(l, r) => write!(f, "({l} | {r})"),
            Formula::Until { lo, hi, lhs, rhs } => write!(f, "({lhs} U[{lo},{hi}] {rhs})"),
            Formula::Eventually { lo, hi, arg } => write!(f, "F[{lo},{hi}]{arg}"),
            Formula::Always { lo, hi, arg } => write!(f, "G[{lo},{hi}]{arg}"),
        }
    }
}

/// Finite run of state vectors `x_0 ... x_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    states: Vec<DVector<f64>>,
}

impl Trace {
    pub fn new(states: Vec<DVector<f64>>) -> Result<Self, StlError> {
        let first = states.first().ok_or(StlError::EmptyTrace)?;
        let dim = first.len();
        for s in &states {
            if s.len() != dim {
                return Err(StlError::DimensionMismatch {
                    expected: dim,
                    got: s.len(),
                });
            }
            if !s.iter().all(|v| v.is_finite()) {
                return Err(StlError::NonFinite("trace state"));
            }
        }
        Ok(Trace { states })
    }

    /// Number of states, i.e. `N + 1`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn state(&self, k: usize) -> &DVector<f64> {
        &self.states[k]
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }
}

/// Node-kind defaults and per-site overrides for the smoothing constants.
///
/// Sites are identified by the pre-order index of the operator node in the
/// formula being evaluated (see [`Formula::smoothing_sites`]). An `Until`
/// node uses one constant for both its max and min sites.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingConfig {
    pub and_c: f64,
    pub or_c: f64,
    pub until_c: f64,
    pub eventually_c: f64,
    pub always_c: f64,
    site_overrides: BTreeMap<usize, f64>,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig::uniform(100.0).unwrap()
    }
}

impl SmoothingConfig {
    pub fn uniform(c: f64) -> Result<Self, StlError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(StlError::NonPositiveSmoothing(c));
        }
        Ok(SmoothingConfig {
            and_c: c,
            or_c: c,
            until_c: c,
            eventually_c: c,
            always_c: c,
            site_overrides: BTreeMap::new(),
        })
    }

    /// Override the constant for one operator site.
    pub fn with_site(mut self, site: usize, c: f64) -> Result<Self, StlError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(StlError::NonPositiveSmoothing(c));
        }
        self.site_overrides.insert(site, c);
        Ok(self)
    }

    pub fn site_overrides(&self) -> &BTreeMap<usize, f64> {
        &self.site_overrides
    }

    pub(crate) fn constant_for(&self, site: usize, node: &Formula) -> f64 {
        if let Some(&c) = self.site_overrides.get(&site) {
            return c;
        }
        match node {
            Formula::And(..) => self.and_c,
            Formula::Or(..) => self.or_c,
            Formula::Until { .. } => self.until_c,
            Formula::Eventually { .. } => self.eventually_c,
            Formula::Always { .. } => self.always_c,
            _ => self.and_c,
        }
    }
}

pub use nnf::{is_nnf, to_nnf};
pub use semantics::{eval_boolean, robustness, robustness_with_sentinel};
pub use smooth::{smooth_robustness, smooth_robustness_gradient, SmoothGradient};
