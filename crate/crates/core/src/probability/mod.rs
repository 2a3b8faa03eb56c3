//! Disturbance distributions, concentration-of-measure bounds, empirical
//! distributions, the Wasserstein metric, and the finite-sample radius rule.

mod wasserstein;

pub use wasserstein::wasserstein_1;

use crate::linsys::DisturbanceSeq;
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbabilityError {
    #[error("covariance must be symmetric positive semidefinite")]
    InvalidCovariance,
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("beta must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("light-tail exponent must exceed 1, got {0}")]
    InvalidTailExponent(f64),
    #[error("light-tail constant must be at least 1, got {0}")]
    InvalidTailConstant(f64),
    #[error("concentration bound requires t >= 0, got {0}")]
    NegativeT(f64),
    #[error("empirical distribution needs at least one sample")]
    NoSamples,
    #[error("samples have inconsistent dimensions: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("discrete support too large: {got} points exceeds the {limit}-point solver cap")]
    SupportTooLarge { got: usize, limit: usize },
    #[error("uniform box bounds must satisfy lo <= hi componentwise")]
    InvalidBox,
    #[error("empirical model holds sequences of length {have}, scenario needs {need}")]
    EmpiricalLength { have: usize, need: usize },
    #[error("sample file: {0}")]
    SampleFile(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Deterministic counter-based stream: ChaCha12 keyed by `seed` with one
/// stream index per independent consumer, Gaussian draws via Box-Muller.
pub struct CounterRng {
    inner: ChaCha12Rng,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream.into());
        CounterRng {
            inner,
            spare_normal: None,
        }
    }

    /// Uniform in `(0, 1]` (never zero, safe under `ln`).
    pub fn unit(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.inner.next_u64() % n.max(1) as u64) as usize
    }

    /// Standard normal via Box-Muller on the counter stream.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.unit();
        let u2 = self.unit();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Per-step disturbance distribution family.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    Gaussian {
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    },
    UniformBox {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
    /// Finite pool of recorded stacked sequences, resampled uniformly.
    Empirical { sequences: Vec<DVector<f64>> },
}

/// Sampleable disturbance model with light-tail parameters and an attached
/// concentration function.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceModel {
    kind: NoiseKind,
    tail_a: f64,
    tail_c: f64,
}

impl DisturbanceModel {
    /// Gaussian per-step noise. Default light-tail parameters `a = 1.5`,
    /// `C = 2` (any `1 < a < 2` keeps Gaussian moments finite).
    pub fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, ProbabilityError> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(ProbabilityError::InvalidCovariance);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 {
                    return Err(ProbabilityError::InvalidCovariance);
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::new(cov.clone());
        if eig.eigenvalues.iter().any(|&l| l < -1e-9) || eig.eigenvalues.iter().any(|l| !l.is_finite())
        {
            return Err(ProbabilityError::InvalidCovariance);
        }
        Ok(DisturbanceModel {
            kind: NoiseKind::Gaussian { mean, cov },
            tail_a: 1.5,
            tail_c: 2.0,
        })
    }

    pub fn uniform_box(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self, ProbabilityError> {
        if lo.len() != hi.len() || lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(ProbabilityError::InvalidBox);
        }
        Ok(DisturbanceModel {
            kind: NoiseKind::UniformBox { lo, hi },
            tail_a: 1.5,
            tail_c: 2.0,
        })
    }

    /// Pool of recorded stacked disturbance sequences (e.g. from a CSV file).
    pub fn empirical(sequences: Vec<DVector<f64>>) -> Result<Self, ProbabilityError> {
        let first = sequences.first().ok_or(ProbabilityError::NoSamples)?;
        let dim = first.len();
        if sequences.iter().any(|s| s.len() != dim) {
            return Err(ProbabilityError::Dimension {
                expected: dim,
                got: sequences.iter().find(|s| s.len() != dim).unwrap().len(),
            });
        }
        Ok(DisturbanceModel {
            kind: NoiseKind::Empirical { sequences },
            tail_a: 1.5,
            tail_c: 2.0,
        })
    }

    pub fn with_tail(mut self, a: f64, c: f64) -> Result<Self, ProbabilityError> {
        if !(a > 1.0) {
            return Err(ProbabilityError::InvalidTailExponent(a));
        }
        if !(c >= 1.0) {
            return Err(ProbabilityError::InvalidTailConstant(c));
        }
        self.tail_a = a;
        self.tail_c = c;
        Ok(self)
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn tail_a(&self) -> f64 {
        self.tail_a
    }

    pub fn tail_c(&self) -> f64 {
        self.tail_c
    }

    /// Per-step dimension `n`.
    pub fn step_dim(&self, horizon: usize) -> usize {
        match &self.kind {
            NoiseKind::Gaussian { mean, .. } => mean.len(),
            NoiseKind::UniformBox { lo, .. } => lo.len(),
            NoiseKind::Empirical { sequences } => {
                if horizon == 0 {
                    0
                } else {
                    sequences[0].len() / horizon
                }
            }
        }
    }

    /// Concentration function for the stacked `horizon`-step disturbance.
    ///
    /// Gaussians reuse the dimension-free standard-Gaussian bound rescaled by
    /// `sqrt(lambda_max(cov))`; a dominating monotone bound stays valid.
    /// Bounded-support kinds use the step bound `h(t) = 1 for t < D, 0 else`,
    /// valid because a 1-Lipschitz function cannot deviate from its mean by
    /// more than the support diameter `D`.
    pub fn concentration(&self, horizon: usize) -> ConcentrationFn {
        match &self.kind {
            NoiseKind::Gaussian { cov, .. } => {
                let eig = nalgebra::SymmetricEigen::new(cov.clone());
                let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
                ConcentrationFn::ScaledGaussian {
                    scale: lambda_max.max(0.0).sqrt(),
                }
            }
            NoiseKind::UniformBox { lo, hi } => {
                let step_diam = (hi - lo).norm();
                ConcentrationFn::BoundedSupport {
                    diameter: (horizon.max(1) as f64).sqrt() * step_diam,
                }
            }
            NoiseKind::Empirical { sequences } => {
                let dim = sequences[0].len();
                let mut diam2 = 0.0f64;
                for i in 0..dim {
                    let lo = sequences.iter().map(|s| s[i]).fold(f64::INFINITY, f64::min);
                    let hi = sequences
                        .iter()
                        .map(|s| s[i])
                        .fold(f64::NEG_INFINITY, f64::max);
                    diam2 += (hi - lo) * (hi - lo);
                }
                ConcentrationFn::BoundedSupport {
                    diameter: diam2.sqrt(),
                }
            }
        }
    }

    /// Factor `L` with `cov = L L'` for Gaussian draws (eigen-based so that
    /// semidefinite covariances, including zero, are accepted).
    fn gaussian_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
        let eig = nalgebra::SymmetricEigen::new(cov.clone());
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
    }
}

/// Monotone decreasing `h` with range in `[0, 1]` for inequality (4).
#[derive(Debug, Clone, PartialEq)]
pub enum ConcentrationFn {
    /// `h(t) = min{2 exp(-2 (t/scale)^2 / pi^2), 1}`; `scale = 1` is the
    /// standard multivariate Gaussian bound.
    ScaledGaussian { scale: f64 },
    /// `h(t) = 1` below the support diameter, `0` at or above it.
    BoundedSupport { diameter: f64 },
}

impl ConcentrationFn {
    pub fn h(&self, t: f64) -> Result<f64, ProbabilityError> {
        if t < 0.0 {
            return Err(ProbabilityError::NegativeT(t));
        }
        Ok(match self {
            ConcentrationFn::ScaledGaussian { scale } => {
                if *scale == 0.0 {
                    if t > 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    let scaled = t / scale;
                    h_gaussian(scaled).unwrap()
                }
            }
            ConcentrationFn::BoundedSupport { diameter } => {
                if t < *diameter {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// Smallest `t >= 0` with `h(t) <= epsilon`, by bisection to 1e-10.
    /// Degenerate bounds (zero scale or diameter) have infimum 0.
    pub fn inverse(&self, epsilon: f64) -> Result<f64, ProbabilityError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(ProbabilityError::InvalidEpsilon(epsilon));
        }
        match self {
            ConcentrationFn::ScaledGaussian { scale } if *scale == 0.0 => return Ok(0.0),
            ConcentrationFn::BoundedSupport { diameter } if *diameter == 0.0 => return Ok(0.0),
            _ => {}
        }
        if self.h(0.0)? <= epsilon {
            return Ok(0.0);
        }
        let mut hi = 1.0f64;
        while self.h(hi)? > epsilon {
            hi *= 2.0;
            if hi > 1e30 {
                return Err(ProbabilityError::NonPositive("concentration bound tail"));
            }
        }
        let mut lo = 0.0f64;
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if self.h(mid)? <= epsilon {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Standard multivariate Gaussian concentration bound
/// `h(t) = min{2 e^{-2 t^2 / pi^2}, 1}`.
pub fn h_gaussian(t: f64) -> Result<f64, ProbabilityError> {
    if t < 0.0 {
        return Err(ProbabilityError::NegativeT(t));
    }
    Ok((2.0 * (-2.0 * t * t / (std::f64::consts::PI * std::f64::consts::PI)).exp()).min(1.0))
}

/// Smallest `t` with `h_model(t) <= epsilon` for the stacked disturbance.
pub fn h_inverse(
    model: &DisturbanceModel,
    horizon: usize,
    epsilon: f64,
) -> Result<f64, ProbabilityError> {
    model.concentration(horizon).inverse(epsilon)
}

/// Uniform mixture of Dirac measures at `M` stacked disturbance sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<DVector<f64>>,
}

impl EmpiricalDistribution {
    pub fn new(samples: Vec<DVector<f64>>) -> Result<Self, ProbabilityError> {
        let first = samples.first().ok_or(ProbabilityError::NoSamples)?;
        let dim = first.len();
        for s in &samples {
            if s.len() != dim {
                return Err(ProbabilityError::Dimension {
                    expected: dim,
                    got: s.len(),
                });
            }
        }
        Ok(EmpiricalDistribution { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn disturbance_seq(
        &self,
        index: usize,
        steps: usize,
        dim: usize,
    ) -> Result<DisturbanceSeq, ProbabilityError> {
        DisturbanceSeq::from_stacked(&self.samples[index], steps, dim).map_err(|_| {
            ProbabilityError::Dimension {
                expected: steps * dim,
                got: self.sample_dim(),
            }
        })
    }

    /// Componentwise hull `[lo, hi]` of the samples.
    pub fn hull(&self) -> (DVector<f64>, DVector<f64>) {
        let dim = self.sample_dim();
        let mut lo = DVector::from_element(dim, f64::INFINITY);
        let mut hi = DVector::from_element(dim, f64::NEG_INFINITY);
        for s in &self.samples {
            for i in 0..dim {
                lo[i] = lo[i].min(s[i]);
                hi[i] = hi[i].max(s[i]);
            }
        }
        (lo, hi)
    }
}

/// Wasserstein ball of radius `r` around an empirical center.
#[derive(Debug, Clone)]
pub struct AmbiguitySet {
    pub center: EmpiricalDistribution,
    pub radius: f64,
}

impl AmbiguitySet {
    pub fn new(center: EmpiricalDistribution, radius: f64) -> Result<Self, ProbabilityError> {
        if radius < 0.0 || !radius.is_finite() {
            return Err(ProbabilityError::NonPositive("ambiguity radius"));
        }
        Ok(AmbiguitySet { center, radius })
    }
}

/// Draw `count` i.i.d. stacked sequences of `horizon` per-step disturbances.
/// Deterministic per `(seed, sample index)`: sample `i` reads stream `i`.
pub fn sample(
    model: &DisturbanceModel,
    horizon: usize,
    count: usize,
    seed: u64,
) -> Result<EmpiricalDistribution, ProbabilityError> {
    if count == 0 {
        return Err(ProbabilityError::NoSamples);
    }
    let mut samples = Vec::with_capacity(count);
    let factor = match &model.kind {
        NoiseKind::Gaussian { cov, .. } => Some(DisturbanceModel::gaussian_factor(cov)),
        _ => None,
    };
    for i in 0..count {
        let mut rng = CounterRng::new(seed, i as u64);
        samples.push(draw_sequence(model, factor.as_ref(), horizon, &mut rng)?);
    }
    EmpiricalDistribution::new(samples)
}

fn draw_sequence(
    model: &DisturbanceModel,
    factor: Option<&DMatrix<f64>>,
    horizon: usize,
    rng: &mut CounterRng,
) -> Result<DVector<f64>, ProbabilityError> {
    match &model.kind {
        NoiseKind::Gaussian { mean, .. } => {
            let n = mean.len();
            let factor = factor.expect("factor precomputed for gaussian kind");
            let mut out = DVector::zeros(horizon * n);
            for k in 0..horizon {
                let z = DVector::from_fn(n, |_, _| rng.standard_normal());
                let step = mean + factor * z;
                out.rows_mut(k * n, n).copy_from(&step);
            }
            Ok(out)
        }
        NoiseKind::UniformBox { lo, hi } => {
            let n = lo.len();
            let mut out = DVector::zeros(horizon * n);
            for k in 0..horizon {
                for i in 0..n {
                    out[k * n + i] = rng.uniform(lo[i], hi[i]);
                }
            }
            Ok(out)
        }
        NoiseKind::Empirical { sequences } => {
            let need = horizon * model.step_dim(horizon);
            let have = sequences[0].len();
            if have != need {
                return Err(ProbabilityError::EmpiricalLength { have, need });
            }
            Ok(sequences[rng.below(sequences.len())].clone())
        }
    }
}

/// Empirical check of inequality (4) for a 1-Lipschitz statistic: coverage
/// frequencies `P{|f - mean f| <= t}` on a grid, next to `1 - h(t)`.
pub struct ConcentrationCurve {
    pub t_grid: Vec<f64>,
    pub coverage: Vec<f64>,
    pub h_values: Vec<f64>,
    pub trials: usize,
}

pub fn concentration_check<F>(
    model: &DisturbanceModel,
    statistic: F,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationCurve, ProbabilityError>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let draws = sample(model, horizon, trials, seed)?;
    let values: Vec<f64> = draws.samples().iter().map(|w| statistic(w)).collect();
    let mean = values.iter().sum::<f64>() / trials as f64;
    let deviations: Vec<f64> = values.iter().map(|v| (v - mean).abs()).collect();
    let max_dev = deviations.iter().cloned().fold(0.0, f64::max);
    let h = model.concentration(horizon);
    let points = 25usize;
    let mut t_grid = Vec::with_capacity(points);
    let mut coverage = Vec::with_capacity(points);
    let mut h_values = Vec::with_capacity(points);
    for j in 0..points {
        let t = max_dev * (j as f64 + 1.0) / points as f64;
        let inside = deviations.iter().filter(|&&d| d <= t).count();
        t_grid.push(t);
        coverage.push(inside as f64 / trials as f64);
        h_values.push(h.h(t)?);
    }
    Ok(ConcentrationCurve {
        t_grid,
        coverage,
        h_values,
        trials,
    })
}

/// Wasserstein radius from the finite-sample confidence rule: with `M`
/// samples and confidence `1 - beta`, the ball of this radius contains the
/// sampling distribution with probability at least `1 - beta`. The constants
/// `c1`, `c2` and the support exponent `s` are user configuration.
pub fn radius_from_confidence(
    beta: f64,
    samples: usize,
    model: &DisturbanceModel,
    seq_len: usize,
    c1: f64,
    c2: f64,
    s: f64,
) -> Result<f64, ProbabilityError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(ProbabilityError::InvalidBeta(beta));
    }
    if !(c1 > 0.0) || !(c2 > 0.0) {
        return Err(ProbabilityError::NonPositive("radius constants c1, c2"));
    }
    if !(s > 0.0) {
        return Err(ProbabilityError::NonPositive("support exponent s"));
    }
    if samples == 0 {
        return Err(ProbabilityError::NoSamples);
    }
    let log_term = (c1 / beta).ln().max(0.0);
    let m = samples as f64;
    let exponent = if m >= log_term / c2 {
        1.0 / (seq_len as f64 * s).max(2.0)
    } else {
        1.0 / model.tail_a
    };
    Ok((log_term / (c2 * m)).powf(exponent))
}

/// Write an empirical sample set as CSV: one row per sample, `N*n` columns,
/// header `w_<step>_<coord>` with steps 0-based and coordinates 1-based.
pub fn write_samples_csv(
    dist: &EmpiricalDistribution,
    steps: usize,
    dim: usize,
    path: &Path,
) -> Result<(), ProbabilityError> {
    if dist.sample_dim() != steps * dim {
        return Err(ProbabilityError::Dimension {
            expected: steps * dim,
            got: dist.sample_dim(),
        });
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (0..steps)
        .flat_map(|k| (1..=dim).map(move |j| format!("w_{k}_{j}")))
        .collect();
    writeln!(file, "{}", header.join(","))?;
    for s in dist.samples() {
        let row: Vec<String> = s.iter().map(|v| format!("{v}")).collect();
        writeln!(file, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read an empirical sample CSV written by [`write_samples_csv`]; returns the
/// distribution and the `(steps, dim)` shape declared by the header.
pub fn read_samples_csv(
    path: &Path,
) -> Result<(EmpiricalDistribution, usize, usize), ProbabilityError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header = lines
        .next()
        .ok_or_else(|| ProbabilityError::SampleFile("missing header".into()))??;
    let columns: Vec<&str> = header.trim().split(',').collect();
    let mut steps = 0usize;
    let mut dim = 0usize;
    for col in &columns {
        let parts: Vec<&str> = col.trim().split('_').collect();
        if parts.len() != 3 || parts[0] != "w" {
            return Err(ProbabilityError::SampleFile(format!(
                "malformed column name `{col}`, expected w_<step>_<coord>"
            )));
        }
        let k: usize = parts[1]
            .parse()
            .map_err(|_| ProbabilityError::SampleFile(format!("bad step index in `{col}`")))?;
        let j: usize = parts[2]
            .parse()
            .map_err(|_| ProbabilityError::SampleFile(format!("bad coordinate in `{col}`")))?;
        steps = steps.max(k + 1);
        dim = dim.max(j);
    }
    if steps * dim != columns.len() {
        return Err(ProbabilityError::SampleFile(format!(
            "header declares {steps} steps x {dim} coords but has {} columns",
            columns.len()
        )));
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values: Result<Vec<f64>, _> = line.trim().split(',').map(|v| v.trim().parse()).collect();
        let values = values.map_err(|_| {
            ProbabilityError::SampleFile(format!("non-numeric value on data row {}", lineno + 1))
        })?;
        if values.len() != columns.len() {
            return Err(ProbabilityError::SampleFile(format!(
                "row {} has {} values, expected {}",
                lineno + 1,
                values.len(),
                columns.len()
            )));
        }
        samples.push(DVector::from_vec(values));
    }
    Ok((EmpiricalDistribution::new(samples)?, steps, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn standard_gaussian(dim: usize) -> DisturbanceModel {
        DisturbanceModel::gaussian(DVector::zeros(dim), DMatrix::identity(dim, dim)).unwrap()
    }

    #[test]
    fn degenerate_gaussian_samples_are_zero() {
        let model = DisturbanceModel::gaussian(DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap();
        let dist = sample(&model, 4, 10, 3).unwrap();
        for s in dist.samples() {
            assert!(s.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let model = standard_gaussian(3);
        let a = sample(&model, 5, 20, 42).unwrap();
        let b = sample(&model, 5, 20, 42).unwrap();
        assert_eq!(a, b);
        let c = sample(&model, 5, 20, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_mean_within_standard_error() {
        let sigma = 0.5f64;
        let model = DisturbanceModel::gaussian(
            DVector::zeros(2),
            DMatrix::identity(2, 2) * sigma * sigma,
        )
        .unwrap();
        let m = 10_000usize;
        let dist = sample(&model, 1, m, 7).unwrap();
        for coord in 0..2 {
            let mean: f64 =
                dist.samples().iter().map(|s| s[coord]).sum::<f64>() / m as f64;
            assert!(
                mean.abs() <= 4.0 * sigma / (m as f64).sqrt(),
                "coordinate {coord} mean {mean}"
            );
        }
    }

    #[test]
    fn gaussian_h_closed_form_values() {
        assert_eq!(h_gaussian(0.0).unwrap(), 1.0);
        assert_relative_eq!(
            h_gaussian(PI).unwrap(),
            2.0 * (-2.0f64).exp(),
            max_relative = 1e-15
        );
        let mut prev = 1.0;
        for i in 1..200 {
            let t = i as f64 * 0.1;
            let h = h_gaussian(t).unwrap();
            assert!(h <= prev + 1e-15);
            prev = h;
        }
        assert!(h_gaussian(40.0).unwrap() < 1e-100);
        assert!(h_gaussian(-0.1).is_err());
    }

    #[test]
    fn h_inverse_examples() {
        let model = standard_gaussian(2);
        assert_eq!(h_inverse(&model, 4, 1.0).unwrap(), 0.0);
        let t = h_inverse(&model, 4, 2.0 * (-2.0f64).exp()).unwrap();
        assert_relative_eq!(t, PI, epsilon = 1e-9);
        let t = h_inverse(&model, 4, 0.1).unwrap();
        assert_relative_eq!(t, PI * (20f64.ln() / 2.0).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn h_inverse_round_trip_on_decreasing_branch() {
        let model = standard_gaussian(2);
        let h = model.concentration(4);
        for i in 1..100 {
            let eps = i as f64 / 100.0;
            let t = h.inverse(eps).unwrap();
            assert!(
                (h.h(t).unwrap() - eps).abs() <= 1e-8,
                "eps {eps}: h(h^-1) = {}",
                h.h(t).unwrap()
            );
        }
    }

    #[test]
    fn h_inverse_rejects_out_of_range() {
        let model = standard_gaussian(2);
        assert!(h_inverse(&model, 4, 0.0).is_err());
        assert!(h_inverse(&model, 4, 1.5).is_err());
    }

    #[test]
    fn scaled_gaussian_concentration_rescales_inverse() {
        let model = DisturbanceModel::gaussian(
            DVector::zeros(2),
            DMatrix::identity(2, 2) * 0.01,
        )
        .unwrap();
        let t = h_inverse(&model, 15, 0.1).unwrap();
        assert_relative_eq!(t, 0.1 * PI * (20f64.ln() / 2.0).sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn concentration_check_constant_statistic() {
        let model = standard_gaussian(2);
        let curve = concentration_check(&model, |_| 1.25, 3, 2000, 5).unwrap();
        for (t, cov) in curve.t_grid.iter().zip(&curve.coverage) {
            if *t > 0.0 {
                assert_eq!(*cov, 1.0);
            }
        }
    }

    #[test]
    fn concentration_holds_for_gaussian_statistics() {
        let model = standard_gaussian(4);
        let trials = 20_000usize;
        let slack = 3.0 / (trials as f64).sqrt();
        let first_coord = |w: &DVector<f64>| w[0];
        let scaled_norm = |w: &DVector<f64>| w.norm() / (w.len() as f64).sqrt();
        for stat in [
            Box::new(first_coord) as Box<dyn Fn(&DVector<f64>) -> f64>,
            Box::new(scaled_norm),
        ] {
            let curve = concentration_check(&model, stat, 2, trials, 11).unwrap();
            for ((t, cov), h) in curve
                .t_grid
                .iter()
                .zip(&curve.coverage)
                .zip(&curve.h_values)
            {
                assert!(
                    *cov >= 1.0 - h - slack,
                    "t = {t}: coverage {cov} below 1 - h = {}",
                    1.0 - h
                );
            }
        }
    }

    #[test]
    fn radius_rule_direct_substitution() {
        let model = standard_gaussian(1).with_tail(2.0, 2.0).unwrap();
        // c1 = e, c2 = 1, beta = 1/e, M = 8, N*s = 4 -> (2/8)^(1/4)
        let r = radius_from_confidence(
            (-1.0f64).exp(),
            8,
            &model,
            4,
            std::f64::consts::E,
            1.0,
            1.0,
        )
        .unwrap();
        assert_relative_eq!(r, 0.25f64.powf(0.25), max_relative = 1e-12);
    }

    #[test]
    fn radius_rule_small_sample_switches_to_tail_exponent() {
        let model = standard_gaussian(1).with_tail(4.0, 2.0).unwrap();
        // log(c1/beta) = 20, c2 = 1, M = 8 < threshold -> exponent 1/a = 1/4
        let c1 = 20f64.exp();
        let r = radius_from_confidence(1.0, 8, &model, 3, c1, 1.0, 1.0);
        assert!(r.is_err(), "beta = 1 must be rejected");
        let r = radius_from_confidence(0.99999, 8, &model, 3, c1, 1.0, 1.0).unwrap();
        let log_term = (c1 / 0.99999f64).ln();
        assert!(8.0 < log_term);
        assert_relative_eq!(r, (log_term / 8.0).powf(0.25), max_relative = 1e-9);
    }

    #[test]
    fn radius_rule_vanishes_as_beta_approaches_one() {
        let model = standard_gaussian(1);
        let r = radius_from_confidence(1.0 - 1e-12, 10, &model, 2, 1.0, 1.0, 1.0).unwrap();
        assert!(r >= 0.0 && r < 1e-5);
    }

    #[test]
    fn ambiguity_set_contains_its_center() {
        let dist = sample(&standard_gaussian(2), 2, 5, 1).unwrap();
        for r in [0.0, 1e-3, 1.0] {
            let ball = AmbiguitySet::new(dist.clone(), r).unwrap();
            let d = wasserstein_1(&ball.center, &dist).unwrap();
            assert!(d <= 1e-9, "W(center, center) = {d}");
        }
        assert!(AmbiguitySet::new(dist, -0.1).is_err());
    }

    #[test]
    fn sample_csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("stl_dro_csv_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("samples.csv");
        let model = standard_gaussian(2);
        let dist = sample(&model, 3, 7, 9).unwrap();
        write_samples_csv(&dist, 3, 2, &path).unwrap();
        let (read, steps, dim) = read_samples_csv(&path).unwrap();
        assert_eq!(steps, 3);
        assert_eq!(dim, 2);
        assert_eq!(read, dist);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empirical_model_resamples_its_pool() {
        let pool = vec![
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![3.0, 4.0]),
        ];
        let model = DisturbanceModel::empirical(pool.clone()).unwrap();
        let dist = sample(&model, 1, 50, 3).unwrap();
        for s in dist.samples() {
            assert!(pool.contains(s));
        }
        // Wrong horizon is rejected.
        assert!(matches!(
            sample(&model, 3, 5, 3),
            Err(ProbabilityError::EmpiricalLength { .. })
        ));
    }
}
