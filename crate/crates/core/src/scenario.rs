//! Scenario files: a TOML document declaring the system, formula, cost,
//! disturbance model, chance parameters, radius rule, smoothing constants,
//! region, input box, solver knobs, and seeds. Includes the built-in
//! `casestudy-sec4` scenario and the default-resolution rules (Monte-Carlo
//! region hull, sample-hull disturbance box).

use crate::linsys::{rollout, DisturbanceSeq, InputSeq, LinearSystem};
use crate::lipschitz::Region;
use crate::probability::{
    read_samples_csv, sample, CounterRng, DisturbanceModel, EmpiricalDistribution,
};
use crate::programs::{CostSpec, ProgramsError, Scenario};
use crate::solver::{BoxDomain, SolverConfig};
use crate::stl::{parse, Predicate, PredicateRegistry, SmoothingConfig};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Name accepted by loaders in place of a path.
pub const CASE_STUDY_NAME: &str = "casestudy-sec4";

/// Noise level of the built-in case study. The source system uses a Gaussian
/// with withheld parameters; this value keeps the concentration tightening
/// `L_phi h^{-1}(epsilon)` well inside the achievable robustness range.
pub const CASE_STUDY_SIGMA: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario `{path}`: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("scenario field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Programs(#[from] ProgramsError),
}

fn field_err(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub horizon: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PredicateSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FormulaSection {
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub predicates: BTreeMap<String, PredicateSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CostSection {
    pub state_weight: f64,
    pub input_weight: f64,
    pub terminal_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_weight_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_weight_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_weight_matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChanceSection {
    pub epsilon: f64,
    #[serde(default)]
    pub r0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DisturbanceSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_c: Option<f64>,
}

/// Either a direct radius or the finite-sample confidence rule.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RadiusSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SmoothingSection {
    pub default: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sites: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoxSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeedsSection {
    #[serde(default = "default_samples_seed")]
    pub samples: u64,
    #[serde(default = "default_solver_seed")]
    pub solver: u64,
    #[serde(default = "default_evaluate_seed")]
    pub evaluate: u64,
    #[serde(default = "default_region_seed")]
    pub region: u64,
}

fn default_samples_seed() -> u64 {
    1
}
fn default_solver_seed() -> u64 {
    2
}
fn default_evaluate_seed() -> u64 {
    3
}
fn default_region_seed() -> u64 {
    4
}

impl Default for SeedsSection {
    fn default() -> Self {
        SeedsSection {
            samples: default_samples_seed(),
            solver: default_solver_seed(),
            evaluate: default_evaluate_seed(),
            region: default_region_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SamplesSection {
    /// Sample count for the distributionally robust program.
    #[serde(default = "default_drp_samples")]
    pub drp: usize,
    /// Sample count for the sample-average program (10x by default).
    #[serde(default = "default_ecp_samples")]
    pub ecp: usize,
}

fn default_drp_samples() -> usize {
    20
}
fn default_ecp_samples() -> usize {
    200
}

impl Default for SamplesSection {
    fn default() -> Self {
        SamplesSection {
            drp: default_drp_samples(),
            ecp: default_ecp_samples(),
        }
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioFile {
    pub name: String,
    pub system: SystemSection,
    pub formula: FormulaSection,
    pub cost: CostSection,
    pub chance: ChanceSection,
    pub disturbance: DisturbanceSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<RadiusSection>,
    pub smoothing: SmoothingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<BoxSection>,
    pub input: BoxSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance_box: Option<BoxSection>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub seeds: SeedsSection,
    #[serde(default)]
    pub samples: SamplesSection,
}

/// Radius choice after resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusSpec {
    Direct(f64),
    Confidence { beta: f64, c1: f64, c2: f64, s: f64 },
}

/// Fully resolved scenario ready for the synthesis programs.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub name: String,
    pub scenario: Scenario,
    pub radius: Option<RadiusSpec>,
    pub solver: SolverConfig,
    pub seeds: SeedsSection,
    pub samples: SamplesSection,
    /// Explicit per-step truncation box for the disturbance sup subproblems,
    /// when declared; otherwise it is derived from the sample hull.
    pub disturbance_box: Option<(DVector<f64>, DVector<f64>)>,
    /// The file with all defaults filled in (what outputs embed).
    pub resolved_file: ScenarioFile,
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ScenarioError> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(field_err(field, "matrix must be nonempty"));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(field_err(field, "matrix rows have inconsistent lengths"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl ScenarioFile {
    /// Load from a path, or the built-in scenario when given its name.
    pub fn load(path: &str) -> Result<Self, ScenarioError> {
        if path == CASE_STUDY_NAME {
            return Ok(case_study_file());
        }
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read {
            path: path.to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ScenarioError::Parse { message, .. } => ScenarioError::Parse {
                path: path.to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse {
            path: "<inline>".into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario file serializes")
    }

    fn predicate_registry(&self, state_dim: usize) -> Result<PredicateRegistry, ScenarioError> {
        let mut registry = PredicateRegistry::new();
        for (name, section) in &self.formula.predicates {
            let field = format!("formula.predicates.{name}");
            let pred = match section.kind.as_str() {
                "affine" => {
                    let c = section
                        .c
                        .as_ref()
                        .ok_or_else(|| field_err(&field, "affine predicate needs `c`"))?;
                    if c.len() != state_dim {
                        return Err(field_err(&field, "coefficient length must match state"));
                    }
                    Predicate::affine(DVector::from_vec(c.clone()), section.d.unwrap_or(0.0))
                        .map_err(|e| field_err(&field, e.to_string()))?
                }
                "quadratic-cap" | "quadratic-floor" => {
                    let center = section
                        .center
                        .as_ref()
                        .ok_or_else(|| field_err(&field, "quadratic predicate needs `center`"))?;
                    let weights = section
                        .weights
                        .as_ref()
                        .ok_or_else(|| field_err(&field, "quadratic predicate needs `weights`"))?;
                    let level = section
                        .level
                        .ok_or_else(|| field_err(&field, "quadratic predicate needs `level`"))?;
                    let weights = matrix(&field, weights)?;
                    let center = DVector::from_vec(center.clone());
                    if section.kind == "quadratic-cap" {
                        Predicate::quadratic_cap(center, weights, level)
                            .map_err(|e| field_err(&field, e.to_string()))?
                    } else {
                        Predicate::quadratic_floor(center, weights, level)
                            .map_err(|e| field_err(&field, e.to_string()))?
                    }
                }
                other => {
                    return Err(field_err(
                        &field,
                        format!("unknown predicate kind `{other}`"),
                    ));
                }
            };
            registry.register(name.clone(), pred);
        }
        Ok(registry)
    }

    fn cost_spec(&self, n: usize, m: usize) -> Result<CostSpec, ScenarioError> {
        let q = match &self.cost.state_weight_matrix {
            Some(rows) => matrix("cost.state_weight_matrix", rows)?,
            None => DMatrix::identity(n, n) * self.cost.state_weight,
        };
        let r = match &self.cost.input_weight_matrix {
            Some(rows) => matrix("cost.input_weight_matrix", rows)?,
            None => DMatrix::identity(m, m) * self.cost.input_weight,
        };
        let qf = match &self.cost.terminal_weight_matrix {
            Some(rows) => matrix("cost.terminal_weight_matrix", rows)?,
            None => DMatrix::identity(n, n) * self.cost.terminal_weight,
        };
        CostSpec::new(q, r, qf).map_err(ScenarioError::from)
    }

    fn disturbance_model(
        &self,
        n: usize,
        base_dir: Option<&Path>,
    ) -> Result<DisturbanceModel, ScenarioError> {
        let field = "disturbance";
        let model = match self.disturbance.kind.as_str() {
            "gaussian" => {
                let mean = self
                    .disturbance
                    .mean
                    .as_ref()
                    .ok_or_else(|| field_err(field, "gaussian needs `mean`"))?;
                let cov = self
                    .disturbance
                    .covariance
                    .as_ref()
                    .ok_or_else(|| field_err(field, "gaussian needs `covariance`"))?;
                if mean.len() != n {
                    return Err(field_err(field, "mean length must match the state"));
                }
                DisturbanceModel::gaussian(
                    DVector::from_vec(mean.clone()),
                    matrix("disturbance.covariance", cov)?,
                )
                .map_err(|e| field_err(field, e.to_string()))?
            }
            "uniform-box" => {
                let lo = self
                    .disturbance
                    .lo
                    .as_ref()
                    .ok_or_else(|| field_err(field, "uniform-box needs `lo`"))?;
                let hi = self
                    .disturbance
                    .hi
                    .as_ref()
                    .ok_or_else(|| field_err(field, "uniform-box needs `hi`"))?;
                DisturbanceModel::uniform_box(
                    DVector::from_vec(lo.clone()),
                    DVector::from_vec(hi.clone()),
                )
                .map_err(|e| field_err(field, e.to_string()))?
            }
            "empirical" => {
                let file = self
                    .disturbance
                    .file
                    .as_ref()
                    .ok_or_else(|| field_err(field, "empirical needs `file`"))?;
                let path = match base_dir {
                    Some(dir) => dir.join(file),
                    None => PathBuf::from(file),
                };
                let (dist, _, _) = read_samples_csv(&path)
                    .map_err(|e| field_err(field, format!("{}: {e}", path.display())))?;
                DisturbanceModel::empirical(dist.samples().to_vec())
                    .map_err(|e| field_err(field, e.to_string()))?
            }
            other => return Err(field_err(field, format!("unknown kind `{other}`"))),
        };
        match (self.disturbance.tail_a, self.disturbance.tail_c) {
            (None, None) => Ok(model),
            (a, c) => model
                .with_tail(a.unwrap_or(1.5), c.unwrap_or(2.0))
                .map_err(|e| field_err(field, e.to_string())),
        }
    }

    fn smoothing_config(&self) -> Result<SmoothingConfig, ScenarioError> {
        let mut cfg = SmoothingConfig::uniform(self.smoothing.default)
            .map_err(|e| field_err("smoothing.default", e.to_string()))?;
        for (site, c) in &self.smoothing.sites {
            let idx: usize = site.parse().map_err(|_| {
                field_err(
                    "smoothing.sites",
                    format!("site key `{site}` is not an index"),
                )
            })?;
            cfg = cfg
                .with_site(idx, *c)
                .map_err(|e| field_err("smoothing.sites", e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Resolve defaults into a runnable scenario. `base_dir` anchors relative
    /// sample-file paths.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<ResolvedScenario, ScenarioError> {
        let a = matrix("system.a", &self.system.a)?;
        let b = matrix("system.b", &self.system.b)?;
        let sys = LinearSystem::new(a, b).map_err(|e| field_err("system", e.to_string()))?;
        let n = sys.state_dim();
        let m = sys.input_dim();
        if self.system.x0.len() != n {
            return Err(field_err(
                "system.x0",
                "length must match the state dimension",
            ));
        }
        if self.system.horizon == 0 {
            return Err(field_err("system.horizon", "must be at least 1"));
        }
        let registry = self.predicate_registry(n)?;
        let formula = parse(&self.formula.text, n, &registry)
            .map_err(|e| field_err("formula.text", e.to_string()))?;
        let cost = self.cost_spec(n, m)?;
        let model = self.disturbance_model(n, base_dir)?;
        let smoothing = self.smoothing_config()?;
        if self.input.lo.len() != m || self.input.hi.len() != m {
            return Err(field_err("input", "bounds must match the input dimension"));
        }
        let x0 = DVector::from_vec(self.system.x0.clone());

        let mut partial = Scenario {
            sys,
            x0,
            horizon: self.system.horizon,
            formula,
            r0: self.chance.r0,
            epsilon: self.chance.epsilon,
            cost,
            model,
            region: Region::new(vec![0.0; n], vec![0.0; n]).expect("placeholder"),
            smoothing,
            input_lo: DVector::from_vec(self.input.lo.clone()),
            input_hi: DVector::from_vec(self.input.hi.clone()),
        };

        let region = match &self.region {
            Some(section) => Region::new(section.lo.clone(), section.hi.clone())
                .map_err(|e| field_err("region", e.to_string()))?,
            None => default_region(&partial, self.seeds.region)
                .map_err(|e| field_err("region", e.to_string()))?,
        };
        partial.region = region.clone();
        partial.validate()?;

        let radius = match &self.radius {
            None => None,
            Some(section) => Some(resolve_radius(section)?),
        };

        let disturbance_box = match &self.disturbance_box {
            Some(section) => {
                if section.lo.len() != n || section.hi.len() != n {
                    return Err(field_err(
                        "disturbance_box",
                        "bounds must match the state dimension",
                    ));
                }
                Some((
                    DVector::from_vec(section.lo.clone()),
                    DVector::from_vec(section.hi.clone()),
                ))
            }
            None => None,
        };

        let solver = self.solver.clone().unwrap_or_default();
        solver
            .validate()
            .map_err(|e| field_err("solver", e.to_string()))?;

        let mut resolved_file = self.clone();
        resolved_file.region = Some(BoxSection {
            lo: region.lo().to_vec(),
            hi: region.hi().to_vec(),
        });
        resolved_file.solver = Some(solver.clone());

        Ok(ResolvedScenario {
            name: self.name.clone(),
            scenario: partial,
            radius,
            solver,
            seeds: self.seeds.clone(),
            samples: self.samples.clone(),
            disturbance_box,
            resolved_file,
        })
    }
}

fn resolve_radius(section: &RadiusSection) -> Result<RadiusSpec, ScenarioError> {
    match (section.value, section.beta) {
        (Some(value), None) => {
            if !(value >= 0.0) {
                return Err(field_err("radius.value", "must be nonnegative"));
            }
            Ok(RadiusSpec::Direct(value))
        }
        (None, Some(beta)) => {
            let c1 = section
                .c1
                .ok_or_else(|| field_err("radius", "confidence rule needs `c1`"))?;
            let c2 = section
                .c2
                .ok_or_else(|| field_err("radius", "confidence rule needs `c2`"))?;
            let s = section.s.ok_or_else(|| {
                field_err(
                    "radius",
                    "confidence rule needs `s` (the per-step support exponent)",
                )
            })?;
            Ok(RadiusSpec::Confidence { beta, c1, c2, s })
        }
        (Some(_), Some(_)) => Err(field_err(
            "radius",
            "give either a direct `value` or a confidence rule, not both",
        )),
        (None, None) => Err(field_err(
            "radius",
            "needs a direct `value` or `beta`/`c1`/`c2`/`s`",
        )),
    }
}

/// Default operating region: componentwise hull of Monte-Carlo trajectories
/// under zero and random admissible inputs, inflated by 20%.
pub fn default_region(
    scn: &Scenario,
    seed: u64,
) -> Result<Region, crate::lipschitz::LipschitzError> {
    let n = scn.sys.state_dim();
    let m = scn.sys.input_dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let draws = sample(&scn.model, scn.horizon, 16, seed).expect("region sampling");
    let mut rng = CounterRng::new(seed, u64::MAX);
    for (trial, w_stacked) in draws.samples().iter().enumerate() {
        let w = DisturbanceSeq::from_stacked(w_stacked, scn.horizon, n).expect("sample shape");
        let inputs: Vec<DVector<f64>> = (0..scn.horizon)
            .map(|_| {
                if trial == 0 {
                    DVector::zeros(m)
                } else {
                    DVector::from_fn(m, |i, _| rng.uniform(scn.input_lo[i], scn.input_hi[i]))
                }
            })
            .collect();
        let u = InputSeq::new(inputs, scn.input_lo.clone(), scn.input_hi.clone())
            .expect("inputs drawn inside the box");
        let trace = rollout(&scn.sys, &scn.x0, &u, &w).expect("rollout");
        for state in trace.states() {
            for i in 0..n {
                lo[i] = lo[i].min(state[i]);
                hi[i] = hi[i].max(state[i]);
            }
        }
    }
    Ok(Region::new(lo, hi)?.inflate(0.2))
}

/// Default truncation box for the disturbance sup subproblems: per-coordinate
/// sample hull widened to at least mean +- 6 sigma.
pub fn default_disturbance_box(
    model: &DisturbanceModel,
    samples: &EmpiricalDistribution,
    horizon: usize,
) -> BoxDomain {
    let dim = samples.sample_dim();
    let n = model.step_dim(horizon).max(1);
    let (hull_lo, hull_hi) = samples.hull();
    let mut lo = vec![0.0f64; dim];
    let mut hi = vec![0.0f64; dim];
    for j in 0..dim {
        let (center, sigma) = match model.kind() {
            crate::probability::NoiseKind::Gaussian { mean, cov } => {
                (mean[j % n], cov[(j % n, j % n)].max(0.0).sqrt())
            }
            _ => {
                let vals: Vec<f64> = samples.samples().iter().map(|s| s[j]).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var =
                    vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
                (mean, var.sqrt())
            }
        };
        lo[j] = hull_lo[j].min(center - 6.0 * sigma);
        hi[j] = hull_hi[j].max(center + 6.0 * sigma);
    }
    BoxDomain::new(lo, hi).expect("hull bounds are ordered")
}

/// Built-in scenario reproducing the double-integrator reach-avoid study:
/// `A = [[1,1],[0,1]]`, `B = [0.5, 1]'`, `x0 = [-8, 0]`, horizon 15,
/// formula `(F[0,15] reach) & (G[0,15] safe)` with the target ellipse
/// `x' diag(1/4, 1/25) x <= 1` and the safety bound `x2 <= 0.75`,
/// `u in [-1, 1]`, `epsilon = 0.1`, smoothing constants (10, 10, 100) on the
/// outer-min / max / inner-min sites, cost weights (10, 1, 10), and
/// Wasserstein radius `1e-3`.
pub fn case_study_file() -> ScenarioFile {
    case_study_file_with_sigma(CASE_STUDY_SIGMA)
}

pub fn case_study_file_with_sigma(sigma: f64) -> ScenarioFile {
    let mut predicates = BTreeMap::new();
    predicates.insert(
        "reach".to_string(),
        PredicateSection {
            kind: "quadratic-cap".into(),
            c: None,
            d: None,
            center: Some(vec![0.0, 0.0]),
            weights: Some(vec![vec![0.25, 0.0], vec![0.0, 0.04]]),
            level: Some(1.0),
        },
    );
    predicates.insert(
        "safe".to_string(),
        PredicateSection {
            kind: "affine".into(),
            c: Some(vec![0.0, -1.0]),
            d: Some(0.75),
            center: None,
            weights: None,
            level: None,
        },
    );
    let mut sites = BTreeMap::new();
    sites.insert("0".to_string(), 10.0); // outer min (conjunction)
    sites.insert("1".to_string(), 10.0); // max (eventually)
    sites.insert("3".to_string(), 100.0); // inner min (always)
    ScenarioFile {
        name: CASE_STUDY_NAME.to_string(),
        system: SystemSection {
            a: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            b: vec![vec![0.5], vec![1.0]],
            x0: vec![-8.0, 0.0],
            horizon: 15,
        },
        formula: FormulaSection {
            text: "(F[0,15] reach) & (G[0,15] safe)".into(),
            predicates,
        },
        cost: CostSection {
            state_weight: 10.0,
            input_weight: 1.0,
            terminal_weight: 10.0,
            state_weight_matrix: None,
            input_weight_matrix: None,
            terminal_weight_matrix: None,
        },
        chance: ChanceSection {
            epsilon: 0.1,
            r0: 0.0,
        },
        disturbance: DisturbanceSection {
            kind: "gaussian".into(),
            mean: Some(vec![0.0, 0.0]),
            covariance: Some(vec![vec![sigma * sigma, 0.0], vec![0.0, sigma * sigma]]),
            lo: None,
            hi: None,
            file: None,
            tail_a: Some(1.5),
            tail_c: Some(2.0),
        },
        radius: Some(RadiusSection {
            value: Some(1e-3),
            beta: None,
            c1: None,
            c2: None,
            s: None,
        }),
        smoothing: SmoothingSection {
            default: 10.0,
            sites,
        },
        region: Some(BoxSection {
            lo: vec![-10.0, -1.5],
            hi: vec![3.0, 1.5],
        }),
        input: BoxSection {
            lo: vec![-1.0],
            hi: vec![1.0],
        },
        disturbance_box: None,
        solver: Some(SolverConfig {
            max_outer_iters: 12,
            max_inner_iters: 200,
            gradient_tol: 1e-7,
            fd_step: 1e-6,
            multistarts: 6,
            penalty_growth: 10.0,
            seed: 2,
        }),
        seeds: SeedsSection::default(),
        samples: SamplesSection::default(),
    }
}

/// The resolved built-in scenario.
pub fn case_study() -> ResolvedScenario {
    case_study_file()
        .resolve(None)
        .expect("built-in scenario resolves")
}
