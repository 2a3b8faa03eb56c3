//! Output files: solution TOML, flat key-value summaries, trajectory CSVs.
//! Everything embeds the fully resolved scenario config and seeds so a run
//! can be reproduced from its outputs alone; no timestamps are written.

use anyhow::{anyhow, bail, Context};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::path::Path;
use stl_dro_core::linsys::InputSeq;
use stl_dro_core::lipschitz::LipschitzReport;
use stl_dro_core::programs::{ProgramSolution, Scenario};
use stl_dro_core::scenario::{ResolvedScenario, ScenarioFile, SeedsSection};
use stl_dro_core::stl::Trace;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub scenario_name: String,
    pub method: String,
    pub feasible: bool,
    pub converged: bool,
    pub j_hat: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub tightening: f64,
    pub robustness_residual: f64,
    pub radius: f64,
    pub sample_count: usize,
    pub sample_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_override: Option<usize>,
    pub solver_iterations: usize,
    pub nominal_exact_robustness: f64,
    pub seeds: SeedsSection,
    pub lipschitz: LipschitzReport,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    /// Input sequence, one row per step.
    pub u: Vec<Vec<f64>>,
    /// Fully resolved scenario this solution was produced from.
    pub config: ScenarioFile,
}

impl SolutionFile {
    pub fn from_solution(
        resolved: &ResolvedScenario,
        sol: &ProgramSolution,
        sample_seed: u64,
        samples_override: Option<usize>,
        nominal_exact_robustness: f64,
    ) -> Self {
        SolutionFile {
            scenario_name: resolved.name.clone(),
            method: sol.method.name().to_string(),
            feasible: sol.feasible,
            converged: sol.converged,
            j_hat: sol.j_hat,
            lambda1: sol.lambda1,
            lambda2: sol.lambda2,
            tightening: sol.tightening,
            robustness_residual: sol.robustness_residual,
            radius: sol.radius,
            sample_count: sol.sample_count,
            sample_seed,
            samples_override,
            solver_iterations: sol.solver_iterations,
            nominal_exact_robustness,
            seeds: resolved.seeds.clone(),
            lipschitz: sol.lipschitz.clone(),
            y1: sol.y1.clone(),
            y2: sol.y2.clone(),
            u: sol
                .u_hat
                .steps()
                .iter()
                .map(|step| step.iter().cloned().collect())
                .collect(),
            config: resolved.resolved_file.clone(),
        }
    }

    /// Rebuild an in-memory solution against a scenario (for evaluation).
    pub fn to_solution(&self, scn: &Scenario) -> anyhow::Result<ProgramSolution> {
        let method = crate::commands::method_from_name(&self.method)
            .ok_or_else(|| anyhow!("unknown method `{}` in solution file", self.method))?;
        let steps: Vec<DVector<f64>> =
            self.u.iter().map(|row| DVector::from_vec(row.clone())).collect();
        let u_hat = InputSeq::new(steps, scn.input_lo.clone(), scn.input_hi.clone())
            .map_err(|e| anyhow!("solution input incompatible with scenario: {e}"))?;
        Ok(ProgramSolution {
            method,
            u_hat,
            j_hat: self.j_hat,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            y1: self.y1.clone(),
            y2: self.y2.clone(),
            feasible: self.feasible,
            tightening: self.tightening,
            robustness_residual: self.robustness_residual,
            radius: self.radius,
            converged: self.converged,
            solver_iterations: self.solver_iterations,
            lipschitz: self.lipschitz.clone(),
            sample_count: self.sample_count,
        })
    }

    pub fn config_toml_value(&self) -> toml::Value {
        toml::Value::try_from(&self.config).expect("scenario file serializes")
    }
}

pub fn write_solution(path: &Path, file: &SolutionFile) -> anyhow::Result<()> {
    let text = toml::to_string_pretty(file).context("serializing solution")?;
    write_text(path, &text)
}

pub fn read_solution(path: &Path) -> anyhow::Result<SolutionFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read solution {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("cannot parse solution {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Trajectory CSV: header `k,x1,...,xn,u1,...,um`, inputs blank on the final
/// row.
pub fn write_trajectory_csv(
    path: &Path,
    trace: &Trace,
    inputs: Option<&InputSeq>,
) -> anyhow::Result<()> {
    let n = trace.dim();
    let m = inputs.map(|u| u.steps().first().map_or(0, |s| s.len())).unwrap_or(0);
    let mut text = String::from("k");
    for i in 1..=n {
        text.push_str(&format!(",x{i}"));
    }
    for j in 1..=m {
        text.push_str(&format!(",u{j}"));
    }
    text.push('\n');
    for k in 0..trace.len() {
        text.push_str(&k.to_string());
        for i in 0..n {
            text.push_str(&format!(",{}", trace.state(k)[i]));
        }
        if m > 0 {
            if let Some(u) = inputs {
                if k < u.len() {
                    for j in 0..m {
                        text.push_str(&format!(",{}", u.steps()[k][j]));
                    }
                } else {
                    for _ in 0..m {
                        text.push(',');
                    }
                }
            }
        }
        text.push('\n');
    }
    write_text(path, &text)
}

/// Parsed trajectory: the state rows only (inputs ignored).
pub fn read_trajectory_csv(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read trajectory {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty trajectory file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.first() != Some(&"k") {
        bail!("malformed trajectory header: expected leading `k`, got `{header}`");
    }
    let state_cols: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with('x'))
        .map(|(i, _)| i)
        .collect();
    if state_cols.is_empty() {
        bail!("trajectory header has no state columns: `{header}`");
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let mut state = Vec::with_capacity(state_cols.len());
        for &col in &state_cols {
            let raw = fields
                .get(col)
                .ok_or_else(|| anyhow!("row {} is missing column {col}", lineno + 2))?;
            state.push(
                raw.parse::<f64>()
                    .map_err(|_| anyhow!("row {}: `{raw}` is not a number", lineno + 2))?,
            );
        }
        rows.push(state);
    }
    Ok(rows)
}

/// Flatten a TOML value into `prefix.path = value` pairs (diff-friendly).
pub fn flatten_toml(prefix: &str, value: &toml::Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    match value {
        toml::Value::Table(table) => {
            for (key, inner) in table {
                out.extend(flatten_toml(&format!("{prefix}.{key}"), inner));
            }
        }
        toml::Value::Array(items) if items.iter().all(|v| !v.is_table()) => {
            let rendered: Vec<String> = items.iter().map(render_scalar).collect();
            out.push((prefix.to_string(), format!("[{}]", rendered.join(", "))));
        }
        toml::Value::Array(items) => {
            for (i, inner) in items.iter().enumerate() {
                out.extend(flatten_toml(&format!("{prefix}[{i}]"), inner));
            }
        }
        scalar => out.push((prefix.to_string(), render_scalar(scalar))),
    }
    out
}

fn render_scalar(value: &toml::Value) -> String {
    match value {
        toml::Value::String(s) => format!("{s:?}"),
        toml::Value::Array(items) => {
            let rendered: Vec<String> = items.iter().map(render_scalar).collect();
            format!("[{}]", rendered.join(", "))
        }
        other => other.to_string(),
    }
}
