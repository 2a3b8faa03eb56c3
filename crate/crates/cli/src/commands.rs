//! Subcommand implementations.

use crate::output::{
    flatten_toml, read_solution, read_trajectory_csv, write_solution, write_text,
    write_trajectory_csv, SolutionFile,
};
use crate::{EvaluateArgs, PlotArgs, SolveArgs};
use anyhow::{anyhow, bail, Context};
use nalgebra::DVector;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use stl_dro_core::linsys::{rollout, DisturbanceSeq, InputSeq};
use stl_dro_core::probability::{radius_from_confidence, sample};
use stl_dro_core::programs::{
    empirical_ccp_rate, out_of_sample_report, solve_drp, solve_ecp, solve_nominal, Method,
    ProgramSolution, ProgramsError,
};
use stl_dro_core::scenario::{
    default_disturbance_box, RadiusSpec, ResolvedScenario, ScenarioFile,
};
use stl_dro_core::solver::BoxDomain;
use stl_dro_core::stl::robustness;

fn load(scenario: &str) -> anyhow::Result<ResolvedScenario> {
    let file = ScenarioFile::load(scenario)?;
    let base = Path::new(scenario).parent().map(Path::to_path_buf);
    Ok(file.resolve(base.as_deref())?)
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("STL_DRO_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("stl-dro-out"))
}

pub fn check(scenario: &str) -> anyhow::Result<i32> {
    let resolved = load(scenario)?;
    let scn = &resolved.scenario;
    let report = scn.lipschitz()?;
    let tightening = scn.tightening()?;
    println!("scenario: {}", resolved.name);
    println!("formula: {}", scn.formula);
    println!("formula tree: {:#?}", scn.formula);
    println!("horizon: {}", scn.horizon);
    println!("state dim: {}, input dim: {}", scn.sys.state_dim(), scn.sys.input_dim());
    println!("region: lo = {:?}, hi = {:?}", scn.region.lo(), scn.region.hi());
    println!("L1 (max predicate constant) = {:.9}", report.l1);
    println!("L2 (trajectory sensitivity) = {:.9}", report.l2);
    println!("L_phi = {:.9}", report.l_phi);
    for (i, l) in report.per_predicate.iter().enumerate() {
        println!("  predicate {i}: L = {l:.9}");
    }
    println!("epsilon = {}", scn.epsilon);
    println!("tightening L_phi * h^-1(epsilon) = {:.9}", tightening);
    match resolved.radius {
        Some(RadiusSpec::Direct(r)) => println!("radius: {r}"),
        Some(RadiusSpec::Confidence { beta, c1, c2, s }) => {
            println!("radius: confidence rule (beta = {beta}, c1 = {c1}, c2 = {c2}, s = {s})")
        }
        None => println!("radius: unset"),
    }
    Ok(0)
}

fn pick_radius(
    resolved: &ResolvedScenario,
    flag: Option<f64>,
    sample_count: usize,
) -> anyhow::Result<f64> {
    if let Some(r) = flag {
        if !(r >= 0.0) {
            bail!("--radius must be nonnegative");
        }
        return Ok(r);
    }
    match resolved.radius {
        Some(RadiusSpec::Direct(r)) => Ok(r),
        Some(RadiusSpec::Confidence { beta, c1, c2, s }) => Ok(radius_from_confidence(
            beta,
            sample_count,
            &resolved.scenario.model,
            resolved.scenario.horizon,
            c1,
            c2,
            s,
        )?),
        None => bail!("the drp method needs --radius or a scenario radius section"),
    }
}

pub fn solve(args: &SolveArgs) -> anyhow::Result<i32> {
    let resolved = load(&args.scenario)?;
    let scn = &resolved.scenario;
    let cfg = &resolved.solver;
    let dir = out_dir(&args.out);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;

    let sample_seed = args.seed.unwrap_or(resolved.seeds.samples);
    let n = scn.sys.state_dim();

    let outcome = match args.method.as_str() {
        "nominal" => solve_nominal(scn, cfg),
        "ecp" => {
            let count = args.samples.unwrap_or(resolved.samples.ecp);
            let samples = sample(&scn.model, scn.horizon, count, sample_seed)?;
            solve_ecp(scn, &samples, cfg)
        }
        "drp" => {
            let count = args.samples.unwrap_or(resolved.samples.drp);
            let samples = sample(&scn.model, scn.horizon, count, sample_seed)?;
            let radius = pick_radius(&resolved, args.radius, count)?;
            let w_box = match &resolved.disturbance_box {
                Some((lo, hi)) => BoxDomain::repeated(
                    lo.as_slice(),
                    hi.as_slice(),
                    scn.horizon,
                )?,
                None => default_disturbance_box(&scn.model, &samples, scn.horizon),
            };
            solve_drp(scn, &samples, radius, &w_box, cfg)
        }
        other => bail!("unknown method `{other}`"),
    };

    let solution = match outcome {
        Ok(sol) => sol,
        Err(ProgramsError::InfeasibleTightening { required, best }) => {
            eprintln!(
                "infeasible: tightened robustness level {required:.6} unreachable \
                 (best multistart achieved {best:.6})"
            );
            return Ok(2);
        }
        Err(other) => return Err(other.into()),
    };

    let code = if solution.feasible { 0 } else { 2 };

    // Nominal-disturbance trajectory of the synthesized input.
    let w0 = DisturbanceSeq::zeros(scn.horizon, n);
    let trace = rollout(&scn.sys, &scn.x0, &solution.u_hat, &w0)?;
    let nominal_rho = robustness(&scn.formula, &trace, 0)?;
    write_trajectory_csv(
        &dir.join(format!("trajectory_{}.csv", args.method)),
        &trace,
        Some(&solution.u_hat),
    )?;

    let file = SolutionFile::from_solution(
        &resolved,
        &solution,
        sample_seed,
        args.samples,
        nominal_rho,
    );
    let solution_path = dir.join(format!("solution_{}.toml", args.method));
    write_solution(&solution_path, &file)?;

    let summary = solve_summary(&resolved, &solution, &file, nominal_rho);
    write_text(&dir.join(format!("summary_{}.txt", args.method)), &summary)?;
    print!("{summary}");
    println!("solution: {}", solution_path.display());
    Ok(code)
}

fn solve_summary(
    resolved: &ResolvedScenario,
    sol: &ProgramSolution,
    file: &SolutionFile,
    nominal_rho: f64,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario = {}", resolved.name);
    let _ = writeln!(s, "method = {}", sol.method.name());
    let _ = writeln!(s, "feasible = {}", sol.feasible);
    let _ = writeln!(s, "converged = {}", sol.converged);
    let _ = writeln!(s, "j_hat = {}", sol.j_hat);
    let _ = writeln!(s, "lambda1 = {}", sol.lambda1);
    let _ = writeln!(s, "lambda2 = {}", sol.lambda2);
    let _ = writeln!(s, "tightening = {}", sol.tightening);
    let _ = writeln!(s, "robustness_residual = {}", sol.robustness_residual);
    let _ = writeln!(s, "radius = {}", sol.radius);
    let _ = writeln!(s, "sample_count = {}", sol.sample_count);
    let _ = writeln!(s, "solver_iterations = {}", sol.solver_iterations);
    let _ = writeln!(s, "lipschitz.l1 = {}", sol.lipschitz.l1);
    let _ = writeln!(s, "lipschitz.l2 = {}", sol.lipschitz.l2);
    let _ = writeln!(s, "lipschitz.l_phi = {}", sol.lipschitz.l_phi);
    let _ = writeln!(s, "nominal_exact_robustness = {nominal_rho}");
    let _ = writeln!(s, "sample_seed = {}", file.sample_seed);
    let _ = writeln!(s, "solver_seed = {}", resolved.seeds.solver);
    for (k, v) in flatten_toml("config", &file.config_toml_value()) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn evaluate(args: &EvaluateArgs) -> anyhow::Result<i32> {
    let resolved = load(&args.scenario)?;
    let scn = &resolved.scenario;
    let file = read_solution(&args.solution)?;
    let dir = out_dir(&args.out);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let seed = args.seed.unwrap_or(resolved.seeds.evaluate);

    let u_steps: Vec<DVector<f64>> = file.u.iter().map(|row| DVector::from_vec(row.clone())).collect();
    let u_hat = InputSeq::new(u_steps, scn.input_lo.clone(), scn.input_hi.clone())
        .map_err(|e| anyhow!("solution input violates the scenario input box: {e}"))?;
    let solution = file.to_solution(scn)?;

    let mut s = String::new();
    let _ = writeln!(s, "scenario = {}", resolved.name);
    let _ = writeln!(s, "solution_file = {}", args.solution.display());
    let _ = writeln!(s, "method = {}", file.method);
    let _ = writeln!(s, "j_hat = {}", file.j_hat);
    let _ = writeln!(s, "robustness_residual = {}", file.robustness_residual);
    let _ = writeln!(s, "trials = {}", args.trials);
    let _ = writeln!(s, "seed = {seed}");

    if args.trials > 0 {
        let report = out_of_sample_report(scn, &solution, args.trials, seed)?;
        let rate = empirical_ccp_rate(scn, &u_hat, args.trials, seed)?;
        let _ = writeln!(s, "satisfaction_rate = {}", rate.rate);
        let _ = writeln!(s, "satisfaction_std_err = {}", rate.std_err);
        let _ = writeln!(s, "cost_estimate = {}", report.cost_estimate);
        let _ = writeln!(s, "cost_std_err = {}", report.cost_std_err);
        let _ = writeln!(s, "bound_j_hat = {}", report.j_hat);
        let _ = writeln!(
            s,
            "out_of_sample_bound_holds = {}",
            report.bound_holds
        );
        if args.write_trajectories {
            let traj_dir = dir.join("trajectories");
            std::fs::create_dir_all(&traj_dir)?;
            let draws = sample(&scn.model, scn.horizon, args.trials, seed)?;
            let mut index = String::from("realization,file\n");
            for i in 0..args.trials {
                let w = draws.disturbance_seq(i, scn.horizon, scn.sys.state_dim())?;
                let trace = rollout(&scn.sys, &scn.x0, &u_hat, &w)?;
                let name = format!("trajectory_{i:04}.csv");
                write_trajectory_csv(&traj_dir.join(&name), &trace, Some(&u_hat))?;
                let _ = writeln!(index, "{i},trajectories/{name}");
            }
            write_text(&dir.join("trajectories_index.csv"), &index)?;
            let _ = writeln!(s, "trajectories = {}", args.trials);
        }
    }
    for (k, v) in flatten_toml("config", &file.config_toml_value()) {
        let _ = writeln!(s, "{k} = {v}");
    }
    write_text(&dir.join("evaluation.txt"), &s)?;
    print!("{s}");
    Ok(0)
}

pub fn plot(args: &PlotArgs) -> anyhow::Result<i32> {
    let mut trajectories = Vec::new();
    for path in &args.trajectories {
        trajectories.push(
            read_trajectory_csv(path)
                .with_context(|| format!("reading trajectory {}", path.display()))?,
        );
    }
    let svg = crate::plot::phase_plane_svg(
        &trajectories,
        args.safety_level,
        args.ellipse_a,
        args.ellipse_b,
    )?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_text(&args.out, &svg)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

/// Used by the method dispatch to keep names consistent with files on disk.
pub fn method_from_name(name: &str) -> Option<Method> {
    match name {
        "nominal" => Some(Method::Nominal),
        "ecp" => Some(Method::Ecp),
        "drp" => Some(Method::Drp),
        _ => None,
    }
}
