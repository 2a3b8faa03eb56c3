// Temporary development probe for the built-in case study.
use stl_dro_core::probability::sample;
use stl_dro_core::programs::{
    empirical_ccp_rate, out_of_sample_report, solve_drp, solve_ecp, solve_nominal,
};
use stl_dro_core::scenario::{case_study, default_disturbance_box};
use stl_dro_core::stl::robustness;
use stl_dro_core::linsys::{rollout, DisturbanceSeq};

fn main() {
    let t0 = std::time::Instant::now();
    let resolved = case_study();
    let scn = &resolved.scenario;
    let cfg = &resolved.solver;
    println!("tightening = {:.6}", scn.tightening().unwrap());
    let lip = scn.lipschitz().unwrap();
    println!("L1 = {:.4}, L2 = {:.4}, L_phi = {:.4}", lip.l1, lip.l2, lip.l_phi);

    // Nominal
    let t = std::time::Instant::now();
    let nominal = solve_nominal(scn, cfg).unwrap();
    let w0 = DisturbanceSeq::zeros(scn.horizon, 2);
    let trace = rollout(&scn.sys, &scn.x0, &nominal.u_hat, &w0).unwrap();
    let rho = robustness(&scn.formula, &trace, 0).unwrap();
    println!(
        "nominal: J = {:.3}, exact rho = {:.4}, feasible = {}, converged = {}, took {:.1?}",
        nominal.j_hat, rho, nominal.feasible, nominal.converged, t.elapsed()
    );
    let states: Vec<String> = trace.states().iter().map(|x| format!("({:.2},{:.2})", x[0], x[1])).collect();
    println!("  trajectory: {}", states.join(" "));

    // ECP with 10x samples
    let t = std::time::Instant::now();
    let ecp_samples = sample(&scn.model, scn.horizon, resolved.samples.ecp, resolved.seeds.samples).unwrap();
    let ecp = solve_ecp(scn, &ecp_samples, cfg).unwrap();
    println!(
        "ecp: J = {:.3}, residual = {:.5}, feasible = {}, converged = {}, took {:.1?}",
        ecp.j_hat, ecp.robustness_residual, ecp.feasible, ecp.converged, t.elapsed()
    );
    let rate = empirical_ccp_rate(scn, &ecp.u_hat, 500, 99).unwrap();
    println!("  ecp rate = {:.3} +- {:.3}", rate.rate, rate.std_err);

    // DRP
    let t = std::time::Instant::now();
    let drp_samples = sample(&scn.model, scn.horizon, resolved.samples.drp, resolved.seeds.samples).unwrap();
    let w_box = default_disturbance_box(&scn.model, &drp_samples, scn.horizon);
    let drp = solve_drp(scn, &drp_samples, 1e-3, &w_box, cfg).unwrap();
    println!(
        "drp: J_hat = {:.3}, lambda = ({:.3}, {:.3}), residual = {:.5}, feasible = {}, converged = {}, took {:.1?}",
        drp.j_hat, drp.lambda1, drp.lambda2, drp.robustness_residual, drp.feasible, drp.converged, t.elapsed()
    );
    let rate = empirical_ccp_rate(scn, &drp.u_hat, 1000, resolved.seeds.evaluate).unwrap();
    println!("  drp rate = {:.3} +- {:.3}", rate.rate, rate.std_err);
    let oos = out_of_sample_report(scn, &drp, 1000, resolved.seeds.evaluate).unwrap();
    println!(
        "  oos: estimate = {:.3} +- {:.3}, J_hat = {:.3}, holds = {}",
        oos.cost_estimate, oos.cost_std_err, oos.j_hat, oos.bound_holds
    );

    // Conservatism ordering: median min distance of x2 to 0.75
    let eval = sample(&scn.model, scn.horizon, 100, 777).unwrap();
    let median_dist = |u: &stl_dro_core::linsys::InputSeq| {
        let mut dists: Vec<f64> = (0..100)
            .map(|i| {
                let w = eval.disturbance_seq(i, scn.horizon, 2).unwrap();
                let tr = rollout(&scn.sys, &scn.x0, u, &w).unwrap();
                tr.states().iter().map(|x| 0.75 - x[1]).fold(f64::INFINITY, f64::min)
            })
            .collect();
        dists.sort_by(f64::total_cmp);
        0.5 * (dists[49] + dists[50])
    };
    let d_drp = median_dist(&drp.u_hat);
    let d_ecp = median_dist(&ecp.u_hat);
    println!("median min dist: drp = {:.4}, ecp = {:.4}, ordered = {}", d_drp, d_ecp, d_drp > d_ecp);
    println!("total elapsed {:.1?}", t0.elapsed());
}
