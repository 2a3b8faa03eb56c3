//! Small fixed scenarios shared by the program-level test suites.

use super::{CostSpec, Scenario};
use crate::linsys::LinearSystem;
use crate::lipschitz::Region;
use crate::probability::DisturbanceModel;
use crate::stl::{parse, PredicateRegistry, SmoothingConfig};
use nalgebra::{DMatrix, DVector};

/// One-step scalar integrator with formula `G[0,1](margin - x1 >= 0)`,
/// Gaussian noise of standard deviation `sigma`, and cost `10 x1^2 + u^2`.
/// Lipschitz data is trivial: `L1 = 1`, `L2 = 1`.
pub fn toy_scalar(sigma: f64, margin: f64) -> Scenario {
    let sys = LinearSystem::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
    )
    .unwrap();
    let registry = PredicateRegistry::new();
    let formula = parse(&format!("G[0,1]({margin} - 1.0*x1 >= 0)"), 1, &registry).unwrap();
    Scenario {
        sys,
        x0: DVector::zeros(1),
        horizon: 1,
        formula,
        r0: 0.0,
        epsilon: 0.5,
        cost: CostSpec::isotropic(1, 1, 10.0, 1.0, 10.0).unwrap(),
        model: DisturbanceModel::gaussian(
            DVector::zeros(1),
            DMatrix::from_element(1, 1, sigma * sigma),
        )
        .unwrap(),
        region: Region::new(vec![-20.0], vec![20.0]).unwrap(),
        smoothing: SmoothingConfig::uniform(50.0).unwrap(),
        input_lo: DVector::from_element(1, -2.0),
        input_hi: DVector::from_element(1, 2.0),
    }
}

/// Variant whose constraint opposes the cost: `G[1,1](x1 - 0.5 >= 0)` wants
/// the final state pushed up while the quadratic cost pulls it to zero, so
/// the robustness constraint is active at the optimum.
pub fn toy_scalar_push(sigma: f64) -> Scenario {
    let mut scn = toy_scalar(sigma, 5.0);
    let registry = PredicateRegistry::new();
    scn.formula = parse("G[1,1](1.0*x1 - 0.5 >= 0)", 1, &registry).unwrap();
    scn
}

/// The built-in double-integrator case study with an override on the noise
/// level.
pub fn case_study(sigma: f64, _samples: usize, _seed: u64) -> Scenario {
    crate::scenario::case_study_file_with_sigma(sigma)
        .resolve(None)
        .expect("case study resolves")
        .scenario
}
