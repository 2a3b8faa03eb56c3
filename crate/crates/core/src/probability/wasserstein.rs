//! Exact 1-Wasserstein distance between two uniform discrete distributions.
//!
//! The optimal coupling is a transportation problem on the complete bipartite
//! graph. Masses `1/m` and `1/n` are scaled to integer units (`n` per left
//! atom, `m` per right atom) so flows stay exact, and the problem is solved by
//! successive shortest augmenting paths with node potentials. Intended for
//! test-scale supports; the support cap keeps accidental quadratic blowups
//! out of production paths.

use super::{EmpiricalDistribution, ProbabilityError};

const SUPPORT_LIMIT: usize = 64;

/// Exact optimal-transport cost between two discrete uniform distributions
/// under the Euclidean ground metric.
pub fn wasserstein_1(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
) -> Result<f64, ProbabilityError> {
    let m = p.len();
    let n = q.len();
    if m > SUPPORT_LIMIT || n > SUPPORT_LIMIT {
        return Err(ProbabilityError::SupportTooLarge {
            got: m.max(n),
            limit: SUPPORT_LIMIT,
        });
    }
    if p.sample_dim() != q.sample_dim() {
        return Err(ProbabilityError::Dimension {
            expected: p.sample_dim(),
            got: q.sample_dim(),
        });
    }

    let cost: Vec<Vec<f64>> = p
        .samples()
        .iter()
        .map(|a| q.samples().iter().map(|b| (a - b).norm()).collect())
        .collect();

    // Integer mass units: left atom i supplies n units, right atom j demands
    // m units, total flow m*n units each of mass 1/(m*n).
    let mut supply = vec![n as i64; m];
    let mut demand = vec![m as i64; n];
    let mut flow = vec![vec![0i64; n]; m];
    let mut pot_left = vec![0.0f64; m];
    let mut pot_right = vec![0.0f64; n];
    let mut remaining = (m * n) as i64;

    while remaining > 0 {
        // Dijkstra over left/right nodes with reduced costs.
        let mut dist_l = vec![f64::INFINITY; m];
        let mut dist_r = vec![f64::INFINITY; n];
        let mut parent_r = vec![usize::MAX; n]; // left node feeding this right node
        let mut parent_l = vec![usize::MAX; m]; // right node feeding this left node (backward arc)
        let mut done_l = vec![false; m];
        let mut done_r = vec![false; n];
        for i in 0..m {
            if supply[i] > 0 {
                dist_l[i] = 0.0;
            }
        }
        loop {
            // Pick the unfinished node with the smallest tentative distance.
            let mut best = f64::INFINITY;
            let mut pick: Option<(bool, usize)> = None; // (is_left, index)
            for i in 0..m {
                if !done_l[i] && dist_l[i] < best {
                    best = dist_l[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..n {
                if !done_r[j] && dist_r[j] < best {
                    best = dist_r[j];
                    pick = Some((false, j));
                }
            }
            let Some((is_left, idx)) = pick else { break };
            if is_left {
                done_l[idx] = true;
                for j in 0..n {
                    if done_r[j] {
                        continue;
                    }
                    let rc = (cost[idx][j] + pot_left[idx] - pot_right[j]).max(0.0);
                    if dist_l[idx] + rc < dist_r[j] {
                        dist_r[j] = dist_l[idx] + rc;
                        parent_r[j] = idx;
                    }
                }
            } else {
                done_r[idx] = true;
                for i in 0..m {
                    if done_l[i] || flow[i][idx] == 0 {
                        continue;
                    }
                    let rc = (-cost[i][idx] - pot_left[i] + pot_right[idx]).max(0.0);
                    if dist_r[idx] + rc < dist_l[i] {
                        dist_l[i] = dist_r[idx] + rc;
                        parent_l[i] = idx;
                    }
                }
            }
        }

        // Closest reachable right node with unmet demand.
        let sink = (0..n)
            .filter(|&j| demand[j] > 0 && dist_r[j].is_finite())
            .min_by(|&a, &b| dist_r[a].total_cmp(&dist_r[b]))
            .expect("transportation problem is always feasible");

        // Bottleneck along the alternating path.
        let mut bottleneck = demand[sink];
        let mut j = sink;
        loop {
            let i = parent_r[j];
            if parent_l[i] == usize::MAX {
                bottleneck = bottleneck.min(supply[i]);
                break;
            }
            let back = parent_l[i];
            bottleneck = bottleneck.min(flow[i][back]);
            j = back;
        }

        // Apply the augmentation.
        demand[sink] -= bottleneck;
        let mut j = sink;
        loop {
            let i = parent_r[j];
            flow[i][j] += bottleneck;
            if parent_l[i] == usize::MAX {
                supply[i] -= bottleneck;
                break;
            }
            let back = parent_l[i];
            flow[i][back] -= bottleneck;
            j = back;
        }
        remaining -= bottleneck;

        // Update potentials with the computed distances.
        for i in 0..m {
            if dist_l[i].is_finite() {
                pot_left[i] += dist_l[i];
            }
        }
        for j in 0..n {
            if dist_r[j].is_finite() {
                pot_right[j] += dist_r[j];
            }
        }
    }

    let mut total = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            if flow[i][j] > 0 {
                total += flow[i][j] as f64 * cost[i][j];
            }
        }
    }
    Ok(total / (m * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::TestRng;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn dist(points: Vec<Vec<f64>>) -> EmpiricalDistribution {
        EmpiricalDistribution::new(points.into_iter().map(DVector::from_vec).collect()).unwrap()
    }

    /// Brute-force oracle for equal-size uniform supports: the optimum is
    /// attained at a permutation coupling, so enumerate all of them.
    fn permutation_oracle(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
        let n = p.len();
        assert_eq!(n, q.len());
        let mut index: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut index, 0, &mut |perm| {
            let cost: f64 = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| (p.samples()[i].clone() - &q.samples()[j]).norm())
                .sum();
            best = best.min(cost / n as f64);
        });
        best
    }

    fn permute(index: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == index.len() {
            visit(index);
            return;
        }
        for i in k..index.len() {
            index.swap(k, i);
            permute(index, k + 1, visit);
            index.swap(k, i);
        }
    }

    #[test]
    fn dirac_pair_distance_is_euclidean() {
        let p = dist(vec![vec![1.0, 2.0]]);
        let q = dist(vec![vec![4.0, 6.0]]);
        assert_relative_eq!(wasserstein_1(&p, &q).unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn distance_to_self_is_zero() {
        let mut rng = TestRng::new(1);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..4)
                .map(|_| vec![rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)])
                .collect();
            let p = dist(pts);
            assert!(wasserstein_1(&p, &p).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn split_mass_example() {
        // uniform on {0, 2} vs point mass at 1: each half unit travels 1.
        let p = dist(vec![vec![0.0], vec![2.0]]);
        let q = dist(vec![vec![1.0]]);
        assert_relative_eq!(wasserstein_1(&p, &q).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn matches_exhaustive_permutation_oracle() {
        let mut rng = TestRng::new(1234);
        for _ in 0..50 {
            let n = 1 + rng.below(6);
            let d = 1 + rng.below(4);
            let p = dist((0..n).map(|_| (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect()).collect());
            let q = dist((0..n).map(|_| (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect()).collect());
            let got = wasserstein_1(&p, &q).unwrap();
            let want = permutation_oracle(&p, &q);
            assert!(
                (got - want).abs() <= 1e-9,
                "solver {got} vs oracle {want} on supports of size {n}"
            );
        }
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let mut rng = TestRng::new(777);
        for _ in 0..100 {
            let d = 1 + rng.below(3);
            let make = |rng: &mut TestRng| {
                let n = 1 + rng.below(5);
                dist(
                    (0..n)
                        .map(|_| (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect())
                        .collect(),
                )
            };
            let a = make(&mut rng);
            let b = make(&mut rng);
            let c = make(&mut rng);
            let ab = wasserstein_1(&a, &b).unwrap();
            let ba = wasserstein_1(&b, &a).unwrap();
            let bc = wasserstein_1(&b, &c).unwrap();
            let ac = wasserstein_1(&a, &c).unwrap();
            assert!((ab - ba).abs() <= 1e-9, "symmetry violated: {ab} vs {ba}");
            assert!(ab >= -1e-12);
            assert!(ac <= ab + bc + 1e-9, "triangle violated: {ac} > {ab} + {bc}");
            assert!(wasserstein_1(&a, &a).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn rejects_oversized_supports() {
        let p = dist((0..65).map(|i| vec![i as f64]).collect());
        let q = dist(vec![vec![0.0]]);
        assert!(matches!(
            wasserstein_1(&p, &q),
            Err(ProbabilityError::SupportTooLarge { .. })
        ));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let p = dist(vec![vec![0.0]]);
        let q = dist(vec![vec![0.0, 1.0]]);
        assert!(matches!(
            wasserstein_1(&p, &q),
            Err(ProbabilityError::Dimension { .. })
        ));
    }
}
