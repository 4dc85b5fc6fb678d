//! Structural invariants of assembled operators and their spectral data,
//! checked on random inputs.

use std::collections::BTreeMap;

use proptest::prelude::*;
use qemlab::dynamics::{cells_outside_hole, survivor_cells, CellPartition, Hole, MapSystem, StateSpace, WeightFunction};
use qemlab::noise::NoiseKernel;
use qemlab::operator::{assemble, assemble_with, pairing, AssemblyOptions, UlamOperator};
use qemlab::oracle::{dense_perron, dense_quasi_ergodic};
use qemlab::sparse::CsrMatrix;
use qemlab::spectral::{quasi_ergodic, solve_triple};

fn doubling_with(hole: Hole) -> MapSystem {
    MapSystem::build("doubling", &BTreeMap::new()).unwrap().with_hole(hole)
}

fn logistic(a: f64) -> MapSystem {
    let mut p = BTreeMap::new();
    p.insert("a".to_string(), a);
    MapSystem::build("logistic", &p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn survivor_cells_shrink_with_depth(lo in 0.05f64..0.9, width in 0.01f64..0.2, depth in 0usize..12) {
        let map = doubling_with(Hole::Intervals { intervals: vec![(lo, (lo + width).min(1.0))] });
        let p = CellPartition::new(StateSpace::Circle, 128).unwrap();
        let a = survivor_cells(&map, &p, depth);
        let b = survivor_cells(&map, &p, depth + 1);
        prop_assert!(b.iter().all(|c| a.binary_search(c).is_ok()));
    }

    #[test]
    fn row_sums_are_bounded_by_the_weight(eps in 0.005f64..0.2, c in -1.0f64..1.0, lo in 0.1f64..0.8) {
        let map = doubling_with(Hole::Intervals { intervals: vec![(lo, lo + 0.1)] });
        let p = CellPartition::new(StateSpace::Circle, 64).unwrap();
        let active = cells_outside_hole(&map, &p);
        let op = assemble(&map, &NoiseKernel::new(eps, 1).unwrap(), &WeightFunction::constant(c), &p, &active).unwrap();
        let bound = c.exp() * (1.0 + 1e-12);
        for s in op.row_sums() {
            prop_assert!(s >= 0.0 && s <= bound);
        }
        prop_assert!(op.matrix().triplets().all(|t| t.2 >= 0.0));
    }

    #[test]
    fn duality_holds_on_random_pairs(
        eps in 0.002f64..0.05,
        f in prop::collection::vec(-1.0f64..1.0, 96),
        g in prop::collection::vec(-1.0f64..1.0, 96),
    ) {
        let map = logistic(3.83);
        let p = CellPartition::new(StateSpace::Interval, 96).unwrap();
        let all: Vec<usize> = (0..96).collect();
        let op = assemble(&map, &NoiseKernel::new(eps, 1).unwrap(), &WeightFunction::log_derivative(0.5), &p, &all).unwrap();
        let lf = op.dual().apply(&f).unwrap();
        let pg = op.apply(&g).unwrap();
        let lhs = pairing(&lf, &g, op.volumes());
        let rhs = pairing(&f, &pg, op.volumes());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn weight_shift_scales_lambda_and_fixes_nu(c in -2.0f64..2.0, eps in 0.01f64..0.1) {
        let map = doubling_with(Hole::Intervals { intervals: vec![(0.75, 1.0)] });
        let p = CellPartition::new(StateSpace::Circle, 64).unwrap();
        let active = cells_outside_hole(&map, &p);
        let kernel = NoiseKernel::new(eps, 1).unwrap();
        let base = assemble(&map, &kernel, &WeightFunction::zero(), &p, &active).unwrap();
        let shifted = assemble(&map, &kernel, &WeightFunction::constant(c), &p, &active).unwrap();
        let (t0, t1) = (solve_triple(&base).unwrap(), solve_triple(&shifted).unwrap());
        prop_assert!((t1.lambda / t0.lambda - c.exp()).abs() <= 1e-10 * c.exp());
        let (n0, n1) = (quasi_ergodic(&t0).unwrap(), quasi_ergodic(&t1).unwrap());
        for (a, b) in n0.weights.iter().zip(&n1.weights) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn sparse_solver_matches_dense_eigensolve(
        entries in prop::collection::vec(0.0f64..1.0, 36),
        mask in prop::collection::vec(prop::bool::weighted(0.7), 36),
        vols in prop::collection::vec(0.5f64..2.0, 6),
    ) {
        // keep a Hamiltonian cycle so the matrix is irreducible, plus a self
        // loop so it is aperiodic
        let mut rows = vec![vec![0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                if mask[6 * i + j] {
                    rows[i][j] = entries[6 * i + j];
                }
            }
            rows[i][(i + 1) % 6] += 0.3;
        }
        rows[0][0] += 0.2;
        let op = UlamOperator::from_matrix(CsrMatrix::from_dense(&rows), vols.clone()).unwrap();
        let t = solve_triple(&op).unwrap();
        let d = dense_perron(&rows, &vols).unwrap();
        prop_assert!((t.lambda - d.lambda).abs() <= 1e-10 * d.lambda);
        let nu = quasi_ergodic(&t).unwrap();
        for (a, b) in nu.weights.iter().zip(dense_quasi_ergodic(&d, &vols)) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn deterministic_ulam_reproduces_the_golden_mean_pressure() {
    // ε = 0 on a dyadic partition aligned with the hole is the exact
    // transfer matrix of the golden-mean shift scaled by 1/2; two nodes per
    // cell keep every image off the cell edges
    let map = doubling_with(Hole::Intervals { intervals: vec![(0.75, 1.0)] });
    let p = CellPartition::new(StateSpace::Circle, 256).unwrap();
    let active = cells_outside_hole(&map, &p);
    let two = AssemblyOptions { nodes_per_axis: 2 };
    let op = assemble_with(&map, &NoiseKernel::new(0.0, 1).unwrap(), &WeightFunction::zero(), &p, &active, two).unwrap();
    let lambda = qemlab::spectral::spectral_radius(&op);
    assert!((lambda - (1.0 + 5f64.sqrt()) / 4.0).abs() < 1e-9, "{lambda}");
}
