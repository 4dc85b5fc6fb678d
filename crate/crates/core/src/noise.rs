//! Bounded additive perturbations `T_ω(x) = T(x) + ω` with `ω` uniform on
//! `[-ε, ε]^m`, `m` the state dimension.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::MapSystem;
use crate::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("epsilon must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("the transition density is singular at epsilon = 0; use the deterministic path")]
    Singular,
}

/// Additive uniform noise of amplitude `epsilon` in every coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseKernel {
    pub epsilon: f64,
    pub dim: usize,
}

/// Result of one random step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    Alive(State),
    Absorbed,
}

impl NoiseKernel {
    pub fn new(epsilon: f64, dim: usize) -> Result<Self, NoiseError> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(NoiseError::InvalidEpsilon(epsilon));
        }
        Ok(NoiseKernel { epsilon, dim })
    }

    pub fn for_map(map: &MapSystem, epsilon: f64) -> Result<Self, NoiseError> {
        Self::new(epsilon, map.dim())
    }

    pub fn is_deterministic(&self) -> bool {
        self.epsilon == 0.0
    }
}

/// One-step density of `X_1 = T(x) + ω` at `y`, in inverse volume units.
/// Absorption (hole, leaving the space) is not accounted for here.
pub fn transition_density(
    map: &MapSystem,
    kernel: &NoiseKernel,
    x: State,
    y: State,
) -> Result<f64, NoiseError> {
    if kernel.is_deterministic() {
        return Err(NoiseError::Singular);
    }
    let tx = map.eval(x);
    let space = map.space();
    let eps = kernel.epsilon;
    let inside = (0..kernel.dim).all(|axis| space.displacement(axis, tx[axis], y[axis]).abs() <= eps);
    Ok(if inside {
        (2.0 * eps).powi(kernel.dim as i32).recip()
    } else {
        0.0
    })
}

/// Draws `T(x) + ω`; returns [`Step::Absorbed`] if the result leaves a
/// non-periodic space or lies in the hole.
pub fn sample_step<R: Rng + ?Sized>(
    map: &MapSystem,
    kernel: &NoiseKernel,
    x: State,
    rng: &mut R,
) -> Step {
    let mut y = map.eval(x);
    if !kernel.is_deterministic() {
        for coord in y.iter_mut().take(kernel.dim) {
            *coord += kernel.epsilon * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    match map.space().fold(y) {
        Some(z) if !map.in_hole(z) => Step::Alive(z),
        _ => Step::Absorbed,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dynamics::{CellPartition, Hole};

    fn doubling() -> MapSystem {
        MapSystem::build("doubling", &BTreeMap::new()).unwrap()
    }

    #[test]
    fn uniform_box_density() {
        let map = doubling();
        let k = NoiseKernel::new(0.1, 1).unwrap();
        let d = transition_density(&map, &k, [0.2, 0.0], [0.45, 0.0]).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
        assert_eq!(transition_density(&map, &k, [0.2, 0.0], [0.6, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn density_wraps_on_circle() {
        let map = doubling();
        let k = NoiseKernel::new(0.05, 1).unwrap();
        // T(0.495) = 0.99; on R/Z the distance to 0.02 is 0.03 <= 0.05
        let x = [0.495, 0.0];
        assert!((map.eval(x)[0] - 0.99).abs() < 1e-15);
        let d = transition_density(&map, &k, x, [0.02, 0.0]).unwrap();
        assert!((d - 10.0).abs() < 1e-12);
        let direct = map.space().distance(map.eval(x), [0.02, 0.0]);
        assert!((direct - 0.03).abs() < 1e-12);
    }

    #[test]
    fn zero_epsilon_density_is_an_error() {
        let k = NoiseKernel::new(0.0, 1).unwrap();
        assert_eq!(
            transition_density(&doubling(), &k, [0.2, 0.0], [0.4, 0.0]),
            Err(NoiseError::Singular)
        );
        assert!(NoiseKernel::new(-1.0, 1).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        let map = doubling();
        let k = NoiseKernel::new(0.037, 1).unwrap();
        let p = CellPartition::new(*map.space(), 1 << 16).unwrap();
        for x in [0.0, 0.123, 0.4999, 0.77] {
            let total: f64 = (0..p.n_cells())
                .map(|c| transition_density(&map, &k, [x, 0.0], p.center(c)).unwrap() * p.volume(c))
                .sum();
            assert!((total - 1.0).abs() < 1e-3, "x = {x}: {total}");
        }
    }

    #[test]
    fn deterministic_kernel_steps_exactly() {
        let map = doubling().with_hole(Hole::Intervals {
            intervals: vec![(0.5, 0.75)],
        });
        let k = NoiseKernel::new(0.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_step(&map, &k, [0.1, 0.0], &mut rng), Step::Alive([0.2, 0.0]));
        assert_eq!(sample_step(&map, &k, [0.3, 0.0], &mut rng), Step::Absorbed);
    }

    #[test]
    fn absorption_probability_matches_overlap() {
        let map = doubling().with_hole(Hole::Intervals {
            intervals: vec![(0.5, 0.75)],
        });
        let k = NoiseKernel::new(0.01, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        // T(0.25) = 0.5: half of [0.49, 0.51] lies in the hole
        let absorbed = (0..n)
            .filter(|_| sample_step(&map, &k, [0.25, 0.0], &mut rng) == Step::Absorbed)
            .count() as f64
            / n as f64;
        assert!((absorbed - 0.5).abs() < 0.005, "{absorbed}");
        // T(0.3) = 0.6: [0.59, 0.61] lies inside the hole
        assert!((0..1000).all(|_| sample_step(&map, &k, [0.3, 0.0], &mut rng) == Step::Absorbed));
    }

    #[test]
    fn interval_mass_outside_is_absorbed() {
        let mut params = BTreeMap::new();
        params.insert("a".to_string(), 3.83);
        let map = MapSystem::build("logistic", &params).unwrap();
        let k = NoiseKernel::new(0.01, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let absorbed = (0..n)
            .filter(|_| sample_step(&map, &k, [0.0, 0.0], &mut rng) == Step::Absorbed)
            .count() as f64
            / n as f64;
        assert!((absorbed - 0.5).abs() < 0.01);
    }

    #[test]
    fn seeded_trajectories_are_identical() {
        let map = doubling();
        let k = NoiseKernel::new(0.01, 1).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut x = [0.1234, 0.0];
            let mut out = Vec::new();
            for _ in 0..100 {
                if let Step::Alive(y) = sample_step(&map, &k, x, &mut rng) {
                    x = y;
                }
                out.push(x[0].to_bits());
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empirical_histogram_matches_density() {
        // chi-square sanity check of sample_step against transition_density
        let map = doubling();
        let k = NoiseKernel::new(0.05, 1).unwrap();
        let x = [0.37, 0.0];
        let p = CellPartition::new(*map.space(), 200).unwrap();
        let n = 1_000_000usize;
        let mut counts = vec![0usize; p.n_cells()];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..n {
            if let Step::Alive(y) = sample_step(&map, &k, x, &mut rng) {
                counts[p.locate(y).unwrap()] += 1;
            }
        }
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for (c, &obs) in counts.iter().enumerate() {
            // cells are fully inside or outside the support here
            let expected = transition_density(&map, &k, x, p.center(c)).unwrap() * p.volume(c) * n as f64;
            if expected > 0.0 {
                chi2 += (obs as f64 - expected).powi(2) / expected;
                dof += 1;
            } else {
                assert_eq!(obs, 0);
            }
        }
        assert_eq!(dof, 20);
        // 99.9% quantile of chi-square with 19 degrees of freedom is 43.8
        assert!(chi2 < 43.8, "chi2 = {chi2}");
    }
}
