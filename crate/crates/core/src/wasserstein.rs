//! Wasserstein-1 distances between discrete measures on a cell partition.
//!
//! One-dimensional distances are exact: `W1 = ∫ |F − G|` with `F`, `G` the
//! piecewise-constant CDFs of atoms placed at cell centers (on the circle
//! the optimal shift of the CDF difference is used). In two dimensions the
//! sliced distance averages exact 1-D distances of projections onto 64
//! fixed directions.

use crate::dynamics::CellPartition;
use crate::State;

pub const SLICED_DIRECTIONS: usize = 64;

/// Exact W1 between two weighted point sets on the line.
pub fn w1_line(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(a.len() + b.len());
    events.extend(a.iter().copied());
    events.extend(b.iter().map(|&(x, w)| (x, -w)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut total = 0.0;
    let mut cdf_gap = 0.0;
    for pair in events.windows(2) {
        cdf_gap += pair[0].1;
        total += cdf_gap.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// Exact W1 on the unit circle: `min_c ∫ |F − G − c|`, attained at the
/// median of the CDF gap.
pub fn w1_circle(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(a.len() + b.len());
    events.extend(a.iter().map(|&(x, w)| (x.rem_euclid(1.0), w)));
    events.extend(b.iter().map(|&(x, w)| (x.rem_euclid(1.0), -w)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    // piecewise-constant gap on [0, 1) with segment lengths
    let mut segments = Vec::with_capacity(events.len() + 1);
    let mut gap = 0.0;
    let mut prev = 0.0;
    for &(x, w) in &events {
        segments.push((gap, x - prev));
        gap += w;
        prev = x;
    }
    segments.push((gap, 1.0 - prev));
    let mut sorted = segments.clone();
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut acc = 0.0;
    let mut median = 0.0;
    for &(v, len) in &sorted {
        acc += len;
        median = v;
        if acc >= 0.5 {
            break;
        }
    }
    segments.iter().map(|&(v, len)| (v - median).abs() * len).sum()
}

/// Fixed unit directions `(cos θ_k, sin θ_k)`, `θ_k = π (k + 1/2) / 64`.
pub fn sliced_directions() -> Vec<[f64; 2]> {
    (0..SLICED_DIRECTIONS)
        .map(|k| {
            let t = std::f64::consts::PI * (k as f64 + 0.5) / SLICED_DIRECTIONS as f64;
            [t.cos(), t.sin()]
        })
        .collect()
}

/// Sliced W1 of two weighted planar point sets.
pub fn sliced_w1(a: &[(State, f64)], b: &[(State, f64)]) -> f64 {
    let dirs = sliced_directions();
    let project = |pts: &[(State, f64)], d: [f64; 2]| -> Vec<(f64, f64)> {
        pts.iter().map(|&(x, w)| (x[0] * d[0] + x[1] * d[1], w)).collect()
    };
    dirs.iter().map(|&d| w1_line(&project(a, d), &project(b, d))).sum::<f64>() / dirs.len() as f64
}

/// W1 between two measures given as `(global cell, mass)` lists on the same
/// partition, atoms at cell centers.
pub fn w1_cells(partition: &CellPartition, a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let space = partition.space();
    if partition.dim() == 1 {
        let pa: Vec<(f64, f64)> = a.iter().map(|&(c, w)| (partition.center(c)[0], w)).collect();
        let pb: Vec<(f64, f64)> = b.iter().map(|&(c, w)| (partition.center(c)[0], w)).collect();
        if space.periodic(0) {
            w1_circle(&pa, &pb)
        } else {
            w1_line(&pa, &pb)
        }
    } else {
        let pa: Vec<(State, f64)> = a.iter().map(|&(c, w)| (partition.center(c), w)).collect();
        let pb: Vec<(State, f64)> = b.iter().map(|&(c, w)| (partition.center(c), w)).collect();
        sliced_w1(&pa, &pb)
    }
}

/// Uniform (Lebesgue) measure on all cells.
pub fn uniform_cells(partition: &CellPartition) -> Vec<(usize, f64)> {
    let n = partition.n_cells();
    (0..n).map(|c| (c, 1.0 / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::dynamics::StateSpace;

    #[test]
    fn dirac_shift() {
        assert!((w1_line(&[(0.2, 1.0)], &[(0.7, 1.0)]) - 0.5).abs() < 1e-15);
        // on the circle the short way round is 0.3
        assert!((w1_circle(&[(0.1, 1.0)], &[(0.8, 1.0)]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn split_mass() {
        let a = [(0.0, 0.5), (1.0, 0.5)];
        let b = [(0.5, 1.0)];
        assert!((w1_line(&a, &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sliced_of_a_translation() {
        // translating by (d, 0) projects to d cos θ; average of |cos θ| ≈ 2/π
        let a = [([0.0, 0.0], 1.0)];
        let b = [([0.1, 0.0], 1.0)];
        let expected = 0.1 * 2.0 / std::f64::consts::PI;
        assert!((sliced_w1(&a, &b) - expected).abs() < 1e-4);
    }

    #[test]
    fn identical_cells_have_zero_distance() {
        let p = CellPartition::new(StateSpace::Interval, 16).unwrap();
        let u = uniform_cells(&p);
        assert_eq!(w1_cells(&p, &u, &u), 0.0);
    }

    proptest! {
        #[test]
        fn line_metric_axioms(
            xs in prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..8),
            ys in prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..8),
            zs in prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..8),
        ) {
            let norm = |v: &Vec<(f64, f64)>| {
                let s: f64 = v.iter().map(|p| p.1).sum();
                v.iter().map(|&(x, w)| (x, w / s)).collect::<Vec<_>>()
            };
            let (a, b, c) = (norm(&xs), norm(&ys), norm(&zs));
            let ab = w1_line(&a, &b);
            prop_assert!((ab - w1_line(&b, &a)).abs() < 1e-12);
            prop_assert!(ab <= w1_line(&a, &c) + w1_line(&c, &b) + 1e-12);
            prop_assert!(w1_circle(&a, &b) <= ab + 1e-12);
        }
    }
}
