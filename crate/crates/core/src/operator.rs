//! Ulam discretization of the annealed weighted Koopman operator
//!
//! ```text
//! P_ε f(x) = e^{φ(x)} E_ε[ f(T(x) + ω) 1_A(T(x) + ω) ]
//! ```
//!
//! on the indicator functions of an active cell set `A`, and of its dual
//! `L_ε` with respect to the cell-volume pairing.
//!
//! Row `i` is the `e^φ`-weighted, quadrature-averaged probability that the
//! uniform box `[T(x) - ε, T(x) + ε]^m` lands in each active cell. Overlaps
//! are computed in closed form; mass falling on inactive cells, on the hole,
//! or outside a non-periodic space is lost. With `ε = 0` the classic Ulam
//! matrix is built by sending each node to the cell containing its image.

use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{CellPartition, MapSystem, WeightFunction};
use crate::io::{digest_f64, fmt_f64};
use crate::noise::NoiseKernel;
use crate::sparse::CsrMatrix;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("the active cell set is empty")]
    EmptyActiveSet,
    #[error("active cell {0} is outside the partition")]
    InvalidCell(usize),
    #[error("active cells must be strictly increasing")]
    UnsortedCells,
    #[error("noise dimension {kernel} does not match state dimension {map}")]
    NoiseDimension { kernel: usize, map: usize },
    #[error("weight is not finite from above at {0:?}")]
    InfiniteWeight([f64; 2]),
    #[error("dimension mismatch: expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator dump is malformed: {0}")]
    MalformedDump(String),
    #[error("volume digest mismatch: dump has {dump}, partition gives {partition}")]
    DigestMismatch { dump: String, partition: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Assembly knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    /// Gauss–Legendre nodes per axis and cell.
    pub nodes_per_axis: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { nodes_per_axis: 3 }
    }
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`; weights sum to one.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // Newton iteration from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 + x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// The discretized `P_ε` on an active cell set.
#[derive(Clone, Debug, PartialEq)]
pub struct UlamOperator {
    matrix: CsrMatrix,
    cells: Vec<usize>,
    volumes: Vec<f64>,
    weight_applied: bool,
    weight_id: String,
    epsilon: f64,
    resolution: usize,
}

/// The dual `L_ε` with `L[j][i] = P[i][j] vol_i / vol_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualOperator {
    matrix: CsrMatrix,
    volumes: Vec<f64>,
}

/// Per-axis list of `(cell index along the axis, probability)` for the box
/// `[y - ε, y + ε]` on one axis.
fn axis_overlaps(partition: &CellPartition, axis: usize, y: f64, eps: f64) -> Vec<(usize, f64)> {
    let space = partition.space();
    let (a0, _) = space.axis_bounds(axis);
    let h = partition.cell_width(axis);
    let n = partition.resolution() as i64;
    let lo = y - eps;
    let hi = y + eps;
    let k_lo = ((lo - a0) / h).floor() as i64;
    let k_hi = ((hi - a0) / h).floor() as i64;
    let mut out = Vec::with_capacity((k_hi - k_lo + 1).max(0) as usize);
    for k in k_lo..=k_hi {
        let left = a0 + k as f64 * h;
        let right = a0 + (k + 1) as f64 * h;
        let overlap = hi.min(right) - lo.max(left);
        if overlap <= 0.0 {
            continue;
        }
        let idx = if space.periodic(axis) {
            k.rem_euclid(n)
        } else if (0..n).contains(&k) {
            k
        } else {
            continue;
        };
        out.push((idx as usize, overlap / (2.0 * eps)));
    }
    out
}

impl UlamOperator {
    /// Wraps an arbitrary nonnegative square matrix, e.g. a finite chain,
    /// as an operator over cells `0..n` with the given volumes.
    pub fn from_matrix(matrix: CsrMatrix, volumes: Vec<f64>) -> Result<Self, OperatorError> {
        if matrix.n_rows() != matrix.n_cols() || volumes.len() != matrix.n_rows() {
            return Err(OperatorError::DimensionMismatch {
                expected: matrix.n_rows(),
                got: volumes.len(),
            });
        }
        if matrix.n_rows() == 0 {
            return Err(OperatorError::EmptyActiveSet);
        }
        Ok(UlamOperator {
            cells: (0..matrix.n_rows()).collect(),
            resolution: matrix.n_rows(),
            matrix,
            volumes,
            weight_applied: true,
            weight_id: "matrix".into(),
            epsilon: 0.0,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Global partition indices of the active cells, in row order.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn weight_applied(&self) -> bool {
        self.weight_applied
    }

    pub fn weight_id(&self) -> &str {
        &self.weight_id
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// All entries vanish: every active cell is unreachable.
    pub fn is_zero(&self) -> bool {
        self.matrix.nnz() == 0
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.row_sums()
    }

    /// `P f`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>, OperatorError> {
        let mut out = vec![0.0; self.len()];
        self.apply_into(f, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) -> Result<(), OperatorError> {
        for got in [f.len(), out.len()] {
            if got != self.len() {
                return Err(OperatorError::DimensionMismatch {
                    expected: self.len(),
                    got,
                });
            }
        }
        self.matrix.mul_vec_into(f, out);
        Ok(())
    }

    /// The volume-weighted transpose `L`.
    pub fn dual(&self) -> DualOperator {
        let vol = &self.volumes;
        DualOperator {
            matrix: self.matrix.transpose_scaled(|i, j, v| v * vol[i] / vol[j]),
            volumes: self.volumes.clone(),
        }
    }

    /// `P_A f = P(1_A f)` as an operator on `A` itself: the principal
    /// submatrix on the given global cells (which must be active).
    pub fn restrict_to(&self, global_cells: &[usize]) -> Result<UlamOperator, OperatorError> {
        let mut local = Vec::with_capacity(global_cells.len());
        for &c in global_cells {
            let k = self.cells.binary_search(&c).map_err(|_| OperatorError::InvalidCell(c))?;
            local.push(k);
        }
        if local.windows(2).any(|w| w[0] >= w[1]) {
            return Err(OperatorError::UnsortedCells);
        }
        if local.is_empty() {
            return Err(OperatorError::EmptyActiveSet);
        }
        Ok(UlamOperator {
            matrix: self.matrix.principal_submatrix(&local),
            cells: global_cells.to_vec(),
            volumes: local.iter().map(|&k| self.volumes[k]).collect(),
            weight_applied: self.weight_applied,
            weight_id: self.weight_id.clone(),
            epsilon: self.epsilon,
            resolution: self.resolution,
        })
    }

    /// Row index of a global cell, if active.
    pub fn local_index(&self, global_cell: usize) -> Option<usize> {
        self.cells.binary_search(&global_cell).ok()
    }

    /// Entrywise `e^c P`.
    pub fn scaled(&self, factor: f64) -> UlamOperator {
        let mut out = self.clone();
        out.matrix = self.matrix.map_values(|v| v * factor);
        out
    }
}

impl DualOperator {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if f.len() != self.len() {
            return Err(OperatorError::DimensionMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(self.matrix.mul_vec(f))
    }
}

/// Volume-weighted pairing `⟨f, g⟩ = Σ f_i g_i vol_i`.
pub fn pairing(f: &[f64], g: &[f64], volumes: &[f64]) -> f64 {
    f.iter().zip(g).zip(volumes).map(|((a, b), v)| a * b * v).sum()
}

/// Assembles `P_ε` with default options.
pub fn assemble(
    map: &MapSystem,
    kernel: &NoiseKernel,
    weight: &WeightFunction,
    partition: &CellPartition,
    active_cells: &[usize],
) -> Result<UlamOperator, OperatorError> {
    assemble_with(map, kernel, weight, partition, active_cells, AssemblyOptions::default())
}

pub fn assemble_with(
    map: &MapSystem,
    kernel: &NoiseKernel,
    weight: &WeightFunction,
    partition: &CellPartition,
    active_cells: &[usize],
    options: AssemblyOptions,
) -> Result<UlamOperator, OperatorError> {
    if active_cells.is_empty() {
        return Err(OperatorError::EmptyActiveSet);
    }
    if active_cells.windows(2).any(|w| w[0] >= w[1]) {
        return Err(OperatorError::UnsortedCells);
    }
    let n_cells = partition.n_cells();
    if let Some(&bad) = active_cells.iter().find(|&&c| c >= n_cells) {
        return Err(OperatorError::InvalidCell(bad));
    }
    if kernel.dim != map.dim() {
        return Err(OperatorError::NoiseDimension {
            kernel: kernel.dim,
            map: map.dim(),
        });
    }
    let mut local = vec![usize::MAX; n_cells];
    for (k, &c) in active_cells.iter().enumerate() {
        local[c] = k;
    }
    let dim = map.dim();
    let rule = gauss_legendre_unit(options.nodes_per_axis);
    let eps = kernel.epsilon;

    let build_row = |cell: usize| -> Result<Vec<(usize, f64)>, OperatorError> {
        let bounds = partition.cell_bounds(cell);
        let mut nodes: Vec<([f64; 2], f64)> = Vec::with_capacity(rule.len().pow(dim as u32));
        if dim == 1 {
            for &(t, w) in &rule {
                nodes.push(([bounds[0].0 + t * (bounds[0].1 - bounds[0].0), 0.0], w));
            }
        } else {
            for &(ty, wy) in &rule {
                for &(tx, wx) in &rule {
                    let x = bounds[0].0 + tx * (bounds[0].1 - bounds[0].0);
                    let y = bounds[1].0 + ty * (bounds[1].1 - bounds[1].0);
                    nodes.push(([x, y], wx * wy));
                }
            }
        }
        let mut row = Vec::new();
        for (x, w) in nodes {
            let phi = weight.eval(map, x);
            let factor = phi.exp();
            if factor == 0.0 {
                continue;
            }
            if !factor.is_finite() {
                return Err(OperatorError::InfiniteWeight(x));
            }
            let y = map.eval(x);
            if eps == 0.0 {
                if let Some(c) = partition.locate(y) {
                    if local[c] != usize::MAX {
                        row.push((local[c], w * factor));
                    }
                }
                continue;
            }
            let ox = axis_overlaps(partition, 0, y[0], eps);
            if dim == 1 {
                for (ix, p) in ox {
                    let c = partition.index(ix, 0);
                    if local[c] != usize::MAX {
                        row.push((local[c], w * factor * p));
                    }
                }
            } else {
                let oy = axis_overlaps(partition, 1, y[1], eps);
                for &(iy, py) in &oy {
                    for &(ix, px) in &ox {
                        let c = partition.index(ix, iy);
                        if local[c] != usize::MAX {
                            row.push((local[c], w * factor * px * py));
                        }
                    }
                }
            }
        }
        Ok(row)
    };

    let rows: Vec<Vec<(usize, f64)>> = active_cells
        .par_iter()
        .map(|&c| build_row(c))
        .collect::<Result<_, _>>()?;
    let matrix = CsrMatrix::from_rows(active_cells.len(), rows);
    Ok(UlamOperator {
        matrix,
        cells: active_cells.to_vec(),
        volumes: active_cells.iter().map(|&c| partition.volume(c)).collect(),
        weight_applied: true,
        weight_id: weight.id(),
        epsilon: eps,
        resolution: partition.resolution(),
    })
}

/// JSON sidecar accompanying a triplet CSV dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpSidecar {
    pub resolution: usize,
    pub epsilon: f64,
    pub weight_id: String,
    pub active_cells: Vec<usize>,
    pub volumes_digest: String,
}

impl UlamOperator {
    pub fn sidecar(&self) -> DumpSidecar {
        DumpSidecar {
            resolution: self.resolution,
            epsilon: self.epsilon,
            weight_id: self.weight_id.clone(),
            active_cells: self.cells.clone(),
            volumes_digest: digest_f64(&self.volumes),
        }
    }

    /// Triplet CSV `row,col,value` in local (row) indices.
    pub fn to_triplet_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for (i, j, v) in self.matrix.triplets() {
            out.push_str(&format!("{i},{j},{}\n", fmt_f64(v)));
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_dump(&self, dir: &Path, stem: &str) -> Result<(), OperatorError> {
        fs::write(dir.join(format!("{stem}.csv")), self.to_triplet_csv())?;
        let json = serde_json::to_string_pretty(&self.sidecar())
            .map_err(|e| OperatorError::MalformedDump(e.to_string()))?;
        fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
        Ok(())
    }

    /// Rebuilds an operator from its dump; volumes come from the partition
    /// and are checked against the sidecar digest.
    pub fn from_dump(csv: &str, sidecar: &DumpSidecar, partition: &CellPartition) -> Result<Self, OperatorError> {
        let n = sidecar.active_cells.len();
        let mut triplets = Vec::new();
        for line in csv.lines().skip(1).filter(|l| !l.is_empty()) {
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || OperatorError::MalformedDump(format!("bad row `{line}`"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let i: usize = parts[0].parse().map_err(|_| bad())?;
            let j: usize = parts[1].parse().map_err(|_| bad())?;
            let v: f64 = parts[2].parse().map_err(|_| bad())?;
            if i >= n || j >= n {
                return Err(bad());
            }
            triplets.push((i, j, v));
        }
        if let Some(&bad) = sidecar.active_cells.iter().find(|&&c| c >= partition.n_cells()) {
            return Err(OperatorError::InvalidCell(bad));
        }
        let volumes: Vec<f64> = sidecar.active_cells.iter().map(|&c| partition.volume(c)).collect();
        let digest = digest_f64(&volumes);
        if digest != sidecar.volumes_digest {
            return Err(OperatorError::DigestMismatch {
                dump: sidecar.volumes_digest.clone(),
                partition: digest,
            });
        }
        Ok(UlamOperator {
            matrix: CsrMatrix::from_triplets(n, n, &triplets),
            cells: sidecar.active_cells.clone(),
            volumes,
            weight_applied: true,
            weight_id: sidecar.weight_id.clone(),
            epsilon: sidecar.epsilon,
            resolution: sidecar.resolution,
        })
    }

    pub fn read_dump(dir: &Path, stem: &str, partition: &CellPartition) -> Result<Self, OperatorError> {
        let csv = fs::read_to_string(dir.join(format!("{stem}.csv")))?;
        let json = fs::read_to_string(dir.join(format!("{stem}.json")))?;
        let sidecar: DumpSidecar =
            serde_json::from_str(&json).map_err(|e| OperatorError::MalformedDump(e.to_string()))?;
        Self::from_dump(&csv, &sidecar, partition)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::dynamics::{cells_outside_hole, Hole, StateSpace};

    fn doubling() -> MapSystem {
        MapSystem::build("doubling", &BTreeMap::new()).unwrap()
    }

    fn all_cells(p: &CellPartition) -> Vec<usize> {
        (0..p.n_cells()).collect()
    }

    #[test]
    fn gauss_legendre_rules() {
        let r = gauss_legendre_unit(3);
        let s = (0.6f64).sqrt();
        assert!((r[0].0 - 0.5 * (1.0 - s)).abs() < 1e-15);
        assert!((r[1].0 - 0.5).abs() < 1e-15);
        assert!((r[1].1 - 8.0 / 18.0).abs() < 1e-15);
        assert!((r[0].1 - 5.0 / 18.0).abs() < 1e-15);
        for n in 1..8 {
            let rule = gauss_legendre_unit(n);
            // exact for polynomials of degree 2n - 1
            let exact = 1.0 / (2 * n) as f64;
            let approx: f64 = rule.iter().map(|&(t, w)| w * t.powi(2 * n as i32 - 1)).sum();
            assert!((approx - exact).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn doubling_four_cells_is_the_ulam_matrix() {
        // Each cell [k/4, (k+1)/4) doubles onto two cells, half mass each.
        let map = doubling();
        let p = CellPartition::new(StateSpace::Circle, 4).unwrap();
        let k = NoiseKernel::new(1e-6, 1).unwrap();
        let op = assemble(&map, &k, &WeightFunction::zero(), &p, &all_cells(&p)).unwrap();
        let expected = [
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.5],
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.5],
        ];
        let dense = op.matrix().to_dense();
        for i in 0..4 {
            assert!((op.row_sums()[i] - 1.0).abs() < 1e-9);
            for j in 0..4 {
                // Gauss nodes sit 0.1127 cells from the edges, far beyond ε
                assert!((dense[i][j] - expected[i][j]).abs() < 1e-9, "{i},{j}: {}", dense[i][j]);
            }
        }
        // deterministic path: two nodes per cell keep images off the cell edges
        let two = AssemblyOptions { nodes_per_axis: 2 };
        let det = assemble_with(&map, &NoiseKernel::new(0.0, 1).unwrap(), &WeightFunction::zero(), &p, &all_cells(&p), two).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((det.matrix().get(i, j) - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hole_removes_exact_overlap_mass() {
        let map = doubling().with_hole(Hole::Intervals {
            intervals: vec![(0.5, 0.75)],
        });
        let p = CellPartition::new(StateSpace::Circle, 64).unwrap();
        let eps = 0.01;
        let k = NoiseKernel::new(eps, 1).unwrap();
        let active = cells_outside_hole(&map, &p);
        assert_eq!(active.len(), 48);
        let op = assemble(&map, &k, &WeightFunction::zero(), &p, &active).unwrap();
        let rule = gauss_legendre_unit(3);
        for (row, &c) in active.iter().enumerate() {
            let (lo, hi) = p.cell_bounds(c)[0];
            // closed-form: average over nodes of 1 - |[y-ε, y+ε] ∩ [1/2, 3/4]| / 2ε
            let expected: f64 = rule
                .iter()
                .map(|&(t, w)| {
                    let y = (2.0 * (lo + t * (hi - lo))).rem_euclid(1.0);
                    let overlap = ((y + eps).min(0.75) - (y - eps).max(0.5)).max(0.0);
                    w * (1.0 - overlap / (2.0 * eps))
                })
                .sum();
            assert!((op.row_sums()[row] - expected).abs() < 1e-12, "row {row}");
            assert!(op.row_sums()[row] <= 1.0 + 1e-9);
        }
        assert!(op.row_sums().iter().any(|&s| s < 1.0 - 0.1));
    }

    #[test]
    fn constant_weight_factorizes() {
        let map = doubling();
        let p = CellPartition::new(StateSpace::Circle, 128).unwrap();
        let k = NoiseKernel::new(0.003, 1).unwrap();
        let base = assemble(&map, &k, &WeightFunction::zero(), &p, &all_cells(&p)).unwrap();
        let c = -0.7;
        let shifted = assemble(&map, &k, &WeightFunction::constant(c), &p, &all_cells(&p)).unwrap();
        assert_eq!(base.matrix().nnz(), shifted.matrix().nnz());
        for ((_, _, a), (_, _, b)) in base.matrix().triplets().zip(shifted.matrix().triplets()) {
            assert!((b - c.exp() * a).abs() <= 1e-15 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn dual_pairing_and_plain_transpose() {
        let map = doubling();
        let p = CellPartition::new(StateSpace::Circle, 32).unwrap();
        let k = NoiseKernel::new(0.02, 1).unwrap();
        let op = assemble(&map, &k, &WeightFunction::zero(), &p, &all_cells(&p)).unwrap();
        let l = op.dual();
        let f: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let g: Vec<f64> = (0..32).map(|i| (i as f64 * 0.11).cos()).collect();
        let lhs = pairing(&l.apply(&f).unwrap(), &g, op.volumes());
        let rhs = pairing(&f, &op.apply(&g).unwrap(), op.volumes());
        assert!((lhs - rhs).abs() < 1e-12);
        // equal volumes: the dual is the plain transpose
        assert_eq!(l.matrix(), &op.matrix().transpose());
    }

    #[test]
    fn apply_checks_dimensions_and_fixes_zero() {
        let map = doubling();
        let p = CellPartition::new(StateSpace::Circle, 16).unwrap();
        let op = assemble(&map, &NoiseKernel::new(0.01, 1).unwrap(), &WeightFunction::zero(), &p, &all_cells(&p)).unwrap();
        assert!(matches!(op.apply(&[0.0; 3]), Err(OperatorError::DimensionMismatch { .. })));
        assert_eq!(op.apply(&[0.0; 16]).unwrap(), vec![0.0; 16]);
    }

    #[test]
    fn logistic_fixed_point_cell_maps_near_itself() {
        let mut params = BTreeMap::new();
        params.insert("a".into(), 3.83);
        let map = MapSystem::build("logistic", &params).unwrap();
        let p = CellPartition::new(StateSpace::Interval, 1024).unwrap();
        let op = assemble(&map, &NoiseKernel::new(1e-7, 1).unwrap(), &WeightFunction::zero(), &p, &all_cells(&p)).unwrap();
        let mut indicator = vec![0.0; 1024];
        indicator[0] = 1.0;
        // (P 1_{C0})(x) = P(T(x) + ω ∈ C0): positive only near the
        // preimages 0 and 1 of the fixed point
        let image = op.apply(&indicator).unwrap();
        assert!(image[0] > 0.2);
        assert!(image[1023] > 0.0);
        assert!(image[1..1023].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn restriction_to_everything_is_identity() {
        let map = doubling();
        let p = CellPartition::new(StateSpace::Circle, 16).unwrap();
        let op = assemble(&map, &NoiseKernel::new(0.01, 1).unwrap(), &WeightFunction::zero(), &p, &all_cells(&p)).unwrap();
        assert_eq!(op.restrict_to(&all_cells(&p)).unwrap(), op);
        assert!(op.restrict_to(&[3, 1]).is_err());
        assert!(op.restrict_to(&[99]).is_err());
    }

    #[test]
    fn dump_round_trip_is_bit_exact() {
        let map = doubling().with_hole(Hole::Intervals {
            intervals: vec![(0.75, 1.0)],
        });
        let p = CellPartition::new(StateSpace::Circle, 64).unwrap();
        let op = assemble(&map, &NoiseKernel::new(0.013, 1).unwrap(), &WeightFunction::constant(-0.3), &p, &cells_outside_hole(&map, &p)).unwrap();
        let dir = std::env::temp_dir().join(format!("qemlab-dump-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        op.write_dump(&dir, "op").unwrap();
        let back = UlamOperator::read_dump(&dir, "op", &p).unwrap();
        assert_eq!(back, op);
        let other = CellPartition::new(StateSpace::Circle, 128).unwrap();
        assert!(matches!(
            UlamOperator::read_dump(&dir, "op", &other),
            Err(OperatorError::DigestMismatch { .. })
        ));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn assembly_rejects_bad_input() {
        let map = doubling();
        let p = CellPartition::new(StateSpace::Circle, 8).unwrap();
        let k = NoiseKernel::new(0.01, 1).unwrap();
        let w = WeightFunction::zero();
        assert!(matches!(assemble(&map, &k, &w, &p, &[]), Err(OperatorError::EmptyActiveSet)));
        assert!(matches!(assemble(&map, &k, &w, &p, &[2, 1]), Err(OperatorError::UnsortedCells)));
        assert!(matches!(assemble(&map, &k, &w, &p, &[8]), Err(OperatorError::InvalidCell(8))));
        assert!(matches!(
            assemble(&map, &NoiseKernel::new(0.01, 2).unwrap(), &w, &p, &[0]),
            Err(OperatorError::NoiseDimension { .. })
        ));
    }
}
