//! Leading spectral data of an [`UlamOperator`]: growth rate `λ`, right
//! eigenfunction `g` (`P g = λ g`), quasi-stationary density `m`
//! (`L m = λ m`), period and cyclic classes, and the quasi-ergodic measure
//! `ν ∝ g m vol`.
//!
//! Power iteration always starts from the all-ones vector (or a warm start
//! blended with it). The period is read off the Boolean support digraph: the
//! dominant strongly connected component is the one with the largest
//! restricted spectral radius, and its period is the gcd of its cycle
//! lengths. For period `k > 1` the iteration runs on `P^k` and the cyclic
//! components are recombined as `g = Σ_{j<k} λ^{-j} P^j v`.
//!
//! Cyclic classes are labelled so that every support edge `i -> j` goes from
//! class `r` to class `r + 1 (mod k)`; hence `P 1_{C_r}` is supported on
//! `C_{r-1}` and `P g_r = λ g_{r-1}` for `g_r = g 1_{C_r}`.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph;
use crate::io::write_indexed_csv;
use crate::operator::{DualOperator, UlamOperator};
use crate::sparse::CsrMatrix;

/// Relative threshold below which vector or matrix entries count as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("the operator is identically zero")]
    ZeroOperator,
    #[error("power iteration did not converge in {iterations} steps (lambda ~ {lambda}, residual {residual:e})")]
    NotConverged {
        iterations: usize,
        lambda: f64,
        residual: f64,
    },
    #[error("the support digraph has no cycle: the operator is nilpotent")]
    Nilpotent,
    #[error("growth rates disagree: P gives {primal}, L gives {dual}")]
    DualMismatch { primal: f64, dual: f64 },
    #[error("g and m have disjoint supports")]
    ZeroOverlap,
    #[error("{0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target `‖P v − λ v‖_∞ ≤ tol λ`.
    pub tol: f64,
    pub max_iter: usize,
    /// Allowed relative disagreement between the growth rates of `P` and `L`.
    pub dual_tol: f64,
    /// Relative gap under which two component growth rates count as tied.
    pub degeneracy_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-11,
            max_iter: 200_000,
            dual_tol: 1e-8,
            degeneracy_tol: 1e-6,
        }
    }
}

/// Outcome of a plain power iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    pub lambda: f64,
    /// Nonnegative, unit sup-norm.
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `max_i (Av)_i / v_i` over `v_i > threshold · max v`.
fn ratio_max(v: &[f64], av: &[f64]) -> f64 {
    let cut = SUPPORT_THRESHOLD * sup_norm(v);
    v.iter()
        .zip(av)
        .filter(|(x, _)| **x > cut)
        .map(|(x, y)| y / x)
        .fold(0.0, f64::max)
}

/// Power iteration for `A^steps` where `apply` computes `A`.
fn iterate(
    apply: &dyn Fn(&[f64], &mut [f64]),
    n: usize,
    steps: usize,
    start: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<PowerResult, SpectralError> {
    let mut v: Vec<f64> = match start {
        Some(s) if s.len() == n && sup_norm(s) > 0.0 => {
            let scale = sup_norm(s);
            s.iter().map(|x| 0.5 * x.max(0.0) / scale + 0.5).collect()
        }
        _ => vec![1.0; n],
    };
    let mut av = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let apply_k = |x: &[f64], out: &mut Vec<f64>, tmp: &mut Vec<f64>| {
        apply(x, out);
        for _ in 1..steps {
            tmp.copy_from_slice(out);
            apply(tmp, out);
        }
    };
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        apply_k(&v, &mut av, &mut tmp);
        let norm = sup_norm(&av);
        if norm == 0.0 {
            return Err(SpectralError::ZeroOperator);
        }
        lambda = ratio_max(&v, &av);
        residual = v.iter().zip(&av).fold(0.0, |m, (x, y)| m.max((y - lambda * x).abs()));
        if residual <= tol * lambda {
            return Ok(PowerResult {
                lambda,
                vector: v,
                residual,
                iterations: it,
            });
        }
        for (x, y) in v.iter_mut().zip(&av) {
            *x = (y / norm).max(0.0);
        }
    }
    Err(SpectralError::NotConverged {
        iterations: max_iter,
        lambda,
        residual,
    })
}

/// Plain power iteration on `P` from the all-ones vector.
pub fn power_leading(op: &UlamOperator, tol: f64, max_iter: usize) -> Result<PowerResult, SpectralError> {
    if op.is_zero() {
        return Err(SpectralError::ZeroOperator);
    }
    let m = op.matrix();
    iterate(&|x, y| m.mul_vec_into(x, y), op.len(), 1, None, tol, max_iter)
}

/// Spectral radius of a nonnegative irreducible matrix from the
/// Collatz–Wielandt bounds of the lazy iteration `A + cI`.
fn irreducible_radius(a: &CsrMatrix, max_iter: usize) -> f64 {
    let n = a.n_rows();
    let sums = a.row_sums();
    let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sums.iter().copied().fold(0.0, f64::max);
    let c = 0.5 * (lo + hi);
    let mut v = vec![1.0; n];
    let mut av = vec![0.0; n];
    let mut estimate = hi;
    for _ in 0..max_iter {
        a.mul_vec_into(&v, &mut av);
        let (mut cw_lo, mut cw_hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            av[i] += c * v[i];
            let r = av[i] / v[i];
            cw_lo = cw_lo.min(r);
            cw_hi = cw_hi.max(r);
        }
        estimate = 0.5 * (cw_lo + cw_hi) - c;
        if cw_hi - cw_lo <= 1e-10 * cw_hi {
            break;
        }
        let norm = sup_norm(&av);
        for i in 0..n {
            // stay strictly positive so the bounds remain valid
            v[i] = (av[i] / norm).max(f64::MIN_POSITIVE);
        }
    }
    estimate.max(0.0)
}

/// A nontrivial strongly connected component of the support digraph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Local (row) indices, increasing.
    pub cells: Vec<usize>,
    pub lambda: f64,
    pub period: usize,
}

/// Period and cyclic structure attached to the dominant component.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodInfo {
    pub period: usize,
    /// Cyclic class of each local cell; `None` outside the ancestors of the
    /// dominant component.
    pub labels: Vec<Option<usize>>,
    pub dominant: usize,
    /// All components carrying a cycle, with their restricted growth rates.
    pub components: Vec<Component>,
    /// Another component has a growth rate within tolerance of the dominant.
    pub near_degenerate: bool,
    /// Ancestors reaching the dominant component along paths of different
    /// lengths modulo the period; they carry no label.
    pub ambiguous: Vec<usize>,
    /// Cells with a path into the dominant component (the support of `g`).
    pub upstream: Vec<bool>,
    /// Cells reachable from the dominant component (the support of `m`).
    pub downstream: Vec<bool>,
}

impl PeriodInfo {
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.period];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(r) = l {
                out[*r].push(i);
            }
        }
        out
    }
}

/// Boolean support digraph of `P` with entries above the support threshold.
pub fn support_graph(op: &UlamOperator) -> Vec<Vec<usize>> {
    let m = op.matrix();
    m.support(SUPPORT_THRESHOLD * m.max_abs())
}

/// Finds the dominant component, its period, and the cyclic class labels.
pub fn detect_period(op: &UlamOperator, degeneracy_tol: f64) -> Result<PeriodInfo, SpectralError> {
    if op.is_zero() {
        return Err(SpectralError::ZeroOperator);
    }
    let adj = support_graph(op);
    let (comp, n_comp) = graph::tarjan_scc(&adj);
    let mut members = vec![Vec::new(); n_comp];
    for (v, &c) in comp.iter().enumerate() {
        members[c].push(v);
    }
    let mut components: Vec<Component> = members
        .into_iter()
        .filter_map(|cells| {
            let (period, _) = graph::period_and_levels(&adj, &cells)?;
            Some(Component {
                cells,
                lambda: f64::NAN,
                period,
            })
        })
        .collect();
    if components.is_empty() {
        return Err(SpectralError::Nilpotent);
    }
    components.sort_by_key(|c| c.cells[0]);
    if components.len() == 1 {
        components[0].lambda = irreducible_radius(&op.matrix().principal_submatrix(&components[0].cells), 100_000);
    } else {
        use rayon::prelude::*;
        let lambdas: Vec<f64> = components
            .par_iter()
            .map(|c| irreducible_radius(&op.matrix().principal_submatrix(&c.cells), 100_000))
            .collect();
        for (c, l) in components.iter_mut().zip(lambdas) {
            c.lambda = l;
        }
    }
    let dominant = (0..components.len())
        .max_by(|&a, &b| components[a].lambda.total_cmp(&components[b].lambda).then(b.cmp(&a)))
        .expect("nonempty");
    let top = components[dominant].lambda;
    let near_degenerate = components
        .iter()
        .enumerate()
        .any(|(k, c)| k != dominant && (top - c.lambda).abs() <= degeneracy_tol * top);

    let dom = &components[dominant];
    let (period, levels) = graph::period_and_levels(&adj, &dom.cells).expect("component has a cycle");
    let mut labels: Vec<Option<usize>> = vec![None; op.len()];
    for (&cell, &lv) in dom.cells.iter().zip(&levels) {
        labels[cell] = Some(lv);
    }
    // ancestors inherit labels backwards along edges: r(u) = r(v) - 1
    let rev = graph::reverse(&adj);
    let mut queue: std::collections::VecDeque<usize> = dom.cells.iter().copied().collect();
    let mut conflicts = Vec::new();
    while let Some(v) = queue.pop_front() {
        let rv = labels[v].expect("queued cells are labelled");
        for &u in &rev[v] {
            let want = (rv + period - 1) % period;
            match labels[u] {
                None => {
                    labels[u] = Some(want);
                    queue.push_back(u);
                }
                Some(r) if r != want => conflicts.push(u),
                _ => {}
            }
        }
    }
    let upstream = graph::reachable(&rev, &dom.cells);
    let downstream = graph::reachable(&adj, &dom.cells);
    let mut ambiguous = Vec::new();
    if !conflicts.is_empty() {
        let tainted = graph::reachable(&rev, &conflicts);
        for (u, t) in tainted.into_iter().enumerate() {
            if t {
                labels[u] = None;
                ambiguous.push(u);
            }
        }
    }
    Ok(PeriodInfo {
        period,
        labels,
        dominant,
        components,
        near_degenerate,
        ambiguous,
        upstream,
        downstream,
    })
}

/// Spectral radius of a nonnegative operator: the largest restricted radius
/// over the cycle-carrying components of its support digraph (zero if none).
pub fn spectral_radius(op: &UlamOperator) -> f64 {
    match detect_period(op, 0.0) {
        Ok(info) => info.components[info.dominant].lambda,
        Err(_) => 0.0,
    }
}

/// The leading eigendata of `P` and `L` with joint normalization
/// `Σ m vol = 1`, `Σ g m vol = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTriple {
    pub lambda: f64,
    /// Growth rate recovered independently from `L`.
    pub lambda_dual: f64,
    pub g: Vec<f64>,
    pub m: Vec<f64>,
    pub period: usize,
    /// Local indices of each cyclic class `C_0, …, C_{k-1}`.
    pub cyclic_classes: Vec<Vec<usize>>,
    /// `max(‖P g − λ g‖_∞, Σ |L m − λ m| vol)` for the normalized vectors.
    pub residual: f64,
    pub iterations: usize,
    pub near_degenerate: bool,
    pub components: Vec<Component>,
    /// Global cell indices and volumes, copied from the operator.
    pub cells: Vec<usize>,
    pub volumes: Vec<f64>,
}

/// Expands a `P^k` eigenvector into the `P` eigenvector `Σ λ^{-j} A^j v`.
fn cyclic_sum(apply: &dyn Fn(&[f64], &mut [f64]), v: &[f64], lambda: f64, k: usize) -> Vec<f64> {
    let mut acc = v.to_vec();
    let mut cur = v.to_vec();
    let mut next = vec![0.0; v.len()];
    for j in 1..k {
        apply(&cur, &mut next);
        let scale = lambda.powi(-(j as i32));
        for (a, x) in acc.iter_mut().zip(&next) {
            *a += scale * x;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    acc
}

pub fn solve_triple(op: &UlamOperator) -> Result<SpectralTriple, SpectralError> {
    solve_triple_with(op, SolveOptions::default(), None)
}

/// As [`solve_triple`], optionally warm-starting from a previous triple on
/// the same cells.
pub fn solve_triple_with(
    op: &UlamOperator,
    options: SolveOptions,
    warm: Option<&SpectralTriple>,
) -> Result<SpectralTriple, SpectralError> {
    let info = detect_period(op, options.degeneracy_tol)?;
    let k = info.period;
    let n = op.len();
    let p = op.matrix();
    let dual: DualOperator = op.dual();
    let l = dual.matrix();
    let apply_p = |x: &[f64], y: &mut [f64]| p.mul_vec_into(x, y);
    let apply_l = |x: &[f64], y: &mut [f64]| l.mul_vec_into(x, y);
    let warm = warm.filter(|w| w.cells == op.cells());

    let right = iterate(&apply_p, n, k, warm.map(|w| w.g.as_slice()), options.tol, options.max_iter)?;
    let left = iterate(&apply_l, n, k, warm.map(|w| w.m.as_slice()), options.tol, options.max_iter)?;
    let lambda = right.lambda.powf(1.0 / k as f64);
    let lambda_dual = left.lambda.powf(1.0 / k as f64);
    if (lambda - lambda_dual).abs() > options.dual_tol * lambda.max(lambda_dual) {
        return Err(SpectralError::DualMismatch {
            primal: lambda,
            dual: lambda_dual,
        });
    }
    let mut g = cyclic_sum(&apply_p, &right.vector, lambda, k);
    let mut m = cyclic_sum(&apply_l, &left.vector, lambda, k);
    let vol = op.volumes();
    // exact zeros off the ancestors / descendants of the dominant component
    for i in 0..n {
        if !info.upstream[i] {
            g[i] = 0.0;
        }
        if !info.downstream[i] {
            m[i] = 0.0;
        }
    }
    clean(&mut g);
    clean(&mut m);
    let mass: f64 = m.iter().zip(vol).map(|(a, v)| a * v).sum();
    m.iter_mut().for_each(|x| *x /= mass);
    let overlap: f64 = g.iter().zip(&m).zip(vol).map(|((a, b), v)| a * b * v).sum();
    if overlap <= 0.0 || !overlap.is_finite() {
        return Err(SpectralError::ZeroOverlap);
    }
    g.iter_mut().for_each(|x| *x /= overlap);

    let pg = p.mul_vec(&g);
    let lm = l.mul_vec(&m);
    let res_p = pg.iter().zip(&g).fold(0.0, |acc, (a, b)| f64::max(acc, (a - lambda * b).abs()));
    let res_l: f64 = lm.iter().zip(&m).zip(vol).map(|((a, b), v)| (a - lambda * b).abs() * v).sum();
    Ok(SpectralTriple {
        lambda,
        lambda_dual,
        g,
        m,
        period: k,
        cyclic_classes: info.classes(),
        residual: res_p.max(res_l),
        iterations: right.iterations.max(left.iterations),
        near_degenerate: info.near_degenerate,
        components: info.components,
        cells: op.cells().to_vec(),
        volumes: vol.to_vec(),
    })
}

/// Zeroes entries below the support threshold.
fn clean(v: &mut [f64]) {
    let cut = SUPPORT_THRESHOLD * sup_norm(v);
    for x in v.iter_mut() {
        if *x <= cut {
            *x = 0.0;
        }
    }
}

/// Per-cell probability masses `ν_i = g_i m_i vol_i / Σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiErgodicMeasure {
    /// Global cell indices.
    pub cells: Vec<usize>,
    pub weights: Vec<f64>,
    /// Local indices with weight above the support threshold.
    pub support: Vec<usize>,
}

impl QuasiErgodicMeasure {
    /// `Σ h_i ν_i` for a cell vector `h`.
    pub fn integrate(&self, h: &[f64]) -> f64 {
        h.iter().zip(&self.weights).map(|(a, b)| a * b).sum()
    }

    /// Total mass on the given global cells.
    pub fn mass_on(&self, global_cells: &[usize]) -> f64 {
        let set: std::collections::HashSet<usize> = global_cells.iter().copied().collect();
        self.cells
            .iter()
            .zip(&self.weights)
            .filter(|(c, _)| set.contains(c))
            .map(|(_, w)| w)
            .sum()
    }
}

pub fn quasi_ergodic(triple: &SpectralTriple) -> Result<QuasiErgodicMeasure, SpectralError> {
    let raw: Vec<f64> = triple
        .g
        .iter()
        .zip(&triple.m)
        .zip(&triple.volumes)
        .map(|((g, m), v)| g * m * v)
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(SpectralError::ZeroOverlap);
    }
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let cut = SUPPORT_THRESHOLD * sup_norm(&weights);
    let support = (0..weights.len()).filter(|&i| weights[i] > cut).collect();
    Ok(QuasiErgodicMeasure {
        cells: triple.cells.clone(),
        weights,
        support,
    })
}

#[derive(Serialize)]
struct TripleSummary {
    lambda: f64,
    period: usize,
    residual: f64,
}

impl SpectralTriple {
    /// `triple.json`, `g.csv`, `m.csv` in `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SpectralError> {
        let summary = TripleSummary {
            lambda: self.lambda,
            period: self.period,
            residual: self.residual,
        };
        let json = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
        fs::write(dir.join("triple.json"), json + "\n")?;
        write_indexed_csv(&dir.join("g.csv"), ("cell_index", "value"), self.cells.iter().copied().zip(self.g.iter().copied()))?;
        write_indexed_csv(&dir.join("m.csv"), ("cell_index", "value"), self.cells.iter().copied().zip(self.m.iter().copied()))?;
        Ok(())
    }
}

impl QuasiErgodicMeasure {
    /// `nu.csv` in `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        write_indexed_csv(&dir.join("nu.csv"), ("cell_index", "weight"), self.cells.iter().copied().zip(self.weights.iter().copied()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(rows: &[Vec<f64>]) -> UlamOperator {
        let n = rows.len();
        UlamOperator::from_matrix(CsrMatrix::from_dense(rows), vec![1.0; n]).unwrap()
    }

    #[test]
    fn two_by_two_averaging() {
        let r = power_leading(&op(&[vec![0.5, 0.5], vec![0.5, 0.5]]), 1e-12, 100).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-15);
        assert_eq!(r.vector, vec![1.0, 1.0]);
    }

    #[test]
    fn two_cycle_does_not_converge_but_solves() {
        let a = op(&[vec![0.0, 2.0], vec![0.5, 0.0]]);
        assert!(matches!(power_leading(&a, 1e-12, 1000), Err(SpectralError::NotConverged { .. })));
        let t = solve_triple(&a).unwrap();
        assert_eq!(t.period, 2);
        assert!((t.lambda - 1.0).abs() < 1e-12);
        assert_eq!(t.cyclic_classes.len(), 2);
        let pg = a.apply(&t.g).unwrap();
        for i in 0..2 {
            assert!((pg[i] - t.lambda * t.g[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_operator_is_rejected() {
        let z = op(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(power_leading(&z, 1e-12, 10), Err(SpectralError::ZeroOperator)));
        let nil = op(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(solve_triple(&nil), Err(SpectralError::Nilpotent)));
    }

    #[test]
    fn three_cycle_labels_follow_edges() {
        // 0 -> {1, 2}, 1 -> 3, 2 -> 3, 3 -> 0 ... period 3 with classes {0}, {1,2}, {3}
        let a = op(&[
            vec![0.0, 0.3, 0.4, 0.0],
            vec![0.0, 0.0, 0.0, 0.9],
            vec![0.0, 0.0, 0.0, 0.6],
            vec![0.8, 0.0, 0.0, 0.0],
        ]);
        let info = detect_period(&a, 1e-6).unwrap();
        assert_eq!(info.period, 3);
        let classes = info.classes();
        let find = |c: usize| classes.iter().position(|cl| cl.contains(&c)).unwrap();
        assert_eq!(find(1), find(2));
        assert_eq!(find(1), (find(0) + 1) % 3);
        assert_eq!(find(3), (find(1) + 1) % 3);
    }

    #[test]
    fn transient_prefix_inherits_labels() {
        // 2 -> 0 <-> 1
        let a = op(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.5, 0.0, 0.0]]);
        let info = detect_period(&a, 1e-6).unwrap();
        assert_eq!(info.period, 2);
        assert_eq!(info.labels[2], info.labels[1]);
        assert!(info.ambiguous.is_empty());
        // a second edge 2 -> 1 reaches the cycle at both parities
        let b = op(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0]]);
        let info = detect_period(&b, 1e-6).unwrap();
        assert_eq!(info.ambiguous, vec![2]);
        assert_eq!(info.labels[2], None);
    }

    #[test]
    fn dominant_component_is_the_largest_radius() {
        // {0} self-loop 0.2, {1,2} 2-cycle with radius 0.6, edge 0 -> 1
        let a = op(&[
            vec![0.2, 0.1, 0.0],
            vec![0.0, 0.0, 0.6],
            vec![0.0, 0.6, 0.0],
        ]);
        let info = detect_period(&a, 1e-6).unwrap();
        assert_eq!(info.components.len(), 2);
        let dom = &info.components[info.dominant];
        assert_eq!(dom.cells, vec![1, 2]);
        assert!((dom.lambda - 0.6).abs() < 1e-9);
        assert_eq!(info.period, 2);
        assert!(!info.near_degenerate);
        let t = solve_triple(&a).unwrap();
        assert!((t.lambda - 0.6).abs() < 1e-12);
        // m lives downstream of the dominant block only
        assert_eq!(t.m[0], 0.0);
    }

    #[test]
    fn normalization_and_measure() {
        let a = op(&[
            vec![0.1, 0.5, 0.2],
            vec![0.3, 0.0, 0.4],
            vec![0.2, 0.2, 0.2],
        ]);
        let t = solve_triple(&a).unwrap();
        let mass: f64 = t.m.iter().sum();
        let overlap: f64 = t.g.iter().zip(&t.m).map(|(a, b)| a * b).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((overlap - 1.0).abs() < 1e-12);
        assert!(t.residual < 1e-9);
        let nu = quasi_ergodic(&t).unwrap();
        assert!((nu.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(nu.support, vec![0, 1, 2]);
    }
}
