//! Ground truth independent of the Ulam pipeline.
//!
//! * Dense Perron data of small nonnegative matrices (full eigensolve) and
//!   exact finite-horizon conditioned averages by rescaled matrix powers.
//! * Thermodynamic formalism on finite Markov models: pressure, conformal
//!   measure, equilibrium state and its entropy.
//! * Symbolic models of the doubling map with a dyadic hole and of the
//!   logistic repeller built from exact interval preimages.
//!
//! For a model with transfer matrix `A[x][y] = 1_{x→y} e^{ψ(x)}` the Ruelle
//! operator `L f(x) = Σ_{T y = x} e^{ψ(y)} f(y)` is `Aᵀ`. With `A r = λ r`,
//! `l A = λ l`, the equilibrium state is the Markov measure with
//! `π ∝ l r` and `p_xy = A_xy r_y / (λ r_x)`, so the variational identity
//! `log λ = h(π, p) + Σ π ψ` holds exactly.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{CellPartition, DynamicsError, Hole, MapSystem};
use crate::graph;

/// Largest matrix handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 64;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("matrix of size {0} exceeds the dense limit")]
    TooLarge(usize),
    #[error("matrix must be square and nonempty")]
    Shape,
    #[error("matrix entries must be finite and nonnegative")]
    Negative,
    #[error("the Perron vector changes sign (min {min:e}, max {max:e})")]
    SignChange { min: f64, max: f64 },
    #[error("the spectral radius is zero")]
    Nilpotent,
    #[error("the model has no states")]
    EmptyModel,
    #[error("weights must be positive and finite")]
    BadWeight,
    #[error("power iteration did not reach the residual target")]
    NotConverged,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

// ---------------------------------------------------------------------------
// dense Perron data

#[derive(Clone, Debug, PartialEq)]
pub struct DensePerron {
    pub lambda: f64,
    /// `A g = λ g`, normalized with `m` by `Σ g m vol = 1`.
    pub g: Vec<f64>,
    /// Density of the left eigenvector: `(vol m) A = λ (vol m)`, `Σ m vol = 1`.
    pub m: Vec<f64>,
    /// Number of eigenvalues on the spectral circle.
    pub period: usize,
    /// The eigenvalues of modulus `λ`, sorted by argument.
    pub peripheral: Vec<Complex<f64>>,
}

fn to_dmatrix(a: &[Vec<f64>]) -> Result<DMatrix<f64>, OracleError> {
    let n = a.len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(OracleError::Shape);
    }
    if n > DENSE_LIMIT {
        return Err(OracleError::TooLarge(n));
    }
    if a.iter().flatten().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(OracleError::Negative);
    }
    Ok(DMatrix::from_fn(n, n, |i, j| a[i][j]))
}

/// Right null vector of `m` from the smallest singular value.
fn null_vector(m: DMatrix<f64>) -> Vec<f64> {
    let svd = m.svd(false, true);
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("nonempty");
    let v_t = svd.v_t.expect("requested");
    v_t.row(k).iter().copied().collect()
}

/// Flips a Perron vector to be nonnegative; rejects genuine sign changes.
fn orient(mut v: Vec<f64>) -> Result<Vec<f64>, OracleError> {
    let sum: f64 = v.iter().sum();
    if sum < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let max = v.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = v.iter().fold(0.0f64, |a, &b| a.min(b));
    if min < -1e-10 * max {
        return Err(OracleError::SignChange { min, max });
    }
    Ok(v.into_iter().map(|x| x.max(0.0)).collect())
}

/// Full dense eigensolve of a nonnegative matrix of size at most 64.
pub fn dense_perron(a: &[Vec<f64>], vols: &[f64]) -> Result<DensePerron, OracleError> {
    let mat = to_dmatrix(a)?;
    let n = a.len();
    if vols.len() != n {
        return Err(OracleError::Shape);
    }
    let eig = mat.clone().complex_eigenvalues();
    let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if rho == 0.0 {
        return Err(OracleError::Nilpotent);
    }
    let mut peripheral: Vec<Complex<f64>> = eig.iter().copied().filter(|z| z.norm() >= rho * (1.0 - 1e-8)).collect();
    peripheral.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let identity = DMatrix::<f64>::identity(n, n);
    let g = orient(null_vector(&mat - &identity * rho))?;
    let w = orient(null_vector(mat.transpose() - &identity * rho))?;
    let mut m: Vec<f64> = w.iter().zip(vols).map(|(w, v)| w / v).collect();
    let mass: f64 = m.iter().zip(vols).map(|(m, v)| m * v).sum();
    m.iter_mut().for_each(|x| *x /= mass);
    let overlap: f64 = g.iter().zip(&m).zip(vols).map(|((g, m), v)| g * m * v).sum();
    let g = if overlap > 0.0 {
        g.iter().map(|x| x / overlap).collect()
    } else {
        g
    };
    Ok(DensePerron {
        lambda: rho,
        g,
        m,
        period: peripheral.len(),
        peripheral,
    })
}

/// Quasi-ergodic weights `g m vol / Σ` from dense Perron data.
pub fn dense_quasi_ergodic(p: &DensePerron, vols: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = p.g.iter().zip(&p.m).zip(vols).map(|((g, m), v)| g * m * v).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

// ---------------------------------------------------------------------------
// exact conditioned averages

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

fn vecmat(x: &[f64], a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (xi, row) in x.iter().zip(a) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += xi * v;
        }
    }
    out
}

/// Divides by the power of two `2^e` just below the max entry (an exact
/// operation) and returns `e`, or `None` for the zero vector.
fn rescale(v: &mut [f64]) -> Option<i64> {
    let max = v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if max == 0.0 || !max.is_finite() {
        return None;
    }
    let e = max.log2().floor() as i64;
    let factor = 2f64.powi(-e as i32);
    v.iter_mut().for_each(|x| *x *= factor);
    Some(e)
}

/// The finite-horizon conditioned Birkhoff average
///
/// `E_μ[e^{S_n φ} 1_{τ>n} (1/n) Σ_{i<n} h(X_i)] / E_μ[e^{S_n φ} 1_{τ>n}]`
///
/// for the chain with sub-stochastic kernel `q`, weight column
/// `w_i = e^{φ(i)}` and initial law `start`, computed exactly from
/// `E[e^{S_nφ} 1_{τ>n} h(X_i)] = μ P^i (h · P^{n-i} 1)` with `P = diag(w) q`.
/// Both power sequences are rescaled at every step.
pub fn exact_conditioned_average(
    q: &[Vec<f64>],
    weight_col: &[f64],
    h: &[f64],
    start: &[f64],
    n: usize,
) -> Result<f64, OracleError> {
    let size = q.len();
    if size == 0 || q.iter().any(|r| r.len() != size) || [weight_col.len(), h.len(), start.len()].iter().any(|&l| l != size) {
        return Err(OracleError::Shape);
    }
    if weight_col.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(OracleError::BadWeight);
    }
    if n == 0 {
        return Err(OracleError::Shape);
    }
    let p: Vec<Vec<f64>> = q
        .iter()
        .zip(weight_col)
        .map(|(row, w)| row.iter().map(|v| v * w).collect())
        .collect();
    // b_k = P^k 1 and a_i = μ P^i, stored with exact binary exponents
    let mut b = Vec::with_capacity(n + 1);
    let mut b_exp = Vec::with_capacity(n + 1);
    let mut cur = vec![1.0; size];
    let mut exp = 0i64;
    b.push(cur.clone());
    b_exp.push(0i64);
    for _ in 0..n {
        cur = matvec(&p, &cur);
        exp += rescale(&mut cur).ok_or(OracleError::Nilpotent)?;
        b.push(cur.clone());
        b_exp.push(exp);
    }
    let mut a = start.to_vec();
    let mut a_exp = rescale(&mut a).ok_or(OracleError::Shape)?;
    // denominator μ P^n 1 = a_0 · b_n
    let denom_exp = a_exp + b_exp[n];
    let denom: f64 = a.iter().zip(&b[n]).map(|(x, y)| x * y).sum();
    if !(denom > 0.0) {
        return Err(OracleError::Nilpotent);
    }
    let mut total = 0.0;
    for i in 0..n {
        let bk = &b[n - i];
        let term: f64 = a.iter().zip(h).zip(bk).map(|((x, hv), y)| x * hv * y).sum();
        let shift = (a_exp + b_exp[n - i] - denom_exp).clamp(-2000, 2000) as i32;
        total += term / denom * 2f64.powi(shift);
        if i + 1 < n {
            a = vecmat(&a, &p);
            a_exp += rescale(&mut a).ok_or(OracleError::Nilpotent)?;
        }
    }
    Ok(total / n as f64)
}

// ---------------------------------------------------------------------------
// Markov models and thermodynamic formalism

/// A finite topological Markov chain with a per-state potential `ψ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    pub states: Vec<String>,
    /// Allowed transitions `(from, to)`.
    pub adjacency: Vec<(usize, usize)>,
    pub psi: Vec<f64>,
    /// Optional `|T'|` sampled per state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_deriv: Option<Vec<f64>>,
    /// Optional phase-space interval of each state (one-dimensional models).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumState {
    /// Probability weight per model state (zero off the designated component).
    pub measure: Vec<f64>,
    /// `log λ`.
    pub pressure: f64,
    pub entropy: f64,
    /// `Σ ψ dν`.
    pub integral: f64,
    pub lambda: f64,
    /// States of the designated (dominant) irreducible component.
    pub component: Vec<usize>,
    /// Conformal measure (left eigenvector of the Ruelle operator), on the component.
    pub conformal: Vec<f64>,
    /// Right eigenfunction of the Ruelle operator, on the component.
    pub density: Vec<f64>,
}

impl EquilibriumState {
    pub fn variational_gap(&self) -> f64 {
        (self.pressure - self.entropy - self.integral).abs()
    }

    /// Pushes the measure onto a one-dimensional partition, spreading each
    /// state's mass uniformly over its interval.
    pub fn to_cells(&self, model: &MarkovModel, partition: &CellPartition) -> Vec<(usize, f64)> {
        let Some(intervals) = &model.intervals else {
            return Vec::new();
        };
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        let h = partition.cell_width(0);
        let (x0, _) = partition.space().axis_bounds(0);
        let n = partition.resolution();
        for (&(lo, hi), &w) in intervals.iter().zip(&self.measure) {
            if w == 0.0 {
                continue;
            }
            let k_lo = (((lo - x0) / h).floor().max(0.0) as usize).min(n - 1);
            let k_hi = (((hi - x0) / h).floor().max(0.0) as usize).min(n - 1);
            if hi <= lo || k_lo == k_hi {
                *acc.entry(k_lo).or_default() += w;
                continue;
            }
            for k in k_lo..=k_hi {
                let a = x0 + k as f64 * h;
                let overlap = (hi.min(a + h) - lo.max(a)).max(0.0);
                if overlap > 0.0 {
                    *acc.entry(k).or_default() += w * overlap / (hi - lo);
                }
            }
        }
        acc.into_iter().collect()
    }
}

impl MarkovModel {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for &(x, y) in &self.adjacency {
            adj[x].push(y);
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        adj
    }

    /// Same chain with potential `ψ + c`.
    pub fn shifted(&self, c: f64) -> MarkovModel {
        let mut out = self.clone();
        out.psi.iter_mut().for_each(|p| *p += c);
        out
    }

    /// One state with a self-loop and `ψ = -t log|T'(x)|` at a fixed point.
    pub fn fixed_point(map: &MapSystem, x: f64, t: f64) -> MarkovModel {
        let deriv = map.jacobian_det([x, 0.0]);
        MarkovModel {
            states: vec![format!("fixed({x:?})")],
            adjacency: vec![(0, 0)],
            psi: vec![-t * deriv.ln()],
            branch_deriv: Some(vec![deriv]),
            intervals: Some(vec![(x, x)]),
        }
    }
}

/// Perron data of an irreducible sparse nonnegative matrix by lazy power
/// iteration `(A + I)`, independent of the operator pipeline.
fn sparse_perron(rows: &[Vec<(usize, f64)>], transpose: bool) -> Result<(f64, Vec<f64>), OracleError> {
    let n = rows.len();
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = v.to_vec();
        if transpose {
            for (i, row) in rows.iter().enumerate() {
                for &(j, a) in row {
                    out[j] += a * v[i];
                }
            }
        } else {
            for (i, row) in rows.iter().enumerate() {
                out[i] += row.iter().map(|&(j, a)| a * v[j]).sum::<f64>();
            }
        }
        out
    };
    let mut v = vec![1.0; n];
    for _ in 0..1_000_000 {
        let mut w = apply(&v);
        let norm = w.iter().fold(0.0f64, |a, &b| a.max(b));
        w.iter_mut().for_each(|x| *x /= norm);
        let diff = w.iter().zip(&v).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        v = w;
        if diff <= 1e-14 {
            // ratio of sums of (A + I) v and v
            let av = apply(&v);
            let num: f64 = av.iter().sum();
            let den: f64 = v.iter().sum();
            return Ok((num / den - 1.0, v));
        }
    }
    Err(OracleError::NotConverged)
}

/// Pressure and equilibrium state on the irreducible component of largest
/// spectral radius.
pub fn pressure(model: &MarkovModel) -> Result<EquilibriumState, OracleError> {
    if model.is_empty() {
        return Err(OracleError::EmptyModel);
    }
    let adj = model.adjacency_lists();
    let (comp, n_comp) = graph::tarjan_scc(&adj);
    let mut members = vec![Vec::new(); n_comp];
    for (v, &c) in comp.iter().enumerate() {
        members[c].push(v);
    }
    let mut best: Option<(f64, Vec<usize>, Vec<f64>, Vec<f64>)> = None;
    for cells in members {
        if !graph::has_cycle_within(&adj, &cells) {
            continue;
        }
        let (lambda, r, l) = component_perron(model, &adj, &cells)?;
        if best.as_ref().is_none_or(|b| lambda > b.0) {
            best = Some((lambda, cells, r, l));
        }
    }
    let (lambda, cells, r, l) = best.ok_or(OracleError::Nilpotent)?;
    let local: BTreeMap<usize, usize> = cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let psi: Vec<f64> = cells.iter().map(|&c| model.psi[c]).collect();
    let mut pi: Vec<f64> = l.iter().zip(&r).map(|(a, b)| a * b).collect();
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= z);
    // p_xy = e^{ψ_x} r_y / (λ r_x), renormalized per row against rounding
    let mut entropy = 0.0;
    for (kx, &x) in cells.iter().enumerate() {
        let targets: Vec<usize> = adj[x].iter().filter_map(|y| local.get(y).copied()).collect();
        let raw: Vec<f64> = targets.iter().map(|&ky| psi[kx].exp() * r[ky] / (lambda * r[kx])).collect();
        let s: f64 = raw.iter().sum();
        for p in raw {
            let p = p / s;
            if p > 0.0 {
                entropy -= pi[kx] * p * p.ln();
            }
        }
    }
    let integral: f64 = pi.iter().zip(&psi).map(|(a, b)| a * b).sum();
    let mut measure = vec![0.0; model.len()];
    for (k, &c) in cells.iter().enumerate() {
        measure[c] = pi[k];
    }
    let lsum: f64 = l.iter().sum();
    Ok(EquilibriumState {
        measure,
        pressure: lambda.ln(),
        entropy,
        integral,
        lambda,
        component: cells,
        conformal: r.clone(),
        density: l.iter().map(|x| x / lsum).collect(),
    })
}

/// `(λ, r, l)` for `A = 1_{x→y} e^{ψ(x)}` restricted to `cells`.
fn component_perron(
    model: &MarkovModel,
    adj: &[Vec<usize>],
    cells: &[usize],
) -> Result<(f64, Vec<f64>, Vec<f64>), OracleError> {
    let local: BTreeMap<usize, usize> = cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let rows: Vec<Vec<(usize, f64)>> = cells
        .iter()
        .map(|&x| {
            adj[x]
                .iter()
                .filter_map(|y| local.get(y).map(|&ky| (ky, model.psi[x].exp())))
                .collect()
        })
        .collect();
    if cells.len() <= DENSE_LIMIT {
        let mut dense = vec![vec![0.0; cells.len()]; cells.len()];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                dense[i][j] = v;
            }
        }
        let ones = vec![1.0; cells.len()];
        let p = dense_perron(&dense, &ones)?;
        return Ok((p.lambda, p.g, p.m));
    }
    let (lambda, r) = sparse_perron(&rows, false)?;
    let (_, l) = sparse_perron(&rows, true)?;
    Ok((lambda, r, l))
}

// ---------------------------------------------------------------------------
// symbolic models

fn words(level: usize) -> impl Iterator<Item = String> {
    (0..1usize << level).map(move |k| format!("{k:0level$b}"))
}

fn allowed(word: &str, forbidden: &[String]) -> bool {
    !forbidden.iter().any(|f| word.contains(f.as_str()))
}

/// Level-`level` binary words whose dyadic cylinder lies inside the hole.
pub fn dyadic_forbidden_words(hole: &Hole, level: usize) -> Vec<String> {
    let scale = (1u64 << level) as f64;
    words(level)
        .enumerate()
        .filter(|(k, _)| match hole {
            Hole::Empty => false,
            Hole::Intervals { intervals } => {
                let (lo, hi) = (*k as f64 / scale, (*k as f64 + 1.0) / scale);
                intervals.iter().any(|&(a, b)| a <= lo && hi <= b)
            }
            Hole::Balls { .. } => false,
        })
        .map(|(_, w)| w)
        .collect()
}

/// Doubling map with a dyadic hole as the shift on allowed words of
/// length `level`, with constant potential `psi`.
pub fn doubling_model(forbidden: &[String], level: usize, psi: f64) -> MarkovModel {
    let states: Vec<String> = words(level).filter(|w| allowed(w, forbidden)).collect();
    let index: BTreeMap<&str, usize> = states.iter().enumerate().map(|(k, w)| (w.as_str(), k)).collect();
    let mut adjacency = Vec::new();
    for (k, w) in states.iter().enumerate() {
        for bit in ['0', '1'] {
            let next = format!("{}{bit}", &w[1..]);
            if let Some(&j) = index.get(next.as_str()) {
                adjacency.push((k, j));
            }
        }
    }
    let scale = (1u64 << level) as f64;
    let intervals = states
        .iter()
        .map(|w| {
            let k = u64::from_str_radix(w, 2).unwrap_or(0) as f64;
            (k / scale, (k + 1.0) / scale)
        })
        .collect();
    MarkovModel {
        psi: vec![psi; states.len()],
        branch_deriv: Some(vec![2.0; states.len()]),
        intervals: Some(intervals),
        adjacency,
        states,
    }
}

/// Exact depth-`depth` survivor cylinders of level `level` for the doubling
/// map: cells some point of which has `depth + 1` orbit points avoiding the
/// forbidden words. Free digits beyond the cell are chosen existentially.
pub fn dyadic_survivor_cylinders(forbidden: &[String], level: usize, depth: usize) -> Vec<usize> {
    let q = forbidden.iter().map(String::len).max().unwrap_or(0);
    if q == 0 {
        return (0..1usize << level).collect();
    }
    // digits 1..=depth+q must avoid forbidden words in windows starting at 0..=depth
    let total = depth + q;
    let ok_windows = |digits: &[u8], upto: usize| -> bool {
        // check windows fully inside digits[..upto]
        forbidden.iter().all(|f| {
            let f = f.as_bytes();
            (0..=upto.saturating_sub(f.len()))
                .filter(|&s| s <= depth && s + f.len() <= upto)
                .all(|s| &digits[s..s + f.len()] != f)
        })
    };
    fn extend(digits: &mut Vec<u8>, total: usize, ok: &dyn Fn(&[u8], usize) -> bool) -> bool {
        if !ok(digits, digits.len()) {
            return false;
        }
        if digits.len() >= total {
            return true;
        }
        for &b in b"01" {
            digits.push(b);
            let good = extend(digits, total, ok);
            digits.pop();
            if good {
                return true;
            }
        }
        false
    }
    words(level)
        .enumerate()
        .filter(|(_, w)| {
            let mut digits = w.as_bytes().to_vec();
            if digits.len() > total {
                digits.truncate(total);
            }
            extend(&mut digits, total, &ok_windows)
        })
        .map(|(k, _)| k)
        .collect()
}

fn merge(mut ivs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    ivs.retain(|iv| iv.1 >= iv.0);
    ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
    for iv in ivs {
        match out.last_mut() {
            Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
            _ => out.push(iv),
        }
    }
    out
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo <= hi {
            out.push((lo, hi));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Preimage of `[c, d]` under `x ↦ a x (1 - x)` on `[0, 1]`.
fn logistic_preimage(a: f64, c: f64, d: f64) -> Vec<(f64, f64)> {
    let top = a / 4.0;
    if c > top || d < 0.0 {
        return Vec::new();
    }
    let c = c.max(0.0);
    let d = d.min(top);
    let root = |y: f64| (1.0 - 4.0 * y / a).max(0.0).sqrt();
    let left = (0.5 * (1.0 - root(c)), 0.5 * (1.0 - root(d)));
    let right = (0.5 * (1.0 + root(d)), 0.5 * (1.0 + root(c)));
    vec![left, right]
}

/// Symbolic model of the logistic map `x ↦ a x (1 - x)` outside a ball of
/// radius `hole_radius` around its attracting cycle.
///
/// States are the components of `K_depth`, where `K_0 = [0,1] \ U` and
/// `K_{n+1} = K_0 ∩ T^{-1} K_n` are computed by exact interval preimages;
/// `J → J'` when the midpoint of `J'` lies in `T(J)`, and
/// `ψ_J = -t log|T'(mid J)|`.
pub fn logistic_repeller_model(a: f64, depth: usize, hole_radius: f64, t: f64) -> Result<MarkovModel, OracleError> {
    let mut params = BTreeMap::new();
    params.insert("a".to_string(), a);
    let map = MapSystem::build("logistic", &params)?;
    let cycle = map.attracting_cycle(2000, 64, 1e-9)?;
    let holes = merge(cycle.iter().map(|p| (p[0] - hole_radius, p[0] + hole_radius)).collect());
    let mut k0 = Vec::new();
    let mut cursor = 0.0;
    for &(lo, hi) in &holes {
        if lo > cursor {
            k0.push((cursor, lo));
        }
        cursor = cursor.max(hi);
    }
    if cursor < 1.0 {
        k0.push((cursor, 1.0));
    }
    let mut k = k0.clone();
    for _ in 0..depth {
        let pre = merge(k.iter().flat_map(|&(c, d)| logistic_preimage(a, c, d)).collect());
        k = intersect(&k0, &pre);
    }
    if k.is_empty() {
        return Err(OracleError::EmptyModel);
    }
    let image = |(lo, hi): (f64, f64)| -> (f64, f64) {
        let (ya, yb) = (map.eval([lo, 0.0])[0], map.eval([hi, 0.0])[0]);
        let (mut y0, mut y1) = (ya.min(yb), ya.max(yb));
        if lo <= 0.5 && 0.5 <= hi {
            y1 = a / 4.0;
        }
        if y0 > y1 {
            std::mem::swap(&mut y0, &mut y1);
        }
        (y0, y1)
    };
    let mids: Vec<f64> = k.iter().map(|iv| 0.5 * (iv.0 + iv.1)).collect();
    let mut adjacency = Vec::new();
    for (i, &iv) in k.iter().enumerate() {
        let (y0, y1) = image(iv);
        let start = mids.partition_point(|&m| m < y0);
        for (j, &m) in mids.iter().enumerate().skip(start) {
            if m > y1 {
                break;
            }
            adjacency.push((i, j));
        }
    }
    let deriv: Vec<f64> = mids.iter().map(|&m| map.jacobian_det([m, 0.0])).collect();
    Ok(MarkovModel {
        states: k.iter().map(|iv| format!("[{:?},{:?}]", iv.0, iv.1)).collect(),
        adjacency,
        psi: deriv.iter().map(|d| -t * d.ln()).collect(),
        branch_deriv: Some(deriv),
        intervals: Some(k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_perron_of_a_swap() {
        let p = dense_perron(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1.0, 1.0]).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-12);
        assert_eq!(p.period, 2);
        assert!((p.peripheral[0].re - 1.0).abs() < 1e-12);
        assert!((p.peripheral[1].re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_characteristic_root() {
        let p = dense_perron(&[vec![0.5, 0.5], vec![0.5, 0.0]], &[1.0, 1.0]).unwrap();
        // root of x^2 - x/2 - 1/4
        let root = (1.0 + 5f64.sqrt()) / 4.0;
        assert!((p.lambda - root).abs() < 1e-14);
        assert!((root * root - root / 2.0 - 0.25).abs() < 1e-15);
        assert_eq!(p.period, 1);
    }

    #[test]
    fn stochastic_matrix_has_stationary_m() {
        let a = vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.5, 0.3], vec![0.0, 0.4, 0.6]];
        let p = dense_perron(&a, &[1.0; 3]).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-12);
        // m A = m
        let ma = vecmat(&p.m, &a);
        for (x, y) in ma.iter().zip(&p.m) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn conditioned_average_trivial_chains() {
        let v = exact_conditioned_average(&[vec![0.7]], &[1.0], &[1.0], &[1.0], 37).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        let q = vec![vec![0.25, 0.25], vec![0.25, 0.25]];
        for n in [2, 10, 1000] {
            let v = exact_conditioned_average(&q, &[1.0, 1.0], &[1.0, 0.0], &[1.0, 0.0], n).unwrap();
            // the first step sits at state 0, the rest are symmetric
            let expected = (1.0 + 0.5 * (n - 1) as f64) / n as f64;
            assert!((v - expected).abs() < 1e-12, "n = {n}: {v} vs {expected}");
        }
    }

    #[test]
    fn conditioned_average_survives_underflow() {
        let q = vec![vec![1e-3, 1e-3], vec![1e-3, 0.0]];
        let v = exact_conditioned_average(&q, &[1.0, 1.0], &[1.0, 0.0], &[0.5, 0.5], 5000).unwrap();
        assert!(v.is_finite() && v > 0.0 && v < 1.0);
    }

    #[test]
    fn full_shift_pressures() {
        let m = doubling_model(&[], 1, 0.0);
        let eq = pressure(&m).unwrap();
        assert!((eq.pressure - 2f64.ln()).abs() < 1e-12);
        assert!((eq.measure[0] - 0.5).abs() < 1e-12);
        let eq = pressure(&m.shifted(-2f64.ln())).unwrap();
        assert!(eq.pressure.abs() < 1e-12);
        assert!(eq.variational_gap() < 1e-12);
    }

    #[test]
    fn forbidden_words_of_holes() {
        let h = Hole::Intervals {
            intervals: vec![(0.5, 0.75)],
        };
        assert_eq!(dyadic_forbidden_words(&h, 2), vec!["10".to_string()]);
        assert!(dyadic_forbidden_words(&h, 1).is_empty());
    }

    #[test]
    fn hand_enumerated_survivor_cylinders() {
        let forbidden = vec!["10".to_string()];
        assert_eq!(dyadic_survivor_cylinders(&forbidden, 3, 0), vec![0, 1, 2, 3, 6, 7]);
        assert_eq!(dyadic_survivor_cylinders(&forbidden, 3, 1), vec![0, 1, 3, 7]);
    }

    #[test]
    fn logistic_preimages_round_trip() {
        let a = 3.83;
        for (lo, hi) in logistic_preimage(a, 0.2, 0.3) {
            for x in [lo, hi] {
                let y = a * x * (1.0 - x);
                assert!((0.2 - 1e-12..=0.3 + 1e-12).contains(&y));
            }
        }
        assert!(logistic_preimage(a, 0.96, 1.0).is_empty());
    }
}
