//! Recurrent/transient decomposition of a survivor cover.
//!
//! The cover is split into connected components (runs of face-adjacent
//! cells). Components are linked when the operator moves positive mass from
//! one to the other, and mutually reachable components form a class: the
//! classes are the strongly connected components of that digraph and their
//! condensation is acyclic.
//!
//! A class is labelled recurrent when its cells carry a cycle of the support
//! digraph and the restricted operator's spectral radius clears
//! `10 · e^{min φ} · escape_floor`. The floor is a configured absolute
//! value standing in for the growth rate of a class that is known to empty.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{survivor_cells, CellPartition, MapSystem};
use crate::graph;
use crate::operator::{OperatorError, UlamOperator};
use crate::spectral::{self, SpectralTriple, SUPPORT_THRESHOLD};

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("the survivor cover is empty")]
    EmptyCover,
    #[error("cover cell {0} is not an active cell of the operator")]
    InactiveCell(usize),
    #[error("no recurrent class: every class empties under the dynamics")]
    NoRecurrentClass,
    #[error("class index {0} out of range")]
    NoSuchClass(usize),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionOptions {
    /// Growth rate of a class known to empty.
    pub escape_floor: f64,
    /// `min φ` over the cover, entering the threshold as `e^{min φ}`.
    pub min_phi: f64,
    /// Relative gap under which two recurrent growth rates count as tied.
    pub degeneracy_tol: f64,
}

impl Default for RegionOptions {
    fn default() -> Self {
        RegionOptions {
            escape_floor: 1e-3,
            min_phi: 0.0,
            degeneracy_tol: 1e-6,
        }
    }
}

impl RegionOptions {
    pub fn threshold(&self) -> f64 {
        10.0 * self.min_phi.exp() * self.escape_floor
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Recurrent,
    Transient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionGraph {
    /// Components as sorted global cell lists.
    pub components: Vec<Vec<usize>>,
    /// Component indices of each class.
    pub classes: Vec<Vec<usize>>,
    pub labels: Vec<Label>,
    /// Class-level edges `(from, to)`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Spectral radius of the operator restricted to each class.
    pub class_lambda: Vec<f64>,
    /// Whether each class carries an internal cycle of the support digraph.
    pub has_cycle: Vec<bool>,
    pub dominant: usize,
    /// Another recurrent class is within tolerance of the dominant one.
    pub near_degenerate: bool,
    pub threshold: f64,
}

/// Sorted cover: depth-`depth` survivor cells dilated by `dilation` cells,
/// intersected with `active`.
pub fn survivor_cover(
    map: &MapSystem,
    partition: &CellPartition,
    depth: usize,
    dilation: usize,
    active: &[usize],
) -> Vec<usize> {
    let grown = partition.dilate(&survivor_cells(map, partition, depth), dilation);
    let active: BTreeSet<usize> = active.iter().copied().collect();
    grown.into_iter().filter(|c| active.contains(c)).collect()
}

/// Runs of face-adjacent cells of a sorted cell set.
pub fn connected_components(partition: &CellPartition, cells: &[usize]) -> Vec<Vec<usize>> {
    let mut local = vec![usize::MAX; partition.n_cells()];
    for (k, &c) in cells.iter().enumerate() {
        local[c] = k;
    }
    let n = partition.resolution() as isize;
    let space = partition.space();
    let neighbor = |c: usize, axis: usize, step: isize| -> Option<usize> {
        let mut idx = partition.axis_indices(c);
        let k = idx[axis] as isize + step;
        let k = if space.periodic(axis) {
            k.rem_euclid(n)
        } else if (0..n).contains(&k) {
            k
        } else {
            return None;
        };
        idx[axis] = k as usize;
        Some(partition.index(idx[0], idx[1]))
    };
    let mut comp = vec![usize::MAX; cells.len()];
    let mut out = Vec::new();
    for start in 0..cells.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![cells[start]];
        comp[start] = id;
        let mut stack = vec![cells[start]];
        while let Some(c) = stack.pop() {
            for axis in 0..partition.dim() {
                for step in [-1, 1] {
                    if let Some(d) = neighbor(c, axis, step) {
                        let k = local[d];
                        if k != usize::MAX && comp[k] == usize::MAX {
                            comp[k] = id;
                            members.push(d);
                            stack.push(d);
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Decomposes a sorted survivor cover of the operator's active cells.
pub fn build_regions(
    op: &UlamOperator,
    partition: &CellPartition,
    cover: &[usize],
    options: RegionOptions,
) -> Result<RegionGraph, RegionError> {
    if cover.is_empty() {
        return Err(RegionError::EmptyCover);
    }
    RegionGraph::from_components(op, connected_components(partition, cover), options)
}

impl RegionGraph {
    /// Builds the graph from explicit components (global cell lists).
    pub fn from_components(
        op: &UlamOperator,
        mut components: Vec<Vec<usize>>,
        options: RegionOptions,
    ) -> Result<RegionGraph, RegionError> {
        components.retain(|c| !c.is_empty());
        if components.is_empty() {
            return Err(RegionError::EmptyCover);
        }
        for comp in &mut components {
            comp.sort_unstable();
        }
        components.sort_by_key(|c| c[0]);
        // row index -> component
        let mut owner = vec![usize::MAX; op.len()];
        for (k, comp) in components.iter().enumerate() {
            for &c in comp {
                let row = op.local_index(c).ok_or(RegionError::InactiveCell(c))?;
                owner[row] = k;
            }
        }
        let support = spectral::support_graph(op);
        let mut comp_adj = vec![BTreeSet::new(); components.len()];
        for (row, targets) in support.iter().enumerate() {
            let a = owner[row];
            if a == usize::MAX {
                continue;
            }
            for &t in targets {
                let b = owner[t];
                if b != usize::MAX && b != a {
                    comp_adj[a].insert(b);
                }
            }
        }
        let comp_adj: Vec<Vec<usize>> = comp_adj.into_iter().map(|s| s.into_iter().collect()).collect();
        let (scc, n_classes) = graph::tarjan_scc(&comp_adj);
        let mut classes = vec![Vec::new(); n_classes];
        for (k, &c) in scc.iter().enumerate() {
            classes[n_classes - 1 - c].push(k);
        }
        classes.sort_by_key(|cl| cl[0]);
        let mut class_of = vec![0usize; components.len()];
        for (ci, cl) in classes.iter().enumerate() {
            for &k in cl {
                class_of[k] = ci;
            }
        }
        let mut edges = BTreeSet::new();
        for (a, targets) in comp_adj.iter().enumerate() {
            for &b in targets {
                if class_of[a] != class_of[b] {
                    edges.insert((class_of[a], class_of[b]));
                }
            }
        }
        let class_cells: Vec<Vec<usize>> = classes
            .iter()
            .map(|cl| {
                let mut cells: Vec<usize> = cl.iter().flat_map(|&k| components[k].iter().copied()).collect();
                cells.sort_unstable();
                cells
            })
            .collect();
        let stats: Vec<(bool, f64)> = class_cells
            .par_iter()
            .map(|cells| {
                let rows: Vec<usize> = cells.iter().map(|&c| op.local_index(c).expect("checked")).collect();
                let cyclic = graph::has_cycle_within(&support, &rows);
                let lambda = if cyclic {
                    spectral::spectral_radius(&op.restrict_to(cells).expect("cover cells are active"))
                } else {
                    0.0
                };
                (cyclic, lambda)
            })
            .collect();
        let threshold = options.threshold();
        let labels: Vec<Label> = stats
            .iter()
            .map(|&(cyclic, lambda)| {
                if cyclic && lambda > threshold {
                    Label::Recurrent
                } else {
                    Label::Transient
                }
            })
            .collect();
        let class_lambda: Vec<f64> = stats.iter().map(|s| s.1).collect();
        let dominant = (0..labels.len())
            .filter(|&c| labels[c] == Label::Recurrent)
            .max_by(|&a, &b| class_lambda[a].total_cmp(&class_lambda[b]).then(b.cmp(&a)))
            .ok_or(RegionError::NoRecurrentClass)?;
        let top = class_lambda[dominant];
        let near_degenerate = (0..labels.len()).any(|c| {
            c != dominant && labels[c] == Label::Recurrent && top - class_lambda[c] <= options.degeneracy_tol * top
        });
        Ok(RegionGraph {
            components,
            classes,
            labels,
            edges: edges.into_iter().collect(),
            class_lambda,
            has_cycle: stats.iter().map(|s| s.0).collect(),
            dominant,
            near_degenerate,
            threshold,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn recurrent(&self) -> Vec<usize> {
        (0..self.n_classes()).filter(|&c| self.labels[c] == Label::Recurrent).collect()
    }

    /// Sorted global cells of a class.
    pub fn class_cells(&self, class: usize) -> Vec<usize> {
        let mut cells: Vec<usize> = self.classes[class]
            .iter()
            .flat_map(|&k| self.components[k].iter().copied())
            .collect();
        cells.sort_unstable();
        cells
    }

    /// Class containing the given global cell, if it is in the cover.
    pub fn class_of_cell(&self, cell: usize) -> Option<usize> {
        (0..self.n_classes()).find(|&c| self.classes[c].iter().any(|&k| self.components[k].binary_search(&cell).is_ok()))
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_classes()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
        }
        adj
    }

    /// `P_A f = P(1_A f)` on the cells of a class.
    pub fn restrict(&self, op: &UlamOperator, class: usize) -> Result<UlamOperator, RegionError> {
        if class >= self.n_classes() {
            return Err(RegionError::NoSuchClass(class));
        }
        Ok(op.restrict_to(&self.class_cells(class))?)
    }

    /// Structural checks on the decomposition and, given a triple on the
    /// same operator, on the supports of `g` and `m`.
    pub fn check(&self, op: &UlamOperator, triple: Option<&SpectralTriple>) -> RegionChecks {
        let adj = self.adjacency();
        let acyclic = graph::topological_order(&adj).is_some();
        let recurrent = self.recurrent();
        let rev = graph::reverse(&adj);
        let reaches_recurrent = graph::reachable(&rev, &recurrent);
        let transient_reach_recurrent = (0..self.n_classes())
            .all(|c| self.labels[c] == Label::Recurrent || reaches_recurrent[c]);
        // an acyclic cell subgraph of size s has P^s = 0 on it
        let transient_empties = (0..self.n_classes())
            .filter(|&c| self.labels[c] == Label::Transient)
            .all(|c| !self.has_cycle[c]);
        let mut g_localized = None;
        let mut m_localized = None;
        if let Some(t) = triple.filter(|t| t.cells == op.cells()) {
            let downstream = graph::reachable(&adj, &[self.dominant]);
            let upstream = graph::reachable(&rev, &[self.dominant]);
            let gmax = t.g.iter().fold(0.0f64, |a, &b| a.max(b));
            let mmax = t.m.iter().fold(0.0f64, |a, &b| a.max(b));
            let small = |v: &[f64], max: f64, class: usize| {
                self.class_cells(class)
                    .iter()
                    .all(|&c| v[op.local_index(c).expect("cover")] <= SUPPORT_THRESHOLD * max)
            };
            g_localized = Some(
                (0..self.n_classes())
                    .filter(|&c| c != self.dominant && downstream[c])
                    .all(|c| small(&t.g, gmax, c)),
            );
            m_localized = Some(
                (0..self.n_classes())
                    .filter(|&c| c != self.dominant && upstream[c])
                    .all(|c| small(&t.m, mmax, c)),
            );
        }
        RegionChecks {
            acyclic,
            transient_reach_recurrent,
            transient_empties,
            g_localized,
            m_localized,
        }
    }

    pub fn summary(&self) -> RegionSummary {
        RegionSummary {
            n_classes: self.n_classes(),
            recurrent: self.recurrent(),
            dominant: self.dominant,
            class_lambda: self.class_lambda.clone(),
            near_degenerate: self.near_degenerate,
            recurrence_rule: format!(
                "proxy: internal cycle and class lambda > {:e} (10 * exp(min phi) * escape floor)",
                self.threshold
            ),
        }
    }

    /// Graphviz rendering of the class DAG.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph regions {\n  rankdir=LR;\n");
        for c in 0..self.n_classes() {
            let (shape, kind) = match self.labels[c] {
                Label::Recurrent if c == self.dominant => ("doublecircle", "dominant"),
                Label::Recurrent => ("circle", "recurrent"),
                Label::Transient => ("box", "transient"),
            };
            let _ = writeln!(
                out,
                "  M{c} [shape={shape}, label=\"M{c}\\n{kind}\\nlambda={:?}\\ncells={}\"];",
                self.class_lambda[c],
                self.class_cells(c).len()
            );
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  M{a} -> M{b};");
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub n_classes: usize,
    pub recurrent: Vec<usize>,
    pub dominant: usize,
    pub class_lambda: Vec<f64>,
    pub near_degenerate: bool,
    pub recurrence_rule: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionChecks {
    pub acyclic: bool,
    pub transient_reach_recurrent: bool,
    pub transient_empties: bool,
    pub g_localized: Option<bool>,
    pub m_localized: Option<bool>,
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::dynamics::{StateSpace, WeightFunction};
    use crate::noise::NoiseKernel;
    use crate::operator::assemble;
    use crate::sparse::CsrMatrix;

    #[test]
    fn components_wrap_on_the_circle() {
        let p = CellPartition::new(StateSpace::Circle, 8).unwrap();
        assert_eq!(connected_components(&p, &[0, 1, 3, 7]), vec![vec![0, 1, 7], vec![3]]);
        let q = CellPartition::new(StateSpace::Interval, 8).unwrap();
        assert_eq!(connected_components(&q, &[0, 1, 3, 7]), vec![vec![0, 1], vec![3], vec![7]]);
        let r = CellPartition::new(
            StateSpace::Rectangle {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            },
            3,
        )
        .unwrap();
        // diagonal neighbours are not adjacent
        let diag = [r.index(0, 0), r.index(1, 1)];
        assert_eq!(connected_components(&r, &diag).len(), 2);
    }

    #[test]
    fn closed_doubling_is_one_recurrent_class() {
        let map = MapSystem::build("doubling", &BTreeMap::new()).unwrap();
        let p = CellPartition::new(StateSpace::Circle, 256).unwrap();
        let all: Vec<usize> = (0..256).collect();
        let op = assemble(&map, &NoiseKernel::new(0.01, 1).unwrap(), &WeightFunction::zero(), &p, &all).unwrap();
        let cover = survivor_cover(&map, &p, 10, 1, &all);
        let rg = build_regions(&op, &p, &cover, RegionOptions::default()).unwrap();
        assert_eq!(rg.n_classes(), 1);
        assert_eq!(rg.recurrent(), vec![0]);
        assert!((rg.class_lambda[0] - 1.0).abs() < 1e-8);
        let checks = rg.check(&op, None);
        assert!(checks.acyclic && checks.transient_reach_recurrent && checks.transient_empties);
    }

    #[test]
    fn two_block_toy_chain() {
        // A = {0} leaks into B = {1}, which keeps half its mass
        let op = UlamOperator::from_matrix(
            CsrMatrix::from_dense(&[vec![0.0, 0.9], vec![0.0, 0.5]]),
            vec![1.0, 1.0],
        )
        .unwrap();
        let rg = RegionGraph::from_components(&op, vec![vec![0], vec![1]], RegionOptions::default()).unwrap();
        assert_eq!(rg.n_classes(), 2);
        let a = rg.class_of_cell(0).unwrap();
        let b = rg.class_of_cell(1).unwrap();
        assert_eq!(rg.labels[a], Label::Transient);
        assert_eq!(rg.labels[b], Label::Recurrent);
        assert_eq!(rg.edges, vec![(a, b)]);
        assert_eq!(rg.dominant, b);
        let t = spectral::solve_triple(&op).unwrap();
        let checks = rg.check(&op, Some(&t));
        assert_eq!(checks.g_localized, Some(true));
        assert_eq!(checks.m_localized, Some(true));
        assert!(rg.to_dot().contains("M0 -> M1"));
    }

    #[test]
    fn no_recurrent_class_is_an_error() {
        let op = UlamOperator::from_matrix(CsrMatrix::from_dense(&[vec![0.0, 0.9], vec![0.0, 0.0]]), vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            RegionGraph::from_components(&op, vec![vec![0], vec![1]], RegionOptions::default()),
            Err(RegionError::NoRecurrentClass)
        ));
    }

    #[test]
    fn restriction_commutes_with_duality() {
        let map = MapSystem::build("doubling", &BTreeMap::new()).unwrap();
        let p = CellPartition::new(StateSpace::Circle, 64).unwrap();
        let all: Vec<usize> = (0..64).collect();
        let op = assemble(&map, &NoiseKernel::new(0.02, 1).unwrap(), &WeightFunction::zero(), &p, &all).unwrap();
        let keep: Vec<usize> = (10..40).collect();
        let a = op.restrict_to(&keep).unwrap().dual();
        let b_full = op.dual();
        let local: Vec<usize> = keep.clone();
        let b = b_full.matrix().principal_submatrix(&local);
        assert_eq!(a.matrix(), &b);
    }
}
