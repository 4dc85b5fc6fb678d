//! Map zoo, holes, weight functions, cell partitions and the cell cover of
//! the survivor set `Λ = ⋂_{n≥0} T^{-n}(M \ U)`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("unknown map family `{0}`")]
    UnknownMap(String),
    #[error("missing parameter `{name}` for map `{map}`")]
    MissingParam { map: String, name: String },
    #[error("parameter `{name}` = {value} of map `{map}` must lie in {range}")]
    ParamOutOfRange {
        map: String,
        name: String,
        value: f64,
        range: &'static str,
    },
    #[error("map `{0}` has no attracting cycle of period <= {1} from its critical orbit")]
    NoAttractor(String, usize),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
}

/// The ambient state space `M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpace {
    /// `[0, 1]`; anything pushed outside is absorbed.
    Interval,
    /// `R/Z`, represented on `[0, 1)`.
    Circle,
    /// A planar rectangle; leaving it is absorption.
    Rectangle {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
}

impl StateSpace {
    pub fn dim(&self) -> usize {
        match self {
            StateSpace::Interval | StateSpace::Circle => 1,
            StateSpace::Rectangle { .. } => 2,
        }
    }

    pub fn axis_bounds(&self, axis: usize) -> (f64, f64) {
        match (self, axis) {
            (StateSpace::Rectangle { x_min, x_max, .. }, 0) => (*x_min, *x_max),
            (StateSpace::Rectangle { y_min, y_max, .. }, _) => (*y_min, *y_max),
            _ => (0.0, 1.0),
        }
    }

    /// Whether the given axis wraps around.
    pub fn periodic(&self, axis: usize) -> bool {
        matches!(self, StateSpace::Circle) && axis == 0
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim())
            .map(|axis| {
                let (lo, hi) = self.axis_bounds(axis);
                hi - lo
            })
            .product()
    }

    /// Brings `x` back into the fundamental domain, or returns `None` if it
    /// has left a non-periodic space.
    pub fn fold(&self, x: State) -> Option<State> {
        let mut out = x;
        for axis in 0..self.dim() {
            let (lo, hi) = self.axis_bounds(axis);
            if self.periodic(axis) {
                let width = hi - lo;
                let mut y = (x[axis] - lo).rem_euclid(width) + lo;
                // rem_euclid can round up to exactly `width`
                if y >= hi {
                    y = lo;
                }
                out[axis] = y;
            } else if !(x[axis] >= lo && x[axis] <= hi) {
                return None;
            }
        }
        Some(out)
    }

    /// Signed displacement `b - a` along an axis, taking the shortest way
    /// around on periodic axes.
    pub fn displacement(&self, axis: usize, a: f64, b: f64) -> f64 {
        let d = b - a;
        if self.periodic(axis) {
            let (lo, hi) = self.axis_bounds(axis);
            let w = hi - lo;
            d - w * (d / w).round()
        } else {
            d
        }
    }

    pub fn distance(&self, a: State, b: State) -> f64 {
        (0..self.dim())
            .map(|axis| self.displacement(axis, a[axis], b[axis]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Identifier of a map family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapId {
    Doubling,
    Logistic,
    Boole,
    Quadratic,
}

impl MapId {
    pub fn as_str(&self) -> &'static str {
        match self {
            MapId::Doubling => "doubling",
            MapId::Logistic => "logistic",
            MapId::Boole => "boole",
            MapId::Quadratic => "quadratic",
        }
    }
}

impl fmt::Display for MapId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MapId {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "doubling" => Ok(MapId::Doubling),
            "logistic" => Ok(MapId::Logistic),
            "boole" => Ok(MapId::Boole),
            "quadratic" => Ok(MapId::Quadratic),
            other => Err(DynamicsError::UnknownMap(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Family {
    /// `2x mod 1` on the circle.
    Doubling,
    /// `a x (1 - x)` on `[0, 1]`.
    Logistic { a: f64 },
    /// The Boole map on the circle.
    Boole,
    /// `z^2 + c` on a rectangle truncating the Riemann sphere.
    Quadratic { c_re: f64, c_im: f64 },
}

/// An open set `U`. Membership is tested on the strict interior, so points on
/// the boundary stay alive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hole {
    Empty,
    /// Open intervals `(lo, hi)` in the first coordinate.
    Intervals { intervals: Vec<(f64, f64)> },
    /// Open balls of a common radius, distances taken in the state space
    /// metric (wrapping on the circle).
    Balls { centers: Vec<State>, radius: f64 },
}

impl Hole {
    pub fn contains(&self, space: &StateSpace, x: State) -> bool {
        match self {
            Hole::Empty => false,
            Hole::Intervals { intervals } => {
                intervals.iter().any(|&(lo, hi)| lo < x[0] && x[0] < hi)
            }
            Hole::Balls { centers, radius } => {
                centers.iter().any(|&c| space.distance(c, x) < *radius)
            }
        }
    }

    /// The `radius`-ball neighbourhood of the attracting cycle reached from
    /// the critical point of `map`.
    pub fn around_attractor(map: &MapSystem, radius: f64) -> Result<Hole, DynamicsError> {
        let cycle = map.attracting_cycle(100_000, 64, 1e-12)?;
        Ok(Hole::Balls {
            centers: cycle,
            radius,
        })
    }
}

/// A deterministic map `T` together with its state space and hole.
#[derive(Clone, Debug, PartialEq)]
pub struct MapSystem {
    id: MapId,
    family: Family,
    space: StateSpace,
    hole: Hole,
    params: BTreeMap<String, f64>,
}

fn param(
    id: MapId,
    params: &BTreeMap<String, f64>,
    name: &str,
) -> Result<f64, DynamicsError> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| DynamicsError::MissingParam {
            map: id.to_string(),
            name: name.to_string(),
        })
}

fn boole_left(x: f64) -> f64 {
    x * (1.0 - x) / (1.0 - x - x * x)
}

fn boole_left_deriv(x: f64) -> f64 {
    let d = 1.0 - x - x * x;
    (1.0 - 2.0 * x + 2.0 * x * x) / (d * d)
}

impl MapSystem {
    /// Builds a member of the map zoo from its identifier and parameters.
    ///
    /// * `doubling`: no parameters, circle, no hole.
    /// * `logistic`: `a ∈ (0, 4]`, interval, no hole (see
    ///   [`Hole::around_attractor`]).
    /// * `boole`: `s ∈ (0, 1/8)`, circle, hole `U_s = [0, s) ∪ (1 - s, 1]`.
    /// * `quadratic`: `c_re`, `c_im` (hyperbolicity is the caller's
    ///   assertion), optional `box` half-width (default 2).
    pub fn build(id: &str, params: &BTreeMap<String, f64>) -> Result<Self, DynamicsError> {
        let id: MapId = id.parse()?;
        let out_of_range = |name: &str, value: f64, range: &'static str| {
            DynamicsError::ParamOutOfRange {
                map: id.to_string(),
                name: name.to_string(),
                value,
                range,
            }
        };
        let (family, space, hole) = match id {
            MapId::Doubling => (Family::Doubling, StateSpace::Circle, Hole::Empty),
            MapId::Logistic => {
                let a = param(id, params, "a")?;
                if !(a > 0.0 && a <= 4.0) {
                    return Err(out_of_range("a", a, "(0, 4]"));
                }
                (Family::Logistic { a }, StateSpace::Interval, Hole::Empty)
            }
            MapId::Boole => {
                let s = param(id, params, "s")?;
                if !(s > 0.0 && s < 0.125) {
                    return Err(out_of_range("s", s, "(0, 1/8)"));
                }
                let hole = Hole::Balls {
                    centers: vec![[0.0, 0.0]],
                    radius: s,
                };
                (Family::Boole, StateSpace::Circle, hole)
            }
            MapId::Quadratic => {
                let c_re = param(id, params, "c_re")?;
                let c_im = param(id, params, "c_im")?;
                if !(c_re.is_finite() && c_im.is_finite()) {
                    return Err(out_of_range("c", c_re, "finite complex numbers"));
                }
                let half = params.get("box").copied().unwrap_or(2.0);
                if !(half > 0.0 && half.is_finite()) {
                    return Err(out_of_range("box", half, "(0, inf)"));
                }
                let space = StateSpace::Rectangle {
                    x_min: -half,
                    x_max: half,
                    y_min: -half,
                    y_max: half,
                };
                (Family::Quadratic { c_re, c_im }, space, Hole::Empty)
            }
        };
        Ok(MapSystem {
            id,
            family,
            space,
            hole,
            params: params.clone(),
        })
    }

    pub fn with_hole(mut self, hole: Hole) -> Self {
        self.hole = hole;
        self
    }

    pub fn id(&self) -> MapId {
        self.id
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn hole(&self) -> &Hole {
        &self.hole
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `T(x)`, folded into the fundamental domain on periodic axes but not
    /// clipped otherwise.
    pub fn eval(&self, x: State) -> State {
        match self.family {
            Family::Doubling => [(2.0 * x[0]).rem_euclid(1.0), 0.0],
            Family::Logistic { a } => [a * x[0] * (1.0 - x[0]), 0.0],
            Family::Boole => {
                let t = x[0].rem_euclid(1.0);
                let y = if t < 0.5 {
                    boole_left(t)
                } else {
                    1.0 - boole_left(1.0 - t)
                };
                [y.rem_euclid(1.0), 0.0]
            }
            Family::Quadratic { c_re, c_im } => {
                let (re, im) = (x[0], x[1]);
                [re * re - im * im + c_re, 2.0 * re * im + c_im]
            }
        }
    }

    /// `|det dT(x)|`.
    pub fn jacobian_det(&self, x: State) -> f64 {
        match self.family {
            Family::Doubling => 2.0,
            Family::Logistic { a } => (a * (1.0 - 2.0 * x[0])).abs(),
            Family::Boole => {
                let t = x[0].rem_euclid(1.0);
                if t < 0.5 {
                    boole_left_deriv(t)
                } else {
                    boole_left_deriv(1.0 - t)
                }
            }
            Family::Quadratic { .. } => 4.0 * (x[0] * x[0] + x[1] * x[1]),
        }
    }

    pub fn in_hole(&self, x: State) -> bool {
        self.hole.contains(&self.space, x)
    }

    /// One deterministic step: `None` if the image leaves the space or lands
    /// in the hole.
    pub fn step(&self, x: State) -> Option<State> {
        let y = self.space.fold(self.eval(x))?;
        (!self.in_hole(y)).then_some(y)
    }

    pub fn critical_point(&self) -> Option<State> {
        match self.family {
            Family::Logistic { .. } => Some([0.5, 0.0]),
            Family::Quadratic { .. } => Some([0.0, 0.0]),
            Family::Doubling | Family::Boole => None,
        }
    }

    /// The attracting periodic orbit reached from the critical point, found by
    /// iterating `transient` steps and then searching for a return.
    pub fn attracting_cycle(
        &self,
        transient: usize,
        max_period: usize,
        tol: f64,
    ) -> Result<Vec<State>, DynamicsError> {
        let no_attractor = || DynamicsError::NoAttractor(self.id.to_string(), max_period);
        let mut x = self.critical_point().ok_or_else(no_attractor)?;
        for _ in 0..transient {
            x = self.space.fold(self.eval(x)).ok_or_else(no_attractor)?;
        }
        let mut orbit = vec![x];
        for _ in 0..max_period {
            let y = self.space.fold(self.eval(*orbit.last().unwrap())).ok_or_else(no_attractor)?;
            if self.space.distance(y, x) < tol {
                return Ok(orbit);
            }
            orbit.push(y);
        }
        Err(no_attractor())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Constant {
        value: f64,
    },
    /// `φ_t(x) = (1 - t) log|det dT(x)|`, so that `φ_t - log|det dT| = -t log|det dT|`.
    LogDerivative {
        t: f64,
    },
    /// Piecewise constant in the first coordinate: `values[i]` on
    /// `[breakpoints[i], breakpoints[i + 1])`.
    Tabulated {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

/// The log-scale weight `φ`; the process survives a step with probability
/// `e^{φ(x)}` (or carries that importance factor when `φ > 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub kind: WeightKind,
    /// Additive constant applied on top of `kind`.
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub holder_note: String,
}

impl WeightFunction {
    pub fn new(kind: WeightKind) -> Result<Self, DynamicsError> {
        if let WeightKind::Tabulated {
            breakpoints,
            values,
        } = &kind
        {
            if breakpoints.len() != values.len() + 1 {
                return Err(DynamicsError::InvalidWeight(format!(
                    "{} breakpoints for {} values",
                    breakpoints.len(),
                    values.len()
                )));
            }
            if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                return Err(DynamicsError::InvalidWeight(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
        }
        Ok(WeightFunction {
            kind,
            shift: 0.0,
            holder_note: String::new(),
        })
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(value: f64) -> Self {
        WeightFunction {
            kind: WeightKind::Constant { value },
            shift: 0.0,
            holder_note: "constant".into(),
        }
    }

    pub fn log_derivative(t: f64) -> Self {
        WeightFunction {
            kind: WeightKind::LogDerivative { t },
            shift: 0.0,
            holder_note: "(1 - t) log|det dT|".into(),
        }
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.shift += c;
        out
    }

    pub fn eval(&self, map: &MapSystem, x: State) -> f64 {
        let base = match &self.kind {
            WeightKind::Constant { value } => *value,
            WeightKind::LogDerivative { t } => {
                if *t == 1.0 {
                    0.0
                } else {
                    (1.0 - t) * map.jacobian_det(x).ln()
                }
            }
            WeightKind::Tabulated {
                breakpoints,
                values,
            } => {
                let i = breakpoints.partition_point(|&b| b <= x[0]);
                if i == 0 {
                    values[0]
                } else {
                    values[(i - 1).min(values.len() - 1)]
                }
            }
        };
        base + self.shift
    }

    /// A short identifier for artifact sidecars.
    pub fn id(&self) -> String {
        let base = match &self.kind {
            WeightKind::Constant { value } => format!("constant({value:?})"),
            WeightKind::LogDerivative { t } => format!("log_derivative(t={t:?})"),
            WeightKind::Tabulated { values, .. } => format!("tabulated({} pieces)", values.len()),
        };
        if self.shift == 0.0 {
            base
        } else {
            format!("{base}+{:?}", self.shift)
        }
    }
}

/// A uniform grid of `resolution^dim` axis-aligned cells covering the state
/// space. Cells are numbered row-major: `index = iy * resolution + ix`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellPartition {
    space: StateSpace,
    resolution: usize,
}

impl CellPartition {
    pub fn new(space: StateSpace, resolution: usize) -> Result<Self, DynamicsError> {
        if resolution == 0 {
            return Err(DynamicsError::InvalidPartition("resolution must be positive".into()));
        }
        let n = resolution.checked_pow(space.dim() as u32).ok_or_else(|| {
            DynamicsError::InvalidPartition(format!("resolution {resolution} overflows"))
        })?;
        if n > u32::MAX as usize {
            return Err(DynamicsError::InvalidPartition(format!("{n} cells is too many")));
        }
        Ok(CellPartition { space, resolution })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn n_cells(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        let (lo, hi) = self.space.axis_bounds(axis);
        (hi - lo) / self.resolution as f64
    }

    pub fn axis_indices(&self, cell: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [cell, 0]
        } else {
            [cell % self.resolution, cell / self.resolution]
        }
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        if self.dim() == 1 {
            ix
        } else {
            iy * self.resolution + ix
        }
    }

    /// `[lo, hi)` along each axis.
    pub fn cell_bounds(&self, cell: usize) -> [(f64, f64); 2] {
        let idx = self.axis_indices(cell);
        let mut out = [(0.0, 0.0); 2];
        for axis in 0..self.dim() {
            let (lo, _) = self.space.axis_bounds(axis);
            let h = self.cell_width(axis);
            out[axis] = (lo + idx[axis] as f64 * h, lo + (idx[axis] + 1) as f64 * h);
        }
        out
    }

    pub fn center(&self, cell: usize) -> State {
        let b = self.cell_bounds(cell);
        let mut c = [0.0; 2];
        for axis in 0..self.dim() {
            c[axis] = 0.5 * (b[axis].0 + b[axis].1);
        }
        c
    }

    pub fn volume(&self, _cell: usize) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a)).product()
    }

    pub fn volumes(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|i| self.volume(i)).collect()
    }

    /// The cell containing `x`, if `x` lies in the (folded) state space.
    pub fn locate(&self, x: State) -> Option<usize> {
        let x = self.space.fold(x)?;
        let mut idx = [0usize; 2];
        for axis in 0..self.dim() {
            let (lo, _) = self.space.axis_bounds(axis);
            let k = ((x[axis] - lo) / self.cell_width(axis)).floor();
            idx[axis] = (k.max(0.0) as usize).min(self.resolution - 1);
        }
        Some(self.index(idx[0], idx[1]))
    }

    /// `k^dim` points at the centres of a `k`-fold subdivision of the cell;
    /// all of them lie in the open cell.
    pub fn sample_points(&self, cell: usize, k: usize) -> Vec<State> {
        let b = self.cell_bounds(cell);
        let offsets: Vec<f64> = (0..k).map(|j| (j as f64 + 0.5) / k as f64).collect();
        let along = |axis: usize, t: f64| b[axis].0 + t * (b[axis].1 - b[axis].0);
        if self.dim() == 1 {
            offsets.iter().map(|&t| [along(0, t), 0.0]).collect()
        } else {
            let mut pts = Vec::with_capacity(k * k);
            for &ty in &offsets {
                for &tx in &offsets {
                    pts.push([along(0, tx), along(1, ty)]);
                }
            }
            pts
        }
    }

    /// All cells within Chebyshev distance `radius` (in cells) of `cells`,
    /// wrapping on periodic axes. Output is sorted.
    pub fn dilate(&self, cells: &[usize], radius: usize) -> Vec<usize> {
        let n = self.resolution as isize;
        let r = radius as isize;
        let mut mark = vec![false; self.n_cells()];
        let wrap = |axis: usize, k: isize| -> Option<usize> {
            if self.space.periodic(axis) {
                Some(k.rem_euclid(n) as usize)
            } else if (0..n).contains(&k) {
                Some(k as usize)
            } else {
                None
            }
        };
        let dy_range = if self.dim() == 2 { -r..=r } else { 0..=0 };
        for &c in cells {
            let [ix, iy] = self.axis_indices(c);
            for dy in dy_range.clone() {
                let Some(jy) = (if self.dim() == 2 { wrap(1, iy as isize + dy) } else { Some(0) })
                else {
                    continue;
                };
                for dx in -r..=r {
                    if let Some(jx) = wrap(0, ix as isize + dx) {
                        mark[self.index(jx, jy)] = true;
                    }
                }
            }
        }
        mark.iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }
}

/// Default number of survivor sample points per axis and cell.
pub const SURVIVOR_SAMPLES: usize = 9;

/// Cells containing a sample point whose orbit `x, T(x), …, T^depth(x)`
/// stays in the space and out of the hole. Sorted, possibly empty.
pub fn survivor_cells(map: &MapSystem, partition: &CellPartition, depth: usize) -> Vec<usize> {
    survivor_cells_with(map, partition, depth, SURVIVOR_SAMPLES)
}

pub fn survivor_cells_with(
    map: &MapSystem,
    partition: &CellPartition,
    depth: usize,
    samples_per_axis: usize,
) -> Vec<usize> {
    let survives = |x: State| -> bool {
        if map.in_hole(x) {
            return false;
        }
        let mut y = x;
        for _ in 0..depth {
            match map.step(y) {
                Some(z) => y = z,
                None => return false,
            }
        }
        true
    };
    (0..partition.n_cells())
        .into_par_iter()
        .filter(|&cell| {
            partition
                .sample_points(cell, samples_per_axis)
                .into_iter()
                .any(survives)
        })
        .collect()
}

/// Cells whose centre is outside the hole: the active set of the global
/// problem on `M \ U`.
pub fn cells_outside_hole(map: &MapSystem, partition: &CellPartition) -> Vec<usize> {
    (0..partition.n_cells())
        .filter(|&c| !map.in_hole(partition.center(c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn logistic_at_critical_point() {
        let map = MapSystem::build("logistic", &params(&[("a", 3.83)])).unwrap();
        assert!((map.eval([0.5, 0.0])[0] - 0.9575).abs() < 1e-15);
        assert!((map.jacobian_det([0.0, 0.0]) - 3.83).abs() < 1e-15);
    }

    #[test]
    fn doubling_is_linear() {
        let map = MapSystem::build("doubling", &BTreeMap::new()).unwrap();
        assert!((map.eval([0.3, 0.0])[0] - 0.6).abs() < 1e-15);
        assert_eq!(map.jacobian_det([0.3, 0.0]), 2.0);
        assert!((map.eval([0.7, 0.0])[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn boole_hole_and_branches() {
        let map = MapSystem::build("boole", &params(&[("s", 0.06)])).unwrap();
        assert!(map.in_hole([0.03, 0.0]));
        assert!(map.in_hole([0.97, 0.0]));
        assert!(map.in_hole([0.0, 0.0]));
        assert!(!map.in_hole([0.5, 0.0]));
        // neutral fixed point and odd symmetry
        assert!((map.jacobian_det([0.0, 0.0]) - 1.0).abs() < 1e-15);
        let x = 0.2;
        let y = map.eval([x, 0.0])[0];
        let z = map.eval([1.0 - x, 0.0])[0];
        assert!((y + z - 1.0).abs() < 1e-14);
        // finite-difference derivative on the left branch
        let h = 1e-6;
        let fd = (boole_left(x + h) - boole_left(x - h)) / (2.0 * h);
        assert!((fd - map.jacobian_det([x, 0.0])).abs() < 1e-6);
    }

    #[test]
    fn quadratic_jacobian_is_modulus_of_complex_derivative_squared() {
        let map = MapSystem::build("quadratic", &params(&[("c_re", -1.0), ("c_im", 0.0)])).unwrap();
        let z = [0.3, -0.4];
        let w = map.eval(z);
        assert!((w[0] - (0.09 - 0.16 - 1.0)).abs() < 1e-15);
        assert!((w[1] - (-0.24)).abs() < 1e-15);
        assert!((map.jacobian_det(z) - 4.0 * 0.25).abs() < 1e-15);
        assert_eq!(map.space().fold([2.5, 0.0]), None);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            MapSystem::build("logistic", &params(&[("a", 4.5)])),
            Err(DynamicsError::ParamOutOfRange { .. })
        ));
        assert!(matches!(
            MapSystem::build("boole", &params(&[("s", 0.2)])),
            Err(DynamicsError::ParamOutOfRange { .. })
        ));
        assert!(matches!(
            MapSystem::build("tent", &BTreeMap::new()),
            Err(DynamicsError::UnknownMap(_))
        ));
        assert!(matches!(
            MapSystem::build("logistic", &BTreeMap::new()),
            Err(DynamicsError::MissingParam { .. })
        ));
    }

    #[test]
    fn logistic_attractor_is_period_three() {
        let map = MapSystem::build("logistic", &params(&[("a", 3.83)])).unwrap();
        let cycle = map.attracting_cycle(100_000, 64, 1e-12).unwrap();
        assert_eq!(cycle.len(), 3);
        let mut xs: Vec<f64> = cycle.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] - 0.156149).abs() < 1e-5, "{xs:?}");
    }

    #[test]
    fn partition_volumes_cover_space() {
        for (space, res) in [
            (StateSpace::Interval, 4096),
            (StateSpace::Circle, 1000),
            (
                StateSpace::Rectangle {
                    x_min: -2.0,
                    x_max: 2.0,
                    y_min: -2.0,
                    y_max: 2.0,
                },
                96,
            ),
        ] {
            let p = CellPartition::new(space, res).unwrap();
            let total: f64 = p.volumes().iter().sum();
            assert!((total - space.volume()).abs() / space.volume() < 1e-12);
        }
    }

    #[test]
    fn locate_inverts_center() {
        let p = CellPartition::new(
            StateSpace::Rectangle {
                x_min: -2.0,
                x_max: 2.0,
                y_min: -1.0,
                y_max: 3.0,
            },
            17,
        )
        .unwrap();
        for c in 0..p.n_cells() {
            assert_eq!(p.locate(p.center(c)), Some(c));
        }
        let circle = CellPartition::new(StateSpace::Circle, 8).unwrap();
        assert_eq!(circle.locate([1.01, 0.0]), Some(0));
        assert_eq!(circle.locate([-0.01, 0.0]), Some(7));
    }

    #[test]
    fn survivors_without_hole_are_everything() {
        let map = MapSystem::build("doubling", &BTreeMap::new()).unwrap();
        let p = CellPartition::new(StateSpace::Circle, 64).unwrap();
        for depth in [0, 1, 5, 30] {
            assert_eq!(survivor_cells(&map, &p, depth).len(), 64);
        }
    }

    #[test]
    fn doubling_hole_depth_one_by_hand() {
        // 8 cells; [1/2, 3/4) is cells 4, 5; cells 2 and 6 map onto it.
        let map = MapSystem::build("doubling", &BTreeMap::new())
            .unwrap()
            .with_hole(Hole::Intervals {
                intervals: vec![(0.5, 0.75)],
            });
        let p = CellPartition::new(StateSpace::Circle, 8).unwrap();
        assert_eq!(survivor_cells(&map, &p, 0), vec![0, 1, 2, 3, 6, 7]);
        assert_eq!(survivor_cells(&map, &p, 1), vec![0, 1, 3, 7]);
    }

    #[test]
    fn dilation_wraps_on_circle() {
        let p = CellPartition::new(StateSpace::Circle, 10).unwrap();
        assert_eq!(p.dilate(&[0], 1), vec![0, 1, 9]);
        let q = CellPartition::new(StateSpace::Interval, 10).unwrap();
        assert_eq!(q.dilate(&[0], 2), vec![0, 1, 2]);
    }

    #[test]
    fn log_derivative_weight_family() {
        let map = MapSystem::build("logistic", &params(&[("a", 3.83)])).unwrap();
        let x = [0.1, 0.0];
        let j = map.jacobian_det(x);
        assert_eq!(WeightFunction::log_derivative(1.0).eval(&map, x), 0.0);
        assert!((WeightFunction::log_derivative(0.0).eval(&map, x) - j.ln()).abs() < 1e-15);
        // the critical point is a zero of the weight, not a NaN
        assert_eq!(WeightFunction::log_derivative(1.0).eval(&map, [0.5, 0.0]), 0.0);
        assert_eq!(
            WeightFunction::log_derivative(0.5).eval(&map, [0.5, 0.0]),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn tabulated_weight_lookup() {
        let w = WeightFunction::new(WeightKind::Tabulated {
            breakpoints: vec![0.0, 0.25, 1.0],
            values: vec![-1.0, -2.0],
        })
        .unwrap();
        let map = MapSystem::build("doubling", &BTreeMap::new()).unwrap();
        assert_eq!(w.eval(&map, [0.1, 0.0]), -1.0);
        assert_eq!(w.eval(&map, [0.25, 0.0]), -2.0);
        assert_eq!(w.eval(&map, [0.99, 0.0]), -2.0);
        assert_eq!(w.shifted(0.5).eval(&map, [0.1, 0.0]), -0.5);
    }
}
