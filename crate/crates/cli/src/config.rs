//! Experiment configuration: one TOML file per experiment.
//!
//! ```toml
//! seed = 7
//! mode = "global"
//!
//! [map]
//! id = "doubling"
//!
//! [hole]
//! kind = "intervals"
//! intervals = [[0.5, 0.75]]
//!
//! [weight]
//! kind = "constant"
//! value = 0.0
//!
//! [discretization]
//! resolutions = [4096]
//! epsilons = [1e-1, 1e-2, 1e-3, 1e-4]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qemlab::dynamics::{DynamicsError, Hole, MapSystem, WeightFunction, WeightKind};
use qemlab::io::sha256_hex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observable::Observable;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("epsilon list must be non-empty, positive and strictly descending")]
    Epsilons,
    #[error("resolution {0} is not a power of two")]
    Resolution(usize),
    #[error("need one resolution or one per epsilon, got {resolutions} for {epsilons} epsilons")]
    ResolutionCount { resolutions: usize, epsilons: usize },
    #[error("class index is only meaningful in local mode")]
    ClassInGlobalMode,
    #[error("invalid observable: {0}")]
    Observable(String),
    #[error("invalid setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Restrict the operator to one recurrent class.
    Local,
    #[default]
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HoleSpec {
    /// Whatever hole the map family carries (the Boole map's `U_s`).
    #[default]
    Default,
    Empty,
    Intervals {
        intervals: Vec<(f64, f64)>,
    },
    Balls {
        centers: Vec<[f64; 2]>,
        radius: f64,
    },
    /// Ball of the given radius around the attracting cycle of the critical point.
    Attractor {
        radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub resolutions: Vec<usize>,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_nodes")]
    pub nodes_per_axis: usize,
}

fn default_nodes() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionSettings {
    /// Survivor depth of the region cover.
    pub depth: usize,
    /// Radius of the neighbourhood of the survivor cells forming the cover,
    /// in state units; held fixed across ε.
    pub delta: f64,
    /// Extra dilation in cells on top of `ceil(delta / h)`.
    pub dilation: usize,
    pub escape_floor: f64,
    pub degeneracy_tol: f64,
}

impl Default for RegionSettings {
    fn default() -> Self {
        RegionSettings {
            depth: 20,
            delta: 0.01,
            dilation: 1,
            escape_floor: 1e-3,
            degeneracy_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub dual_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-11,
            max_iter: 200_000,
            dual_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSettings {
    /// Symbolic depth of the oracle model.
    pub depth: usize,
    /// Convergence tolerance on `|log λ_ε − pressure|` at the final ε.
    pub tol: f64,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        ReferenceSettings { depth: 12, tol: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleConfig {
    pub enabled: bool,
    pub horizon: usize,
    pub particles: usize,
    pub islands: usize,
    pub ess_floor: f64,
    /// Survivor depth of the uniform initial law.
    pub initial_depth: usize,
    pub observables: Vec<String>,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        ParticleConfig {
            enabled: false,
            horizon: 100,
            particles: 100_000,
            islands: 32,
            ess_floor: 100.0,
            initial_depth: 10,
            observables: vec!["x".into()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Class index for local mode; the dominant class when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub map: MapSpec,
    #[serde(default)]
    pub hole: HoleSpec,
    #[serde(default = "zero_weight")]
    pub weight: WeightKind,
    pub discretization: Discretization,
    #[serde(default)]
    pub regions: RegionSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub reference: ReferenceSettings,
    #[serde(default)]
    pub particles: ParticleConfig,
}

fn zero_weight() -> WeightKind {
    WeightKind::Constant { value: 0.0 }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let eps = &self.discretization.epsilons;
        if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ConfigError::Epsilons);
        }
        let res = &self.discretization.resolutions;
        if res.len() != 1 && res.len() != eps.len() {
            return Err(ConfigError::ResolutionCount {
                resolutions: res.len(),
                epsilons: eps.len(),
            });
        }
        if let Some(&r) = res.iter().find(|r| !r.is_power_of_two()) {
            return Err(ConfigError::Resolution(r));
        }
        if self.discretization.nodes_per_axis == 0 || self.discretization.nodes_per_axis > 5 {
            return Err(ConfigError::Invalid("nodes_per_axis must be in 1..=5".into()));
        }
        if self.mode == Mode::Global && self.class.is_some() {
            return Err(ConfigError::ClassInGlobalMode);
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(ConfigError::Invalid("solver tolerance and iteration cap must be positive".into()));
        }
        if !(self.regions.delta >= 0.0) {
            return Err(ConfigError::Invalid("delta must be non-negative".into()));
        }
        if !(self.regions.escape_floor > 0.0) {
            return Err(ConfigError::Invalid("escape_floor must be positive".into()));
        }
        for o in &self.particles.observables {
            o.parse::<Observable>().map_err(ConfigError::Observable)?;
        }
        self.build_map()?;
        WeightFunction::new(self.weight.clone())?;
        Ok(())
    }

    /// Canonical serialization used for digests and embedding.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        // the output location does not change any result
        copy.output = None;
        serde_json::to_string(&copy).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    pub fn build_map(&self) -> Result<MapSystem, ConfigError> {
        let map = MapSystem::build(&self.map.id, &self.map.params)?;
        let hole = match &self.hole {
            HoleSpec::Default => return Ok(map),
            HoleSpec::Empty => Hole::Empty,
            HoleSpec::Intervals { intervals } => Hole::Intervals {
                intervals: intervals.clone(),
            },
            HoleSpec::Balls { centers, radius } => Hole::Balls {
                centers: centers.clone(),
                radius: *radius,
            },
            HoleSpec::Attractor { radius } => Hole::around_attractor(&map, *radius)?,
        };
        Ok(map.with_hole(hole))
    }

    pub fn weight(&self) -> WeightFunction {
        let mut w = WeightFunction::new(self.weight.clone()).expect("validated weight");
        w.holder_note = "from experiment config".into();
        w
    }

    /// Resolution used at the `i`-th epsilon.
    pub fn resolution(&self, i: usize) -> usize {
        let res = &self.discretization.resolutions;
        if res.len() == 1 {
            res[0]
        } else {
            res[i]
        }
    }

    /// Coarsest resolution: the common partition for distances.
    pub fn common_resolution(&self) -> usize {
        *self.discretization.resolutions.iter().min().expect("validated")
    }

    pub fn observables(&self) -> Vec<Observable> {
        self.particles
            .observables
            .iter()
            .map(|o| o.parse().expect("validated observable"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        seed = 3
        [map]
        id = "doubling"
        [hole]
        kind = "intervals"
        intervals = [[0.5, 0.75]]
        [discretization]
        resolutions = [256]
        epsilons = [0.1, 0.01]
    "#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.mode, Mode::Global);
        assert_eq!(cfg.weight, WeightKind::Constant { value: 0.0 });
        assert_eq!(cfg.regions.depth, 20);
        assert_eq!(cfg.resolution(1), 256);
        assert!(cfg.build_map().unwrap().in_hole([0.6, 0.0]));
    }

    #[test]
    fn rejects_bad_lists() {
        let ascending = BASE.replace("[0.1, 0.01]", "[0.01, 0.1]");
        assert!(matches!(ExperimentConfig::from_toml(&ascending), Err(ConfigError::Epsilons)));
        let negative = BASE.replace("[0.1, 0.01]", "[0.1, -0.01]");
        assert!(matches!(ExperimentConfig::from_toml(&negative), Err(ConfigError::Epsilons)));
        let odd = BASE.replace("[256]", "[250]");
        assert!(matches!(ExperimentConfig::from_toml(&odd), Err(ConfigError::Resolution(250))));
        let count = BASE.replace("[256]", "[256, 512, 1024]");
        assert!(matches!(ExperimentConfig::from_toml(&count), Err(ConfigError::ResolutionCount { .. })));
        let unknown = BASE.replace("seed = 3", "seed = 3\nbogus = 1");
        assert!(matches!(ExperimentConfig::from_toml(&unknown), Err(ConfigError::Parse(_))));
        let class = BASE.replace("seed = 3", "seed = 3\nclass = 0");
        assert!(matches!(ExperimentConfig::from_toml(&class), Err(ConfigError::ClassInGlobalMode)));
    }

    #[test]
    fn digest_ignores_output_location() {
        let a = ExperimentConfig::from_toml(BASE).unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.digest(), b.digest());
        b.seed = 4;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn attractor_hole_and_weight_family() {
        let text = r#"
            [map]
            id = "logistic"
            params = { a = 3.83 }
            [hole]
            kind = "attractor"
            radius = 0.001
            [weight]
            kind = "log_derivative"
            t = 1.0
            [discretization]
            resolutions = [1024]
            epsilons = [0.001]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let map = cfg.build_map().unwrap();
        assert!(map.in_hole([0.504666, 0.0]));
        assert!(!map.in_hole([0.0, 0.0]));
        assert_eq!(cfg.weight().eval(&map, [0.3, 0.0]), 0.0);
    }
}
