//! One pipeline pass per noise amplitude, and the sweep over a list of them.
//!
//! A pass assembles `P_ε` on the cells outside the hole, builds the region
//! graph on a dilated survivor cover, solves for the spectral triple (on the
//! whole active set in global mode, on one class in local mode) and forms
//! `ν_ε`. Sweeps run ε in the given (descending) order, warm-starting each
//! solve from the previous triple.

use std::fs;
use std::io;
use std::path::Path;

use qemlab::dynamics::{cells_outside_hole, survivor_cells, CellPartition, MapSystem, WeightFunction};
use qemlab::io::{fmt_f64, sha256_hex};
use qemlab::noise::{NoiseError, NoiseKernel};
use qemlab::operator::{assemble_with, AssemblyOptions, OperatorError, UlamOperator};
use qemlab::oracle::OracleError;
use qemlab::regions::{build_regions, survivor_cover, RegionChecks, RegionError, RegionGraph, RegionOptions, RegionSummary};
use qemlab::simulate::{run_conditioned, ConditionedEstimate, InitialLaw, MapProcess, ParticleSettings, SimulateError};
use qemlab::spectral::{quasi_ergodic, solve_triple_with, QuasiErgodicMeasure, SolveOptions, SpectralError, SpectralTriple};
use qemlab::wasserstein::w1_cells;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, Mode};
use crate::manifest::Manifest;
use crate::observable::Observable;
use crate::reference::{build_reference, Reference, ReferenceSummary};

/// Files written by [`Pass::write`].
pub const PASS_FILES: [&str; 6] = ["triple.json", "g.csv", "m.csv", "nu.csv", "regions.dot", "regions.json"];

/// Monotonicity slack when checking that W1 decreases.
pub const W1_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error("class {0} does not exist")]
    NoSuchClass(usize),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// Everything one pass produces.
pub struct Pass {
    pub epsilon: f64,
    pub partition: CellPartition,
    pub operator: UlamOperator,
    pub regions: RegionGraph,
    /// Class the solve was restricted to (local mode).
    pub restricted_class: Option<usize>,
    pub triple: SpectralTriple,
    pub nu: QuasiErgodicMeasure,
    pub checks: RegionChecks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub resolution: usize,
    pub lambda: f64,
    pub log_lambda: f64,
    pub lambda_dual: f64,
    pub period: usize,
    pub n_classes: usize,
    pub dominant_class: usize,
    pub recurrent_classes: Vec<usize>,
    /// Growth rate of the operator restricted to each class.
    pub class_lambda: Vec<f64>,
    /// `ν_ε` mass carried by each class.
    pub class_mass: Vec<f64>,
    pub restricted_class: Option<usize>,
    pub w1_distance_to_reference: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub near_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub rows: Vec<SweepRow>,
    pub reference: Option<ReferenceSummary>,
    pub converged: bool,
    pub final_gap: Option<f64>,
    pub w1_decreasing: Option<bool>,
    pub convergence_rule: String,
    /// Set when a stage failed; rows hold everything finished before it.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub observable: String,
    pub estimate: ConditionedEstimate,
    /// `∫ h dν_ε` from the spectral pipeline.
    pub spectral: f64,
    pub difference: f64,
    /// `|difference| ≤ 3 stderr`.
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleReport {
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub row: SweepRow,
    pub regions: RegionSummary,
    pub checks: RegionChecks,
    pub monte_carlo: Option<Vec<McCheck>>,
}

/// Map, weight and config for a run.
pub struct Setup {
    pub config: ExperimentConfig,
    pub map: MapSystem,
    pub weight: WeightFunction,
}

impl Setup {
    pub fn new(config: ExperimentConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let map = config.build_map()?;
        let weight = config.weight();
        Ok(Setup { config, map, weight })
    }

    pub fn partition(&self, resolution: usize) -> Result<CellPartition, PipelineError> {
        CellPartition::new(*self.map.space(), resolution).map_err(|e| ConfigError::from(e).into())
    }

    /// Resolution for `epsilon`: its own entry if listed, else the finest.
    pub fn resolution_for(&self, epsilon: f64) -> usize {
        let eps = &self.config.discretization.epsilons;
        match eps.iter().position(|&e| e == epsilon) {
            Some(i) => self.config.resolution(i),
            None => *self.config.discretization.resolutions.iter().max().expect("validated"),
        }
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.config.solver.tol,
            max_iter: self.config.solver.max_iter,
            dual_tol: self.config.solver.dual_tol,
            degeneracy_tol: self.config.regions.degeneracy_tol,
        }
    }

    pub fn operator(&self, epsilon: f64, partition: &CellPartition) -> Result<UlamOperator, PipelineError> {
        let kernel = NoiseKernel::for_map(&self.map, epsilon)?;
        let active = cells_outside_hole(&self.map, partition);
        let options = AssemblyOptions {
            nodes_per_axis: self.config.discretization.nodes_per_axis,
        };
        Ok(assemble_with(&self.map, &kernel, &self.weight, partition, &active, options)?)
    }

    pub fn regions(&self, partition: &CellPartition, op: &UlamOperator) -> Result<RegionGraph, PipelineError> {
        let r = &self.config.regions;
        let h = (0..partition.dim()).map(|a| partition.cell_width(a)).fold(f64::INFINITY, f64::min);
        let dilation = (r.delta / h).ceil() as usize + r.dilation;
        let cover = survivor_cover(&self.map, partition, r.depth, dilation, op.cells());
        let min_phi = cover
            .iter()
            .map(|&c| self.weight.eval(&self.map, partition.center(c)))
            .filter(|v| !v.is_nan())
            .fold(f64::INFINITY, f64::min);
        let options = RegionOptions {
            escape_floor: r.escape_floor,
            min_phi: if min_phi.is_finite() { min_phi } else { f64::MIN },
            degeneracy_tol: r.degeneracy_tol,
        };
        Ok(build_regions(op, partition, &cover, options)?)
    }

    /// One full pass at `epsilon`.
    pub fn pass(&self, epsilon: f64, warm: Option<&SpectralTriple>) -> Result<Pass, PipelineError> {
        let partition = self.partition(self.resolution_for(epsilon))?;
        let operator = self.operator(epsilon, &partition)?;
        let regions = self.regions(&partition, &operator)?;
        let (restricted_class, solved) = match self.config.mode {
            Mode::Global => (None, None),
            Mode::Local => {
                let class = self.config.class.unwrap_or(regions.dominant);
                if class >= regions.n_classes() {
                    return Err(PipelineError::NoSuchClass(class));
                }
                (Some(class), Some(regions.restrict(&operator, class)?))
            }
        };
        let target = solved.as_ref().unwrap_or(&operator);
        let triple = solve_triple_with(target, self.solve_options(), warm)?;
        let nu = quasi_ergodic(&triple)?;
        let checks = regions.check(&operator, restricted_class.is_none().then_some(&triple));
        Ok(Pass {
            epsilon,
            partition,
            operator,
            regions,
            restricted_class,
            triple,
            nu,
            checks,
        })
    }
}

impl Pass {
    pub fn row(&self, reference: Option<(&Reference, &CellPartition)>) -> SweepRow {
        let t = &self.triple;
        let class_mass = (0..self.regions.n_classes())
            .map(|c| self.nu.mass_on(&self.regions.class_cells(c)))
            .collect();
        SweepRow {
            epsilon: self.epsilon,
            resolution: self.partition.resolution(),
            lambda: t.lambda,
            log_lambda: t.lambda.ln(),
            lambda_dual: t.lambda_dual,
            period: t.period,
            n_classes: self.regions.n_classes(),
            dominant_class: self.regions.dominant,
            recurrent_classes: self.regions.recurrent(),
            class_lambda: self.regions.class_lambda.clone(),
            class_mass,
            restricted_class: self.restricted_class,
            w1_distance_to_reference: reference.map(|(r, common)| {
                w1_cells(common, &self.nu_on(common), &r.on_partition(common))
            }),
            residual: t.residual,
            iterations: t.iterations,
            near_degenerate: t.near_degenerate || self.regions.near_degenerate,
        }
    }

    /// `ν_ε` aggregated onto a coarser partition of the same space.
    pub fn nu_on(&self, common: &CellPartition) -> Vec<(usize, f64)> {
        let f = self.partition.resolution() / common.resolution();
        let mut acc = vec![0.0; common.n_cells()];
        for (&c, &w) in self.nu.cells.iter().zip(&self.nu.weights) {
            let [ix, iy] = self.partition.axis_indices(c);
            let target = if common.dim() == 1 { common.index(ix / f, 0) } else { common.index(ix / f, iy / f) };
            acc[target] += w;
        }
        acc.into_iter().enumerate().filter(|(_, w)| *w != 0.0).collect()
    }

    /// `∫ h dν_ε` with exact cell averages of `h`.
    pub fn integrate(&self, h: &Observable) -> f64 {
        let hv: Vec<f64> = self.nu.cells.iter().map(|&c| h.cell_average(&self.partition, c)).collect();
        self.nu.integrate(&hv)
    }

    /// Triple, `ν`, and region artifacts into `dir`; returns the file names.
    pub fn write(&self, dir: &Path) -> Result<Vec<String>, PipelineError> {
        fs::create_dir_all(dir)?;
        self.triple.write(dir)?;
        self.nu.write(dir)?;
        self.write_regions(dir)?;
        Ok(PASS_FILES.iter().map(|f| f.to_string()).collect())
    }

    pub fn write_regions(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("regions.dot"), self.regions.to_dot())?;
        #[derive(Serialize)]
        struct RegionsJson<'a> {
            summary: RegionSummary,
            checks: &'a RegionChecks,
            classes: Vec<Vec<usize>>,
            labels: &'a [qemlab::regions::Label],
            edges: &'a [(usize, usize)],
        }
        let classes = (0..self.regions.n_classes()).map(|c| self.regions.class_cells(c)).collect();
        let json = RegionsJson {
            summary: self.regions.summary(),
            checks: &self.checks,
            classes,
            labels: &self.regions.labels,
            edges: &self.regions.edges,
        };
        write_json(&dir.join("regions.json"), &json)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn verdict(report: &mut SweepReport, reference_tol: f64) {
    let rows = &report.rows;
    let Some(last) = rows.last() else {
        return;
    };
    match &report.reference {
        Some(r) => {
            let gap = (last.log_lambda - r.pressure).abs();
            let tail: Vec<f64> = rows.iter().rev().take(3).rev().filter_map(|r| r.w1_distance_to_reference).collect();
            let decreasing = tail.windows(2).all(|w| w[1] <= w[0] + W1_SLACK);
            report.final_gap = Some(gap);
            report.w1_decreasing = Some(decreasing);
            report.converged = report.error.is_none() && gap <= reference_tol && decreasing;
            report.convergence_rule = format!(
                "|log lambda - pressure| <= {reference_tol:e} at the final epsilon and W1 to the reference non-increasing (slack {W1_SLACK:e}) over the final three epsilons"
            );
        }
        None => {
            let gap = (rows.len() >= 2).then(|| (last.log_lambda - rows[rows.len() - 2].log_lambda).abs());
            report.final_gap = gap;
            report.converged = report.error.is_none() && gap.is_some_and(|g| g <= reference_tol);
            report.convergence_rule = format!("no oracle reference: |log lambda| change over the final two epsilons <= {reference_tol:e}");
        }
    }
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("epsilon,resolution,lambda,log_lambda,period,n_classes,dominant_class,w1_distance_to_reference\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.epsilon),
            r.resolution,
            fmt_f64(r.lambda),
            fmt_f64(r.log_lambda),
            r.period,
            r.n_classes,
            r.dominant_class,
            r.w1_distance_to_reference.map(fmt_f64).unwrap_or_default()
        ));
    }
    out
}

fn persist_sweep(report: &SweepReport, out: &Path, mut files: Vec<String>) -> Result<(), PipelineError> {
    fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), report)?;
    fs::write(out.join("sweep.csv"), sweep_csv(&report.rows))?;
    files.extend(["report.json".to_string(), "sweep.csv".to_string()]);
    Manifest::collect(out, "sweep", &report.config_digest, &files)?.write(out)?;
    Ok(())
}

/// Runs every ε in order. Failures are recorded in `error`; the partial
/// report and manifest are still written when `out` is given.
pub fn run_sweep(config: &ExperimentConfig, out: Option<&Path>) -> SweepReport {
    let mut report = SweepReport {
        config: config.clone(),
        config_digest: config.digest(),
        rows: Vec::new(),
        reference: None,
        converged: false,
        final_gap: None,
        w1_decreasing: None,
        convergence_rule: String::new(),
        error: None,
    };
    let mut files = Vec::new();
    if let Err(e) = sweep_into(config, out, &mut report, &mut files) {
        report.error = Some(e.to_string());
    }
    verdict(&mut report, config.reference.tol);
    if let Some(dir) = out {
        if let Err(e) = persist_sweep(&report, dir, files) {
            report.error.get_or_insert_with(|| e.to_string());
        }
    }
    report
}

fn sweep_into(
    config: &ExperimentConfig,
    out: Option<&Path>,
    report: &mut SweepReport,
    files: &mut Vec<String>,
) -> Result<(), PipelineError> {
    let setup = Setup::new(config.clone())?;
    let common = setup.partition(config.common_resolution())?;
    let reference = build_reference(config)?;
    report.reference = reference.as_ref().map(|r| r.summary.clone());
    if let (Some(r), Some(dir)) = (&reference, out) {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("reference.json"), &r.state)?;
        write_json(&dir.join("reference_model.json"), &r.model)?;
        files.extend(["reference.json".to_string(), "reference_model.json".to_string()]);
    }
    let mut warm: Option<SpectralTriple> = None;
    for (i, &eps) in config.discretization.epsilons.iter().enumerate() {
        let pass = setup.pass(eps, warm.as_ref())?;
        report.rows.push(pass.row(reference.as_ref().map(|r| (r, &common))));
        if let Some(dir) = out {
            let sub = format!("eps_{i:02}");
            files.extend(pass.write(&dir.join(&sub))?.into_iter().map(|f| format!("{sub}/{f}")));
        }
        warm = Some(pass.triple);
    }
    Ok(())
}

/// Monte Carlo cross-check of `∫ h dν_ε` for the configured observables.
pub fn monte_carlo(setup: &Setup, pass: &Pass, seed: u64) -> Result<Vec<(McCheck, String)>, PipelineError> {
    let p = &setup.config.particles;
    let kernel = NoiseKernel::for_map(&setup.map, pass.epsilon)?;
    let start = survivor_cells(&setup.map, &pass.partition, p.initial_depth);
    if start.is_empty() {
        return Err(SimulateError::EmptyInitialLaw.into());
    }
    let process = MapProcess {
        map: &setup.map,
        kernel,
        weight: &setup.weight,
        initial: InitialLaw::UniformCells {
            partition: pass.partition.clone(),
            cells: start,
        },
    };
    let settings = ParticleSettings {
        horizon: p.horizon,
        particles: p.particles,
        islands: p.islands,
        seed,
        ess_floor: p.ess_floor,
    };
    let mut out = Vec::new();
    for h in setup.config.observables() {
        let f = move |x: &qemlab::State| h.eval(x);
        let run = run_conditioned(&process, &f, &settings)?;
        let spectral = pass.integrate(&h);
        let difference = run.estimate.value - spectral;
        let check = McCheck {
            observable: h.to_string(),
            agrees: difference.abs() <= 3.0 * run.estimate.stderr,
            estimate: run.estimate.clone(),
            spectral,
            difference,
        };
        out.push((check, run.trace_csv()));
    }
    Ok(out)
}

fn file_stem(observable: &str) -> String {
    observable.replace(':', "_")
}

/// One pass at `epsilon` with every artifact under `out`.
pub fn run_single(config: &ExperimentConfig, epsilon: f64, out: &Path) -> Result<SingleReport, PipelineError> {
    let setup = Setup::new(config.clone())?;
    fs::create_dir_all(out)?;
    let pass = setup.pass(epsilon, None)?;
    pass.operator.write_dump(out, "operator")?;
    let mut files = pass.write(out)?;
    files.extend(["operator.csv".to_string(), "operator.json".to_string()]);
    let reference = build_reference(config)?;
    let common = setup.partition(config.common_resolution())?;
    let row = pass.row(reference.as_ref().map(|r| (r, &common)));
    let monte_carlo = if config.particles.enabled {
        let checks = monte_carlo(&setup, &pass, config.seed)?;
        let mut list = Vec::new();
        for (check, trace) in checks {
            let name = format!("mc_{}.csv", file_stem(&check.observable));
            fs::write(out.join(&name), trace)?;
            files.push(name);
            list.push(check);
        }
        Some(list)
    } else {
        None
    };
    let report = SingleReport {
        config: config.clone(),
        config_digest: config.digest(),
        row,
        regions: pass.regions.summary(),
        checks: pass.checks,
        monte_carlo,
    };
    write_json(&out.join("single.json"), &report)?;
    files.push("single.json".into());
    Manifest::collect(out, "single", &report.config_digest, &files)?.write(out)?;
    Ok(report)
}

/// Region graph only.
pub fn run_regions(config: &ExperimentConfig, epsilon: f64, out: &Path) -> Result<RegionSummary, PipelineError> {
    let setup = Setup::new(config.clone())?;
    let partition = setup.partition(setup.resolution_for(epsilon))?;
    let op = setup.operator(epsilon, &partition)?;
    let regions = setup.regions(&partition, &op)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("regions.dot"), regions.to_dot())?;
    let checks = regions.check(&op, None);
    let summary = regions.summary();
    #[derive(Serialize)]
    struct Out<'a> {
        epsilon: f64,
        resolution: usize,
        summary: &'a RegionSummary,
        checks: RegionChecks,
        classes: Vec<Vec<usize>>,
    }
    let classes = (0..regions.n_classes()).map(|c| regions.class_cells(c)).collect();
    write_json(
        &out.join("regions.json"),
        &Out {
            epsilon,
            resolution: partition.resolution(),
            summary: &summary,
            checks,
            classes,
        },
    )?;
    let files = ["regions.dot".to_string(), "regions.json".to_string()];
    Manifest::collect(out, "regions", &config.digest(), &files)?.write(out)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub config_digest: String,
    pub epsilon: f64,
    pub checks: Vec<McCheck>,
}

/// Monte Carlo only, compared with the spectral pass at `epsilon`.
pub fn run_simulate(config: &ExperimentConfig, epsilon: f64, out: &Path) -> Result<SimulateReport, PipelineError> {
    let setup = Setup::new(config.clone())?;
    let pass = setup.pass(epsilon, None)?;
    fs::create_dir_all(out)?;
    let mut checks = Vec::new();
    let mut files = vec!["simulate.json".to_string()];
    for (check, trace) in monte_carlo(&setup, &pass, config.seed)? {
        let stem = format!("mc_{}", file_stem(&check.observable));
        fs::write(out.join(format!("{stem}.csv")), trace)?;
        write_json(&out.join(format!("{stem}.json")), &check.estimate)?;
        files.extend([format!("{stem}.csv"), format!("{stem}.json")]);
        checks.push(check);
    }
    let report = SimulateReport {
        config_digest: config.digest(),
        epsilon,
        checks,
    };
    write_json(&out.join("simulate.json"), &report)?;
    Manifest::collect(out, "simulate", &report.config_digest, &files)?.write(out)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub config_digest: String,
    pub reference: Option<ReferenceSummary>,
    /// Entropy of the `ψ = 0` equilibrium state of the same model, i.e. the
    /// topological entropy of the survivor set.
    pub topological_entropy: Option<f64>,
    /// `|topological_entropy - log((1+√5)/2)|` for logistic models, whose
    /// repeller codes as the golden-mean shift.
    pub entropy_vs_log_golden: Option<f64>,
}

pub fn run_oracle(config: &ExperimentConfig, out: &Path) -> Result<OracleReport, PipelineError> {
    let reference = build_reference(config)?;
    fs::create_dir_all(out)?;
    let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    let topological_entropy = match &reference {
        Some(r) => {
            let mut flat = r.model.clone();
            flat.psi.iter_mut().for_each(|p| *p = 0.0);
            Some(qemlab::oracle::pressure(&flat)?.entropy)
        }
        None => None,
    };
    let report = OracleReport {
        config_digest: config.digest(),
        entropy_vs_log_golden: reference
            .as_ref()
            .filter(|r| r.summary.model == "logistic_symbolic")
            .and(topological_entropy)
            .map(|h| (h - golden).abs()),
        topological_entropy,
        reference: reference.as_ref().map(|r| r.summary.clone()),
    };
    let mut files = vec!["oracle.json".to_string()];
    if let Some(r) = &reference {
        write_json(&out.join("equilibrium_state.json"), &r.state)?;
        write_json(&out.join("model.json"), &r.model)?;
        files.extend(["equilibrium_state.json".to_string(), "model.json".to_string()]);
    }
    write_json(&out.join("oracle.json"), &report)?;
    Manifest::collect(out, "oracle", &report.config_digest, &files)?.write(out)?;
    Ok(report)
}

/// Digest of a file's bytes, for tests and tooling.
pub fn file_digest(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
