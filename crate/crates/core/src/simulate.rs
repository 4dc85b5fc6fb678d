//! Feynman–Kac particle estimates for the weighted absorbed process.
//!
//! Particles carry log-weights accumulating `S_n φ`; hard killing (hole or
//! leaving the space) sets the weight to zero. Whenever the effective sample
//! size drops below half the particle count the population is resampled
//! multinomially and the mean weight is folded into `log_norm`, which then
//! tracks `n log λ`. Each particle also carries the running Birkhoff sum of
//! the observable along its ancestral line, so the self-normalized weighted
//! mean of those sums estimates the conditioned time average.
//!
//! Particles are split into independent islands seeded `seed + i`, run in
//! parallel and merged in island order with weights given by their own
//! normalizing constants. The standard error is a bootstrap over islands.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{CellPartition, MapSystem, WeightFunction};
use crate::io::fmt_f64;
use crate::noise::{sample_step, NoiseKernel, Step};
use crate::State;

pub type SimRng = ChaCha8Rng;

/// Bootstrap resamples used for the standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 400;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("need at least 100 particles and 2 islands, got {particles} particles in {islands} islands")]
    TooFewParticles { particles: usize, islands: usize },
    #[error("every particle was absorbed by step {step}")]
    Extinction {
        step: usize,
        /// Number of particle deaths at each step.
        deaths: Vec<usize>,
    },
    #[error("initial law is empty")]
    EmptyInitialLaw,
}

/// A killed Markov process with a log-weight `φ`.
pub trait Process: Sync {
    type State: Clone + Send + Sync;

    fn initial(&self, rng: &mut SimRng) -> Self::State;

    fn phi(&self, x: &Self::State) -> f64;

    /// One transition; `None` when the particle is absorbed.
    fn step(&self, x: &Self::State, rng: &mut SimRng) -> Option<Self::State>;
}

/// Where particles start.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    Point(State),
    /// Uniform over the union of the given cells.
    UniformCells { partition: CellPartition, cells: Vec<usize> },
}

/// `T(x) + ω` with the hole, weighted by `φ`.
pub struct MapProcess<'a> {
    pub map: &'a MapSystem,
    pub kernel: NoiseKernel,
    pub weight: &'a WeightFunction,
    pub initial: InitialLaw,
}

impl Process for MapProcess<'_> {
    type State = State;

    fn initial(&self, rng: &mut SimRng) -> State {
        match &self.initial {
            InitialLaw::Point(x) => *x,
            InitialLaw::UniformCells { partition, cells } => {
                let c = cells[rng.random_range(0..cells.len())];
                let b = partition.cell_bounds(c);
                let mut x = [0.0; 2];
                for (axis, coord) in x.iter_mut().enumerate().take(partition.dim()) {
                    *coord = b[axis].0 + rng.random::<f64>() * (b[axis].1 - b[axis].0);
                }
                x
            }
        }
    }

    fn phi(&self, x: &State) -> f64 {
        self.weight.eval(self.map, *x)
    }

    fn step(&self, x: &State, rng: &mut SimRng) -> Option<State> {
        match sample_step(self.map, &self.kernel, *x, rng) {
            Step::Alive(y) => Some(y),
            Step::Absorbed => None,
        }
    }
}

/// A finite sub-stochastic chain: from `i` move to `j` with probability
/// `q[i][j]`, die with the remaining probability.
pub struct ChainProcess {
    pub q: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub initial: Vec<f64>,
}

impl Process for ChainProcess {
    type State = usize;

    fn initial(&self, rng: &mut SimRng) -> usize {
        let u: f64 = rng.random();
        let total: f64 = self.initial.iter().sum();
        let mut acc = 0.0;
        for (i, p) in self.initial.iter().enumerate() {
            acc += p / total;
            if u < acc {
                return i;
            }
        }
        self.initial.len() - 1
    }

    fn phi(&self, x: &usize) -> f64 {
        self.phi[*x]
    }

    fn step(&self, x: &usize, rng: &mut SimRng) -> Option<usize> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, p) in self.q[*x].iter().enumerate() {
            acc += p;
            if u < acc {
                return Some(j);
            }
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSettings {
    /// Horizon `n`.
    pub horizon: usize,
    /// Total particle count `N`, split evenly across islands.
    pub particles: usize,
    pub islands: usize,
    pub seed: u64,
    /// Minimum final effective sample size for a reliable estimate.
    pub ess_floor: f64,
}

impl Default for ParticleSettings {
    fn default() -> Self {
        ParticleSettings {
            horizon: 100,
            particles: 100_000,
            islands: 32,
            seed: 0,
            ess_floor: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionedEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub particles: usize,
    pub lambda_hat: f64,
    pub log_norm: f64,
    pub ess: f64,
    pub islands: usize,
    /// Final effective sample size reached the configured floor.
    pub reliable: bool,
}

/// One row of the per-step trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub lambda_hat: f64,
    pub estimate: f64,
    pub ess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionedRun {
    pub estimate: ConditionedEstimate,
    pub trace: Vec<TraceRow>,
}

impl ConditionedRun {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("n,lambda_hat_running,estimate_running,ess\n");
        for r in &self.trace {
            out.push_str(&format!("{},{},{},{}\n", r.n, fmt_f64(r.lambda_hat), fmt_f64(r.estimate), fmt_f64(r.ess)));
        }
        out
    }
}

/// Per-island state after each step: `(log Z_i, weighted mean of sums, ess)`.
struct IslandTrace {
    steps: Vec<(f64, f64, f64)>,
    deaths: Vec<usize>,
    extinct_at: Option<usize>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn run_island<P: Process>(
    process: &P,
    h: &(dyn Fn(&P::State) -> f64 + Sync),
    count: usize,
    horizon: usize,
    seed: u64,
) -> IslandTrace {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut pos: Vec<P::State> = (0..count).map(|_| process.initial(&mut rng)).collect();
    let mut logw = vec![0.0f64; count];
    let mut sums = vec![0.0f64; count];
    let mut log_norm = 0.0;
    let mut steps = Vec::with_capacity(horizon);
    let mut deaths = vec![0usize; horizon + 1];
    let mut extinct_at = None;
    for i in 0..horizon {
        for k in 0..count {
            if logw[k] == f64::NEG_INFINITY {
                continue;
            }
            sums[k] += h(&pos[k]);
            logw[k] += process.phi(&pos[k]);
            match process.step(&pos[k], &mut rng) {
                Some(y) => pos[k] = y,
                None => {
                    logw[k] = f64::NEG_INFINITY;
                    deaths[i + 1] += 1;
                }
            }
        }
        let lse = log_sum_exp(logw.iter().copied());
        if lse == f64::NEG_INFINITY {
            extinct_at = Some(i + 1);
            break;
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let s1: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|x| x * x).sum();
        let ess = s1 * s1 / s2;
        let log_z = log_norm + lse - (count as f64).ln();
        let mean_sum = w.iter().zip(&sums).map(|(a, b)| a * b).sum::<f64>() / s1;
        steps.push((log_z, mean_sum / (i + 1) as f64, ess));
        if ess < 0.5 * count as f64 && i + 1 < horizon {
            let dist = WeightedIndex::new(&w).expect("positive total weight");
            let picks: Vec<usize> = (0..count).map(|_| dist.sample(&mut rng)).collect();
            pos = picks.iter().map(|&j| pos[j].clone()).collect();
            sums = picks.iter().map(|&j| sums[j]).collect();
            logw = vec![0.0; count];
            log_norm = log_z;
        }
    }
    IslandTrace {
        steps,
        deaths,
        extinct_at,
    }
}

/// Combines island results `(log Z_j, value_j)` weighted by `Z_j`.
fn combine(parts: &[(f64, f64)]) -> (f64, f64) {
    let lse = log_sum_exp(parts.iter().map(|p| p.0));
    let value = parts
        .iter()
        .filter(|p| p.0 > f64::NEG_INFINITY)
        .map(|p| (p.0 - lse).exp() * p.1)
        .sum();
    (lse - (parts.len() as f64).ln(), value)
}

/// Estimates `E[e^{S_nφ} 1_{τ>n} (1/n) Σ_{i<n} h(X_i)] / E[e^{S_nφ} 1_{τ>n}]`.
pub fn run_conditioned<P: Process>(
    process: &P,
    h: &(dyn Fn(&P::State) -> f64 + Sync),
    settings: &ParticleSettings,
) -> Result<ConditionedRun, SimulateError> {
    if settings.horizon == 0 {
        return Err(SimulateError::ZeroHorizon);
    }
    if settings.particles < 100 || settings.islands < 2 || settings.particles < settings.islands {
        return Err(SimulateError::TooFewParticles {
            particles: settings.particles,
            islands: settings.islands,
        });
    }
    let w = settings.islands;
    let per = settings.particles / w;
    let extra = settings.particles % w;
    let traces: Vec<IslandTrace> = (0..w)
        .into_par_iter()
        .map(|i| {
            let count = per + usize::from(i < extra);
            run_island(process, h, count, settings.horizon, settings.seed.wrapping_add(i as u64))
        })
        .collect();
    let n = settings.horizon;
    // an island that died out contributes Z = 0 from then on
    let at = |t: &IslandTrace, step: usize| -> (f64, f64, f64) {
        t.steps.get(step).copied().unwrap_or((f64::NEG_INFINITY, 0.0, 0.0))
    };
    if traces.iter().all(|t| t.extinct_at.is_some()) {
        let step = traces.iter().filter_map(|t| t.extinct_at).max().unwrap_or(0);
        let mut deaths = vec![0usize; n + 1];
        for t in &traces {
            for (d, x) in deaths.iter_mut().zip(&t.deaths) {
                *d += x;
            }
        }
        return Err(SimulateError::Extinction { step, deaths });
    }
    let mut trace = Vec::with_capacity(n);
    for step in 0..n {
        let parts: Vec<(f64, f64)> = traces.iter().map(|t| {
            let s = at(t, step);
            (s.0, s.1)
        }).collect();
        let (log_z, value) = combine(&parts);
        let ess: f64 = traces.iter().map(|t| at(t, step).2).sum();
        trace.push(TraceRow {
            n: step + 1,
            lambda_hat: (log_z / (step + 1) as f64).exp(),
            estimate: value,
            ess,
        });
    }
    let finals: Vec<(f64, f64)> = traces.iter().map(|t| {
        let s = at(t, n - 1);
        (s.0, s.1)
    }).collect();
    let (log_z, value) = combine(&finals);
    let ess = trace.last().map_or(0.0, |r| r.ess);
    // bootstrap over islands with a stream derived from the seed
    let mut rng = SimRng::seed_from_u64(settings.seed ^ 0x9e37_79b9_7f4a_7c15);
    let boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let pick: Vec<(f64, f64)> = (0..w).map(|_| finals[rng.random_range(0..w)]).collect();
            combine(&pick).1
        })
        .collect();
    let mean = boots.iter().sum::<f64>() / boots.len() as f64;
    let var = boots.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boots.len() - 1) as f64;
    Ok(ConditionedRun {
        estimate: ConditionedEstimate {
            value,
            stderr: var.sqrt(),
            n,
            particles: settings.particles,
            lambda_hat: (log_z / n as f64).exp(),
            log_norm: log_z,
            ess,
            islands: w,
            reliable: ess >= settings.ess_floor,
        },
        trace,
    })
}

/// Fraction of unweighted particles still alive after `0..=n_max` steps.
pub fn survival_curve<P: Process>(process: &P, n_max: usize, particles: usize, seed: u64) -> Vec<f64> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut alive: Vec<P::State> = (0..particles).map(|_| process.initial(&mut rng)).collect();
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    for _ in 0..n_max {
        alive = alive.iter().filter_map(|x| process.step(x, &mut rng)).collect();
        out.push(alive.len() as f64 / particles as f64);
    }
    out
}

/// Survival rate from the least-squares slope of `log S(n)` over the tail
/// where at least `min_count` particles remain, skipping the first fifth.
pub fn survival_rate(curve: &[f64], particles: usize, min_count: usize) -> Option<f64> {
    let floor = min_count as f64 / particles as f64;
    let last = curve.iter().rposition(|&s| s >= floor)?;
    let first = last / 5;
    let pts: Vec<(f64, f64)> = (first..=last).map(|k| (k as f64, curve[k].ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}
