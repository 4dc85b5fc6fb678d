//! Numerics for absorbing, weighted Markov processes generated by noisy
//! expanding maps with holes.
//!
//! The pipeline is:
//!
//! 1. [`dynamics`]: a deterministic map `T`, its hole `U`, a weight `φ` and a
//!    uniform cell partition of the state space.
//! 2. [`noise`]: additive uniform perturbations `T(x) + ω`, `ω ∈ [-ε, ε]^m`.
//! 3. [`operator`]: the Ulam discretization of the annealed weighted Koopman
//!    operator `P_ε f = e^φ E[f(T(x) + ω) 1_alive]` and its volume-weighted dual.
//! 4. [`spectral`]: growth rate `λ_ε`, quasi-stationary density `m_ε`, right
//!    eigenfunction `g_ε`, period and cyclic classes, and the quasi-ergodic
//!    measure `ν_ε = g_ε m_ε`.
//! 5. [`regions`]: the recurrent/transient decomposition of the survivor
//!    cover and its condensation DAG.
//! 6. [`oracle`]: exact finite-matrix ground truth and thermodynamic formalism
//!    on symbolic Markov models.
//! 7. [`simulate`]: Feynman–Kac particle estimates of conditioned Birkhoff
//!    averages.

pub mod dynamics;
pub mod graph;
pub mod io;
pub mod noise;
pub mod operator;
pub mod oracle;
pub mod regions;
pub mod simulate;
pub mod sparse;
pub mod spectral;
pub mod wasserstein;

pub use dynamics::{CellPartition, Hole, MapSystem, StateSpace, WeightFunction};
pub use noise::NoiseKernel;
pub use operator::{DualOperator, UlamOperator};
pub use spectral::{QuasiErgodicMeasure, SpectralTriple};

/// A point of the state space. One-dimensional systems use the first slot
/// and keep the second at zero.
pub type State = [f64; 2];
