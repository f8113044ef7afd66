//! Numerical toolkit for the hydrodynamic limit of Vicsek-type alignment
//! models with density-dependent alignment rate and noise.
//!
//! The crate computes the macroscopic coefficients `c₁, c̃₁, c₂, c₃, λ` from
//! generalized collisional invariants, their small and large concentration
//! expansions, the hyperbolicity structure of the resulting system, and
//! carries a particle simulator and a 1D finite-volume solver to check the
//! theory against.

pub mod asymptotics;
pub mod coefficients;
pub mod error;
pub mod gci;
pub mod hyperbolicity;
pub mod interp;
pub mod kernels;
pub mod macro_solver;
pub mod model;
pub mod particle_sim;
pub mod quad;
pub mod vmf;

pub use coefficients::{coefficient_set, tilde_average, turning_coefficients_2d, CoefficientSet, TurningCoefficients};
pub use error::{Error, Result};
pub use gci::{gci_2d_closed, gci_2d_turning, solve_gci, GciMethod, GciSolution, TurningProfile};
pub use hyperbolicity::{classify, eigenvalues, region_map, EigenTriple, HyperbolicityMap, HyperbolicityVerdict};
pub use kernels::{kernel_moments, normalize_density_kernel, KernelMoments, KernelSpec};
pub use model::{DensityFunction, DensityLaw, ModelParams};
pub use vmf::{c1, moment_identities, vmf_average, QuadRule, QuadSpec};
pub use asymptotics::{compute_g, compute_h, series_c1, AsymptoticSeries, PolyBasis1mX, Regime};
pub use macro_solver::{solve_1d, CoefficientTable, MacroConfig, MacroRun, MacroState1D, NonHyperbolicPolicy};
pub use particle_sim::{equilibrium_gof, run_homogeneous, run_spatial, step, ParticleState, SimConfig};
