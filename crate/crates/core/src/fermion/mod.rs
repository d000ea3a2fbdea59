//! Free-fermion form of the driven spin chain.
//!
//! The Ising chain (`J_y = 0`) evolves through a real orthogonal propagator on
//! the `2n` Majorana operators; the XX chain (`J_x = J_y`) conserves particle
//! number and evolves through an `n×n` unitary on the single-particle sector.

pub mod chain;
pub mod gaussian;
pub mod generator;
pub mod propagator;
pub mod single_particle;
pub mod spectrum;

pub use chain::{Boundary, ChainParams, DriveField};
pub use gaussian::{
    covariance_from_occupations, evolve_covariance, mode_pair_density, sigma_z_profile, state_energy, CovarianceMatrix,
    SIGMA_Z_SIGN,
};
pub use generator::{
    build_generator, build_majorana_generator, build_xx_generator, Generator, MajoranaGenerator, XXGenerator, C64,
};
pub use propagator::{
    evolve_propagator, project_orthogonal, project_unitary, DefectStats, Propagator, PropagatorKind, PropagatorMatrix,
    PropagatorStepper,
};
pub use single_particle::{
    column_densities, density_metrics, density_metrics_from_weights, evolve_wavefunction, localized_eigenstate,
    DensityMetrics, LocalizationInfo, Selector, WavefunctionState,
};
pub use spectrum::{
    analytic_dispersion, eigenmode_decomposition, instantaneous_spectrum, majorana_spectrum, xx_spectrum, EigenModes,
    SpectrumKind, SpectrumSnapshot,
};
