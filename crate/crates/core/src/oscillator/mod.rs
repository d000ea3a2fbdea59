//! Classical oscillator networks (Kuramoto and Stuart-Landau) and their diagnostics.

pub mod diagnostics;
pub mod dynamics;
pub mod integrate;
pub mod network;

pub use diagnostics::{
    circular_stats, detect_sync_onset, detect_wave_onset, least_squares_slope, order_parameter, order_parameter_series,
    wave_profile, wrap_angle, WaveProfile,
};
pub use dynamics::{kuramoto_rhs, stuart_landau_rhs, DriveModel, PhaseState, SLState};
pub use integrate::{integrate, sample_phases, InitialState, PhaseTrajectory, TrajectoryMeta};
pub use network::{
    build_all_to_all, build_zigzag, build_zigzag_with_delay_sign, random_initial_phases, FrequencySpec, NetworkSpec,
};
