//! Classical network driving the quantum chain: scenarios, drive sampling and runs.

mod drive;
mod run;
mod scenario;

pub use drive::{make_drive, Drive};
pub use run::{
    classical_trajectory, eigenstate_snapshots, eigensystem, run_scenario, AnalysisSettings, Diagnostics,
    EigenSnapshot, InitialInfo, Manifest, ObservableSource, Observables, RunResult, SYNC_THRESHOLD, WAVE_TOLERANCE,
};
pub use scenario::{ChainModel, Evolution, InitialSelector, NetworkConfig, RunSettings, Scenario};
