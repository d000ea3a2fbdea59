use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::fermion::DriveField;
use crate::oscillator::PhaseTrajectory;

/// Time-dependent transverse field `g_i(t) = G cos θ_i(t)` read off a trajectory.
pub struct Drive<'a> {
    traj: &'a PhaseTrajectory,
    g_amp: f64,
    buf: RefCell<Vec<f64>>,
}

pub fn make_drive(traj: &PhaseTrajectory, g_amp: f64) -> Result<Drive<'_>> {
    if !g_amp.is_finite() {
        return Err(Error::invalid(format!("drive amplitude must be finite, got {g_amp}")));
    }
    Ok(Drive { traj, g_amp, buf: RefCell::new(vec![0.0; traj.n()]) })
}

impl Drive<'_> {
    pub fn at(&self, t: f64) -> Result<DriveField> {
        let mut buf = self.buf.borrow_mut();
        self.traj.sample_into(t, &mut buf)?;
        Ok(DriveField::from_phases(t, self.g_amp, &buf))
    }

    pub fn span(&self) -> (f64, f64) {
        (self.traj.start(), self.traj.end())
    }

    pub fn amplitude(&self) -> f64 {
        self.g_amp
    }
}
