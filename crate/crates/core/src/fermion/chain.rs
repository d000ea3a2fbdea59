use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Parameters of the driven XY chain, all in units of `J` (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    pub n: usize,
    pub jx: f64,
    pub jy: f64,
    pub g_amp: f64,
    pub boundary: Boundary,
}

impl ChainParams {
    pub fn ising(n: usize, jx: f64, g_amp: f64) -> Self {
        Self { n, jx, jy: 0.0, g_amp, boundary: Boundary::Open }
    }

    pub fn xx(n: usize, j: f64, g_amp: f64) -> Self {
        Self { n, jx: j, jy: j, g_amp, boundary: Boundary::Open }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("chain needs n >= 2 sites, got {}", self.n)));
        }
        if ![self.jx, self.jy, self.g_amp].iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("chain couplings must be finite"));
        }
        Ok(())
    }
}

/// Site-local transverse field `g_i(t) = G cos θ_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveField {
    pub t: f64,
    pub g: DVector<f64>,
}

impl DriveField {
    pub fn new(t: f64, g: DVector<f64>) -> Self {
        Self { t, g }
    }

    pub fn uniform(t: f64, n: usize, g: f64) -> Self {
        Self { t, g: DVector::from_element(n, g) }
    }

    /// Field from phases: `g_i = amp · cos θ_i`.
    pub fn from_phases(t: f64, amp: f64, theta: &[f64]) -> Self {
        Self { t, g: DVector::from_iterator(theta.len(), theta.iter().map(|th| amp * th.cos())) }
    }
}
