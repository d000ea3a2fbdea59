use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::network::NetworkSpec;
use crate::error::{Error, Result};

/// Phases `θ_i(t)`, stored unwrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub theta: DVector<f64>,
}

/// Stuart-Landau state in polar form `α_i = r_i e^{iθ_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SLState {
    pub t: f64,
    pub r: DVector<f64>,
    pub theta: DVector<f64>,
}

/// Classical drive dynamics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveModel {
    #[default]
    Kuramoto,
    StuartLandau {
        kappa1: f64,
        kappa2: f64,
    },
}

impl DriveModel {
    pub fn name(&self) -> &'static str {
        match self {
            DriveModel::Kuramoto => "kuramoto",
            DriveModel::StuartLandau { .. } => "stuart_landau",
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let DriveModel::StuartLandau { kappa1, kappa2 } = *self {
            if !kappa1.is_finite() || !kappa2.is_finite() {
                return Err(Error::invalid("kappa parameters must be finite"));
            }
            if kappa2 <= 0.0 {
                return Err(Error::invalid(format!("kappa2 must be positive for a stable limit cycle, got {kappa2}")));
            }
        }
        Ok(())
    }
}

fn check_dim(net: &NetworkSpec, len: usize) -> Result<()> {
    if len != net.n() {
        return Err(Error::invalid(format!("state has {len} oscillators, network has {}", net.n())));
    }
    Ok(())
}

pub(crate) fn kuramoto_rhs_into(net: &NetworkSpec, theta: &[f64], out: &mut [f64]) {
    out.copy_from_slice(net.freqs().as_slice());
    for e in net.edges() {
        out[e.from] += e.k * (theta[e.to] - theta[e.from] + e.beta).sin();
    }
}

/// `θ̇_i = ω_i + Σ_j K_ij sin(θ_j − θ_i + B_ij)`.
pub fn kuramoto_rhs(state: &PhaseState, net: &NetworkSpec) -> Result<DVector<f64>> {
    check_dim(net, state.theta.len())?;
    let mut out = DVector::zeros(net.n());
    kuramoto_rhs_into(net, state.theta.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Writes `[ṙ, θ̇]` into `out` (length `2n`) for the packed state `[r, θ]`.
pub(crate) fn stuart_landau_rhs_into(net: &NetworkSpec, kappa1: f64, kappa2: f64, y: &[f64], out: &mut [f64]) {
    let n = net.n();
    let (r, theta) = y.split_at(n);
    let (dr, dtheta) = out.split_at_mut(n);
    for i in 0..n {
        dr[i] = r[i] * (kappa1 - 2.0 * kappa2 * r[i] * r[i]);
        dtheta[i] = -net.freqs()[i];
    }
    for e in net.edges() {
        let arg = theta[e.to] - theta[e.from] + e.beta;
        dr[e.from] -= r[e.from] * e.k * arg.sin();
        dtheta[e.from] -= e.k * arg.cos();
    }
}

/// Polar-form Stuart-Landau flow:
/// `ṙ_i = r_i(κ1 − 2κ2 r_i²) − r_i Σ_j K_ij sin(θ_j − θ_i + B_ij)`,
/// `θ̇_i = −ω_i − Σ_j K_ij cos(θ_j − θ_i + B_ij)`.
pub fn stuart_landau_rhs(
    state: &SLState,
    net: &NetworkSpec,
    kappa1: f64,
    kappa2: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    DriveModel::StuartLandau { kappa1, kappa2 }.validate()?;
    check_dim(net, state.r.len())?;
    check_dim(net, state.theta.len())?;
    let n = net.n();
    let mut y = Vec::with_capacity(2 * n);
    y.extend_from_slice(state.r.as_slice());
    y.extend_from_slice(state.theta.as_slice());
    let mut out = vec![0.0; 2 * n];
    stuart_landau_rhs_into(net, kappa1, kappa2, &y, &mut out);
    Ok((DVector::from_column_slice(&out[..n]), DVector::from_column_slice(&out[n..])))
}
