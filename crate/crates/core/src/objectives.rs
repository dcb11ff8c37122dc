//! The two cost functionals: energy `J1` (negative values mean extracted
//! energy) and accumulated dielectric damage `J2`, plus their discrete
//! counterparts read off the augmented state and the smoothed damage
//! integrand used inside the solver.

use crate::config::PlantParams;
use crate::error::{Error, Result};
use crate::plant::{storage, ExtendedState};

/// Energy cost J1 [J] and damage cost J2 [-] of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPair {
    pub j1: f64,
    pub j2: f64,
}

impl CostPair {
    /// Extracted energy reported to users is -J1.
    pub fn extracted_energy(&self) -> f64 {
        -self.j1
    }
}

/// Scalarization weights with w1 + w2 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
}

impl Weights {
    pub fn from_w2(w2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w2) {
            return Err(Error::validation("w2", "must be in [0, 1]"));
        }
        Ok(Weights { w1: 1.0 - w2, w2 })
    }
}

/// How the damage integrand treats the max{.} kink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DamageMode {
    /// `alpha * max(u - u_th, 0)`: used for applied/reported trajectories.
    Exact,
    /// Softplus upper bound `alpha/kappa * ln(1 + exp(kappa (u - u_th)))`:
    /// differentiable, used inside the solver.
    Smoothed { kappa: f64 },
}

/// Damage accumulation rate [1/s] at input `u` [V^2].
pub fn damage_integrand(u: f64, u_th: f64, alpha: f64, mode: DamageMode) -> f64 {
    let x = u - u_th;
    match mode {
        DamageMode::Exact => alpha * x.max(0.0),
        DamageMode::Smoothed { kappa } => {
            let k = kappa * x;
            if k > 30.0 {
                // Linear asymptote; ln(1+e^k) - k < 1e-13 here.
                alpha * x
            } else {
                alpha / kappa * k.exp().ln_1p()
            }
        }
    }
}

/// Derivative of [`damage_integrand`] with respect to `u`.
pub fn damage_integrand_slope(u: f64, u_th: f64, alpha: f64, mode: DamageMode) -> f64 {
    let x = u - u_th;
    match mode {
        DamageMode::Exact => {
            if x > 0.0 {
                alpha
            } else {
                0.0
            }
        }
        DamageMode::Smoothed { kappa } => {
            let k = kappa * x;
            if k > 30.0 {
                alpha
            } else if k < -30.0 {
                alpha * k.exp()
            } else {
                alpha / (1.0 + (-k).exp())
            }
        }
    }
}

/// Discrete costs read off the final augmented state.
pub fn discrete_costs(trajectory: &[ExtendedState]) -> Result<CostPair> {
    let last = trajectory.last().ok_or(Error::EmptyTrajectory)?;
    Ok(CostPair { j1: last.upsilon1, j2: last.upsilon2 })
}

/// Independent quadrature of the energy bookkeeping terms along a simulated
/// trajectory.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnergyAudit {
    /// Psi(end) - Psi(start) [J]
    pub delta_psi: f64,
    /// Trapezoid of B_h delta^2 [J]
    pub viscous_loss: f64,
    /// Trapezoid of z' S_r z [J]
    pub radiation_loss: f64,
    /// Trapezoid of u / R_0 [J]
    pub electrical_loss: f64,
    /// Trapezoid of d * delta [J]
    pub wave_work: f64,
    /// delta_psi + losses - wave_work, from the quadrature
    pub j1_quadrature: f64,
    /// delta_psi + Upsilon1(end), from the integrated bookkeeping state
    pub j1_bookkeeping: f64,
    /// |j1_quadrature - j1_bookkeeping|
    pub residual: f64,
}

/// Recompute each integral term of the energy cost by trapezoid quadrature
/// over the trajectory knots and compare with the RK4-integrated Upsilon1.
pub fn continuous_energy_audit(
    trajectory: &[ExtendedState],
    u: &[f64],
    d: &[f64],
    step: f64,
    p: &PlantParams,
) -> Result<EnergyAudit> {
    let n = trajectory.len();
    if n == 0 {
        return Err(Error::EmptyTrajectory);
    }
    if u.len() != n {
        return Err(Error::Length { expected: n, actual: u.len() });
    }
    if d.len() != n {
        return Err(Error::Length { expected: n, actual: d.len() });
    }

    let mut viscous = 0.0;
    let mut radiation = 0.0;
    let mut electrical = 0.0;
    let mut wave = 0.0;
    for k in 0..n {
        let xi = &trajectory[k];
        let weight = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let s_z = &p.radiation.s * &xi.z;
        viscous += weight * p.hydrodynamic_damping * xi.delta * xi.delta;
        radiation += weight * xi.z.dot(&s_z);
        electrical += weight * u[k] / p.loss_resistance;
        wave += weight * d[k] * xi.delta;
    }
    viscous *= step;
    radiation *= step;
    electrical *= step;
    wave *= step;

    let psi0 = storage(&trajectory[0].state(), u[0], p);
    let psi1 = storage(&trajectory[n - 1].state(), u[n - 1], p);
    let delta_psi = psi1 - psi0;
    let j1_quadrature = delta_psi + viscous + radiation + electrical - wave;
    let j1_bookkeeping = delta_psi + trajectory[n - 1].upsilon1;
    Ok(EnergyAudit {
        delta_psi,
        viscous_loss: viscous,
        radiation_loss: radiation,
        electrical_loss: electrical,
        wave_work: wave,
        j1_quadrature,
        j1_bookkeeping,
        residual: (j1_quadrature - j1_bookkeeping).abs(),
    })
}
