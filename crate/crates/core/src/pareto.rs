//! Trade-off fronts between extracted energy (J1) and membrane damage (J2):
//! sweep the weight schedule, solve each scalarization, and mark dominated
//! points.

use rayon::prelude::*;

use crate::config::{Config, PlantParams, SolverConfig};
use crate::error::Result;
use crate::mpc::{run_mpc, MpcConfig, WeightPolicy};
use crate::objectives::{CostPair, Weights};
use crate::ocp::{solve, OcpInstance};
use crate::optim::Status;
use crate::plant::ExtendedState;
use crate::waves::{sample_excitation, WaveRealization};

/// One point on a front.
#[derive(Debug, Clone)]
pub struct FrontPoint {
    pub w2: f64,
    /// Exact-mode costs of the solution.
    pub costs: CostPair,
    /// Set by `mark_dominance`.
    pub dominated: bool,
    pub status: Status,
    pub iterations: usize,
}

/// Mark points dominated by another point (no worse in both costs, strictly
/// better in one). Order-independent: ties are kept on both sides.
pub fn mark_dominance(points: &mut [FrontPoint]) {
    for i in 0..points.len() {
        let a = points[i].costs;
        points[i].dominated = points.iter().enumerate().any(|(j, other)| {
            if i == j {
                return false;
            }
            let b = other.costs;
            b.j1 <= a.j1 && b.j2 <= a.j2 && (b.j1 < a.j1 || b.j2 < a.j2)
        });
    }
}

/// Sweep the w2 values over one finite-horizon problem instance, solving the
/// scalarizations in parallel. Points come back in the given weight order.
pub fn sweep_ocp(
    plant: &PlantParams,
    wave: &WaveRealization,
    horizon_steps: usize,
    step: f64,
    kappa: f64,
    energy_scale: f64,
    w2_values: &[f64],
    solver: &SolverConfig,
) -> Result<Vec<FrontPoint>> {
    let d = sample_excitation(wave, 0, horizon_steps, step);
    let mut points: Vec<FrontPoint> = w2_values
        .par_iter()
        .map(|&w2| {
            let inst = OcpInstance {
                plant: plant.clone(),
                xi0: ExtendedState::zero(plant.radiation.order()),
                u0: 0.0,
                d: d.clone(),
                weights: Weights::from_w2(w2)?,
                step,
                kappa,
                energy_scale,
            };
            let res = solve(&inst, None, solver)?;
            Ok(FrontPoint {
                w2,
                costs: res.costs,
                dominated: false,
                status: res.status,
                iterations: res.iterations,
            })
        })
        .collect::<Result<_>>()?;
    mark_dominance(&mut points);
    Ok(points)
}

/// Sweep fixed weights over full receding-horizon runs on one realization.
pub fn sweep_mpc_fixed_weights(
    cfg: &Config,
    mpc: &MpcConfig,
    wave: &WaveRealization,
    w2_values: &[f64],
) -> Result<Vec<FrontPoint>> {
    let mut points: Vec<FrontPoint> = w2_values
        .par_iter()
        .map(|&w2| {
            let log = run_mpc(
                mpc,
                WeightPolicy::Fixed(Weights::from_w2(w2)?),
                &cfg.plant,
                wave,
                &cfg.solver,
            )?;
            Ok(FrontPoint {
                w2,
                costs: log.costs,
                dominated: false,
                status: Status::Converged,
                iterations: log.solves.len(),
            })
        })
        .collect::<Result<_>>()?;
    mark_dominance(&mut points);
    Ok(points)
}
