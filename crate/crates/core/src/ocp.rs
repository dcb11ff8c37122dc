//! Single-shooting transcription of the scalarized optimal control problem:
//! states are eliminated by forward simulation, leaving a box-constrained
//! problem over the input knots with the first knot pinned for input
//! continuity. The gradient is exact reverse-mode accumulation through the
//! RK4/FOH chain.

use nalgebra::DVector;

use crate::config::{PlantParams, SolverConfig};
use crate::error::{Error, Result};
use crate::objectives::{CostPair, DamageMode, Weights};
use crate::optim::{self, BoxProblem, Status};
use crate::plant::{rk4_vec, rk4_vjp, ExtendedState};

/// One discretized problem instance on a fixed excitation preview.
#[derive(Debug, Clone)]
pub struct OcpInstance {
    pub plant: PlantParams,
    pub xi0: ExtendedState,
    /// Pinned first input [V^2] (continuity with the previously applied knot).
    pub u0: f64,
    /// Excitation preview at the N knots.
    pub d: Vec<f64>,
    pub weights: Weights,
    /// Integration step [s].
    pub step: f64,
    /// Softplus sharpness used inside the solver.
    pub kappa: f64,
    /// Energy normalization dividing J1 in the scalarized objective [J].
    pub energy_scale: f64,
}

impl OcpInstance {
    pub fn knots(&self) -> usize {
        self.d.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d.len() < 2 {
            return Err(Error::validation("ocp.d", "preview needs at least two knots"));
        }
        if self.d.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("ocp.d", "preview must be finite"));
        }
        if !(self.u0 >= 0.0 && self.u0 <= self.plant.u_max) {
            return Err(Error::InputOutOfBounds {
                index: 0,
                value: self.u0,
                u_max: self.plant.u_max,
            });
        }
        Ok(())
    }
}

/// Solved input trajectory with cost values and solver diagnostics.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Vec<f64>,
    /// Scalarized (smoothed) objective value at the solution.
    pub cost: f64,
    /// Exact-mode recomputation of (J1, J2) at the solution.
    pub costs: CostPair,
    pub iterations: usize,
    pub stationarity: f64,
    pub status: Status,
}

/// Scalarized objective `w1 J1/scale + w2 J2_smooth` and its exact gradient
/// with respect to the input knots, by forward simulation plus reverse
/// (adjoint) accumulation through the discrete RK4/FOH map.
pub fn objective_and_gradient(inst: &OcpInstance, u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = inst.knots();
    if u.len() != n {
        return Err(Error::Length { expected: n, actual: u.len() });
    }
    let p = &inst.plant;
    let mode = DamageMode::Smoothed { kappa: inst.kappa };
    let dim = p.radiation.order() + 4;

    // Forward pass, storing every knot state.
    let mut states: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut x = inst.xi0.to_vector();
    states.push(x.clone());
    for k in 0..n - 1 {
        x = rk4_vec(&x, u[k], u[k + 1], inst.d[k], inst.d[k + 1], inst.step, p, mode);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: k + 1 });
        }
        states.push(x.clone());
    }
    let cost = inst.weights.w1 * x[dim - 2] / inst.energy_scale + inst.weights.w2 * x[dim - 1];

    // Reverse pass.
    let mut lambda = DVector::zeros(dim);
    lambda[dim - 2] = inst.weights.w1 / inst.energy_scale;
    lambda[dim - 1] = inst.weights.w2;
    let mut grad = vec![0.0; n];
    for k in (0..n - 1).rev() {
        let (prev, g_k, g_k1) = rk4_vjp(
            &states[k],
            u[k],
            u[k + 1],
            inst.d[k],
            inst.d[k + 1],
            inst.step,
            p,
            mode,
            &lambda,
        );
        grad[k] += g_k;
        grad[k + 1] += g_k1;
        lambda = prev;
    }
    Ok((cost, grad))
}

/// Solve the instance by projected quasi-Newton descent on the input box,
/// then recompute the costs in exact damage mode for reporting.
pub fn solve(
    inst: &OcpInstance,
    warm_start: Option<&[f64]>,
    solver: &SolverConfig,
) -> Result<SolveResult> {
    inst.validate()?;
    let n = inst.knots();
    // Decide in normalized units v = u / u_max so the unit box, the
    // stationarity tolerance, and the quasi-Newton scaling are all O(1).
    let u_max = inst.plant.u_max;
    let prob = BoxProblem::new(vec![0.0; n], vec![1.0; n], solver)?
        .with_pin(0, inst.u0 / u_max)?;

    let mut x0 = match warm_start {
        Some(w) => {
            if w.len() != n {
                return Err(Error::Length { expected: n, actual: w.len() });
            }
            w.iter().map(|&u| u / u_max).collect()
        }
        None => vec![0.0; n],
    };
    x0[0] = inst.u0 / u_max;

    let mut u_buf = vec![0.0; n];
    let res = optim::minimize(
        &prob,
        |v, g| {
            for (u, &vi) in u_buf.iter_mut().zip(v) {
                *u = vi * u_max;
            }
            match objective_and_gradient(inst, &u_buf) {
                Ok((cost, grad)) => {
                    for (gi, &du) in g.iter_mut().zip(&grad) {
                        *gi = du * u_max;
                    }
                    cost
                }
                Err(_) => {
                    g.iter_mut().for_each(|v| *v = 0.0);
                    f64::INFINITY
                }
            }
        },
        &x0,
    );

    let mut u: Vec<f64> = res.x.iter().map(|&v| v * u_max).collect();
    u[0] = inst.u0;
    let costs = exact_costs(inst, &u)?;
    Ok(SolveResult {
        u,
        cost: res.value,
        costs,
        iterations: res.iterations,
        stationarity: res.projected_gradient_norm,
        status: res.status,
    })
}

/// Exact-mode (J1, J2) of an input sequence on this instance.
pub fn exact_costs(inst: &OcpInstance, u: &[f64]) -> Result<CostPair> {
    let traj = crate::plant::simulate(
        &inst.xi0,
        u,
        &inst.d,
        inst.step,
        &inst.plant,
        DamageMode::Exact,
    )?;
    crate::objectives::discrete_costs(&traj)
}
