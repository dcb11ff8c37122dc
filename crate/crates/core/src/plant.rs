//! DEG-WEC dynamics: flap angle/velocity, radiation states, and the two
//! accumulated cost integrals, advanced by classical RK4 with first-order
//! hold on the input and the wave excitation.

use nalgebra::DVector;

use crate::config::PlantParams;
use crate::error::{Error, Result};
use crate::objectives::{damage_integrand, damage_integrand_slope, DamageMode};

/// Physical state of the flap and the radiation model.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Flap angle [rad]
    pub theta: f64,
    /// Flap angular velocity [rad/s]
    pub delta: f64,
    /// Radiation state vector, length n
    pub z: DVector<f64>,
}

/// State extended with the accumulated energy integrand (Upsilon1 [J]) and
/// accumulated damage (Upsilon2 [-]).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub theta: f64,
    pub delta: f64,
    pub z: DVector<f64>,
    pub upsilon1: f64,
    pub upsilon2: f64,
}

impl ExtendedState {
    pub fn zero(n: usize) -> Self {
        ExtendedState {
            theta: 0.0,
            delta: 0.0,
            z: DVector::zeros(n),
            upsilon1: 0.0,
            upsilon2: 0.0,
        }
    }

    pub fn from_state(x: State) -> Self {
        ExtendedState { theta: x.theta, delta: x.delta, z: x.z, upsilon1: 0.0, upsilon2: 0.0 }
    }

    pub fn state(&self) -> State {
        State { theta: self.theta, delta: self.delta, z: self.z.clone() }
    }

    /// Flat layout: [theta, delta, z.., Upsilon1, Upsilon2].
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.z.len();
        let mut v = DVector::zeros(n + 4);
        v[0] = self.theta;
        v[1] = self.delta;
        v.rows_mut(2, n).copy_from(&self.z);
        v[n + 2] = self.upsilon1;
        v[n + 3] = self.upsilon2;
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let n = v.len() - 4;
        ExtendedState {
            theta: v[0],
            delta: v[1],
            z: v.rows(2, n).into_owned(),
            upsilon1: v[n + 2],
            upsilon2: v[n + 3],
        }
    }
}

/// Time derivative of the extended state; pure function.
pub fn derivative(
    xi: &ExtendedState,
    u: f64,
    d: f64,
    p: &PlantParams,
    mode: DamageMode,
) -> ExtendedState {
    ExtendedState::from_vector(&deriv_vec(&xi.to_vector(), u, d, p, mode))
}

pub(crate) fn deriv_vec(
    x: &DVector<f64>,
    u: f64,
    d: f64,
    p: &PlantParams,
    mode: DamageMode,
) -> DVector<f64> {
    let n = p.radiation.order();
    debug_assert_eq!(x.len(), n + 4);
    let theta = x[0];
    let delta = x[1];
    let z = x.rows(2, n);

    let mut out = DVector::zeros(n + 4);
    out[0] = delta;
    let radiation_torque = p.radiation.c.dot(&z);
    out[1] = (-p.hydrostatic_stiffness * theta
        - p.hydrodynamic_damping * delta
        - radiation_torque
        + d
        - p.capacitance * theta * u)
        / p.inertia;
    let zdot = &p.radiation.a * z + &p.radiation.b * delta;
    out.rows_mut(2, n).copy_from(&zdot);
    let s_z = &p.radiation.s * z;
    out[n + 2] =
        p.hydrodynamic_damping * delta * delta + z.dot(&s_z) + u / p.loss_resistance - d * delta;
    out[n + 3] = damage_integrand(u, p.u_th, p.damage_normalization, mode);
    out
}

/// Vector-Jacobian product of the derivative: given adjoint `v`, returns
/// (df/dx)' v and (df/du)' v.
pub(crate) fn deriv_vjp(
    x: &DVector<f64>,
    u: f64,
    d: f64,
    p: &PlantParams,
    mode: DamageMode,
    v: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let n = p.radiation.order();
    let theta = x[0];
    let delta = x[1];
    let z = x.rows(2, n);
    let v0 = v[0];
    let v1 = v[1];
    let vz = v.rows(2, n);
    let v_ups1 = v[n + 2];
    let v_ups2 = v[n + 3];

    let mut gx = DVector::zeros(n + 4);
    gx[0] = v1 * (-(p.hydrostatic_stiffness + p.capacitance * u) / p.inertia);
    gx[1] = v0 - v1 * p.hydrodynamic_damping / p.inertia
        + p.radiation.b.dot(&vz)
        + v_ups1 * (2.0 * p.hydrodynamic_damping * delta - d);
    let gz = p.radiation.c.scale(-v1 / p.inertia)
        + p.radiation.a.tr_mul(&vz)
        + (&p.radiation.s * z).scale(2.0 * v_ups1);
    gx.rows_mut(2, n).copy_from(&gz);

    let gu = v1 * (-p.capacitance * theta / p.inertia)
        + v_ups1 / p.loss_resistance
        + v_ups2 * damage_integrand_slope(u, p.u_th, p.damage_normalization, mode);
    (gx, gu)
}

/// One classical RK4 step with first-order hold: at stage offset c the input
/// is (1-c) u_k + c u_{k+1} and the excitation likewise, c in {0, 1/2, 1}.
pub fn rk4_foh_step(
    xi: &ExtendedState,
    u_k: f64,
    u_k1: f64,
    d_k: f64,
    d_k1: f64,
    step: f64,
    p: &PlantParams,
    mode: DamageMode,
) -> ExtendedState {
    ExtendedState::from_vector(&rk4_vec(&xi.to_vector(), u_k, u_k1, d_k, d_k1, step, p, mode))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn rk4_vec(
    x: &DVector<f64>,
    u_k: f64,
    u_k1: f64,
    d_k: f64,
    d_k1: f64,
    h: f64,
    p: &PlantParams,
    mode: DamageMode,
) -> DVector<f64> {
    let u_mid = 0.5 * (u_k + u_k1);
    let d_mid = 0.5 * (d_k + d_k1);
    let k1 = deriv_vec(x, u_k, d_k, p, mode);
    let k2 = deriv_vec(&(x + (0.5 * h) * &k1), u_mid, d_mid, p, mode);
    let k3 = deriv_vec(&(x + (0.5 * h) * &k2), u_mid, d_mid, p, mode);
    let k4 = deriv_vec(&(x + h * &k3), u_k1, d_k1, p, mode);
    x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Reverse-mode step through [`rk4_vec`]: given the adjoint of the step
/// output, returns the adjoint of the step input state and the gradients
/// with respect to the two input knots. Exact for the discretized map.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rk4_vjp(
    x: &DVector<f64>,
    u_k: f64,
    u_k1: f64,
    d_k: f64,
    d_k1: f64,
    h: f64,
    p: &PlantParams,
    mode: DamageMode,
    lambda: &DVector<f64>,
) -> (DVector<f64>, f64, f64) {
    let u_mid = 0.5 * (u_k + u_k1);
    let d_mid = 0.5 * (d_k + d_k1);
    // Recompute stage states.
    let k1 = deriv_vec(x, u_k, d_k, p, mode);
    let x2 = x + (0.5 * h) * &k1;
    let k2 = deriv_vec(&x2, u_mid, d_mid, p, mode);
    let x3 = x + (0.5 * h) * &k2;
    let k3 = deriv_vec(&x3, u_mid, d_mid, p, mode);
    let x4 = x + h * &k3;

    // Backward through xi' = xi + h/6 (k1 + 2 k2 + 2 k3 + k4).
    let k4_bar = (h / 6.0) * lambda;
    let (w4, gu_end) = deriv_vjp(&x4, u_k1, d_k1, p, mode, &k4_bar);
    let k3_bar = (h / 3.0) * lambda + h * &w4;
    let (w3, gu_mid_a) = deriv_vjp(&x3, u_mid, d_mid, p, mode, &k3_bar);
    let k2_bar = (h / 3.0) * lambda + (0.5 * h) * &w3;
    let (w2, gu_mid_b) = deriv_vjp(&x2, u_mid, d_mid, p, mode, &k2_bar);
    let k1_bar = (h / 6.0) * lambda + (0.5 * h) * &w2;
    let (w1, gu_start) = deriv_vjp(x, u_k, d_k, p, mode, &k1_bar);

    let lambda_prev = lambda + w1 + w2 + w3 + w4;
    let gu_mid = gu_mid_a + gu_mid_b;
    (lambda_prev, gu_start + 0.5 * gu_mid, gu_end + 0.5 * gu_mid)
}

/// Storage function Psi [J]: kinetic + hydrostatic + radiation +
/// electrostatic energy.
pub fn storage(x: &State, u: f64, p: &PlantParams) -> f64 {
    let q_z = &p.radiation.q * &x.z;
    0.5 * p.inertia * x.delta * x.delta
        + 0.5 * p.hydrostatic_stiffness * x.theta * x.theta
        + 0.5 * x.z.dot(&q_z)
        + 0.5 * p.capacitance * (1.0 - x.theta * x.theta) * u
}

/// Chain RK4/FOH steps over knot sequences `u` and `d` (same length N);
/// returns N states with `trajectory[0] = xi0`. Applied inputs must respect
/// the box [0, u_max].
pub fn simulate(
    xi0: &ExtendedState,
    u: &[f64],
    d: &[f64],
    step: f64,
    p: &PlantParams,
    mode: DamageMode,
) -> Result<Vec<ExtendedState>> {
    if u.len() != d.len() {
        return Err(Error::Length { expected: u.len(), actual: d.len() });
    }
    for (k, &uk) in u.iter().enumerate() {
        // Tiny tolerance for round-off from projection arithmetic.
        if !(uk >= -1e-9 * p.u_max && uk <= p.u_max * (1.0 + 1e-9)) {
            return Err(Error::InputOutOfBounds { index: k, value: uk, u_max: p.u_max });
        }
    }

    let mut trajectory = Vec::with_capacity(u.len());
    let mut x = xi0.to_vector();
    trajectory.push(xi0.clone());
    let mut warned = false;
    for k in 0..u.len().saturating_sub(1) {
        x = rk4_vec(&x, u[k], u[k + 1], d[k], d[k + 1], step, p, mode);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: k + 1 });
        }
        if !warned && x[0].abs() > p.theta_valid {
            eprintln!(
                "warning: |theta| = {:.4} rad exceeds the model-validity bound {:.4} at t = {:.2} s",
                x[0].abs(),
                p.theta_valid,
                (k + 1) as f64 * step
            );
            warned = true;
        }
        trajectory.push(ExtendedState::from_vector(&x));
    }
    Ok(trajectory)
}
